"""Passage chunking, BM25 indexing, and a pluggable retriever contract.

Documents are split into fixed-size chunks of whitespace tokens (default 100).
The built-in retriever is an inverted-index BM25 (k1=1.2, b=0.75) with
lowercase alphanumeric tokenization; externally computed rankings can be
loaded from a results file instead, so stronger retrievers can be injected
without living in this package.
"""

from __future__ import annotations

import math
import re
import struct
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import Document, QueryRecord
from .jsonl import read_records, write_records

DEFAULT_CHUNK_SIZE = 100
DEFAULT_TOP_K = 5

BM25_K1 = 1.2
BM25_B = 0.75


class RetrievalError(ValueError):
    """Retrieval input failed validation."""


class IndexFormatError(RuntimeError):
    """A persisted index file has the wrong magic or version."""


@dataclass(frozen=True, order=True)
class PassageId:
    doc_id: str
    ordinal: int

    def __str__(self) -> str:
        return f"{self.doc_id}#{self.ordinal}"


@dataclass(frozen=True)
class Passage:
    passage_id: PassageId
    text: str
    token_count: int


@dataclass(frozen=True)
class ScoredHit:
    passage_id: PassageId
    score: float


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    hits: tuple[ScoredHit, ...]
    k_requested: int


def chunk_document(doc: Document, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Passage]:
    """Split a document into consecutive chunks of whitespace tokens.

    Every chunk has exactly `chunk_size` tokens except possibly the last;
    joining the chunks with single spaces reproduces the document's token
    stream.
    """
    if chunk_size < 1:
        raise RetrievalError(f"chunk_size must be >= 1, got {chunk_size}")
    tokens = doc.text.split()
    if not tokens:
        raise RetrievalError(f"document {doc.doc_id!r} is empty")
    passages = []
    for ordinal, start in enumerate(range(0, len(tokens), chunk_size)):
        group = tokens[start : start + chunk_size]
        passages.append(
            Passage(
                passage_id=PassageId(doc.doc_id, ordinal),
                text=" ".join(group),
                token_count=len(group),
            )
        )
    return passages


def chunk_corpus(documents: Iterable[Document], chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Passage]:
    passages: list[Passage] = []
    for doc in documents:
        passages.extend(chunk_document(doc, chunk_size))
    return passages


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def index_tokens(text: str) -> list[str]:
    """Indexing tokenization: lowercase, split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


class Retriever(Protocol):
    def retrieve(self, query: QueryRecord, k: int = DEFAULT_TOP_K) -> RetrievalResult: ...


class Bm25Index:
    """Inverted-index BM25 scorer over a fixed passage set.

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive for
    terms present in more than half the passages. Query tokens are scored
    with multiplicity. Build is single-writer; retrieval afterwards is pure.
    """

    def __init__(self, passages: Sequence[Passage], k1: float = BM25_K1, b: float = BM25_B):
        if not passages:
            raise RetrievalError("cannot index an empty passage set")
        self.k1 = k1
        self.b = b
        self._passages: dict[PassageId, Passage] = {}
        self._lengths: dict[PassageId, int] = {}
        self._postings: dict[str, dict[PassageId, int]] = {}
        for passage in passages:
            if passage.passage_id in self._passages:
                raise RetrievalError(f"duplicate passage_id {passage.passage_id}")
            self._passages[passage.passage_id] = passage
            tokens = index_tokens(passage.text)
            self._lengths[passage.passage_id] = len(tokens)
            for term, tf in Counter(tokens).items():
                self._postings.setdefault(term, {})[passage.passage_id] = tf
        self._avgdl = sum(self._lengths.values()) / len(self._lengths)

    @property
    def num_passages(self) -> int:
        return len(self._passages)

    @property
    def num_terms(self) -> int:
        return len(self._postings)

    @property
    def average_length(self) -> float:
        return self._avgdl

    def document_frequency(self, term: str) -> int:
        return len(self._postings.get(term, {}))

    def passage(self, passage_id: PassageId) -> Passage:
        return self._passages[passage_id]

    def passage_ids(self) -> set[PassageId]:
        return set(self._passages)

    def _idf(self, term: str) -> float:
        df = self.document_frequency(term)
        return math.log(1.0 + (self.num_passages - df + 0.5) / (df + 0.5))

    def retrieve(self, query: QueryRecord | str, k: int = DEFAULT_TOP_K) -> RetrievalResult:
        """Top-k passages by BM25 score, ties broken by ascending passage id."""
        if k < 1:
            raise RetrievalError(f"k must be >= 1, got {k}")
        if isinstance(query, str):
            query_id, query_text = "", query
        else:
            query_id, query_text = query.query_id, query.text
        scores: dict[PassageId, float] = {}
        for term in index_tokens(query_text):
            postings = self._postings.get(term)
            if not postings:
                continue
            idf = self._idf(term)
            for passage_id, tf in postings.items():
                length = self._lengths[passage_id]
                denom = tf + self.k1 * (1.0 - self.b + self.b * length / self._avgdl)
                scores[passage_id] = scores.get(passage_id, 0.0) + idf * tf * (self.k1 + 1.0) / denom
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
        hits = tuple(ScoredHit(passage_id=pid, score=score) for pid, score in ranked)
        return RetrievalResult(query_id=query_id, hits=hits, k_requested=k)

    # --- persistence: single binary file with a versioned header ---

    _MAGIC = b"PAIRARENA-IDX"
    _VERSION = 1

    def save(self, path: str | Path) -> None:
        import json

        payload = {
            "k1": self.k1,
            "b": self.b,
            "passages": [
                {
                    "doc_id": p.passage_id.doc_id,
                    "ordinal": p.passage_id.ordinal,
                    "text": p.text,
                    "token_count": p.token_count,
                }
                for p in self._passages.values()
            ],
        }
        blob = zlib.compress(json.dumps(payload, ensure_ascii=False).encode("utf-8"))
        with Path(path).open("wb") as fp:
            fp.write(self._MAGIC)
            fp.write(struct.pack(">I", self._VERSION))
            fp.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        import json

        raw = Path(path).read_bytes()
        if not raw.startswith(cls._MAGIC):
            raise IndexFormatError(f"{path}: not an index file (bad magic)")
        offset = len(cls._MAGIC)
        (version,) = struct.unpack(">I", raw[offset : offset + 4])
        if version != cls._VERSION:
            raise IndexFormatError(
                f"{path}: index format version {version} unsupported (expected {cls._VERSION})"
            )
        payload = json.loads(zlib.decompress(raw[offset + 4 :]).decode("utf-8"))
        passages = [
            Passage(
                passage_id=PassageId(entry["doc_id"], int(entry["ordinal"])),
                text=entry["text"],
                token_count=int(entry["token_count"]),
            )
            for entry in payload["passages"]
        ]
        return cls(passages, k1=payload["k1"], b=payload["b"])


def build_index(passages: Sequence[Passage]) -> Bm25Index:
    return Bm25Index(passages)


class PrecomputedRetriever:
    """Serves rankings loaded from a retrieval-results file."""

    def __init__(self, results: Mapping[str, RetrievalResult]):
        self._results = dict(results)

    def retrieve(self, query: QueryRecord, k: int = DEFAULT_TOP_K) -> RetrievalResult:
        result = self._results.get(query.query_id)
        if result is None:
            raise RetrievalError(f"no precomputed result for query {query.query_id!r}")
        return RetrievalResult(query_id=result.query_id, hits=result.hits[:k], k_requested=k)


def load_precomputed(
    path: str | Path,
    known_query_ids: Iterable[str],
    known_passage_ids: Iterable[PassageId],
) -> dict[str, RetrievalResult]:
    """Load a retrieval-results file, validating ids and score ordering."""
    queries = set(known_query_ids)
    passages = set(known_passage_ids)
    results: dict[str, RetrievalResult] = {}
    for line_no, record in read_records(path):
        query_id = str(record["query_id"])
        if query_id not in queries:
            raise RetrievalError(f"line {line_no}: unknown query_id {query_id!r}")
        if query_id in results:
            raise RetrievalError(f"line {line_no}: duplicate query_id {query_id!r}")
        hits = []
        previous: tuple[float, PassageId] | None = None
        for entry in record["hits"]:
            passage_id = PassageId(str(entry["doc_id"]), int(entry["ordinal"]))
            if passage_id not in passages:
                raise RetrievalError(
                    f"query {query_id!r}: unknown passage {passage_id} in results"
                )
            score = float(entry["score"])
            if previous is not None:
                if score > previous[0] or (score == previous[0] and passage_id <= previous[1]):
                    raise RetrievalError(
                        f"query {query_id!r}: hits out of order at passage {passage_id}"
                    )
            previous = (score, passage_id)
            hits.append(ScoredHit(passage_id=passage_id, score=score))
        results[query_id] = RetrievalResult(
            query_id=query_id, hits=tuple(hits), k_requested=len(hits)
        )
    return results


def result_record(result: RetrievalResult) -> dict:
    return {
        "query_id": result.query_id,
        "hits": [
            {"doc_id": h.passage_id.doc_id, "ordinal": h.passage_id.ordinal, "score": h.score}
            for h in result.hits
        ],
    }


def write_results(results: Iterable[RetrievalResult], path: str | Path) -> int:
    return write_records(path, (result_record(r) for r in results))
