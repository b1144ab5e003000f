"""Corpus and QA ingestion, dataset statistics, and answer quality checks.

File formats are line-delimited JSON (UTF-8). Documents carry a domain tag;
QA records carry a long-form reference answer stored as an explicit sentence
list with 1-based citation indices into the query's gold documents, plus the
extractive short-answer spans the reference was written from.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .jsonl import LineParseError, read_records, write_records

logger = logging.getLogger(__name__)

KNOWN_DOMAINS = ("BI", "FI", "LI", "RE", "TE", "SC", "WR")

# Queries citing more ground-truth documents than this are dropped at ingest.
MAX_GOLD_DOCS = 80


class IngestError(ValueError):
    """A corpus or QA file failed validation."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(ValueError):
    """An operation was called with input violating its preconditions."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    domain: str
    text: str


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    domain: str
    text: str
    gold_doc_ids: tuple[str, ...]


@dataclass(frozen=True)
class ShortAnswerSpan:
    query_id: str
    doc_id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    text: str
    citations: tuple[int, ...]  # 1-based indices into the query's gold_doc_ids


@dataclass(frozen=True)
class ReferenceAnswer:
    query_id: str
    sentences: tuple[Sentence, ...]

    @property
    def text(self) -> str:
        return " ".join(sentence.text for sentence in self.sentences)

    @property
    def cited_doc_indices(self) -> frozenset[int]:
        return frozenset(i for s in self.sentences for i in s.citations)


@dataclass(frozen=True)
class QaRecord:
    query: QueryRecord
    reference: ReferenceAnswer
    short_answers: tuple[ShortAnswerSpan, ...]


class Corpus:
    """Document collection with id lookup; single-writer during ingest."""

    def __init__(self) -> None:
        self._docs: dict[str, Document] = {}

    def add(self, doc: Document, line_no: int | None = None) -> None:
        if doc.doc_id in self._docs:
            raise IngestError(f"duplicate doc_id {doc.doc_id!r}", line_no)
        self._docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def documents(self) -> Iterable[Document]:
        return self._docs.values()


def _require_fields(record: dict, fields: Sequence[str], line_no: int) -> None:
    missing = [name for name in fields if name not in record]
    if missing:
        raise IngestError(f"malformed record, missing fields {missing}", line_no)


def ingest_corpus(path: str | Path, domain: str | None = None) -> Corpus:
    """Load a documents file; `domain` fills records without their own tag."""
    corpus = Corpus()
    try:
        for line_no, record in read_records(path):
            _require_fields(record, ["doc_id", "text"], line_no)
            doc_domain = record.get("domain", domain)
            if doc_domain is None:
                raise IngestError("malformed record, missing field 'domain'", line_no)
            text = str(record["text"])
            if not text.strip():
                raise IngestError("malformed record, empty text", line_no)
            corpus.add(
                Document(doc_id=str(record["doc_id"]), domain=str(doc_domain), text=text),
                line_no,
            )
    except LineParseError as exc:
        raise IngestError("malformed record, invalid JSON", exc.line_no) from exc
    logger.info("ingested %d documents from %s", len(corpus), path)
    return corpus


def _parse_reference(record: dict, query_id: str, n_gold: int, line_no: int) -> ReferenceAnswer:
    reference = record.get("reference")
    if not isinstance(reference, dict) or "sentences" not in reference:
        raise IngestError(f"query {query_id!r}: malformed reference", line_no)
    sentences = []
    for entry in reference["sentences"]:
        if "text" not in entry or "citations" not in entry:
            raise IngestError(f"query {query_id!r}: malformed sentence entry", line_no)
        citations = tuple(int(c) for c in entry["citations"])
        for index in citations:
            if index < 1 or index > n_gold:
                raise IngestError(
                    f"query {query_id!r}: citation index {index} out of range 1..{n_gold}",
                    line_no,
                )
        sentences.append(Sentence(text=str(entry["text"]), citations=citations))
    return ReferenceAnswer(query_id=query_id, sentences=tuple(sentences))


def ingest_qa(
    path: str | Path, corpus: Corpus, max_gold_docs: int = MAX_GOLD_DOCS
) -> list[QaRecord]:
    """Load a QA file, validating referential integrity against the corpus.

    Records with more than `max_gold_docs` gold documents are dropped (with a
    logged count), mirroring the dataset's own filtering rule. All other
    violations raise IngestError.
    """
    records: list[QaRecord] = []
    seen: set[str] = set()
    dropped = 0
    try:
        for line_no, record in read_records(path):
            _require_fields(
                record, ["query_id", "domain", "question", "gold_doc_ids", "reference"], line_no
            )
            query_id = str(record["query_id"])
            if query_id in seen:
                raise IngestError(f"duplicate query_id {query_id!r}", line_no)
            seen.add(query_id)
            gold = tuple(str(d) for d in record["gold_doc_ids"])
            for doc_id in gold:
                if doc_id not in corpus:
                    raise IngestError(
                        f"query {query_id!r}: gold_doc_id {doc_id!r} not in corpus", line_no
                    )
            if len(gold) > max_gold_docs:
                dropped += 1
                continue
            query = QueryRecord(
                query_id=query_id,
                domain=str(record["domain"]),
                text=str(record["question"]),
                gold_doc_ids=gold,
            )
            reference = _parse_reference(record, query_id, len(gold), line_no)
            spans = []
            for entry in record.get("short_answers", []):
                doc_id = str(entry["doc_id"])
                if doc_id not in gold:
                    raise IngestError(
                        f"query {query_id!r}: short answer doc_id {doc_id!r} not a gold doc",
                        line_no,
                    )
                spans.append(ShortAnswerSpan(query_id=query_id, doc_id=doc_id, text=str(entry["text"])))
            records.append(QaRecord(query=query, reference=reference, short_answers=tuple(spans)))
    except LineParseError as exc:
        raise IngestError("malformed record, invalid JSON", exc.line_no) from exc
    if dropped:
        logger.info("dropped %d queries with more than %d gold documents", dropped, max_gold_docs)
    return records


def corpus_record(doc: Document) -> dict:
    return {"doc_id": doc.doc_id, "domain": doc.domain, "text": doc.text}


def qa_record(record: QaRecord) -> dict:
    return {
        "query_id": record.query.query_id,
        "domain": record.query.domain,
        "question": record.query.text,
        "gold_doc_ids": list(record.query.gold_doc_ids),
        "reference": {
            "sentences": [
                {"text": s.text, "citations": list(s.citations)}
                for s in record.reference.sentences
            ]
        },
        "short_answers": [{"doc_id": s.doc_id, "text": s.text} for s in record.short_answers],
    }


def write_corpus(corpus: Corpus, path: str | Path) -> int:
    return write_records(path, (corpus_record(d) for d in corpus.documents()))


def write_qa(records: Iterable[QaRecord], path: str | Path) -> int:
    return write_records(path, (qa_record(r) for r in records))


# --- statistics ---


@dataclass(frozen=True)
class DomainStats:
    domain: str
    num_queries: int
    num_documents: int
    num_passages: int
    answers_per_query: float
    words_per_answer: float


@dataclass(frozen=True)
class StatsReport:
    per_domain: tuple[DomainStats, ...]
    overall: DomainStats

    def to_records(self) -> list[dict]:
        rows = [row.__dict__ for row in self.per_domain]
        rows.append(self.overall.__dict__)
        return rows


def _domain_order(domains: Iterable[str]) -> list[str]:
    present = set(domains)
    ordered = [d for d in KNOWN_DOMAINS if d in present]
    ordered.extend(sorted(present - set(KNOWN_DOMAINS)))
    return ordered


def corpus_stats(corpus: Corpus, qa: Sequence[QaRecord], chunk_size: int = 100) -> StatsReport:
    """Per-domain and overall dataset summary; a word is a whitespace token."""
    domains = _domain_order(
        [d.domain for d in corpus.documents()] + [r.query.domain for r in qa]
    )
    per_domain = []
    for domain in domains:
        docs = [d for d in corpus.documents() if d.domain == domain]
        records = [r for r in qa if r.query.domain == domain]
        per_domain.append(_stats_row(domain, docs, records, chunk_size))
    overall = _stats_row("Overall", list(corpus.documents()), list(qa), chunk_size)
    return StatsReport(per_domain=tuple(per_domain), overall=overall)


def _stats_row(
    domain: str, docs: Sequence[Document], records: Sequence[QaRecord], chunk_size: int
) -> DomainStats:
    num_queries = len(records)
    num_answers = sum(1 for r in records if r.reference.sentences)
    total_words = sum(len(r.reference.text.split()) for r in records)
    num_passages = sum(math.ceil(len(d.text.split()) / chunk_size) for d in docs)
    return DomainStats(
        domain=domain,
        num_queries=num_queries,
        num_documents=len(docs),
        num_passages=num_passages,
        answers_per_query=num_answers / num_queries if num_queries else 0.0,
        words_per_answer=total_words / num_answers if num_answers else 0.0,
    )


def render_stats_table(report: StatsReport) -> str:
    """Aligned-column plain-text rendering of a StatsReport."""
    header = ["Domain", "|Q|", "|D|", "|P|", "A/Q", "W/A"]
    rows = [header]
    for row in list(report.per_domain) + [report.overall]:
        rows.append(
            [
                row.domain,
                str(row.num_queries),
                str(row.num_documents),
                str(row.num_passages),
                f"{row.answers_per_query:.1f}",
                f"{row.words_per_answer:.1f}",
            ]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(widths[i]) if i else cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in rows]
    return "\n".join(lines)


# --- citation usage distributions ---


@dataclass(frozen=True)
class UsageHistogram:
    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def fractions(self) -> dict[int, float]:
        total = self.total
        return {bucket: count / total for bucket, count in sorted(self.counts.items())}


@dataclass(frozen=True)
class UsageDistribution:
    answer_level: UsageHistogram
    sentence_level: UsageHistogram


def doc_usage_distribution(refs: Sequence[ReferenceAnswer]) -> UsageDistribution:
    """Histograms of distinct cited documents per answer and per sentence."""
    answer_counts: dict[int, int] = {}
    sentence_counts: dict[int, int] = {}
    for ref in refs:
        used = ref.cited_doc_indices
        answer_counts[len(used)] = answer_counts.get(len(used), 0) + 1
        for sentence in ref.sentences:
            bucket = len(set(sentence.citations))
            sentence_counts[bucket] = sentence_counts.get(bucket, 0) + 1
    return UsageDistribution(
        answer_level=UsageHistogram(answer_counts),
        sentence_level=UsageHistogram(sentence_counts),
    )


# --- quality control ---


@dataclass(frozen=True)
class CitationCheck:
    flagged_sentences: tuple[int, ...]  # 0-based positions within the answer
    error_count: int


def validate_citations(ref: ReferenceAnswer, n_docs: int) -> CitationCheck:
    """Flag sentences whose citation list is empty or out of range."""
    flagged = []
    for position, sentence in enumerate(ref.sentences):
        if not sentence.citations or any(i < 1 or i > n_docs for i in sentence.citations):
            flagged.append(position)
    return CitationCheck(flagged_sentences=tuple(flagged), error_count=len(flagged))


_NON_WORD_RE = re.compile(r"[^\w\s]", re.UNICODE)


def normalize_for_match(text: str) -> str:
    """Lowercase, punctuation replaced by spaces, whitespace collapsed."""
    return " ".join(_NON_WORD_RE.sub(" ", text.lower()).split())


def coverage_ratio(ref: ReferenceAnswer, spans: Sequence[ShortAnswerSpan]) -> float:
    """Fraction of short-answer spans present (normalized) in the answer.

    Reported as a soft metric: annotators may rephrase, so a ratio below 1.0
    is a review signal, not a hard failure.
    """
    if not spans:
        raise ValidationError("coverage_ratio needs at least one span")
    haystack = normalize_for_match(ref.text)
    matched = sum(1 for span in spans if normalize_for_match(span.text) in haystack)
    return matched / len(spans)


@dataclass(frozen=True)
class QcRecord:
    query_id: str
    incompleteness: bool
    redundancy: bool
    incoherence: bool
    citation_error: bool
    coverage_ratio: float
    citation_error_count: int

    def to_record(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class QcReport:
    records: tuple[QcRecord, ...]

    def flagged(self) -> tuple[QcRecord, ...]:
        return tuple(
            r
            for r in self.records
            if r.incompleteness or r.redundancy or r.incoherence or r.citation_error
        )


def qc_report(qa: Sequence[QaRecord]) -> QcReport:
    """Automated checks per answer.

    Incompleteness and citation errors follow the annotation rules directly;
    redundancy (a sentence grounded in no gold document) and incoherence
    (duplicated sentences) are heuristics only.
    """
    records = []
    for record in qa:
        n_docs = len(record.query.gold_doc_ids)
        check = validate_citations(record.reference, n_docs)
        if record.short_answers:
            ratio = coverage_ratio(record.reference, record.short_answers)
        else:
            ratio = 1.0
        normalized = [normalize_for_match(s.text) for s in record.reference.sentences]
        duplicated = len(set(normalized)) < len(normalized)
        ungrounded = any(
            not s.citations or all(i < 1 or i > n_docs for i in s.citations)
            for s in record.reference.sentences
        )
        records.append(
            QcRecord(
                query_id=record.query.query_id,
                incompleteness=ratio < 1.0,
                redundancy=ungrounded,
                incoherence=duplicated,
                citation_error=check.error_count > 0,
                coverage_ratio=ratio,
                citation_error_count=check.error_count,
            )
        )
    return QcReport(records=tuple(records))


def render_qc_table(report: QcReport) -> str:
    header = ["query_id", "incomplete", "redundant", "incoherent", "citation_err", "coverage"]
    rows = [header]
    for r in report.records:
        rows.append(
            [
                r.query_id,
                "yes" if r.incompleteness else "no",
                "yes" if r.redundancy else "no",
                "yes" if r.incoherence else "no",
                str(r.citation_error_count),
                f"{r.coverage_ratio:.2f}",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows
    )
