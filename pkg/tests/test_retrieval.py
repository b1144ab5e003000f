import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairarena.corpus import Document, QueryRecord
from pairarena.jsonl import write_records
from pairarena.retrieval import (
    Bm25Index,
    IndexFormatError,
    Passage,
    PassageId,
    PrecomputedRetriever,
    RetrievalError,
    chunk_document,
    index_tokens,
    load_precomputed,
    write_results,
)


def doc(doc_id, text, domain="FI"):
    return Document(doc_id=doc_id, domain=domain, text=text)


class TestChunkDocument:
    def test_250_tokens_split_100_100_50(self):
        text = " ".join(f"t{i}" for i in range(250))
        passages = chunk_document(doc("d1", text), 100)
        assert [p.token_count for p in passages] == [100, 100, 50]
        assert [p.passage_id.ordinal for p in passages] == [0, 1, 2]

    def test_exact_boundary_single_passage(self):
        text = " ".join(f"t{i}" for i in range(100))
        passages = chunk_document(doc("d1", text), 100)
        assert len(passages) == 1
        assert passages[0].token_count == 100

    def test_whitespace_only_document_errors(self):
        with pytest.raises(RetrievalError, match="empty"):
            chunk_document(doc("d1", "   \n\t  "), 100)

    def test_chunk_size_below_one_errors(self):
        with pytest.raises(RetrievalError):
            chunk_document(doc("d1", "a b"), 0)

    @given(
        tokens=st.lists(st.text(alphabet="abcXYZ0129'.,-", min_size=1, max_size=8), min_size=1, max_size=320),
        chunk_size=st.integers(1, 120),
    )
    def test_conservation_property(self, tokens, chunk_size):
        document = doc("d1", " ".join(tokens))
        passages = chunk_document(document, chunk_size)
        rejoined = " ".join(p.text for p in passages).split()
        assert rejoined == document.text.split()
        assert all(p.token_count <= chunk_size for p in passages)
        assert all(p.token_count == chunk_size for p in passages[:-1])


FIXTURE_PASSAGES = [
    Passage(PassageId("p1", 0), "the cat sat on the mat", 6),
    Passage(PassageId("p2", 0), "the dog chased the cat across the yard", 8),
]


def brute_force_bm25(passages, query_text, k1=1.2, b=0.75):
    """Independent oracle: direct double loop over the textbook formula."""
    token_lists = [index_tokens(p.text) for p in passages]
    n = len(passages)
    avgdl = sum(len(t) for t in token_lists) / n
    scores = []
    for tokens in token_lists:
        score = 0.0
        for term in index_tokens(query_text):
            tf = tokens.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in token_lists if term in other)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len(tokens) / avgdl))
        scores.append(score)
    return scores


class TestBm25Index:
    def test_stats(self):
        index = Bm25Index(FIXTURE_PASSAGES)
        assert index.num_passages == 2
        assert index.document_frequency("cat") == 2
        assert index.document_frequency("mat") == 1
        assert index.average_length == 7.0

    def test_empty_passage_set_errors(self):
        with pytest.raises(RetrievalError):
            Bm25Index([])

    def test_rebuild_gives_identical_statistics(self):
        a = Bm25Index(FIXTURE_PASSAGES)
        b = Bm25Index(list(FIXTURE_PASSAGES))
        assert a.num_passages == b.num_passages
        assert a.num_terms == b.num_terms
        assert a.average_length == b.average_length

    def test_shared_term_document_frequency(self):
        passages = [Passage(PassageId(f"p{i}", 0), f"common word{i}", 2) for i in range(3)]
        index = Bm25Index(passages)
        assert index.document_frequency("common") == 3

    def test_hand_computed_scores_frozen(self):
        # Hand-derived for the two-passage fixture (k1=1.2, b=0.75, avgdl=7):
        #   idf(cat) = ln(1.2); idf(mat) = ln 2
        #   p1: (idf_cat + idf_mat) * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 6/7))
        #   p2: idf_cat * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 8/7))
        index = Bm25Index(FIXTURE_PASSAGES)
        result = index.retrieve("cat mat", k=2)
        by_id = {h.passage_id.doc_id: h.score for h in result.hits}
        assert by_id["p1"] == pytest.approx(0.929808176224142, abs=1e-9)
        assert by_id["p2"] == pytest.approx(0.17225472236974856, abs=1e-9)

    def test_repeated_query_tokens_count_twice(self):
        index = Bm25Index(FIXTURE_PASSAGES)
        result = index.retrieve("the the cat", k=2)
        by_id = {h.passage_id.doc_id: h.score for h in result.hits}
        assert by_id["p1"] == pytest.approx(0.716010527611351, abs=1e-9)
        assert by_id["p2"] == pytest.approx(0.7282452123948776, abs=1e-9)
        assert result.hits[0].passage_id.doc_id == "p2"

    def test_unique_term_forces_first_rank(self):
        index = Bm25Index(FIXTURE_PASSAGES)
        result = index.retrieve(QueryRecord("q", "FI", "yard", ()), k=5)
        assert result.hits[0].passage_id.doc_id == "p2"

    def test_no_overlap_gives_empty_hits(self):
        index = Bm25Index(FIXTURE_PASSAGES)
        result = index.retrieve("zebra quark", k=5)
        assert result.hits == ()

    def test_scores_monotone_and_deterministic(self):
        index = Bm25Index(FIXTURE_PASSAGES)
        first = index.retrieve("the cat", k=5)
        second = index.retrieve("the cat", k=5)
        assert first == second
        scores = [h.score for h in first.hits]
        assert scores == sorted(scores, reverse=True)

    def test_k_prefix_property(self):
        passages = [
            Passage(PassageId(f"d{i}", 0), f"alpha beta shared term{i % 3}", 5) for i in range(12)
        ]
        index = Bm25Index(passages)
        small = index.retrieve("alpha term1", k=5)
        large = index.retrieve("alpha term1", k=10)
        assert large.hits[:5] == small.hits

    def test_tie_break_is_ascending_passage_id(self):
        passages = [
            Passage(PassageId("b", 0), "same words here", 3),
            Passage(PassageId("a", 0), "same words here", 3),
        ]
        index = Bm25Index(passages)
        result = index.retrieve("same words", k=2)
        assert [h.passage_id.doc_id for h in result.hits] == ["a", "b"]

    @settings(max_examples=40)
    @given(
        texts=st.lists(
            st.lists(st.sampled_from("red green blue cat dog fish".split()), min_size=1, max_size=12),
            min_size=1,
            max_size=5,
        ),
        query=st.lists(st.sampled_from("red green blue cat dog fish".split()), min_size=1, max_size=4),
    )
    def test_matches_brute_force_oracle(self, texts, query):
        passages = [
            Passage(PassageId(f"p{i}", 0), " ".join(words), len(words))
            for i, words in enumerate(texts)
        ]
        index = Bm25Index(passages)
        result = index.retrieve(" ".join(query), k=len(passages))
        expected = brute_force_bm25(passages, " ".join(query))
        scored = {h.passage_id: h.score for h in result.hits}
        for i, passage in enumerate(passages):
            if expected[i] > 0:
                assert scored[passage.passage_id] == pytest.approx(expected[i], abs=1e-9)
            else:
                assert passage.passage_id not in scored


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        index = Bm25Index(FIXTURE_PASSAGES)
        path = tmp_path / "index.bin"
        index.save(path)
        loaded = Bm25Index.load(path)
        assert loaded.num_passages == index.num_passages
        assert loaded.num_terms == index.num_terms
        assert loaded.retrieve("cat mat", k=2) == index.retrieve("cat mat", k=2)

    def test_version_mismatch_fails_loudly(self, tmp_path):
        index = Bm25Index(FIXTURE_PASSAGES)
        path = tmp_path / "index.bin"
        index.save(path)
        raw = bytearray(path.read_bytes())
        raw[len(Bm25Index._MAGIC) + 3] = 99  # corrupt the version field
        path.write_bytes(bytes(raw))
        with pytest.raises(IndexFormatError, match="version"):
            Bm25Index.load(path)

    def test_bad_magic_fails_loudly(self, tmp_path):
        path = tmp_path / "index.bin"
        path.write_bytes(b"garbage file contents")
        with pytest.raises(IndexFormatError, match="magic"):
            Bm25Index.load(path)


class TestPrecomputed:
    def known(self):
        queries = ["q1", "q2"]
        passages = [PassageId(f"d{i}", j) for i in range(3) for j in range(2)]
        return queries, passages

    def records(self):
        return [
            {
                "query_id": "q1",
                "hits": [
                    {"doc_id": "d0", "ordinal": 0, "score": 0.9},
                    {"doc_id": "d1", "ordinal": 0, "score": 0.5},
                ],
            },
            {
                "query_id": "q2",
                "hits": [
                    {"doc_id": "d2", "ordinal": 1, "score": 1.5},
                    {"doc_id": "d0", "ordinal": 1, "score": 0.25},
                ],
            },
        ]

    def test_wellformed_file_loads(self, tmp_path):
        queries, passages = self.known()
        path = tmp_path / "results.jsonl"
        write_records(path, self.records())
        results = load_precomputed(path, queries, passages)
        assert set(results) == {"q1", "q2"}
        assert len(results["q1"].hits) == 2

    def test_unknown_passage_names_query(self, tmp_path):
        queries, passages = self.known()
        records = self.records()
        records[0]["hits"][0]["doc_id"] = "d99"
        path = write_records(tmp_path / "r.jsonl", records) or tmp_path / "r.jsonl"
        with pytest.raises(RetrievalError, match="q1"):
            load_precomputed(tmp_path / "r.jsonl", queries, passages)

    def test_ascending_scores_rejected(self, tmp_path):
        queries, passages = self.known()
        records = self.records()
        records[0]["hits"] = [
            {"doc_id": "d0", "ordinal": 0, "score": 0.9},
            {"doc_id": "d1", "ordinal": 0, "score": 0.95},
        ]
        write_records(tmp_path / "r.jsonl", records)
        with pytest.raises(RetrievalError, match="out of order"):
            load_precomputed(tmp_path / "r.jsonl", queries, passages)

    def test_unknown_query_rejected(self, tmp_path):
        _queries, passages = self.known()
        write_records(tmp_path / "r.jsonl", self.records())
        with pytest.raises(RetrievalError, match="unknown query_id"):
            load_precomputed(tmp_path / "r.jsonl", ["q1"], passages)

    def test_retriever_truncates_to_k(self, tmp_path):
        queries, passages = self.known()
        write_records(tmp_path / "r.jsonl", self.records())
        results = load_precomputed(tmp_path / "r.jsonl", queries, passages)
        retriever = PrecomputedRetriever(results)
        trimmed = retriever.retrieve(QueryRecord("q1", "FI", "anything", ()), k=1)
        assert len(trimmed.hits) == 1
        assert trimmed.k_requested == 1

    def test_round_trip_through_writer(self, tmp_path):
        queries, passages = self.known()
        write_records(tmp_path / "r.jsonl", self.records())
        results = load_precomputed(tmp_path / "r.jsonl", queries, passages)
        write_results(results.values(), tmp_path / "again.jsonl")
        reloaded = load_precomputed(tmp_path / "again.jsonl", queries, passages)
        assert reloaded == results
