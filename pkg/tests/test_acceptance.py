"""Acceptance gate: one test per criterion, each printing a PASS line.

Published leaderboard operating points (overall and per-domain win rates,
ratings, vote counts, refusal percentages) are frozen here as fixtures; the
tests reconstruct them from first principles or verify the computation
pipelines on deterministic stubs.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from pairarena.agreement import CanonicalLabel, cohens_kappa, pearson
from pairarena.corpus import Document
from pairarena.generation import postprocess_answer, no_answer_ratio
from pairarena.judge import (
    AnswerPair,
    AnswerSide,
    PresentationOrder,
    evaluate_pair,
    pair_content_hash,
)
from pairarena.llm import ModelConfig, StubChatClient
from pairarena.ratings import (
    OutcomeMatrix,
    bootstrap_ci,
    bt_fit,
    build_outcomes,
    elo_from_strengths,
    star_closed_form,
    star_reference_elos,
    to_elo,
    win_rates,
)
from pairarena.retrieval import chunk_document
from pairarena.service import ArenaService
from conftest import stub_run_config, write_jsonl, corpus_records, qa_records

A = CanonicalLabel.A_PREFERRED
B = CanonicalLabel.B_PREFERRED
T = CanonicalLabel.TIE

REFERENCE = "reference"

# Domain sizes of the 16.1K-query evaluation set.
DOMAIN_QUERY_COUNTS = {
    "BI": 1956,
    "FI": 3612,
    "LI": 2208,
    "RE": 2094,
    "TE": 2111,
    "SC": 1423,
    "WR": 2695,
}
DOMAINS = tuple(DOMAIN_QUERY_COUNTS)

# Published overall (win %, win+tie %) against the reference, 16.1K votes per
# model, and the published mean-anchored ratings they map onto.
OVERALL_RATES = {
    "gpt-4o": (36.9, 41.0),
    "gpt-4-turbo": (34.4, 39.1),
    "gpt-4-0125-preview": (28.9, 33.7),
    "mixtral-8x22b": (34.5, 38.8),
    "mixtral-8x7b": (27.5, 31.0),
    "llama-3-70b": (21.7, 25.2),
    "llama-3-8b": (20.4, 23.5),
    "command-r-plus": (21.1, 25.8),
    "command-r": (11.1, 15.2),
    "qwen1.5-110b-chat": (33.4, 37.8),
    "qwen1.5-32b-chat": (32.8, 37.1),
}
PUBLISHED_RATINGS = {
    REFERENCE: 1144,
    "gpt-4o": 1066,
    "gpt-4-turbo": 1050,
    "mixtral-8x22b": 1049,
    "qwen1.5-110b-chat": 1041,
    "qwen1.5-32b-chat": 1036,
    "gpt-4-0125-preview": 1008,
    "mixtral-8x7b": 991,
    "llama-3-70b": 939,
    "command-r-plus": 938,
    "llama-3-8b": 924,
    "command-r": 816,
}
VOTES_PER_MODEL = 16100

GPT_4O_DOMAIN_WIN_PCTS = {
    "BI": 52.9, "FI": 38.4, "LI": 25.1, "RE": 40.4, "TE": 35.6, "SC": 42.8, "WR": 28.4,
}

# Published refusal percentages: overall followed by the seven domain values.
PUBLISHED_NO_ANSWER_PCTS = {
    "gpt-4-turbo": (14.1, (10.9, 19.8, 12.2, 15.9, 11.2, 12.3, 12.1)),
    "gpt-4o-with-cot": (48.3, (32.4, 55.2, 50.3, 52.8, 43.4, 49.4, 48.4)),
    "gpt-4o": (16.9, (10.4, 26.8, 13.9, 19.8, 11.2, 14.7, 13.9)),
    "gpt-4-0125-preview": (15.8, (11.0, 21.9, 13.5, 19.1, 12.6, 13.5, 14.1)),
    "mixtral-8x22b": (9.9, (10.1, 13.6, 9.1, 13.7, 7.1, 6.6, 6.0)),
    "mixtral-8x7b": (18.5, (15.4, 24.6, 17.8, 23.7, 13.3, 15.3, 15.0)),
    "llama-3-70b": (25.7, (17.7, 35.9, 24.4, 29.2, 20.5, 23.3, 21.2)),
    "llama-3-8b": (12.6, (10.0, 15.9, 11.5, 16.2, 8.4, 12.9, 11.0)),
    "command-r-plus": (14.4, (10.8, 21.7, 12.5, 16.1, 10.1, 14.7, 10.5)),
    "command-r": (6.5, (5.0, 10.8, 6.1, 6.8, 3.4, 4.6, 5.0)),
    "qwen1.5-110b-chat": (11.5, (10.8, 15.9, 10.7, 13.8, 6.8, 9.0, 10.0)),
    "qwen1.5-32b-chat": (8.9, (7.4, 13.6, 7.5, 11.8, 5.0, 7.0, 6.5)),
}


@dataclass(frozen=True)
class Outcome:
    source_a: str
    source_b: str
    canonical: CanonicalLabel
    query_id: str = "q"


def report(number: int, text: str) -> None:
    print(f"[criterion {number:02d}] {text}: PASS")


def reference_anchored_matrix(rates, votes_per_model):
    """Weighted star outcomes from overall (W, W+T) percentages."""
    players = (REFERENCE,) + tuple(sorted(rates))
    wins = np.zeros((len(players), len(players)))
    for i, model in enumerate(players[1:], start=1):
        w_pct, wt_pct = rates[model]
        t_pct = wt_pct - w_pct
        l_pct = 100.0 - wt_pct
        wins[i, 0] = votes_per_model * (w_pct + t_pct / 2.0) / 100.0
        wins[0, i] = votes_per_model * (l_pct + t_pct / 2.0) / 100.0
    return OutcomeMatrix(players=players, wins=wins)


def synth_reference_judgments(votes_per_model):
    judgments = []
    for model, (w_pct, wt_pct) in sorted(OVERALL_RATES.items()):
        wins = round(votes_per_model * w_pct / 100.0)
        ties = round(votes_per_model * (wt_pct - w_pct) / 100.0)
        losses = votes_per_model - wins - ties
        judgments.extend([Outcome(model, REFERENCE, A)] * wins)
        judgments.extend([Outcome(model, REFERENCE, T)] * ties)
        judgments.extend([Outcome(model, REFERENCE, B)] * losses)
    return judgments


def test_criterion_1_published_leaderboard_reconstruction():
    """Fitted ratings from overall W/W+T match the published column +/-2."""
    started = time.perf_counter()
    outcomes = reference_anchored_matrix(OVERALL_RATES, VOTES_PER_MODEL)
    strengths = bt_fit(outcomes)
    entries = to_elo(strengths)
    elapsed = time.perf_counter() - started
    fitted = {entry.player: entry.elo for entry in entries}
    for player, published in PUBLISHED_RATINGS.items():
        assert fitted[player] == pytest.approx(published, abs=2.0), player
    assert elapsed < 5.0, f"fit took {elapsed:.2f}s"
    report(1, f"12-player leaderboard reconstructed within +/-2 in {elapsed:.2f}s")


def test_criterion_2_star_oracle_equivalence():
    """Iterative fit agrees with the closed form on 50 random star setups."""
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(50):
        n_models = int(rng.integers(1, 12))
        names = [f"m{i}" for i in range(n_models)]
        scores = {name: float(rng.uniform(0.05, 0.95)) for name in names}
        votes = {name: int(rng.integers(50, 5001)) for name in names}
        players = (REFERENCE,) + tuple(names)
        wins = np.zeros((len(players), len(players)))
        for i, name in enumerate(names, start=1):
            wins[i, 0] = votes[name] * scores[name]
            wins[0, i] = votes[name] * (1.0 - scores[name])
        fitted = elo_from_strengths(bt_fit(OutcomeMatrix(players=players, wins=wins)))
        expected = star_reference_elos(scores, REFERENCE)
        for player in players:
            worst = max(worst, abs(fitted[player] - expected[player]))
    assert worst <= 0.5, f"worst deviation {worst:.4f}"
    report(2, f"50 random star fits within 0.5 of the closed form (worst {worst:.4f})")


def test_criterion_3_overall_micro_average():
    """Micro-average identity, on the published row and on synthetic data."""
    total = sum(DOMAIN_QUERY_COUNTS.values())
    recomputed = (
        sum(GPT_4O_DOMAIN_WIN_PCTS[d] * DOMAIN_QUERY_COUNTS[d] for d in DOMAINS) / total
    )
    assert recomputed == pytest.approx(36.9, abs=0.1)

    rng = np.random.default_rng(7)
    for _ in range(20):
        judgments = []
        domain_by_query = {}
        qid = 0
        for domain in rng.choice(DOMAINS, size=3, replace=False):
            for _ in range(int(rng.integers(1, 40))):
                query_id = f"q{qid}"
                qid += 1
                domain_by_query[query_id] = domain
                label = [A, B, T][int(rng.integers(0, 3))]
                judgments.append(Outcome("m", REFERENCE, label, query_id))
        table = win_rates(judgments, REFERENCE, domain_by_query)
        overall = table.overall("m")
        weighted = sum(
            table.cell("m", d).win_pct * table.cell("m", d).total
            for d in {domain_by_query[q] for q in domain_by_query}
        ) / overall.total
        assert overall.win_pct == pytest.approx(weighted, abs=1e-9)
    report(3, f"overall W recomputed from domains = {recomputed:.3f} (+/-0.1 of 36.9); identity exact on 20 fixtures")


def test_criterion_4_bootstrap_sanity():
    """CI widths at the published vote scale, 1/sqrt(n) scaling, determinism."""
    rounds = 300
    base = synth_reference_judgments(VOTES_PER_MODEL)
    intervals = bootstrap_ci(base, rounds=rounds, seed=13, tol=1e-7)
    half_widths = {p: (hi - lo) / 2.0 for p, (lo, hi) in intervals.items()}
    for player, half in half_widths.items():
        assert 1.0 <= half <= 10.0, f"{player}: {half:.2f}"

    quadrupled = synth_reference_judgments(4 * VOTES_PER_MODEL)
    intervals_4x = bootstrap_ci(quadrupled, rounds=rounds, seed=13, tol=1e-7)
    for player, (lo, hi) in intervals_4x.items():
        ratio = ((hi - lo) / 2.0) / half_widths[player]
        assert 0.375 <= ratio <= 0.625, f"{player}: ratio {ratio:.3f}"

    again = bootstrap_ci(base, rounds=rounds, seed=13, tol=1e-7)
    assert again == intervals
    spread = sorted(half_widths.values())
    report(
        4,
        f"95% CI half-widths in [{spread[0]:.2f}, {spread[-1]:.2f}] elo; "
        "quadrupled votes halve them; fixed seed bit-identical",
    )


def test_criterion_5_agreement_oracles():
    """Hand-computed kappa and Pearson fixtures, exact edge cases."""
    kappa = cohens_kappa([A, A, B, T], [A, B, B, T])
    assert kappa == pytest.approx(0.6364, abs=1e-4)
    r, _p = pearson([1, 0, -1, 1], [1, 0, -1, 0])
    assert r == pytest.approx(0.8528, abs=1e-4)
    identity_r, identity_p = pearson([1, 0, -1, 1], [1, 0, -1, 1])
    assert identity_r == 1.0 and identity_p == 0.0
    anti_r, _ = pearson([1, 0, -1, 1], [-1, 0, 1, -1])
    assert anti_r == -1.0
    report(5, "kappa 0.6364, pearson 0.8528, identity/antisymmetry exact")


def test_criterion_6_chunker_conservation():
    """1000 random documents re-assemble exactly from <=100-token chunks."""
    rng = np.random.default_rng(99)
    alphabet = list("abcdefghijklmnopqrstuvwxyz0123456789'.,;-")
    for i in range(1000):
        n_tokens = int(rng.integers(1, 348))
        tokens = [
            "".join(rng.choice(alphabet, size=int(rng.integers(1, 9))))
            for _ in range(n_tokens)
        ]
        document = Document(doc_id=f"d{i}", domain="SC", text=" ".join(tokens))
        passages = chunk_document(document, 100)
        assert all(p.token_count <= 100 for p in passages)
        assert all(p.token_count == 100 for p in passages[:-1])
        rejoined = " ".join(p.text for p in passages).split()
        assert rejoined == tokens
        assert len(passages) == math.ceil(n_tokens / 100)
    report(6, "1000 random documents chunk and reassemble exactly")


def test_criterion_7_judge_symmetry():
    """Both presentation orders of 1000 pairs give identical canonical labels."""
    client = StubChatClient("stub://judge")
    config = ModelConfig(model_name="arbiter", endpoint="stub://judge")
    mismatches = 0
    for i in range(1000):
        pair = AnswerPair(
            query_id=f"q{i}",
            side_a=AnswerSide(source="m1", text=f"candidate answer number {i}"),
            side_b=AnswerSide(source="m2", text=f"competing answer variant {i % 37}-{i}"),
        )
        content_hash = pair_content_hash(pair)
        direct = PresentationOrder(False, "s", pair.query_id, content_hash)
        swapped = PresentationOrder(True, "s", pair.query_id, content_hash)
        first = evaluate_pair(client, "which?", pair, direct, config, sleep=lambda s: None)
        second = evaluate_pair(client, "which?", pair, swapped, config, sleep=lambda s: None)
        mismatches += first.canonical is not second.canonical
    assert mismatches == 0
    report(7, "0 canonical mismatches over 1000 pairs judged in both orders")


def test_criterion_8_end_to_end_determinism(tmp_path):
    """Stubbed 4-query x 2-model run is bit-reproducible, incl. resume."""
    corpus_path = write_jsonl(tmp_path / "docs.jsonl", corpus_records())
    qa_path = write_jsonl(tmp_path / "qa.jsonl", qa_records())
    config = stub_run_config(corpus_path, qa_path)

    baseline = ArenaService(tmp_path / "baseline", sleep=lambda s: None)
    run_id = baseline.create_run(config)
    baseline_bytes = (baseline.run_dir(run_id) / "leaderboard.json").read_bytes()

    rerun = ArenaService(tmp_path / "rerun", sleep=lambda s: None)
    rerun.create_run(config)
    assert (rerun.run_dir(run_id) / "leaderboard.json").read_bytes() == baseline_bytes

    for stage in ("ingest", "retrieve", "generate", "judge"):
        service = ArenaService(tmp_path / f"resume_{stage}", sleep=lambda s: None)
        service.create_run(config, stop_after=stage)
        service.create_run(config)
        resumed = (service.run_dir(run_id) / "leaderboard.json").read_bytes()
        assert resumed == baseline_bytes, f"divergence after resume at {stage}"
    report(8, "leaderboard bytes identical across rerun and 4 interrupt/resume points")


def test_criterion_9_desk_scale_limits_and_pipeline_oracles():
    """Absolute win rates, refusal rates, and annotation-quality numbers need
    live models and human annotators; the pipelines that compute them are
    verified on stubs and on the published overall-from-domain identity."""
    total = sum(DOMAIN_QUERY_COUNTS.values())
    counts = [DOMAIN_QUERY_COUNTS[d] for d in DOMAINS]
    for model, (overall, per_domain) in PUBLISHED_NO_ANSWER_PCTS.items():
        recomputed = sum(p * n for p, n in zip(per_domain, counts)) / total
        assert recomputed == pytest.approx(overall, abs=0.1), model

    answers = []
    domain_by_query = {}
    qid = 0
    refusal_plan = {"FI": (8, 3), "TE": (5, 1), "SC": (4, 0)}
    for domain, (n_total, n_refused) in refusal_plan.items():
        for j in range(n_total):
            query_id = f"q{qid}"
            qid += 1
            domain_by_query[query_id] = domain
            text = "I couldn't find an answer." if j < n_refused else "useful content"
            answers.append(postprocess_answer(text, query_id, "stub-model"))
    report_obj = no_answer_ratio(answers, domain_by_query)
    expected = 100.0 * (3 + 1 + 0) / (8 + 5 + 4)
    assert report_obj.overall_pct == pytest.approx(expected, abs=1e-9)
    weighted = sum(
        report_obj.per_domain_pct[d] * refusal_plan[d][0] for d in refusal_plan
    ) / sum(n for n, _ in refusal_plan.values())
    assert report_obj.overall_pct == pytest.approx(weighted, abs=1e-9)

    print(
        "[criterion 09] NOT reproducible at desk scale (stated): absolute per-model "
        "win rates, refusal ratios, and annotation-quality comparisons depend on "
        "proprietary LLM behavior and human annotators. Their computation pipelines "
        "are verified here via deterministic stubs and the overall-from-domain "
        "weighted-mean oracle on all 12 published refusal rows."
    )
    report(9, "pipelines verified by stub + weighted-mean oracles")
