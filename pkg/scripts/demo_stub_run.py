"""End-to-end demo on deterministic stub models: no network needed.

Builds a small two-domain corpus, runs retrieve -> generate -> judge -> rate
through the journaled pipeline, then plays three scripted annotators against
the annotation pool and prints the human-vs-judge agreement report. Run:

    python3 scripts/demo_stub_run.py [workdir]
"""

import json
import sys
import tempfile
from pathlib import Path

from pairarena.agreement import CanonicalLabel, FivePointLabel
from pairarena.llm import ModelConfig
from pairarena.ratings import RatingEntry, render_leaderboard_table
from pairarena.service import ArenaService, RunConfig

DOCS = [
    {
        "doc_id": "d1",
        "domain": "FI",
        "text": (
            "compound interest grows savings faster because each period earns on the "
            "previous gains so starting early matters more than contributing more later"
        ),
    },
    {
        "doc_id": "d2",
        "domain": "FI",
        "text": (
            "an emergency fund of three to six months of expenses in a liquid account "
            "prevents forced selling of investments during income interruptions"
        ),
    },
    {
        "doc_id": "d3",
        "domain": "TE",
        "text": (
            "a failing hard drive often shows reallocated sector warnings in smart data "
            "so back up immediately and replace the disk before full failure"
        ),
    },
    {
        "doc_id": "d4",
        "domain": "TE",
        "text": (
            "thermal throttling slows laptops when dust blocks the heatsink cleaning "
            "the fan and repasting the cpu restores sustained clock speeds"
        ),
    },
]

QA = [
    {
        "query_id": "q1",
        "domain": "FI",
        "question": "why does starting to save early matter so much",
        "gold_doc_ids": ["d1"],
        "reference": {
            "sentences": [
                {
                    "text": "Compound interest means each period earns on previous gains, so early savings outgrow later contributions.",
                    "citations": [1],
                }
            ]
        },
        "short_answers": [{"doc_id": "d1", "text": "each period earns on the previous gains"}],
    },
    {
        "query_id": "q2",
        "domain": "FI",
        "question": "how large should an emergency fund be and why",
        "gold_doc_ids": ["d2"],
        "reference": {
            "sentences": [
                {
                    "text": "Three to six months of expenses, kept liquid, avoids forced selling when income stops.",
                    "citations": [1],
                }
            ]
        },
        "short_answers": [{"doc_id": "d2", "text": "three to six months of expenses"}],
    },
    {
        "query_id": "q3",
        "domain": "TE",
        "question": "what are the warning signs of a failing hard drive",
        "gold_doc_ids": ["d3"],
        "reference": {
            "sentences": [
                {
                    "text": "Reallocated sector warnings in the drive's health data; back up and replace the disk.",
                    "citations": [1],
                }
            ]
        },
        "short_answers": [{"doc_id": "d3", "text": "reallocated sector warnings"}],
    },
    {
        "query_id": "q4",
        "domain": "TE",
        "question": "my laptop slows down under load what should i check",
        "gold_doc_ids": ["d4"],
        "reference": {
            "sentences": [
                {
                    "text": "Dust-blocked heatsinks cause thermal throttling; cleaning the fan and repasting restores speed.",
                    "citations": [1],
                }
            ]
        },
        "short_answers": [{"doc_id": "d4", "text": "dust blocks the heatsink"}],
    },
]


def write_jsonl(path: Path, records) -> Path:
    with path.open("w", encoding="utf-8") as fp:
        for record in records:
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def main() -> None:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="pairarena-"))
    workdir.mkdir(parents=True, exist_ok=True)
    corpus_path = write_jsonl(workdir / "docs.jsonl", DOCS)
    qa_path = write_jsonl(workdir / "qa.jsonl", QA)

    config = RunConfig(
        corpus_path=str(corpus_path),
        qa_path=str(qa_path),
        models=(
            ModelConfig(model_name="stub-small", endpoint="stub://answer"),
            ModelConfig(model_name="stub-large", endpoint="stub://answer", cot_enabled=False),
        ),
        judge=ModelConfig(model_name="stub-arbiter", endpoint="stub://judge"),
        k=2,
        chunk_size=25,
        seed=11,
        bootstrap_rounds=50,
    )

    service = ArenaService(workdir / "runs")
    run_id = service.create_run(config)
    manifest = service.get_manifest(run_id)
    print(f"run {run_id} -> {manifest['status']}; counts {manifest['counts']}")

    payload = service.get_leaderboard(run_id)
    entries = [RatingEntry(**entry) for entry in payload["entries"]]
    print()
    print(render_leaderboard_table(entries))

    # Scripted annotators: mostly agree with the judge, disagree on occasion.
    state = service._state(run_id)
    tasks = service._tasks_for_run(run_id, state)
    judge_by_pair = {
        (j.query_id, j.source_a, j.source_b): j.canonical for j in state.judgments.values()
    }
    for task_index, task in enumerate(tasks):
        target = judge_by_pair[(task.query_id, task.pair.side_a.source, task.pair.side_b.source)]
        if target is CanonicalLabel.TIE:
            label = FivePointLabel.TIE
        elif (target is CanonicalLabel.A_PREFERRED) != task.swapped:
            label = FivePointLabel.SLIGHTLY_BETTER
        else:
            label = FivePointLabel.SLIGHTLY_WORSE
        contrarian = FivePointLabel.TIE if task_index % 4 == 0 else label
        for annotator, chosen in (("ann-1", label), ("ann-2", label), ("ann-3", contrarian)):
            service.submit_annotation(annotator, task.task_id, chosen)

    report = service.agreement_report(run_id)
    print()
    print(f"agreement over {report.n_items} tasks:")
    print(f"  pearson r = {report.pearson_r:.3f} (p = {report.p_value:.2e})")
    print(f"  cohen's kappa = {report.kappa:.3f}")
    print(f"  human distribution: {report.human_distribution}")
    print(f"  judge distribution: {report.model_distribution}")
    print()
    print(f"artifacts in {workdir}")


if __name__ == "__main__":
    main()
