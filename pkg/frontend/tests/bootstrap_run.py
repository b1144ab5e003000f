"""Prepare a completed stub run for the UI integration test.

Writes a small corpus/QA pair into the given workdir, executes the stub
pipeline, and prints task metadata as JSON on stdout. The run seed is chosen
so that the first task the service will serve (lowest task id, zero labels)
is presented unswapped and its judge label prefers side A, which the
integration test relies on; two further tasks with a dissenting judge label
are also reported.

Usage: python3 bootstrap_run.py <workdir>
"""

import json
import sys
from pathlib import Path

from pairarena.agreement import CanonicalLabel
from pairarena.llm import ModelConfig
from pairarena.service import ArenaService, RunConfig

DOCS = [
    {"doc_id": "d1", "domain": "FI", "text": "diversified funds spread market risk across many holdings so one failure cannot sink the portfolio and rebalancing keeps weights steady"},
    {"doc_id": "d2", "domain": "FI", "text": "high interest debt should be repaid before investing because guaranteed interest savings usually beat expected market returns"},
    {"doc_id": "d3", "domain": "TE", "text": "swollen batteries push against the trackpad and case and must be replaced immediately because punctures can ignite the cell"},
    {"doc_id": "d4", "domain": "TE", "text": "slow wifi after a router update often comes from a crowded channel so scanning and switching channels restores throughput"},
]

QA = [
    {"query_id": "q1", "domain": "FI", "question": "how does diversification protect a portfolio", "gold_doc_ids": ["d1"], "reference": {"sentences": [{"text": "Spreading holdings means one failure cannot sink the portfolio.", "citations": [1]}]}, "short_answers": [{"doc_id": "d1", "text": "spread market risk"}]},
    {"query_id": "q2", "domain": "FI", "question": "should i invest or pay off high interest debt first", "gold_doc_ids": ["d2"], "reference": {"sentences": [{"text": "Repay high-interest debt first; the guaranteed savings beat expected returns.", "citations": [1]}]}, "short_answers": [{"doc_id": "d2", "text": "repaid before investing"}]},
    {"query_id": "q3", "domain": "TE", "question": "my laptop trackpad is bulging what is happening", "gold_doc_ids": ["d3"], "reference": {"sentences": [{"text": "A swollen battery is pushing the case; replace it immediately.", "citations": [1]}]}, "short_answers": [{"doc_id": "d3", "text": "swollen batteries"}]},
    {"query_id": "q4", "domain": "TE", "question": "wifi got slow after a router update what should i try", "gold_doc_ids": ["d4"], "reference": {"sentences": [{"text": "Scan for a less crowded channel and switch to it.", "citations": [1]}]}, "short_answers": [{"doc_id": "d4", "text": "switching channels"}]},
]


def write_jsonl(path, records):
    with path.open("w", encoding="utf-8") as fp:
        for record in records:
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")


def build(workdir: Path):
    corpus_path = workdir / "docs.jsonl"
    qa_path = workdir / "qa.jsonl"
    write_jsonl(corpus_path, DOCS)
    write_jsonl(qa_path, QA)
    runs_root = workdir / "runs"
    for seed in range(64):
        config = RunConfig(
            corpus_path=str(corpus_path),
            qa_path=str(qa_path),
            models=(
                ModelConfig(model_name="stub-a", endpoint="stub://answer"),
                ModelConfig(model_name="stub-b", endpoint="stub://answer"),
            ),
            judge=ModelConfig(model_name="stub-judge", endpoint="stub://judge"),
            k=2,
            chunk_size=25,
            seed=seed,
            bootstrap_rounds=10,
        )
        service = ArenaService(runs_root / f"seed{seed}", sleep=lambda s: None)
        run_id = service.create_run(config)
        state = service._state(run_id)
        tasks = sorted(service._tasks_for_run(run_id, state), key=lambda t: t.task_id)
        judge_by_pair = {
            (j.query_id, j.source_a, j.source_b): j.canonical
            for j in state.judgments.values()
        }

        def judge_label(task):
            return judge_by_pair[
                (task.query_id, task.pair.side_a.source, task.pair.side_b.source)
            ]

        first = tasks[0]
        if first.swapped or judge_label(first) is not CanonicalLabel.A_PREFERRED:
            continue
        dissenting = [t for t in tasks[1:] if judge_label(t) is CanonicalLabel.B_PREFERRED]
        if not dissenting:
            continue
        extra = dissenting[0]
        third = next(t for t in tasks[1:] if t.task_id != extra.task_id)
        chosen = [first, extra, third]
        return {
            "runs_root": str(runs_root / f"seed{seed}"),
            "run_id": run_id,
            "journal": str(service.run_dir(run_id) / "journal.jsonl"),
            "seed": seed,
            "tasks": [
                {
                    "task_id": t.task_id,
                    "swapped": t.swapped,
                    "judge": judge_label(t).name,
                }
                for t in chosen
            ],
        }
    raise SystemExit("no suitable seed found in 0..63")


if __name__ == "__main__":
    workdir = Path(sys.argv[1])
    workdir.mkdir(parents=True, exist_ok=True)
    print(json.dumps(build(workdir)))
