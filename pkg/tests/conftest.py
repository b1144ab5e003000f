import json
from pathlib import Path

import pytest

from pairarena.llm import ModelConfig
from pairarena.service import RunConfig


def write_jsonl(path: Path, records) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fp:
        for record in records:
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


DOC_TEXTS = {
    "d1": (
        "interest rates climbed sharply last quarter as lenders repriced mortgage "
        "products and bond yields rose across maturities while analysts debated "
        "whether the central bank would pause its tightening cycle before winter"
    ),
    "d2": (
        "a diversified portfolio spreads risk across asset classes so a downturn in "
        "equities can be offset by bonds or commodities and rebalancing once a year "
        "keeps the allocation aligned with the investor tolerance for losses"
    ),
    "d3": (
        "to replace a laptop battery first power down the machine remove the bottom "
        "panel screws disconnect the old cell from the logic board and seat the new "
        "battery firmly before reassembling and charging it fully overnight"
    ),
    "d4": (
        "kernel updates occasionally break wireless drivers so pinning the previous "
        "kernel version or rebuilding the driver module against the new headers "
        "usually restores connectivity after a failed system upgrade"
    ),
}


def corpus_records():
    domains = {"d1": "FI", "d2": "FI", "d3": "TE", "d4": "TE"}
    return [
        {"doc_id": doc_id, "domain": domains[doc_id], "text": text}
        for doc_id, text in DOC_TEXTS.items()
    ]


def qa_records():
    return [
        {
            "query_id": "q1",
            "domain": "FI",
            "question": "why did mortgage interest rates climb last quarter",
            "gold_doc_ids": ["d1"],
            "reference": {
                "sentences": [
                    {
                        "text": "Rates climbed because lenders repriced mortgages as bond yields rose.",
                        "citations": [1],
                    },
                    {
                        "text": "Analysts still debated a central bank pause before winter.",
                        "citations": [1],
                    },
                ]
            },
            "short_answers": [
                {"doc_id": "d1", "text": "lenders repriced mortgage products"},
            ],
        },
        {
            "query_id": "q2",
            "domain": "FI",
            "question": "how does a diversified portfolio reduce risk",
            "gold_doc_ids": ["d2"],
            "reference": {
                "sentences": [
                    {
                        "text": "Spreading money across asset classes offsets equity downturns with bonds or commodities.",
                        "citations": [1],
                    },
                    {
                        "text": "Yearly rebalancing keeps the allocation aligned with loss tolerance.",
                        "citations": [1],
                    },
                ]
            },
            "short_answers": [
                {"doc_id": "d2", "text": "spreads risk across asset classes"},
            ],
        },
        {
            "query_id": "q3",
            "domain": "TE",
            "question": "how do i replace a laptop battery safely",
            "gold_doc_ids": ["d3"],
            "reference": {
                "sentences": [
                    {
                        "text": "Power down, open the bottom panel, swap the cell, and charge fully overnight.",
                        "citations": [1],
                    }
                ]
            },
            "short_answers": [
                {"doc_id": "d3", "text": "power down the machine"},
            ],
        },
        {
            "query_id": "q4",
            "domain": "TE",
            "question": "wireless stopped working after a kernel update what now",
            "gold_doc_ids": ["d4"],
            "reference": {
                "sentences": [
                    {
                        "text": "Pin the previous kernel or rebuild the driver module against the new headers.",
                        "citations": [1],
                    }
                ]
            },
            "short_answers": [
                {"doc_id": "d4", "text": "pinning the previous kernel version"},
            ],
        },
    ]


@pytest.fixture
def corpus_file(tmp_path):
    return write_jsonl(tmp_path / "docs.jsonl", corpus_records())


@pytest.fixture
def qa_file(tmp_path):
    return write_jsonl(tmp_path / "qa.jsonl", qa_records())


def stub_run_config(corpus_path, qa_path, *, seed=7, bootstrap_rounds=25, **overrides):
    base = dict(
        corpus_path=str(corpus_path),
        qa_path=str(qa_path),
        models=(
            ModelConfig(model_name="alpha", endpoint="stub://answer"),
            ModelConfig(model_name="bravo", endpoint="stub://answer", cot_enabled=False),
        ),
        judge=ModelConfig(model_name="arbiter", endpoint="stub://judge"),
        k=2,
        chunk_size=30,
        seed=seed,
        bootstrap_rounds=bootstrap_rounds,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture
def run_config(corpus_file, qa_file):
    return stub_run_config(corpus_file, qa_file)
