"""End-to-end evaluation runs and the blinded annotation workflow.

A run executes retrieve -> generate -> judge -> rate over a corpus/QA pair,
writing every per-item result to a single append-only journal. Replaying the
journal reconstructs the full run state, so an interrupted run resumes
without repeating any endpoint call. Judged pairs double as the human
annotation pool: tasks are served blinded, in a seeded presentation order,
and three labels per task yield a majority-voted canonical label for the
agreement report.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import ratings
from .agreement import (
    AgreementReport,
    CanonicalLabel,
    FivePointLabel,
    compare_label_sets,
    majority_vote,
    merge_five_point,
)
from .corpus import QaRecord, ingest_corpus, ingest_qa
from .generation import (
    ANNOTATION_PROMPT_HEADER,
    ANSWER_PROMPT_HEADER,
    COT_SUFFIX,
    GeneratedAnswer,
    generate_answer,
    postprocess_answer,
    render_answer_prompt,
)
from .judge import (
    JUDGE_INSTRUCTION,
    JUDGE_TEMPLATE,
    REFERENCE_SOURCE,
    AnswerPair,
    AnswerSide,
    JudgmentCache,
    PairwiseJudgment,
    decide_presentation_order,
    run_pairwise_eval,
)
from .jsonl import dumps_record, read_records
from .llm import ChatClient, ModelConfig, RateLimiter, TransportError, make_client, parallel_map
from .retrieval import (
    Bm25Index,
    Passage,
    PassageId,
    PrecomputedRetriever,
    Retriever,
    chunk_corpus,
    load_precomputed,
)

FORMAT_VERSION = 1
STAGES = ("ingest", "retrieve", "generate", "judge", "rate")

MODE_REFERENCE_ANCHORED = "reference-anchored"
MODE_COMPLETE_PAIRS = "complete-pairs"

ANNOTATORS_PER_TASK = 3

ANNOTATION_RUBRIC = (
    "Rate your preference between the two answers based on three aspects.\n"
    "\n"
    "- Helpfulness: information that is helpful/relevant to answer the query. An ideal "
    "answer consists of only information that is helpful/relevant to answer the query.\n"
    "- Truthfulness: information that is correct to answer the query. Truthful information "
    "should also be helpful information. If it is difficult to determine the truthfulness "
    "of some information, consider it untruthful. Sometimes, this is due to not enough "
    "context provided in the answer. Another source of untruthfulness is when conflicting "
    "information is presented, and the answer does not coherently reconcile them.\n"
    "- Completeness: include as much truthful and helpful information as possible.\n"
    "\n"
    "How to judge (in the order of importance):\n"
    "1. If one answer has all truthful information while the other has some untruthful "
    "information, prefer the all-truthful one.\n"
    "2. If both have some untruthful information, prefer the one with less untruthful "
    "information.\n"
    "3. If both have all truthful information, prefer the one with more truthful or "
    "helpful information.\n"
    "4. If two answers look equally good, or it is too hard to differentiate, choose "
    "'Not sure.'\n"
)


class ServiceError(RuntimeError):
    pass


class NotFoundError(ServiceError):
    pass


class ConflictError(ServiceError):
    pass


class StageIncompleteError(ServiceError):
    pass


class InsufficientOverlapError(ServiceError):
    pass


@dataclass(frozen=True)
class RunConfig:
    corpus_path: str
    qa_path: str
    models: tuple[ModelConfig, ...]
    judge: ModelConfig
    retriever: str = "builtin"
    precomputed_path: str | None = None
    k: int = 5
    chunk_size: int = 100
    mode: str = MODE_REFERENCE_ANCHORED
    sample_size: int | None = None
    seed: int = 0
    bootstrap_rounds: int = 100
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.mode not in (MODE_REFERENCE_ANCHORED, MODE_COMPLETE_PAIRS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_COMPLETE_PAIRS and (self.sample_size is None or self.sample_size < 1):
            raise ValueError("complete-pairs mode needs sample_size >= 1")
        if self.retriever not in ("builtin", "precomputed"):
            raise ValueError(f"unknown retriever {self.retriever!r}")
        if self.retriever == "precomputed" and not self.precomputed_path:
            raise ValueError("precomputed retriever needs precomputed_path")
        if not self.models:
            raise ValueError("at least one model is required")

    def to_dict(self) -> dict:
        return {
            "corpus_path": self.corpus_path,
            "qa_path": self.qa_path,
            "models": [m.to_dict() for m in self.models],
            "judge": self.judge.to_dict(),
            "retriever": self.retriever,
            "precomputed_path": self.precomputed_path,
            "k": self.k,
            "chunk_size": self.chunk_size,
            "mode": self.mode,
            "sample_size": self.sample_size,
            "seed": self.seed,
            "bootstrap_rounds": self.bootstrap_rounds,
            "parallelism": self.parallelism,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(
            corpus_path=str(data["corpus_path"]),
            qa_path=str(data["qa_path"]),
            models=tuple(ModelConfig.from_dict(m) for m in data["models"]),
            judge=ModelConfig.from_dict(data["judge"]),
            retriever=data.get("retriever", "builtin"),
            precomputed_path=data.get("precomputed_path"),
            k=int(data.get("k", 5)),
            chunk_size=int(data.get("chunk_size", 100)),
            mode=data.get("mode", MODE_REFERENCE_ANCHORED),
            sample_size=data.get("sample_size"),
            seed=int(data.get("seed", 0)),
            bootstrap_rounds=int(data.get("bootstrap_rounds", 100)),
            parallelism=int(data.get("parallelism", 1)),
        )

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def prompt_hashes() -> dict[str, str]:
    def digest(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    return {
        "answer_prompt": digest(ANSWER_PROMPT_HEADER + COT_SUFFIX),
        "judge_prompt": digest(JUDGE_INSTRUCTION + JUDGE_TEMPLATE),
        "annotation_prompt": digest(ANNOTATION_PROMPT_HEADER),
        "annotation_rubric": digest(ANNOTATION_RUBRIC),
    }


class Journal:
    """Append-only JSONL event log; appends are serialized, reads are cheap."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fp:
                fp.write(dumps_record(record) + "\n")
                fp.flush()

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [record for _line_no, record in read_records(self.path)]


@dataclass
class AnnotationLabelRecord:
    task_id: str
    annotator_id: str
    label: FivePointLabel
    swapped: bool


@dataclass
class RunState:
    """In-memory view of a run, reconstructed purely from the journal."""

    config: RunConfig | None = None
    completed_stages: list[str] = field(default_factory=list)
    retrievals: dict[str, dict] = field(default_factory=dict)
    answers: dict[tuple[str, str], GeneratedAnswer] = field(default_factory=dict)
    generation_failures: list[dict] = field(default_factory=list)
    judgments: dict[str, PairwiseJudgment] = field(default_factory=dict)
    judge_failures: list[dict] = field(default_factory=list)
    leaderboard: dict | None = None
    annotation_labels: dict[str, list[AnnotationLabelRecord]] = field(default_factory=dict)

    def state_hash(self) -> str:
        snapshot = {
            "config": self.config.to_dict() if self.config else None,
            "completed_stages": self.completed_stages,
            "retrievals": {k: self.retrievals[k] for k in sorted(self.retrievals)},
            "answers": [
                self.answers[k].to_record() for k in sorted(self.answers)
            ],
            "generation_failures": self.generation_failures,
            "judgments": [self.judgments[k].to_record() for k in sorted(self.judgments)],
            "judge_failures": self.judge_failures,
            "leaderboard": self.leaderboard,
            "annotation_labels": {
                task_id: [
                    {
                        "annotator_id": rec.annotator_id,
                        "label": rec.label.value,
                        "swapped": rec.swapped,
                    }
                    for rec in records
                ]
                for task_id, records in sorted(self.annotation_labels.items())
            },
        }
        canonical = json.dumps(snapshot, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def replay_journal(journal: Journal) -> RunState:
    state = RunState()
    for record in journal.records():
        kind = record["type"]
        if kind == "run_config":
            state.config = RunConfig.from_dict(record["config"])
        elif kind == "retrieval":
            state.retrievals[record["query_id"]] = record
        elif kind == "answer":
            answer = GeneratedAnswer.from_record(record["record"])
            state.answers[(answer.model_name, answer.query_id)] = answer
        elif kind == "generation_failure":
            state.generation_failures.append(record)
        elif kind == "judgment":
            state.judgments[record["key"]] = PairwiseJudgment.from_record(record["record"])
        elif kind == "judge_failure":
            state.judge_failures.append(record)
        elif kind == "stage_complete":
            if record["stage"] not in state.completed_stages:
                state.completed_stages.append(record["stage"])
        elif kind == "leaderboard":
            state.leaderboard = record["payload"]
        elif kind == "annotation_label":
            state.annotation_labels.setdefault(record["task_id"], []).append(
                AnnotationLabelRecord(
                    task_id=record["task_id"],
                    annotator_id=record["annotator_id"],
                    label=FivePointLabel(record["label"]),
                    swapped=bool(record["swapped"]),
                )
            )
    return state


class _JournalBackedCache(JudgmentCache):
    """Judgment cache whose writes land in the run journal."""

    def __init__(self, journal: Journal, known: dict[str, PairwiseJudgment]):
        super().__init__(path=None)
        self._entries.update(known)
        self._journal = journal

    def put(self, key: str, judgment: PairwiseJudgment) -> None:
        with self._lock:
            self._entries[key] = judgment
        self._journal.append({"type": "judgment", "key": key, "record": judgment.to_record()})


def sample_complete_pair_queries(
    qa: Sequence[QaRecord], sample_size: int, seed: int | str
) -> list[QaRecord]:
    """Deterministically sample queries as evenly as possible across domains."""
    by_domain: dict[str, list[QaRecord]] = {}
    for record in qa:
        by_domain.setdefault(record.query.domain, []).append(record)
    domains = sorted(by_domain)
    base, extra = divmod(sample_size, len(domains))
    sampled: list[QaRecord] = []
    for position, domain in enumerate(domains):
        want = base + (1 if position < extra else 0)
        pool = by_domain[domain]
        if want > len(pool):
            raise ValueError(
                f"domain {domain!r} has {len(pool)} queries, cannot sample {want}"
            )
        rng = random.Random(f"{seed}|complete-pairs|{domain}")
        sampled.extend(rng.sample(pool, want))
    return sampled


def complete_pair_count(n_queries: int, n_models: int) -> int:
    return n_queries * n_models * (n_models - 1) // 2


def plan_pairs(
    qa: Sequence[QaRecord],
    answers: dict[tuple[str, str], GeneratedAnswer],
    model_names: Sequence[str],
    mode: str,
    sample_size: int | None,
    seed: int | str,
) -> list[AnswerPair]:
    """Reference-anchored pairs for every query; complete-pairs adds all
    model-model pairs over an evenly sampled query subset."""
    ordered_models = sorted(model_names)
    pairs: list[AnswerPair] = []
    for model in ordered_models:
        for record in qa:
            answer = answers.get((model, record.query.query_id))
            if answer is None:
                continue
            pairs.append(
                AnswerPair(
                    query_id=record.query.query_id,
                    side_a=AnswerSide(source=model, text=answer.answer_text),
                    side_b=AnswerSide(source=REFERENCE_SOURCE, text=record.reference.text),
                )
            )
    if mode == MODE_COMPLETE_PAIRS:
        sampled = sample_complete_pair_queries(qa, sample_size or 0, seed)
        for record in sampled:
            for i, model_a in enumerate(ordered_models):
                for model_b in ordered_models[i + 1 :]:
                    answer_a = answers.get((model_a, record.query.query_id))
                    answer_b = answers.get((model_b, record.query.query_id))
                    if answer_a is None or answer_b is None:
                        continue
                    pairs.append(
                        AnswerPair(
                            query_id=record.query.query_id,
                            side_a=AnswerSide(source=model_a, text=answer_a.answer_text),
                            side_b=AnswerSide(source=model_b, text=answer_b.answer_text),
                        )
                    )
    return pairs


@dataclass(frozen=True)
class AnnotationTask:
    """A blinded pair as shown to an annotator; sources stay server-side."""

    task_id: str
    run_id: str
    query_id: str
    query_text: str
    first_answer: str
    second_answer: str
    swapped: bool
    pair: AnswerPair

    def to_payload(self, completed_by_annotator: int = 0) -> dict:
        return {
            "task_id": self.task_id,
            "query": self.query_text,
            "answers": [self.first_answer, self.second_answer],
            "rubric": ANNOTATION_RUBRIC,
            "options": [label.value for label in FivePointLabel],
            "progress": {"completed": completed_by_annotator},
        }


class ArenaService:
    """Owns the runs directory; every public method is journal-backed."""

    def __init__(
        self,
        runs_root: str | Path,
        client_factory: Callable[[ModelConfig], ChatClient] = make_client,
        sleep: Callable[[float], None] = time.sleep,
        rate_limiter: RateLimiter | None = None,
    ):
        self.runs_root = Path(runs_root)
        self.runs_root.mkdir(parents=True, exist_ok=True)
        self._client_factory = client_factory
        self._sleep = sleep
        self._rate_limiter = rate_limiter

    # --- run lifecycle ---

    def run_dir(self, run_id: str) -> Path:
        return self.runs_root / run_id

    def run_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.runs_root.iterdir() if (p / "journal.jsonl").exists()
        )

    def _journal(self, run_id: str) -> Journal:
        return Journal(self.run_dir(run_id) / "journal.jsonl")

    def _state(self, run_id: str) -> RunState:
        run_path = self.run_dir(run_id)
        if not (run_path / "journal.jsonl").exists():
            raise NotFoundError(f"unknown run {run_id!r}")
        return replay_journal(self._journal(run_id))

    def create_run(self, config: RunConfig, stop_after: str | None = None) -> str:
        """Execute (or resume) the pipeline; returns the run id.

        The id is derived from the config hash, so re-submitting the same
        config resumes the same journal instead of duplicating work.
        """
        if stop_after is not None and stop_after not in STAGES:
            raise ValueError(f"unknown stage {stop_after!r}")
        run_id = "run-" + config.config_hash[:12]
        journal = self._journal(run_id)
        state = replay_journal(journal) if journal.path.exists() else RunState()
        if state.config is None:
            journal.append({"type": "run_config", "config": config.to_dict()})
            state.config = config
        elif state.config.config_hash != config.config_hash:
            raise ConflictError(f"run {run_id} already exists with a different config")
        try:
            self._execute(run_id, journal, state, config, stop_after)
        except Exception:
            self._write_manifest(run_id, state, status=f"failed:{self._next_stage(state)}")
            raise
        return run_id

    def _next_stage(self, state: RunState) -> str:
        for stage in STAGES:
            if stage not in state.completed_stages:
                return stage
        return "done"

    def _execute(
        self,
        run_id: str,
        journal: Journal,
        state: RunState,
        config: RunConfig,
        stop_after: str | None,
    ) -> None:
        corpus = ingest_corpus(config.corpus_path)
        qa = ingest_qa(config.qa_path, corpus)
        if "ingest" not in state.completed_stages:
            journal.append(
                {
                    "type": "stage_complete",
                    "stage": "ingest",
                    "counts": {"documents": len(corpus), "queries": len(qa)},
                }
            )
            state.completed_stages.append("ingest")
        self._write_manifest(run_id, state, status="running")
        if stop_after == "ingest":
            self._write_manifest(run_id, state, status="partial:ingest")
            return

        passages = chunk_corpus(corpus.documents(), config.chunk_size)
        passage_text = {p.passage_id: p.text for p in passages}

        if "retrieve" not in state.completed_stages:
            retriever = self._build_retriever(config, passages, qa)
            for record in qa:
                if record.query.query_id in state.retrievals:
                    continue
                result = retriever.retrieve(record.query, config.k)
                event = {
                    "type": "retrieval",
                    "query_id": record.query.query_id,
                    "hits": [
                        {
                            "doc_id": h.passage_id.doc_id,
                            "ordinal": h.passage_id.ordinal,
                            "score": h.score,
                        }
                        for h in result.hits
                    ],
                }
                journal.append(event)
                state.retrievals[record.query.query_id] = event
            journal.append(
                {
                    "type": "stage_complete",
                    "stage": "retrieve",
                    "counts": {"retrievals": len(state.retrievals)},
                }
            )
            state.completed_stages.append("retrieve")
        if stop_after == "retrieve":
            self._write_manifest(run_id, state, status="partial:retrieve")
            return

        if "generate" not in state.completed_stages:
            self._generate_stage(journal, state, config, qa, passage_text)
            journal.append(
                {
                    "type": "stage_complete",
                    "stage": "generate",
                    "counts": {"answers": len(state.answers)},
                }
            )
            state.completed_stages.append("generate")
        if stop_after == "generate":
            self._write_manifest(run_id, state, status="partial:generate")
            return

        if "judge" not in state.completed_stages:
            self._judge_stage(journal, state, config, qa)
            journal.append(
                {
                    "type": "stage_complete",
                    "stage": "judge",
                    "counts": {"judgments": len(state.judgments)},
                }
            )
            state.completed_stages.append("judge")
        if stop_after == "judge":
            self._write_manifest(run_id, state, status="partial:judge")
            return

        if "rate" not in state.completed_stages:
            domain_by_query = {r.query.query_id: r.query.domain for r in qa}
            ordered = [
                state.judgments[key] for key in sorted(state.judgments)
            ]
            board = ratings.leaderboard(
                ordered,
                reference=REFERENCE_SOURCE,
                domain_by_query=domain_by_query,
                bootstrap_rounds=config.bootstrap_rounds,
                seed=config.seed,
            )
            payload = board.to_payload()
            payload["run_id"] = run_id
            payload["config_hash"] = config.config_hash
            journal.append({"type": "leaderboard", "payload": payload})
            state.leaderboard = payload
            snapshot = self.run_dir(run_id) / "leaderboard.json"
            snapshot.write_text(
                json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )
            journal.append(
                {
                    "type": "stage_complete",
                    "stage": "rate",
                    "counts": {"players": len(payload["entries"])},
                }
            )
            state.completed_stages.append("rate")
        self._write_manifest(run_id, state, status="complete")

    def _build_retriever(
        self, config: RunConfig, passages: Sequence[Passage], qa: Sequence[QaRecord]
    ) -> Retriever:
        if config.retriever == "precomputed":
            results = load_precomputed(
                config.precomputed_path,
                known_query_ids=[r.query.query_id for r in qa],
                known_passage_ids=[p.passage_id for p in passages],
            )
            return PrecomputedRetriever(results)
        return Bm25Index(passages)

    def _generate_stage(
        self,
        journal: Journal,
        state: RunState,
        config: RunConfig,
        qa: Sequence[QaRecord],
        passage_text: dict[PassageId, str],
    ) -> None:
        for model_config in sorted(config.models, key=lambda m: m.model_name):
            client = self._client_factory(model_config)
            tasks = [
                record
                for record in qa
                if (model_config.model_name, record.query.query_id) not in state.answers
            ]

            def generate_one(record: QaRecord) -> tuple[QaRecord, GeneratedAnswer | Exception]:
                event = state.retrievals[record.query.query_id]
                passage_ids = [
                    PassageId(h["doc_id"], int(h["ordinal"])) for h in event["hits"]
                ]
                texts = [passage_text[pid] for pid in passage_ids]
                if not texts:
                    # No retrieved context; the generation contract still
                    # needs a passage block, so send an explicit empty one.
                    texts = ["(no passage retrieved)"]
                prompt = render_answer_prompt(
                    record.query.text, texts, model_config.cot_enabled
                )
                try:
                    response = generate_answer(
                        client,
                        prompt,
                        model_config,
                        sleep=self._sleep,
                        rate_limiter=self._rate_limiter,
                    )
                except TransportError as exc:
                    return record, exc
                answer = postprocess_answer(
                    response.content,
                    record.query.query_id,
                    model_config.model_name,
                    passage_ids_used=passage_ids,
                )
                return record, answer

            for record, outcome in parallel_map(generate_one, tasks, config.parallelism):
                if isinstance(outcome, Exception):
                    event = {
                        "type": "generation_failure",
                        "model": model_config.model_name,
                        "query_id": record.query.query_id,
                        "error": str(outcome),
                    }
                    journal.append(event)
                    state.generation_failures.append(event)
                else:
                    journal.append({"type": "answer", "record": outcome.to_record()})
                    state.answers[(model_config.model_name, record.query.query_id)] = outcome

    def _judge_stage(
        self,
        journal: Journal,
        state: RunState,
        config: RunConfig,
        qa: Sequence[QaRecord],
    ) -> None:
        pairs = plan_pairs(
            qa,
            state.answers,
            [m.model_name for m in config.models],
            config.mode,
            config.sample_size,
            config.seed,
        )
        question_by_query = {r.query.query_id: r.query.text for r in qa}
        cache = _JournalBackedCache(journal, dict(state.judgments))
        outcome = run_pairwise_eval(
            pairs,
            question_by_query,
            config.judge,
            client=self._client_factory(config.judge),
            cache=cache,
            seed=config.seed,
            parallelism=config.parallelism,
            sleep=self._sleep,
            rate_limiter=self._rate_limiter,
        )
        for failure in outcome.failures:
            event = {
                "type": "judge_failure",
                "query_id": failure.query_id,
                "source_a": failure.source_a,
                "source_b": failure.source_b,
                "error": failure.error,
            }
            journal.append(event)
            state.judge_failures.append(event)
        state.judgments = dict(cache._entries)

    def _write_manifest(self, run_id: str, state: RunState, status: str) -> None:
        run_path = self.run_dir(run_id)
        run_path.mkdir(parents=True, exist_ok=True)
        manifest_path = run_path / "manifest.json"
        created_at = None
        if manifest_path.exists():
            existing = json.loads(manifest_path.read_text(encoding="utf-8"))
            if existing.get("status") == "complete":
                # A finished run's manifest is immutable.
                return
            created_at = existing.get("created_at")
        config = state.config
        manifest = {
            "format_version": FORMAT_VERSION,
            "run_id": run_id,
            "config_hash": config.config_hash if config else None,
            "seed": config.seed if config else None,
            "mode": config.mode if config else None,
            "judge_model": config.judge.model_name if config else None,
            "prompt_hashes": prompt_hashes(),
            "created_at": created_at or time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "finished_at": (
                time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
                if status == "complete"
                else None
            ),
            "status": status,
            "counts": {
                "retrievals": len(state.retrievals),
                "answers": len(state.answers),
                "judgments": len(state.judgments),
                "annotation_labels": sum(len(v) for v in state.annotation_labels.values()),
            },
            "failure_counts": {
                "generation": len(state.generation_failures),
                "judge": len(state.judge_failures),
            },
            "completed_stages": state.completed_stages,
        }
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    def get_manifest(self, run_id: str) -> dict:
        manifest_path = self.run_dir(run_id) / "manifest.json"
        if not manifest_path.exists():
            raise NotFoundError(f"unknown run {run_id!r}")
        return json.loads(manifest_path.read_text(encoding="utf-8"))

    def get_leaderboard(self, run_id: str) -> dict:
        state = self._state(run_id)
        if state.leaderboard is None:
            raise StageIncompleteError(f"run {run_id} has not finished its rating stage")
        return state.leaderboard

    def state_hash(self, run_id: str) -> str:
        return self._state(run_id).state_hash()

    # --- annotation workflow ---

    def _tasks_for_run(self, run_id: str, state: RunState) -> list[AnnotationTask]:
        if state.config is None:
            return []
        corpus = ingest_corpus(state.config.corpus_path)
        qa = ingest_qa(state.config.qa_path, corpus)
        question_by_query = {r.query.query_id: r.query.text for r in qa}
        tasks = []
        seen: set[str] = set()
        for key in sorted(state.judgments):
            judgment = state.judgments[key]
            if REFERENCE_SOURCE not in (judgment.source_a, judgment.source_b):
                continue
            query_id = judgment.query_id
            task_id = "task-" + hashlib.sha256(
                f"{run_id}|{query_id}|{judgment.source_a}|{judgment.source_b}".encode("utf-8")
            ).hexdigest()[:12]
            if task_id in seen:
                continue
            seen.add(task_id)
            pair = self._pair_from_judgment(state, qa, judgment)
            if pair is None:
                continue
            order = decide_presentation_order(
                f"{state.config.seed}|annotation", query_id, pair
            )
            if order.swapped:
                first, second = pair.side_b.text, pair.side_a.text
            else:
                first, second = pair.side_a.text, pair.side_b.text
            tasks.append(
                AnnotationTask(
                    task_id=task_id,
                    run_id=run_id,
                    query_id=query_id,
                    query_text=question_by_query.get(query_id, ""),
                    first_answer=first,
                    second_answer=second,
                    swapped=order.swapped,
                    pair=pair,
                )
            )
        return tasks

    def _pair_from_judgment(
        self, state: RunState, qa: Sequence[QaRecord], judgment: PairwiseJudgment
    ) -> AnswerPair | None:
        reference_by_query = {r.query.query_id: r.reference.text for r in qa}

        def side_text(source: str, query_id: str) -> str | None:
            if source == REFERENCE_SOURCE:
                return reference_by_query.get(query_id)
            answer = state.answers.get((source, query_id))
            return answer.answer_text if answer else None

        text_a = side_text(judgment.source_a, judgment.query_id)
        text_b = side_text(judgment.source_b, judgment.query_id)
        if text_a is None or text_b is None:
            return None
        return AnswerPair(
            query_id=judgment.query_id,
            side_a=AnswerSide(source=judgment.source_a, text=text_a),
            side_b=AnswerSide(source=judgment.source_b, text=text_b),
        )

    def _all_tasks(self) -> list[tuple[AnnotationTask, RunState]]:
        tasks = []
        for run_id in self.run_ids():
            state = self._state(run_id)
            for task in self._tasks_for_run(run_id, state):
                tasks.append((task, state))
        return tasks

    def next_annotation_item(self, annotator_id: str) -> dict | None:
        """Least-annotated open task this annotator has not labeled yet."""
        completed = 0
        candidates = []
        for task, state in self._all_tasks():
            labels = state.annotation_labels.get(task.task_id, [])
            if any(rec.annotator_id == annotator_id for rec in labels):
                completed += 1
                continue
            if len(labels) >= ANNOTATORS_PER_TASK:
                continue
            candidates.append((len(labels), task.task_id, task))
        if not candidates:
            return None
        candidates.sort(key=lambda item: (item[0], item[1]))
        return candidates[0][2].to_payload(completed_by_annotator=completed)

    def _find_task(self, task_id: str) -> tuple[AnnotationTask, RunState] | None:
        for task, state in self._all_tasks():
            if task.task_id == task_id:
                return task, state
        return None

    def submit_annotation(
        self, annotator_id: str, task_id: str, label: FivePointLabel
    ) -> dict:
        """Journal one five-point label; the task closes at three labels."""
        found = self._find_task(task_id)
        if found is None:
            raise NotFoundError(f"unknown task {task_id!r}")
        task, state = found
        labels = state.annotation_labels.get(task_id, [])
        if any(rec.annotator_id == annotator_id for rec in labels):
            raise ConflictError(f"annotator {annotator_id!r} already labeled {task_id}")
        if len(labels) >= ANNOTATORS_PER_TASK:
            raise ConflictError(f"task {task_id} already has {ANNOTATORS_PER_TASK} labels")
        self._journal(task.run_id).append(
            {
                "type": "annotation_label",
                "task_id": task_id,
                "annotator_id": annotator_id,
                "label": label.value,
                "swapped": task.swapped,
            }
        )
        return {
            "task_id": task_id,
            "labels_collected": len(labels) + 1,
            "complete": len(labels) + 1 >= ANNOTATORS_PER_TASK,
        }

    @staticmethod
    def _human_canonical(records: Sequence[AnnotationLabelRecord]) -> CanonicalLabel:
        canonical = []
        for record in records:
            merged = merge_five_point(record.label)
            canonical.append(merged.flipped() if record.swapped else merged)
        return majority_vote(canonical)

    def agreement_report(self, run_id: str) -> AgreementReport:
        """Human-vs-judge agreement over fully annotated tasks of one run."""
        state = self._state(run_id)
        tasks = self._tasks_for_run(run_id, state)
        judge_by_pair = {
            (j.query_id, j.source_a, j.source_b): j.canonical
            for j in state.judgments.values()
        }
        human_labels = []
        model_labels = []
        for task in tasks:
            records = state.annotation_labels.get(task.task_id, [])
            if len(records) < ANNOTATORS_PER_TASK:
                continue
            key = (task.query_id, task.pair.side_a.source, task.pair.side_b.source)
            judge_label = judge_by_pair.get(key)
            if judge_label is None:
                continue
            human_labels.append(self._human_canonical(records))
            model_labels.append(judge_label)
        if len(human_labels) < 3:
            raise InsufficientOverlapError(
                f"need at least 3 fully annotated tasks overlapping judgments, have {len(human_labels)}"
            )
        return compare_label_sets(human_labels, model_labels)
