"""Pairwise preference judging with blinded presentation order.

A judge sees the instruction and rubric, three worked examples covering each
rating, and the test pair. Presentation order is a deterministic hash of
(seed, query_id, pair content), and the raw 0/1/2 rating is mapped back to a
canonical A/B/TIE label so downstream statistics never depend on which side
was shown first.
"""

from __future__ import annotations

import hashlib
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .agreement import CanonicalLabel
from .jsonl import dumps_record, read_records
from .llm import (
    ChatClient,
    ModelConfig,
    RateLimiter,
    TransportError,
    generate_with_retry,
    make_client,
    parallel_map,
)

REFERENCE_SOURCE = "reference"

JUDGE_INSTRUCTION = (
    "We will show you a query and a pair of answers to the query. "
    "You need to provide your preference over this pair of answers.\n"
    "\n"
    "First, try your best to determine whether the information in an answer can help "
    "truthfully answer the query. Then rate your preference based on Helpfulness and "
    "Truthfulness.\n"
    "\n"
    "- Helpfulness: information that is helpful/relevant to answer the query. An ideal answer "
    "consists of only information that is helpful/relevant to answer the query.\n"
    "- Truthfulness: information that you believe is correct to answer the query. By our "
    "definition, truthful information should be helpful information. If you find it difficult "
    "to determine the truthfulness of some information, consider it untruthful. Often time, "
    "this is due to not enough context provided in the answer. Another source of untruthfulness "
    "is when conflicting information presented, and the answer does not reconcile them in a "
    "coherent way.\n"
    "\n"
    "<rubric>\n"
    "Here is how you judge (in the order of importance),\n"
    "- If one answer has all truthful information while the other has some untruthful "
    "information, prefer the all truthful one.\n"
    "- If both have some untruthful information, prefer the one with less untruthful "
    "information.\n"
    "- If both have all truthful information, prefer the one with more truthful or helpful "
    "information.\n"
    '- If two answers look equally good, or it is too hard to judge using the 3 cases above, '
    'then you are our "not sure" which one is better.\n'
    "</rubric>\n"
)

JUDGE_TEMPLATE = (
    "Query is in the <query></query> tags. Answer 1 is in <answer 1></answer 1>, "
    "and Answer 2 is in <answer 2></answer 2>.\n"
    "\n"
    "<query>\n{question}\n</query>\n"
    "\n"
    "<answer 1>\n{response1}\n</answer 1>\n"
    "\n"
    "<answer 2>\n{response2}\n</answer 2>\n"
    "\n"
    "Review the rubric in <rubric> tags,\n"
    "- if you prefer <answer 1>, output 1.\n"
    "- if you prefer <answer 2>, output 2.\n"
    "- if you are not sure, output 0.\n"
    "\n"
    "First, think step by step, put your thinking in <thinking></thinking> tags. "
    "Your thinking must be shorter than 50 words. Then, provide your rating inside "
    "<rating></rating> tags. Remember your rating should be 0 if you are not sure, "
    "and your rating must be either 0, 1, or 2.\n"
)

# Worked examples shown to the judge, one per rating value, in fixed order.
ICL_EXAMPLES: tuple[dict, ...] = (
    {
        "question": "difference between publicly and publically.",
        "response1": (
            "Both 'publicly' and 'publically' bear no difference in meaning, as they are "
            "essentially alternative spellings of the same concept. Publicly is more widely "
            "used, but the existence of 'publically' in reputable sources like the OED means "
            "it cannot be dismissed as simply incorrect. Some opinions hold that 'publicly' "
            "is the older irregular form, still preached by a lot of grammars, and "
            "'publically,' on the other hand, is the newer and regular form."
        ),
        "response2": (
            "There is no difference in meaning between 'publicly' and 'publically'; they "
            "are alternative spellings of the same word."
        ),
        "thinking": (
            "Both <answer 1> and <answer 2> are truthful. However, <answer 1> provides more "
            "truthful information as the context to compare the two terms. Therefore, "
            "<answer 1> is better."
        ),
        "rating": 1,
    },
    {
        "question": "what did European/American historical cooks do with the egg whites?",
        "response1": (
            "Historical European and American cooks used egg whites for making egg white "
            "omelettes and egg white pasta, as well as for stiffening clothing, similar to "
            "how starch is used today."
        ),
        "response2": (
            "Egg whites have found their place in various non-culinary applications "
            "throughout history, such as in the clarification of beer and wine, in the "
            "conservation of books through bookbinding and gilding, and in makeup as an "
            "ancient form of nail polish. They were also utilized historically as a "
            "stiffening agent for clothing, similar to how starch is used today. The "
            "culinary landscape was not left untouched, with egg whites making their way "
            "into recipes for omelettes and pastas as early as the 15th century."
        ),
        "thinking": (
            "Both <answer 1> and <answer 2> provide several usages of egg whites for "
            "European/American cooks. <answer 2> clearly provides more options with fully "
            "explained details. Therefore, <answer 2> is better."
        ),
        "rating": 2,
    },
    {
        "question": "should utf-16 be considered harmful?",
        "response1": (
            "The question of whether UTF-16 should be considered harmful is subject to "
            "differing opinions. One perspective suggests that UTF-16 is harmful due to a "
            "historical misconception about character encoding and recommends UTF-8 as the "
            "superior choice for various text interfaces. Another viewpoint argues that "
            "UTF-16 is not inherently harmful, emphasizing its utility in specific scenarios "
            "where it serves as a compromise between simplicity and compactness. The choice "
            "between UTF-16 and other encodings like UTF-8 depends on the specific "
            "requirements of the application, such as compatibility with ASCII or the need "
            "to efficiently encode certain character sets."
        ),
        "response2": (
            "UTF-16 should not be considered harmful. However, contrasting views argue that "
            "UTF-16 should indeed be considered harmful. Some argue that the very reason "
            "UTF-16 exists is because some time ago there used to be a misguided belief that "
            "WideChar is going to be what UCS-4 now is. Additionally, the harmfulness of "
            "UTF-16 is tied to issues with exercising code."
        ),
        "thinking": (
            "Both <answer 1> and <answer 2> reconcile the two conflicting views with "
            "detailed explanation. I am not sure which one is better."
        ),
        "rating": 0,
    },
)


class VerdictParseError(ValueError):
    """The judge output carries no rating tag."""


class InvalidRatingError(ValueError):
    """The rating tag holds something other than 0, 1, or 2."""


class JudgeFailure(RuntimeError):
    """A pair could not be judged even after the parse retry."""


@dataclass(frozen=True)
class AnswerSide:
    source: str
    text: str


@dataclass(frozen=True)
class AnswerPair:
    query_id: str
    side_a: AnswerSide
    side_b: AnswerSide

    def __post_init__(self) -> None:
        if self.side_a.source == self.side_b.source:
            raise ValueError(f"pair sides must differ, both are {self.side_a.source!r}")


@dataclass(frozen=True)
class PresentationOrder:
    swapped: bool
    seed: str
    query_id: str
    pair_hash: str


@dataclass(frozen=True)
class PairwiseJudgment:
    query_id: str
    source_a: str
    source_b: str
    judge_model: str
    raw_rating: int
    canonical: CanonicalLabel
    thinking: str | None
    order: PresentationOrder
    retries: int = 0

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "source_a": self.source_a,
            "source_b": self.source_b,
            "judge_model": self.judge_model,
            "raw_rating": self.raw_rating,
            "canonical": self.canonical.name,
            "thinking": self.thinking,
            "order": {
                "swapped": self.order.swapped,
                "seed": self.order.seed,
                "query_id": self.order.query_id,
                "pair_hash": self.order.pair_hash,
            },
            "retries": self.retries,
        }

    @classmethod
    def from_record(cls, record: dict) -> "PairwiseJudgment":
        order = record["order"]
        return cls(
            query_id=record["query_id"],
            source_a=record["source_a"],
            source_b=record["source_b"],
            judge_model=record["judge_model"],
            raw_rating=int(record["raw_rating"]),
            canonical=CanonicalLabel[record["canonical"]],
            thinking=record.get("thinking"),
            order=PresentationOrder(
                swapped=bool(order["swapped"]),
                seed=str(order["seed"]),
                query_id=order["query_id"],
                pair_hash=order["pair_hash"],
            ),
            retries=int(record.get("retries", 0)),
        )


def pair_content_hash(pair: AnswerPair) -> str:
    payload = "\x1f".join(
        [pair.side_a.source, pair.side_a.text, pair.side_b.source, pair.side_b.text]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def decide_presentation_order(seed: int | str, query_id: str, pair: AnswerPair) -> PresentationOrder:
    """Deterministic blinded shuffle: a hash bit of (seed, query, content)."""
    pair_hash = pair_content_hash(pair)
    digest = hashlib.sha256(f"{seed}|{query_id}|{pair_hash}".encode("utf-8")).digest()
    return PresentationOrder(
        swapped=bool(digest[0] & 1),
        seed=str(seed),
        query_id=query_id,
        pair_hash=pair_hash,
    )


def assemble_judge_prompt(question: str, presented_first: str, presented_second: str) -> str:
    """Instruction + rubric, three worked examples, then the test pair."""
    if not presented_first.strip() or not presented_second.strip():
        raise ValueError("both answers must be non-empty")
    parts = [JUDGE_INSTRUCTION]
    for example in ICL_EXAMPLES:
        parts.append(
            JUDGE_TEMPLATE.format(
                question=example["question"],
                response1=example["response1"],
                response2=example["response2"],
            )
        )
        parts.append(f"<thinking>{example['thinking']}</thinking>\n<rating>{example['rating']}</rating>\n")
    parts.append(
        JUDGE_TEMPLATE.format(
            question=question, response1=presented_first, response2=presented_second
        )
    )
    return "\n".join(parts)


_RATING_TAG_RE = re.compile(r"<rating>\s*(.*?)\s*</rating>", re.DOTALL | re.IGNORECASE)
_THINKING_TAG_RE = re.compile(r"<thinking>(.*?)</thinking>", re.DOTALL | re.IGNORECASE)


def parse_verdict(raw: str) -> tuple[int, str | None]:
    """Extract (raw_rating, thinking) from a judge completion."""
    match = _RATING_TAG_RE.search(raw)
    if match is None:
        raise VerdictParseError("no <rating> tag in judge output")
    value = match.group(1)
    try:
        rating = int(value)
    except ValueError as exc:
        raise InvalidRatingError(f"rating {value!r} is not an integer") from exc
    if rating not in (0, 1, 2):
        raise InvalidRatingError(f"rating must be 0, 1, or 2, got {rating}")
    thinking_match = _THINKING_TAG_RE.search(raw)
    thinking = thinking_match.group(1).strip() if thinking_match else None
    return rating, thinking


def canonicalize(raw_rating: int, order: PresentationOrder) -> CanonicalLabel:
    """Map a presented-order rating back to the canonical A/B frame."""
    if raw_rating == 0:
        return CanonicalLabel.TIE
    if raw_rating == 1:
        return CanonicalLabel.B_PREFERRED if order.swapped else CanonicalLabel.A_PREFERRED
    if raw_rating == 2:
        return CanonicalLabel.A_PREFERRED if order.swapped else CanonicalLabel.B_PREFERRED
    raise InvalidRatingError(f"rating must be 0, 1, or 2, got {raw_rating}")


def cache_key(judge_model: str, query_id: str, pair_hash: str, swapped: bool) -> str:
    return f"{judge_model}|{query_id}|{pair_hash}|{'swapped' if swapped else 'direct'}"


class JudgmentCache:
    """Keyed judgment store with optional append-only JSONL persistence."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, PairwiseJudgment] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            for _line_no, record in read_records(self._path):
                self._entries[record["key"]] = PairwiseJudgment.from_record(record["judgment"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> PairwiseJudgment | None:
        return self._entries.get(key)

    def put(self, key: str, judgment: PairwiseJudgment) -> None:
        with self._lock:
            self._entries[key] = judgment
            if self._path is not None:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as fp:
                    fp.write(dumps_record({"key": key, "judgment": judgment.to_record()}) + "\n")


def evaluate_pair(
    client: ChatClient,
    question: str,
    pair: AnswerPair,
    order: PresentationOrder,
    config: ModelConfig,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rate_limiter: RateLimiter | None = None,
) -> PairwiseJudgment:
    """Judge one pair in the given presentation order.

    A completion that fails verdict parsing is retried once before the pair
    is declared failed.
    """
    if order.swapped:
        first, second = pair.side_b.text, pair.side_a.text
    else:
        first, second = pair.side_a.text, pair.side_b.text
    prompt = assemble_judge_prompt(question, first, second)
    messages = [{"role": "user", "content": prompt}]
    retries = 0
    last_error: Exception | None = None
    for attempt in range(2):
        response = generate_with_retry(
            client, messages, config, sleep=sleep, rate_limiter=rate_limiter
        )
        try:
            rating, thinking = parse_verdict(response.content)
        except (VerdictParseError, InvalidRatingError) as exc:
            last_error = exc
            retries = attempt + 1
            continue
        return PairwiseJudgment(
            query_id=pair.query_id,
            source_a=pair.side_a.source,
            source_b=pair.side_b.source,
            judge_model=config.model_name,
            raw_rating=rating,
            canonical=canonicalize(rating, order),
            thinking=thinking,
            order=order,
            retries=attempt,
        )
    raise JudgeFailure(f"pair ({pair.side_a.source} vs {pair.side_b.source}) on query "
                       f"{pair.query_id!r}: {last_error}")


@dataclass(frozen=True)
class EvalFailure:
    query_id: str
    source_a: str
    source_b: str
    error: str


@dataclass(frozen=True)
class EvalOutcome:
    judgments: tuple[PairwiseJudgment, ...]
    failures: tuple[EvalFailure, ...]
    cache_hits: int
    endpoint_calls: int


def run_pairwise_eval(
    pairs: Sequence[AnswerPair],
    question_by_query_id: Mapping[str, str],
    config: ModelConfig,
    *,
    client: ChatClient | None = None,
    cache: JudgmentCache | None = None,
    seed: int | str = 0,
    parallelism: int = 1,
    sleep: Callable[[float], None] = time.sleep,
    rate_limiter: RateLimiter | None = None,
) -> EvalOutcome:
    """Judge every pair, short-circuiting through the cache.

    Failed pairs (transport exhaustion or double parse failure) are excluded
    from the judgment list and surfaced as failure records.
    """
    if client is None:
        client = make_client(config)
    if cache is None:
        cache = JudgmentCache()
    hits = 0
    calls = 0
    counter_lock = threading.Lock()

    def judge_one(pair: AnswerPair) -> PairwiseJudgment | EvalFailure:
        nonlocal hits, calls
        order = decide_presentation_order(seed, pair.query_id, pair)
        key = cache_key(config.model_name, pair.query_id, order.pair_hash, order.swapped)
        cached = cache.get(key)
        if cached is not None:
            with counter_lock:
                hits += 1
            return cached
        question = question_by_query_id[pair.query_id]
        try:
            judgment = evaluate_pair(
                client, question, pair, order, config, sleep=sleep, rate_limiter=rate_limiter
            )
        except (JudgeFailure, TransportError) as exc:
            return EvalFailure(
                query_id=pair.query_id,
                source_a=pair.side_a.source,
                source_b=pair.side_b.source,
                error=str(exc),
            )
        with counter_lock:
            calls += 1
        cache.put(key, judgment)
        return judgment

    results = parallel_map(judge_one, pairs, parallelism)
    judgments = tuple(r for r in results if isinstance(r, PairwiseJudgment))
    failures = tuple(r for r in results if isinstance(r, EvalFailure))
    return EvalOutcome(
        judgments=judgments, failures=failures, cache_hits=hits, endpoint_calls=calls
    )
