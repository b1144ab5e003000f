"""Answer-generation prompts and completion postprocessing.

The prompt body is model-independent; chat-role adaptation belongs to the
client adapter. Completions may open with a <thinking> block, which is
stripped from the final answer, and refusals are detected by containment of
the canonical refusal phrase.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .llm import ChatClient, ChatResponse, ModelConfig, RateLimiter, generate_with_retry
from .retrieval import PassageId

REFUSAL_PHRASE = "i couldn't find an answer"

ANSWER_PROMPT_HEADER = (
    "Based on the passages, provide a helpful answer to the query. "
    "Your answer must be faithful to the content in the passages. "
    "Do not use your own knowledge to answer the query. "
    "If you couldn't find any helpful information in the passages, "
    'respond "I couldn\'t find an answer."\n'
    "\n"
    "Passages are inside <passage></passage> tags. Query is in the <query></query> tags.\n"
)

COT_SUFFIX = (
    "First, think step by step, and put your thinking in <thinking> tags. "
    "Your thinking must be shorter than 50 words. Then, provide your answer.\n"
)

ANNOTATION_PROMPT_HEADER = (
    "Provide a response around 100 words to the query in the <query></query> tags "
    "based on the passages. Passages are inside <passage></passage> tags. "
    "The response must incorporate all candidate answers in the <ans></ans>, "
    "and you are allowed to rephrase these answers in order to make your final response natural. "
    "The response should not include any information outside passages.\n"
    "You should cite the passage number (indices) in the format of [1], [2], [3, 4], etc. "
    "at the end of each sentence.\n"
)


@dataclass(frozen=True)
class GeneratedAnswer:
    query_id: str
    model_name: str
    raw_text: str
    thinking: str | None
    answer_text: str
    no_answer: bool
    passage_ids_used: tuple[PassageId, ...] = ()
    parse_warning: bool = False

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "model_name": self.model_name,
            "raw_text": self.raw_text,
            "thinking": self.thinking,
            "answer_text": self.answer_text,
            "no_answer": self.no_answer,
            "passage_ids_used": [
                {"doc_id": p.doc_id, "ordinal": p.ordinal} for p in self.passage_ids_used
            ],
            "parse_warning": self.parse_warning,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GeneratedAnswer":
        return cls(
            query_id=record["query_id"],
            model_name=record["model_name"],
            raw_text=record["raw_text"],
            thinking=record.get("thinking"),
            answer_text=record["answer_text"],
            no_answer=bool(record["no_answer"]),
            passage_ids_used=tuple(
                PassageId(p["doc_id"], int(p["ordinal"]))
                for p in record.get("passage_ids_used", [])
            ),
            parse_warning=bool(record.get("parse_warning", False)),
        )


def _passage_blocks(passages: Sequence[str]) -> str:
    return "\n\n".join(f"<passage>\n{text}\n</passage>" for text in passages)


def render_answer_prompt(question: str, passages: Sequence[str], cot_enabled: bool = True) -> str:
    """Answer-generation prompt; the chain-of-thought block is optional."""
    if not passages:
        raise ValueError("render_answer_prompt needs at least one passage")
    prompt = (
        f"{ANSWER_PROMPT_HEADER}\n"
        f"{_passage_blocks(passages)}\n\n"
        f"<query>\n{question}\n</query>\n"
    )
    if cot_enabled:
        prompt += "\n" + COT_SUFFIX
    return prompt


def generate_answer(
    client: ChatClient,
    prompt: str,
    config: ModelConfig,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rate_limiter: RateLimiter | None = None,
) -> ChatResponse:
    """One completion for a rendered prompt, with the standard retry policy."""
    messages = [{"role": "user", "content": prompt}]
    return generate_with_retry(client, messages, config, sleep=sleep, rate_limiter=rate_limiter)


_THINKING_RE = re.compile(r"<thinking>(.*?)</thinking>", re.DOTALL | re.IGNORECASE)


def contains_refusal(text: str) -> bool:
    normalized = text.lower().replace("\u2019", "'")
    return REFUSAL_PHRASE in normalized


def postprocess_answer(
    raw_text: str,
    query_id: str,
    model_name: str,
    passage_ids_used: Sequence[PassageId] = (),
) -> GeneratedAnswer:
    """Strip the first thinking block and flag refusals.

    An unclosed <thinking> tag leaves the text untouched and sets
    parse_warning. Refusal detection runs on the stripped answer only, so an
    answer hidden inside the thinking block still counts as a refusal.
    """
    thinking = None
    parse_warning = False
    match = _THINKING_RE.search(raw_text)
    if match:
        thinking = match.group(1).strip()
        answer_text = (raw_text[: match.start()] + raw_text[match.end() :]).strip()
    else:
        answer_text = raw_text.strip()
        if "<thinking>" in raw_text.lower():
            parse_warning = True
    return GeneratedAnswer(
        query_id=query_id,
        model_name=model_name,
        raw_text=raw_text,
        thinking=thinking,
        answer_text=answer_text,
        no_answer=contains_refusal(answer_text),
        passage_ids_used=tuple(passage_ids_used),
        parse_warning=parse_warning,
    )


@dataclass(frozen=True)
class NoAnswerReport:
    overall_pct: float
    per_domain_pct: dict[str, float]
    refusals: int
    total: int


def no_answer_ratio(
    answers: Sequence[GeneratedAnswer], domain_by_query: Mapping[str, str]
) -> NoAnswerReport:
    """Refusal percentage per domain plus the micro-averaged overall."""
    if not answers:
        raise ValueError("no_answer_ratio needs at least one answer")
    totals: dict[str, int] = {}
    refusals: dict[str, int] = {}
    for answer in answers:
        domain = domain_by_query[answer.query_id]
        totals[domain] = totals.get(domain, 0) + 1
        refusals[domain] = refusals.get(domain, 0) + (1 if answer.no_answer else 0)
    per_domain = {d: 100.0 * refusals[d] / totals[d] for d in sorted(totals)}
    total = sum(totals.values())
    refused = sum(refusals.values())
    return NoAnswerReport(
        overall_pct=100.0 * refused / total,
        per_domain_pct=per_domain,
        refusals=refused,
        total=total,
    )


def mark_candidate_answers(passage_text: str, spans: Sequence[str]) -> str:
    """Wrap the first occurrence of each extractive span in <ans></ans>."""
    marked = passage_text
    for span in spans:
        if span and span in marked and f"<ans>{span}</ans>" not in marked:
            marked = marked.replace(span, f"<ans>{span}</ans>", 1)
    return marked


def render_annotation_prompt(
    question: str, passages: Sequence[str], short_answers: Sequence[str]
) -> str:
    """Answer-combination prompt with candidate spans highlighted in place."""
    if not short_answers:
        raise ValueError("render_annotation_prompt needs at least one candidate answer")
    if not passages:
        raise ValueError("render_annotation_prompt needs at least one passage")
    marked = [mark_candidate_answers(text, short_answers) for text in passages]
    return (
        f"{ANNOTATION_PROMPT_HEADER}\n"
        f"{_passage_blocks(marked)}\n\n"
        f"<query>\n{question}\n</query>\n"
    )


_CITATION_RE = re.compile(r"\[([0-9]+(?:\s*,\s*[0-9]+)*)\]")


def parse_citation_indices(text: str) -> tuple[int, ...]:
    """Distinct passage indices cited as [1], [2, 3], ... in reading order."""
    seen: list[int] = []
    for group in _CITATION_RE.findall(text):
        for part in group.split(","):
            index = int(part.strip())
            if index not in seen:
                seen.append(index)
    return tuple(seen)


@dataclass(frozen=True)
class SynthesizedAnnotation:
    query_id: str
    model_name: str
    text: str
    cited_indices: tuple[int, ...]


def synthesize_annotation(
    client: ChatClient,
    query_id: str,
    question: str,
    passages: Sequence[str],
    short_answers: Sequence[str],
    config: ModelConfig,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rate_limiter: RateLimiter | None = None,
) -> SynthesizedAnnotation:
    """Draft a cited long-form answer from gold passages and candidate spans."""
    prompt = render_annotation_prompt(question, passages, short_answers)
    response = generate_answer(client, prompt, config, sleep=sleep, rate_limiter=rate_limiter)
    processed = postprocess_answer(response.content, query_id, config.model_name)
    return SynthesizedAnnotation(
        query_id=query_id,
        model_name=config.model_name,
        text=processed.answer_text,
        cited_indices=parse_citation_indices(processed.answer_text),
    )
