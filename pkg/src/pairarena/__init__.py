"""Arena for grading retrieval-augmented QA systems against long-form
reference answers: retrieval, generation, pairwise judging, Bradley-Terry
Elo leaderboards with bootstrap intervals, and human-preference collection."""

from .agreement import (
    AgreementReport,
    CanonicalLabel,
    FivePointLabel,
    cohens_kappa,
    majority_vote,
    merge_five_point,
    pearson,
)
from .corpus import (
    Corpus,
    Document,
    QaRecord,
    QueryRecord,
    ReferenceAnswer,
    ShortAnswerSpan,
    corpus_stats,
    coverage_ratio,
    doc_usage_distribution,
    ingest_corpus,
    ingest_qa,
    qc_report,
    validate_citations,
)
from .generation import (
    GeneratedAnswer,
    no_answer_ratio,
    postprocess_answer,
    render_answer_prompt,
    synthesize_annotation,
)
from .judge import (
    REFERENCE_SOURCE,
    AnswerPair,
    AnswerSide,
    PairwiseJudgment,
    assemble_judge_prompt,
    canonicalize,
    decide_presentation_order,
    parse_verdict,
    run_pairwise_eval,
)
from .llm import ChatResponse, ModelConfig, make_client
from .ratings import (
    OutcomeMatrix,
    RatingEntry,
    WinRateTable,
    bootstrap_ci,
    bt_fit,
    build_outcomes,
    leaderboard,
    star_closed_form,
    to_elo,
    win_rates,
)
from .retrieval import (
    Bm25Index,
    Passage,
    PassageId,
    RetrievalResult,
    build_index,
    chunk_document,
    load_precomputed,
)
from .service import ArenaService, RunConfig

__version__ = "0.1.0"
