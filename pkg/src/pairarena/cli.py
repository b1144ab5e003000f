"""Command-line facade over the arena operations.

Each subcommand wraps exactly one pipeline operation; `run` drives the whole
journaled pipeline from a config file and `serve` exposes the HTTP API.
Credentials are only ever read from the environment variables named in model
configs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ratings
from .corpus import (
    corpus_stats,
    ingest_corpus,
    ingest_qa,
    qc_report,
    render_qc_table,
    render_stats_table,
)
from .generation import (
    GeneratedAnswer,
    generate_answer,
    no_answer_ratio,
    postprocess_answer,
    render_answer_prompt,
)
from .judge import (
    REFERENCE_SOURCE,
    AnswerPair,
    AnswerSide,
    PairwiseJudgment,
    run_pairwise_eval,
)
from .jsonl import read_records, write_records
from .llm import ModelConfig, make_client
from .retrieval import Bm25Index, chunk_corpus, load_precomputed, write_results
from .service import ArenaService, RunConfig


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _model_config(path: str) -> ModelConfig:
    return ModelConfig.from_dict(_load_json(path))


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    print(f"documents: {len(corpus)}")
    print(f"queries:   {len(qa)}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    report = corpus_stats(corpus, qa, chunk_size=args.chunk_size)
    print(render_stats_table(report))
    if args.out:
        write_records(args.out, report.to_records())
    return 0


def cmd_qc(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    report = qc_report(qa)
    print(render_qc_table(report))
    flagged = report.flagged()
    print(f"\nflagged {len(flagged)} of {len(report.records)} answers")
    if args.out:
        write_records(args.out, [r.to_record() for r in report.records])
    return 0


def cmd_chunk(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    passages = chunk_corpus(corpus.documents(), args.chunk_size)
    write_records(
        args.out,
        (
            {
                "doc_id": p.passage_id.doc_id,
                "ordinal": p.passage_id.ordinal,
                "text": p.text,
                "token_count": p.token_count,
            }
            for p in passages
        ),
    )
    print(f"wrote {len(passages)} passages to {args.out}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    passages = chunk_corpus(corpus.documents(), args.chunk_size)
    index = Bm25Index(passages)
    index.save(args.out)
    print(
        f"indexed {index.num_passages} passages, {index.num_terms} terms, "
        f"avg length {index.average_length:.1f}"
    )
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    index = Bm25Index.load(args.index)
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    results = [index.retrieve(record.query, args.k) for record in qa]
    write_results(results, args.out)
    print(f"wrote {len(results)} retrieval results to {args.out}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    passages = chunk_corpus(corpus.documents(), args.chunk_size)
    passage_text = {p.passage_id: p.text for p in passages}
    results = load_precomputed(
        args.retrieval,
        known_query_ids=[r.query.query_id for r in qa],
        known_passage_ids=list(passage_text),
    )
    config = _model_config(args.model_config)
    client = make_client(config)
    answers = []
    for record in qa:
        result = results.get(record.query.query_id)
        if result is None or not result.hits:
            continue
        passage_ids = [h.passage_id for h in result.hits[: args.k]]
        prompt = render_answer_prompt(
            record.query.text,
            [passage_text[pid] for pid in passage_ids],
            config.cot_enabled,
        )
        response = generate_answer(client, prompt, config)
        answers.append(
            postprocess_answer(
                response.content, record.query.query_id, config.model_name, passage_ids
            )
        )
    write_records(args.out, (a.to_record() for a in answers))
    print(f"wrote {len(answers)} answers to {args.out}")
    domain_by_query = {r.query.query_id: r.query.domain for r in qa}
    if answers:
        report = no_answer_ratio(answers, domain_by_query)
        print(f"no-answer ratio: {report.overall_pct:.1f}%")
    return 0


def cmd_judge(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    reference_by_query = {r.query.query_id: r.reference.text for r in qa}
    question_by_query = {r.query.query_id: r.query.text for r in qa}
    pairs = []
    for answers_path in args.answers:
        for _line_no, record in read_records(answers_path):
            answer = GeneratedAnswer.from_record(record)
            reference = reference_by_query.get(answer.query_id)
            if reference is None:
                continue
            pairs.append(
                AnswerPair(
                    query_id=answer.query_id,
                    side_a=AnswerSide(source=answer.model_name, text=answer.answer_text),
                    side_b=AnswerSide(source=REFERENCE_SOURCE, text=reference),
                )
            )
    config = _model_config(args.judge_config)
    outcome = run_pairwise_eval(
        pairs,
        question_by_query,
        config,
        seed=args.seed if args.seed is not None else 0,
        parallelism=args.parallelism if args.parallelism is not None else 1,
    )
    write_records(args.out, (j.to_record() for j in outcome.judgments))
    print(f"wrote {len(outcome.judgments)} judgments to {args.out}")
    if outcome.failures:
        print(f"failures: {len(outcome.failures)}", file=sys.stderr)
    return 0


def cmd_rate(args: argparse.Namespace) -> int:
    corpus = ingest_corpus(args.corpus)
    qa = ingest_qa(args.qa, corpus)
    domain_by_query = {r.query.query_id: r.query.domain for r in qa}
    judgments = [
        PairwiseJudgment.from_record(record) for _line_no, record in read_records(args.judgments)
    ]
    board = ratings.leaderboard(
        judgments,
        reference=REFERENCE_SOURCE,
        domain_by_query=domain_by_query,
        bootstrap_rounds=args.bootstrap_rounds,
        seed=args.seed if args.seed is not None else 0,
    )
    print(ratings.render_leaderboard_table(board.entries))
    if args.out:
        Path(args.out).write_text(
            json.dumps(board.to_payload(), sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_agree(args: argparse.Namespace) -> int:
    service = ArenaService(args.runs_root)
    report = service.agreement_report(args.run_id)
    print(json.dumps(report.to_record(), indent=2))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_record(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.from_dict(_load_json(args.config))
    if args.seed is not None:
        config = RunConfig.from_dict({**config.to_dict(), "seed": args.seed})
    if args.parallelism is not None:
        config = RunConfig.from_dict({**config.to_dict(), "parallelism": args.parallelism})
    service = ArenaService(args.runs_root)
    run_id = service.create_run(config, stop_after=args.stop_after)
    print(f"run id: {run_id}")
    manifest = service.get_manifest(run_id)
    print(f"status: {manifest['status']}")
    if manifest["status"] == "complete":
        payload = service.get_leaderboard(run_id)
        entries = [ratings.RatingEntry(**entry) for entry in payload["entries"]]
        print(ratings.render_leaderboard_table(entries))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    service = ArenaService(args.runs_root)
    app = create_app(service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairarena")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="path to a JSON config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--parallelism", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate corpus and QA files")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="dataset summary table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--chunk-size", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("qc", parents=[common], help="answer quality-control report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_qc)

    p = sub.add_parser("chunk", parents=[common], help="split documents into passages")
    p.add_argument("--corpus", required=True)
    p.add_argument("--chunk-size", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_chunk)

    p = sub.add_parser("index", parents=[common], help="build and persist the BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--chunk-size", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("retrieve", parents=[common], help="top-k passages per query")
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("generate", parents=[common], help="answers from retrieved passages")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--retrieval", required=True, help="retrieval-results file")
    p.add_argument("--model-config", required=True)
    p.add_argument("--chunk-size", type=int, default=100)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("judge", parents=[common], help="pairwise judgments vs the reference")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--answers", nargs="+", required=True)
    p.add_argument("--judge-config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_judge)

    p = sub.add_parser("rate", parents=[common], help="leaderboard from judgments")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--judgments", required=True)
    p.add_argument("--bootstrap-rounds", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rate)

    p = sub.add_parser("agree", parents=[common], help="human-vs-judge agreement for a run")
    p.add_argument("--runs-root", required=True)
    p.add_argument("--run-id", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_agree)

    p = sub.add_parser("run", parents=[common], help="execute the full journaled pipeline")
    p.add_argument("--runs-root", required=True)
    p.add_argument("--stop-after", choices=["ingest", "retrieve", "generate", "judge", "rate"])
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", parents=[common], help="start the HTTP API")
    p.add_argument("--runs-root", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.fn is cmd_run and not args.config:
        parser.error("run requires --config")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
