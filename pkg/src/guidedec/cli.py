"""Command-line front end: generation batches, score inspection, evaluation.

Exit codes: 0 success, 2 bad input (missing backend, malformed task file,
invalid flags), 3 backend failure during inspection.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .backends import BackendError, resolve_backends, resolve_scorer
from .decoder import DecodingError, GenerationResult, GuidedDecoder, ranked_ids
from .metrics import (
    RunMeasures,
    aggregate,
    measure_run,
    perplexity,
    repetition,
    success_rate,
)
from .report import write_eval_report, write_score_dump
from .tokenization import words_of
from .types import DecodingConfig, GenerationState, Storyline, Strategy

MAX_PHRASES = 10


class TaskError(ValueError):
    pass


@dataclass
class Task:
    task_id: str
    prompt: str
    guide_phrases: list[str]
    strategy: Strategy
    lambda0: float
    k: int
    max_tokens: int
    seed: int
    samples: int
    temperature: float


def _task_from_record(record: dict, line_no: int, args: argparse.Namespace) -> Task:
    def fail(message: str) -> TaskError:
        return TaskError(f"line {line_no}: {message}")

    if not isinstance(record, dict):
        raise fail("task record must be a JSON object")
    prompt = record.get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        raise fail("missing or empty 'prompt'")
    phrases = record.get("guide_phrases", [])
    if not isinstance(phrases, list) or not all(isinstance(p, str) for p in phrases):
        raise fail("'guide_phrases' must be a list of strings")
    if len(phrases) > MAX_PHRASES:
        raise fail(f"more than {MAX_PHRASES} guide phrases")
    samples = record.get("samples", args.samples)
    if not isinstance(samples, int) or samples < 1:
        raise fail("'samples' must be a positive integer")
    try:
        strategy = Strategy(record.get("strategy", args.strategy))
    except ValueError:
        raise fail(f"unknown strategy {record.get('strategy')!r}") from None
    return Task(
        task_id=str(record.get("id", line_no - 1)),
        prompt=prompt,
        guide_phrases=phrases,
        strategy=strategy,
        lambda0=float(record.get("lambda0", args.lambda0)),
        k=int(record.get("k", args.top_k)),
        max_tokens=int(record.get("max_tokens", args.max_tokens)),
        seed=int(record.get("seed", args.seed)),
        samples=samples,
        temperature=float(record.get("temperature", args.temperature)),
    )


def _load_tasks(args: argparse.Namespace) -> list[Task]:
    if args.tasks:
        tasks = []
        with open(args.tasks, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TaskError(f"line {line_no}: invalid JSON ({exc.msg})") from None
                tasks.append(_task_from_record(record, line_no, args))
        if not tasks:
            raise TaskError("task file contains no tasks")
        return tasks
    if args.prompt is None:
        raise TaskError("pass --tasks or --prompt")
    inline = {
        "id": "inline",
        "prompt": args.prompt,
        "guide_phrases": list(args.phrases or []),
    }
    return [_task_from_record(inline, 1, args)]


def _run_record(task: Task, sample_id: int, seed: int) -> dict:
    return {
        "task_id": task.task_id,
        "sample_id": sample_id,
        "seed": seed,
        "strategy": task.strategy.value,
        "lambda0": task.lambda0,
        "k": task.k,
        "max_new_tokens": task.max_tokens,
        "prompt": task.prompt,
        "phrases": task.guide_phrases,
        "text": None,
        "token_ids": None,
        "insertion_log": None,
        "finish_reason": None,
        "phrases_inserted": None,
        "phrases_total": len(task.guide_phrases),
        "measures": None,
        "error": None,
    }


def cmd_run(args: argparse.Namespace) -> int:
    try:
        pair = resolve_backends(args.backend, args.ar_backend, args.mlm_backend)
        scorer = resolve_scorer(args.scorer_backend, pair)
        tasks = _load_tasks(args)
    except (BackendError, TaskError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    trace_out = None
    if args.trace and args.out:
        trace_out = open(Path(args.out).with_suffix(".trace.jsonl"), "w", encoding="utf-8")
    try:
        for task in tasks:
            for sample_id in range(task.samples):
                seed = task.seed + sample_id
                record = _run_record(task, sample_id, seed)
                try:
                    config = DecodingConfig(
                        strategy=task.strategy,
                        k=task.k,
                        lambda0=task.lambda0,
                        max_new_tokens=task.max_tokens,
                        seed=seed,
                        temperature=task.temperature,
                        trace=args.trace,
                    )
                    storyline = Storyline.from_strings(task.guide_phrases, pair.ar.tokenizer)
                    decoder = GuidedDecoder(pair.ar, pair.mlm, storyline, config)
                    result = decoder.generate(task.prompt)
                    measures = measure_run(
                        result, storyline, scorer, word_level_rep=args.rep_words
                    )
                    record.update(
                        text=result.text,
                        token_ids=list(result.generated_ids),
                        insertion_log=[list(entry) for entry in result.insertion_log],
                        finish_reason=result.finish_reason,
                        phrases_inserted=result.phrases_inserted,
                        measures=measures.to_json(),
                    )
                    if trace_out and result.steps:
                        for diag in result.steps:
                            step_record = {"task_id": task.task_id, "sample_id": sample_id}
                            step_record.update(diag.to_json())
                            trace_out.write(
                                json.dumps(step_record, sort_keys=True, ensure_ascii=False) + "\n"
                            )
                except (DecodingError, ValueError) as exc:
                    record["error"] = str(exc)
                out.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
        if trace_out:
            trace_out.close()
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        pair = resolve_backends(args.backend, args.ar_backend, args.mlm_backend)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        context_ids = tuple(pair.ar.tokenizer.encode(args.context))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not context_ids:
        print("error: context must be at least one token", file=sys.stderr)
        return 2

    strategy = Strategy(args.strategy)
    try:
        config = DecodingConfig(
            strategy=strategy, k=args.top_k, lambda0=args.lambda0, temperature=args.temperature
        )
        storyline = Storyline.from_strings([args.phrase], pair.ar.tokenizer)
        decoder = GuidedDecoder(pair.ar, pair.mlm, storyline, config)
        proposal = decoder.propose(GenerationState(prompt_ids=context_ids))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DecodingError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 3

    ar_scores = proposal.ar_scores
    mlm = proposal.mlm_projected
    final = proposal.final_scores
    vocab = pair.ar.vocabulary

    top_n = min(args.top_n, len(vocab))
    print(f"{'token':<16} {'ar_score':>10} {'mlm_score':>10} {'fused':>10}")
    for tid in ranked_ids(final)[:top_n]:
        mlm_score = float(mlm[tid]) if mlm is not None else 0.0
        print(
            f"{vocab.token(int(tid)):<16} {ar_scores[tid]:>10.4f} "
            f"{mlm_score:>10.4f} {final[tid]:>10.4f}"
        )
    if proposal.boosted is not None:
        b = proposal.boosted
        print(
            f"boosted token {vocab.token(b.token_id)!r}: "
            f"{b.pre_boost:.4f} -> {b.post_boost:.4f} "
            f"(lambda={b.lambda_i:.4f} alpha={b.alpha:.4f} delta={b.delta:.4f} "
            f"applied={b.applied})"
        )

    if args.dump_top:
        if decoder.alignment is not None:
            dump_ids = [t for t in ranked_ids(ar_scores) if int(t) in decoder.alignment.ar_to_mlm]
        else:
            dump_ids = list(ranked_ids(ar_scores))
        rows = []
        for tid in dump_ids[: args.dump_top]:
            tid = int(tid)
            rows.append(
                (
                    vocab.token(tid),
                    float(ar_scores[tid]),
                    float(mlm[tid]) if mlm is not None else 0.0,
                    float(final[tid]),
                )
            )
        paths = write_score_dump(rows, args.out_prefix)
        print(f"wrote {paths['csv']} and {paths['png']}")
    return 0


def _reconstruct_result(record: dict) -> GenerationResult:
    return GenerationResult(
        prompt_text=record.get("prompt", ""),
        text=record.get("text") or "",
        prompt_ids=(),
        generated_ids=tuple(record.get("token_ids") or ()),
        insertion_log=tuple(tuple(e) for e in record.get("insertion_log") or ()),
        finish_reason=record.get("finish_reason") or "budget",
        phrases_total=record.get("phrases_total", 0),
        phrases_inserted=record.get("phrases_inserted") or 0,
    )


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        with open(args.outputs, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        task_args = argparse.Namespace(
            samples=1, strategy="boost", lambda0=0.3, top_k=10, max_tokens=90, seed=0,
            temperature=1.0,
        )
        tasks: dict[str, Task] = {}
        with open(args.tasks, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                task = _task_from_record(json.loads(line), line_no, task_args)
                tasks[task.task_id] = task
    except (OSError, json.JSONDecodeError, TaskError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not records:
        print("error: outputs file is empty", file=sys.stderr)
        return 2
    unknown = {str(r.get("task_id")) for r in records} - set(tasks)
    if unknown:
        print(f"error: outputs reference unknown task ids: {sorted(unknown)}", file=sys.stderr)
        return 2

    scorer = None
    if args.scorer_backend or args.backend or args.ar_backend:
        try:
            pair = resolve_backends(args.backend, args.ar_backend, None)
            scorer = resolve_scorer(args.scorer_backend, pair)
        except BackendError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2

    groups: dict[tuple[str, float | None], list[RunMeasures]] = {}
    for record in records:
        if record.get("error"):
            continue
        task = tasks[str(record["task_id"])]
        result = _reconstruct_result(record)
        if scorer is not None:
            ppl = perplexity(result.generated_ids, scorer)
        else:
            ppl = float(record["measures"]["ppl"])
        rep_items = words_of(result.text) if args.rep_words else result.generated_ids
        rep = repetition(rep_items)
        sr, per_phrase = success_rate(result, task.guide_phrases)
        measures = RunMeasures(
            ppl=ppl, rep=rep, sr=sr, per_phrase=tuple(per_phrase),
            sr_defined=bool(task.guide_phrases),
        )
        strategy = record.get("strategy", task.strategy.value)
        lambda0 = record.get("lambda0") if strategy == Strategy.FUSION_BOOST.value else None
        groups.setdefault((strategy, lambda0), []).append(measures)

    if not groups:
        print("error: no evaluable records (all carry errors)", file=sys.stderr)
        return 2
    order = {Strategy.AR_ONLY.value: 0, Strategy.FUSION.value: 1, Strategy.FUSION_BOOST.value: 2}
    rows = []
    for (strategy, lambda0), runs in sorted(
        groups.items(), key=lambda kv: (order.get(kv[0][0], 9), kv[0][1] or 0.0)
    ):
        stats = aggregate(runs)
        rows.append(
            {
                "strategy": strategy,
                "lambda0": lambda0,
                "n": len(runs),
                "ppl": stats["ppl"],
                "rep": stats["rep"],
                "sr": stats["sr"],
            }
        )
    paths = write_eval_report(rows, args.report_dir)
    print((paths["txt"]).read_text("utf-8"), end="")
    print(f"report written to {args.report_dir}")
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="backend for both models: toy:<path> or remote:<url>")
    parser.add_argument("--ar-backend", help="autoregressive backend override")
    parser.add_argument("--mlm-backend", help="masked backend override")


def _add_decoding_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=[s.value for s in Strategy], default="boost")
    parser.add_argument("--lambda0", type=float, default=0.3)
    parser.add_argument("--top-k", type=int, default=10)
    parser.add_argument("--temperature", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guidedec",
        description="Guided text generation that steers sampling through guide phrases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate samples for tasks")
    _add_backend_flags(run)
    _add_decoding_flags(run)
    run.add_argument("--tasks", help="JSONL task file, one record per line")
    run.add_argument("--prompt", help="inline prompt (alternative to --tasks)")
    run.add_argument("--phrases", action="append", help="inline guide phrase; repeatable")
    run.add_argument("--out", help="output JSONL path (default stdout)")
    run.add_argument("--max-tokens", type=int, default=90)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--samples", type=int, default=1)
    run.add_argument("--scorer-backend", help="model scoring perplexity (default: AR backend)")
    run.add_argument(
        "--trace", action="store_true",
        help="write per-step diagnostics to <out>.trace.jsonl (needs --out)",
    )
    run.add_argument("--rep-words", action="store_true", help="word-level repetition n-grams")
    run.set_defaults(func=cmd_run)

    inspect = sub.add_parser("inspect", help="show per-token scores for one step")
    _add_backend_flags(inspect)
    _add_decoding_flags(inspect)
    inspect.add_argument("--context", required=True, help="left context text")
    inspect.add_argument("--phrase", required=True, help="pending guide phrase")
    inspect.add_argument("--top-n", type=int, default=10, help="rows to print")
    inspect.add_argument("--dump-top", type=int, help="dump the top-N scored shared tokens")
    inspect.add_argument("--out-prefix", default="scores", help="prefix for --dump-top files")
    inspect.set_defaults(func=cmd_inspect)

    evaluate = sub.add_parser("eval", help="aggregate measures over generated outputs")
    _add_backend_flags(evaluate)
    evaluate.add_argument("--outputs", required=True, help="JSONL produced by `run`")
    evaluate.add_argument("--tasks", required=True, help="originating task file")
    evaluate.add_argument("--report-dir", default="report", help="where to write the report")
    evaluate.add_argument("--scorer-backend", help="recompute perplexity with this model")
    evaluate.add_argument("--rep-words", action="store_true")
    evaluate.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
