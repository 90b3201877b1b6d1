"""Command-line front end.

Subcommands: compile-pm, compile-tf, run, diff, trace, verify-literal.
All artifact paths are explicit flags; nothing is written implicitly.
Exit codes: 0 success, 1 failed verdict or missing answer, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import CORPUS, demo_adapted_pm, machine_by_name
from .errors import TapeloopError
from .harness import default_workers, run_suite
from .machines import (
    PmSpec,
    ResourceLimits,
    TmSpec,
    parse_machine,
    pm_run,
    serialize_machine,
    tm_run,
)
from .tm2pm import artifact_metadata, compile_tm_to_pm, plan_queue_size
from .tf_compile import (
    compile_pm_to_tf,
    parse_weights,
    serialize_weights,
    synthesize_ff_mlp,
    verify_ff_synthesis,
    verify_paper_literal,
)
from .tf_runtime import generate


def _load_tm(name_or_path: str) -> TmSpec:
    try:
        return machine_by_name(name_or_path)
    except KeyError:
        pass
    spec = parse_machine(Path(name_or_path).read_text())
    if not isinstance(spec, TmSpec):
        raise TapeloopError(f"{name_or_path} is not a tape machine document")
    return spec


def _load_pm(path: str) -> PmSpec:
    spec = parse_machine(Path(path).read_text())
    if not isinstance(spec, PmSpec):
        raise TapeloopError(f"{path} is not a queue machine document")
    return spec


def _space_for(name_or_path: str, n: int, space_flag) -> int:
    if space_flag is not None:
        return space_flag
    if name_or_path in CORPUS:
        return CORPUS[name_or_path].space(n)
    return n + 2


def _jsonl_writer(path: str):
    handle = open(path, "w")

    def sink(record: dict) -> None:
        handle.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    return handle, sink


def cmd_compile_pm(args) -> int:
    spec = _load_tm(args.machine)
    artifact = compile_tm_to_pm(spec, args.space)
    Path(args.out).write_text(serialize_machine(artifact.pm))
    if args.meta:
        Path(args.meta).write_text(
            json.dumps(artifact_metadata(artifact), sort_keys=True, indent=2) + "\n"
        )
    print(
        f"queue machine: {len(artifact.pm.states)} states, "
        f"{len(artifact.pm.alphabet)} symbols, queue size {artifact.queue_size}"
    )
    print(f"wrote {args.out}" + (f" and {args.meta}" if args.meta else ""))
    return 0


def cmd_compile_tf(args) -> int:
    if args.pm:
        pm = _load_pm(args.pm)
        window = args.window
        if window is None:
            raise TapeloopError("--window is required with --pm")
    else:
        spec = _load_tm(args.machine)
        space = args.space if args.space is not None else 2
        artifact = compile_tm_to_pm(spec, space)
        pm = artifact.pm
        window = args.window if args.window is not None else artifact.queue_size
    weights = compile_pm_to_tf(pm, window)
    if args.with_mlp:
        mlp = synthesize_ff_mlp(weights.ff, weights.layout)
        from dataclasses import replace

        weights = replace(weights, mlp=mlp)
    Path(args.out).write_text(serialize_weights(weights))
    lo = weights.layout
    print(
        f"weights: vocab {lo.vocab_size}, width {lo.d}, window {weights.window}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    n = len(args.input)
    space = _space_for(args.machine, n, args.space)
    handle = sink = None
    try:
        if args.backend == "tm":
            spec = _load_tm(args.machine)
            if args.trace:
                handle, sink = _jsonl_writer(args.trace)
            stats, _ = tm_run(
                spec, args.input, ResourceLimits(args.max_steps, space), trace_sink=sink
            )
            answer = stats.output_bit
        else:
            spec = _load_tm(args.machine)
            artifact = compile_tm_to_pm(spec, space)
            p = plan_queue_size(spec, n, space)
            if args.backend == "pm":
                if args.trace:
                    handle, sink = _jsonl_writer(args.trace)
                stats, _ = pm_run(
                    artifact.pm, args.input, p, ResourceLimits(args.max_steps), trace_sink=sink
                )
                answer = stats.output_bit
            else:
                weights = compile_pm_to_tf(artifact.pm, p)
                if args.trace:
                    handle, sink = _jsonl_writer(args.trace)
                result = generate(
                    weights,
                    args.input,
                    ResourceLimits(args.max_steps),
                    trace_sink=sink,
                    strict_answer=False,
                )
                answer = result.stats.output_bit
    finally:
        if handle:
            handle.close()
    if args.trace:
        print(f"trace written to {args.trace}")
    if answer is None:
        print("answer none (halted without an answer symbol)")
        return 1
    print(f"answer {answer}")
    return 0


def cmd_diff(args) -> int:
    names = list(CORPUS) if args.machine == "all" else [args.machine]
    for name in names:
        if name not in CORPUS:
            raise TapeloopError(f"unknown corpus machine {name!r}")
    report = run_suite(
        names,
        args.max_len,
        measure_space=args.measure_space,
        workers=args.workers,
    )
    if args.out:
        Path(args.out).write_text(report.to_jsonl())
    factors = report.max_step_factor()
    by_machine: dict = {}
    for row in report.rows:
        ok, total = by_machine.get(row.machine, (0, 0))
        by_machine[row.machine] = (ok + (1 if row.verdict else 0), total + 1)
    for name in names:
        ok, total = by_machine[name]
        print(
            f"{name}: {ok}/{total} rows pass, "
            f"max step factor {factors.get(name, 0.0):.3f}"
        )
    failures = [row for row in report.rows if not row.verdict]
    for row in failures[:10]:
        print(
            f"FAIL {row.machine} input={row.input!r} "
            f"tm={row.tm_output} pm={row.pm_output} tf={row.tf_output} "
            f"{row.error or ''}"
        )
    if args.out:
        print(f"report written to {args.out}")
    return 0 if report.all_pass else 1


def cmd_trace(args) -> int:
    args.backend = "tf"
    return cmd_run(args)


def cmd_verify_literal(args) -> int:
    if args.weights:
        weights = parse_weights(Path(args.weights).read_text())
    else:
        weights = compile_pm_to_tf(demo_adapted_pm(), args.window)
    report = verify_paper_literal(weights)
    for line in report.lines():
        print(line)
    mlp = synthesize_ff_mlp(weights.ff, weights.layout)
    checked, mismatches = verify_ff_synthesis(weights, mlp)
    status = "ok" if not mismatches else "FAIL"
    print(f"{status:4s} feed-forward synthesis agrees on {checked} inputs")
    return 0 if report.ok and not mismatches else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapeloop",
        description="tape machine -> queue machine -> decoder pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile-pm", help="compile a tape machine to a queue machine")
    p.add_argument("--machine", required=True, help="corpus name or document path")
    p.add_argument("--space", type=int, required=True, help="space bound")
    p.add_argument("--out", required=True)
    p.add_argument("--meta", help="sidecar metadata path")
    p.set_defaults(func=cmd_compile_pm)

    p = sub.add_parser("compile-tf", help="emit decoder weights")
    p.add_argument("--machine", help="corpus name or tape machine path")
    p.add_argument("--pm", help="queue machine document path")
    p.add_argument("--space", type=int, help="space bound (with --machine)")
    p.add_argument("--window", type=int, help="context window size")
    p.add_argument("--with-mlp", action="store_true", help="embed the synthesized network")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile_tf)

    p = sub.add_parser("run", help="run one backend on one input")
    p.add_argument("--backend", choices=("tm", "pm", "tf"), required=True)
    p.add_argument("--machine", required=True)
    p.add_argument("--input", default="")
    p.add_argument("--space", type=int)
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--trace", help="write a JSONL step trace here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", help="differential suite over the corpus")
    p.add_argument("--machine", default="all")
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--out", help="JSONL report path")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default from $TAPELOOP_WORKERS, then {default_workers()})")
    p.add_argument("--measure-space", action="store_true",
                   help="size queues from measured space instead of the declared bound")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("trace", help="write the decoder token trace for one input")
    p.add_argument("--machine", required=True)
    p.add_argument("--input", default="")
    p.add_argument("--space", type=int)
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--trace", required=True, help="JSONL output path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("verify-literal", help="check the fixed coordinate layout")
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--weights", help="check an existing weights document")
    p.set_defaults(func=cmd_verify_literal)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TapeloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
