"""Differential execution of the three backends over the corpus.

One row per (machine, input): run the tape machine directly, compile
and run the queue machine, compile and run the decoder, then compare
answers, compare the token trace against the queue log entry for
entry, replay every checkpoint against the direct tape configurations,
and check the resource bounds. Rows never raise; backend failures are
recorded as failed verdicts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Optional

from .corpus import CORPUS, CorpusEntry
from .errors import TapeloopError
from .machines import ResourceLimits, tm_config_trace, tm_run, pm_run
from .tm2pm import CompileArtifact, compile_tm_to_pm, plan_queue_size, walk_checkpoints
from .tf_compile import TfWeights, compile_pm_to_tf
from .tf_runtime import generate

WORKERS_ENV = "TAPELOOP_WORKERS"


@dataclass
class DiffRow:
    machine: str
    input: str
    verdict: bool
    tm_output: Optional[int]
    pm_output: Optional[int]
    tf_output: Optional[int]
    t: int
    s: int
    P: int
    pm_steps: int
    cot_tokens: int
    peak_activation: int
    peak_memory: int
    # diagnostics kept out of the serialized report
    oracle_output: Optional[int] = None
    trace_equal: bool = False
    checkpoints_ok: bool = False
    bounds: dict = None
    error: Optional[str] = None

    def record(self) -> dict:
        return {
            "machine": self.machine,
            "input": self.input,
            "verdict": self.verdict,
            "tm_output": self.tm_output,
            "pm_output": self.pm_output,
            "tf_output": self.tf_output,
            "t": self.t,
            "s": self.s,
            "P": self.P,
            "pm_steps": self.pm_steps,
            "cot_tokens": self.cot_tokens,
            "peak_activation": self.peak_activation,
            "peak_memory": self.peak_memory,
        }


@dataclass
class DiffReport:
    rows: list

    @property
    def all_pass(self) -> bool:
        return all(row.verdict for row in self.rows)

    def max_step_factor(self) -> dict:
        """Measured pm_steps / (P * t) per machine, the loudest run."""
        worst: dict = {}
        for row in self.rows:
            if row.t and row.P:
                factor = row.pm_steps / (row.P * row.t)
                if factor > worst.get(row.machine, 0.0):
                    worst[row.machine] = factor
        return worst

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(row.record(), sort_keys=True, separators=(",", ":")) + "\n"
            for row in self.rows
        )


# Per-process caches; the compiled rule tables and weights do not
# depend on the queue size, so one compilation serves every input.
_ARTIFACTS: dict = {}
_WEIGHTS: dict = {}


def _compiled(entry: CorpusEntry) -> tuple[CompileArtifact, TfWeights]:
    got = _ARTIFACTS.get(entry.name)
    if got is None:
        artifact = compile_tm_to_pm(entry.spec, space_bound=2)
        weights = compile_pm_to_tf(artifact.pm, window=artifact.queue_size)
        _ARTIFACTS[entry.name] = artifact
        _WEIGHTS[entry.name] = weights
        got = artifact
    return got, _WEIGHTS[entry.name]


def check_bounds(
    *, P: int, t: int, pm_steps: int, cot_tokens: int, fill_tokens: int,
    peak_retained: int, peak_activation: int,
) -> dict:
    """Named resource-bound verdicts for one completed row."""
    return {
        "pm_step_bound": pm_steps <= 4 * P * t + P,
        "cot_identity": cot_tokens == pm_steps + fill_tokens,
        "window_bound": peak_retained <= P,
        "activation_bound": peak_activation <= 3,
    }


def run_differential(
    entry: CorpusEntry, input_bits: str, *, measure_space: bool = False
) -> DiffRow:
    n = len(input_bits)
    row = DiffRow(
        machine=entry.name, input=input_bits, verdict=False,
        tm_output=None, pm_output=None, tf_output=None,
        t=0, s=0, P=0, pm_steps=0, cot_tokens=0,
        peak_activation=0, peak_memory=0,
        oracle_output=entry.oracle(input_bits), bounds={},
    )
    try:
        declared = entry.space(n)
        tm_limits = ResourceLimits(entry.step_cap(n), declared)
        tm_stats, _ = tm_run(entry.spec, input_bits, tm_limits)
        row.tm_output = tm_stats.output_bit
        row.t = tm_stats.time_steps
        row.s = tm_stats.space_cells if measure_space else declared
        row.P = plan_queue_size(entry.spec, n, row.s)

        base_artifact, base_weights = _compiled(entry)
        artifact = replace(base_artifact, queue_size=row.P)
        pm_limits = ResourceLimits(8 * row.P * row.t + 2 * row.P + 64)
        pm_stats, log = pm_run(artifact.pm, input_bits, row.P, pm_limits)
        row.pm_output = pm_stats.output_bit
        row.pm_steps = pm_stats.time_steps

        weights = base_weights.with_window(row.P)
        tf_limits = ResourceLimits(row.pm_steps + row.P + 8)
        result = generate(weights, input_bits, tf_limits, strict_answer=False)
        row.tf_output = result.stats.output_bit
        row.cot_tokens = result.stats.time_steps
        row.peak_activation = result.meter.peak_activation_value
        row.peak_memory = result.meter.peak_retained_tokens

        row.trace_equal = result.trace == log.entries

        decoded = list(walk_checkpoints(artifact, input_bits, pm_limits.max_steps))
        direct = [
            cfg.canonical() for cfg in tm_config_trace(entry.spec, input_bits, tm_limits)
        ]
        row.checkpoints_ok = decoded == direct

        fills = row.P - max(n, 1)
        row.bounds = check_bounds(
            P=row.P, t=row.t, pm_steps=row.pm_steps, cot_tokens=row.cot_tokens,
            fill_tokens=fills, peak_retained=result.meter.peak_retained_tokens,
            peak_activation=row.peak_activation,
        )
        outputs_agree = (
            row.tm_output == row.pm_output == row.tf_output == row.oracle_output
        )
        row.verdict = (
            outputs_agree
            and row.trace_equal
            and row.checkpoints_ok
            and all(row.bounds.values())
        )
    except TapeloopError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        row.verdict = False
    return row


def corpus_inputs(max_len: int):
    for length in range(max_len + 1):
        for value in range(1 << length):
            yield format(value, f"0{length}b") if length else ""


def _diff_task(args) -> DiffRow:
    name, input_bits, measure = args
    return run_differential(CORPUS[name], input_bits, measure_space=measure)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_suite(
    machines=None,
    max_len: int = 10,
    *,
    measure_space: bool = False,
    workers: Optional[int] = None,
) -> DiffReport:
    """Every machine against every input up to max_len, in input order.

    Rows fan out across worker processes when workers > 1; the report
    order is fixed by the task list either way.
    """
    names = list(machines) if machines else list(CORPUS)
    tasks = [
        (name, input_bits, measure_space)
        for name in names
        for input_bits in corpus_inputs(max_len)
    ]
    count = default_workers() if workers is None else max(1, workers)
    if count <= 1 or len(tasks) < 32:
        rows = [_diff_task(task) for task in tasks]
    else:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(count) as pool:
            rows = pool.map(_diff_task, tasks, chunksize=64)
    return DiffReport(rows)


def streaming_memory_probe(window: int, n_tokens: int, input_bits: str = "1") -> dict:
    """Generate a fixed number of tokens from a non-halting pipeline and
    report the retention meter."""
    from .corpus import looper_tm
    from .errors import StepLimitExceeded
    from .tf_runtime import peak_memory

    artifact = compile_tm_to_pm(looper_tm(), space_bound=window - 2)
    weights = compile_pm_to_tf(artifact.pm, window=window)
    try:
        generate(
            weights,
            input_bits,
            ResourceLimits(n_tokens),
            collect_trace=False,
            strict_answer=False,
        )
    except StepLimitExceeded as exc:
        return peak_memory(exc.meter, window)
    raise TapeloopError("the probe machine unexpectedly halted")
