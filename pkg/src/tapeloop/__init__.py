"""Tape machine -> fixed-queue machine -> exact-integer decoder pipeline."""

from .errors import TapeloopError
from .machines import (
    ExecutionLog,
    PmConfig,
    PmSpec,
    ResourceLimits,
    RunStats,
    TmConfig,
    TmSpec,
    parse_machine,
    pm_run,
    pm_step,
    serialize_machine,
    tm_run,
    tm_step,
)
from .tm2pm import (
    CompileArtifact,
    compile_tm_to_pm,
    decode_checkpoint,
    plan_queue_size,
)
from .tf_compile import (
    TfWeights,
    build_pos,
    compile_pm_to_tf,
    parse_weights,
    serialize_weights,
    synthesize_ff_mlp,
    verify_ff_synthesis,
    verify_paper_literal,
)
from .tf_runtime import attend, decode_step, generate, peak_memory
from .harness import check_bounds, run_differential, run_suite

__version__ = "0.1.0"

__all__ = [
    "TapeloopError",
    "ExecutionLog",
    "PmConfig",
    "PmSpec",
    "ResourceLimits",
    "RunStats",
    "TmConfig",
    "TmSpec",
    "parse_machine",
    "pm_run",
    "pm_step",
    "serialize_machine",
    "tm_run",
    "tm_step",
    "CompileArtifact",
    "compile_tm_to_pm",
    "decode_checkpoint",
    "plan_queue_size",
    "TfWeights",
    "build_pos",
    "compile_pm_to_tf",
    "parse_weights",
    "serialize_weights",
    "synthesize_ff_mlp",
    "verify_ff_synthesis",
    "verify_paper_literal",
    "attend",
    "decode_step",
    "generate",
    "peak_memory",
    "check_bounds",
    "run_differential",
    "run_suite",
]
