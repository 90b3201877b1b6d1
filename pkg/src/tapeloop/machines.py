"""Single-tape Turing machines and queue (Post) machines.

Both machine kinds are plain data plus pure interpreter functions. A
Turing machine tape is bounded on the left by the start marker and
extends rightward with blanks. A queue machine reads the front cell
every step and always writes one cell at the rear; a Right move also
deletes the front cell, a Stay move keeps it (so the queue grows).

The "adapted" queue-machine restriction used by the rest of the
pipeline forbids Stay moves entirely: every step dequeues exactly one
cell and enqueues exactly one, so the queue length never changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from collections import deque
from typing import Callable, Iterator, Optional

from . import cells
from .errors import (
    EmptyQueue,
    HeadUnderflow,
    InputTooLong,
    ParseError,
    PreconditionError,
    SpaceLimitExceeded,
    StepLimitExceeded,
    ValidationError,
)

BLANK = "_"
START = ">"
PAD = "#"
ZERO = "0"
ONE = "1"

TM_MOVES = ("L", "R")
PM_MOVES = ("S", "R")

# '&', ':' and '!' are reserved for compiler-generated names, '@' for the
# slack cell; whitespace and quotes would break the document format.
_NAME_RE = re.compile(r"^[A-Za-z0-9_.>#@&:!-]+$")
_RESERVED_IN_SOURCE = ("&", ":", "!")


Rule = tuple[str, str, str]  # (next state, write symbol, move)
Delta = dict[tuple[str, str], Rule]


@dataclass(frozen=True)
class ResourceLimits:
    """Explicit run budget. Every run operation requires one."""

    max_steps: int
    max_space: Optional[int] = None


@dataclass(frozen=True)
class RunStats:
    time_steps: int
    space_cells: int
    halted: bool
    output_bit: Optional[int]


@dataclass
class ExecutionLog:
    """Sequence of (symbol, state) pairs, one per cell ever enqueued.

    Entry i records the i-th cell added to the queue together with the
    machine state right after adding it. The initial queue contents
    count as entries 1..queue_size, all attributed to the start state.
    """

    entries: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class TmSpec:
    alphabet: frozenset[str]
    states: frozenset[str]
    start: str
    halt: str
    delta: Delta

    def rule(self, state: str, read: str) -> Rule:
        return self.delta[(state, read)]


@dataclass(frozen=True)
class TmConfig:
    tape: tuple[str, ...]
    head: int  # 1-based
    state: str

    def canonical(self) -> "TmConfig":
        """Trim trailing blanks beyond both the head and the content."""
        n = len(self.tape)
        while n > self.head and n > 1 and self.tape[n - 1] == BLANK:
            n -= 1
        return TmConfig(self.tape[:n], self.head, self.state)


@dataclass(frozen=True)
class PmSpec:
    alphabet: frozenset[str]
    states: frozenset[str]
    start: str
    halt: str
    delta: Delta
    adapted: bool = False

    def rule(self, state: str, read: str) -> Rule:
        return self.delta[(state, read)]


@dataclass(frozen=True)
class PmConfig:
    queue: tuple[str, ...]
    state: str
    steps: int = 0


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _check_names(names, what: str) -> None:
    for name in names:
        if not isinstance(name, str) or not _NAME_RE.match(name):
            raise ParseError(f"bad {what} name: {name!r}")


def validate_tm(spec: TmSpec) -> list[str]:
    """Raise ValidationError on structural defects; return warnings."""
    for sym in (START, BLANK, ZERO, ONE):
        if sym not in spec.alphabet:
            raise ValidationError(f"alphabet must contain {sym!r}")
    if PAD in spec.alphabet:
        raise ValidationError(f"{PAD!r} is reserved for queue padding")
    if spec.start not in spec.states or spec.halt not in spec.states:
        raise ValidationError("start and halt must be listed states")
    if spec.start == spec.halt:
        raise ValidationError("start state must differ from halt state")
    for (state, read), (nxt, write, move) in spec.delta.items():
        if state == spec.halt:
            raise ValidationError("no rule may be defined for the halt state")
        if state not in spec.states or nxt not in spec.states:
            raise ValidationError(f"rule ({state},{read}) uses unknown state")
        if read not in spec.alphabet or write not in spec.alphabet:
            raise ValidationError(f"rule ({state},{read}) uses unknown symbol")
        if move not in TM_MOVES:
            raise ValidationError(f"rule ({state},{read}) has bad move {move!r}")
        if read == START and move == "L":
            raise ValidationError(f"rule ({state},{read}) moves Left on {START!r}")
        if read == START and write != START:
            raise ValidationError(
                f"rule ({state},{read}) must preserve the left boundary marker"
            )
    missing = [
        (state, sym)
        for state in sorted(spec.states - {spec.halt})
        for sym in sorted(spec.alphabet)
        if (state, sym) not in spec.delta
    ]
    if missing:
        raise ValidationError(f"delta not total, first missing rule: {missing[0]}")
    warnings = []
    for (state, read), (nxt, write, move) in sorted(spec.delta.items()):
        if write == START and read != START:
            warnings.append(f"rule ({state},{read}) writes {START!r} mid-tape")
    return warnings


def validate_pm(spec: PmSpec) -> list[str]:
    if spec.start not in spec.states or spec.halt not in spec.states:
        raise ValidationError("start and halt must be listed states")
    if spec.start == spec.halt:
        raise ValidationError("start state must differ from halt state")
    if PAD not in spec.alphabet:
        raise ValidationError(f"queue machine alphabet must contain {PAD!r}")
    for (state, read), (nxt, write, move) in spec.delta.items():
        if state == spec.halt:
            raise ValidationError("no rule may be defined for the halt state")
        if state not in spec.states or nxt not in spec.states:
            raise ValidationError(f"rule ({state},{read}) uses unknown state")
        if read not in spec.alphabet or write not in spec.alphabet:
            raise ValidationError(f"rule ({state},{read}) uses unknown symbol")
        if move not in PM_MOVES:
            raise ValidationError(f"rule ({state},{read}) has bad move {move!r}")
        if spec.adapted:
            if move != "R":
                raise ValidationError("adapted machine has a Stay rule")
            if nxt == spec.start:
                raise ValidationError("adapted machine re-enters its start state")
    missing = [
        (state, sym)
        for state in sorted(spec.states - {spec.halt})
        for sym in sorted(spec.alphabet)
        if (state, sym) not in spec.delta
    ]
    if missing:
        raise ValidationError(f"delta not total, first missing rule: {missing[0]}")
    return []


# ---------------------------------------------------------------------------
# Turing machine interpreter
# ---------------------------------------------------------------------------


def initial_tm_config(spec: TmSpec, input_bits: str) -> TmConfig:
    _require_bits(input_bits)
    return TmConfig((START,) + tuple(input_bits), 1, spec.start)


def _require_bits(s: str) -> None:
    if any(ch not in (ZERO, ONE) for ch in s):
        raise PreconditionError(f"input must be a bit string, got {s!r}")


def tm_step(spec: TmSpec, cfg: TmConfig) -> TmConfig:
    if cfg.state == spec.halt:
        raise PreconditionError("cannot step a halted machine")
    tape = list(cfg.tape)
    while len(tape) < cfg.head:
        tape.append(BLANK)
    read = tape[cfg.head - 1]
    nxt, write, move = spec.rule(cfg.state, read)
    tape[cfg.head - 1] = write
    head = cfg.head + (1 if move == "R" else -1)
    if head < 1:
        raise HeadUnderflow("head moved past the left boundary")
    if head > len(tape):
        tape.append(BLANK)
    return TmConfig(tuple(tape), head, nxt)


def tm_config_trace(
    spec: TmSpec, input_bits: str, limits: ResourceLimits
) -> Iterator[TmConfig]:
    """Yield the configuration sequence, including the initial one."""
    cfg = initial_tm_config(spec, input_bits)
    yield cfg
    steps = 0
    while cfg.state != spec.halt:
        if steps >= limits.max_steps:
            raise StepLimitExceeded(f"no halt within {limits.max_steps} steps")
        cfg = tm_step(spec, cfg)
        if limits.max_space is not None and cfg.head > limits.max_space:
            raise SpaceLimitExceeded(f"head reached cell {cfg.head}")
        steps += 1
        yield cfg


def tm_run(
    spec: TmSpec,
    input_bits: str,
    limits: ResourceLimits,
    trace_sink: Optional[Callable[[dict], None]] = None,
) -> tuple[RunStats, TmConfig]:
    """Run to halt. Output is the symbol under the head at halt (0/1),
    None when the machine halts reading anything else."""
    _require_bits(input_bits)
    tape = [START] + list(input_bits)
    head = 1
    state = spec.start
    space = len(tape)  # start marker plus input
    steps = 0
    delta = spec.delta
    halt = spec.halt
    max_steps = limits.max_steps
    max_space = limits.max_space
    while state != halt:
        if steps >= max_steps:
            raise StepLimitExceeded(f"no halt within {max_steps} steps")
        read = tape[head - 1]
        nxt, write, move = delta[(state, read)]
        tape[head - 1] = write
        if move == "R":
            head += 1
            if head > len(tape):
                tape.append(BLANK)
        else:
            head -= 1
            if head < 1:
                raise HeadUnderflow("head moved past the left boundary")
        if head > space:
            space = head
            if max_space is not None and space > max_space:
                raise SpaceLimitExceeded(f"run touched cell {space}")
        steps += 1
        if trace_sink is not None:
            trace_sink(
                {
                    "i": steps,
                    "state": nxt,
                    "read": read,
                    "write": write,
                    "move": move,
                    "head": head,
                }
            )
        state = nxt
    under_head = tape[head - 1] if head <= len(tape) else BLANK
    out = int(under_head) if under_head in (ZERO, ONE) else None
    stats = RunStats(steps, space, True, out)
    return stats, TmConfig(tuple(tape), head, state)


# ---------------------------------------------------------------------------
# queue machine interpreter
# ---------------------------------------------------------------------------


def initial_pm_queue(spec: PmSpec, input_bits: str, queue_size: int) -> list[str]:
    _require_bits(input_bits)
    if len(input_bits) > queue_size:
        raise InputTooLong(f"|input|={len(input_bits)} exceeds queue size {queue_size}")
    return list(input_bits) + [PAD] * (queue_size - len(input_bits))


def pm_step(spec: PmSpec, cfg: PmConfig) -> PmConfig:
    if cfg.state == spec.halt:
        raise PreconditionError("cannot step a halted machine")
    if not cfg.queue:
        raise EmptyQueue("queue machine stepped on an empty queue")
    front = cfg.queue[0]
    nxt, write, move = spec.rule(cfg.state, front)
    if move == "R":
        queue = cfg.queue[1:] + (write,)
    else:
        queue = cfg.queue + (write,)
    return PmConfig(queue, nxt, cfg.steps + 1)


def pm_run(
    spec: PmSpec,
    input_bits: str,
    queue_size: int,
    limits: ResourceLimits,
    trace_sink: Optional[Callable[[dict], None]] = None,
) -> tuple[RunStats, ExecutionLog]:
    """Run to halt from the padded initial queue.

    The log starts with one entry per initial cell (all attributed to
    the start state) and gains one entry per step, mirroring pm_step.
    """
    queue = deque(initial_pm_queue(spec, input_bits, queue_size))
    log = ExecutionLog([(sym, spec.start) for sym in queue])
    state = spec.start
    steps = 0
    space = len(queue)
    delta = spec.delta
    halt = spec.halt
    adapted = spec.adapted
    max_steps = limits.max_steps
    append_entry = log.entries.append
    while state != halt:
        if steps >= max_steps:
            raise StepLimitExceeded(f"no halt within {max_steps} steps")
        if not queue:
            raise EmptyQueue("queue machine ran out of cells")
        front = queue[0]
        nxt, write, move = delta[(state, front)]
        if move == "R":
            queue.popleft()
        queue.append(write)
        if len(queue) > space:
            space = len(queue)
        steps += 1
        append_entry((write, nxt))
        if trace_sink is not None:
            trace_sink(
                {
                    "i": steps,
                    "state": nxt,
                    "read": front,
                    "write": write,
                    "move": move,
                    "queue_front": queue[0] if queue else None,
                }
            )
        state = nxt
    if adapted and len(queue) != queue_size:
        raise ValidationError("adapted machine changed its queue length")
    out = cells.answer_bit(log.entries[-1][0]) if log.entries else None
    stats = RunStats(steps, space, True, out)
    return stats, log


def pm_config_trace(
    spec: PmSpec, input_bits: str, queue_size: int, limits: ResourceLimits
) -> Iterator[PmConfig]:
    """Yield the configuration sequence, including the initial one."""
    cfg = PmConfig(tuple(initial_pm_queue(spec, input_bits, queue_size)), spec.start, 0)
    yield cfg
    while cfg.state != spec.halt:
        if cfg.steps >= limits.max_steps:
            raise StepLimitExceeded(f"no halt within {limits.max_steps} steps")
        cfg = pm_step(spec, cfg)
        yield cfg


def check_log_recurrence(spec: PmSpec, log: ExecutionLog, queue_size: int) -> None:
    """Verify the defining identity of an adapted-machine log.

    For every index i >= queue_size with a non-halt state, the next
    entry must equal delta applied to (entry i-queue_size+1's symbol,
    entry i's state). Raises ValidationError on the first violation.
    """
    entries = log.entries
    s = queue_size
    for i in range(s, len(entries)):
        sym_old, _ = entries[i - s]
        _, state = entries[i - 1]
        if state == spec.halt:
            break
        expect_nxt, expect_write, _ = spec.rule(state, sym_old)
        got_sym, got_state = entries[i]
        if (got_sym, got_state) != (expect_write, expect_nxt):
            raise ValidationError(
                f"log entry {i + 1} is {(got_sym, got_state)}, "
                f"expected {(expect_write, expect_nxt)}"
            )


# ---------------------------------------------------------------------------
# machine document format
# ---------------------------------------------------------------------------


def parse_machine(text: str):
    """Parse a machine document into a TmSpec or PmSpec.

    The document is JSON with fields kind ("tm"|"pm"), alphabet,
    states, start, halt, rules (list of {state, read, next, write,
    move}) and, for queue machines, an optional adapted flag. Symbol
    names "_", ">" and "#" denote blank, start marker and pad.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    kind = doc.get("kind")
    if kind not in ("tm", "pm"):
        raise ParseError(f"kind must be 'tm' or 'pm', got {kind!r}")
    for key in ("alphabet", "states", "start", "halt", "rules"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    alphabet = doc["alphabet"]
    states = doc["states"]
    if not isinstance(alphabet, list) or not isinstance(states, list):
        raise ParseError("alphabet and states must be arrays")
    _check_names(alphabet, "symbol")
    _check_names(states, "state")
    if kind == "tm":
        for name in alphabet + states:
            if any(ch in name for ch in _RESERVED_IN_SOURCE):
                raise ParseError(f"name {name!r} uses a reserved character")
    if len(set(alphabet)) != len(alphabet) or len(set(states)) != len(states):
        raise ParseError("duplicate alphabet or state names")
    rules = doc["rules"]
    if not isinstance(rules, list):
        raise ParseError("rules must be an array")
    delta: Delta = {}
    for rule in rules:
        if not isinstance(rule, dict):
            raise ParseError("each rule must be an object")
        try:
            key = (rule["state"], rule["read"])
            val = (rule["next"], rule["write"], rule["move"])
        except KeyError as exc:
            raise ParseError(f"rule missing field {exc}") from None
        if key in delta:
            raise ParseError(f"duplicate rule for {key}")
        delta[key] = val
    if kind == "tm":
        spec = TmSpec(
            frozenset(alphabet), frozenset(states), doc["start"], doc["halt"], delta
        )
        validate_tm(spec)
        return spec
    spec = PmSpec(
        frozenset(alphabet),
        frozenset(states),
        doc["start"],
        doc["halt"],
        delta,
        bool(doc.get("adapted", False)),
    )
    validate_pm(spec)
    return spec


def machine_document(spec) -> dict:
    kind = "tm" if isinstance(spec, TmSpec) else "pm"
    doc = {
        "kind": kind,
        "alphabet": sorted(spec.alphabet),
        "states": sorted(spec.states),
        "start": spec.start,
        "halt": spec.halt,
        "rules": [
            {"state": state, "read": read, "next": nxt, "write": write, "move": move}
            for (state, read), (nxt, write, move) in sorted(spec.delta.items())
        ],
    }
    if kind == "pm":
        doc["adapted"] = spec.adapted
    return doc


def serialize_machine(spec) -> str:
    """Canonical single-line JSON form; stable across parse round trips."""
    return json.dumps(machine_document(spec), sort_keys=True, separators=(",", ":")) + "\n"
