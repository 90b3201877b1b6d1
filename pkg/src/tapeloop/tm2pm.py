"""Compile a Turing machine into a fixed-size-queue machine.

The queue holds the simulated tape cyclically: stored cells c_1..c_K
(K = space bound + 1, one slack cell of headroom) plus one bubble cell
marking the wrap point, for a physical queue of P = K + 1 cells. Every
compiled rule dequeues one cell and enqueues one, so the queue length
never changes.

Two canonical forms alternate during simulation:

  head-at-front   the front cell is the head cell; a Right move is a
                  single dequeue/enqueue
  marked-head     one cell carries a head-here mark; a rotation pass
                  brings it back to the front

A Left move rewrites the head cell at the rear with a "head is my
predecessor" mark, then runs a lag-one rotation: one cell is grabbed
into a state-carried hold register (a fresh bubble takes its slot) and
every following cell is enqueued one slot late. When the marked cell
surfaces, the hold register contains the head's left neighbour, which
is re-enqueued with the head-here mark; the displaced write is released
into the bubble slot right behind it. One such pass plus one find
rotation costs at most 2P + 2 steps per simulated move.

Start-up converts the raw padded queue (input bits plus pad cells) into
the tape representation in P + 1 steps: the bubble and the left
boundary marker are enqueued first, the raw cells follow two slots
late, and the two surplus pad cells at the end are absorbed by the
lag-two hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import cells
from .errors import NotAtCheckpoint, PreconditionError, StepLimitExceeded
from .machines import (
    BLANK,
    PAD,
    START,
    ZERO,
    ONE,
    Delta,
    PmConfig,
    PmSpec,
    TmConfig,
    TmSpec,
    initial_pm_queue,
    validate_tm,
)

HALT_TAG = "!"  # target slot meaning "halting move in progress"

ST_BOOT = "boot"
ST_EMIT = "emit"
ST_DONE = "done"

STEP_BOUND_FACTOR = 4


@dataclass(frozen=True)
class CheckpointMap:
    """Which compiled states admit a tape decoding, and how."""

    tags: dict  # pm state -> (kind, tm state); kind in {init, front, marked}

    def kind_of(self, pm_state: str):
        return self.tags.get(pm_state)


@dataclass(frozen=True)
class CompileArtifact:
    pm: PmSpec
    queue_size: int  # P, physical cells
    map: CheckpointMap
    constants: dict

    @property
    def stored_cells(self) -> int:
        return self.queue_size - 1


def plan_queue_size(spec: TmSpec, input_len: int, space: int) -> int:
    """Physical queue size for a run: declared or measured space plus
    the bubble and slack cells."""
    if space < input_len + 1:
        raise PreconditionError(
            f"space bound {space} below input length {input_len} + 1"
        )
    return space + 2


def compile_tm_to_pm(spec: TmSpec, space_bound: int) -> CompileArtifact:
    """Emit an adapted queue machine simulating ``spec``.

    The rule table itself does not depend on the bound; only the
    physical queue size recorded in the artifact does. Inputs of length
    at most space_bound - 2 fit after padding.
    """
    validate_tm(spec)
    if space_bound < 2:
        raise PreconditionError("space bound must be at least 2")
    queue_size = space_bound + 2

    bases = sorted(spec.alphabet)
    raws = (ZERO, ONE, PAD)
    tm_states = sorted(spec.states - {spec.halt})

    def exec_state(q: str) -> str:
        return f"exec:{q}"

    def seek_state(t: str) -> str:
        return f"seek:{t}"

    # Where execution continues after applying a TM rule.
    def after_right(q2: str) -> str:
        return ST_EMIT if q2 == spec.halt else exec_state(q2)

    def left_target(q2: str) -> str:
        return HALT_TAG if q2 == spec.halt else q2

    left_targets = sorted(
        {
            left_target(nxt)
            for (state, read), (nxt, write, move) in spec.delta.items()
            if move == "L"
        }
    )

    delta: Delta = {}

    def rule(state, read, nxt, write):
        delta[(state, read)] = (nxt, write, "R")

    def map_raw(h: str) -> str:
        return BLANK if h == PAD else h

    # Start-up: enqueue bubble, then the boundary marker, then every raw
    # cell two slots late; pads become blanks. The bubble surfacing
    # again means the ring is complete.
    for h in raws:
        rule(ST_BOOT, h, f"fill1:{h}", cells.BUBBLE_NAME)
    for h1 in raws:
        for h2 in raws:
            rule(f"fill1:{h1}", h2, f"fill2:{h1}:{h2}", START)
            for h3 in raws:
                rule(f"fill2:{h1}:{h2}", h3, f"fill2:{h2}:{h3}", map_raw(h1))
            rule(
                f"fill2:{h1}:{h2}",
                cells.BUBBLE_NAME,
                exec_state(spec.start),
                cells.BUBBLE_NAME,
            )

    def apply_tm_rule(pm_state: str, read_cell: str, q: str, base: str):
        nxt, write, move = spec.delta[(q, base)]
        if move == "R":
            rule(pm_state, read_cell, after_right(nxt), cells.plain(write))
        else:
            rule(pm_state, read_cell, f"grab:{left_target(nxt)}", cells.mark_l(write))

    for q in tm_states:
        st = exec_state(q)
        for base in bases:
            apply_tm_rule(st, cells.plain(base), q, base)

    # Rotation looking for the head-here mark; executes on arrival.
    for t in left_targets:
        st = seek_state(t)
        for base in bases:
            rule(st, cells.plain(base), st, cells.plain(base))
        rule(st, cells.BUBBLE_NAME, st, cells.BUBBLE_NAME)
        for base in bases:
            marked = cells.mark_r(base)
            if t == HALT_TAG:
                if base in (ZERO, ONE):
                    rule(st, marked, ST_DONE, cells.answer(int(base)))
                else:
                    rule(st, marked, ST_DONE, cells.plain(base))
            else:
                apply_tm_rule(st, marked, t, base)

    # Lag-one rotation for a Left move.
    holds = bases + [cells.BUBBLE_NAME]
    for t in left_targets:
        grab = f"grab:{t}"
        rule(grab, cells.BUBBLE_NAME, grab, cells.BUBBLE_NAME)
        for base in bases:
            rule(grab, cells.plain(base), f"shift:{t}:{base}", cells.BUBBLE_NAME)
        for h in holds:
            shift = f"shift:{t}:{h}"
            held_cell = cells.BUBBLE_NAME if h == cells.BUBBLE_NAME else cells.plain(h)
            for base in bases:
                rule(shift, cells.plain(base), f"shift:{t}:{base}", held_cell)
            rule(shift, cells.BUBBLE_NAME, f"shift:{t}:{cells.BUBBLE_NAME}", held_cell)
            if h != cells.BUBBLE_NAME:
                for base in bases:
                    rule(shift, cells.mark_l(base), f"drop:{t}:{base}", cells.mark_r(h))
        for h in bases:
            rule(f"drop:{t}:{h}", cells.BUBBLE_NAME, seek_state(t), cells.plain(h))

    # Final read after a Right-moving halt: the front cell is the answer.
    for base in bases:
        if base in (ZERO, ONE):
            rule(ST_EMIT, cells.plain(base), ST_DONE, cells.answer(int(base)))
        else:
            rule(ST_EMIT, cells.plain(base), ST_DONE, cells.plain(base))

    alphabet = set()
    alphabet.update(cells.plain(b) for b in bases)
    alphabet.add(PAD)
    alphabet.update(cells.mark_l(b) for b in bases)
    alphabet.update(cells.mark_r(b) for b in bases)
    alphabet.add(cells.BUBBLE_NAME)
    alphabet.add(cells.answer(0))
    alphabet.add(cells.answer(1))

    states = {st for (st, _) in delta} | {ST_DONE}
    states.update(nxt for (nxt, _, _) in delta.values())

    # Anything not covered above is unreachable; halt inertly on it so
    # the table is total and a pipeline bug surfaces as a non-answer.
    for st in sorted(states - {ST_DONE}):
        for sym in sorted(alphabet):
            delta.setdefault((st, sym), (ST_DONE, sym, "R"))

    pm = PmSpec(
        alphabet=frozenset(alphabet),
        states=frozenset(states),
        start=ST_BOOT,
        halt=ST_DONE,
        delta=delta,
        adapted=True,
    )

    tags = {ST_BOOT: ("init", spec.start), ST_EMIT: ("front", spec.halt)}
    for q in tm_states:
        tags[exec_state(q)] = ("front", q)
    for t in left_targets:
        tm_q = spec.halt if t == HALT_TAG else t
        tags[seek_state(t)] = ("marked", tm_q)

    constants = {
        "step_bound_factor": STEP_BOUND_FACTOR,
        "steps_per_tm_step_cap": 2 * queue_size + 2,
        "startup_steps": queue_size + 1,
        "state_bits": max(1, math.ceil(math.log2(len(states)))),
    }
    return CompileArtifact(pm, queue_size, CheckpointMap(tags), constants)


def artifact_metadata(artifact: CompileArtifact) -> dict:
    """Sidecar document emitted next to the compiled machine."""
    return {
        "queue_size": artifact.queue_size,
        "checkpoint_states": {
            state: {"form": kind, "tm_state": tm_state}
            for state, (kind, tm_state) in sorted(artifact.map.tags.items())
        },
        "flag_encoding": {
            "plain": "<symbol>",
            "head_left_of_me": "<symbol>&L",
            "head_here": "<symbol>&R",
            "bubble": cells.BUBBLE_NAME,
            "answer": "<bit>&A<bit>",
        },
        "step_bound_factor": artifact.constants["step_bound_factor"],
        "state_bits": artifact.constants["state_bits"],
    }


# ---------------------------------------------------------------------------
# checkpoint decoding
# ---------------------------------------------------------------------------


def _ring_order(queue: tuple[str, ...]):
    """Cells of the stored tape in c_1..c_K order plus the bubble index."""
    wraps = [i for i, name in enumerate(queue) if cells.is_bubble(name)]
    if len(wraps) != 1:
        raise NotAtCheckpoint(f"expected one bubble, found {len(wraps)}")
    p = wraps[0]
    return list(queue[p + 1 :]) + list(queue[:p]), p


def decode_checkpoint(artifact: CompileArtifact, cfg: PmConfig) -> TmConfig:
    """Reconstruct the simulated tape configuration.

    Defined exactly at checkpoint-tagged states; anywhere else the
    queue is mid-rotation and has no consistent tape reading.
    """
    tag = artifact.map.kind_of(cfg.state)
    if tag is None:
        raise NotAtCheckpoint(f"state {cfg.state!r} is not a checkpoint")
    kind, tm_state = tag
    queue = cfg.queue
    if kind == "init":
        bits = []
        for name in queue:
            if name == PAD:
                break
            bits.append(name)
        tape = (START,) + tuple(bits) + (BLANK,) * (
            artifact.stored_cells - 1 - len(bits)
        )
        return TmConfig(tape, 1, tm_state)
    ring, p = _ring_order(queue)
    if kind == "front":
        if not cells.is_plain(queue[0]):
            raise NotAtCheckpoint("front cell is not tape content")
        if any(not cells.is_plain(name) for name in ring):
            raise NotAtCheckpoint("ring contains marked cells")
        head = artifact.stored_cells - p + 1
        return TmConfig(tuple(ring), head, tm_state)
    # marked form: the single head-here cell locates the head
    marked = [
        i for i, name in enumerate(ring) if cells.decode(name).flag == cells.MARK_R
    ]
    if len(marked) != 1:
        raise NotAtCheckpoint(f"expected one head mark, found {len(marked)}")
    tape = tuple(cells.decode(name).base for name in ring)
    return TmConfig(tape, marked[0] + 1, tm_state)


def walk_checkpoints(
    artifact: CompileArtifact,
    input_bits: str,
    max_steps: int,
):
    """Yield the decoded tape configuration at every checkpoint, in order.

    Consecutive rotation steps in the same marked-head state share one
    checkpoint; every visit to a head-at-front state is its own. The
    duplicate reading at start-up (raw queue, then assembled ring) is
    collapsed.
    """
    from collections import deque

    pm = artifact.pm
    queue = deque(initial_pm_queue(pm, input_bits, artifact.queue_size))
    state = pm.start
    tags = artifact.map.tags
    delta = pm.delta
    last = decode_checkpoint(artifact, PmConfig(tuple(queue), state)).canonical()
    yield last
    steps = 0
    while state != pm.halt:
        if steps >= max_steps:
            raise StepLimitExceeded(f"no halt within {max_steps} steps")
        front = queue[0]
        nxt, write, _ = delta[(state, front)]
        queue.popleft()
        queue.append(write)
        steps += 1
        tag = tags.get(nxt)
        if tag is not None:
            kind = tag[0]
            if kind == "front" or (kind == "marked" and nxt != state):
                cfg = decode_checkpoint(artifact, PmConfig(tuple(queue), nxt))
                cano = cfg.canonical()
                if cano != last:
                    yield cano
                    last = cano
        state = nxt
