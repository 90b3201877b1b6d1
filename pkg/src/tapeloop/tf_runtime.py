"""Decoder execution over exact integers with a sliding context window.

Vectors are sparse {coordinate: value} dicts and matrices sparse
{(row, col): value} dicts; nothing in the decode path touches floating
point. Attention weights are exact rationals, which collapse to a
single weight of 1 in compiled runs because the flag encoding makes the
maximum score unique.

Embedding rows are cached per token id; the two nonzero relative
positions (offset 0 and offset window-1) are injected at attend time.
This is equivalent to recomputing embedding plus position from scratch
for every slot, and the generation loop additionally specializes the
score pattern (1 on the newest slot, 2 on the oldest slot of a full
window, 0 elsewhere), which holds because embeddings never write the
flag coordinate. Both shortcuts are asserted against the generic path
by dual evaluation in the test suite.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import cells
from .errors import (
    AmbiguousArgmax,
    FlagOutOfRange,
    InputTooLong,
    NoAnswerSymbol,
    PreconditionError,
    StepLimitExceeded,
    ValidationError,
)
from .machines import RunStats
from .tf_compile import Sparse, TfWeights, build_pos, check_weight_invariants


def vec_add(a: Sparse, b: Sparse) -> Sparse:
    out = dict(a)
    for coord, val in b.items():
        new = out.get(coord, 0) + val
        if new:
            out[coord] = new
        else:
            out.pop(coord, None)
    return out


def mat_columns(mat: Sparse) -> dict:
    """Column-major view {col: ((row, val), ...)} for sparse matvec."""
    cols: dict = {}
    for (r, c), v in mat.items():
        cols.setdefault(c, []).append((r, v))
    return {c: tuple(entries) for c, entries in cols.items()}


def mat_vec(cols: dict, vec: Sparse) -> Sparse:
    out: Sparse = {}
    for coord, x in vec.items():
        for r, v in cols.get(coord, ()):
            new = out.get(r, 0) + v * x
            if new:
                out[r] = new
            else:
                out.pop(r, None)
    return out


def sparse_dot(a: Sparse, b: Sparse) -> int:
    if len(b) < len(a):
        a, b = b, a
    return sum(val * b.get(coord, 0) for coord, val in a.items())


def hardmax(scores):
    """Weights 1/t on each of the t maximal entries, exact rationals."""
    top = max(scores)
    hits = [j for j, s in enumerate(scores) if s == top]
    weight = 1 if len(hits) == 1 else Fraction(1, len(hits))
    return [weight if s == top else 0 for s in scores], len(hits)


@dataclass(frozen=True)
class AttentionResult:
    scores: tuple
    weights: tuple
    output: Sparse
    max_count: int


@dataclass(frozen=True)
class ActivationFrame:
    position: int
    scores: tuple
    attended_offset: int
    max_count: int
    a: Sparse
    h05: Sparse
    flag: int
    out_token: int


@dataclass
class MemoryMeter:
    """Peak retention measured over one generation run."""

    peak_retained_tokens: int = 0
    peak_activation_value: int = 0
    peak_frame_cells: int = 0
    total_generated: int = 0


class _Cache:
    """Per-weights lookup tables for the decode loop."""

    def __init__(self, w: TfWeights):
        check_weight_invariants(w)
        self.k_cols = mat_columns(w.k_mat)
        self.q_cols = mat_columns(w.q_mat)
        self.v_cols = mat_columns(w.v_mat)
        self.w_cols = mat_columns(w.w_mat)
        self.n_states = len(w.vocab.states)
        self.halt_index = w.vocab.states.index(w.halt_state)
        lo = w.layout
        # V applied to an embedding row: the symbol one-hot lands in the
        # scratch block, nothing else survives (emb has no flag entry).
        self.v_emb = tuple(mat_vec(self.v_cols, row) for row in w.emb)
        self.emb_nnz = tuple(len(row) for row in w.emb)
        self.b2, self.b3, self.b4 = lo.b2, lo.b3, lo.b4
        self.b5 = lo.b5
        self.c = lo.c
        self.m = lo.m


@dataclass
class GenState:
    window: deque  # token ids, most recent at the right
    position: int = 0
    halted: bool = False
    cache: Optional[_Cache] = field(default=None, repr=False, compare=False)


def new_gen_state(w: TfWeights) -> GenState:
    return GenState(window=deque(maxlen=w.window), cache=_Cache(w))


def h0_rows(w: TfWeights, window_ids) -> list[Sparse]:
    """Embedding plus relative position for every slot, oldest first."""
    rows = []
    count = len(window_ids)
    for j, tid in enumerate(window_ids):
        offset = count - 1 - j
        pos = build_pos(offset, w.layout, w.window)
        row = w.emb[tid]
        rows.append(vec_add(row, pos) if pos else row)
    return rows


def attend(slots: list[Sparse], w: TfWeights, cache: Optional[_Cache] = None):
    """Hardmax attention over h0 rows (oldest first, last = current).

    Scores follow the stored matrices: the query taken from each
    attended slot, the key from the current one.
    """
    if not slots:
        raise PreconditionError("attention needs at least one slot")
    cache = cache or _Cache(w)
    key = mat_vec(cache.k_cols, slots[-1])
    scores = [sparse_dot(mat_vec(cache.q_cols, slot), key) for slot in slots]
    weights, max_count = hardmax(scores)
    output: Sparse = {}
    for j, wt in enumerate(weights):
        if not wt:
            continue
        for coord, val in mat_vec(cache.v_cols, slots[j]).items():
            new = output.get(coord, 0) + wt * val
            if new:
                output[coord] = new
            else:
                output.pop(coord, None)
    return AttentionResult(tuple(scores), tuple(weights), output, max_count)


def _check_bounded(vec: Sparse, what: str) -> None:
    for val in vec.values():
        if not isinstance(val, int) or val < 0 or val > 3:
            raise ValidationError(f"{what} coordinate {val!r} outside 0..3")


def ff_branch(w: TfWeights, h05: Sparse) -> int:
    """Select and apply the feed-forward branch for one residual vector.

    The flag coordinate must hold 2 (window still filling: emit the pad
    token) or 3 (full window: apply the transition to the attended
    symbol and the state bits); anything else is a pipeline bug.
    """
    lo = w.layout
    b2, b3, b4 = lo.b2, lo.b3, lo.b4
    flag = h05.get(b4, 0)
    if flag not in (2, 3):
        raise FlagOutOfRange(f"flag value {flag} at a generation position")
    if flag == 2:
        return w.ff.fill_target
    qi = 0
    si = -1
    for coord, val in h05.items():
        if b2 <= coord < b3:
            if val not in (0, 1):
                raise FlagOutOfRange(f"state bit {val} outside 0/1")
            qi |= val << (coord - b2)
        elif b3 <= coord < b4 and val:
            if si >= 0 or val != 1:
                raise FlagOutOfRange("attended symbol block not one-hot")
            si = coord - b3
    if si < 0:
        raise FlagOutOfRange("attended symbol block empty")
    try:
        return w.ff.table[(si, qi)]
    except KeyError:
        raise FlagOutOfRange(f"no transition for symbol {si}, state {qi}") from None


def argmax_token(logits: Sparse) -> int:
    """Unique argmax over the full logit block, zeros included."""
    if not logits:
        raise AmbiguousArgmax("all logits are zero")
    top = max(logits.values())
    if top <= 0:
        raise AmbiguousArgmax("maximum logit is not positive")
    hits = [tok for tok, val in logits.items() if val == top]
    if len(hits) != 1:
        raise AmbiguousArgmax(f"{len(hits)} tokens tie at logit {top}")
    return hits[0]


def decode_step(w: TfWeights, gen: GenState, use_mlp: bool = False):
    """One generation step: (next token id, activation frame).

    Runs the full attention computation over materialized h0 rows; the
    generation loop uses an equivalent specialized path.
    """
    if gen.halted:
        raise PreconditionError("generation already halted")
    if not gen.window:
        raise PreconditionError("window is empty")
    cache = gen.cache
    if cache is None:
        cache = gen.cache = _Cache(w)

    window_ids = list(gen.window)
    slots = h0_rows(w, window_ids)
    att = attend(slots, w, cache)
    if att.max_count != 1:
        raise AmbiguousArgmax(f"attention tie over {att.max_count} slots")
    attended = att.weights.index(1)

    h05 = vec_add(mat_vec(cache.w_cols, att.output), slots[-1])
    for coord, val in w.bias.items():
        h05[coord] = h05.get(coord, 0) + val

    _check_bounded(att.output, "attention output")
    _check_bounded(h05, "post-attention residual")

    flag = h05.get(cache.b4, 0)
    if use_mlp:
        if flag not in (2, 3):
            raise FlagOutOfRange(f"flag value {flag} at a generation position")
        if w.mlp is None:
            raise PreconditionError("weights carry no synthesized network")
        out_token = argmax_token(w.mlp.apply(h05))
    else:
        out_token = ff_branch(w, h05)

    frame = ActivationFrame(
        position=gen.position + 1,
        scores=att.scores,
        attended_offset=len(window_ids) - 1 - attended,
        max_count=att.max_count,
        a=att.output,
        h05=h05,
        flag=flag,
        out_token=out_token,
    )
    return out_token, frame


@dataclass
class GenerateResult:
    trace: Optional[list]  # (symbol, state) pairs, inputs included
    meter: MemoryMeter
    stats: RunStats


def generate(
    w: TfWeights,
    input_bits: str,
    limits,
    *,
    collect_trace: bool = True,
    trace_sink: Optional[Callable[[dict], None]] = None,
    strict_answer: bool = True,
    use_mlp: bool = False,
) -> GenerateResult:
    """Feed the input tokens, then decode until a halt-state token.

    An empty input is seeded with a single pad token so the first
    attention step has a slot to read. The trace lists every token in
    context order and matches the queue machine's log entry for entry.
    """
    vocab = w.vocab
    if len(input_bits) > w.window:
        raise InputTooLong(f"|input|={len(input_bits)} exceeds window {w.window}")
    prompt = [(sym, w.start_state) for sym in input_bits] or [
        (w.pad_symbol, w.start_state)
    ]

    gen = new_gen_state(w)
    cache = gen.cache
    trace = [] if collect_trace else None
    for tok in prompt:
        gen.window.append(vocab.token_id(*tok))
        gen.position += 1
        if trace is not None:
            trace.append(tok)

    meter = MemoryMeter(peak_retained_tokens=len(gen.window))
    window = gen.window
    size = w.window
    n_states = cache.n_states
    halt_index = cache.halt_index
    table = w.ff.table
    fill_target = w.ff.fill_target
    emb_nnz = cache.emb_nnz
    max_steps = limits.max_steps
    position = gen.position
    generated = 0
    peak_flag = 0
    peak_cells = 0
    slow = use_mlp or trace_sink is not None

    while True:
        if generated >= max_steps:
            meter.total_generated = generated
            gen.position = position
            raise StepLimitExceeded(
                f"no halt within {max_steps} generated tokens",
                meter=meter,
                stats=RunStats(generated, size, False, None),
            )
        if slow:
            gen.position = position
            tid, frame = decode_step(w, gen, use_mlp=use_mlp)
            flag = frame.flag
            cells_used = len(frame.a) + len(frame.h05) + len(frame.scores)
            attended_offset = frame.attended_offset
        else:
            # Specialized decode: same arithmetic as decode_step with the
            # score pattern and sparse value rows folded in.
            count = len(window)
            cur_tid = window[-1]
            if count == size:
                att_tid = window[0]
                flag = 3
                attended_offset = count - 1
            else:
                att_tid = cur_tid
                flag = 2
                attended_offset = 0
            if flag == 2:
                tid = fill_target
            else:
                key = (att_tid // n_states, cur_tid % n_states)
                try:
                    tid = table[key]
                except KeyError:
                    raise FlagOutOfRange(
                        f"no transition for symbol {key[0]}, state {key[1]}"
                    ) from None
            cells_used = emb_nnz[cur_tid] + 4 + count
        window.append(tid)
        position += 1
        generated += 1
        if flag > peak_flag:
            peak_flag = flag
        if cells_used > peak_cells:
            peak_cells = cells_used
        if len(window) > meter.peak_retained_tokens:
            meter.peak_retained_tokens = len(window)
        sym, state = vocab.token(tid)
        if trace is not None:
            trace.append((sym, state))
        if trace_sink is not None:
            trace_sink(
                {
                    "i": position,
                    "symbol": sym,
                    "state": state,
                    "flag_value": flag,
                    "attended_offset": attended_offset,
                }
            )
        if tid % n_states == halt_index:
            gen.halted = True
            break
    gen.position = position
    meter.total_generated = generated
    meter.peak_activation_value = peak_flag
    meter.peak_frame_cells = peak_cells
    answer = cells.answer_bit(sym)
    if answer is None and strict_answer:
        raise NoAnswerSymbol(f"halting token carries no answer: {sym!r}")
    stats = RunStats(generated, size, True, answer)
    return GenerateResult(trace, meter, stats)


def peak_memory(meter: MemoryMeter, window: int) -> dict:
    """Report the run's retention peaks; retention must not scale with
    the number of generated tokens."""
    if meter.peak_retained_tokens > window:
        raise ValidationError(
            f"retained {meter.peak_retained_tokens} tokens with window {window}"
        )
    return {
        "peak_retained_tokens": meter.peak_retained_tokens,
        "peak_retained_bytes_estimate": meter.peak_retained_tokens * 8,
        "peak_frame_cells": meter.peak_frame_cells,
        "peak_frame_bytes_estimate": meter.peak_frame_cells * 8,
        "peak_activation_value": meter.peak_activation_value,
        "total_generated": meter.total_generated,
    }
