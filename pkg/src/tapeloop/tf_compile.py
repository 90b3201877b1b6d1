"""Emit exact-integer decoder weights for an adapted queue machine.

The token vocabulary is the product of queue symbols and machine
states. Embedding width is d = 2 + 2m + c + |V|, split into blocks:

  B0  constant-one coordinate
  B1  symbol one-hot (m coordinates)
  B2  state bits (c coordinates)
  B3  attended-symbol scratch (m coordinates)
  B4  flag accumulator (1 coordinate)
  B5  next-token logits (|V| coordinates)

The single attention head scores each window slot by its B4 flag, which
is zero except at relative offsets 0 (value 1) and S-1 (value 2), so a
full window attends to its oldest slot and a filling window to its
newest. The value matrix copies B1 into B3 and B4 into B4; the
feed-forward stage reads the flag (2 while filling, 3 when full) and
writes a one-hot next token into B5, either the fixed pad token or the
transition applied to (attended symbol, current state).

When m = 3 the blocks B0..B4 occupy the classic c+8 coordinates and
can be checked entry-for-entry by verify_paper_literal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    NotAdapted,
    OffsetOutOfWindow,
    ParseError,
    PreconditionError,
    SynthesisOverflow,
    ValidationError,
)
from .machines import PAD, PmSpec, validate_pm

Sparse = dict  # {coordinate: int} and {(row, col): int}


def order_symbols(alphabet) -> tuple[str, ...]:
    """Deterministic symbol order: input bits first, pad last."""
    bits = [b for b in ("0", "1") if b in alphabet]
    rest = sorted(s for s in alphabet if s not in ("0", "1", PAD))
    pad = [PAD] if PAD in alphabet else []
    return tuple(bits + rest + pad)


def order_states(states, start: str) -> tuple[str, ...]:
    return (start,) + tuple(sorted(set(states) - {start}))


@dataclass(frozen=True)
class TokenVocab:
    symbols: tuple[str, ...]
    states: tuple[str, ...]
    c: int  # state-bit width

    def __post_init__(self):
        object.__setattr__(
            self,
            "_index",
            {
                (s, q): si * len(self.states) + qi
                for si, s in enumerate(self.symbols)
                for qi, q in enumerate(self.states)
            },
        )

    def __len__(self) -> int:
        return len(self.symbols) * len(self.states)

    def token_id(self, symbol: str, state: str) -> int:
        return self._index[(symbol, state)]

    def token(self, token_id: int) -> tuple[str, str]:
        si, qi = divmod(token_id, len(self.states))
        return self.symbols[si], self.states[qi]

    def state_bits(self, state_index: int) -> tuple[int, ...]:
        return tuple((state_index >> k) & 1 for k in range(self.c))


@dataclass(frozen=True)
class LayoutPlan:
    m: int
    c: int
    vocab_size: int

    @property
    def b0(self) -> int:
        return 0

    @property
    def b1(self) -> int:
        return 1

    @property
    def b2(self) -> int:
        return 1 + self.m

    @property
    def b3(self) -> int:
        return 1 + self.m + self.c

    @property
    def b4(self) -> int:
        return 1 + 2 * self.m + self.c

    @property
    def b5(self) -> int:
        return 2 + 2 * self.m + self.c

    @property
    def d(self) -> int:
        return self.b5 + self.vocab_size


@dataclass(frozen=True)
class FfDispatch:
    """Semantic ground truth of the feed-forward stage."""

    fill_target: int  # token id emitted while the window is filling
    table: dict  # (symbol index, state index) -> token id


@dataclass(frozen=True)
class FfMlp:
    """ReLU network realizing the dispatch by pattern-detector units.

    Each hidden unit is relu(sum(weights * h) + bias) and fires with
    value exactly 1 on its pattern; its single output connection writes
    the corresponding logit.
    """

    biases: tuple[int, ...]
    weights: tuple[Sparse, ...]  # per unit, {input coordinate: weight}
    out_tokens: tuple[int, ...]  # per unit, logit index written with weight 1

    def __len__(self) -> int:
        return len(self.biases)

    def apply(self, h: Sparse) -> Sparse:
        logits: Sparse = {}
        for bias, wts, tok in zip(self.biases, self.weights, self.out_tokens):
            acc = bias
            for coord, wt in wts.items():
                v = h.get(coord)
                if v:
                    acc += wt * v
            if acc > 0:
                logits[tok] = logits.get(tok, 0) + acc
        return logits


@dataclass(frozen=True)
class TfWeights:
    layout: LayoutPlan
    vocab: TokenVocab
    emb: tuple[Sparse, ...]  # per token id, {coordinate: value}
    window: int  # the only size-dependent parameter
    k_mat: Sparse
    q_mat: Sparse
    v_mat: Sparse
    w_mat: Sparse
    bias: Sparse
    ff: FfDispatch
    mlp: Optional[FfMlp]
    pad_symbol: str
    start_state: str
    halt_state: str

    def with_window(self, window: int) -> "TfWeights":
        if window < 2:
            raise PreconditionError("window must be at least 2")
        return replace(self, window=window)


def build_pos(offset: int, layout: LayoutPlan, window: int) -> Sparse:
    """Relative positional encoding for a slot ``offset`` tokens back."""
    if offset < 0 or offset >= window:
        raise OffsetOutOfWindow(f"offset {offset} outside window {window}")
    if offset == 0:
        return {layout.b4: 1}
    if offset == window - 1:
        return {layout.b4: 2}
    return {}


def compile_pm_to_tf(pm: PmSpec, window: int) -> TfWeights:
    """Weights simulating ``pm`` with a length-``window`` context.

    Everything except the stored window size is independent of
    ``window``; recompiling at another size changes one integer.
    """
    if not pm.adapted:
        raise NotAdapted("only strict dequeue-1/enqueue-1 machines compile")
    validate_pm(pm)
    if window < 2:
        raise PreconditionError("window must be at least 2")

    symbols = order_symbols(pm.alphabet)
    states = order_states(pm.states, pm.start)
    c = max(1, math.ceil(math.log2(len(states))))
    vocab = TokenVocab(symbols, states, c)
    layout = LayoutPlan(len(symbols), c, len(vocab))

    emb = []
    for tid in range(len(vocab)):
        sym, state = vocab.token(tid)
        si = symbols.index(sym)
        qi = states.index(state)
        row: Sparse = {layout.b0: 1, layout.b1 + si: 1}
        for k, bit in enumerate(vocab.state_bits(qi)):
            if bit:
                row[layout.b2 + k] = 1
        emb.append(row)

    k_mat: Sparse = {(layout.b4, layout.b0): 1}
    q_mat: Sparse = {(layout.b4, layout.b4): 1}
    v_mat: Sparse = {(layout.b3 + k, layout.b1 + k): 1 for k in range(layout.m)}
    v_mat[(layout.b4, layout.b4)] = 1
    w_mat: Sparse = {(i, i): 1 for i in range(layout.d)}

    halt_index = states.index(pm.halt)
    table = {}
    for si, sym in enumerate(symbols):
        for qi, state in enumerate(states):
            if qi == halt_index:
                continue
            nxt, write, _ = pm.rule(state, sym)
            table[(si, qi)] = vocab.token_id(write, nxt)
    ff = FfDispatch(fill_target=vocab.token_id(PAD, pm.start), table=table)

    return TfWeights(
        layout=layout,
        vocab=vocab,
        emb=tuple(emb),
        window=window,
        k_mat=k_mat,
        q_mat=q_mat,
        v_mat=v_mat,
        w_mat=w_mat,
        bias={},
        ff=ff,
        mlp=None,
        pad_symbol=PAD,
        start_state=pm.start,
        halt_state=pm.halt,
    )


def check_weight_invariants(w: TfWeights) -> None:
    """Structural checks every compiled artifact must satisfy."""
    lo = w.layout
    for tid, row in enumerate(w.emb):
        if row.get(lo.b0) != 1:
            raise ValidationError(f"token {tid}: constant coordinate missing")
        ones = [k for k in range(lo.m) if row.get(lo.b1 + k)]
        if len(ones) != 1:
            raise ValidationError(f"token {tid}: symbol block not one-hot")
        for coord, val in row.items():
            if val not in (0, 1):
                raise ValidationError(f"token {tid}: entry {val} outside 0/1")
            if coord >= lo.b3:
                raise ValidationError(f"token {tid}: write into scratch block")
    if w.k_mat != {(lo.b4, lo.b0): 1}:
        raise ValidationError("key matrix misshapen")
    if w.q_mat != {(lo.b4, lo.b4): 1}:
        raise ValidationError("query matrix misshapen")
    expect_v = {(lo.b3 + k, lo.b1 + k): 1 for k in range(lo.m)}
    expect_v[(lo.b4, lo.b4)] = 1
    if w.v_mat != expect_v:
        raise ValidationError("value matrix misshapen")
    if w.w_mat != {(i, i): 1 for i in range(lo.d)}:
        raise ValidationError("projection matrix is not the identity")
    if w.bias:
        raise ValidationError("bias must be zero")
    halt_index = w.vocab.states.index(w.halt_state)
    for si in range(lo.m):
        for qi in range(len(w.vocab.states)):
            if qi != halt_index and (si, qi) not in w.ff.table:
                raise ValidationError(f"dispatch missing ({si},{qi})")


# ---------------------------------------------------------------------------
# feed-forward synthesis
# ---------------------------------------------------------------------------


def synthesize_ff_mlp(
    ff: FfDispatch, layout: LayoutPlan, hidden_cap: int = 500_000
) -> FfMlp:
    """One detector unit per dispatch row plus one fill detector.

    The fill unit relu(3 - B4) is 1 exactly when the flag is 2. Each
    transition unit sums (B4 - 2), the attended-symbol coordinate and
    an exact match over the state bits, then thresholds at full score.
    """
    c = layout.c
    n_units = 1 + len(ff.table)
    if n_units > hidden_cap:
        raise SynthesisOverflow(f"{n_units} hidden units exceed cap {hidden_cap}")
    biases = [3]
    weights: list[Sparse] = [{layout.b4: -1}]
    out_tokens = [ff.fill_target]
    for (si, qi), target in sorted(ff.table.items()):
        wts: Sparse = {layout.b4: 1, layout.b3 + si: 1}
        unset = 0
        for k in range(c):
            if (qi >> k) & 1:
                wts[layout.b2 + k] = 1
            else:
                wts[layout.b2 + k] = -1
                unset += 1
        biases.append(unset - c - 3)
        weights.append(wts)
        out_tokens.append(target)
    return FfMlp(tuple(biases), tuple(weights), tuple(out_tokens))


def verify_ff_synthesis(w: TfWeights, mlp: FfMlp, chunk: int = 512):
    """Exhaustively compare the network with the dispatch table.

    Enumerates every reachable pre-activation pattern: both flag values
    crossed with every symbol one-hot and every non-halt state bit
    pattern. Returns (rows checked, list of mismatch descriptions).
    """
    lo = w.layout
    lo_base = lo.b2
    width = lo.b4 - lo.b2 + 1  # state bits, attended one-hot, flag
    for wts in mlp.weights:
        for coord in wts:
            if coord < lo.b2 or coord > lo.b4:
                raise ValidationError("unit reads outside the dispatch blocks")

    halt_index = w.vocab.states.index(w.halt_state)
    state_ids = [qi for qi in range(len(w.vocab.states)) if qi != halt_index]
    rows = []
    expected = []
    for flag in (2, 3):
        for si in range(lo.m):
            for qi in state_ids:
                vec = np.zeros(width, dtype=np.int32)
                for k in range(lo.c):
                    vec[k] = (qi >> k) & 1
                vec[lo.c + si] = 1
                vec[-1] = flag
                rows.append(vec)
                expected.append(
                    w.ff.fill_target if flag == 2 else w.ff.table[(si, qi)]
                )
    x = np.stack(rows)
    w1 = np.zeros((len(mlp), width), dtype=np.int32)
    b1 = np.asarray(mlp.biases, dtype=np.int32)
    for u, wts in enumerate(mlp.weights):
        for coord, wt in wts.items():
            w1[u, coord - lo_base] = wt
    out_tokens = np.asarray(mlp.out_tokens)

    mismatches = []
    for lo_row in range(0, len(x), chunk):
        block = x[lo_row : lo_row + chunk]
        hidden = block @ w1.T + b1
        np.maximum(hidden, 0, out=hidden)
        counts = np.count_nonzero(hidden, axis=1)
        hits = hidden.argmax(axis=1)
        for j in range(len(block)):
            i = lo_row + j
            ok = (
                counts[j] == 1
                and hidden[j, hits[j]] == 1
                and out_tokens[hits[j]] == expected[i]
            )
            if not ok:
                mismatches.append(
                    f"row {i}: fired={counts[j]} "
                    f"got={out_tokens[hits[j]] if counts[j] else None} "
                    f"want={expected[i]}"
                )
    return len(x), mismatches


# ---------------------------------------------------------------------------
# fixed-coordinate conformance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    checks: tuple[ConformanceCheck, ...]

    @property
    def ok(self) -> bool:
        return all(ch.ok for ch in self.checks)

    def lines(self):
        for ch in self.checks:
            status = "ok" if ch.ok else "FAIL"
            yield f"{status:4s} {ch.name}" + (f"  ({ch.detail})" if ch.detail else "")


def verify_paper_literal(w: TfWeights) -> ConformanceReport:
    """Bit-exact check of the classic three-symbol coordinate layout.

    Valid only for m = 3 vocabularies, where blocks B0..B4 occupy
    coordinates 1..c+8 (1-based) in the canonical order: constant,
    symbol one-hot, state bits, attended scratch, flag.
    """
    lo = w.layout
    if lo.m != 3:
        raise PreconditionError("literal layout check requires exactly 3 symbols")
    c = lo.c
    checks = []

    def expect_emb(si, qbits):
        vec = [0] * (c + 8)
        vec[0] = 1
        vec[1 + si] = 1
        for k, bit in enumerate(qbits):
            vec[4 + k] = bit
        return vec

    emb_ok = True
    emb_detail = ""
    for tid in range(len(w.vocab)):
        sym, state = w.vocab.token(tid)
        si = w.vocab.symbols.index(sym)
        qi = w.vocab.states.index(state)
        got = [w.emb[tid].get(i, 0) for i in range(c + 8)]
        want = expect_emb(si, w.vocab.state_bits(qi))
        if got != want:
            emb_ok = False
            emb_detail = f"token ({sym},{state}): {got} != {want}"
            break
    checks.append(ConformanceCheck("emb rows (1, one-hot sigma, q, 0,0,0, 0)", emb_ok, emb_detail))

    s = w.window
    pos_ok = True
    pos_detail = ""
    for offset in range(s):
        got = build_pos(offset, lo, s)
        if offset == 0:
            want = {c + 7: 1}
        elif offset == s - 1:
            want = {c + 7: 2}
        else:
            want = {}
        if got != want:
            pos_ok = False
            pos_detail = f"offset {offset}: {got} != {want}"
            break
    checks.append(ConformanceCheck("pos flags 1 at offset 0, 2 at offset S-1", pos_ok, pos_detail))

    def mat_check(name, got, want):
        checks.append(
            ConformanceCheck(
                name,
                got == want,
                "" if got == want else f"{sorted(got.items())} != {sorted(want.items())}",
            )
        )

    mat_check("K nonzero K[c+8,1]=1", w.k_mat, {(c + 7, 0): 1})
    mat_check("Q nonzero Q[c+8,c+8]=1", w.q_mat, {(c + 7, c + 7): 1})
    mat_check(
        "V nonzeros V[c+5,2]=V[c+6,3]=V[c+7,4]=V[c+8,c+8]=1",
        w.v_mat,
        {(c + 4, 1): 1, (c + 5, 2): 1, (c + 6, 3): 1, (c + 7, c + 7): 1},
    )
    w_ok = w.w_mat == {(i, i): 1 for i in range(lo.d)}
    checks.append(ConformanceCheck("W is the identity", w_ok))
    checks.append(ConformanceCheck("b is zero", not w.bias))
    return ConformanceReport(tuple(checks))


# ---------------------------------------------------------------------------
# weights document
# ---------------------------------------------------------------------------


def _triplets(mat: Sparse):
    return [[r, c, v] for (r, c), v in sorted(mat.items())]


def weights_document(w: TfWeights) -> dict:
    lo = w.layout
    return {
        "layers": 1,
        "heads": 1,
        "layout": {
            "m": lo.m,
            "c": lo.c,
            "vocab_size": lo.vocab_size,
            "d": lo.d,
            "blocks": {
                "const": lo.b0,
                "symbol": lo.b1,
                "state": lo.b2,
                "scratch": lo.b3,
                "flag": lo.b4,
                "logits": lo.b5,
            },
        },
        "vocab": {
            "symbols": list(w.vocab.symbols),
            "states": list(w.vocab.states),
            "pad_symbol": w.pad_symbol,
            "start_state": w.start_state,
            "halt_state": w.halt_state,
        },
        "emb": [
            [[coord, val] for coord, val in sorted(row.items())] for row in w.emb
        ],
        "pos": {"S": w.window},
        "attn": {
            "K": _triplets(w.k_mat),
            "Q": _triplets(w.q_mat),
            "V": _triplets(w.v_mat),
            "W": _triplets(w.w_mat),
            "b": sorted([c, v] for c, v in w.bias.items()),
        },
        "ff": {
            "fill_target": w.ff.fill_target,
            "table": [[si, qi, t] for (si, qi), t in sorted(w.ff.table.items())],
            "mlp": None
            if w.mlp is None
            else {
                "biases": list(w.mlp.biases),
                "weights": [
                    [[coord, wt] for coord, wt in sorted(wts.items())]
                    for wts in w.mlp.weights
                ],
                "out_tokens": list(w.mlp.out_tokens),
            },
        },
        "out": {"block": lo.b5, "width": lo.vocab_size},
    }


def serialize_weights(w: TfWeights) -> str:
    return json.dumps(weights_document(w), sort_keys=True, separators=(",", ":")) + "\n"


def parse_weights(text: str) -> TfWeights:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from None
    try:
        lo = LayoutPlan(
            doc["layout"]["m"], doc["layout"]["c"], doc["layout"]["vocab_size"]
        )
        vocab = TokenVocab(
            tuple(doc["vocab"]["symbols"]), tuple(doc["vocab"]["states"]), lo.c
        )
        emb = tuple({coord: val for coord, val in row} for row in doc["emb"])
        mlp_doc = doc["ff"]["mlp"]
        mlp = None
        if mlp_doc is not None:
            mlp = FfMlp(
                tuple(mlp_doc["biases"]),
                tuple({coord: wt for coord, wt in wts} for wts in mlp_doc["weights"]),
                tuple(mlp_doc["out_tokens"]),
            )
        return TfWeights(
            layout=lo,
            vocab=vocab,
            emb=emb,
            window=doc["pos"]["S"],
            k_mat={(r, c): v for r, c, v in doc["attn"]["K"]},
            q_mat={(r, c): v for r, c, v in doc["attn"]["Q"]},
            v_mat={(r, c): v for r, c, v in doc["attn"]["V"]},
            w_mat={(r, c): v for r, c, v in doc["attn"]["W"]},
            bias={c: v for c, v in doc["attn"]["b"]},
            ff=FfDispatch(
                doc["ff"]["fill_target"],
                {(si, qi): t for si, qi, t in doc["ff"]["table"]},
            ),
            mlp=mlp,
            pad_symbol=doc["vocab"]["pad_symbol"],
            start_state=doc["vocab"]["start_state"],
            halt_state=doc["vocab"]["halt_state"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed weights document: {exc}") from None
