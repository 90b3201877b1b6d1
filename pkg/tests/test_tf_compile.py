"""Weight emission: layout, dispatch, synthesis, and serialization."""

import json
from dataclasses import replace

import pytest

from tapeloop.corpus import CORPUS, demo_adapted_pm
from tapeloop.errors import (
    NotAdapted,
    OffsetOutOfWindow,
    PreconditionError,
    SynthesisOverflow,
)
from tapeloop.machines import PmSpec
from tapeloop.tm2pm import compile_tm_to_pm
from tapeloop.tf_compile import (
    build_pos,
    check_weight_invariants,
    compile_pm_to_tf,
    order_symbols,
    parse_weights,
    serialize_weights,
    synthesize_ff_mlp,
    verify_ff_synthesis,
    verify_paper_literal,
    weights_document,
)


@pytest.fixture(scope="module")
def demo_weights():
    return compile_pm_to_tf(demo_adapted_pm(), 8)


def test_symbol_order_puts_bits_first_pad_last():
    assert order_symbols({"0", "1", "#"}) == ("0", "1", "#")
    assert order_symbols({"#", "z", "1", "a", "0"}) == ("0", "1", "a", "z", "#")


def test_demo_layout_is_the_nine_coordinate_block(demo_weights):
    lo = demo_weights.layout
    assert lo.m == 3 and lo.c == 1
    assert lo.b5 == lo.c + 8  # blocks B0..B4 fill coordinates 1..c+8
    assert lo.d == lo.c + 8 + len(demo_weights.vocab)


def test_demo_emb_rows_match_fixed_equations(demo_weights):
    # expected rows transcribed by hand for c=1: (1, sym one-hot, q, 0,0,0, 0)
    w = demo_weights
    expect = {
        ("0", "A"): [1, 1, 0, 0, 0, 0, 0, 0, 0],
        ("1", "A"): [1, 0, 1, 0, 0, 0, 0, 0, 0],
        ("#", "A"): [1, 0, 0, 1, 0, 0, 0, 0, 0],
        ("0", "Z"): [1, 1, 0, 0, 1, 0, 0, 0, 0],
        ("1", "Z"): [1, 0, 1, 0, 1, 0, 0, 0, 0],
        ("#", "Z"): [1, 0, 0, 1, 1, 0, 0, 0, 0],
    }
    for (sym, state), want in expect.items():
        tid = w.vocab.token_id(sym, state)
        got = [w.emb[tid].get(i, 0) for i in range(9)]
        assert got == want, (sym, state)


def test_demo_attention_matrices(demo_weights):
    c = demo_weights.layout.c
    assert demo_weights.k_mat == {(c + 7, 0): 1}
    assert demo_weights.q_mat == {(c + 7, c + 7): 1}
    assert demo_weights.v_mat == {
        (c + 4, 1): 1,
        (c + 5, 2): 1,
        (c + 6, 3): 1,
        (c + 7, c + 7): 1,
    }
    assert demo_weights.bias == {}


def test_build_pos_values(demo_weights):
    lo = demo_weights.layout
    assert build_pos(0, lo, 8) == {lo.b4: 1}
    assert build_pos(7, lo, 8) == {lo.b4: 2}
    for offset in range(1, 7):
        assert build_pos(offset, lo, 8) == {}
    with pytest.raises(OffsetOutOfWindow):
        build_pos(8, lo, 8)
    with pytest.raises(OffsetOutOfWindow):
        build_pos(-1, lo, 8)


def test_window_change_touches_one_integer(demo_weights):
    a = weights_document(demo_weights.with_window(16))
    b = weights_document(demo_weights.with_window(256))
    assert a["pos"]["S"] == 16 and b["pos"]["S"] == 256
    a["pos"]["S"] = b["pos"]["S"] = 0
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_compile_rejects_general_queue_machine():
    pm = demo_adapted_pm()
    loose = PmSpec(pm.alphabet, pm.states, pm.start, pm.halt, pm.delta, adapted=False)
    with pytest.raises(NotAdapted):
        compile_pm_to_tf(loose, 8)


def test_dispatch_covers_all_live_rows(compiled):
    entry, artifact, weights = compiled["parity"]
    n_live = len(weights.vocab.states) - 1
    assert len(weights.ff.table) == weights.layout.m * n_live
    check_weight_invariants(weights)


def test_dispatch_rows_follow_the_rule_table(compiled):
    _, artifact, w = compiled["binary-increment"]
    pm = artifact.pm
    for (si, qi), target in list(w.ff.table.items())[:200]:
        sym = w.vocab.symbols[si]
        state = w.vocab.states[qi]
        nxt, write, _ = pm.rule(state, sym)
        assert w.vocab.token(target) == (write, nxt)


# ---------------------------------------------------------------------------
# feed-forward synthesis
# ---------------------------------------------------------------------------


def test_synthesis_branches(demo_weights):
    w = demo_weights
    lo = w.layout
    mlp = synthesize_ff_mlp(w.ff, lo)
    # flag 2 ignores everything else and emits the pad token
    h = {lo.b0: 1, lo.b1 + 1: 1, lo.b3 + 1: 1, lo.b4: 2}
    assert mlp.apply(h) == {w.ff.fill_target: 1}
    # flag 3 dispatches on (attended symbol, state bits)
    si = w.vocab.symbols.index("0")
    h = {lo.b0: 1, lo.b1: 1, lo.b3 + si: 1, lo.b4: 3}
    assert mlp.apply(h) == {w.ff.table[(si, 0)]: 1}


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_synthesis_exhaustive_agreement(name, compiled):
    _, _, w = compiled[name]
    mlp = synthesize_ff_mlp(w.ff, w.layout)
    checked, mismatches = verify_ff_synthesis(w, mlp)
    assert checked == 2 * w.layout.m * (len(w.vocab.states) - 1)
    assert mismatches == []


def test_synthesis_cap():
    w = compile_pm_to_tf(demo_adapted_pm(), 8)
    with pytest.raises(SynthesisOverflow):
        synthesize_ff_mlp(w.ff, w.layout, hidden_cap=2)


# ---------------------------------------------------------------------------
# fixed-layout conformance
# ---------------------------------------------------------------------------


def test_literal_report_passes_on_own_output(demo_weights):
    report = verify_paper_literal(demo_weights)
    assert report.ok
    assert len(report.checks) == 7


def test_literal_report_flags_misplaced_key(demo_weights):
    c = demo_weights.layout.c
    broken = replace(demo_weights, k_mat={(c + 7, 1): 1})
    report = verify_paper_literal(broken)
    bad = [ch.name for ch in report.checks if not ch.ok]
    assert bad == ["K nonzero K[c+8,1]=1"]


def test_literal_report_flags_non_identity_projection(demo_weights):
    w_mat = dict(demo_weights.w_mat)
    w_mat[(0, 1)] = 1
    report = verify_paper_literal(replace(demo_weights, w_mat=w_mat))
    assert not report.ok
    assert any("identity" in ch.name for ch in report.checks if not ch.ok)


def test_literal_requires_three_symbols(compiled):
    _, _, w = compiled["parity"]
    with pytest.raises(PreconditionError):
        verify_paper_literal(w)


# ---------------------------------------------------------------------------
# document round trip
# ---------------------------------------------------------------------------


def test_weights_round_trip(demo_weights):
    w = replace(demo_weights, mlp=synthesize_ff_mlp(demo_weights.ff, demo_weights.layout))
    text = serialize_weights(w)
    back = parse_weights(text)
    assert serialize_weights(back) == text
    assert back.ff == w.ff
    assert back.emb == w.emb
    assert back.mlp == w.mlp


def test_weights_document_is_integer_only(compiled):
    _, _, w = compiled["parity"]
    doc = weights_document(w)

    def walk(node):
        if isinstance(node, dict):
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)
        else:
            assert node is None or isinstance(node, (int, str)), node
            assert not isinstance(node, bool) or node in (True, False)

    walk(doc)


def test_payload_size_constant_across_windows(compiled):
    _, _, w = compiled["copy-and-compare"]
    small = serialize_weights(w.with_window(16))
    large = serialize_weights(w.with_window(256))
    assert len(small) + 1 == len(large)  # "256" is one digit longer than "16"
    masked_small = small.replace('"S":16', '"S":0')
    masked_large = large.replace('"S":256', '"S":0')
    assert masked_small == masked_large
