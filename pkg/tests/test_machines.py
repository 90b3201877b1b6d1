"""Interpreters, validation, and the machine document format."""

import json

import pytest
from hypothesis import given, settings, strategies as st

from tapeloop.corpus import CORPUS, minimal_tm, parity_tm
from tapeloop.errors import (
    EmptyQueue,
    ParseError,
    PreconditionError,
    StepLimitExceeded,
    SpaceLimitExceeded,
    ValidationError,
)
from tapeloop.machines import (
    BLANK,
    PAD,
    START,
    ExecutionLog,
    PmConfig,
    PmSpec,
    ResourceLimits,
    TmConfig,
    check_log_recurrence,
    initial_tm_config,
    machine_document,
    parse_machine,
    pm_config_trace,
    pm_run,
    pm_step,
    serialize_machine,
    tm_config_trace,
    tm_run,
    tm_step,
)
from tapeloop.tm2pm import compile_tm_to_pm

LIMITS = ResourceLimits(10_000)


def bits_upto(n):
    for length in range(n + 1):
        for v in range(1 << length):
            yield format(v, f"0{length}b") if length else ""


# ---------------------------------------------------------------------------
# document format
# ---------------------------------------------------------------------------


MINIMAL_DOC = json.dumps(
    {
        "kind": "tm",
        "alphabet": [">", "_", "0", "1"],
        "states": ["s", "h"],
        "start": "s",
        "halt": "h",
        "rules": [
            {"state": "s", "read": sym, "next": "h", "write": sym, "move": "R"}
            for sym in (">", "_", "0", "1")
        ],
    }
)


def test_parse_minimal_machine():
    spec = parse_machine(MINIMAL_DOC)
    assert len(spec.states) == 2
    assert spec.rule("s", ">") == ("h", ">", "R")


def test_parse_rejects_partial_delta():
    doc = json.loads(MINIMAL_DOC)
    doc["rules"] = doc["rules"][:-1]  # drop the rule for "1"
    with pytest.raises(ValidationError, match="not total"):
        parse_machine(json.dumps(doc))


def test_parse_rejects_left_move_on_boundary():
    doc = json.loads(MINIMAL_DOC)
    doc["rules"][0] = {"state": "s", "read": ">", "next": "h", "write": ">", "move": "L"}
    with pytest.raises(ValidationError, match="Left"):
        parse_machine(json.dumps(doc))


def test_parse_rejects_garbage():
    with pytest.raises(ParseError):
        parse_machine("not json")
    with pytest.raises(ParseError):
        parse_machine('{"kind": "elephant"}')


def test_serialize_is_canonical_fixed_point():
    # independent oracle: parsing canonical text and serializing again
    # must reproduce it byte for byte, for every corpus machine
    for entry in CORPUS.values():
        text = serialize_machine(entry.spec)
        again = serialize_machine(parse_machine(text))
        assert again == text


def test_compiled_machine_round_trips():
    artifact = compile_tm_to_pm(parity_tm(), 4)
    text = serialize_machine(artifact.pm)
    spec = parse_machine(text)
    assert isinstance(spec, PmSpec)
    assert spec.adapted
    assert serialize_machine(spec) == text


# ---------------------------------------------------------------------------
# tape machine stepping
# ---------------------------------------------------------------------------


def test_tm_step_forced_first_move():
    spec = parity_tm()
    cfg = initial_tm_config(spec, "0")
    nxt = tm_step(spec, cfg)
    assert nxt.head == 2
    assert nxt.state == "even"
    assert nxt.tape == (START, "0")


def test_tm_step_parity_flips_on_one():
    # oracle: the three-rule scanning behaviour traced by hand
    spec = parity_tm()
    cfg = TmConfig((START, "1", "1"), 2, "even")
    assert tm_step(spec, cfg).state == "odd"
    cfg = TmConfig((START, "1", "1"), 3, "odd")
    assert tm_step(spec, cfg).state == "even"


def test_tm_step_rejects_halted():
    spec = parity_tm()
    with pytest.raises(PreconditionError):
        tm_step(spec, TmConfig((START,), 1, spec.halt))


def test_tm_run_parity_counts_ones():
    spec = parity_tm()
    for x in bits_upto(7):
        expect = x.count("1") % 2  # oracle
        stats, _ = tm_run(spec, x, LIMITS)
        assert stats.output_bit == expect
        assert stats.time_steps == len(x) + 3
        assert stats.space_cells == len(x) + 2


def test_tm_run_palindrome_matches_reversal():
    spec = CORPUS["palindrome"].spec
    for x in ("0110", "011", "", "1", "10", "0110110", "1001001"):
        expect = int(x == x[::-1])  # oracle
        stats, _ = tm_run(spec, x, LIMITS)
        assert stats.output_bit == expect


def test_tm_run_minimal_on_empty():
    stats, cfg = tm_run(minimal_tm(), "", LIMITS)
    assert stats.time_steps == 1
    assert stats.output_bit is None  # halts reading a blank
    assert cfg.head == 2


def test_tm_run_respects_limits():
    from tapeloop.corpus import looper_tm

    with pytest.raises(StepLimitExceeded):
        tm_run(looper_tm(), "11", ResourceLimits(100))
    with pytest.raises(SpaceLimitExceeded):
        tm_run(CORPUS["copy-and-compare"].spec, "1111", ResourceLimits(10_000, 5))


def test_tm_space_meter_floor():
    # start marker plus input is always counted, head extent on top
    spec = parity_tm()
    for x in ("", "0", "0101"):
        stats, _ = tm_run(spec, x, LIMITS)
        assert stats.space_cells >= len(x) + 1


# ---------------------------------------------------------------------------
# queue machine stepping
# ---------------------------------------------------------------------------


def _tiny_pm(adapted, move):
    delta = {
        ("s", sym): ("h" if sym == PAD else "s", "b", move) for sym in ("a", "b", "c", PAD)
    }
    return PmSpec(
        alphabet=frozenset(["a", "b", "c", PAD]),
        states=frozenset(["s", "h"]),
        start="s",
        halt="h",
        delta=delta,
        adapted=adapted,
    )


def test_pm_step_right_rule_unfolds():
    spec = _tiny_pm(True, "R")
    cfg = PmConfig(("a", "c"), "s")
    nxt = pm_step(spec, cfg)
    assert nxt.queue == ("c", "b")
    assert nxt.state == "s"
    assert nxt.steps == 1


def test_pm_step_stay_grows_queue():
    spec = _tiny_pm(False, "S")
    nxt = pm_step(spec, PmConfig(("a", "c"), "s"))
    assert nxt.queue == ("a", "c", "b")


def test_pm_step_empty_queue():
    spec = _tiny_pm(True, "R")
    with pytest.raises(EmptyQueue):
        pm_step(spec, PmConfig((), "s"))


def test_pm_step_compiled_parity_matches_table():
    artifact = compile_tm_to_pm(parity_tm(), 4)
    pm = artifact.pm
    queue = tuple("1 0 # # # #".split())
    cfg = PmConfig(queue, pm.start)
    nxt = pm_step(pm, cfg)
    expect_state, expect_write, _ = pm.rule(pm.start, "1")  # table lookup oracle
    assert nxt.state == expect_state
    assert nxt.queue == queue[1:] + (expect_write,)


def test_pm_run_pad_layout():
    # the first queue-size log entries are the bits then the pads
    artifact = compile_tm_to_pm(parity_tm(), 2)
    stats, log = pm_run(artifact.pm, "10", 4, LIMITS)
    assert log.entries[:4] == [
        ("1", "boot"),
        ("0", "boot"),
        (PAD, "boot"),
        (PAD, "boot"),
    ]
    assert stats.space_cells == 4


def test_pm_run_zero_pads_boundary():
    spec = _tiny_pm(False, "S")
    delta = dict(spec.delta)
    delta[("s", "0")] = ("h", "b", "R")
    delta[("s", "1")] = ("h", "b", "R")
    spec = PmSpec(
        spec.alphabet | {"0", "1"}, spec.states, "s", "h", delta, False
    )
    stats, log = pm_run(spec, "01", 2, LIMITS)
    assert log.entries[0] == ("0", "s")
    assert log.entries[1] == ("1", "s")


def test_pm_run_compiled_parity_answer():
    entry = CORPUS["parity"]
    artifact = compile_tm_to_pm(entry.spec, 6)
    for x in ("1011", "0110", ""):
        want, _ = tm_run(entry.spec, x, LIMITS)  # oracle backend
        stats, log = pm_run(artifact.pm, x, 8, LIMITS)
        assert stats.output_bit == want.output_bit
        assert stats.halted


def test_pm_run_determinism():
    entry = CORPUS["palindrome"]
    artifact = compile_tm_to_pm(entry.spec, 7)
    a = pm_run(artifact.pm, "10101", 9, LIMITS)
    b = pm_run(artifact.pm, "10101", 9, LIMITS)
    assert a == b


def test_pm_run_step_limit():
    artifact = compile_tm_to_pm(parity_tm(), 4)
    with pytest.raises(StepLimitExceeded):
        pm_run(artifact.pm, "1", 6, ResourceLimits(3))


def test_adapted_length_conservation_every_step():
    artifact = compile_tm_to_pm(CORPUS["binary-increment"].spec, 6)
    for cfg in pm_config_trace(artifact.pm, "1011", 8, LIMITS):
        assert len(cfg.queue) == 8


def test_log_recurrence_identity():
    # delta applied to (entry i-S+1 symbol, entry i state) gives entry i+1
    for name in ("parity", "binary-increment"):
        entry = CORPUS[name]
        artifact = compile_tm_to_pm(entry.spec, 6)
        for x in ("", "1", "0101", "1111"):
            _, log = pm_run(artifact.pm, x, 8, LIMITS)
            check_log_recurrence(artifact.pm, log, 8)


def test_log_recurrence_catches_corruption():
    artifact = compile_tm_to_pm(parity_tm(), 4)
    _, log = pm_run(artifact.pm, "1", 6, LIMITS)
    log.entries[7] = ("0", log.entries[7][1])
    with pytest.raises(ValidationError):
        check_log_recurrence(artifact.pm, log, 6)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_adapted_rejects_stay():
    spec = _tiny_pm(True, "S")
    with pytest.raises(ValidationError, match="Stay"):
        from tapeloop.machines import validate_pm

        validate_pm(spec)


def test_validate_adapted_rejects_start_reentry():
    from tapeloop.machines import validate_pm

    delta = {("s", sym): ("s", "b", "R") for sym in ("a", "b", PAD)}
    spec = PmSpec(frozenset(["a", "b", PAD]), frozenset(["s", "h"]), "s", "h", delta, True)
    with pytest.raises(ValidationError, match="start"):
        validate_pm(spec)


def test_reserved_pad_symbol_rejected_in_tm():
    doc = json.loads(MINIMAL_DOC)
    doc["alphabet"].append("#")
    doc["rules"].append(
        {"state": "s", "read": "#", "next": "h", "write": "#", "move": "R"}
    )
    with pytest.raises(ValidationError, match="reserved"):
        parse_machine(json.dumps(doc))


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------


@given(st.text(alphabet="01", max_size=9))
@settings(max_examples=60, deadline=None)
def test_parity_oracle_property(x):
    stats, _ = tm_run(parity_tm(), x, LIMITS)
    assert stats.output_bit == x.count("1") % 2


@given(st.text(alphabet="01", max_size=8))
@settings(max_examples=40, deadline=None)
def test_increment_oracle_property(x):
    # oracle: actual binary arithmetic on the input
    stats, _ = tm_run(CORPUS["binary-increment"].spec, x, LIMITS)
    carry_out = int(x == "" or int(x, 2) + 1 >= 2 ** len(x))
    assert stats.output_bit == carry_out


@given(st.text(alphabet="01", max_size=7))
@settings(max_examples=40, deadline=None)
def test_tm_trace_is_deterministic(x):
    spec = CORPUS["palindrome"].spec
    a = list(tm_config_trace(spec, x, LIMITS))
    b = list(tm_config_trace(spec, x, LIMITS))
    assert a == b
    heads = [cfg.head for cfg in a]
    assert max(heads) <= len(x) + 2
