"""Reference machines for the differential suite.

Each entry pairs a hand-written Turing machine with a pure Python
oracle for the same decision problem and a declared space bound. The
machines share one answer convention: the result bit is written on the
tape and the machine halts with the head on it.

PARITY and BINARY-INCREMENT stay light on head reversals;
PALINDROME and COPY-AND-COMPARE are left-heavy, and COPY-AND-COMPARE
additionally doubles its working region (it writes a reversed copy of
the input and then compares the copy against the original position by
position, so its verdict is palindromeness computed the expensive way).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .machines import BLANK, ONE, START, ZERO, Delta, PmSpec, TmSpec, validate_pm, validate_tm

HALT = "H"


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    spec: TmSpec
    space: Callable[[int], int]  # declared bound s(n)
    step_cap: Callable[[int], int]  # generous halt guard for tm runs
    oracle: Callable[[str], Optional[int]]
    description: str


def _total(delta: Delta, states, alphabet, halt: str) -> Delta:
    """Fill unreachable combinations with an inert halting rule."""
    for state in states:
        if state == halt:
            continue
        for sym in alphabet:
            delta.setdefault((state, sym), (halt, sym, "R"))
    return delta


def _tm(alphabet, states, start, delta) -> TmSpec:
    spec = TmSpec(
        alphabet=frozenset(alphabet),
        states=frozenset(states),
        start=start,
        halt=HALT,
        delta=_total(delta, states, alphabet, HALT),
    )
    validate_tm(spec)
    return spec


def parity_tm() -> TmSpec:
    """Answer 1 iff the input holds an odd number of ones."""
    alphabet = [START, BLANK, ZERO, ONE]
    states = ["even", "odd", "fin0", "fin1", HALT]
    delta: Delta = {
        ("even", START): ("even", START, "R"),
        ("even", ZERO): ("even", ZERO, "R"),
        ("even", ONE): ("odd", ONE, "R"),
        ("odd", ZERO): ("odd", ZERO, "R"),
        ("odd", ONE): ("even", ONE, "R"),
        # write the answer on the first blank, bounce, halt reading it
        ("even", BLANK): ("fin0", ZERO, "L"),
        ("odd", BLANK): ("fin1", ONE, "L"),
        ("fin0", START): (HALT, START, "R"),
        ("fin0", ZERO): (HALT, ZERO, "R"),
        ("fin0", ONE): (HALT, ONE, "R"),
        ("fin1", START): (HALT, START, "R"),
        ("fin1", ZERO): (HALT, ZERO, "R"),
        ("fin1", ONE): (HALT, ONE, "R"),
    }
    return _tm(alphabet, states, "even", delta)


def parity_oracle(bits: str) -> int:
    return bits.count("1") % 2


def palindrome_tm() -> TmSpec:
    """Answer 1 iff the input reads the same in both directions.

    Checks symbol pairs from the outside in, overwriting checked cells
    with X; the answer lands on cell 2.
    """
    x = "X"
    alphabet = [START, BLANK, ZERO, ONE, x]
    states = [
        "seek", "go0", "go1", "back0", "back1", "rew",
        "ret0", "ret1", "put0", "put1", "fin", HALT,
    ]
    delta: Delta = {
        ("seek", START): ("seek", START, "R"),
        ("seek", x): ("ret1", x, "L"),
        ("seek", BLANK): ("ret1", BLANK, "L"),
        ("seek", ZERO): ("go0", x, "R"),
        ("seek", ONE): ("go1", x, "R"),
    }
    for bit, go, back in ((ZERO, "go0", "back0"), (ONE, "go1", "back1")):
        delta[(go, ZERO)] = (go, ZERO, "R")
        delta[(go, ONE)] = (go, ONE, "R")
        delta[(go, x)] = (back, x, "L")
        delta[(go, BLANK)] = (back, BLANK, "L")
        other = ONE if bit == ZERO else ZERO
        delta[(back, bit)] = ("rew", x, "L")
        delta[(back, other)] = ("ret0", other, "L")
        delta[(back, x)] = ("ret1", x, "L")  # marked cell was the middle
    delta[("rew", ZERO)] = ("rew", ZERO, "L")
    delta[("rew", ONE)] = ("rew", ONE, "L")
    delta[("rew", x)] = ("seek", x, "R")
    delta[("rew", START)] = ("seek", START, "R")
    _answer_tail(delta, alphabet)
    return _tm(alphabet, states, "seek", delta)


def palindrome_oracle(bits: str) -> int:
    return int(bits == bits[::-1])


def binary_increment_tm() -> TmSpec:
    """Add one to the big-endian input in place; answer 1 iff the
    carry leaves the word (input all ones, vacuously true when empty)."""
    alphabet = [START, BLANK, ZERO, ONE]
    states = ["scan", "carry", "ret0", "ret1", "put0", "put1", "fin", HALT]
    delta: Delta = {
        ("scan", START): ("scan", START, "R"),
        ("scan", ZERO): ("scan", ZERO, "R"),
        ("scan", ONE): ("scan", ONE, "R"),
        ("scan", BLANK): ("carry", BLANK, "L"),
        ("carry", ONE): ("carry", ZERO, "L"),
        ("carry", ZERO): ("ret0", ONE, "L"),
        ("carry", START): ("put1", START, "R"),
    }
    _answer_tail(delta, alphabet)
    return _tm(alphabet, states, "scan", delta)


def binary_increment_oracle(bits: str) -> int:
    return int(all(ch == "1" for ch in bits))


def copy_compare_tm() -> TmSpec:
    """Write a reversed copy of the input after it, then compare the
    copy with the original position by position; answer 1 iff they
    agree (palindromeness, computed via the explicit copy)."""
    a, b, k = "a", "b", "k"
    alphabet = [START, BLANK, ZERO, ONE, a, b, k]
    states = [
        "fs", "gr", "c0", "c1", "r1", "r2",
        "cf", "s0", "s1", "t1", "t2",
        "ret0", "ret1", "put0", "put1", "fin", HALT,
    ]
    delta: Delta = {
        # copy: take the rightmost unmarked bit, append it at the end
        ("fs", START): ("fs", START, "R"),
        ("fs", ZERO): ("fs", ZERO, "R"),
        ("fs", ONE): ("fs", ONE, "R"),
        ("fs", a): ("gr", a, "L"),
        ("fs", b): ("gr", b, "L"),
        ("fs", BLANK): ("gr", BLANK, "L"),
        ("gr", ZERO): ("c0", a, "R"),
        ("gr", ONE): ("c1", b, "R"),
        ("gr", START): ("cf", START, "R"),
    }
    for st, bit in (("c0", ZERO), ("c1", ONE)):
        for sym in (ZERO, ONE, a, b):
            delta[(st, sym)] = (st, sym, "R")
        delta[(st, BLANK)] = ("r1", bit, "L")
    delta[("r1", ZERO)] = ("r1", ZERO, "L")
    delta[("r1", ONE)] = ("r1", ONE, "L")
    delta[("r1", a)] = ("r2", a, "L")
    delta[("r1", b)] = ("r2", b, "L")
    delta[("r2", a)] = ("r2", a, "L")
    delta[("r2", b)] = ("r2", b, "L")
    delta[("r2", ZERO)] = ("c0", a, "R")
    delta[("r2", ONE)] = ("c1", b, "R")
    delta[("r2", START)] = ("cf", START, "R")
    # compare: consume source marks and copy cells left to right
    delta[("cf", k)] = ("cf", k, "R")
    delta[("cf", a)] = ("s0", k, "R")
    delta[("cf", b)] = ("s1", k, "R")
    delta[("cf", ZERO)] = ("ret1", ZERO, "L")
    delta[("cf", ONE)] = ("ret1", ONE, "L")
    delta[("cf", BLANK)] = ("ret1", BLANK, "L")
    for st, bit, other in (("s0", ZERO, ONE), ("s1", ONE, ZERO)):
        for sym in (a, b, k):
            delta[(st, sym)] = (st, sym, "R")
        delta[(st, bit)] = ("t1", k, "L")
        delta[(st, other)] = ("ret0", other, "L")
    delta[("t1", k)] = ("t1", k, "L")
    delta[("t1", a)] = ("t2", a, "L")
    delta[("t1", b)] = ("t2", b, "L")
    delta[("t1", START)] = ("cf", START, "R")
    delta[("t2", a)] = ("t2", a, "L")
    delta[("t2", b)] = ("t2", b, "L")
    delta[("t2", k)] = ("cf", k, "R")
    delta[("t2", START)] = ("cf", START, "R")
    _answer_tail(delta, alphabet)
    return _tm(alphabet, states, "fs", delta)


def copy_compare_oracle(bits: str) -> int:
    return int(bits == bits[::-1])


def looper_tm() -> TmSpec:
    """Bounces between the boundary marker and the first blank forever."""
    alphabet = [START, BLANK, ZERO, ONE]
    states = ["zig", "zag", HALT]
    delta: Delta = {
        ("zig", START): ("zig", START, "R"),
        ("zig", ZERO): ("zig", ZERO, "R"),
        ("zig", ONE): ("zig", ONE, "R"),
        ("zig", BLANK): ("zag", BLANK, "L"),
        ("zag", ZERO): ("zag", ZERO, "L"),
        ("zag", ONE): ("zag", ONE, "L"),
        ("zag", START): ("zig", START, "R"),
    }
    return _tm(alphabet, states, "zig", delta)


def minimal_tm() -> TmSpec:
    """One rule per symbol: step right once and halt."""
    alphabet = [START, BLANK, ZERO, ONE]
    states = ["go", HALT]
    delta: Delta = {("go", sym): (HALT, sym, "R") for sym in alphabet}
    return _tm(alphabet, states, "go", delta)


def minimal_oracle(bits: str) -> Optional[int]:
    return int(bits[0]) if bits else None


def _answer_tail(delta: Delta, alphabet) -> None:
    """Shared answer plumbing: rewind to the boundary, write the answer
    bit on cell 2, halt reading it."""
    for bit in ("0", "1"):
        ret, put = f"ret{bit}", f"put{bit}"
        for sym in alphabet:
            if sym != START:
                delta[(ret, sym)] = (ret, sym, "L")
                delta[(put, sym)] = ("fin", bit, "L")
        delta[(ret, START)] = (put, START, "R")
    delta[("fin", START)] = (HALT, START, "R")


def demo_adapted_pm() -> PmSpec:
    """Hand-written three-symbol strict queue machine with two states.

    Small enough that the state code is a single bit; used to check the
    emitted coordinate layout entry for entry.
    """
    delta: Delta = {
        ("A", "0"): ("Z", "0", "R"),
        ("A", "1"): ("Z", "1", "R"),
        ("A", "#"): ("Z", "#", "R"),
    }
    spec = PmSpec(
        alphabet=frozenset(["0", "1", "#"]),
        states=frozenset(["A", "Z"]),
        start="A",
        halt="Z",
        delta=delta,
        adapted=True,
    )
    validate_pm(spec)
    return spec


def _quad_cap(n: int) -> int:
    return 8 * (n + 2) * (n + 2) + 50


CORPUS: dict[str, CorpusEntry] = {
    "parity": CorpusEntry(
        name="parity",
        spec=parity_tm(),
        space=lambda n: n + 2,
        step_cap=lambda n: n + 10,
        oracle=parity_oracle,
        description="odd number of ones",
    ),
    "palindrome": CorpusEntry(
        name="palindrome",
        spec=palindrome_tm(),
        space=lambda n: n + 2,
        step_cap=_quad_cap,
        oracle=palindrome_oracle,
        description="input equals its reversal",
    ),
    "binary-increment": CorpusEntry(
        name="binary-increment",
        spec=binary_increment_tm(),
        space=lambda n: n + 2,
        step_cap=lambda n: 4 * n + 20,
        oracle=binary_increment_oracle,
        description="incrementing overflows the word",
    ),
    "copy-and-compare": CorpusEntry(
        name="copy-and-compare",
        spec=copy_compare_tm(),
        space=lambda n: 2 * n + 2,
        step_cap=_quad_cap,
        oracle=copy_compare_oracle,
        description="reversed copy agrees with the original",
    ),
}

EXTRA_MACHINES: dict[str, TmSpec] = {
    "looper": looper_tm(),
    "minimal": minimal_tm(),
}


def machine_by_name(name: str) -> TmSpec:
    if name in CORPUS:
        return CORPUS[name].spec
    if name in EXTRA_MACHINES:
        return EXTRA_MACHINES[name]
    raise KeyError(name)
