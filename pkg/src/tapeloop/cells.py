"""Queue-cell alphabet used by the machine-to-queue compiler.

A compiled queue machine runs over an alphabet of annotated tape cells.
Each cell is a tape symbol plus one flag:

  PLAIN    ordinary tape content
  MARK_L   written during a left move; the simulated head is this cell's
           ring predecessor
  MARK_R   head-here marker left behind by the rotation pass
  BUBBLE   non-tape slack cell; also marks the wrap point of the ring
  ANSWER0 / ANSWER1  final cell enqueued just before halting

Cells are serialized as plain symbol names so the queue-machine
interpreter and the token vocabulary can treat them as opaque strings.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError

PLAIN = "plain"
MARK_L = "L"
MARK_R = "R"
BUBBLE = "E"
ANSWER0 = "A0"
ANSWER1 = "A1"

FLAGS = (PLAIN, MARK_L, MARK_R, BUBBLE, ANSWER0, ANSWER1)

# The bubble needs no base symbol; it is encoded as a single fixed name.
BUBBLE_NAME = "@"


@dataclass(frozen=True)
class QueueCell:
    base: str
    flag: str = PLAIN

    def encode(self) -> str:
        if self.flag == PLAIN:
            return self.base
        if self.flag == BUBBLE:
            return BUBBLE_NAME
        return f"{self.base}&{self.flag}"


def decode(name: str) -> QueueCell:
    if name == BUBBLE_NAME:
        return QueueCell("_", BUBBLE)
    if "&" not in name:
        return QueueCell(name, PLAIN)
    base, _, flag = name.rpartition("&")
    if flag not in (MARK_L, MARK_R, ANSWER0, ANSWER1) or not base:
        raise ParseError(f"not a queue cell name: {name!r}")
    return QueueCell(base, flag)


def plain(base: str) -> str:
    return base


def mark_l(base: str) -> str:
    return f"{base}&{MARK_L}"


def mark_r(base: str) -> str:
    return f"{base}&{MARK_R}"


def answer(bit: int) -> str:
    return f"{bit}&A{bit}"


def answer_bit(name: str) -> int | None:
    """The answer carried by a cell name, or None if it is not an answer cell."""
    if name.endswith(f"&{ANSWER0}"):
        return 0
    if name.endswith(f"&{ANSWER1}"):
        return 1
    return None


def is_bubble(name: str) -> bool:
    return name == BUBBLE_NAME


def is_plain(name: str) -> bool:
    return "&" not in name and name != BUBBLE_NAME
