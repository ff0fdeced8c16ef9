"""Stuttering equivalence on positions of words ``w1 u^M w2``.

Two repetition counts are interchangeable below a depth parameter once both
exceed it; the position-level relation additionally aligns positions before,
inside, and after the repeated block.  The checker only consumes
`cap_counts`; the relation itself exists for the property-test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class StutterContext:
    """Decomposition parameters of a word ``w1 u^M w2``."""

    prefix_len: int
    period_len: int
    reps: int
    depth: int

    def __post_init__(self):
        if self.period_len < 1:
            raise ValueError("period length must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")


def counts_equiv(m1: int, m2: int, depth: int) -> bool:
    """Counts are equivalent once both clip to `depth`."""
    return min(m1, depth) == min(m2, depth)


def pos_equiv(ctx1: StutterContext, i: int, ctx2: StutterContext, j: int) -> bool:
    """Position equivalence between ``w1 u^M w2`` and ``w1 u^M' w2``.

    Contexts must share the decomposition (prefix, period, depth); only the
    repetition counts may differ.
    """
    if (ctx1.prefix_len, ctx1.period_len, ctx1.depth) != (ctx2.prefix_len, ctx2.period_len, ctx2.depth):
        raise ValueError("contexts must share prefix length, period length and depth")
    p, u, n = ctx1.prefix_len, ctx1.period_len, ctx1.depth
    m1, m2 = ctx1.reps, ctx2.reps
    if not counts_equiv(m1, m2, 2 * n):
        return False
    head = p + n * u
    if i < head and j < head and i == j:
        return True
    if i >= p + (m1 - n) * u and j >= p + (m2 - n) * u and i - j == (m1 - m2) * u:
        return True
    if head <= i < p + (m1 - n) * u and head <= j < p + (m2 - n) * u and abs(i - j) % u == 0:
        return True
    return False


def zone(ctx: StutterContext, i: int) -> str:
    """Diagnostic zone of a position: head / boundary / middle / tail."""
    p, u, n, m = ctx.prefix_len, ctx.period_len, ctx.depth, ctx.reps
    if i < p + (n - 1) * u:
        return "A"
    if i < p + n * u:
        return "B"
    if i < p + (m - n) * u:
        return "C"
    if i < p + (m - n + 1) * u:
        return "D"
    return "E"


def cap_counts(counts: Sequence[int], threshold: int) -> tuple[int, ...]:
    """Clip loop iteration counts at `threshold` (componentwise min)."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    if any(c < 1 for c in counts):
        raise ValueError("counts must be componentwise >= 1")
    return tuple(min(c, threshold) for c in counts)


def cap_for(depth: int) -> int:
    """Loop-count cap that formulas of the given temporal depth cannot see past."""
    return 2 * depth + 5
