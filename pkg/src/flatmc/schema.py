"""Path schemas over flat counter systems.

A path schema alternates simple segments and simple loops, the last loop
repeating forever.  Minimal path schemas (segments jointly simple and not a
loop, loops pairwise transition-disjoint) cover all runs of a flat system;
their enumeration walks the control graph depth-first, taking each state's
unique simple cycle as an optional loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from flatmc.model import CounterSystem, NotFlat, Transition, state_cycles


def _src(t):
    return t.source


def _tgt(t):
    return t.target


@dataclass(frozen=True)
class PathSchema:
    """Alternation ``p1 l1+ p2 l2+ ... pk lk^w`` of segments and loops.

    Generic over the transition type: base transitions and unfolded
    transitions both carry source/target/guard/update.
    """

    segments: tuple[tuple, ...]
    loops: tuple[tuple, ...]

    def __post_init__(self):
        if len(self.segments) != len(self.loops) or not self.loops:
            raise ValueError("a schema needs k segments and k nonempty loops")
        word = []
        for seg, loop in zip(self.segments, self.loops):
            if not loop:
                raise ValueError("loops must be nonempty")
            if _src(loop[0]) != _tgt(loop[-1]):
                raise ValueError("loops must return to their entry")
            word.extend(seg)
            word.extend(loop)
        for a, b in zip(word, word[1:]):
            if _tgt(a) != _src(b):
                raise ValueError("schema word is not a path segment")

    @property
    def nbloops(self) -> int:
        return len(self.loops)

    @property
    def final_loop(self) -> tuple:
        return self.loops[-1]

    def word(self) -> tuple:
        out = []
        for seg, loop in zip(self.segments, self.loops):
            out.extend(seg)
            out.extend(loop)
        return tuple(out)

    def length(self) -> int:
        return len(self.word())

    @property
    def start(self):
        if self.segments[0]:
            return _src(self.segments[0][0])
        return _src(self.loops[0][0])


@dataclass(frozen=True)
class IterationVector:
    """How many times each non-final loop is taken (componentwise >= 1)."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 1 for c in self.counts):
            raise ValueError("iteration counts must be >= 1")


def lasso_of(schema: PathSchema, counts: IterationVector | Sequence[int]) -> tuple[tuple, tuple]:
    """Expand a schema at the given counts into (prefix word, cycle word)."""
    if isinstance(counts, IterationVector):
        counts = counts.counts
    counts = tuple(counts)
    if len(counts) != schema.nbloops - 1:
        raise ValueError(f"expected {schema.nbloops - 1} counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ValueError("iteration counts must be >= 1")
    prefix: list = []
    for i, (seg, loop) in enumerate(zip(schema.segments, schema.loops)):
        prefix.extend(seg)
        if i < schema.nbloops - 1:
            prefix.extend(loop * counts[i])
    return tuple(prefix), tuple(schema.final_loop)


def is_valid_schema(schema: PathSchema) -> bool:
    """Necessary conditions for the final loop to repeat forever.

    The loop's cumulative effect must be componentwise >= 0, and (when its
    guards are plain conjunctions) each atom's drift must point the right
    way: <=/< atoms need drift <= 0, = atoms drift 0, >=/> atoms drift >= 0.
    """
    loop = schema.final_loop
    eff = [0] * len(loop[0].update)
    for t in loop:
        for i, d in enumerate(t.update):
            eff[i] += d
    if any(d < 0 for d in eff):
        return False
    if any(t.guard.has_disjunction() for t in loop):
        return True
    for t in loop:
        for atom in t.guard.atoms():
            drift = atom.term.value(eff)
            if atom.rel in ("<=", "<") and drift > 0:
                return False
            if atom.rel == "=" and drift != 0:
                return False
            if atom.rel in (">=", ">") and drift < 0:
                return False
    return True


def format_schema(schema: PathSchema) -> str:
    """``p1 (l1)+ p2 ... (lk)w`` using transition indices."""
    parts = []
    for i, (seg, loop) in enumerate(zip(schema.segments, schema.loops)):
        if seg:
            parts.append(" ".join(str(t.index) for t in seg))
        body = " ".join(str(t.index) for t in loop)
        parts.append(f"({body})w" if i == schema.nbloops - 1 else f"({body})+")
    return " ".join(parts)


def enumerate_minimal_schemas(
    system: CounterSystem, start: str, canonical_only: bool = False
) -> Iterator[PathSchema]:
    """All minimal path schemas of a flat system starting at `start`.

    Depth-first over the control graph: at each state the unique simple
    cycle may close the schema (final loop), be recorded as a repeatable
    loop, or be partially walked as plain segment material; walk edges are
    explored in transition order.  Each schema is produced exactly once.

    With `canonical_only`, schemas whose concatenated segments contain a
    complete cycle inline are suppressed; every run of such a schema also
    respects a canonical one (the inline copies fold into the loop), so the
    filtered stream still covers all runs.
    """
    cycles = state_cycles(system)  # raises NotFlat on non-flat input
    if start not in system.states:
        raise ValueError(f"unknown state {start}")
    rotations: dict[frozenset[int], set[tuple[int, ...]]] = {}
    for rot in cycles.values():
        key = frozenset(t.index for t in rot)
        rotations.setdefault(key, set()).add(tuple(t.index for t in rot))

    def concat_is_loop(p_word: list[Transition], state: str) -> bool:
        return bool(p_word) and state == p_word[0].source

    def inline_cycle(p_word: list[Transition], state: str) -> bool:
        rot = cycles.get(state)
        if rot is None or len(p_word) < len(rot):
            return False
        tail = tuple(t.index for t in p_word[-len(rot):])
        return tail in rotations[frozenset(t.index for t in rot)]

    def walk(q: str, segments: tuple, cur: list, loops: tuple, used_loops: frozenset, p_word: list):
        rot = cycles.get(q)
        rot_key = frozenset(t.index for t in rot) if rot is not None else None
        loop_free = rot is not None and rot_key not in used_loops
        if loop_free and not concat_is_loop(p_word, q):
            yield PathSchema(segments + (tuple(cur),), loops + (rot,))
        if loop_free:
            yield from walk(q, segments + (tuple(cur),), [], loops + (rot,), used_loops | {rot_key}, p_word)
        used = {t.index for t in p_word}
        for t in system.out(q):
            if t.index in used:
                continue
            cur.append(t)
            p_word.append(t)
            if not (canonical_only and inline_cycle(p_word, t.target)):
                yield from walk(t.target, segments, cur, loops, used_loops, p_word)
            cur.pop()
            p_word.pop()

    yield from walk(start, (), [], (), frozenset(), [])
