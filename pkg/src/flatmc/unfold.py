"""Unfolding a minimal path schema into disjunction-free schemas.

Each transition of the base schema is annotated with source and target term
maps; the annotated transition's guard pins the updated term values into the
target map's cells, so all guards become conjunctions.  A skeleton is a
bounded annotated word shaped like the base schema (every loop >= 1 copy)
whose final-loop suffix wraps in map space and whose triple loop copies
strictly advance somewhere; marking repeated copies as loops again turns a
skeleton into an unfolded path schema.

The enumeration is an exhaustive, deterministic depth-first realization of
the family; `consistent_only` additionally prunes annotation choices whose
shifted source cell cannot intersect the target cell, which removes only
skeletons that no run can follow.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence

from flatmc.model import Configuration, Guard, Transition, gand
from flatmc.schema import PathSchema
from flatmc.termmaps import (
    Interval,
    Resource,
    TermMap,
    beta,
    entails,
    map_of_valuation,
    maps_lt,
    term_drift,
)


@dataclass(frozen=True)
class UTrans:
    """A base transition annotated with source and target term maps."""

    source: tuple[str, TermMap]
    origin: Transition
    guard: Guard
    update: tuple[int, ...]
    target: tuple[str, TermMap]

    @property
    def index(self) -> int:
        return self.origin.index

    def __str__(self) -> str:
        return f"d{self.origin.index}{self.target[1]}"


def target_guard(origin: Transition, target_map: TermMap, resource: Resource) -> Guard:
    """Conjunction pinning every updated term into the target map's cell."""
    return gand(*(beta(t, origin.update, target_map.get(t)) for t in resource.sorted_terms))


def make_utrans(origin: Transition, m_src: TermMap, m_tgt: TermMap, resource: Resource) -> UTrans:
    return UTrans(
        (origin.source, m_src),
        origin,
        target_guard(origin, m_tgt, resource),
        origin.update,
        (origin.target, m_tgt),
    )


def target_maps(m_src: TermMap, origin: Transition, resource: Resource, consistent_only: bool) -> list[TermMap]:
    """Candidate target maps, in interval order per term.

    With `consistent_only`, a term's cell must intersect the source cell
    shifted by the transition's drift; annotations failing that cannot be
    followed by any run, so dropping them preserves run-level completeness.
    """
    terms = resource.sorted_terms
    options: list[list[Interval]] = []
    for t in terms:
        cells = resource.iset.intervals
        if consistent_only:
            shifted = m_src.get(t).shift(term_drift(t, origin.update))
            cells = tuple(c for c in cells if c.overlaps(shifted))
        options.append(list(cells))
    return [TermMap.of(zip(terms, combo)) for combo in product(*options)]


def chain_cap(resource: Resource) -> int:
    """Upper bound on copies of one loop inside a skeleton."""
    t, b = len(resource.terms), len(resource.bounds)
    return 2 * max(1, 2 * t * b + t)


def skeleton_length_bound(schema: PathSchema, resource: Resource) -> int:
    seg = sum(len(s) for s in schema.segments)
    loop = sum(len(l) for l in schema.loops)
    return seg + chain_cap(resource) * loop


def _origin_chr(t) -> str:
    return chr(0x100 + t.index)


def _language_regex(schema: PathSchema) -> re.Pattern:
    parts = []
    for seg, loop in zip(schema.segments, schema.loops):
        parts.append(re.escape("".join(_origin_chr(t) for t in seg)))
        parts.append("(?:" + re.escape("".join(_origin_chr(t) for t in loop)) + ")+")
    return re.compile("".join(parts))


def check_skeleton(
    word: Sequence[UTrans], schema: PathSchema, c0: Configuration, resource: Resource
) -> bool:
    """Is `word` a skeleton compatible with `schema` from `c0`?

    Checks annotated-transition well-formedness plus the four skeleton
    conditions: initial values land in the first map, the origin image lies
    in the schema's language, every triple of consecutive loop copies
    strictly advances somewhere, and the final-loop suffix wraps.  Malformed
    input yields False.
    """
    word = tuple(word)
    if not word or len(word) > skeleton_length_bound(schema, resource):
        return False
    terms = resource.sorted_terms
    for ut in word:
        if not isinstance(ut, UTrans):
            return False
        if ut.source[0] != ut.origin.source or ut.target[0] != ut.origin.target:
            return False
        if ut.update != ut.origin.update:
            return False
        if ut.guard != target_guard(ut.origin, ut.target[1], resource):
            return False
        if not entails(ut.source[1], ut.origin.guard):
            return False
    for a, b in zip(word, word[1:]):
        if a.target != b.source:
            return False
    # (init)
    if word[0].source[1] != map_of_valuation(terms, resource.iset, c0.values):
        return False
    # (schema)
    image = "".join(_origin_chr(ut.origin) for ut in word)
    if not _language_regex(schema).fullmatch(image):
        return False
    # (last-loop)
    lk = schema.loops[-1]
    suffix = word[len(word) - len(lk):]
    if tuple(ut.origin for ut in suffix) != lk:
        return False
    if suffix[0].source != suffix[-1].target:
        return False
    # (minimality): maps[i] is the map before the (i+1)-th transition
    maps = [ut.source[1] for ut in word] + [word[-1].target[1]]
    for loop in dict.fromkeys(schema.loops):
        lseq = tuple(t.index for t in loop)
        length = len(loop)
        eff = [0] * len(c0.values)
        for t in loop:
            for i, d in enumerate(t.update):
                eff[i] += d
        for off in range(len(word) - 3 * length + 1):
            window = tuple(ut.origin.index for ut in word[off : off + 3 * length])
            if window != lseq * 3:
                continue
            if not any(
                maps_lt(maps[off + a], maps[off + a + 2 * length], eff, resource.iset)
                for a in range(1, length + 1)
            ):
                return False
    return True


def schema_of_skeleton(word: Sequence[UTrans], schema: PathSchema) -> PathSchema:
    """Re-mark repeated loop copies of a skeleton as repeatable loops.

    A copy block becomes a loop exactly when the following block is an
    identical copy; the final-loop suffix becomes the new schema's last loop.
    """
    word = tuple(word)
    lk_len = len(schema.loops[-1])
    scan_end = len(word) - lk_len
    loop_seqs = [tuple(t.index for t in loop) for loop in schema.loops]
    segments: list[tuple] = []
    loops: list[tuple] = []
    cur: list[UTrans] = []
    i = 0
    while i < scan_end:
        marked = None
        for lseq in loop_seqs:
            length = len(lseq)
            if i + length <= scan_end and i + 2 * length <= len(word):
                block = word[i : i + length]
                if tuple(ut.origin.index for ut in block) == lseq and word[i + length : i + 2 * length] == block:
                    marked = block
                    break
        if marked is not None:
            segments.append(tuple(cur))
            cur = []
            loops.append(marked)
            i += len(marked)
        else:
            cur.append(word[i])
            i += 1
    segments.append(tuple(cur))
    loops.append(word[scan_end:])
    # A marked loop immediately before an identical final loop is redundant:
    # its words collapse into the omega power, and validity of the final
    # loop makes the extra count variable unconstrained above one.
    if len(loops) >= 2 and not segments[-1] and loops[-2] == loops[-1]:
        segments = segments[:-2] + [segments[-2]]
        loops = loops[:-2] + [loops[-1]]
    return PathSchema(tuple(segments), tuple(loops))


def enumerate_unfoldings(
    schema: PathSchema,
    resource: Resource,
    c0: Configuration,
    consistent_only: bool = False,
    max_copies: int | None = None,
    tick=None,
) -> Iterator[PathSchema]:
    """The disjunction-free unfoldings of a minimal schema, each once.

    Deterministic depth-first order: annotation choices per step in interval
    order, loop exits before further copies.  Every produced skeleton passes
    `check_skeleton`; schemas are deduplicated structurally.  `max_copies`
    restricts the family to fewer loop copies than the full bound (tests).
    """
    terms = resource.sorted_terms
    iset = resource.iset
    m0 = map_of_valuation(terms, iset, c0.values)
    cap = min(chain_cap(resource), max_copies) if max_copies else chain_cap(resource)
    length_bound = skeleton_length_bound(schema, resource)
    parts: list[tuple[str, tuple]] = []
    for seg, loop in zip(schema.segments, schema.loops):
        parts.append(("seg", seg))
        parts.append(("loop", loop))
    effs = {}
    for loop in dict.fromkeys(schema.loops):
        eff = [0] * len(c0.values)
        for t in loop:
            for i, d in enumerate(t.update):
                eff[i] += d
        effs[loop] = tuple(eff)
    seen: set = set()

    def steps_through(m: TermMap, seq: tuple[Transition, ...]):
        """All annotated traversals of `seq` from map `m` (ordered)."""
        if tick is not None:
            tick()
        if not seq:
            yield (), m
            return
        t = seq[0]
        if not entails(m, t.guard):
            return
        for m2 in target_maps(m, t, resource, consistent_only):
            first = make_utrans(t, m, m2, resource)
            for rest, m_end in steps_through(m2, seq[1:]):
                yield (first,) + rest, m_end

    def minimality_ok(copies: list[tuple], loop) -> bool:
        if len(copies) < 3:
            return True
        a, _, c = copies[-3], copies[-2], copies[-1]
        maps_a = [a[0].source[1]] + [ut.target[1] for ut in a]
        maps_c = [c[0].source[1]] + [ut.target[1] for ut in c]
        return any(
            maps_lt(maps_a[i], maps_c[i], effs[loop], iset) for i in range(1, len(loop) + 1)
        )

    def run_part(idx: int, m: TermMap, acc: list[UTrans]):
        if idx == len(parts):
            word = tuple(acc)
            assert len(word) <= length_bound
            if check_skeleton(word, schema, c0, resource):
                unfolded = schema_of_skeleton(word, schema)
                if unfolded not in seen:
                    seen.add(unfolded)
                    yield unfolded
            return
        kind, seq = parts[idx]
        if kind == "seg":
            for steps, m_end in steps_through(m, seq):
                acc.extend(steps)
                yield from run_part(idx + 1, m_end, acc)
                del acc[len(acc) - len(steps):]
            return
        final = idx == len(parts) - 1

        def copies_from(m_cur: TermMap, copies: list[tuple], count: int):
            can_stop = count >= 1 and (not final or (copies and copies[-1][0].source[1] == m_cur))
            if can_stop:
                yield from run_part(idx + 1, m_cur, acc)
            if count >= cap:
                return
            for steps, m_end in steps_through(m_cur, seq):
                copies.append(steps)
                if minimality_ok(copies, seq):
                    acc.extend(steps)
                    yield from copies_from(m_end, copies, count + 1)
                    del acc[len(acc) - len(steps):]
                copies.pop()

        yield from copies_from(m, [], 0)

    yield from run_part(0, m0, [])
