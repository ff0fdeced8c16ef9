"""Interval abstraction of counter valuations: resources, term maps, footprints.

A resource fixes the propositions, linear terms and integer bounds a problem
instance mentions.  The bounds carve the integers into a finite ordered
partition; a term map sends every term of the resource into one cell.  The
footprint of a run abstracts each position to (visible labels, term map),
and satisfaction of constraint atoms on footprints mirrors concrete
satisfaction exactly because the partition is aligned with every bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from flatmc.model import (
    AtomicGuard,
    CounterSystem,
    Guard,
    LassoRun,
    ResourceMismatch,
    Term,
    Transition,
    gand,
    gatom,
)
from flatmc.pltl import Formula, LassoWord, formula_atoms, formula_props


@dataclass(frozen=True)
class Interval:
    """Integer interval; `None` endpoints are unbounded."""

    lo: int | None
    hi: int | None

    def contains(self, v: int) -> bool:
        return (self.lo is None or v >= self.lo) and (self.hi is None or v <= self.hi)

    def shift(self, d: int) -> "Interval":
        return Interval(None if self.lo is None else self.lo + d, None if self.hi is None else self.hi + d)

    def overlaps(self, other: "Interval") -> bool:
        lo_ok = self.hi is None or other.lo is None or other.lo <= self.hi
        hi_ok = self.lo is None or other.hi is None or self.lo <= other.hi
        return lo_ok and hi_ok

    def __str__(self) -> str:
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "+inf" if self.hi is None else str(self.hi)
        return f"[{lo},{hi}]"


@dataclass(frozen=True)
class IntervalSet:
    """Ordered partition of the integers induced by a finite bound set."""

    bounds: tuple[int, ...]
    intervals: tuple[Interval, ...]

    @staticmethod
    def of(bounds: Iterable[int]) -> "IntervalSet":
        bs = tuple(sorted(set(bounds)))
        if not bs:
            return IntervalSet((), (Interval(None, None),))
        cells = [Interval(None, bs[0] - 1)]
        for j, b in enumerate(bs):
            cells.append(Interval(b, b))
            nxt = bs[j + 1] if j + 1 < len(bs) else None
            if nxt is None:
                cells.append(Interval(b + 1, None))
            elif nxt > b + 1:
                cells.append(Interval(b + 1, nxt - 1))
        return IntervalSet(bs, tuple(cells))

    def locate(self, v: int) -> Interval:
        for cell in self.intervals:
            if cell.contains(v):
                return cell
        raise AssertionError("interval set does not partition the integers")

    def position(self, cell: Interval) -> int:
        return self.intervals.index(cell)

    def __len__(self) -> int:
        return len(self.intervals)


def intervals_of(bounds: Iterable[int]) -> IntervalSet:
    """Partition of the integers with a singleton cell at every bound."""
    return IntervalSet.of(bounds)


@dataclass(frozen=True)
class TermMap:
    """Assignment of every resource term to one interval cell."""

    entries: tuple[tuple[Term, Interval], ...]

    @staticmethod
    def of(mapping: Mapping[Term, Interval] | Iterable[tuple[Term, Interval]]) -> "TermMap":
        items = dict(mapping)
        return TermMap(tuple(sorted(items.items(), key=lambda kv: kv[0].coeffs)))

    @property
    def terms(self) -> tuple[Term, ...]:
        return tuple(t for t, _ in self.entries)

    def get(self, term: Term) -> Interval:
        table = self.__dict__.get("_table")
        if table is None:
            table = dict(self.entries)
            object.__setattr__(self, "_table", table)
        cell = table.get(term)
        if cell is None:
            raise ResourceMismatch(f"term {term} not in term map")
        return cell

    def __str__(self) -> str:
        return "{" + ", ".join(f"{t} in {cell}" for t, cell in self.entries) + "}"


def map_of_valuation(terms: Iterable[Term], iset: IntervalSet, values: Sequence[int]) -> TermMap:
    """The unique term map whose cells contain each term's value."""
    return TermMap.of({t: iset.locate(t.value(values)) for t in terms})


def term_drift(term: Term, update: Sequence[int]) -> int:
    """Change of a term's value caused by one application of `update`."""
    return term.value(update)


def maps_le(m1: TermMap, m2: TermMap, update: Sequence[int], iset: IntervalSet) -> bool:
    """Cells move weakly in the drift direction of every term under `update`."""
    for (t, c1), (_, c2) in zip(m1.entries, m2.entries):
        d = term_drift(t, update)
        p1, p2 = iset.position(c1), iset.position(c2)
        if d > 0 and not p1 <= p2:
            return False
        if d < 0 and not p1 >= p2:
            return False
        if d == 0 and p1 != p2:
            return False
    return True


def maps_lt(m1: TermMap, m2: TermMap, update: Sequence[int], iset: IntervalSet) -> bool:
    return m1 != m2 and maps_le(m1, m2, update, iset)


def entails(m: TermMap, g: Guard, bounds: Iterable[int] | None = None) -> bool:
    """Symbolic satisfaction: every valuation inside `m` satisfies `g`.

    Exact (not merely sound) when the map's interval set was built from a
    bound set containing every bound of `g`; passing `bounds` makes that
    containment checked.
    """
    if bounds is not None:
        known = set(bounds)
        for atom in g.atoms():
            if atom.bound not in known:
                raise ResourceMismatch(f"bound {atom.bound} not in resource")
    return _entails(m, g)


def _entails(m: TermMap, g: Guard) -> bool:
    if g.kind == "true":
        return True
    if g.kind == "false":
        return False
    if g.kind == "atom":
        a = g.atom
        cell = m.get(a.term)
        if a.rel == "=":
            return cell.lo == a.bound and cell.hi == a.bound
        if a.rel == "<=":
            return cell.hi is not None and cell.hi <= a.bound
        if a.rel == "<":
            return cell.hi is not None and cell.hi < a.bound
        if a.rel == ">=":
            return cell.lo is not None and cell.lo >= a.bound
        return cell.lo is not None and cell.lo > a.bound
    if g.kind == "and":
        return all(_entails(m, p) for p in g.parts)
    return any(_entails(m, p) for p in g.parts)


def beta(term: Term, update: Sequence[int], cell: Interval) -> Guard:
    """Disjunction-free guard: the updated term's value lies in `cell`.

    ``v |= beta(t, u, cell)`` iff ``(v + u)(t) in cell``; the shift is folded
    into the bounds so the guard stays over the original counters.
    """
    d = term_drift(term, update)
    parts = []
    if cell.lo is not None:
        parts.append(gatom(term, ">=", cell.lo - d))
    if cell.hi is not None:
        parts.append(gatom(term, "<=", cell.hi - d))
    return gand(*parts)


# ---------------------------------------------------------------------------
# Resources


@dataclass(frozen=True)
class Resource:
    """Propositions, terms and bounds a problem instance mentions."""

    props: frozenset[str]
    terms: frozenset[Term]
    bounds: frozenset[int]

    @property
    def iset(self) -> IntervalSet:
        cache = self.__dict__.get("_iset")
        if cache is None:
            cache = IntervalSet.of(self.bounds)
            object.__setattr__(self, "_iset", cache)
        return cache

    @property
    def sorted_terms(self) -> tuple[Term, ...]:
        return tuple(sorted(self.terms, key=lambda t: t.coeffs))

    def chain_bound(self) -> int:
        """Longest strictly advancing chain of term maps under one drift."""
        return max(1, len(self.iset) * len(self.terms))


def resource_of(transitions: Iterable[Transition] | CounterSystem, phi: Formula | None = None) -> Resource:
    """Minimal resource covering the given transitions' guards and `phi`."""
    if isinstance(transitions, CounterSystem):
        transitions = transitions.transitions
    terms: set[Term] = set()
    bounds: set[int] = set()
    for t in transitions:
        for atom in t.guard.atoms():
            terms.add(atom.term)
            bounds.add(atom.bound)
    props: frozenset[str] = frozenset()
    if phi is not None:
        props = formula_props(phi)
        for atom in formula_atoms(phi):
            terms.add(atom.term)
            bounds.add(atom.bound)
    return Resource(props, frozenset(terms), frozenset(bounds))


# ---------------------------------------------------------------------------
# Footprints


@dataclass(frozen=True)
class Footprint:
    """Ultimately periodic word of (visible labels, term map) letters."""

    resource: Resource
    word: LassoWord

    def letter(self, i: int):
        return self.word.letter(i)


def footprint_of_lasso(run: LassoRun, resource: Resource, labels: Mapping[str, frozenset[str]]) -> Footprint:
    """Footprint of the infinite run denoted by a lasso.

    The cycle's letters become periodic once every drifting term has entered
    the partition cell that is unbounded in its drift direction; the required
    number of cycle unrollings is computed exactly and moved into the prefix.
    """
    iset = resource.iset
    terms = resource.sorted_terms
    for t in terms:
        if t.max_index > len(run.cycle[0][0].values):
            raise ResourceMismatch(f"term {t} exceeds the run's counter count")

    def letter_of(conf):
        props = labels.get(conf.state, frozenset()) & resource.props
        return (props, map_of_valuation(terms, iset, conf.values))

    prefix_letters = [letter_of(c) for c, _ in run.prefix]
    eff = run.cycle_effect
    # Unrollings until every (term, cycle position) sits in its final cell.
    rounds = 0
    for t in terms:
        d = term_drift(t, eff)
        if d == 0:
            continue
        for conf, _ in run.cycle:
            v = t.value(conf.values)
            if d > 0:
                lo = iset.intervals[-1].lo
                need = 0 if lo is None or v >= lo else -((v - lo) // d)
            else:
                hi = iset.intervals[0].hi
                need = 0 if hi is None or v <= hi else -((hi - v) // (-d))
            rounds = max(rounds, need)

    tuples_seen = 1
    last = None
    for r in range(rounds + 1):
        letters = []
        for conf, _ in run.cycle:
            shifted = tuple(v + r * d for v, d in zip(conf.values, eff))
            props = labels.get(conf.state, frozenset()) & resource.props
            letters.append((props, map_of_valuation(terms, iset, shifted)))
        if r < rounds:
            prefix_letters.extend(letters)
        if last is not None and letters != last:
            tuples_seen += 1
        last = letters
    if terms:
        assert tuples_seen <= resource.chain_bound() + 1, "term-map chain exceeded its bound"
    return Footprint(resource, LassoWord(tuple(prefix_letters), tuple(last)))


def proj(word: LassoWord, labels: Mapping[str, frozenset[str]], resource: Resource) -> Footprint:
    """Project a lasso of unfolded transitions to its footprint letters.

    Each letter contributes (source labels restricted to the resource,
    source term map); prefix and cycle lengths are preserved.
    """

    def letter_of(ut):
        state, termmap = ut.source
        return (labels.get(state, frozenset()) & resource.props, termmap)

    return Footprint(
        resource,
        LassoWord(tuple(letter_of(u) for u in word.prefix), tuple(letter_of(u) for u in word.loop)),
    )
