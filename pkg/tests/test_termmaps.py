import itertools

import pytest

from flatmc.model import (
    Configuration,
    ResourceMismatch,
    Term,
    Transition,
    TRUE,
    eval_guard,
    gand,
    gatom,
    gor,
    parse_system,
    simulate_lasso,
)
from flatmc.pltl import LassoWord, eval_symb, parse_formula
from flatmc.termmaps import (
    Interval,
    IntervalSet,
    Resource,
    TermMap,
    beta,
    entails,
    footprint_of_lasso,
    intervals_of,
    map_of_valuation,
    maps_le,
    maps_lt,
    resource_of,
    term_drift,
)
from util import rng_for


def cells(iset):
    return [(c.lo, c.hi) for c in iset.intervals]


def test_intervals_of_examples():
    assert cells(intervals_of({0, 1, 2})) == [(None, -1), (0, 0), (1, 1), (2, 2), (3, None)]
    assert cells(intervals_of({5})) == [(None, 4), (5, 5), (6, None)]
    assert cells(intervals_of({0, 5})) == [(None, -1), (0, 0), (1, 4), (5, 5), (6, None)]


def test_intervals_partition_exhaustive():
    rng = rng_for("partition")
    for _ in range(50):
        bounds = {rng.randint(-6, 6) for _ in range(rng.randint(1, 4))}
        iset = intervals_of(bounds)
        m = len(bounds)
        assert m + 2 <= len(iset) <= 2 * m + 1
        span = range(min(bounds) - 2, max(bounds) + 3)
        for v in span:
            hits = [c for c in iset.intervals if c.contains(v)]
            assert len(hits) == 1


def test_map_of_valuation_examples():
    iset = intervals_of({0, 1, 2})
    x1 = Term.var(1)
    m = map_of_valuation([x1], iset, (1,))
    assert m.get(x1) == Interval(1, 1)
    m = map_of_valuation([x1], iset, (7,))
    assert m.get(x1) == Interval(3, None)
    t = Term.of({1: 1, 2: 2})
    m = map_of_valuation([t], iset, (1, 1))
    assert m.get(t) == Interval(3, None)


def test_entails_examples():
    iset = intervals_of({0, 2})
    x1 = Term.var(1)
    m0 = TermMap.of({x1: Interval(0, 0)})
    assert entails(m0, gatom(x1, ">=", 0))
    m14 = TermMap.of({x1: Interval(1, 1)})
    assert not entails(m14, gatom(x1, "<=", 0))
    gap = TermMap.of({x1: Interval(1, 1)})
    assert entails(gap, gatom(x1, "<=", 2))
    with pytest.raises(ResourceMismatch):
        entails(m0, gatom(Term.var(2), ">=", 0))
    with pytest.raises(ResourceMismatch):
        entails(m0, gatom(x1, ">=", 7), bounds={0, 2})


def _representative_values(cell, lo_clip=-8, hi_clip=8):
    lo = lo_clip if cell.lo is None else cell.lo
    hi = hi_clip if cell.hi is None else cell.hi
    pts = {lo, hi, (lo + hi) // 2}
    return [v for v in pts if cell.contains(v)]


def test_entails_exact_vs_valuations():
    # soundness and completeness against representative valuations, for
    # |T| <= 2, |B| <= 2, guards drawn from the resource
    x1, x2 = Term.var(1), Term.var(2)
    for bounds in ({0}, {-1, 2}, {1, 3}):
        iset = intervals_of(bounds)
        for terms in ((x1,), (x1, x2)):
            pool = [
                gatom(t, rel, b) for t in terms for rel in ("=", "<=", ">=", "<", ">") for b in bounds
            ]
            guards = pool + [gand(a, b) for a in pool[:6] for b in pool[:6]] + [
                gor(a, b) for a in pool[:6] for b in pool[:6]
            ]
            for assignment in itertools.product(iset.intervals, repeat=len(terms)):
                m = TermMap.of(dict(zip(terms, assignment)))
                # valuations: one counter per term here (x1, x2 independent)
                val_choices = [_representative_values(c) for c in assignment]
                if any(not vc for vc in val_choices):
                    continue
                for g in guards:
                    expect = all(
                        eval_guard(g, vals + (0,) * (2 - len(vals)))
                        for vals in itertools.product(*val_choices)
                    )
                    assert entails(m, g) == expect, (m, str(g))


def test_beta_examples():
    x1 = Term.var(1)
    g = beta(x1, (2,), Interval(5, 5))
    assert eval_guard(g, (3,)) and not eval_guard(g, (2,)) and not eval_guard(g, (4,))
    g = beta(x1, (0,), Interval(None, 4))
    assert eval_guard(g, (4,)) and not eval_guard(g, (5,))
    t = Term.of({1: 1, 2: 1})
    g = beta(t, (1, 1), Interval(6, None))
    assert eval_guard(g, (2, 2)) and not eval_guard(g, (2, 1))


def test_beta_characterizes_updated_membership():
    rng = rng_for("beta")
    for _ in range(300):
        nvars = rng.randint(1, 2)
        t = Term.of({i + 1: rng.choice((-2, -1, 1, 2)) for i in range(nvars)})
        u = tuple(rng.randint(-3, 3) for _ in range(nvars))
        iset = intervals_of({rng.randint(-4, 4) for _ in range(rng.randint(1, 3))})
        cell = rng.choice(iset.intervals)
        g = beta(t, u, cell)
        for _ in range(10):
            v = tuple(rng.randint(0, 6) for _ in range(nvars))
            shifted = tuple(a + b for a, b in zip(v, u))
            assert eval_guard(g, v) == cell.contains(t.value(shifted))


def test_map_order():
    x1 = Term.var(1)
    iset = intervals_of({0})
    lo = TermMap.of({x1: Interval(None, -1)})
    mid = TermMap.of({x1: Interval(0, 0)})
    hi = TermMap.of({x1: Interval(1, None)})
    up = (1,)
    assert maps_le(lo, mid, up, iset) and maps_lt(mid, hi, up, iset)
    assert not maps_le(hi, mid, up, iset)
    assert maps_le(mid, mid, up, iset) and not maps_lt(mid, mid, up, iset)
    down = (-1,)
    assert maps_le(hi, mid, down, iset)
    zero = (0,)
    assert not maps_le(lo, mid, zero, iset)


def test_footprint_zero_counter():
    s = parse_system("system k\ncounters 0\nstate a [p]\nstate b\n"
                     'trans a -> b guard "true" update ()\n'
                     'trans b -> a guard "true" update ()\n')
    run = simulate_lasso(Configuration("a", ()), (), (s.transitions[0], s.transitions[1]))
    resource = Resource(frozenset({"p"}), frozenset(), frozenset())
    ft = footprint_of_lasso(run, resource, s.labels)
    assert len(ft.word.prefix) == 0 and len(ft.word.loop) == 2
    assert ft.word.loop[0][0] == frozenset({"p"})
    assert ft.word.loop[0][1].entries == ()


def test_footprint_self_loop_stabilizes():
    t = Transition("q", TRUE, (1,), "q", 0)
    run = simulate_lasso(Configuration("q", (0,)), (), (t,))
    x1 = Term.var(1)
    resource = Resource(frozenset(), frozenset({x1}), frozenset({0}))
    ft = footprint_of_lasso(run, resource, {})
    # after crossing 0 the map stays [1, +inf); the cycle has length 1
    assert len(ft.word.loop) == 1
    assert ft.word.loop[0][1].get(x1) == Interval(1, None)
    # prefix holds the transient letters
    assert ft.word.prefix[0][1].get(x1) == Interval(0, 0)


def test_footprint_matches_concrete_semantics():
    # consistency: symbolic evaluation on the footprint equals concrete
    # evaluation of each atom at sampled positions
    rng = rng_for("ftconsistency")
    x1 = Term.var(1)
    for _ in range(50):
        upd = rng.randint(0, 2)
        start = rng.randint(0, 3)
        t = Transition("q", TRUE, (upd,), "q", 0)
        run = simulate_lasso(Configuration("q", (start,)), (), (t,))
        bound = rng.randint(-2, 4)
        resource = Resource(frozenset(), frozenset({x1}), frozenset({bound}))
        ft = footprint_of_lasso(run, resource, {})
        phi = parse_formula(f"x1 >= {bound}")
        for pos in range(0, 8):
            concrete = start + pos * upd >= bound
            assert eval_symb(ft, phi, pos) == concrete


def test_resource_of():
    s = parse_system(
        "system r\ncounters 2\nstate a\n"
        'trans a -> a guard "x1 + x2 <= 3" update (1,0)\n'
    )
    phi = parse_formula("F (p & x1 >= 1)", n=2)
    r = resource_of(s, phi)
    assert r.props == frozenset({"p"})
    assert Term.of({1: 1, 2: 1}) in r.terms and Term.var(1) in r.terms
    assert r.bounds == frozenset({3, 1})
    assert r.chain_bound() == len(r.iset) * 2
