import pytest

from flatmc.model import ParseError, ResourceMismatch, Term
from flatmc.pltl import (
    And,
    Atom,
    Const,
    LassoWord,
    Next,
    Not,
    Or,
    Prev,
    Prop,
    Since,
    Until,
    eval_lasso,
    eval_symb,
    format_formula,
    formula_counters,
    is_pure_future,
    parse_formula,
    temporal_depth,
)
from flatmc.termmaps import Footprint, Interval, Resource, TermMap
from util import naive_eval_bounded, prop_atom_eval, random_formula, rng_for


def test_parse_examples():
    f = parse_formula("G F (x1 + 2 >= x2)", n=2)
    assert temporal_depth(f) == 2
    assert formula_counters(f) == 2
    p = parse_formula("p")
    assert p == Prop("p") and temporal_depth(p) == 0
    bit = parse_formula("F (q1 & (x1 - 1 >= 24) & (x1 - 1 <= 31))", n=4)
    atoms = [g for g in (n.guard for n in [s for s in _subs(bit) if isinstance(s, Atom)])]
    assert {(a.rel, a.bound) for a in atoms} == {(">=", 25), ("<=", 32)}


def _subs(phi):
    from flatmc.pltl import subformulas

    return subformulas(phi)


def test_parse_counter_bound_checked():
    with pytest.raises(ParseError):
        parse_formula("x3 >= 0", n=2)
    parse_formula("x3 >= 0")  # unchecked without a declared context


def test_parse_precedence():
    # unary > U/S (right assoc) > & > |
    f = parse_formula("a U b U c")
    assert f == Until(Prop("a"), Until(Prop("b"), Prop("c")))
    f = parse_formula("a U b & c | d")
    assert f == Or(And(Until(Prop("a"), Prop("b")), Prop("c")), Prop("d"))
    f = parse_formula("X a S b")
    assert f == Since(Next(Prop("a")), Prop("b"))
    f = parse_formula("! X- a")
    assert f == Not(Prev(Prop("a")))


def test_temporal_depth_examples():
    assert temporal_depth(parse_formula("p")) == 0
    assert temporal_depth(parse_formula("G F p")) == 2
    assert temporal_depth(Since(Prop("a"), Next(Prop("b")))) == 2


def test_format_round_trip():
    rng = rng_for("fmt")
    for _ in range(100):
        phi = random_formula(rng, rng.randint(0, 3), n_counters=2)
        assert parse_formula(format_formula(phi), n=2) == phi


def test_eval_examples():
    w = LassoWord((frozenset({"p"}),), (frozenset(),))
    assert eval_lasso(w, prop_atom_eval, Const(True), 3)
    assert eval_lasso(w, prop_atom_eval, parse_formula("p"), 0)
    assert not eval_lasso(w, prop_atom_eval, parse_formula("X p"), 0)


def test_eval_loop_twice_encoding():
    # A loop visited twice puts its marker two positions apart; once does not.
    def chain_word(times):
        # entry c, marked m, repeated `times`, then sink s forever
        seq = []
        for _ in range(times):
            seq += [frozenset({"c"}), frozenset({"m"})]
        seq += [frozenset({"c"})]
        return LassoWord(tuple(seq), (frozenset({"s"}),))

    marked_twice = parse_formula("F (m & X X m)")
    assert eval_lasso(chain_word(2), prop_atom_eval, marked_twice, 0)
    assert not eval_lasso(chain_word(1), prop_atom_eval, marked_twice, 0)
    # visiting three times violates the two-visit cap formula
    cap = parse_formula("G (!(m & X X m) | X X X G !m)")
    assert eval_lasso(chain_word(2), prop_atom_eval, cap, 0)
    assert not eval_lasso(chain_word(3), prop_atom_eval, cap, 0)


def test_past_base_case():
    rng = rng_for("pastbase")
    for _ in range(50):
        w = LassoWord(
            tuple(frozenset(p for p in "pq" if rng.random() < 0.5) for _ in range(rng.randint(0, 3))),
            tuple(frozenset(p for p in "pq" if rng.random() < 0.5) for _ in range(rng.randint(1, 3))),
        )
        phi = random_formula(rng, rng.randint(0, 2), props=("p", "q"))
        assert not eval_lasso(w, prop_atom_eval, Prev(phi), 0)


def _random_word(rng, props=("p", "q")):
    def letter():
        return frozenset(p for p in props if rng.random() < 0.5)

    prefix = tuple(letter() for _ in range(rng.randint(0, 4)))
    loop = tuple(letter() for _ in range(rng.randint(1, 4)))
    return LassoWord(prefix, loop)


def test_lasso_shift_invariance():
    # appending one loop copy to the prefix never changes any truth value
    rng = rng_for("shift")
    for _ in range(400):
        w = _random_word(rng)
        w2 = LassoWord(w.prefix + w.loop, w.loop)
        phi = random_formula(rng, rng.randint(0, 4), props=("p", "q"))
        horizon = len(w.prefix) + 3 * len(w.loop) + 6
        for pos in range(0, horizon, max(1, horizon // 5)):
            assert eval_lasso(w, prop_atom_eval, phi, pos) == eval_lasso(w2, prop_atom_eval, phi, pos)


def test_agrees_with_bounded_unrolling():
    rng = rng_for("bounded")
    checked = 0
    for _ in range(500):
        w = _random_word(rng)
        phi = random_formula(rng, rng.randint(0, 3), props=("p", "q"), allow_past=False)
        td = temporal_depth(phi)
        base = [w.letter(i) for i in range(len(w.prefix) + (td + 2) * len(w.loop))]
        longer = base + [w.letter(len(base) + i) for i in range(2 * len(w.loop))]
        a = naive_eval_bounded(base, prop_atom_eval, phi, 0)
        b = naive_eval_bounded(longer, prop_atom_eval, phi, 0)
        if a != b:
            continue  # truth not determined within the horizon
        checked += 1
        assert eval_lasso(w, prop_atom_eval, phi, 0) == a
    assert checked > 300


def test_duality_and_expansion_laws():
    rng = rng_for("laws")
    for _ in range(200):
        w = _random_word(rng)
        a = random_formula(rng, rng.randint(0, 2), props=("p", "q"))
        b = random_formula(rng, rng.randint(0, 2), props=("p", "q"))
        u = Until(a, b)
        expanded = Or(b, And(a, Next(u)))
        s = Since(a, b)
        s_expanded = Or(b, And(a, Prev(s)))
        for pos in range(0, 8):
            assert eval_lasso(w, prop_atom_eval, Not(a), pos) == (not eval_lasso(w, prop_atom_eval, a, pos))
            assert eval_lasso(w, prop_atom_eval, u, pos) == eval_lasso(w, prop_atom_eval, expanded, pos)
            assert eval_lasso(w, prop_atom_eval, s, pos) == eval_lasso(w, prop_atom_eval, s_expanded, pos)


def test_is_pure_future():
    assert is_pure_future(parse_formula("G (p U q)"))
    assert not is_pure_future(parse_formula("F (p S q)"))
    assert not is_pure_future(parse_formula("X- p"))


def _symb_footprint(cells):
    # single-letter loop footprints over T={x1}, B={0}
    resource = Resource(frozenset({"p"}), frozenset({Term.var(1)}), frozenset({0}))
    letters = tuple((frozenset({"p"}), TermMap.of({Term.var(1): c})) for c in cells)
    return Footprint(resource, LassoWord((), letters))


def test_eval_symb_atoms():
    ft = _symb_footprint([Interval(0, 0)])
    assert eval_symb(ft, parse_formula("x1 >= 0"))
    assert not eval_symb(ft, parse_formula("x1 < 0"))
    assert eval_symb(ft, parse_formula("x1 = 0"))
    assert not eval_symb(ft, parse_formula("x1 > 0"))
    up = _symb_footprint([Interval(1, None)])
    assert eval_symb(up, parse_formula("x1 > 0"))
    assert eval_symb(up, parse_formula("x1 >= 0"))
    assert not eval_symb(up, parse_formula("x1 <= 0"))


def test_eval_symb_resource_mismatch():
    ft = _symb_footprint([Interval(0, 0)])
    with pytest.raises(ResourceMismatch):
        eval_symb(ft, parse_formula("x2 >= 0"))
    with pytest.raises(ResourceMismatch):
        eval_symb(ft, parse_formula("x1 >= 5"))
