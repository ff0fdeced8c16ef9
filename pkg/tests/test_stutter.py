import itertools

import pytest

from flatmc.pltl import LassoWord, eval_lasso, temporal_depth
from flatmc.stutter import StutterContext, cap_counts, cap_for, counts_equiv, pos_equiv, zone
from util import prop_atom_eval, random_formula, rng_for


def test_counts_equiv_examples():
    assert counts_equiv(3, 3, 7)
    assert counts_equiv(9, 12, 7)
    assert not counts_equiv(6, 12, 7)


def test_cap_counts_examples():
    assert cap_counts((1, 1), 7) == (1, 1)
    assert cap_counts((100, 3), cap_for(1)) == (7, 3)
    assert cap_counts((8, 9, 10), 7) == (7, 7, 7)
    with pytest.raises(ValueError):
        cap_counts((0,), 7)
    with pytest.raises(ValueError):
        cap_counts((1,), 0)


def _ctx(prefix_len, period_len, reps, depth):
    return StutterContext(prefix_len, period_len, reps, depth)


def test_pos_equiv_basics():
    c = _ctx(2, 2, 7, 3)
    assert pos_equiv(c, 0, c, 0)
    with pytest.raises(ValueError):
        pos_equiv(c, 0, _ctx(3, 2, 7, 3), 0)


def materialize(prefix, block, reps, tail_prefix, tail_loop):
    return LassoWord(tuple(prefix) + tuple(block) * reps + tuple(tail_prefix), tuple(tail_loop))


def test_pos_equiv_figure_decomposition():
    # |u| = 2, M = 7, M' = 8, N = 3: positions related by the definition carry
    # equal letters, head positions align identically, and middle positions
    # align exactly when their distance is a multiple of the period.
    prefix = [frozenset({"a"})]
    block = [frozenset(), frozenset({"b"})]
    tail_prefix = [frozenset({"c"})]
    tail_loop = [frozenset({"d"})]
    c1 = _ctx(len(prefix), 2, 7, 3)
    c2 = _ctx(len(prefix), 2, 8, 3)
    w1 = materialize(prefix, block, 7, tail_prefix, tail_loop)
    w2 = materialize(prefix, block, 8, tail_prefix, tail_loop)
    horizon1 = len(prefix) + 2 * 7 + 4
    horizon2 = len(prefix) + 2 * 8 + 4
    seen = 0
    for i in range(horizon1):
        for j in range(horizon2):
            if pos_equiv(c1, i, c2, j):
                seen += 1
                assert w1.letter(i) == w2.letter(j)
    assert seen > 0
    head = len(prefix) + 3 * 2
    for i in range(head):
        assert pos_equiv(c1, i, c2, i)
    # middle zone: equal residues related, unequal residues not
    mid1 = len(prefix) + 3 * 2
    assert pos_equiv(c1, mid1, c2, mid1 + 2)
    assert not pos_equiv(c1, mid1, c2, mid1 + 1)


def test_pos_equiv_middle_residue_counterexample():
    n = 2
    m = 2 * n + 1
    c = _ctx(0, 2, m, n)
    i = n * 2  # first middle position
    assert zone(c, i) == "C"
    assert not pos_equiv(c, i, c, i + 1)
    assert pos_equiv(c, i, c, i)


def test_pos_equiv_is_equivalence_on_samples():
    rng = rng_for("equivrel")
    for _ in range(100):
        p = rng.randint(0, 3)
        u = rng.randint(1, 3)
        n = rng.randint(2, 3)
        m = rng.randint(2 * n + 1, 2 * n + 4)
        c = _ctx(p, u, m, n)
        hi = p + u * m + 5
        pts = [rng.randrange(hi) for _ in range(6)]
        for i in pts:
            assert pos_equiv(c, i, c, i)
            for j in pts:
                assert pos_equiv(c, i, c, j) == pos_equiv(c, j, c, i)


def _claim_instances():
    # all decompositions with |w1|,|u| <= 3, M,M' <= 2N+3, N in {2,3}
    for n in (2, 3):
        for p_len in range(0, 4):
            for u_len in range(1, 4):
                for m1 in range(2 * n + 1, 2 * n + 4):
                    for m2 in range(2 * n + 1, 2 * n + 4):
                        yield n, p_len, u_len, m1, m2


def test_claims_letter_and_step_properties():
    # For equivalent positions: equivalence persists at depth N-1, letters
    # coincide, and the relation is preserved by stepping forward and (for
    # positive positions) backward.
    alphabet = [frozenset(), frozenset({"a"}), frozenset({"a", "b"})]

    def word_letters(p_len, u_len, reps):
        prefix = [alphabet[k % 3] for k in range(p_len)]
        block = [alphabet[(k + 1) % 3] for k in range(u_len)]
        tail = [alphabet[2]]
        return materialize(prefix, block, reps, [], tail)

    for n, p_len, u_len, m1, m2 in _claim_instances():
        c1 = _ctx(p_len, u_len, m1, n)
        c2 = _ctx(p_len, u_len, m2, n)
        d1 = StutterContext(p_len, u_len, m1, n - 1)
        d2 = StutterContext(p_len, u_len, m2, n - 1)
        w1 = word_letters(p_len, u_len, m1)
        w2 = word_letters(p_len, u_len, m2)
        hi1 = p_len + u_len * m1 + 2
        hi2 = p_len + u_len * m2 + 2
        for i in range(hi1):
            for j in range(hi2):
                if not pos_equiv(c1, i, c2, j):
                    continue
                assert pos_equiv(d1, i, d2, j)
                assert w1.letter(i) == w2.letter(j)
                assert pos_equiv(d1, i + 1, d2, j + 1)
                if i > 0 and j > 0:
                    assert pos_equiv(d1, i - 1, d2, j - 1)


def test_claims_successor_matching():
    # For equivalent (i, i'): every j >= i has a partner j' >= i' equivalent
    # at depth N-1 such that every position in [i', j') has an equivalent
    # partner in [i, j).
    for n, p_len, u_len, m1, m2 in _claim_instances():
        if p_len > 2 or u_len > 2:
            continue  # keep the exhaustive scan quick; both shapes covered
        c1 = _ctx(p_len, u_len, m1, n)
        c2 = _ctx(p_len, u_len, m2, n)
        d1 = StutterContext(p_len, u_len, m1, n - 1)
        d2 = StutterContext(p_len, u_len, m2, n - 1)
        hi1 = p_len + u_len * m1 + u_len + 2
        hi2 = p_len + u_len * m2 + u_len + 2
        for i in range(0, hi1, 2):
            for ip in range(0, hi2, 2):
                if not pos_equiv(c1, i, c2, ip):
                    continue
                for j in range(i, hi1):
                    partner = None
                    for jp in range(ip, hi2 + u_len * 4):
                        if not pos_equiv(d1, j, d2, jp):
                            continue
                        if all(
                            any(pos_equiv(d1, k, d2, kp) for k in range(i, j))
                            for kp in range(ip, jp)
                        ):
                            partner = jp
                            break
                    assert partner is not None, (n, p_len, u_len, m1, m2, i, ip, j)


def stuttering_trial(rng, n):
    alphabet = [frozenset(s) for s in ({}, {"p"}, {"q"}, {"p", "q"})]

    def letters(k):
        return tuple(rng.choice(alphabet) for _ in range(k))

    p_len = rng.randint(0, 3)
    u_len = rng.randint(1, 3)
    prefix = letters(p_len)
    block = letters(u_len)
    tail_p = letters(rng.randint(0, 2))
    tail_l = letters(rng.randint(1, 2))
    m1 = rng.randint(2 * n + 1, 2 * n + 7)
    m2 = rng.randint(2 * n + 1, 2 * n + 7)
    w1 = LassoWord(prefix + block * m1 + tail_p, tail_l)
    w2 = LassoWord(prefix + block * m2 + tail_p, tail_l)
    c1 = _ctx(p_len, u_len, m1, n)
    c2 = _ctx(p_len, u_len, m2, n)
    phi = random_formula(rng, n, props=("p", "q"))
    assert temporal_depth(phi) <= n
    # sample an equivalent position pair
    i = rng.randrange(p_len + u_len * m1 + 4)
    cands = [j for j in range(p_len + u_len * m2 + 4) if pos_equiv(c1, i, c2, j)]
    if not cands:
        return False
    j = rng.choice(cands)
    assert eval_lasso(w1, prop_atom_eval, phi, i) == eval_lasso(w2, prop_atom_eval, phi, j), (
        w1,
        w2,
        i,
        j,
        phi,
    )
    return True


def test_stuttering_theorem_sampled():
    rng = rng_for("stutter-small")
    done = 0
    for _ in range(800):
        done += stuttering_trial(rng, rng.choice((2, 3)))
    assert done > 600
