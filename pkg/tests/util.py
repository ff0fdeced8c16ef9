"""Shared random generators and brute-force oracles for the test suite.

FLATMC_SEED changes every randomized corpus reproducibly.
"""

from __future__ import annotations

import itertools
import os
import random

from flatmc.model import (
    Configuration,
    CounterSystem,
    Guard,
    Term,
    Transition,
    TRUE,
    gand,
    gatom,
    gor,
)
from flatmc import pltl
from flatmc.pltl import (
    And,
    Atom,
    Const,
    F_TRUE,
    Formula,
    Next,
    Not,
    Or,
    Prev,
    Prop,
    Since,
    Until,
)


def rng_for(name: str) -> random.Random:
    seed = os.environ.get("FLATMC_SEED", "20240917")
    return random.Random(f"{seed}:{name}")


# ---------------------------------------------------------------------------
# Random systems


def random_atom_pool(rng: random.Random, n: int, max_const: int = 4, size: int = 2):
    """A small pool of atomic guards; reuse keeps resources small."""
    pool = []
    for _ in range(size):
        idx = rng.randint(1, n)
        coeffs = {idx: rng.choice((1, 1, 1, -1))}
        if n > 1 and rng.random() < 0.3:
            other = rng.randint(1, n)
            if other != idx:
                coeffs[other] = rng.choice((1, -1))
        rel = rng.choice(("<=", ">=", "<", ">", "="))
        pool.append(gatom(Term.of(coeffs), rel, rng.randint(-max_const, max_const)))
    return pool


def random_guard(rng: random.Random, n: int, max_const: int = 4, allow_or: bool = True, pool=None) -> Guard:
    if n == 0 or rng.random() < 0.6:
        return TRUE
    if pool is None:
        pool = random_atom_pool(rng, n, max_const)
    g = rng.choice(pool)
    if rng.random() < 0.25:
        g = gand(g, rng.choice(pool))
    elif allow_or and rng.random() < 0.2:
        g = gor(g, rng.choice(pool))
    return g


def random_flat_system(
    rng: random.Random,
    max_states: int = 6,
    n_counters: int | None = None,
    max_const: int = 4,
    props=("p", "q", "r"),
    allow_or: bool = True,
) -> CounterSystem:
    """Random flat counter system: disjoint cycles linked by a DAG."""
    n = rng.randint(0, 2) if n_counters is None else n_counters
    n_states = rng.randint(1, max_states)
    states = [f"q{i}" for i in range(n_states)]
    labels = {q: frozenset(p for p in props if rng.random() < 0.4) for q in states}

    # Partition a prefix-ordered state list into blocks; each block of size 1
    # may carry a self-loop, blocks of size 2 a two-state cycle.
    blocks: list[list[str]] = []
    i = 0
    while i < n_states:
        size = 2 if (i + 1 < n_states and rng.random() < 0.4) else 1
        blocks.append(states[i : i + size])
        i += size

    transitions: list[Transition] = []
    pool = random_atom_pool(rng, n, max_const) if n else []

    def upd():
        return tuple(rng.randint(-2, 2) for _ in range(n))

    def add(src, dst):
        transitions.append(
            Transition(src, random_guard(rng, n, max_const, allow_or, pool), upd(), dst, len(transitions))
        )

    for b in blocks:
        if len(b) == 2:
            add(b[0], b[1])
            add(b[1], b[0])
        elif rng.random() < 0.6:
            add(b[0], b[0])
    # Forward DAG edges between blocks.
    for i, b in enumerate(blocks):
        for j in range(i + 1, len(blocks)):
            if rng.random() < 0.5:
                add(rng.choice(b), rng.choice(blocks[j]))
    return CounterSystem("rand", n, tuple(states), labels, tuple(transitions))


def zero_config(system: CounterSystem, state: str | None = None) -> Configuration:
    return Configuration(state or system.states[0], tuple([0] * system.n))


# ---------------------------------------------------------------------------
# Random formulas


def random_formula(
    rng: random.Random,
    depth: int,
    props=("p", "q", "r"),
    n_counters: int = 0,
    allow_past: bool = True,
    max_const: int = 4,
    atom_pool=None,
) -> Formula:
    if n_counters and atom_pool is None:
        atom_pool = random_atom_pool(rng, n_counters, max_const)

    def atom() -> Formula:
        if n_counters and rng.random() < 0.4:
            g = rng.choice(atom_pool)
            return Atom(g.atom)
        if props:
            return Prop(rng.choice(props))
        return F_TRUE

    def build(d: int) -> Formula:
        if d == 0 or rng.random() < 0.2:
            return atom()
        ops = ["not", "and", "or", "next", "until"]
        if allow_past:
            ops += ["prev", "since"]
        op = rng.choice(ops)
        if op == "not":
            return Not(build(d))
        if op == "and":
            return And(build(d), build(d))
        if op == "or":
            return Or(build(d), build(d))
        if op == "next":
            return Next(build(d - 1))
        if op == "prev":
            return Prev(build(d - 1))
        if op == "until":
            return Until(build(d - 1), build(d - 1))
        return Since(build(d - 1), build(d - 1))

    phi = build(depth)
    # Pad with X to hit the requested depth exactly when asked.
    while pltl.temporal_depth(phi) < depth:
        phi = Next(phi)
    return phi


def prop_atom_eval(letter, node):
    """Atom evaluator for plain proposition-set letters."""
    return node.name in letter


# ---------------------------------------------------------------------------
# Brute-force evaluators


def naive_eval_bounded(word: list, ae, phi: Formula, pos: int) -> bool:
    """Literal semantics over a finite unrolling; future scans stop at the end.

    Only meaningful when the truth value is determined inside the horizon;
    callers must check stability themselves.
    """
    n = len(word)

    def ev(f: Formula, i: int) -> bool:
        if isinstance(f, Const):
            return f.value
        if isinstance(f, (Prop, Atom)):
            return ae(word[i], f)
        if isinstance(f, Not):
            return not ev(f.sub, i)
        if isinstance(f, And):
            return ev(f.left, i) and ev(f.right, i)
        if isinstance(f, Or):
            return ev(f.left, i) or ev(f.right, i)
        if isinstance(f, Next):
            return i + 1 < n and ev(f.sub, i + 1)
        if isinstance(f, Prev):
            return i > 0 and ev(f.sub, i - 1)
        if isinstance(f, Until):
            for j in range(i, n):
                if ev(f.right, j):
                    return True
                if not ev(f.left, j):
                    return False
            return False
        if isinstance(f, Since):
            for j in range(i, -1, -1):
                if ev(f.right, j):
                    return True
                if not ev(f.left, j):
                    return False
            return False
        raise TypeError(f)

    return ev(phi, pos)


# ---------------------------------------------------------------------------
# Random boolean formulas and a SAT oracle


def random_bool_formula(rng: random.Random, nvars: int, size: int | None = None):
    """Boolean formula over variables 1..nvars as nested tuples."""
    size = size if size is not None else rng.randint(2, 3 * nvars + 2)

    def build(s):
        if s <= 1:
            return ("var", rng.randint(1, nvars))
        op = rng.choice(("not", "and", "or", "and", "or"))
        if op == "not":
            return ("not", build(s - 1))
        left = rng.randint(1, s - 1)
        return (op, build(left), build(s - left))

    return build(size)


def bool_eval(expr, assignment: dict[int, bool]) -> bool:
    tag = expr[0]
    if tag == "var":
        return assignment[expr[1]]
    if tag == "not":
        return not bool_eval(expr[1], assignment)
    if tag == "and":
        return bool_eval(expr[1], assignment) and bool_eval(expr[2], assignment)
    return bool_eval(expr[1], assignment) or bool_eval(expr[2], assignment)


def bool_vars(expr) -> set[int]:
    if expr[0] == "var":
        return {expr[1]}
    return set().union(*(bool_vars(e) for e in expr[1:]))


def brute_sat(expr, nvars: int):
    """First satisfying assignment over variables 1..nvars, or None."""
    for bits in itertools.product((False, True), repeat=nvars):
        a = {i + 1: b for i, b in enumerate(bits)}
        if bool_eval(expr, a):
            return a
    return None
