"""Past LTL with arithmetical constraints, and its evaluation on lasso words.

Formulas are built from propositions, linear constraint atoms, boolean
connectives and the temporal operators X, U (future), X-, S (past).
``F``, ``G`` and ``G-`` are parser sugar expanded into the core connectives.

An ultimately periodic word ``prefix . loop^w`` is evaluated exactly by a
bottom-up table construction over the prefix plus ``td+2`` explicit loop
copies: past operators are single forward passes, future operators are
resolved cyclically on the last (stabilized) copy and propagated backward.
Positions beyond the table reduce to the stabilized copy by residue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Generic, Iterator, Sequence, TypeVar

from flatmc import evalcore
from flatmc.model import (
    AtomicGuard,
    ParseError,
    ResourceMismatch,
    Term,
    _COUNTER_RE,
    _TokenStream,
    _tokenize,
    parse_atom,
)

A = TypeVar("A")


class Formula:
    """Base class of all formula nodes."""

    def __hash__(self):
        # structural hash, cached per instance (subtrees hash once)
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((type(self).__name__,) + tuple(self.__dict__[f] for f in self.__dataclass_fields__))
            object.__setattr__(self, "_hash", h)
        return h


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class Atom(Formula):
    guard: AtomicGuard


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    sub: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Prev(Formula):
    sub: Formula


@dataclass(frozen=True)
class Since(Formula):
    left: Formula
    right: Formula


for _cls in (Const, Prop, Atom, Not, And, Or, Next, Until, Prev, Since):
    _cls.__hash__ = Formula.__hash__


F_TRUE = Const(True)
F_FALSE = Const(False)


def f_and(*parts: Formula) -> Formula:
    out: Formula | None = None
    for p in parts:
        out = p if out is None else And(out, p)
    return out if out is not None else F_TRUE


def f_or(*parts: Formula) -> Formula:
    out: Formula | None = None
    for p in parts:
        out = p if out is None else Or(out, p)
    return out if out is not None else F_FALSE


def implies(a: Formula, b: Formula) -> Formula:
    return Or(Not(a), b)


def eventually(phi: Formula) -> Formula:
    return Until(F_TRUE, phi)


def always(phi: Formula) -> Formula:
    return Not(Until(F_TRUE, Not(phi)))


def always_past(phi: Formula) -> Formula:
    return Not(Since(F_TRUE, Not(phi)))


def subformulas(phi: Formula) -> tuple[Formula, ...]:
    """Distinct subformulas in bottom-up (children first) order."""
    seen: dict[Formula, None] = {}

    def visit(f: Formula):
        if f in seen:
            return
        for attr in ("sub", "left", "right"):
            child = getattr(f, attr, None)
            if child is not None:
                visit(child)
        seen[f] = None

    visit(phi)
    return tuple(seen)


def temporal_depth(phi: Formula) -> int:
    """Maximum nesting of X, U, X-, S."""
    depth: dict[Formula, int] = {}
    for f in subformulas(phi):
        kids = [depth[getattr(f, a)] for a in ("sub", "left", "right") if getattr(f, a, None) is not None]
        d = max(kids, default=0)
        if isinstance(f, (Next, Until, Prev, Since)):
            d += 1
        depth[f] = d
    return depth[phi]


def formula_props(phi: Formula) -> frozenset[str]:
    return frozenset(f.name for f in subformulas(phi) if isinstance(f, Prop))


def formula_atoms(phi: Formula) -> tuple[AtomicGuard, ...]:
    return tuple(f.guard for f in subformulas(phi) if isinstance(f, Atom))


def formula_counters(phi: Formula) -> int:
    """Largest counter index referenced by the formula's atoms (0 if none)."""
    return max((f.guard.term.max_index for f in subformulas(phi) if isinstance(f, Atom)), default=0)


def is_pure_future(phi: Formula) -> bool:
    return not any(isinstance(f, (Prev, Since)) for f in subformulas(phi))


# ---------------------------------------------------------------------------
# Lasso words


@dataclass(frozen=True)
class LassoWord(Generic[A]):
    """The infinite word ``prefix . loop^w`` over an abstract letter type."""

    prefix: tuple[A, ...]
    loop: tuple[A, ...]

    def __post_init__(self):
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def letter(self, i: int) -> A:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.loop[(i - len(self.prefix)) % len(self.loop)]


AtomEval = Callable[[A, Formula], bool]


def _tables(word: LassoWord, atom_eval: AtomEval, phi: Formula) -> tuple[dict[Formula, bytearray], int, int]:
    """Exact truth tables over prefix + (td+2) loop copies.

    Returns (tables, prefix length, loop length).  Every cell is exact;
    values on the final copy equal the periodic limit for every subformula,
    so positions beyond the table reduce to the final copy by residue.
    """
    td = temporal_depth(phi)
    p_len, u_len = len(word.prefix), len(word.loop)
    total = p_len + (td + 2) * u_len
    nodes = subformulas(phi)
    tables: dict[Formula, bytearray] = {}
    for f in nodes:
        dst = bytearray(total)
        if isinstance(f, (Const, Prop, Atom)):
            if isinstance(f, Const):
                pref = bytes(int(f.value) for _ in range(p_len))
                loop = bytes(int(f.value) for _ in range(u_len))
            else:
                pref = bytes(int(bool(atom_eval(a, f))) for a in word.prefix)
                loop = bytes(int(bool(atom_eval(a, f))) for a in word.loop)
            dst[:p_len] = pref
            for c in range(td + 2):
                dst[p_len + c * u_len : p_len + (c + 1) * u_len] = loop
        elif isinstance(f, Not):
            evalcore.bnot(tables[f.sub], dst)
        elif isinstance(f, And):
            evalcore.band(tables[f.left], tables[f.right], dst)
        elif isinstance(f, Or):
            evalcore.bor(tables[f.left], tables[f.right], dst)
        elif isinstance(f, Next):
            evalcore.next_shift(tables[f.sub], dst, u_len)
        elif isinstance(f, Prev):
            evalcore.prev_shift(tables[f.sub], dst)
        elif isinstance(f, Until):
            evalcore.until_pass(tables[f.left], tables[f.right], dst, u_len)
        elif isinstance(f, Since):
            evalcore.since_pass(tables[f.left], tables[f.right], dst)
        else:  # pragma: no cover
            raise TypeError(f"unknown formula node {f!r}")
        tables[f] = dst
    return tables, p_len, u_len


def eval_lasso(word: LassoWord, atom_eval: AtomEval, phi: Formula, pos: int = 0) -> bool:
    """Truth of `phi` at position `pos` of ``prefix . loop^w``.

    Prop and Atom nodes are decided by ``atom_eval(letter, node)``.
    """
    if pos < 0:
        raise ValueError("position must be >= 0")
    tables, p_len, u_len = _tables(word, atom_eval, phi)
    table = tables[phi]
    if pos < len(table):
        return bool(table[pos])
    return bool(table[len(table) - u_len + (pos - p_len) % u_len])


# ---------------------------------------------------------------------------
# Symbolic evaluation over footprint letters


def symb_atom_holds(termmap, guard: AtomicGuard) -> bool:
    """Symbolic truth of ``t ~ b`` on a term map (interval containment).

    Strict relations are tightened to the integer grid: ``< b`` means the
    interval fits within (-inf, b-1], ``> b`` within [b+1, +inf).
    """
    iv = termmap.get(guard.term)
    rel, b = guard.rel, guard.bound
    if rel == "=":
        return iv.lo == b and iv.hi == b
    if rel == "<=":
        return iv.hi is not None and iv.hi <= b
    if rel == "<":
        return iv.hi is not None and iv.hi <= b - 1
    if rel == ">=":
        return iv.lo is not None and iv.lo >= b
    return iv.lo is not None and iv.lo >= b + 1


def symb_atom_eval(resource) -> AtomEval:
    """Atom evaluator over letters ``(prop set, term map)`` built over `resource`."""

    def ev(letter, node: Formula) -> bool:
        props, termmap = letter
        if isinstance(node, Prop):
            return node.name in props
        guard = node.guard
        if guard.term not in resource.terms:
            raise ResourceMismatch(f"term {guard.term} not in resource")
        if guard.bound not in resource.bounds:
            raise ResourceMismatch(f"bound {guard.bound} not in resource")
        return symb_atom_holds(termmap, guard)

    return ev


def eval_symb(footprint, phi: Formula, pos: int = 0) -> bool:
    """Truth of `phi` at `pos` of a footprint (letters are prop sets + term maps).

    Every Atom of `phi` must use a term and bound present in the footprint's
    resource; otherwise ResourceMismatch is raised.
    """
    return eval_lasso(footprint.word, symb_atom_eval(footprint.resource), phi, pos)


# ---------------------------------------------------------------------------
# Parsing and printing

_KEYWORDS = {"X", "U", "S", "F", "G", "true", "false"}


def parse_formula(text: str, n: int | None = None) -> Formula:
    """Parse the formula grammar.

    Precedence: unary (!, X, X-, F, G, G-) > U/S (right associative) > & > |.
    Atoms reuse the guard atom grammar; `n` bounds counter indices when given.
    """
    ts = _TokenStream(_tokenize(text))
    phi = _parse_f_disj(ts, n)
    t = ts.peek()
    if t.kind != "end":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return phi


def _parse_f_disj(ts: _TokenStream, n) -> Formula:
    out = _parse_f_conj(ts, n)
    while ts.peek().text == "|":
        ts.next()
        out = Or(out, _parse_f_conj(ts, n))
    return out


def _parse_f_conj(ts: _TokenStream, n) -> Formula:
    out = _parse_f_until(ts, n)
    while ts.peek().text == "&":
        ts.next()
        out = And(out, _parse_f_until(ts, n))
    return out


def _parse_f_until(ts: _TokenStream, n) -> Formula:
    left = _parse_f_unary(ts, n)
    t = ts.peek()
    if t.kind == "id" and t.text in ("U", "S"):
        ts.next()
        right = _parse_f_until(ts, n)
        return Until(left, right) if t.text == "U" else Since(left, right)
    return left


def _take_dash(ts: _TokenStream, after) -> bool:
    # `X-` / `G-` only when the dash is adjacent to the letter.
    t = ts.peek()
    if t.text == "-" and t.line == after.line and t.col == after.col + len(after.text):
        ts.next()
        return True
    return False


def _parse_f_unary(ts: _TokenStream, n) -> Formula:
    t = ts.peek()
    if t.text == "!":
        ts.next()
        return Not(_parse_f_unary(ts, n))
    if t.kind == "id" and t.text in ("X", "F", "G"):
        ts.next()
        dashed = _take_dash(ts, t)
        sub = _parse_f_unary(ts, n)
        if t.text == "X":
            return Prev(sub) if dashed else Next(sub)
        if t.text == "F":
            if dashed:
                raise ParseError("no operator F-", t.line, t.col)
            return eventually(sub)
        return always_past(sub) if dashed else always(sub)
    return _parse_f_primary(ts, n)


def _parse_f_primary(ts: _TokenStream, n) -> Formula:
    t = ts.peek()
    if t.text == "(":
        ts.next()
        phi = _parse_f_disj(ts, n)
        ts.expect(")")
        return phi
    if t.text == "true":
        ts.next()
        return F_TRUE
    if t.text == "false":
        ts.next()
        return F_FALSE
    if t.kind == "id" and not _COUNTER_RE.match(t.text):
        if t.text in _KEYWORDS:
            ts.error(f"expected a formula, found {t.text!r}")
        ts.next()
        return Prop(t.text)
    g = parse_atom(ts, n)
    return Atom(g.atom)


def format_formula(phi: Formula) -> str:
    """Render in a form `parse_formula` accepts (fully parenthesized core)."""
    if isinstance(phi, Const):
        return "true" if phi.value else "false"
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, Atom):
        return f"({phi.guard})"
    if isinstance(phi, Not):
        return f"!{format_formula(phi.sub)}"
    if isinstance(phi, Next):
        return f"X {format_formula(phi.sub)}"
    if isinstance(phi, Prev):
        return f"X- {format_formula(phi.sub)}"
    if isinstance(phi, And):
        return f"({format_formula(phi.left)} & {format_formula(phi.right)})"
    if isinstance(phi, Or):
        return f"({format_formula(phi.left)} | {format_formula(phi.right)})"
    if isinstance(phi, Until):
        return f"({format_formula(phi.left)} U {format_formula(phi.right)})"
    if isinstance(phi, Since):
        return f"({format_formula(phi.left)} S {format_formula(phi.right)})"
    raise TypeError(f"unknown formula node {phi!r}")
