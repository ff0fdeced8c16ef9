"""Linear constraint systems over loop counts, and exact feasibility.

`build_constraints` turns a valid, disjunction-free path schema plus an
initial configuration into a conjunction of linear (in)equalities over one
variable per non-final loop whose solutions are exactly the iteration
vectors of runs respecting the schema: every loop taken at least once,
counters non-negative and guards satisfied at the first visit of every
transition and at the last visit inside each non-final loop (convexity
covers the visits in between; the final loop is covered by validity).

`feasible` decides feasibility inside a box exactly: depth-first over the
variables in ascending value order, pruning with a rational-arithmetic
simplex relaxation, so the returned witness is the lexicographically least
solution.  `solution_bound` gives the small-solution cutoff used as the box.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from flatmc.model import Configuration, ModelError
from flatmc.schema import PathSchema, is_valid_schema


class HasDisjunction(ModelError):
    """The schema's guards are not plain conjunctions of atoms."""


class NotValid(ModelError):
    """The schema's final loop cannot repeat forever."""


@dataclass(frozen=True)
class LinearAtom:
    """``sum(coeffs[i] * y_{i+1}) rel const`` over the loop-count variables."""

    coeffs: tuple[int, ...]
    rel: str
    const: int

    def holds(self, point: Sequence[int]) -> bool:
        lhs = sum(a * v for a, v in zip(self.coeffs, point))
        if self.rel == "=":
            return lhs == self.const
        if self.rel == "<=":
            return lhs <= self.const
        if self.rel == ">=":
            return lhs >= self.const
        if self.rel == "<":
            return lhs < self.const
        return lhs > self.const

    def __str__(self) -> str:
        if any(self.coeffs):
            lhs = " + ".join(f"{a}*y{i + 1}" for i, a in enumerate(self.coeffs) if a) or "0"
        else:
            lhs = "0"
        return f"{lhs} {self.rel} {self.const}"


@dataclass(frozen=True)
class ConstraintSystem:
    nvars: int
    atoms: tuple[LinearAtom, ...]

    def holds(self, point: Sequence[int]) -> bool:
        return all(a.holds(point) for a in self.atoms)

    def dump(self) -> str:
        return "\n".join(str(a) for a in self.atoms)


class _Affine:
    """Per-counter value ``const + sum(coeffs[i] * y_i)`` while walking a schema."""

    __slots__ = ("const", "coeffs")

    def __init__(self, const: int, nvars: int):
        self.const = const
        self.coeffs = [0] * nvars

    def copy(self) -> "_Affine":
        a = _Affine(self.const, len(self.coeffs))
        a.coeffs = self.coeffs[:]
        return a


def build_constraints(schema: PathSchema, c0: Configuration) -> ConstraintSystem:
    """Characterize the iteration vectors of runs respecting `schema` from `c0`."""
    if any(t.guard.has_disjunction() for t in schema.word()):
        raise HasDisjunction("guards must be conjunctions of atomic guards")
    if not is_valid_schema(schema):
        raise NotValid("final loop cannot repeat forever")
    n = len(c0.values)
    k = schema.nbloops
    nvars = k - 1
    atoms: list[LinearAtom] = []

    def emit(expr_coeffs, expr_const, rel, bound):
        atoms.append(LinearAtom(tuple(expr_coeffs), rel, bound - expr_const))

    def nonneg(vals: list[_Affine]):
        for a in vals:
            emit(a.coeffs, a.const, ">=", 0)

    def guard_rows(vals: list[_Affine], guard):
        conj = guard.as_conjunction()
        for atom in conj:
            coeffs = [0] * nvars
            const = 0
            for idx, coef in atom.term.coeffs:
                const += coef * vals[idx - 1].const
                for v in range(nvars):
                    coeffs[v] += coef * vals[idx - 1].coeffs[v]
            emit(coeffs, const, atom.rel, atom.bound)

    # each non-final loop taken at least once
    for v in range(nvars):
        unit = [0] * nvars
        unit[v] = 1
        atoms.append(LinearAtom(tuple(unit), ">=", 1))

    vals = [_Affine(x, nvars) for x in c0.values]
    for part_idx, (segment, loop) in enumerate(zip(schema.segments, schema.loops)):
        for t in segment:
            nonneg(vals)
            guard_rows(vals, t.guard)
            for i, d in enumerate(t.update):
                vals[i].const += d
        loop_eff = [0] * n
        for t in loop:
            for i, d in enumerate(t.update):
                loop_eff[i] += d
        if part_idx < k - 1:
            # first visit of each loop transition, then the last visit
            # (entry values shifted by (y-1) copies of the loop effect)
            last = [a.copy() for a in vals]
            for i in range(n):
                last[i].coeffs[part_idx] += loop_eff[i]
                last[i].const -= loop_eff[i]
            for t in loop:
                nonneg(vals)
                guard_rows(vals, t.guard)
                nonneg(last)
                guard_rows(last, t.guard)
                for i, d in enumerate(t.update):
                    vals[i].const += d
                    last[i].const += d
            # value after the loop: entry + y * effect
            for i in range(n):
                vals[i].const -= loop_eff[i]
                vals[i].coeffs[part_idx] += loop_eff[i]
        else:
            # final loop: first visit only; validity covers repetition
            for t in loop:
                nonneg(vals)
                guard_rows(vals, t.guard)
                for i, d in enumerate(t.update):
                    vals[i].const += d

    length = schema.length()
    n_guard_atoms = sum(len(t.guard.as_conjunction()) for t in schema.word())
    assert len(atoms) <= 2 * length * (1 + n + n_guard_atoms) + nvars
    size = max(2, n, 1 + n_guard_atoms)
    assert len(atoms) <= length * 2 * size * size + nvars
    return ConstraintSystem(nvars, tuple(atoms))


# ---------------------------------------------------------------------------
# Normalization and bounds


def normalize_ge(atoms: Iterable[LinearAtom]) -> list[tuple[tuple[int, ...], int]]:
    """Rewrite every atom into >=-form rows ``(coeffs, const)``."""
    rows = []
    for a in atoms:
        if a.rel == ">=":
            rows.append((a.coeffs, a.const))
        elif a.rel == ">":
            rows.append((a.coeffs, a.const + 1))
        elif a.rel == "<=":
            rows.append((tuple(-c for c in a.coeffs), -a.const))
        elif a.rel == "<":
            rows.append((tuple(-c for c in a.coeffs), -(a.const - 1)))
        else:
            rows.append((a.coeffs, a.const))
            rows.append((tuple(-c for c in a.coeffs), -a.const))
    return rows


def solution_bound(system: ConstraintSystem, extra: Iterable[LinearAtom] = (), growth: int = 2) -> int:
    """Small-solution cutoff: a feasible system has a solution within the box.

    Computed as ``max(V, M) ** (growth * U)`` from the >=-normalized rows: V
    variables, U rows, M the largest absolute coefficient or constant.  The
    exponent multiplier defaults to 2 and is configurable (--bt-constant).
    """
    rows = normalize_ge(tuple(system.atoms) + tuple(extra))
    u = max(1, len(rows))
    m = 1
    for coeffs, const in rows:
        m = max(m, abs(const), *(abs(c) for c in coeffs)) if coeffs else max(m, abs(const))
    v = max(1, system.nvars)
    return max(v, m) ** (growth * u)


# ---------------------------------------------------------------------------
# Exact LP (two-phase simplex over Fractions)


def _pivot(tableau, basis, obj, row, col):
    piv = tableau[row][col]
    tableau[row] = [x / piv for x in tableau[row]]
    pivot_row = tableau[row]
    for i, r in enumerate(tableau):
        if i != row and r[col] != 0:
            f = r[col]
            tableau[i] = [a - f * b for a, b in zip(r, pivot_row)]
    f = obj[col]
    if f != 0:
        for j in range(len(obj)):
            obj[j] -= f * pivot_row[j]
    basis[row] = col


def _run_simplex(tableau, basis, cost, allowed):
    """Minimize; Bland's rule over `allowed` columns.  Returns None if unbounded.

    Keeps the reduced-cost row explicitly; `obj[-1]` is minus the objective
    value of the current basic solution.
    """
    nrows = len(tableau)
    width = len(tableau[0])
    obj = list(cost) + [Fraction(0)]
    for i in range(nrows):
        f = obj[basis[i]]
        if f != 0:
            row = tableau[i]
            for j in range(width):
                obj[j] -= f * row[j]
    while True:
        enter = None
        for j in allowed:
            if obj[j] < 0:
                enter = j
                break
        if enter is None:
            return -obj[-1]
        leave = None
        best = None
        for i in range(nrows):
            coef = tableau[i][enter]
            if coef > 0:
                ratio = tableau[i][-1] / coef
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave is None:
            return None
        _pivot(tableau, basis, obj, leave, enter)


def _lp_min(rows: list[tuple[Sequence[int], int]], lo: list[int], hi: list, objective: Sequence[int] | None):
    """Minimum of objective over {y : rows, lo <= y <= hi}, or None if empty.

    `hi` entries may be None (unbounded above).  With objective None,
    returns 0 on feasibility.  Exact rationals.
    """
    n = len(lo)
    if any(h is not None and l > h for l, h in zip(lo, hi)):
        return None
    # shift to z = y - lo >= 0; constraints in <= form
    cons: list[tuple[list[Fraction], Fraction]] = []
    for coeffs, const in rows:
        shifted = const - sum(a * l for a, l in zip(coeffs, lo))
        cons.append(([Fraction(-a) for a in coeffs], Fraction(-shifted)))
    for j in range(n):
        if hi[j] is None:
            continue
        ub = hi[j] - lo[j]
        row = [Fraction(0)] * n
        row[j] = Fraction(1)
        cons.append((row, Fraction(ub)))
    nrows = len(cons)
    ncols = n + nrows  # structural + slack; artificials appended as needed
    tableau = []
    basis = []
    art_cols = []
    for i, (coeffs, rhs) in enumerate(cons):
        row = list(coeffs) + [Fraction(0)] * nrows + [rhs]
        row[n + i] = Fraction(1)
        if rhs < 0:
            row = [-x for x in row]
            tableau.append(row)
            basis.append(None)
            art_cols.append(i)
        else:
            tableau.append(row)
            basis.append(n + i)
    if art_cols:
        width = ncols + len(art_cols)
        for idx, row in enumerate(tableau):
            rhs = row.pop()
            row.extend([Fraction(0)] * len(art_cols))
            row.append(rhs)
        for a_idx, row_i in enumerate(art_cols):
            tableau[row_i][ncols + a_idx] = Fraction(1)
            basis[row_i] = ncols + a_idx
        total = width + 1
        cost1 = [Fraction(0)] * width
        for a_idx in range(len(art_cols)):
            cost1[ncols + a_idx] = Fraction(1)
        val = _run_simplex(tableau, basis, cost1, range(width))
        if val is None or val > 0:
            return None
        allowed = range(ncols)
    else:
        width = ncols
        allowed = range(ncols)
    if objective is None:
        return Fraction(0)
    cost2 = [Fraction(0)] * width
    for j in range(n):
        cost2[j] = Fraction(objective[j])
    val = _run_simplex(tableau, basis, cost2, allowed)
    if val is None:
        return None  # unbounded below (cannot happen inside a finite box)
    shift = sum(objective[j] * lo[j] for j in range(n))
    return val + shift


def _lp_feasible(rows, lo, hi) -> bool:
    return _lp_min(rows, lo, hi, None) is not None


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _floor_div(a: int, b: int) -> int:
    return a // b


def _tighten(rows, lo, hi, rounds: int = 30) -> bool:
    """Interval propagation over >=-rows; False when a box empties.

    `hi` entries may be None (unbounded above).
    """
    sparse = [
        (tuple((j, a) for j, a in enumerate(coeffs) if a), const) for coeffs, const in rows
    ]
    for _ in range(rounds):
        changed = False
        for entries, const in sparse:
            for k, ak in entries:
                rest_max = 0
                unbounded = False
                for j, a in entries:
                    if j == k:
                        continue
                    if a > 0:
                        if hi[j] is None:
                            unbounded = True
                            break
                        rest_max += a * hi[j]
                    else:
                        rest_max += a * lo[j]
                if unbounded:
                    continue
                need = const - rest_max  # ak * y_k >= need
                if ak > 0:
                    nb = _ceil_div(need, ak)
                    if nb > lo[k]:
                        lo[k] = nb
                        changed = True
                else:
                    nb = _floor_div(need, ak)
                    if hi[k] is None or nb < hi[k]:
                        hi[k] = nb
                        changed = True
                if hi[k] is not None and lo[k] > hi[k]:
                    return False
        if not changed:
            break
    return True


def merge_rows(rows):
    """Drop duplicate rows, keeping the strongest constant per coefficient row."""
    merged: dict = {}
    for coeffs, const in rows:
        if coeffs not in merged or merged[coeffs] < const:
            merged[coeffs] = const
    return list(merged.items())


def _drop_satisfied(rows, lo, hi):
    """Remove rows already implied by the variable bounds."""
    kept = []
    for coeffs, const in rows:
        row_min = 0
        unbounded = False
        for j, a in enumerate(coeffs):
            if a > 0:
                row_min += a * lo[j]
            elif a < 0:
                if hi[j] is None:
                    unbounded = True
                    break
                row_min += a * hi[j]
        if not unbounded and row_min >= const:
            continue
        kept.append((coeffs, const))
    return kept


def feasible(
    system: ConstraintSystem, extra: Iterable[LinearAtom] = (), box_hi: int = 1
) -> tuple[int, ...] | None:
    """Lexicographically least point of ``[1, box_hi]^n`` satisfying everything.

    Exact: depth-first value search per variable, pruned by the rational
    relaxation, so `None` means no integer point exists inside the box.
    """
    if box_hi < 1:
        raise ValueError("box_hi must be >= 1")
    extra = tuple(extra)
    n = system.nvars
    all_atoms = tuple(system.atoms) + extra
    rows_all = normalize_ge(all_atoms)
    ground_ok = all(const <= 0 for coeffs, const in rows_all if not any(coeffs))
    if not ground_ok:
        return None
    if n == 0:
        return ()
    # merge duplicate rows, keep the stronger constant
    merged: dict[tuple[int, ...], int] = {}
    for coeffs, const in rows_all:
        if not any(coeffs):
            continue
        if coeffs not in merged or merged[coeffs] < const:
            merged[coeffs] = const
    rows = [(c, d) for c, d in merged.items()]
    lo = [1] * n
    hi = [box_hi] * n
    if not _tighten(rows, lo, hi):
        return None
    rows = _drop_satisfied(rows, lo, hi)

    def residual(rows_in, j, value):
        out = []
        for coeffs, const in rows_in:
            out.append((coeffs, const - coeffs[j] * value, ))
        return [(tuple(c for i, c in enumerate(coeffs) if i != j), const) for (coeffs, const) in out]

    def dfs(rows_in, lo_in, hi_in, acc):
        m = len(lo_in)
        if m == 0:
            if all(const <= 0 for coeffs, const in rows_in):
                point = tuple(acc)
                assert all(a.holds(point) for a in all_atoms)
                return point
            return None
        obj = [0] * m
        obj[0] = 1
        least = _lp_min(rows_in, lo_in, hi_in, obj)
        if least is None:
            return None
        start = max(lo_in[0], -((-least.numerator) // least.denominator))
        obj[0] = -1
        most = _lp_min(rows_in, lo_in, hi_in, obj)
        stop = min(hi_in[0], (-most).numerator // (-most).denominator) if most is not None else hi_in[0]
        for value in range(start, stop + 1):
            sub_rows = residual(rows_in, 0, value)
            sub_lo, sub_hi = lo_in[1:], hi_in[1:]
            if m > 1:
                sub_lo, sub_hi = list(sub_lo), list(sub_hi)
                if not _tighten(sub_rows, sub_lo, sub_hi, rounds=6):
                    continue
                sub_rows = _drop_satisfied(sub_rows, sub_lo, sub_hi)
                if not _lp_feasible(sub_rows, sub_lo, sub_hi):
                    continue
            found = dfs(sub_rows, list(sub_lo), list(sub_hi), acc + [value])
            if found is not None:
                return found
        return None

    return dfs(rows, lo, hi, [])
