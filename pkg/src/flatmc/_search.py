"""Pruned whole-system search for pure-future formulas.

Semantically this is the same candidate space as the nested loops in
`checker` (minimal schema x unfolding x capped counts x feasibility), but
organized as a single depth-first walk over (control state, term map) nodes
so that work is shared between the exponentially many minimal schemas that
differ only in which optional loops they take.

For a pure-future formula the truth of every subformula at a position is a
function of the letter there and the truth vector at the next position, so
a word folds right-to-left into truth vectors (the byte-vector stepping is
a compiled kernel).  When the annotated node space is small enough we
precompute, for every node, the set of vectors achievable by *some*
infinite continuation (a backward fixpoint seeded by the stabilized vectors
of repeatable annotated cycles) and thread forward the set of acceptable
vectors; a branch dies exactly when no continuation can make the formula
true at position 0.  On node-space overflow the same walk runs without
acceptance sets, pruned only by guard entailment and the rational
relaxation of the accumulated constraint rows.

Loop phases are walked once per class-group (count classes folding to the
same acceptance set); the concrete class pattern is chosen at candidate
resolution by a lexicographic search pruned with the relaxation, followed by
the symbolic evaluation and the exact feasibility test from the naive path.
Every prune is conservative, so verdicts agree with the naive search.
"""

from __future__ import annotations

from dataclasses import dataclass

from flatmc.model import Configuration, CounterSystem, state_cycles
from flatmc.linear import (
    LinearAtom,
    _drop_satisfied,
    _lp_min,
    _tighten,
    build_constraints,
    feasible,
    merge_rows,
    normalize_ge,
    solution_bound,
)
from flatmc.pltl import (
    And,
    Atom,
    Const,
    LassoWord,
    Next,
    Not,
    Or,
    Prop,
    Until,
    _tables,
    eval_symb,
    subformulas,
    symb_atom_eval,
    symb_atom_holds,
    temporal_depth,
)
from flatmc.schema import PathSchema, is_valid_schema, lasso_of
from flatmc.stutter import cap_for
from flatmc.termmaps import TermMap, entails, map_of_valuation, proj, resource_of, term_drift
from flatmc.unfold import make_utrans, target_maps

_CLOSURE_CAP = 60000
_TRAVERSAL_CAP = 64


class _Overflow(Exception):
    """Annotation product too large for precomputed acceptance sets."""


class _Program:
    """Backward stepping of all subformulas as byte vectors (kernel-backed).

    Truth vectors are `bytes` of 0/1 flags, children before parents, so one
    kernel pass per letter computes a position's vector from its successor.
    """

    _CODES = {"leaf": 0, "not": 1, "and": 2, "or": 3, "next": 4, "until": 5}

    def __init__(self, phi):
        from array import array

        from flatmc import evalcore

        self.nodes = subformulas(phi)
        index = {f: i for i, f in enumerate(self.nodes)}
        self.index = index
        self.phi_bit = index[phi]
        codes = bytearray()
        arg_a = array("i")
        arg_b = array("i")
        for f in self.nodes:
            if isinstance(f, (Const, Prop, Atom)):
                kind, a, b = "leaf", 0, 0
            elif isinstance(f, Not):
                kind, a, b = "not", index[f.sub], 0
            elif isinstance(f, And):
                kind, a, b = "and", index[f.left], index[f.right]
            elif isinstance(f, Or):
                kind, a, b = "or", index[f.left], index[f.right]
            elif isinstance(f, Next):
                kind, a, b = "next", index[f.sub], 0
            elif isinstance(f, Until):
                kind, a, b = "until", index[f.left], index[f.right]
            else:
                raise ValueError("past operators have no pure-future stepping")
            codes.append(self._CODES[kind])
            arg_a.append(a)
            arg_b.append(b)
        self.codes = bytes(codes)
        self.arg_a = arg_a
        self.arg_b = arg_b
        self.size = len(self.nodes)
        self._step = evalcore.prog_step
        self._scratch = bytearray(self.size)

    def step(self, leafbits: bytes, vnext: bytes) -> bytes:
        out = self._scratch
        self._step(self.codes, self.arg_a, self.arg_b, leafbits, vnext, out)
        return bytes(out)

    def fold(self, letters, v: bytes) -> bytes:
        for bits in reversed(letters):
            v = self.step(bits, v)
        return v

    def fold_power(self, letters, times: int, v: bytes) -> bytes:
        for _ in range(times):
            v = self.fold(letters, v)
        return v


@dataclass
class _Edge:
    target: tuple
    letters: tuple


class _RowWalk:
    """Incremental prefix of a candidate's constraint rows.

    Mirrors the full construction in `linear.build_constraints` with loop
    counts left free (>= 1); a prefix's rows are a subset of every
    completion's rows, so rational infeasibility soundly prunes a subtree.
    """

    def __init__(self, values):
        self.consts = list(values)
        self.coeffs = [dict() for _ in values]
        self.rows: list[tuple[dict, int]] = []  # (var -> coef, const) meaning >=
        self.row_keys: set = set()
        self.nvars = 0
        self.var_lo: list[int] = []
        self.var_hi: list = []
        self.infeasible_ground = False

    def _propagate_row(self, coeff: dict, const: int):
        # one pass of interval propagation for a single fresh row
        lo, hi = self.var_lo, self.var_hi
        for k, ak in coeff.items():
            rest = const
            unbounded = False
            for j, aj in coeff.items():
                if j == k:
                    continue
                if aj > 0:
                    if hi[j] is None:
                        unbounded = True
                        break
                    rest -= aj * hi[j]
                else:
                    rest -= aj * lo[j]
            if unbounded:
                continue
            if ak > 0:
                nb = -((-rest) // ak)
                if nb > lo[k]:
                    lo[k] = nb
            else:
                nb = rest // ak
                if hi[k] is None or nb < hi[k]:
                    hi[k] = nb
            if hi[k] is not None and lo[k] > hi[k]:
                self.infeasible_ground = True
                return

    def _emit_ge(self, coeff: dict, const: int):
        if coeff:
            key = (tuple(sorted(coeff.items())), const)
            if key not in self.row_keys:
                self.row_keys.add(key)
                self.rows.append((coeff, const))
                self._propagate_row(coeff, const)
        elif const > 0:
            self.infeasible_ground = True

    def _emit(self, coeff: dict, rel: str, const: int):
        if rel in (">=", ">"):
            self._emit_ge(coeff, const + (rel == ">"))
        elif rel in ("<=", "<"):
            self._emit_ge({v: -c for v, c in coeff.items()}, -(const - (rel == "<")))
        else:
            self._emit_ge(coeff, const)
            self._emit_ge({v: -c for v, c in coeff.items()}, -const)

    def _value_rows(self, consts, coeffs, guard):
        for i in range(len(consts)):
            self._emit_ge(dict(coeffs[i]), -consts[i])
        for atom in guard.as_conjunction():
            combined: dict = {}
            const = 0
            for idx, coef in atom.term.coeffs:
                const += coef * consts[idx - 1]
                for v, c in coeffs[idx - 1].items():
                    combined[v] = combined.get(v, 0) + coef * c
            combined = {v: c for v, c in combined.items() if c}
            self._emit(combined, atom.rel, atom.bound - const)

    def transition(self, tr):
        self._value_rows(self.consts, self.coeffs, tr.guard)
        for i, d in enumerate(tr.update):
            self.consts[i] += d

    def nonneg(self):
        for i in range(len(self.consts)):
            self._emit_ge(dict(self.coeffs[i]), -self.consts[i])

    def advance(self, update):
        for i, d in enumerate(update):
            self.consts[i] += d

    def term_affine(self, term):
        """Current affine expression of a term: (coeff dict, const)."""
        combined: dict = {}
        const = 0
        for idx, coef in term.coeffs:
            const += coef * self.consts[idx - 1]
            for v, c in self.coeffs[idx - 1].items():
                combined[v] = combined.get(v, 0) + coef * c
        return {v: c for v, c in combined.items() if c}, const

    def pin_term(self, term, drift: int, cell):
        """Rows pinning the post-update term value into `cell`."""
        combined, const = self.term_affine(term)
        # post-update value = affine + drift
        if cell.lo is not None:
            self._emit_ge(dict(combined), cell.lo - drift - const)
        if cell.hi is not None:
            self._emit_ge({v: -c for v, c in combined.items()}, -(cell.hi - drift - const))

    def bounds_ok(self) -> bool:
        """False when the incrementally propagated bounds emptied."""
        return not self.infeasible_ground

    def loop(self, word):
        """A repeatable copy with a fresh, free count variable (>= 1)."""
        var = self.nvars
        self.nvars += 1
        self.var_lo.append(1)
        self.var_hi.append(None)
        eff = [0] * len(self.consts)
        for ut in word:
            for i, d in enumerate(ut.update):
                eff[i] += d
        last_consts = [c - e for c, e in zip(self.consts, eff)]
        last_coeffs = [dict(cf) for cf in self.coeffs]
        for i, e in enumerate(eff):
            if e:
                last_coeffs[i][var] = last_coeffs[i].get(var, 0) + e
        for ut in word:
            self._value_rows(self.consts, self.coeffs, ut.guard)
            self._value_rows(last_consts, last_coeffs, ut.guard)
            for i, d in enumerate(ut.update):
                self.consts[i] += d
                last_consts[i] += d
        for i, e in enumerate(eff):
            self.consts[i] -= e
            if e:
                self.coeffs[i][var] = self.coeffs[i].get(var, 0) + e

    def copy(self) -> "_RowWalk":
        other = _RowWalk.__new__(_RowWalk)
        other.consts = list(self.consts)
        other.coeffs = [dict(cf) for cf in self.coeffs]
        other.rows = list(self.rows)
        other.row_keys = set(self.row_keys)
        other.nvars = self.nvars
        other.var_lo = list(self.var_lo)
        other.var_hi = list(self.var_hi)
        other.infeasible_ground = self.infeasible_ground
        return other

    def relaxation_feasible(self) -> bool:
        if self.infeasible_ground:
            return False
        n = self.nvars
        mat = []
        for coeff, const in self.rows:
            vec = [0] * n
            for v, c in coeff.items():
                vec[v] = c
            mat.append((tuple(vec), const))
        lo = [1] * n
        hi: list = [None] * n
        if not _tighten(mat, lo, hi, rounds=6):
            return False
        mat = _drop_satisfied(mat, lo, hi)
        return _lp_min(mat, lo, hi, None) is not None


class _Search:
    def __init__(self, system: CounterSystem, c0: Configuration, phi, cfg, budget):
        self.system = system
        self.c0 = c0
        self.phi = phi
        self.cfg = cfg
        self.budget = budget
        self.cap_value = cap_for(temporal_depth(phi))
        self.resource = resource_of(system, phi)
        self.terms = self.resource.sorted_terms
        self.program = _Program(phi)
        self.cycles = state_cycles(system)
        self.cycle_ids = {q: frozenset(t.index for t in rot) for q, rot in self.cycles.items()}
        self.atom_eval = symb_atom_eval(self.resource)
        # phases of one cycle advance some term's cell irreversibly
        self.phase_cap = self.resource.chain_bound() + 2
        self._letterbits: dict = {}
        self._copies: dict = {}
        self._stable: dict = {}
        self._omega: dict = {}
        self._fold_cache: dict = {}
        self.graph: dict[tuple, list[_Edge]] = {}
        self.finals: dict[tuple, list] = {}
        self.reach: dict[tuple, frozenset] = {}
        self.exact = True  # acceptance sets available
        self.memo: set = set()
        self.use_memo = system.n == 0
        if self.use_memo:
            self._fwd_states, self._fwd_edges, self._fwd_cycles = self._forward_closures()

    # -- letters -----------------------------------------------------------

    def letterbits(self, node) -> bytes:
        bits = self._letterbits.get(node)
        if bits is None:
            q, m = node
            props = self.system.label(q) & self.resource.props
            buf = bytearray(self.program.size)
            for i, f in enumerate(self.program.nodes):
                if isinstance(f, Const):
                    buf[i] = f.value
                elif isinstance(f, Prop):
                    buf[i] = f.name in props
                elif isinstance(f, Atom):
                    buf[i] = symb_atom_holds(m, f.guard)
            bits = bytes(buf)
            self._letterbits[node] = bits
        return bits

    # -- annotated moves ----------------------------------------------------

    def copy_traversals(self, node):
        """All consistent annotated traversals of the node's cycle.

        Only used while acceptance sets are available; raises _Overflow when
        the annotation product explodes, which routes the search into the
        guided mode.
        """
        out = self._copies.get(node)
        if out is None:
            q, m = node
            rotation = self.cycles[q]
            out = []

            def go(m_cur, i, acc):
                self.budget.tick("nodes")
                if len(out) > _TRAVERSAL_CAP:
                    raise _Overflow
                if i == len(rotation):
                    out.append((tuple(acc), m_cur))
                    return
                t = rotation[i]
                if not entails(m_cur, t.guard):
                    return
                for m2 in target_maps(m_cur, t, self.resource, True):
                    acc.append(make_utrans(t, m_cur, m2, self.resource))
                    go(m2, i + 1, acc)
                    acc.pop()

            go(m, 0, [])
            self._copies[node] = out
        return out

    def guided_words(self, rows, m, seq):
        """Annotated traversals of `seq` from map `m`, value-pruned.

        Terms whose post-update affine expressions coincide must share a
        cell; each pinned cell adds its rows, and branches whose integer
        relaxation empties are dropped.  Yields (word, end map, end rows).
        """
        iset = self.resource.iset

        def at_pos(i, m_cur, rows_cur, acc):
            self.budget.tick("nodes")
            if i == len(seq):
                yield tuple(acc), m_cur, rows_cur
                return
            t = seq[i]
            if not entails(m_cur, t.guard):
                return
            base = rows_cur.copy()
            base.nonneg()
            groups: dict = {}
            for term in self.terms:
                combined, const = base.term_affine(term)
                drift = term_drift(term, t.update)
                key = (tuple(sorted(combined.items())), const + drift)
                groups.setdefault(key, []).append(term)
            group_list = list(groups.values())

            def choose(gi, assignment, rows_g):
                if gi == len(group_list):
                    m2 = TermMap.of(assignment)
                    ut = make_utrans(t, m_cur, m2, self.resource)
                    rows_n = rows_g.copy()
                    rows_n.advance(t.update)
                    yield from at_pos(i + 1, m2, rows_n, acc + [ut])
                    return
                members = group_list[gi]
                candidates = None
                for term in members:
                    shifted = m_cur.get(term).shift(term_drift(term, t.update))
                    cells = [c for c in iset.intervals if c.overlaps(shifted)]
                    if candidates is None:
                        candidates = cells
                    else:
                        candidates = [c for c in candidates if c in cells]
                for cell in candidates or ():
                    rows_c = rows_g.copy()
                    for term in members:
                        rows_c.pin_term(term, term_drift(term, t.update), cell)
                    if not rows_c.bounds_ok():
                        continue
                    yield from choose(gi + 1, assignment + [(term2, cell) for term2 in members], rows_c)

            yield from choose(0, [], base)

        yield from at_pos(0, m, rows, [])

    def closure_words(self, node, rows):
        """Repeatable annotated cycles from this node, value-pruned when the
        precomputed traversal table is unavailable."""
        if self.exact:
            return [(w, None) for w in self.stable_cycles(node)]
        q, m = node
        rotation = self.cycles.get(q)
        if rotation is None:
            return []
        eff = [0] * self.system.n
        for t in rotation:
            for i, d in enumerate(t.update):
                eff[i] += d
        if any(d < 0 for d in eff):
            return []
        drifts = {t: term_drift(t, eff) for t in self.terms}
        out = []
        for word, m_end, _ in self.guided_words(rows, m, rotation):
            if m_end != m:
                continue
            ok = True
            for ut in word:
                for t in self.terms:
                    cell = ut.source[1].get(t)
                    d = drifts[t]
                    if (d > 0 and cell.hi is not None) or (d < 0 and cell.lo is not None):
                        ok = False
            if ok:
                out.append((word, None))
        return out

    def stable_cycles(self, node):
        """Annotated cycle traversals that can repeat forever from this map."""
        out = self._stable.get(node)
        if out is None:
            q, m = node
            rotation = self.cycles.get(q)
            out = []
            if rotation is not None:
                eff = [0] * self.system.n
                for t in rotation:
                    for i, d in enumerate(t.update):
                        eff[i] += d
                if all(d >= 0 for d in eff):
                    drifts = {t: term_drift(t, eff) for t in self.terms}
                    for word, m_end in self.copy_traversals(node):
                        if m_end != m:
                            continue
                        ok = True
                        for ut in word:
                            for t in self.terms:
                                cell = ut.source[1].get(t)
                                d = drifts[t]
                                if (d > 0 and cell.hi is not None) or (d < 0 and cell.lo is not None):
                                    ok = False
                        if ok:
                            out.append(word)
            self._stable[node] = out
        return out

    def omega_vector(self, word) -> bytes:
        """Exact truth vector at the start of a purely periodic annotated cycle.

        On a periodic word all pure-future values are periodic from position
        0, so one cyclic pass per operator suffices.
        """
        from flatmc import evalcore

        leaf_rows = tuple(self.letterbits((ut.source[0], ut.source[1])) for ut in word)
        v = self._omega.get(leaf_rows)
        if v is None:
            length = len(leaf_rows)
            tables = []
            for i, f in enumerate(self.program.nodes):
                dst = bytearray(length)
                if isinstance(f, (Const, Prop, Atom)):
                    for p in range(length):
                        dst[p] = leaf_rows[p][i]
                elif isinstance(f, Not):
                    evalcore.bnot(tables[self.program.index[f.sub]], dst)
                elif isinstance(f, And):
                    evalcore.band(
                        tables[self.program.index[f.left]],
                        tables[self.program.index[f.right]],
                        dst,
                    )
                elif isinstance(f, Or):
                    evalcore.bor(
                        tables[self.program.index[f.left]],
                        tables[self.program.index[f.right]],
                        dst,
                    )
                elif isinstance(f, Next):
                    src_t = tables[self.program.index[f.sub]]
                    for p in range(length):
                        dst[p] = src_t[(p + 1) % length]
                else:  # Until: cyclic resolution over the whole period
                    evalcore.until_pass(
                        tables[self.program.index[f.left]],
                        tables[self.program.index[f.right]],
                        dst,
                        length,
                    )
                tables.append(bytes(dst))
            v = bytes(tables[i][0] for i in range(self.program.size))
            self._omega[leaf_rows] = v
        return v

    # -- achievable-vector sets ---------------------------------------------

    def _expand(self, root) -> bool:
        todo = [root]
        count = 0
        while todo:
            node = todo.pop()
            if node in self.graph:
                continue
            count += 1
            if count > _CLOSURE_CAP:
                return False
            if count % 4096 == 0 and self.cfg.timeout is not None:
                self.budget.tick("nodes")
            self.budget.tick("nodes")
            q, m = node
            edges: list[_Edge] = []
            for t in self.system.out(q):
                if not entails(m, t.guard):
                    continue
                for m2 in target_maps(m, t, self.resource, True):
                    nxt = (t.target, m2)
                    edges.append(_Edge(nxt, (self.letterbits(node),)))
                    todo.append(nxt)
            if q in self.cycles:
                try:
                    traversals = self.copy_traversals(node)
                except _Overflow:
                    return False
                for word, m_end in traversals:
                    nxt = (q, m_end)
                    letters = tuple(self.letterbits((ut.source[0], ut.source[1])) for ut in word)
                    edges.append(_Edge(nxt, letters))
                    todo.append(nxt)
            self.graph[node] = edges
            self.finals[node] = [self.omega_vector(w) for w in self.stable_cycles(node)]
        return True

    def _fixpoint(self):
        # worklist: each (target vector, incoming edge) folded exactly once
        reach: dict[tuple, set] = {node: set() for node in self.graph}
        incoming: dict[tuple, list] = {node: [] for node in self.graph}
        for node, edges in self.graph.items():
            for e in edges:
                if e.target in incoming:
                    incoming[e.target].append((node, e))
        work = []
        for node, vs in self.finals.items():
            for v in vs:
                if v not in reach[node]:
                    reach[node].add(v)
                    work.append((node, v))
        while work:
            self.budget.tick("nodes")
            node, v = work.pop()
            for src_node, e in incoming[node]:
                folded = self.program.fold(e.letters, v)
                if folded not in reach[src_node]:
                    reach[src_node].add(folded)
                    work.append((src_node, folded))
        self.reach = {node: frozenset(vs) for node, vs in reach.items()}

    def _forward_closures(self):
        states = {}
        edges = {}
        cyc = {}
        for q in self.system.states:
            seen = {q}
            stack = [q]
            eset = set()
            cset = set()
            while stack:
                s = stack.pop()
                if s in self.cycle_ids:
                    cset.add(self.cycle_ids[s])
                for t in self.system.out(s):
                    eset.add(t.index)
                    if t.target not in seen:
                        seen.add(t.target)
                        stack.append(t.target)
            states[q] = frozenset(seen)
            edges[q] = frozenset(eset)
            cyc[q] = frozenset(cset)
        return states, edges, cyc

    # -- search --------------------------------------------------------------

    def run(self):
        from flatmc import checker

        root = (self.c0.state, map_of_valuation(self.terms, self.resource.iset, self.c0.values))
        self.exact = self._expand(root)
        if self.exact:
            self._fixpoint()
            acc0 = frozenset(v for v in self.reach.get(root, ()) if v[self.program.phi_bit])
        else:
            self.graph.clear()
            self.finals.clear()
            self._copies.clear()
            acc0 = None
        rows0 = _RowWalk(self.c0.values)
        witness = self._walk(root, acc0, frozenset({root[0]}), frozenset(), frozenset(), [], rows0)
        if witness is not None:
            return checker.Verdict(checker.SAT, witness, self.budget.stats())
        return checker.Verdict(checker.UNSAT, stats=self.budget.stats())

    def _memo_key(self, node, acc, visited, p_used, taken):
        q, m = node
        return (
            q,
            m,
            acc,
            visited & self._fwd_states[q],
            p_used & self._fwd_edges[q],
            frozenset(c for c in taken if c in self._fwd_cycles[q]),
        )

    def fold_cached(self, letters, v: bytes) -> bytes:
        key = (letters, v)
        out = self._fold_cache.get(key)
        if out is None:
            out = self.program.fold(letters, v)
            self._fold_cache[key] = out
        return out

    def _filter(self, universe, transform, acc):
        if acc is None:
            return None
        return frozenset(v for v in universe if transform(v) in acc)

    def _walk(self, node, acc, visited, p_used, taken, events, rows):
        if acc is not None and not acc:
            return None
        self.budget.tick("nodes")
        key = None
        if self.use_memo and self.exact:
            key = self._memo_key(node, acc, visited, p_used, taken)
            if key in self.memo:
                return None
        q, m = node
        cyc_id = self.cycle_ids.get(q)
        if cyc_id is not None and cyc_id not in taken:
            w = self._cycle_event(node, cyc_id, acc, visited, p_used, taken, events, 0, None, rows)
            if w is not None:
                return w
        bits = (self.letterbits(node),)
        for t in self.system.out(q):
            if t.index in p_used or t.target in visited:
                continue
            for word, m2, rows2 in self.guided_words(rows, m, (t,)):
                nxt = (t.target, m2)
                acc2 = self._filter(self.reach.get(nxt, ()), lambda v: self.fold_cached(bits, v), acc)
                if acc2 is not None and not acc2:
                    continue
                events.append(("step", word[0]))
                w = self._walk(nxt, acc2, visited | {t.target}, p_used | {t.index}, taken, events, rows2)
                events.pop()
                if w is not None:
                    return w
        if key is not None:
            self.memo.add(key)
        return None

    def _cycle_event(self, node, cyc_id, acc, visited, p_used, taken, events, phases, prev_copy, rows):
        """Phases of the cycle at `node`: close forever, exit, or add a phase."""
        self.budget.tick("nodes")
        q, m = node
        for word, _ in self.closure_words(node, rows):
            if acc is None or self.omega_vector(word) in acc:
                w = self._resolve(events + [("omega", word)])
                if w is not None:
                    return w
        if phases >= 1:
            w = self._walk(node, acc, visited, p_used, taken | {cyc_id}, events, rows)
            if w is not None:
                return w
        if phases >= self.phase_cap:
            return None
        for word, m_end, rows_end in self.guided_words(rows, m, self.cycles[q]):
            if word == prev_copy:
                continue  # an identical adjacent phase folds into a larger class
            nxt = (q, m_end)
            letters = tuple(self.letterbits((u.source[0], u.source[1])) for u in word)
            if m_end == m:
                # group count classes by the acceptance set they induce and
                # walk each group once; the class itself is picked during
                # candidate resolution
                groups: dict = {}
                order: list = []
                universe = self.reach.get(nxt, frozenset()) if self.exact else ()
                iterates = {v: v for v in universe}
                for klass in range(1, self.cap_value + 1):
                    if acc is not None:
                        for v in universe:
                            iterates[v] = self.fold_cached(letters, iterates[v])
                        acc2 = frozenset(v for v in universe if iterates[v] in acc)
                        if not acc2:
                            continue
                        gkey = acc2
                    else:
                        gkey = True
                    if gkey in groups:
                        groups[gkey].append(klass)
                    else:
                        groups[gkey] = [klass]
                        order.append(gkey)
                rows2 = None
                for gkey in order:
                    members = tuple(groups[gkey])
                    acc2 = gkey if gkey is not True else None
                    if rows2 is None:
                        rows2 = rows.copy()
                        rows2.loop(word)
                        if not rows2.bounds_ok():
                            break
                    events.append(("phase", cyc_id, word, members, True))
                    w = self._cycle_event(
                        nxt, cyc_id, acc2, visited, p_used, taken, events, phases + 1, word, rows2
                    )
                    events.pop()
                    if w is not None:
                        return w
            else:
                acc2 = self._filter(
                    self.reach.get(nxt, ()), lambda v: self.fold_cached(letters, v), acc
                )
                if acc2 is not None and not acc2:
                    continue
                events.append(("phase", cyc_id, word, (1,), False))
                w = self._cycle_event(
                    nxt, cyc_id, acc2, visited, p_used, taken, events, phases + 1, None, rows_end
                )
                events.pop()
                if w is not None:
                    return w
        return None

    # -- candidate resolution -------------------------------------------------

    def _resolve(self, events):
        from flatmc import checker

        self.budget.tick("candidates")
        segments: list[tuple] = []
        loops: list[tuple] = []
        member_sets: list[tuple] = []
        p_segments: list[tuple] = []
        p_loops: list[tuple] = []
        p_cur: list = []
        cur: list = []
        omega_word = None
        regions: list = []
        for ev in events:
            if ev[0] == "step":
                ut = ev[1]
                cur.append(ut)
                p_cur.append(ut.origin)
            elif ev[0] == "phase":
                _, cyc_id, word, members, wrapping = ev
                if not regions or regions[-1] != cyc_id:
                    regions.append(cyc_id)
                    p_segments.append(tuple(p_cur))
                    p_cur = []
                    p_loops.append(self.cycles[word[0].origin.source])
                if wrapping:
                    segments.append(tuple(cur))
                    cur = []
                    loops.append(word)
                    member_sets.append(members)
                else:
                    cur.extend(word)
            else:
                omega_word = ev[1]
        assert omega_word is not None
        entry = omega_word[0].origin.source
        final_cycle_id = self.cycle_ids[entry]
        if not regions or regions[-1] != final_cycle_id:
            p_segments.append(tuple(p_cur))
            p_cur = []
            p_loops.append(self.cycles[entry])
        segments.append(tuple(cur))
        loops.append(omega_word)
        schema = PathSchema(tuple(p_segments), tuple(p_loops))
        unfolded = PathSchema(tuple(segments), tuple(loops))
        if not is_valid_schema(unfolded):
            return None
        system_e = build_constraints(unfolded, self.c0)
        base_rows = merge_rows(normalize_ge(system_e.atoms))
        nvars = unfolded.nbloops - 1

        def class_atoms(prefix):
            atoms = []
            for i, klass in enumerate(prefix):
                unit = [0] * nvars
                unit[i] = 1
                if klass >= self.cap_value:
                    atoms.append(LinearAtom(tuple(unit), ">=", self.cap_value))
                else:
                    atoms.append(LinearAtom(tuple(unit), "=", klass))
            return tuple(atoms)

        base_lo = [1] * nvars
        base_hi: list = [None] * nvars
        if not _tighten(base_rows, base_lo, base_hi, rounds=6):
            return None
        trimmed_rows = _drop_satisfied(base_rows, base_lo, base_hi)

        # Per-candidate seam analysis: achievable vector sets right-to-left,
        # then acceptable sets threaded forward, so only symbolically
        # passing class patterns ever reach the feasibility solver.
        def bits_of(ut):
            return self.letterbits((ut.source[0], ut.source[1]))

        omega_v = self.omega_vector(unfolded.loops[-1])
        seam_after: list = [None] * nvars  # achievable vectors right of phase i
        running = frozenset((omega_v,))
        pos = nvars
        for seg, loop in zip(reversed(unfolded.segments), reversed(unfolded.loops)):
            if loop is not unfolded.loops[-1]:
                pos -= 1
            seg_letters = tuple(bits_of(ut) for ut in seg)
            running = frozenset(self.fold_cached(seg_letters, v) for v in running)
            if loop is unfolded.loops[-1]:
                continue
            seam_after[pos] = running
            letters = tuple(bits_of(ut) for ut in loop)
            spread = set()
            frontier = set(running)
            for _ in range(self.cap_value):
                frontier = {self.fold_cached(letters, v) for v in frontier}
                spread |= frontier
            running = frozenset(spread)
        head = tuple(bits_of(ut) for ut in unfolded.segments[0])
        start_ok = frozenset(
            v for v in running if self.fold_cached(head, v)[self.program.phi_bit]
        )
        if not start_ok:
            return None

        loop_letters = [tuple(bits_of(ut) for ut in loop) for loop in unfolded.loops[:-1]]
        seg_letters_all = [tuple(bits_of(ut) for ut in seg) for seg in unfolded.segments]

        def attempt(caps):
            word = LassoWord(*lasso_of(unfolded, caps))
            if not eval_symb(proj(word, self.system.labels, self.resource), self.phi, 0):
                return None
            extra = class_atoms(caps)
            self.budget.feasibility_calls += 1
            box = solution_bound(system_e, extra, self.cfg.bt_constant)
            counts = feasible(system_e, extra, box)
            if counts is None:
                return None
            run = checker._materialize(unfolded, counts, self.c0)
            return checker.Witness(
                schema,
                unfolded,
                caps,
                counts,
                run,
                self.cap_value,
                self.resource,
                self.budget.candidates,
            )

        def assign(prefix, req):
            i = len(prefix)
            if i == nvars:
                return attempt(tuple(prefix)) if omega_v in req else None
            letters = loop_letters[i]
            for klass in member_sets[i]:
                cur = req
                ok = True
                for _ in range(klass):
                    cur = frozenset(
                        v for v in seam_after[i] if self.fold_cached(letters, v) in cur
                    ) if False else cur
                # thread forward: acceptable vectors right of this phase
                target = seam_after[i]
                folded = {v: v for v in target}
                for _ in range(klass):
                    folded = {v: self.fold_cached(letters, folded[v]) for v in target}
                req2 = frozenset(v for v in target if folded[v] in cur)
                req2 = frozenset(
                    self.fold_cached(seg_letters_all[i + 1], v) in req2 and v or v
                    for v in ()
                ) or req2
                if not req2:
                    continue
                rows = trimmed_rows + normalize_ge(class_atoms(prefix + (klass,)))
                lo = list(base_lo)
                hi = list(base_hi)
                if not _tighten(rows, lo, hi, rounds=3):
                    continue
                rows = _drop_satisfied(rows, lo, hi)
                if _lp_min(rows, lo, hi, None) is None:
                    continue
                # cross the next segment
                nxt = seam_after[i + 1] if i + 1 < nvars else frozenset((omega_v,))
                req3 = frozenset(
                    v for v in nxt if self.fold_cached(seg_letters_all[i + 1], v) in req2
                )
                if not req3:
                    continue
                found = assign(prefix + (klass,), req3)
                if found is not None:
                    return found
            return None

        return assign((), start_ok)


def search_pure_future(system, c0, phi, cfg, budget):
    return _Search(system, c0, phi, cfg, budget).run()
