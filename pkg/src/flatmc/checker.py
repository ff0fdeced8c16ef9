"""End-to-end decision procedures with verifiable witnesses.

`check` decides whether some infinite run of a flat counter system from a
given configuration satisfies a formula.  Candidates are explored in a fixed
deterministic order: minimal path schemas, their disjunction-free
unfoldings, capped loop-count patterns, and finally exact integer
feasibility of the unfolding's constraint system restricted by the pattern.
Pure-future formulas take an equivalent pruned search (see _search);
formulas with past operators use the straightforward nested loops here.

Every SAT verdict carries a witness that `validate_witness` re-checks from
first principles: constraint substitution, concrete re-simulation, validity
of the unfolded schema, and formula evaluation on the run's footprint.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from flatmc.model import (
    Configuration,
    CounterSystem,
    LassoRun,
    ModelError,
    NotFlat,
    Term,
    Transition,
    TRUE,
    fire,
    is_flat,
    simulate_lasso,
)
from flatmc.linear import LinearAtom, build_constraints, feasible, solution_bound
from flatmc.pltl import (
    Formula,
    LassoWord,
    eval_lasso,
    eval_symb,
    formula_atoms,
    formula_counters,
    is_pure_future,
    temporal_depth,
)
from flatmc.schema import PathSchema, enumerate_minimal_schemas, is_valid_schema, lasso_of
from flatmc.stutter import cap_counts, cap_for
from flatmc.termmaps import Resource, footprint_of_lasso, map_of_valuation, proj, resource_of, term_drift
from flatmc.unfold import UTrans, enumerate_unfoldings, make_utrans

SAT = "SAT"
UNSAT = "UNSAT"
RESOURCE_EXHAUSTED = "RESOURCE_EXHAUSTED"


@dataclass
class CheckConfig:
    algo: str = "auto"  # auto | general | single-loop
    bt_constant: int = 2
    max_schemas: int | None = None
    max_candidates: int | None = None
    max_nodes: int | None = None
    timeout: float | None = None
    self_check: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.bt_constant < 1:
            raise ValueError("bt_constant must be >= 1")
        if self.algo not in ("auto", "general", "single-loop"):
            raise ValueError(f"unknown algo {self.algo!r}")


class ResourceLimit(Exception):
    """Internal: a configured search limit tripped."""


class _Budget:
    def __init__(self, cfg: CheckConfig):
        self.cfg = cfg
        self.schemas = 0
        self.candidates = 0
        self.nodes = 0
        self.feasibility_calls = 0
        self.deadline = time.monotonic() + cfg.timeout if cfg.timeout else None

    def tick(self, kind: str):
        value = getattr(self, kind) + 1
        setattr(self, kind, value)
        limit = {
            "schemas": self.cfg.max_schemas,
            "candidates": self.cfg.max_candidates,
            "nodes": self.cfg.max_nodes,
        }.get(kind)
        if limit is not None and value > limit:
            raise ResourceLimit(f"limit on {kind} exceeded")
        if self.deadline is not None and (value & 0x3F) == 0 and time.monotonic() > self.deadline:
            raise ResourceLimit("timeout")

    def stats(self) -> dict:
        return {
            "schemas": self.schemas,
            "candidates": self.candidates,
            "nodes": self.nodes,
            "feasibility_calls": self.feasibility_calls,
        }


@dataclass
class Witness:
    schema: PathSchema  # minimal schema over base transitions
    unfolded: PathSchema  # disjunction-free schema over annotated transitions
    caps: tuple[int, ...]  # capped count pattern accepted symbolically
    counts: tuple[int, ...]  # the integer solution (one per unfolded loop)
    run: LassoRun  # concrete materialization at `counts`
    cap_value: int  # 2*td(formula)+5
    resource: Resource
    candidate_id: int = 0


@dataclass
class Verdict:
    status: str
    witness: Witness | None = None
    stats: dict = field(default_factory=dict)

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    def to_json_dict(self) -> dict:
        out = {"status": self.status, "stats": self.stats}
        w = self.witness
        if w is not None:
            from flatmc.schema import format_schema

            prefix_confs = [c for c, _ in w.run.prefix] + [c for c, _ in w.run.cycle]
            cyc_eff = w.run.cycle_effect
            wrap = prefix_confs[0] if not w.run.prefix else w.run.cycle[0][0]
            extra = [
                (step[0].state, tuple(v + d for v, d in zip(step[0].values, cyc_eff)))
                for step in w.run.cycle
            ]
            out.update(
                {
                    "schema": format_schema(w.schema),
                    "unfolding_id": w.candidate_id,
                    "loop_counts": list(w.counts),
                    "witness_prefix": [[c.state, list(c.values)] for c in prefix_confs]
                    + [[q, list(v)] for q, v in extra],
                }
            )
        return out


def beta_atoms(caps: Sequence[int], cap_value: int, nvars: int) -> tuple[LinearAtom, ...]:
    """The count-pattern constraints: pin each count, or bound it below at the cap."""
    atoms = []
    for i, c in enumerate(caps):
        unit = [0] * nvars
        unit[i] = 1
        if c >= cap_value:
            atoms.append(LinearAtom(tuple(unit), ">=", cap_value))
        else:
            atoms.append(LinearAtom(tuple(unit), "=", c))
    return tuple(atoms)


def _materialize(unfolded: PathSchema, counts, c0: Configuration) -> LassoRun:
    prefix_u, cycle_u = lasso_of(unfolded, counts)
    return simulate_lasso(c0, [u.origin for u in prefix_u], [u.origin for u in cycle_u])


def _try_candidate(
    schema: PathSchema,
    unfolded: PathSchema,
    system_e,
    caps: tuple[int, ...],
    cap_value: int,
    c0: Configuration,
    resource: Resource,
    cfg: CheckConfig,
    budget: _Budget,
) -> Witness | None:
    extra = beta_atoms(caps, cap_value, unfolded.nbloops - 1)
    budget.feasibility_calls += 1
    box = solution_bound(system_e, extra, cfg.bt_constant)
    counts = feasible(system_e, extra, box)
    if counts is None:
        return None
    run = _materialize(unfolded, counts, c0)
    return Witness(schema, unfolded, caps, counts, run, cap_value, resource, budget.candidates)


def check_schema(
    schema: PathSchema,
    c0: Configuration,
    phi: Formula,
    cfg: CheckConfig | None = None,
    labels: Mapping[str, frozenset[str]] | None = None,
    _budget: _Budget | None = None,
) -> Verdict:
    """Does some run respecting `schema` from `c0` satisfy `phi` at 0?"""
    cfg = cfg or CheckConfig()
    labels = labels or {}
    budget = _budget or _Budget(cfg)
    if formula_counters(phi) > len(c0.values):
        raise ValueError("formula references counters beyond the configuration")
    if cfg.algo != "general" and schema.nbloops == 1:
        return check_single_loop(schema, c0, phi, cfg, labels=labels, _budget=budget)
    td = temporal_depth(phi)
    cap_value = cap_for(td)
    resource = resource_of(schema.word(), phi)
    try:
        witness = _schema_candidates(schema, c0, phi, cap_value, resource, cfg, labels, budget)
    except ResourceLimit:
        return Verdict(RESOURCE_EXHAUSTED, stats=budget.stats())
    if witness is None:
        return Verdict(UNSAT, stats=budget.stats())
    return Verdict(SAT, witness, budget.stats())


def _schema_candidates(schema, c0, phi, cap_value, resource, cfg, labels, budget):
    tick = lambda: budget.tick("nodes")
    for unfolded in enumerate_unfoldings(schema, resource, c0, consistent_only=True, tick=tick):
        budget.tick("candidates")
        if not is_valid_schema(unfolded):
            continue
        system_e = build_constraints(unfolded, c0)
        nvars = unfolded.nbloops - 1
        for caps in itertools.product(range(1, cap_value + 1), repeat=nvars):
            budget.tick("nodes")
            word = LassoWord(*lasso_of(unfolded, caps))
            if not eval_symb(proj(word, labels, resource), phi, 0):
                continue
            witness = _try_candidate(
                schema, unfolded, system_e, caps, cap_value, c0, resource, cfg, budget
            )
            if witness is not None:
                return witness
    return None


# ---------------------------------------------------------------------------
# Single-loop fast path


def check_single_loop(
    schema: PathSchema,
    c0: Configuration,
    phi: Formula,
    cfg: CheckConfig | None = None,
    labels: Mapping[str, frozenset[str]] | None = None,
    _budget: _Budget | None = None,
) -> Verdict:
    """Polynomial-time path for single-loop schemas.

    A single-loop schema admits at most one run from `c0`.  The run's term
    maps over the loop change monotonically, so the evaluation walks map
    phases with exact iteration counts computed arithmetically, caps each
    phase count at 2*td+5 and evaluates the formula on the capped symbolic
    word.
    """
    cfg = cfg or CheckConfig()
    labels = labels or {}
    budget = _budget or _Budget(cfg)
    if schema.nbloops != 1:
        raise ValueError("check_single_loop needs a single-loop schema")
    segment, loop = schema.segments[0], schema.loops[0]
    td = temporal_depth(phi)
    cap_value = cap_for(td)
    resource = resource_of(schema.word(), phi)
    terms = resource.sorted_terms
    iset = resource.iset
    stats = budget.stats

    # The unique candidate run: fire the segment and the first loop copy.
    conf = c0
    seg_confs = []
    try:
        for t in segment:
            seg_confs.append(conf)
            conf = fire(conf, t)
        loop_confs = []
        for t in loop:
            loop_confs.append(conf)
            conf = fire(conf, t)
    except ModelError:
        return Verdict(UNSAT, stats=stats())
    eff = [0] * len(c0.values)
    for t in loop:
        for i, d in enumerate(t.update):
            eff[i] += d
    if any(d < 0 for d in eff):
        return Verdict(UNSAT, stats=stats())

    drifts = {t: term_drift(t, eff) for t in terms}

    def phase_of(copy_index: int):
        maps = []
        for c in loop_confs:
            vals = tuple(v + (copy_index - 1) * d for v, d in zip(c.values, eff))
            maps.append(map_of_valuation(terms, iset, vals))
        return tuple(maps)

    def copies_in_phase(copy_index: int, maps) -> int | None:
        """Copies sharing this map tuple, or None when it persists forever."""
        best = None
        for pos, c in enumerate(loop_confs):
            for t in terms:
                d = drifts[t]
                if d == 0:
                    continue
                cell = maps[pos].get(t)
                v = t.value(c.values) + (copy_index - 1) * d
                if d > 0:
                    if cell.hi is None:
                        continue
                    leave = (cell.hi - v) // d + 1
                else:
                    if cell.lo is None:
                        continue
                    leave = (v - cell.lo) // (-d) + 1
                best = leave if best is None else min(best, leave)
        return best

    phases: list[tuple[tuple, int | None]] = []
    copy_index = 1
    guard_bound = 2 * resource.chain_bound() + 2
    while True:
        budget.tick("nodes")
        maps = phase_of(copy_index)
        for pos, t in enumerate(loop):
            from flatmc.termmaps import entails

            if not entails(maps[pos], t.guard):
                return Verdict(UNSAT, stats=stats())
        span = copies_in_phase(copy_index, maps)
        phases.append((maps, span))
        if span is None:
            break
        copy_index += span
        assert len(phases) <= guard_bound, "phase count exceeded the chain bound"

    seg_maps = [map_of_valuation(terms, iset, c.values) for c in seg_confs]
    x_props = resource.props

    def letters_for(maps):
        return tuple(
            (labels.get(t.source, frozenset()) & x_props, maps[i]) for i, t in enumerate(loop)
        )

    prefix_letters = tuple(
        (labels.get(t.source, frozenset()) & x_props, seg_maps[i]) for i, t in enumerate(segment)
    )
    for maps, span in phases[:-1]:
        prefix_letters += letters_for(maps) * min(span, cap_value)
    cycle_letters = letters_for(phases[-1][0])
    from flatmc.termmaps import Footprint

    ft = Footprint(resource, LassoWord(prefix_letters, cycle_letters))
    if not eval_symb(ft, phi, 0):
        return Verdict(UNSAT, stats=stats())

    witness = _single_loop_witness(schema, segment, loop, seg_maps, phases, resource, cap_value, c0)
    return Verdict(SAT, witness, stats())


def _single_loop_witness(schema, segment, loop, seg_maps, phases, resource, cap_value, c0):
    """Build the annotated unfolded schema realized by the unique run."""
    terms = resource.sorted_terms

    def annotate(seq, maps_src, maps_tgt):
        out = []
        for i, t in enumerate(seq):
            out.append(make_utrans(t, maps_src[i], maps_tgt[i], resource))
        return tuple(out)

    def copy_word(maps, next_first):
        # maps: tuple per position; target of position i is maps[i+1], the
        # last position targets `next_first`
        tgt = list(maps[1:]) + [next_first]
        return annotate(loop, maps, tgt)

    segments: list[tuple] = []
    loops: list[tuple] = []
    counts: list[int] = []
    cur: list[UTrans] = []
    # segment part
    first_loop_map = phases[0][0][0]
    seg_targets = list(seg_maps[1:]) + [first_loop_map]
    cur.extend(annotate(segment, seg_maps, seg_targets))
    for idx, (maps, span) in enumerate(phases):
        next_first = phases[idx + 1][0][0] if idx + 1 < len(phases) else None
        if span is None:
            segments.append(tuple(cur))
            loops.append(copy_word(maps, maps[0]))
            cur = []
            break
        body = copy_word(maps, maps[0])
        exit_copy = copy_word(maps, next_first)
        if span >= 2:
            segments.append(tuple(cur))
            cur = []
            loops.append(body)
            counts.append(span - 1)
            cur.extend(exit_copy)
        else:
            cur.extend(exit_copy)
    unfolded = PathSchema(tuple(segments), tuple(loops))
    counts = tuple(counts)
    caps = cap_counts(counts, cap_value) if counts else ()
    run = _materialize(unfolded, counts, c0)
    return Witness(schema, unfolded, caps, counts, run, cap_value, resource)


# ---------------------------------------------------------------------------
# Bounded concrete oracle


@dataclass
class OracleWitness:
    schema: PathSchema
    counts: tuple[int, ...]
    run: LassoRun


def _stable_letter_word(run: LassoRun, labels, atoms, unroll_cap: int = 20000):
    """Letters (labels, atom truth map) of the run, once all atom truths on
    the cycle have stabilized; None when the run dies or the cap trips."""
    eff = run.cycle_effect
    rounds = 0
    for atom in atoms:
        d = term_drift(atom.term, eff)
        if d == 0:
            continue
        for conf, _ in run.cycle:
            v = atom.term.value(conf.values)
            gap = (atom.bound - v) if d > 0 else (v - atom.bound)
            need = max(0, gap // abs(d) + 2)
            rounds = max(rounds, need)
    if rounds * len(run.cycle) > unroll_cap:
        return None
    # simulate concretely through the unrolled rounds; the run may die
    steps = [t for _, t in run.cycle]
    conf = run.cycle[0][0]
    confs = [c for c, _ in run.prefix]
    try:
        for _ in range(rounds + 1):
            for t in steps:
                confs.append(conf)
                conf = fire(conf, t)
    except ModelError:
        return None

    def letter(c: Configuration):
        bits = {a: a.holds(c.values) for a in atoms}
        return (labels.get(c.state, frozenset()), bits)

    cycle_len = len(run.cycle)
    prefix_letters = tuple(letter(c) for c in confs[: len(confs) - cycle_len])
    cycle_letters = tuple(letter(c) for c in confs[len(confs) - cycle_len:])
    return LassoWord(prefix_letters, cycle_letters)


def oracle_check(
    system: CounterSystem, c0: Configuration, phi: Formula, count_bound: int
) -> OracleWitness | None:
    """Sound brute-force search: enumerate minimal schemas and small counts,
    simulate concretely, and evaluate the formula on the concrete letters.
    Absence of a witness does NOT imply UNSAT."""
    if not is_flat(system):
        raise NotFlat("oracle_check needs a flat system")
    atoms = tuple(dict.fromkeys(formula_atoms(phi)))

    def atom_eval(letter, node):
        props, bits = letter
        from flatmc.pltl import Prop

        if isinstance(node, Prop):
            return node.name in props
        return bits[node.guard]

    for schema in enumerate_minimal_schemas(system, c0.state):
        if not is_valid_schema(schema):
            continue
        for counts in itertools.product(range(1, count_bound + 1), repeat=schema.nbloops - 1):
            prefix, cycle = lasso_of(schema, counts)
            try:
                run = simulate_lasso(c0, prefix, cycle)
            except ModelError:
                continue
            word = _stable_letter_word(run, system.labels, atoms)
            if word is None:
                continue
            if eval_lasso(word, atom_eval, phi, 0):
                return OracleWitness(schema, counts, run)
    return None


# ---------------------------------------------------------------------------
# Witness validation


def validate_witness(verdict: Verdict, system: CounterSystem, c0: Configuration, phi: Formula) -> bool:
    """Re-check a SAT verdict from first principles.

    (a) the counts satisfy the constraint system and the count pattern,
    (b) the lasso re-simulates concretely (prefix plus two cycle copies),
    (c) the unfolded schema is valid, and (d) the formula holds on the run's
    footprint and on the capped symbolic word.
    """
    w = verdict.witness
    if verdict.status != SAT or w is None:
        return False
    try:
        if w.cap_value != cap_for(temporal_depth(phi)):
            return False
        if not is_valid_schema(w.unfolded):
            return False
        system_e = build_constraints(w.unfolded, c0)
        extra = beta_atoms(w.caps, w.cap_value, w.unfolded.nbloops - 1)
        if not all(a.holds(w.counts) for a in system_e.atoms + extra):
            return False
        if w.caps != cap_counts(w.counts, w.cap_value):
            return False
        prefix_u, cycle_u = lasso_of(w.unfolded, w.counts)
        origins_p = [u.origin for u in prefix_u]
        origins_c = [u.origin for u in cycle_u]
        # two concrete cycle copies
        simulate_lasso(c0, origins_p + origins_c, origins_c)
        run = simulate_lasso(c0, origins_p, origins_c)
        if run != w.run:
            return False
        w.run.check()
        start = w.run.prefix[0][0] if w.run.prefix else w.run.cycle[0][0]
        if start != c0:
            return False
        ft = footprint_of_lasso(w.run, w.resource, system.labels)
        if not eval_symb(ft, phi, 0):
            return False
        capped_word = LassoWord(*lasso_of(w.unfolded, w.caps))
        if not eval_symb(proj(capped_word, system.labels, w.resource), phi, 0):
            return False
        return True
    except (ModelError, ValueError, AssertionError):
        return False


# ---------------------------------------------------------------------------
# Whole-system checking


def check(
    system: CounterSystem, c0: Configuration, phi: Formula, cfg: CheckConfig | None = None
) -> Verdict:
    """Does some infinite run of `system` from `c0` satisfy `phi` at 0?"""
    cfg = cfg or CheckConfig()
    if not is_flat(system):
        raise NotFlat("check requires a flat counter system")
    if c0.state not in system.states:
        raise ValueError(f"unknown state {c0.state}")
    if len(c0.values) != system.n:
        raise ValueError("initial valuation arity differs from the counter count")
    if formula_counters(phi) > system.n:
        raise ValueError("formula references counters beyond the system's count")
    budget = _Budget(cfg)
    try:
        if cfg.algo == "auto" and is_pure_future(phi):
            from flatmc import _search

            verdict = _search.search_pure_future(system, c0, phi, cfg, budget)
        else:
            verdict = _check_naive(system, c0, phi, cfg, budget)
    except ResourceLimit:
        return Verdict(RESOURCE_EXHAUSTED, stats=budget.stats())
    if cfg.self_check and verdict.is_sat:
        assert validate_witness(verdict, system, c0, phi), "self-check failed"
    return verdict


def _check_naive(system, c0, phi, cfg, budget) -> Verdict:
    exhausted = False
    for schema in enumerate_minimal_schemas(system, c0.state, canonical_only=True):
        budget.tick("schemas")
        verdict = check_schema(schema, c0, phi, cfg, labels=system.labels, _budget=budget)
        if verdict.is_sat:
            return verdict
        if verdict.status == RESOURCE_EXHAUSTED:
            exhausted = True
    if exhausted:
        return Verdict(RESOURCE_EXHAUSTED, stats=budget.stats())
    return Verdict(UNSAT, stats=budget.stats())


def reach(
    system: CounterSystem, q_from: str, q_to: str, cfg: CheckConfig | None = None
) -> Verdict:
    """Is ``<q_to, 0..0>`` reachable from ``<q_from, 0..0>`` by a finite run?

    Encoded as model checking: states get fresh `at` markers, a sink with a
    true self-loop is attached behind `q_to` so every finite run extends to
    an infinite one, and the formula asks for the marker with all counters
    pinned to zero.
    """
    if not is_flat(system):
        raise NotFlat("reach requires a flat counter system")
    for q in (q_from, q_to):
        if q not in system.states:
            raise ValueError(f"unknown state {q}")
    mark = "at_"
    existing = set().union(*system.labels.values()) if system.labels else set()
    while any((mark + q) in existing for q in system.states):
        mark = "_" + mark
    sink = "sink"
    while sink in system.states:
        sink = sink + "_"
    zero = tuple([0] * system.n)
    labels = {q: system.label(q) | {mark + q} for q in system.states}
    labels[sink] = frozenset()
    transitions = list(system.transitions)
    transitions.append(Transition(q_to, TRUE, zero, sink, len(transitions)))
    transitions.append(Transition(sink, TRUE, zero, sink, len(transitions)))
    augmented = CounterSystem(
        system.name + "+reach", system.n, system.states + (sink,), labels, tuple(transitions)
    )
    from flatmc.pltl import Atom, Prop, eventually, f_and
    from flatmc.model import AtomicGuard

    target = [Prop(mark + q_to)]
    for i in range(1, system.n + 1):
        target.append(Atom(AtomicGuard(Term.var(i), "<=", 0)))
        target.append(Atom(AtomicGuard(Term.var(i), ">=", 0)))
    phi = eventually(f_and(*target))
    return check(augmented, Configuration(q_from, zero), phi, cfg)
