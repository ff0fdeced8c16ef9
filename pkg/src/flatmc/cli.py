"""Command-line surface and hardness-reduction instance generators.

Subcommands: check, reach, schemas, oracle, and gen (sat-kripke,
sat-counter, sat-reach).  Exit codes: 0 = SAT / reachable / witness found,
1 = UNSAT / no witness, 2 = search limits exhausted, 3+ = usage or parse
errors.

The generators turn a boolean formula into model-checking instances that
are satisfiable exactly when the formula is: a chain of marker loops whose
visit counts encode an assignment, a two-loop counter system encoding the
assignment in one loop's iteration count, and a reachability instance with
paired increment/decrement loops.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import random
import sys

from flatmc.model import (
    Configuration,
    CounterSystem,
    ModelError,
    Term,
    Transition,
    TRUE,
    format_system,
    gand,
    gatom,
    gor,
    parse_system,
)
from flatmc.checker import (
    CheckConfig,
    RESOURCE_EXHAUSTED,
    SAT,
    UNSAT,
    check,
    oracle_check,
    reach,
    validate_witness,
)
from flatmc.linear import build_constraints
from flatmc.pltl import (
    And,
    Atom,
    Formula,
    Not,
    Or,
    Prop,
    always,
    eventually,
    f_and,
    format_formula,
    implies,
    Next,
    parse_formula,
)
from flatmc.schema import enumerate_minimal_schemas, format_schema


# ---------------------------------------------------------------------------
# Boolean formulas for the reductions (nested tuples)


def parse_bool(text: str):
    """Boolean expression over variables p1..pn with !, &, | and parentheses."""
    phi = parse_formula(text)

    def conv(f: Formula):
        if isinstance(f, Prop):
            if not (f.name.startswith("p") and f.name[1:].isdigit()):
                raise ModelError(f"boolean variables are p1, p2, ...; got {f.name}")
            return ("var", int(f.name[1:]))
        if isinstance(f, Not):
            return ("not", conv(f.sub))
        if isinstance(f, And):
            return ("and", conv(f.left), conv(f.right))
        if isinstance(f, Or):
            return ("or", conv(f.left), conv(f.right))
        raise ModelError("boolean formulas admit only !, &, | over p<i>")

    return conv(phi)


def bool_nvars(expr) -> int:
    if expr[0] == "var":
        return expr[1]
    return max(bool_nvars(e) for e in expr[1:])


def random_bool(rng: random.Random, nvars: int, size: int | None = None):
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


def _bool_to_formula(expr, leaf) -> Formula:
    if expr[0] == "var":
        return leaf(expr[1])
    if expr[0] == "not":
        return Not(_bool_to_formula(expr[1], leaf))
    a, b = (_bool_to_formula(e, leaf) for e in expr[1:])
    return And(a, b) if expr[0] == "and" else Or(a, b)


def _bool_to_guard(expr, positive=True):
    """Positive-guard encoding with p_i as `x_i >= 2` (negated: `x_i <= 1`)."""
    if expr[0] == "var":
        term = Term.var(expr[1])
        return gatom(term, ">=", 2) if positive else gatom(term, "<=", 1)
    if expr[0] == "not":
        return _bool_to_guard(expr[1], not positive)
    parts = [_bool_to_guard(e, positive) for e in expr[1:]]
    if (expr[0] == "and") == positive:
        return gand(*parts)
    return gor(*parts)


# ---------------------------------------------------------------------------
# Instance generators


def gen_sat_kripke(expr) -> tuple[CounterSystem, str, Formula]:
    """Chain of marker loops; visiting loop i twice encodes `p_i` true.

    The formula caps every loop at two visits and replaces each variable
    with 'the marker is seen twice in a row two steps apart'.
    """
    n = bool_nvars(expr)
    if n < 1:
        raise ModelError("need at least one variable")
    states = []
    labels = {}
    transitions = []
    for i in range(1, n + 1):
        entry, marked = f"e{i}", f"m{i}"
        states += [entry, marked]
        labels[entry] = frozenset()
        labels[marked] = frozenset({f"q{i}"})
    states.append("z")
    labels["z"] = frozenset()

    def add(src, dst):
        transitions.append(Transition(src, TRUE, (), dst, len(transitions)))

    for i in range(1, n + 1):
        add(f"e{i}", f"m{i}")
        add(f"m{i}", f"e{i}")
        add(f"e{i}", f"e{i + 1}" if i < n else "z")
    add("z", "z")
    system = CounterSystem(f"sat_kripke_{n}", 0, tuple(states), labels, tuple(transitions))

    def seen_twice(i: int) -> Formula:
        q = Prop(f"q{i}")
        return And(q, Next(Next(q)))

    at_most_twice = f_and(
        *(
            always(implies(seen_twice(i), Next(Next(Next(always(Not(Prop(f"q{i}"))))))))
            for i in range(1, n + 1)
        )
    )
    truth = _bool_to_formula(expr, lambda i: eventually(seen_twice(i)))
    return system, "e1", And(at_most_twice, truth)


def gen_sat_counter(expr, n: int | None = None) -> tuple[CounterSystem, str, Formula]:
    """Two-loop counter instance: the first loop's iteration count guesses an
    assignment in binary; the second loop's per-counter strides expose the
    bits to interval tests."""
    nvars = bool_nvars(expr)
    n = nvars if n is None else n
    if n != nvars:
        raise ModelError("counter count must equal the variable count")
    power = 2 ** n
    labels = {"g0": frozenset(), "g1": frozenset({"q1"})}
    ones = tuple([1] * n)
    zeros = tuple([0] * n)
    strides = tuple(2 ** (n + 1 - i) for i in range(1, n + 1))
    transitions = (
        Transition("g0", gatom(Term.var(1), "<=", power), ones, "g0", 0),
        Transition("g0", TRUE, zeros, "g1", 1),
        Transition("g1", TRUE, strides, "g1", 2),
    )
    system = CounterSystem(f"sat_counter_{n}", n, ("g0", "g1"), labels, transitions)

    def bit_test(i: int) -> Formula:
        low = power + 2 ** (n - i) + 1  # (x_i - 1) >= 2^n + 2^(n-i)
        high = power + 2 ** (n + 1 - i)  # (x_i - 1) <= 2^n + 2^(n+1-i) - 1
        term = Term.var(i)
        from flatmc.model import AtomicGuard

        return eventually(
            f_and(
                Prop("q1"),
                Atom(AtomicGuard(term, ">=", low)),
                Atom(AtomicGuard(term, "<=", high)),
            )
        )

    return system, "g0", _bool_to_formula(expr, bit_test)


def gen_sat_reach(expr) -> tuple[CounterSystem, str, str]:
    """Paired increment/decrement loops with the formula as a middle guard."""
    n = bool_nvars(expr)
    states = [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(1, n + 1)] + ["f"]
    labels = {q: frozenset() for q in states}
    transitions = []

    def unit(i, sign):
        return tuple(sign if j == i else 0 for j in range(1, n + 1))

    def add(src, g, upd, dst):
        transitions.append(Transition(src, g, upd, dst, len(transitions)))

    zeros = tuple([0] * n)
    for i in range(1, n + 1):
        add(f"a{i}", TRUE, unit(i, 1), f"a{i}")
        if i < n:
            add(f"a{i}", TRUE, zeros, f"a{i + 1}")
    add(f"a{n}", _bool_to_guard(expr), zeros, "b1")
    for i in range(1, n + 1):
        add(f"b{i}", TRUE, unit(i, -1), f"b{i}")
        add(f"b{i}", TRUE, zeros, f"b{i + 1}" if i < n else "f")
    system = CounterSystem(f"sat_reach_{n}", n, tuple(states), labels, tuple(transitions))
    return system, "a1", "f"


# ---------------------------------------------------------------------------
# Command implementations

EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 3


def _config_from(args) -> CheckConfig:
    return CheckConfig(
        algo=args.algo,
        bt_constant=args.bt_constant,
        max_schemas=args.max_schemas,
        max_candidates=args.max_candidates,
        max_nodes=args.max_nodes,
        timeout=args.timeout,
        self_check=args.self_check,
        jobs=args.jobs,
    )


def _load_system(path: str) -> CounterSystem:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_system(handle.read())


def _load_formula(args, n: int):
    if args.formula_file:
        with open(args.formula_file, "r", encoding="utf-8") as handle:
            text = handle.read()
    else:
        text = args.formula
    if text is None:
        raise ModelError("missing --formula/--formula-file")
    return parse_formula(text, n)


def _init_values(args, n: int) -> tuple[int, ...]:
    if not args.init:
        return tuple([0] * n)
    values = tuple(int(x) for x in args.init.split(",")) if args.init.strip() else ()
    if len(values) != n:
        raise ModelError(f"--init needs {n} comma-separated naturals")
    return values


def _emit_verdict(verdict, args) -> int:
    if args.output == "json":
        print(json.dumps(verdict.to_json_dict()))
    else:
        print(verdict.status)
        if verdict.witness is not None:
            w = verdict.witness
            print(f"schema: {format_schema(w.schema)}")
            print(f"loop counts: {list(w.counts)}")
            confs = [c for c, _ in w.run.prefix] + [c for c, _ in w.run.cycle]
            shown = ", ".join(f"{c.state}{list(c.values)}" for c in confs[:12])
            print(f"run: {shown}{' ...' if len(confs) > 12 else ''}")
    if getattr(args, "dump_constraints", False) and verdict.witness is not None:
        print(build_constraints(verdict.witness.unfolded, verdict._c0).dump(), file=sys.stderr)
    return {SAT: EXIT_SAT, UNSAT: EXIT_UNSAT, RESOURCE_EXHAUSTED: EXIT_RESOURCE}[verdict.status]


def cmd_check(args) -> int:
    system = _load_system(args.system)
    phi = _load_formula(args, system.n)
    c0 = Configuration(args.state, _init_values(args, system.n))
    verdict = check(system, c0, phi, _config_from(args))
    verdict._c0 = c0
    if args.self_check and verdict.status == SAT:
        assert validate_witness(verdict, system, c0, phi)
    return _emit_verdict(verdict, args)


def cmd_reach(args) -> int:
    system = _load_system(args.system)
    verdict = reach(system, args.src, args.dst, _config_from(args))
    verdict._c0 = Configuration(args.src, tuple([0] * system.n))
    if args.output == "json":
        print(json.dumps(verdict.to_json_dict()))
    else:
        print("REACHABLE" if verdict.status == SAT else verdict.status)
    return {SAT: EXIT_SAT, UNSAT: EXIT_UNSAT, RESOURCE_EXHAUSTED: EXIT_RESOURCE}[verdict.status]


def cmd_schemas(args) -> int:
    system = _load_system(args.system)
    count = 0
    for schema in enumerate_minimal_schemas(system, args.state, canonical_only=args.canonical):
        print(format_schema(schema))
        count += 1
        if args.limit and count >= args.limit:
            break
    return EXIT_SAT


def cmd_oracle(args) -> int:
    system = _load_system(args.system)
    phi = _load_formula(args, system.n)
    c0 = Configuration(args.state, _init_values(args, system.n))
    witness = oracle_check(system, c0, phi, args.bound)
    if witness is None:
        print("no witness (bound may be too small)")
        return EXIT_UNSAT
    print(f"schema: {format_schema(witness.schema)}")
    print(f"loop counts: {list(witness.counts)}")
    return EXIT_SAT


def _gen_bool(args):
    if args.phi:
        return parse_bool(args.phi)
    seed = args.seed if args.seed is not None else os.environ.get("FLATMC_SEED", 0)
    rng = random.Random(f"{seed}:gen")
    return random_bool(rng, args.vars)


def cmd_gen(args) -> int:
    expr = _gen_bool(args)
    if args.kind == "sat-kripke":
        system, q0, phi = gen_sat_kripke(expr)
        extra = f"# start: {q0}\n# formula: {format_formula(phi)}\n"
        formula_text = format_formula(phi)
    elif args.kind == "sat-counter":
        system, q0, phi = gen_sat_counter(expr)
        extra = f"# start: {q0}\n# formula: {format_formula(phi)}\n"
        formula_text = format_formula(phi)
    else:
        system, q0, qf = gen_sat_reach(expr)
        extra = f"# reach query: from {q0} to {qf}\n"
        formula_text = None
    text = extra + format_system(system)
    if args.out_system:
        with open(args.out_system, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    if formula_text is not None and args.out_formula:
        with open(args.out_formula, "w", encoding="utf-8") as handle:
            handle.write(formula_text + "\n")
    return EXIT_SAT


def _add_common(parser):
    parser.add_argument("--algo", choices=("auto", "general", "single-loop"), default="auto")
    parser.add_argument("--bt-constant", type=int, default=2, help="small-solution exponent multiplier")
    parser.add_argument("--max-schemas", type=int, default=None)
    parser.add_argument("--max-candidates", type=int, default=None)
    parser.add_argument("--max-nodes", type=int, default=None)
    parser.add_argument("--timeout", type=float, default=None, help="seconds")
    parser.add_argument("--self-check", action="store_true", help="re-validate SAT witnesses")
    parser.add_argument("--jobs", type=int, default=1, help="accepted for compatibility; search is serial")
    parser.add_argument("--output", choices=("text", "json"), default="text")
    parser.add_argument("--dump-constraints", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="model-check a formula on a flat counter system")
    p.add_argument("--system", required=True)
    p.add_argument("--formula")
    p.add_argument("--formula-file")
    p.add_argument("--state", required=True)
    p.add_argument("--init", default=None, help="comma-separated initial counter values")
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reach", help="configuration-to-configuration reachability at zero")
    p.add_argument("--system", required=True)
    p.add_argument("--from", dest="src", required=True)
    p.add_argument("--to", dest="dst", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("schemas", help="print minimal path schemas")
    p.add_argument("--system", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--canonical", action="store_true")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_schemas)

    p = sub.add_parser("oracle", help="bounded concrete search (sound, incomplete)")
    p.add_argument("--system", required=True)
    p.add_argument("--formula")
    p.add_argument("--formula-file")
    p.add_argument("--state", required=True)
    p.add_argument("--init", default=None)
    p.add_argument("--bound", type=int, default=3)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="emit hardness-reduction instances")
    p.add_argument("kind", choices=("sat-kripke", "sat-counter", "sat-reach"))
    p.add_argument("--phi", help="boolean formula over p1..pn")
    p.add_argument("--vars", type=int, default=3, help="variables for random formulas")
    p.add_argument("--seed", default=None)
    p.add_argument("--out-system")
    p.add_argument("--out-formula")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        return args.func(args)
    except (ModelError, OSError, ValueError) as exc:
        print(f"flatmc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
