"""Counter systems: guards, transitions, configurations and concrete runs.

A counter system is a finite control graph whose transitions carry a guard
(a positive boolean combination of linear constraints) and an integer update
vector.  Configurations pair a control state with a vector of natural
numbers; firing a transition requires the guard to hold and the updated
vector to stay non-negative.  Kripke structures are the zero-counter case.

All values are immutable after construction and every operation is pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence


class ModelError(Exception):
    """Base class for errors raised by flatmc."""


class ParseError(ModelError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class GuardViolated(ModelError):
    """A transition was fired from a valuation that does not satisfy its guard."""


class NegativeCounter(ModelError):
    """Firing a transition would drive some counter below zero."""


class WrongSource(ModelError):
    """A transition was fired from the wrong control state."""


class NotAPath(ModelError):
    """A transition sequence whose endpoints do not chain."""


class NotFlat(ModelError):
    """Some control state lies on two distinct simple cycles."""


class ResourceMismatch(ModelError):
    """A term or bound is absent from the resource a symbolic object was built over."""


# ---------------------------------------------------------------------------
# Terms and guards


@dataclass(frozen=True)
class Term:
    """Canonical linear combination ``sum(a_i * x_i)`` over 1-based counters.

    ``coeffs`` stores (counter index, coefficient) pairs sorted by index with
    all zero coefficients dropped, so structural equality coincides with
    semantic equality of the sum.
    """

    coeffs: tuple[tuple[int, int], ...]

    @staticmethod
    def of(items: Mapping[int, int] | Iterable[tuple[int, int]]) -> "Term":
        acc: dict[int, int] = {}
        pairs = items.items() if isinstance(items, Mapping) else items
        for idx, coeff in pairs:
            if idx < 1:
                raise ValueError(f"counter index must be >= 1, got {idx}")
            acc[idx] = acc.get(idx, 0) + coeff
        return Term(tuple(sorted((i, a) for i, a in acc.items() if a != 0)))

    @staticmethod
    def var(index: int, coeff: int = 1) -> "Term":
        return Term.of({index: coeff})

    def value(self, values: Sequence[int]) -> int:
        return sum(a * values[i - 1] for i, a in self.coeffs)

    @property
    def max_index(self) -> int:
        return self.coeffs[-1][0] if self.coeffs else 0

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i, a in self.coeffs:
            lead = f"x{i}" if a == 1 else (f"-x{i}" if a == -1 else f"{a}*x{i}")
            if parts and not lead.startswith("-"):
                parts.append("+ " + lead)
            elif parts:
                parts.append("- " + lead.lstrip("-"))
            else:
                parts.append(lead)
        return " ".join(parts)


RELS = ("=", "<=", ">=", "<", ">")

_REL_EVAL = {
    "=": lambda a, b: a == b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}

# Negation of a single relation; `=` needs a disjunction and is handled in
# `negate` directly.
_REL_NEG = {"<=": ">", ">=": "<", "<": ">=", ">": "<="}


@dataclass(frozen=True)
class AtomicGuard:
    """Constraint ``term ~ bound`` with ``~`` in {=, <=, >=, <, >}."""

    term: Term
    rel: str
    bound: int

    def __post_init__(self):
        if self.rel not in RELS:
            raise ValueError(f"bad relation {self.rel!r}")

    def holds(self, values: Sequence[int]) -> bool:
        return _REL_EVAL[self.rel](self.term.value(values), self.bound)

    def __str__(self) -> str:
        return f"{self.term} {self.rel} {self.bound}"


@dataclass(frozen=True)
class Guard:
    """Positive boolean combination of atomic guards, plus true/false.

    ``kind`` is one of "true", "false", "atom", "and", "or".  Negation is not
    a node kind; `negate` rewrites into this positive fragment.
    """

    kind: str
    atom: AtomicGuard | None = None
    parts: tuple["Guard", ...] = ()

    def atoms(self) -> Iterator[AtomicGuard]:
        if self.kind == "atom":
            yield self.atom
        else:
            for p in self.parts:
                yield from p.atoms()

    def has_disjunction(self) -> bool:
        if self.kind == "or":
            return True
        return any(p.has_disjunction() for p in self.parts)

    def as_conjunction(self) -> tuple[AtomicGuard, ...] | None:
        """Flatten into a list of atoms, or None if a disjunction occurs.

        A `false` node is reported as the unsatisfiable atom ``0 <= -1``.
        """
        if self.kind == "true":
            return ()
        if self.kind == "false":
            return (AtomicGuard(Term.of({}), "<=", -1),)
        if self.kind == "atom":
            return (self.atom,)
        if self.kind == "and":
            out: list[AtomicGuard] = []
            for p in self.parts:
                sub = p.as_conjunction()
                if sub is None:
                    return None
                out.extend(sub)
            return tuple(out)
        return None

    @property
    def max_index(self) -> int:
        if self.kind == "atom":
            return self.atom.term.max_index
        return max((p.max_index for p in self.parts), default=0)

    def __str__(self) -> str:
        if self.kind == "true":
            return "true"
        if self.kind == "false":
            return "false"
        if self.kind == "atom":
            return str(self.atom)
        sep = " & " if self.kind == "and" else " | "
        return "(" + sep.join(str(p) for p in self.parts) + ")"


TRUE = Guard("true")
FALSE = Guard("false")


def gatom(term: Term, rel: str, bound: int) -> Guard:
    return Guard("atom", atom=AtomicGuard(term, rel, bound))


def _combine(kind: str, unit: Guard, zero: Guard, parts: Iterable[Guard]) -> Guard:
    flat: list[Guard] = []
    for p in parts:
        if p == zero:
            return zero
        if p == unit:
            continue
        if p.kind == kind:
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return unit
    if len(flat) == 1:
        return flat[0]
    return Guard(kind, parts=tuple(flat))


def gand(*parts: Guard) -> Guard:
    return _combine("and", TRUE, FALSE, parts)


def gor(*parts: Guard) -> Guard:
    return _combine("or", FALSE, TRUE, parts)


def negate(g: Guard) -> Guard:
    """Negation into the positive fragment; an involution up to flattening."""
    if g.kind == "true":
        return FALSE
    if g.kind == "false":
        return TRUE
    if g.kind == "atom":
        a = g.atom
        if a.rel == "=":
            return gor(gatom(a.term, "<", a.bound), gatom(a.term, ">", a.bound))
        return gatom(a.term, _REL_NEG[a.rel], a.bound)
    if g.kind == "and":
        return gor(*(negate(p) for p in g.parts))
    return gand(*(negate(p) for p in g.parts))


def eval_guard(g: Guard, values: Sequence[int]) -> bool:
    """Truth value of `g` with each x_i replaced by values[i-1]."""
    if g.kind == "true":
        return True
    if g.kind == "false":
        return False
    if g.kind == "atom":
        return g.atom.holds(values)
    if g.kind == "and":
        return all(eval_guard(p, values) for p in g.parts)
    return any(eval_guard(p, values) for p in g.parts)


# ---------------------------------------------------------------------------
# Systems, configurations, runs


@dataclass(frozen=True)
class Transition:
    source: str
    guard: Guard
    update: tuple[int, ...]
    target: str
    index: int

    def __str__(self) -> str:
        return f"d{self.index}"


@dataclass(frozen=True, eq=False)
class CounterSystem:
    name: str
    n: int
    states: tuple[str, ...]
    labels: Mapping[str, frozenset[str]]
    transitions: tuple[Transition, ...]

    def label(self, state: str) -> frozenset[str]:
        return self.labels.get(state, frozenset())

    def out(self, state: str) -> tuple[Transition, ...]:
        cache = self.__dict__.get("_out")
        if cache is None:
            cache = {}
            for t in self.transitions:
                cache.setdefault(t.source, []).append(t)
            cache = {q: tuple(ts) for q, ts in cache.items()}
            object.__setattr__(self, "_out", cache)
        return cache.get(state, ())


@dataclass(frozen=True)
class Configuration:
    state: str
    values: tuple[int, ...]

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise NegativeCounter(f"configuration values must be natural, got {self.values}")


def fire(conf: Configuration, t: Transition) -> Configuration:
    """Fire `t` from `conf`; raises if the step is not enabled."""
    if conf.state != t.source:
        raise WrongSource(f"transition {t.index} starts at {t.source}, not {conf.state}")
    if not eval_guard(t.guard, conf.values):
        raise GuardViolated(f"guard of transition {t.index} fails at {conf.values}")
    values = tuple(v + d for v, d in zip(conf.values, t.update))
    if any(v < 0 for v in values):
        raise NegativeCounter(f"transition {t.index} drives a counter below zero at {conf.values}")
    return Configuration(t.target, values)


def effect(transitions: Sequence[Transition], n: int | None = None) -> tuple[int, ...]:
    """Componentwise sum of the updates along a path segment."""
    ts = tuple(transitions)
    for a, b in zip(ts, ts[1:]):
        if a.target != b.source:
            raise NotAPath(f"transition {a.index} ends at {a.target}, next starts at {b.source}")
    if not ts:
        return tuple([0] * (n or 0))
    total = list(ts[0].update)
    for t in ts[1:]:
        for i, d in enumerate(t.update):
            total[i] += d
    return tuple(total)


def _scc_partition(states: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[set[str]]:
    # Iterative Tarjan.
    adj: dict[str, list[str]] = {q: [] for q in states}
    for a, b in edges:
        adj[a].append(b)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[set[str]] = []
    counter = [0]

    for root in states:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    q = stack.pop()
                    on_stack.discard(q)
                    comp.add(q)
                    if q == node:
                        break
                sccs.append(comp)
    return sccs


def state_cycles(system: CounterSystem) -> dict[str, tuple[Transition, ...]]:
    """The unique simple cycle through each state, rotated to start there.

    In a flat system the transitions internal to one strongly connected
    component form exactly one cycle (or none); raises NotFlat otherwise.
    """
    sccs = _scc_partition(system.states, [(t.source, t.target) for t in system.transitions])
    cycles: dict[str, tuple[Transition, ...]] = {}
    for comp in sccs:
        internal = [t for t in system.transitions if t.source in comp and t.target in comp]
        if not internal:
            continue
        if len(internal) != len(comp):
            raise NotFlat(f"states {sorted(comp)} lie on more than one simple cycle")
        succ: dict[str, Transition] = {}
        for t in internal:
            if t.source in succ:
                raise NotFlat(f"state {t.source} lies on more than one simple cycle")
            succ[t.source] = t
        if set(succ) != comp:
            raise NotFlat(f"states {sorted(comp)} lie on more than one simple cycle")
        for start in comp:
            rotation = []
            q = start
            while True:
                t = succ[q]
                rotation.append(t)
                q = t.target
                if q == start:
                    break
            cycles[start] = tuple(rotation)
    return cycles


def is_flat(system: CounterSystem) -> bool:
    """True iff no control state lies on two distinct simple cycles."""
    try:
        state_cycles(system)
    except NotFlat:
        return False
    return True


@dataclass(frozen=True)
class LassoRun:
    """A concrete ultimately periodic run: finite prefix plus a repeatable cycle.

    Each entry pairs the configuration *before* firing with the transition
    fired.  The cycle's cumulative effect must be componentwise >= 0 so the
    cycle can repeat forever; the configuration reached after the cycle
    matches the cycle start in state.
    """

    prefix: tuple[tuple[Configuration, Transition], ...]
    cycle: tuple[tuple[Configuration, Transition], ...]

    def __post_init__(self):
        if not self.cycle:
            raise ModelError("lasso cycle must be nonempty")

    @property
    def cycle_effect(self) -> tuple[int, ...]:
        return effect([t for _, t in self.cycle])

    def check(self) -> None:
        """Re-simulate and verify every invariant; raises on violation."""
        steps = list(self.prefix) + list(self.cycle)
        conf = steps[0][0]
        for got, t in steps:
            if got != conf:
                raise ModelError(f"stored configuration {got} does not match simulation {conf}")
            conf = fire(conf, t)
        start = self.cycle[0][0]
        if conf.state != start.state:
            raise ModelError(f"cycle ends in {conf.state}, started in {start.state}")
        if any(d < 0 for d in self.cycle_effect):
            raise ModelError(f"cycle effect {self.cycle_effect} is not componentwise >= 0")

    def letters(self, count: int, labels: Mapping[str, frozenset[str]]) -> list[tuple[frozenset[str], tuple[int, ...]]]:
        """First `count` letters (label set, counter values) of the run."""
        out = []
        confs = [c for c, _ in self.prefix] + [c for c, _ in self.cycle]
        eff = self.cycle_effect
        base = len(self.prefix)
        period = len(self.cycle)
        for i in range(count):
            if i < len(confs):
                c = confs[i]
            else:
                j = i - base
                c0 = self.cycle[j % period][0]
                rounds = j // period
                c = Configuration(c0.state, tuple(v + rounds * d for v, d in zip(c0.values, eff)))
            out.append((labels.get(c.state, frozenset()), c.values))
        return out


def simulate_lasso(c0: Configuration, prefix: Sequence[Transition], cycle: Sequence[Transition]) -> LassoRun:
    """Fire prefix then cycle from c0, materializing a LassoRun.

    Raises GuardViolated / NegativeCounter / WrongSource if any step is not
    enabled; raises ModelError if the cycle does not wrap or drifts negative.
    """
    conf = c0
    pref = []
    for t in prefix:
        pref.append((conf, t))
        conf = fire(conf, t)
    cyc = []
    for t in cycle:
        cyc.append((conf, t))
        conf = fire(conf, t)
    run = LassoRun(tuple(pref), tuple(cyc))
    if conf.state != run.cycle[0][0].state:
        raise ModelError("cycle does not return to its start state")
    if any(d < 0 for d in run.cycle_effect):
        raise ModelError(f"cycle effect {run.cycle_effect} is not componentwise >= 0")
    return run


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|->|[()=<>&|+\-*,!\[\]])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # "num" | "id" | "op" | "end"
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int = 1) -> list[_Tok]:
    toks = []
    pos = 0
    col = 1
    cur_line = line
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", cur_line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, lexeme, cur_line, col))
        newlines = lexeme.count("\n")
        if newlines:
            cur_line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(_Tok("end", "", cur_line, col))
    return toks


class _TokenStream:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "end":
            self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def error(self, message: str):
        t = self.peek()
        raise ParseError(message, t.line, t.col)


_COUNTER_RE = re.compile(r"^x(\d+)$")


def _parse_int(ts: _TokenStream) -> int:
    sign = 1
    t = ts.peek()
    if t.text == "-":
        ts.next()
        sign = -1
    elif t.text == "+":
        ts.next()
    t = ts.next()
    if t.kind != "num":
        raise ParseError(f"expected integer, found {t.text!r}", t.line, t.col)
    return sign * int(t.text)


def _parse_linear(ts: _TokenStream, n: int | None) -> tuple[Term, int]:
    """Parse a sum of ``[k*]x<i>`` and integer addends.

    Returns (term, constant); constant addends are folded out so callers can
    move them to the comparison bound.
    """
    coeffs: dict[int, int] = {}
    const = 0
    first = True
    while True:
        sign = 1
        t = ts.peek()
        if t.text in ("+", "-"):
            ts.next()
            sign = -1 if t.text == "-" else 1
        elif not first:
            break
        t = ts.peek()
        coeff = None
        if t.kind == "num":
            ts.next()
            coeff = int(t.text)
            if ts.peek().text == "*":
                ts.next()
        t = ts.peek()
        m = _COUNTER_RE.match(t.text) if t.kind == "id" else None
        if m:
            ts.next()
            idx = int(m.group(1))
            if idx < 1:
                raise ParseError("counter indices start at 1", t.line, t.col)
            if n is not None and idx > n:
                raise ParseError(f"counter x{idx} exceeds declared count {n}", t.line, t.col)
            coeffs[idx] = coeffs.get(idx, 0) + sign * (1 if coeff is None else coeff)
        elif coeff is not None:
            const += sign * coeff
        else:
            ts.error("expected a counter or integer")
        first = False
        if ts.peek().text not in ("+", "-"):
            break
    return Term.of(coeffs), const


def parse_guard_expr(text: str, n: int | None = None, line: int = 1) -> Guard:
    ts = _TokenStream(_tokenize(text, line))
    g = _parse_guard_disj(ts, n)
    t = ts.peek()
    if t.kind != "end":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return g


def _parse_guard_disj(ts: _TokenStream, n: int | None) -> Guard:
    parts = [_parse_guard_conj(ts, n)]
    while ts.peek().text == "|":
        ts.next()
        parts.append(_parse_guard_conj(ts, n))
    return gor(*parts) if len(parts) > 1 else parts[0]


def _parse_guard_conj(ts: _TokenStream, n: int | None) -> Guard:
    parts = [_parse_guard_prim(ts, n)]
    while ts.peek().text == "&":
        ts.next()
        parts.append(_parse_guard_prim(ts, n))
    return gand(*parts) if len(parts) > 1 else parts[0]


def _parse_guard_prim(ts: _TokenStream, n: int | None) -> Guard:
    t = ts.peek()
    if t.text == "(":
        ts.next()
        g = _parse_guard_disj(ts, n)
        ts.expect(")")
        return g
    if t.text == "true":
        ts.next()
        return TRUE
    if t.text == "false":
        ts.next()
        return FALSE
    return parse_atom(ts, n)


def parse_atom(ts: _TokenStream, n: int | None) -> Guard:
    # `lin rel lin`; constants and the right-hand term fold into the bound,
    # canonicalizing to `term rel int`.
    lhs, lconst = _parse_linear(ts, n)
    t = ts.next()
    if t.text not in RELS:
        raise ParseError(f"expected a relation, found {t.text!r}", t.line, t.col)
    rel = t.text
    rhs, rconst = _parse_linear(ts, n)
    term = Term.of(tuple(lhs.coeffs) + tuple((i, -a) for i, a in rhs.coeffs))
    return gatom(term, rel, rconst - lconst)


_UPDATE_RE = re.compile(r"^\(([^)]*)\)$")


def parse_system(text: str) -> CounterSystem:
    """Parse the line-oriented system format.

    ``system <name>`` / ``counters <n>`` / ``state <id> [p1,p2,...]`` /
    ``trans <src> -> <dst> guard "<expr>" update (<i1>,...,<in>)``.
    ``#`` starts a comment.
    """
    name = ""
    n: int | None = None
    states: list[str] = []
    labels: dict[str, frozenset[str]] = {}
    transitions: list[Transition] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "system":
            name = rest
        elif head == "counters":
            try:
                n = int(rest)
            except ValueError:
                raise ParseError(f"bad counter count {rest!r}", lineno)
            if n < 0:
                raise ParseError("counter count must be >= 0", lineno)
        elif head == "state":
            m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(\[([^\]]*)\])?$", rest)
            if not m:
                raise ParseError(f"bad state declaration {rest!r}", lineno)
            sid = m.group(1)
            if sid in labels:
                raise ParseError(f"state {sid} declared twice", lineno)
            props = frozenset(p.strip() for p in (m.group(3) or "").split(",") if p.strip())
            states.append(sid)
            labels[sid] = props
        elif head == "trans":
            if n is None:
                raise ParseError("`counters` must precede transitions", lineno)
            m = re.match(
                r'^([A-Za-z_][A-Za-z0-9_]*)\s*->\s*([A-Za-z_][A-Za-z0-9_]*)'
                r'\s+guard\s+"([^"]*)"\s+update\s+(\(.*\))$',
                rest,
            )
            if not m:
                raise ParseError(f"bad transition {rest!r}", lineno)
            src, dst, gtext, utext = m.groups()
            for endpoint in (src, dst):
                if endpoint not in labels:
                    raise ParseError(f"undeclared state {endpoint}", lineno)
            guard = parse_guard_expr(gtext, n, lineno)
            um = _UPDATE_RE.match(utext.strip())
            if um is None:
                raise ParseError(f"bad update {utext!r}", lineno)
            body = um.group(1).strip()
            update = tuple(int(x.strip()) for x in body.split(",")) if body else ()
            if len(update) != n:
                raise ParseError(f"update arity {len(update)} != counters {n}", lineno)
            transitions.append(Transition(src, guard, update, dst, len(transitions)))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno)

    if n is None:
        raise ParseError("missing `counters` declaration")
    return CounterSystem(name, n, tuple(states), labels, tuple(transitions))


def format_system(system: CounterSystem) -> str:
    lines = [f"system {system.name or 'anon'}", f"counters {system.n}"]
    for q in system.states:
        props = sorted(system.label(q))
        lines.append(f"state {q}" + (f" [{','.join(props)}]" if props else ""))
    for t in system.transitions:
        update = "(" + ",".join(str(d) for d in t.update) + ")"
        lines.append(f'trans {t.source} -> {t.target} guard "{t.guard}" update {update}')
    return "\n".join(lines) + "\n"
