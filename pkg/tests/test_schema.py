import pytest

from flatmc.model import (
    Configuration,
    CounterSystem,
    NotFlat,
    Term,
    Transition,
    TRUE,
    fire,
    gatom,
    parse_system,
    simulate_lasso,
)
from flatmc.schema import (
    IterationVector,
    PathSchema,
    enumerate_minimal_schemas,
    format_schema,
    is_valid_schema,
    lasso_of,
)
from test_model import FIGURE
from util import random_flat_system, rng_for


def figure_system():
    return parse_system(FIGURE)


def schema_key(s: PathSchema):
    return (
        tuple(tuple(t.index for t in seg) for seg in s.segments),
        tuple(tuple(t.index for t in loop) for loop in s.loops),
    )


def test_single_self_loop():
    s = CounterSystem("s", 0, ("q",), {}, (Transition("q", TRUE, (), "q", 0),))
    schemas = list(enumerate_minimal_schemas(s, "q"))
    assert [schema_key(x) for x in schemas] == [(((),), ((0,),))]


def test_acyclic_system_has_no_schemas():
    s = CounterSystem(
        "dag", 0, ("a", "b"), {}, (Transition("a", TRUE, (), "b", 0),)
    )
    assert list(enumerate_minimal_schemas(s, "a")) == []


def test_figure_contains_paper_schema():
    s = figure_system()
    keys = {schema_key(x) for x in enumerate_minimal_schemas(s, "q0")}
    # d1 (d2 d3)+ d4 d5 (d6 d5)^w
    assert (((0,), (3, 4)), ((1, 2), (5, 4))) in keys
    # and the variant closing at q3 instead
    assert (((0,), (3,)), ((1, 2), (4, 5))) in keys


def test_not_flat_rejected():
    ts = (
        Transition("q0", TRUE, (), "q1", 0),
        Transition("q1", TRUE, (), "q0", 1),
        Transition("q0", TRUE, (), "q0", 2),
    )
    s = CounterSystem("x", 0, ("q0", "q1"), {}, ts)
    with pytest.raises(NotFlat):
        list(enumerate_minimal_schemas(s, "q0"))


def test_each_transition_at_most_twice():
    rng = rng_for("twice")
    for _ in range(40):
        s = random_flat_system(rng)
        for schema in enumerate_minimal_schemas(s, s.states[0]):
            counts = {}
            for t in schema.word():
                counts[t.index] = counts.get(t.index, 0) + 1
            assert all(c <= 2 for c in counts.values())


def _brute_force_minimal_schemas(system, start):
    """Enumerate decorated walks satisfying the minimality predicate directly.

    Independent of the per-state-unique-cycle insight: loops are discovered
    as arbitrary transition-simple returns to their entry state.
    """
    out = set()

    def loops_ok(loops):
        seen = set()
        for loop in loops:
            ids = {t.index for t in loop}
            if seen & ids:
                return False
            seen |= ids
        return True

    def close(segments, cur, loops):
        p_word = [t for seg in segments for t in seg] + cur
        if p_word and p_word[0].source == p_word[-1].target:
            return None  # concatenated segments form a loop
        if len({t.index for t in p_word}) != len(p_word):
            return None
        return PathSchema(tuple(tuple(s) for s in segments) + (tuple(cur),), tuple(tuple(l) for l in loops))

    def walk(q, segments, cur, loops, in_loop, loop_start):
        if in_loop:
            if q == loop_start and loops[-1] and loops_ok(loops):
                yield from after_loop(q, segments, cur, loops)
            for t in system.out(q):
                if any(t.index == x.index for x in loops[-1]):
                    continue
                loops[-1].append(t)
                yield from walk(t.target, segments, cur, loops, True, loop_start)
                loops[-1].pop()
            return
        # not in a loop: may extend the current segment or start a loop here
        p_used = {x.index for seg in segments for x in seg} | {x.index for x in cur}
        for t in system.out(q):
            if t.index in p_used:
                continue  # concatenated segments must stay transition-simple
            cur.append(t)
            yield from walk(t.target, segments, cur, loops, False, None)
            cur.pop()
        loops.append([])
        yield from walk(q, segments, cur, loops, True, q)
        loops.pop()

    def after_loop(q, segments, cur, loops):
        # the loop just closed is either final (stop) or followed by more
        schema = close(segments, cur, loops)
        if schema is not None:
            yield schema
        yield from walk(q, segments + [cur[:]], [], loops, False, None)

    # note: walk() with in_loop=False handles segment extension and loop starts;
    # schemas are emitted when the last loop closes.
    def run():
        yield from walk(start, [], [], [], False, None)

    for schema in run():
        out.add(schema_key(schema))
    return out


def test_matches_brute_force_enumeration():
    rng = rng_for("schemabrute")
    checked = 0
    for _ in range(60):
        s = random_flat_system(rng, max_states=4)
        if len(s.transitions) > 6:
            continue
        checked += 1
        mine = {schema_key(x) for x in enumerate_minimal_schemas(s, s.states[0])}
        brute = _brute_force_minimal_schemas(s, s.states[0])
        assert mine == brute, (s, sorted(mine - brute), sorted(brute - mine))
        delta = max(1, len(s.transitions))
        assert len(mine) <= delta ** (2 * delta)
    assert checked >= 25


def test_count_bound_on_larger_graphs():
    rng = rng_for("schemacount")
    for _ in range(30):
        s = random_flat_system(rng, max_states=8)
        if not (1 <= len(s.transitions) <= 8):
            continue
        count = sum(1 for _ in enumerate_minimal_schemas(s, s.states[0]))
        delta = len(s.transitions)
        assert count <= delta ** (2 * delta)


def test_canonical_stream_is_subset_without_inline_cycles():
    rng = rng_for("canon")
    for _ in range(40):
        s = random_flat_system(rng)
        full = {schema_key(x) for x in enumerate_minimal_schemas(s, s.states[0])}
        canon = {schema_key(x) for x in enumerate_minimal_schemas(s, s.states[0], canonical_only=True)}
        assert canon <= full


def test_is_valid_schema_examples():
    s = figure_system()
    schema = PathSchema(
        ((s.transitions[0],), (s.transitions[3], s.transitions[4])),
        ((s.transitions[1], s.transitions[2]), (s.transitions[5], s.transitions[4])),
    )
    assert is_valid_schema(schema)
    dec = Transition("q", TRUE, (-1,), "q", 0)
    bad = PathSchema(((),), ((dec,),))
    assert not is_valid_schema(bad)
    capped = Transition("q", gatom(Term.var(1), "<=", 5), (1,), "q", 0)
    assert not is_valid_schema(PathSchema(((),), ((capped,),)))
    grow_ok = Transition("q", gatom(Term.var(1), ">=", 0), (1,), "q", 0)
    assert is_valid_schema(PathSchema(((),), ((grow_ok,),)))


def test_lasso_of_examples():
    s = figure_system()
    schema = PathSchema(
        ((s.transitions[0],), (s.transitions[3], s.transitions[4])),
        ((s.transitions[1], s.transitions[2]), (s.transitions[5], s.transitions[4])),
    )
    prefix, cycle = lasso_of(schema, (1,))
    assert [t.index for t in prefix] == [0, 1, 2, 3, 4]
    assert [t.index for t in cycle] == [5, 4]
    prefix, _ = lasso_of(schema, IterationVector((2,)))
    assert [t.index for t in prefix] == [0, 1, 2, 1, 2, 3, 4]
    single = PathSchema(((),), ((s.transitions[5], s.transitions[4]),))
    prefix, cycle = lasso_of(single, ())
    assert prefix == () and len(cycle) == 2
    with pytest.raises(ValueError):
        lasso_of(schema, (1, 1))


def test_lasso_words_belong_to_schema_language():
    s = figure_system()
    schema = PathSchema(
        ((s.transitions[0],), (s.transitions[3], s.transitions[4])),
        ((s.transitions[1], s.transitions[2]), (s.transitions[5], s.transitions[4])),
    )
    for y in range(1, 4):
        prefix, cycle = lasso_of(schema, (y,))
        run = simulate_lasso(Configuration("q0", (0,)), prefix, cycle)
        run.check()


def test_format_schema():
    s = figure_system()
    schema = PathSchema(
        ((s.transitions[0],), (s.transitions[3], s.transitions[4])),
        ((s.transitions[1], s.transitions[2]), (s.transitions[5], s.transitions[4])),
    )
    assert format_schema(schema) == "0 (1 2)+ 3 4 (5 4)w"
