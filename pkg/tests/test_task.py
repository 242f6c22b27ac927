import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from support import bundled, plan_doc

from mrrefine.errors import CycleError, ParseError, ValidationError
from mrrefine.task import (OrderingSet, add_ordering, load_plan, ready_actions, region_sequences, with_orderings,
                           write_plan)


def test_add_ordering_examples():
    p = add_ordering(OrderingSet(), "a", "b")
    assert p.edges == {("a", "b")}
    with pytest.raises(CycleError):
        add_ordering(p, "b", "a")
    chain = OrderingSet([("a", "b"), ("b", "c")])
    same = add_ordering(chain, "a", "c")
    assert same.closure_edges() == chain.closure_edges()
    with pytest.raises(CycleError):
        add_ordering(chain, "a", "a")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=30))
def test_closure_stays_a_strict_partial_order(pairs):
    prec = OrderingSet(nodes=[str(i) for i in range(8)])
    for a, b in pairs:
        try:
            prec = add_ordering(prec, str(a), str(b))
        except CycleError:
            pass
    closure = prec.closure_edges()
    assert all(a != b for a, b in closure)
    for (a, b), (c, d) in itertools.product(closure, closure):
        if b == c:
            assert (a, d) in closure
    order = prec.topological()
    pos = {n: i for i, n in enumerate(order)}
    assert all(pos[a] < pos[b] for a, b in closure)


def _two_robot_plan(prec=()):
    acts = [("a1", "transit", 1, 1, 1, 1), ("a2", "transfer", 1, 1, 1, 2),
            ("b1", "transit", 2, 2, 3, 3), ("b2", "transfer", 2, 2, 3, 4)]
    return load_plan(plan_doc(acts, prec))


def test_ready_actions_examples():
    plan = _two_robot_plan()
    assert ready_actions(plan, set()) == {"a1", "b1"}
    assert ready_actions(plan, {"a1"}) == {"a2", "b1"}
    gated = _two_robot_plan([("a2", "b1")])
    assert ready_actions(gated, set()) == {"a1"}
    assert ready_actions(gated, {"a1", "a2"}) == {"b1"}


def test_benchmark_pick_waits_for_place():
    _, plan = bundled("shelf3")
    # robot 2 picks movable 1 in region 3 after robot 1 put it there
    assert plan.actions["r2t1"].w == 3
    done = {"r1t1"}
    assert "r2t1" not in ready_actions(plan, done)
    assert "r2t1" in ready_actions(plan, done | {"r1f1"})


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_ready_actions_is_monotone(data):
    _, plan = bundled("shelf3")
    order = plan.order
    n = data.draw(st.integers(0, len(order)))
    m = data.draw(st.integers(n, len(order)))
    small, big = set(order[:n]), set(order[:m])
    for a in ready_actions(plan, small):
        if a not in big:
            assert a in ready_actions(plan, big)


def test_topological_orders_respect_robot_lists():
    _, plan = bundled("shelf3")
    pos = {a: i for i, a in enumerate(plan.order)}
    for ids in plan.per_robot.values():
        assert all(pos[a] < pos[b] for a, b in zip(ids, ids[1:]))


def test_region_sequences_examples():
    plan = _two_robot_plan()
    # movable 1 is placed in region 2 and stays
    assert [e.kind for e in region_sequences(plan, 2)[1]] == ["add"]
    from mrrefine.scene import load_scenario  # noqa: F401  (plans can be read without a scene)
    _, bench = bundled("shelf3")
    seq = region_sequences(bench, 3)
    assert sorted(seq) == [1, 2, 3, 4]
    for m, events in seq.items():
        assert [e.kind for e in events] == ["add", "remove"]
        assert bench.actions[events[0].actions[0]].r == 1
        assert bench.actions[events[1].actions[0]].r in (2, 3)


def test_initial_occupant_is_present_then_removed():
    _, plan = bundled("one_slot")
    seq = region_sequences(plan, 2)
    assert [e.kind for e in seq[1]] == ["present", "remove"]
    assert [e.kind for e in seq[2]] == ["add"]


def test_benchmark_plan_shape():
    _, plan = bundled("shelf3")
    # 8 pick/place pairs: robot 1 moves all four objects in, robots 2 and 3 two each out
    assert len(plan.actions) == 16
    assert [len(v) for v in plan.per_robot.values()] == [8, 4, 4]


def test_plan_parse_and_validation_errors():
    with pytest.raises(ParseError):
        load_plan("[]")
    with pytest.raises(ValidationError):
        load_plan(plan_doc([("a1", "transit", 1, 1, 1, 1), ("a2", "transfer", 1, 1, 1, 2)], [("a2", "a1")]))
    with pytest.raises(ValidationError):
        load_plan(plan_doc([("a1", "transit", 1, 1, 1, 1)], [("a1", "zz")]))


def test_write_plan_round_trip_with_extra_edges():
    _, plan = bundled("one_slot")
    extra = [("t1", "f2")]
    again = load_plan(write_plan(plan, extra))
    assert again.prec.precedes("t1", "f2")
    assert with_orderings(plan, extra).prec == again.prec
