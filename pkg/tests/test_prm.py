import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path as scipy_shortest_path
from support import bundled

from mrrefine.errors import Disconnected
from mrrefine.geom import ConvexPolygon, Disc, Pose2, segment_valid
from mrrefine.params import PipelineParams
from mrrefine.placement import solve_placements
from mrrefine.prm import Held, build_roadmap, dijkstra, plan_individual, shortest_path
from mrrefine.seeding import rng_for
from mrrefine.task import Grasp
from mrrefine.transit import solve_transitions

ROBOT_R = 0.2


class _Robot:
    body = Disc(ROBOT_R)


def _walls(x0, y0, x1, y1, t=0.1):
    w, h = x1 - x0, y1 - y0
    return [(ConvexPolygon.box(w + 2 * t, t), Pose2((x0 + x1) / 2, y0 - t / 2, 0)),
            (ConvexPolygon.box(w + 2 * t, t), Pose2((x0 + x1) / 2, y1 + t / 2, 0)),
            (ConvexPolygon.box(t, h), Pose2(x0 - t / 2, (y0 + y1) / 2, 0)),
            (ConvexPolygon.box(t, h), Pose2(x1 + t / 2, (y0 + y1) / 2, 0))]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_dijkstra_matches_scipy(seed, n):
    rng = np.random.default_rng(seed)
    adj = [[] for _ in range(n)]
    rows, cols, vals = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.2:
                w = float(rng.uniform(0.1, 3))
                adj[i].append((j, w))
                adj[j].append((i, w))
                rows += [i, j]
                cols += [j, i]
                vals += [w, w]
    dist, parent = dijkstra(adj, 0)
    ref = scipy_shortest_path(csr_matrix((vals, (rows, cols)), shape=(n, n)), indices=0, directed=False)
    assert np.allclose(dist, ref)
    for v in range(1, n):
        if np.isfinite(dist[v]):
            u = parent[v]
            assert dist[v] == pytest.approx(dist[u] + dict(adj[u])[v])


def test_free_space_connects_start_and_goal():
    rm = build_roadmap(_Robot, Pose2(0.5, 0.5, 0), Pose2(3.5, 3.5, 1.0), [], None, 50, 8,
                       rng_for(0, "prm"), bounds=(0, 0, 4, 4))
    path, cost = shortest_path(rm)
    assert path[0] == 0 and path[-1] == 1
    assert cost == pytest.approx(float(rm.cost_to_go[0]))
    # with no obstacles the direct edge is always present
    assert cost == pytest.approx(np.hypot(3, 3) + 0.5 * 1.0)


def test_sealed_box_disconnects():
    obstacles = _walls(1, 1, 2, 2) + _walls(0, 0, 4, 4)
    with pytest.raises(Disconnected):
        build_roadmap(_Robot, Pose2(1.5, 1.5, 0), Pose2(3.5, 3.5, 0), obstacles, None, 300, 10,
                      rng_for(0, "prm"), bounds=(0, 0, 4, 4))


def test_endpoint_in_collision_disconnects():
    with pytest.raises(Disconnected, match="goal"):
        build_roadmap(_Robot, Pose2(0.5, 0.5, 0), Pose2(2, 2, 0), [(ConvexPolygon.box(1, 1), Pose2(2, 2, 0))],
                      None, 20, 5, rng_for(0, "prm"), bounds=(0, 0, 4, 4))


def _corridor():
    # a dividing wall at x = 2 with a single 0.6 m gap around y = 2
    gap = 0.6
    lower = (ConvexPolygon.box(0.2, 2 - gap / 2), Pose2(2, (2 - gap / 2) / 2, 0))
    upper = (ConvexPolygon.box(0.2, 2 - gap / 2), Pose2(2, 4 - (2 - gap / 2) / 2, 0))
    return _walls(0, 0, 4, 4) + [lower, upper]


def test_corridor_passes_robot_alone():
    rm = build_roadmap(_Robot, Pose2(0.8, 2, 0), Pose2(3.2, 2, 0), _corridor(), None, 300, 10,
                       rng_for(1, "prm"), bounds=(0, 0, 4, 4))
    path, _ = shortest_path(rm)
    for a, b in zip(path, path[1:]):
        assert segment_valid(_Robot.body, rm.config(a), rm.config(b), _corridor())


def test_corridor_blocks_wide_held_object():
    held = Held(1, ConvexPolygon.box(0.8, 0.8), Grasp(1, 1, Pose2(0.65, 0, 0)).gamma)
    with pytest.raises(Disconnected):
        build_roadmap(_Robot, Pose2(0.8, 2, np.pi), Pose2(3.2, 2, 0), _corridor(), held, 300, 10,
                      rng_for(1, "prm"), bounds=(0, 0, 4, 4))


@pytest.fixture(scope="module")
def shelf_individual():
    scn, plan = bundled("shelf3")
    params = PipelineParams(seed=0)
    pl = solve_placements(scn, plan, params, rng_for(0, "p"), base_seed=0)
    tr = solve_transitions(scn, plan, pl, params, rng_for(0, "t"), base_seed=0)
    return scn, plan, tr, plan_individual(scn, plan, pl, tr, params, rng_for(0, "i"), base_seed=0)


def test_individual_paths_ignore_other_robots(shelf_individual):
    _, plan, _, ind = shelf_individual
    assert set(ind.per_action) == set(plan.actions)
    for ap in ind.per_action.values():
        assert ap.obstacle_labels
        assert all(lab.startswith(("fixed ", "movable ")) for lab in ap.obstacle_labels)


def test_individual_paths_join_up(shelf_individual):
    scn, plan, tr, ind = shelf_individual
    for r, ids in plan.per_robot.items():
        prev = scn.initial.robot_configs[r]
        for aid in ids:
            ap = ind.per_action[aid]
            assert ap.roadmap.config(ap.path[0]) == prev
            prev = ap.roadmap.config(ap.path[-1])
            assert prev == tr.config_of[aid]
        assert ind.park[r].config(0) == prev


def test_open_floor_pick_and_place_gives_two_roadmaps():
    from support import make_scene, plan_doc, walls

    from mrrefine.task import load_plan

    scn = make_scene(robots=[(1, 0.2, 0.5)], movables=[(1, {"disc": 0.1})], fixed=walls(0, 0, 5, 3),
                     regions=[(1, 1, 1, (1, 1.5, 0)), (2, 1, 1, (4, 1.5, 0))], init_robots={1: (2.5, 2.5, 0)},
                     init_movables={1: ((1, 1.5, 0), 1)})
    plan = load_plan(plan_doc([("t", "transit", 1, 1, 1, 1), ("f", "transfer", 1, 1, 1, 2)]), scn)
    params = PipelineParams()
    pl = solve_placements(scn, plan, params, rng_for(0, "p"), base_seed=0)
    tr = solve_transitions(scn, plan, pl, params, rng_for(0, "t"), base_seed=0)
    ind = plan_individual(scn, plan, pl, tr, params, rng_for(0, "i"), base_seed=0)
    assert set(ind.per_action) == {"t", "f"}
    assert all(ap.roadmap.connected and ap.path for ap in ind.per_action.values())


def test_blocked_straight_line_means_a_longer_path(shelf_individual):
    from mrrefine.prm import edge_length

    scn, plan, _, ind = shelf_individual
    detours = 0
    for aid, ap in ind.per_action.items():
        rm = ap.roadmap
        start, goal = rm.config(rm.start_index), rm.config(rm.goal_index)
        straight = edge_length(rm.vertices[rm.start_index], rm.vertices[rm.goal_index], 0.5)
        obstacles = [(f.shape, f.pose) for f in scn.fixed]
        if not segment_valid(Disc(0.2), start, goal, obstacles):
            detours += 1
            assert ap.cost > straight
        else:
            assert ap.cost >= straight - 1e-9
    assert detours > 0
