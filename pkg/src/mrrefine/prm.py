"""Step 3: one probabilistic roadmap per abstract action, other robots absent."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import Disconnected, StepFailure
from .geom import DEFAULT_STEP, Pose2, compose_many, place, sweep_poses, wrap_angle, wrap_angles
from .params import PipelineParams
from .placement import PlacementSolution
from .seeding import child_seed, rng_for
from .task import TaskPlan
from .timing import NEVER, Deadline
from .transit import TransitionSolution, obstacle_batch, slot_items


@dataclass(frozen=True)
class Held:
    """An attached object: its shape and the robot-to-object transform."""

    movable: int
    shape: object
    gamma: Pose2

    @property
    def lever(self) -> float:
        return self.gamma.translation_norm + self.shape.circumradius


@dataclass
class Roadmap:
    vertices: np.ndarray  # (N, 3)
    edges: list  # (i, j, length), i < j
    adj: list  # per vertex: list of (neighbor, length)
    start_index: int = 0
    goal_index: int = 1
    lever: float = 0.0
    cost_to_go: Optional[np.ndarray] = None
    connected: bool = True

    def config(self, i: int) -> Pose2:
        return Pose2(*self.vertices[i])


@dataclass
class ActionPath:
    action_id: str
    roadmap: Roadmap
    path: list  # vertex indices start -> goal
    cost: float
    held: Optional[Held] = None
    obstacle_labels: tuple = ()


@dataclass
class IndividualPlan:
    per_action: dict  # action id -> ActionPath
    per_robot: dict = field(default_factory=dict)  # robot -> list of (action id, vertex index)
    park: dict = field(default_factory=dict)  # robot -> Roadmap used once it is done

    def robot_cost(self, r: int, plan: TaskPlan) -> float:
        return sum(self.per_action[a].cost for a in plan.per_robot[r])


def edge_length(p: np.ndarray, q: np.ndarray, rot_weight: float) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1]) + rot_weight * abs(wrap_angle(q[2] - p[2]))


def _metric_matrix(v: np.ndarray, rot_weight: float) -> np.ndarray:
    dxy = np.hypot(v[:, None, 0] - v[None, :, 0], v[:, None, 1] - v[None, :, 1])
    dth = np.abs(wrap_angles(v[:, None, 2] - v[None, :, 2]))
    return dxy + rot_weight * dth


def body_batches(robot, held: Optional[Held], poses: np.ndarray) -> list:
    """Kernel batches for every body attached to the robot at ``poses``."""
    out = [place(robot.body, poses)]
    if held is not None:
        out.append(place(held.shape, compose_many(poses, held.gamma)))
    return out


def poses_free(robot, held, poses: np.ndarray, obstacles: kernels.Placed) -> np.ndarray:
    ok = np.ones(len(poses), dtype=bool)
    if len(obstacles) == 0 or len(poses) == 0:
        return ok
    for b in body_batches(robot, held, poses):
        ok &= ~kernels.hits_any(b, obstacles)
    return ok


def edges_free(robot, held, vertices, pairs, obstacles, step) -> np.ndarray:
    """Swept validity of each (i, j) pair, all edges in one kernel call."""
    lever = held.lever if held is not None else 0.0
    chunks, owner = [], []
    for e, (i, j) in enumerate(pairs):
        s = sweep_poses(vertices[i], vertices[j], lever, step)
        chunks.append(s)
        owner.append(np.full(len(s), e))
    if not chunks:
        return np.zeros(0, dtype=bool)
    poses = np.concatenate(chunks)
    owner = np.concatenate(owner)
    ok = poses_free(robot, held, poses, obstacles)
    bad = np.bincount(owner[~ok], minlength=len(pairs))
    return bad == 0


def dijkstra(adj: list, source: int) -> tuple:
    """Uniform-cost search; returns (dist, parent)."""
    n = len(adj)
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=int)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent


def shortest_path(rm: Roadmap) -> tuple:
    dist, parent = dijkstra(rm.adj, rm.start_index)
    if not np.isfinite(dist[rm.goal_index]):
        raise Disconnected("start and goal are not connected")
    path = [rm.goal_index]
    while path[-1] != rm.start_index:
        path.append(int(parent[path[-1]]))
    return path[::-1], float(dist[rm.goal_index])


def _bounds_of(obstacles, anchors) -> tuple:
    if len(obstacles):
        b = obstacles.bound
        return (float((obstacles.cx - b).min()), float((obstacles.cy - b).min()),
                float((obstacles.cx + b).max()), float((obstacles.cy + b).max()))
    a = np.asarray(anchors)
    return (float(a[:, 0].min() - 1), float(a[:, 1].min() - 1), float(a[:, 0].max() + 1), float(a[:, 1].max() + 1))


def _connect(robot, held, verts, obstacles, k, step, rot_weight, must=()) -> tuple:
    """k-nearest candidate edges, swept-checked in one batch; returns (edges, adj)."""
    dmat = _metric_matrix(verts, rot_weight)
    np.fill_diagonal(dmat, np.inf)
    kk = min(k, len(verts) - 1)
    nbrs = np.argsort(dmat, axis=1, kind="stable")[:, :kk]
    cand = set(must)
    for i in range(len(verts)):
        for j in nbrs[i]:
            j = int(j)
            if dmat[i, j] > 0.0:
                cand.add((min(i, j), max(i, j)))
    pairs = sorted(cand)
    ok = edges_free(robot, held, verts, pairs, obstacles, step)
    edges, adj = [], [[] for _ in range(len(verts))]
    for (i, j), good in zip(pairs, ok):
        if good:
            w = edge_length(verts[i], verts[j], rot_weight)
            edges.append((i, j, w))
            adj[i].append((j, w))
            adj[j].append((i, w))
    return edges, adj


def _as_batch(obstacles) -> kernels.Placed:
    if isinstance(obstacles, kernels.Placed):
        return obstacles
    from .geom import place_all

    return place_all(obstacles)


def build_roadmap(robot, start: Pose2, goal: Pose2, obstacles, held: Optional[Held], n: int, k: int,
                  rng: np.random.Generator, *, bounds=None, step: float = DEFAULT_STEP,
                  rot_weight: float = 0.5, deadline: Deadline = NEVER) -> Roadmap:
    """PRM over the workspace box with ``start`` as vertex 0 and ``goal`` as vertex 1.

    Raises Disconnected if start or goal is in collision or they end up in
    different components.
    """
    obstacles = _as_batch(obstacles)
    ends = np.array([start.as_array(), goal.as_array()])
    if bounds is None:
        bounds = _bounds_of(obstacles, ends)
    ends_ok = poses_free(robot, held, ends, obstacles)
    if not ends_ok.all():
        raise Disconnected("start in collision" if not ends_ok[0] else "goal in collision")
    x0, y0, x1, y1 = bounds
    raw = rng.uniform((x0, y0, -math.pi), (x1, y1, math.pi), size=(n, 3))
    verts = np.concatenate([ends, raw[poses_free(robot, held, raw, obstacles)]])
    deadline.check()
    # the direct start-goal edge is always tried
    edges, adj = _connect(robot, held, verts, obstacles, k, step, rot_weight, must=[(0, 1)])
    deadline.check()
    rm = Roadmap(verts, edges, adj, 0, 1, held.lever if held is not None else 0.0)
    ctg, _ = dijkstra(adj, 1)
    rm.cost_to_go = ctg
    rm.connected = bool(np.isfinite(ctg[0]))
    if not rm.connected:
        raise Disconnected("start and goal are in different components")
    return rm


def park_roadmap(robot, final: Pose2, obstacles, n: int, k: int, rng: np.random.Generator, *,
                 bounds=None, step: float = DEFAULT_STEP, rot_weight: float = 0.5) -> Roadmap:
    """Roadmap a robot may use after its last action to get out of others' way.

    Vertex 0 is ``final``.  Only ``obstacles`` (normally the fixed shapes)
    are built in; resting objects are checked during the composite search.
    """
    obstacles = _as_batch(obstacles)
    first = final.as_array()[None]
    if bounds is None:
        bounds = _bounds_of(obstacles, first)
    x0, y0, x1, y1 = bounds
    raw = rng.uniform((x0, y0, -math.pi), (x1, y1, math.pi), size=(n, 3))
    verts = np.concatenate([first, raw[poses_free(robot, None, raw, obstacles)]])
    edges, adj = _connect(robot, None, verts, obstacles, k, step, rot_weight)
    rm = Roadmap(verts, edges, adj, 0, 0, 0.0)
    rm.cost_to_go = np.zeros(len(verts))
    return rm


def action_context(scene, plan: TaskPlan, placements: PlacementSolution, aid: str):
    """(labels, obstacle batch) for an action: fixed shapes plus every slot that may be occupied."""
    items = slot_items(scene, plan, placements, placements.cache.slots[aid])
    return obstacle_batch(scene, items)


def held_for(scene, plan: TaskPlan, transitions: TransitionSolution, aid: str) -> Optional[Held]:
    act = plan.actions[aid]
    if act.is_transit:
        return None
    r, k = plan.position[aid]
    g = transitions.grasp_of[plan.per_robot[r][k - 1]]
    return Held(act.m, scene.movable[act.m].body, g.gamma)


def action_endpoints(scene, plan: TaskPlan, transitions: TransitionSolution, aid: str) -> tuple:
    r, k = plan.position[aid]
    start = scene.initial.robot_configs[r] if k == 0 else transitions.config_of[plan.per_robot[r][k - 1]]
    return start, transitions.config_of[aid]


def plan_individual(scene, plan: TaskPlan, placements: PlacementSolution, transitions: TransitionSolution,
                    params: PipelineParams, rng: np.random.Generator, *, deadline: Deadline = NEVER,
                    base_seed: Optional[int] = None, n_prm: Optional[int] = None,
                    attempt: int = 0) -> IndividualPlan:
    if base_seed is None:
        base_seed = child_seed(rng)
    n_prm = n_prm or params.n_prm
    per_action, per_robot, park = {}, {}, {}
    for r in sorted(plan.per_robot):
        seq = []
        for aid in plan.per_robot[r]:
            deadline.check()
            start, goal = action_endpoints(scene, plan, transitions, aid)
            held = held_for(scene, plan, transitions, aid)
            labels, obstacles = action_context(scene, plan, placements, aid)
            try:
                rm = build_roadmap(scene.robot[r], start, goal, obstacles, held, n_prm, params.k_prm,
                                   rng_for(base_seed, "prm", aid, attempt), bounds=scene.bounds,
                                   step=params.step, rot_weight=params.rot_weight, deadline=deadline)
            except Disconnected as e:
                raise StepFailure(3, aid, f"Disconnected: {e}",
                                  detail={"slots": _blocking_slots(scene, plan, placements, r, aid, start, goal,
                                                                   held, n_prm, params, base_seed, attempt)}) from e
            path, cost = shortest_path(rm)
            per_action[aid] = ActionPath(aid, rm, path, cost, held, tuple(labels))
            seq.extend((aid, v) for v in path)
        per_robot[r] = seq
        final = transitions.config_of[plan.per_robot[r][-1]] if plan.per_robot[r] else scene.initial.robot_configs[r]
        park[r] = park_roadmap(scene.robot[r], final, scene.fixed_placed, n_prm, params.k_prm,
                               rng_for(base_seed, "park", r, attempt), bounds=scene.bounds,
                               step=params.step, rot_weight=params.rot_weight)
    return IndividualPlan(per_action, per_robot, park)


def _blocking_slots(scene, plan, placements, r, aid, start, goal, held, n_prm, params, base_seed, attempt) -> tuple:
    """Context slots whose objects disconnect the roadmap, nearest to the endpoints first.

    Empty when fixed shapes alone already disconnect it.
    """
    ends = np.array([start.as_array()[:2], goal.as_array()[:2]])

    def near(sid):
        p = placements.slot_pose(plan, scene, plan.slot[sid])
        return float(np.hypot(*(ends - [p.x, p.y]).T).min()), sid

    slots = tuple(sorted(placements.cache.slots[aid], key=near))
    if not slots:
        return ()
    try:
        build_roadmap(scene.robot[r], start, goal, scene.fixed_placed, held, n_prm, params.k_prm,
                      rng_for(base_seed, "prm", aid, attempt), bounds=scene.bounds,
                      step=params.step, rot_weight=params.rot_weight)
    except Disconnected:
        return ()
    return slots
