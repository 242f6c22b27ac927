"""Independent re-check of a Solution.

Geometry here goes through shapely rather than the planner's kernels, and
the held/resting bookkeeping is re-derived from the plan and the waypoint
action indices alone, so a bug in the planner is unlikely to be mirrored.

Motion model, shared with the solution format: between consecutive
waypoints every robot moves straight at unit speed and waits on arrival.
Each moving body is sampled so that no point of it moves more than
``step`` between samples.  Robot-robot contacts are checked on the union of
those grids, contacts with fixed shapes and resting objects on the body's
own grid.  Collision checking is resolution-based: contact that begins and
ends strictly between two samples of a body is not seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import Point, Polygon

from .geom import ConvexPolygon, Disc, DEFAULT_STEP, Pose2
from .solution import Solution
from .task import OrderingSet, TaskPlan

TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    invariant: str  # Contain | Kin | Grasp | CFree | Hold | Prec | Path
    ids: tuple
    location: dict = field(default_factory=dict)
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, invariant: str, ids, location=None, detail: str = "") -> None:
        self.violations.append(Violation(invariant, tuple(ids), dict(location or {}), detail))

    def by_invariant(self, name: str) -> list:
        return [v for v in self.violations if v.invariant == name]


# ---------------------------------------------------------------------------
# pose algebra, written out again on purpose


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _compose(a, b) -> tuple:
    c, s = math.cos(a[2]), math.sin(a[2])
    return (a[0] + c * b[0] - s * b[1], a[1] + s * b[0] + c * b[1], _wrap(a[2] + b[2]))


def _pose_close(a, b, tol: float = TOL) -> bool:
    return abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol and abs(_wrap(a[2] - b[2])) <= tol


def _tup(p) -> tuple:
    if isinstance(p, Pose2):
        return (p.x, p.y, p.theta)
    return (float(p[0]), float(p[1]), float(p[2]))


class _Body:
    """A shape at a pose, as shapely geometry (discs keep their exact radius)."""

    __slots__ = ("geom", "radius")

    def __init__(self, shape, pose):
        x, y, th = _tup(pose)
        if isinstance(shape, Disc):
            self.geom, self.radius = Point(x, y), shape.radius
        else:
            poly = Polygon(shape.vertices)
            poly = affinity.rotate(poly, th, origin=(0, 0), use_radians=True)
            self.geom, self.radius = affinity.translate(poly, x, y), 0.0


def _meet(a: _Body, b: _Body) -> bool:
    # closed sets: touching counts
    return shapely.distance(a.geom, b.geom) <= a.radius + b.radius + 0.0 and (
        a.radius + b.radius > 0.0 or shapely.intersects(a.geom, b.geom))


# ---------------------------------------------------------------------------


def validate_solution(scene, plan: TaskPlan, prec_final, sol: Solution, *, step: float = DEFAULT_STEP,
                      tol: float = TOL) -> ValidationReport:
    if prec_final is None:
        prec_final = plan.prec.with_edges(sol.induced)
    elif not isinstance(prec_final, OrderingSet):
        prec_final = OrderingSet(prec_final)
    rep = ValidationReport()
    _check_assignment(scene, plan, sol, rep, tol)
    if not sol.waypoints:
        rep.add("Path", (), {}, "empty composite path")
        return rep
    timeline = _check_path(scene, plan, sol, rep, tol)
    if timeline is not None:
        _check_prec(plan, prec_final, sol, timeline, rep, tol)
        _check_hold(plan, sol, rep)
        _check_cfree(scene, plan, sol, rep, step)
    return rep


def _pick_pose(scene, plan, sol, transit: str):
    m = plan.actions[transit].m
    chain = plan.movable_chain[m]
    i = chain.index(transit)
    return scene.initial.movable_poses[m] if i == 0 else sol.placements.get(chain[i - 1])


def _check_assignment(scene, plan, sol, rep, tol) -> None:
    for r in sorted(plan.per_robot):
        ids = plan.per_robot[r]
        for t, f in zip(ids[::2], ids[1::2]):
            act = plan.actions[t]
            robot = scene.robot[act.r]
            g = sol.grasps.get(t)
            if g is None or f not in sol.placements or t not in sol.configs or f not in sol.configs:
                rep.add("Kin", (t, f), {"action": t}, "missing assignment")
                continue
            if g.r != act.r or g.m != act.m:
                rep.add("Grasp", (t,), {"action": t}, "grasp robot or movable does not match the action")
            d = math.hypot(g.gamma.x, g.gamma.y)
            lo = robot.body.radius + _circumradius(scene.movable[act.m].body)
            if not (lo - tol <= d <= robot.reach + tol):
                rep.add("Grasp", (t,), {"action": t}, f"grasp distance {d:.6f} outside [{lo:.6f}, {robot.reach}]")
            pick = _pick_pose(scene, plan, sol, t)
            gm = _tup(g.gamma)
            if pick is None or not _pose_close(_compose(_tup(sol.configs[t]), gm), _tup(pick), tol):
                rep.add("Kin", (t,), {"action": t}, "pick configuration does not put the grasp on the object")
            if not _pose_close(_compose(_tup(sol.configs[f]), gm), _tup(sol.placements[f]), tol):
                rep.add("Kin", (f,), {"action": f}, "place configuration does not put the grasp on the placement")
            region = scene.region[plan.actions[f].w2]
            if not _contained(region, scene.movable[act.m].body, sol.placements[f], tol):
                rep.add("Contain", (f, act.m, region.id), {"action": f}, "placement leaves its region")


def _circumradius(shape) -> float:
    if isinstance(shape, Disc):
        return shape.radius
    return max(math.hypot(x, y) for x, y in shape.vertices)


def _contained(region, shape, pose, tol) -> bool:
    reg = _Body(region.polygon, region.pose).geom
    b = _Body(shape, pose)
    if b.radius > 0:
        return reg.covers(b.geom) and reg.exterior.distance(b.geom) >= b.radius - tol
    return reg.buffer(tol, join_style="mitre").covers(b.geom)


# ---------------------------------------------------------------------------
# path bookkeeping


@dataclass
class _Timeline:
    times: list  # waypoint times
    completion: dict  # action id -> time
    start: dict  # action id -> time of its first motion


def _seg_durations(sol: Solution) -> list:
    out = []
    for a, b in zip(sol.waypoints, sol.waypoints[1:]):
        out.append(max((_length(p[1:], q[1:], sol.rot_weight) for p, q in zip(a, b)), default=0.0))
    return out


def _length(a, b, rw) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1]) + rw * abs(_wrap(b[2] - a[2]))


def _check_path(scene, plan, sol, rep, tol) -> Optional[_Timeline]:
    robots = list(sol.robots)
    if sorted(robots) != sorted(scene.robot):
        rep.add("Path", tuple(robots), {}, "robot columns do not match the scenario")
        return None
    durs = _seg_durations(sol)
    times = [0.0]
    for d in durs:
        times.append(times[-1] + d)
    completion, start = {}, {}
    first = sol.waypoints[0]
    for col, r in enumerate(robots):
        ids = plan.per_robot.get(r, ())
        K = len(ids)
        w0 = first[col]
        if not _pose_close(w0[1:], _tup(scene.initial.robot_configs[r]), tol):
            rep.add("Path", (r,), {"waypoint": 0}, "first waypoint is not the initial configuration")
        if w0[0] > 0 or w0[0] < -1:
            rep.add("Path", (r,), {"waypoint": 0}, "robot starts past its first action")
        prev_k = w0[0]
        for j in range(1, len(sol.waypoints)):
            w = sol.waypoints[j][col]
            k = w[0]
            if k < prev_k or k > K:
                rep.add("Path", (r,), {"waypoint": j}, f"action index goes from {prev_k} to {k}")
                return None
            for idx in range(max(prev_k, 0), k):
                a = ids[idx]
                completion[a] = times[j]
                q = sol.configs.get(a)
                if q is None or not _pose_close(w[1:], _tup(q), tol):
                    rep.add("Path", (r, a), {"waypoint": j}, "action completes away from its transition configuration")
            prev = sol.waypoints[j - 1][col]
            if 0 <= prev[0] < K and _length(prev[1:], w[1:], sol.rot_weight) > tol:
                start.setdefault(ids[prev[0]], times[j - 1])
            prev_k = k
        if prev_k != K:
            rep.add("Path", (r,), {"waypoint": len(sol.waypoints) - 1}, "robot does not finish its actions")
    return _Timeline(times, completion, start)


def _check_prec(plan, prec, sol, tl: _Timeline, rep, tol) -> None:
    for a, b in sorted(prec.edges):
        if a not in tl.completion or b not in tl.completion:
            continue
        start_b = min(tl.start.get(b, math.inf), tl.completion[b])
        if tl.completion[a] > start_b + tol:
            rep.add("Prec", (a, b), {"time": start_b}, f"{b} starts before {a} completes")


def _held(plan, sol, r: int, k: int) -> Optional[tuple]:
    """(movable, gamma) carried by robot r while at action index k."""
    ids = plan.per_robot.get(r, ())
    if not (0 <= k < len(ids)):
        return None
    act = plan.actions[ids[k]]
    if act.is_transit or k == 0:
        return None
    g = sol.grasps.get(ids[k - 1])
    return None if g is None else (act.m, _tup(g.gamma))


def _check_hold(plan, sol, rep) -> None:
    for j, wp in enumerate(sol.waypoints):
        seen = {}
        for col, r in enumerate(sol.robots):
            h = _held(plan, sol, r, wp[col][0])
            if h is None:
                continue
            if h[0] in seen:
                rep.add("Hold", (h[0], seen[h[0]], r), {"waypoint": j}, "object held by two robots")
            seen[h[0]] = r


def _resting(scene, plan, sol, ks: list) -> dict:
    """movable -> pose for every object not carried at these action indices."""
    done = set()
    for col, r in enumerate(sol.robots):
        done.update(plan.per_robot.get(r, ())[:max(ks[col], 0)])
    out = {}
    for m in sorted(scene.movable):
        pose = _tup(scene.initial.movable_poses[m])
        for a in reversed(plan.movable_chain.get(m, ())):
            if a in done:
                pose = _tup(sol.placements[a]) if not plan.actions[a].is_transit else None
                break
        if pose is not None:
            out[m] = pose
    return out


def _check_cfree(scene, plan, sol, rep, step) -> None:
    fixed = [(f"fixed {f.id}", _Body(f.shape, f.pose)) for f in scene.fixed]
    robots = list(sol.robots)
    n = len(sol.waypoints)
    open_runs: dict = {}  # body pair -> (location of the run's first hit, against static geometry)

    def sample(ks, poses, where, on_grid=None) -> None:
        # ``on_grid``: columns checked against fixed shapes and resting objects here (None: all)
        bodies = []  # (label, owner robot or None, _Body)
        for col, r in enumerate(robots):
            q = poses[col]
            bodies.append((f"robot {r}", r, _Body(scene.robot[r].body, q)))
            h = _held(plan, sol, r, ks[col])
            if h is not None:
                bodies.append((f"movable {h[0]}", r, _Body(scene.movable[h[0]].body, _compose(q, h[1]))))
        statics = [(f"movable {m}", _Body(scene.movable[m].body, p)) for m, p in _resting(scene, plan, sol, ks).items()]
        hits, checked = set(), set()
        for la, ra, ba in bodies:
            if on_grid is not None and robots.index(ra) not in on_grid:
                continue
            checked.add(la)
            for lb, bb in fixed + statics:
                if _meet(ba, bb):
                    hits.add((la, lb))
        static_hits = set(hits)
        for x in range(len(bodies)):
            for y in range(x + 1, len(bodies)):
                la, ra, ba = bodies[x]
                lb, rb, bb = bodies[y]
                if ra == rb:
                    continue  # a robot and its own held object
                if _meet(ba, bb):
                    hits.add(tuple(sorted((la, lb))))
        present = {b[0] for b in bodies}
        for key in list(open_runs):
            loc, static = open_runs[key]
            seen = not static or key[0] in checked or key[0] not in present
            if key not in hits and seen:
                open_runs.pop(key)
                rep.add("CFree", key, loc)
        for key in hits:
            open_runs.setdefault(key, (dict(where), key in static_hits))

    for j in range(n):
        wp = sol.waypoints[j]
        ks = [w[0] for w in wp]
        a = [w[1:] for w in wp]
        sample(ks, a, {"waypoint": j})
        if j + 1 == n:
            break
        b = [w[1:] for w in sol.waypoints[j + 1]]
        lens, grids, own = [], [], {}
        for col, r in enumerate(robots):
            L = _length(a[col], b[col], sol.rot_weight)
            lens.append(L)
            if L <= 0:
                continue
            h = _held(plan, sol, r, ks[col])
            lever = 0.0
            if h is not None:
                lever = math.hypot(h[1][0], h[1][1]) + _circumradius(scene.movable[h[0]].body)
            disp = math.hypot(b[col][0] - a[col][0], b[col][1] - a[col][1]) + abs(_wrap(b[col][2] - a[col][2])) * lever
            cnt = max(1, math.ceil(disp / step - 1e-9))
            grids.append(L * np.arange(cnt + 1) / cnt)
            own[col] = set(grids[-1].tolist())
        if not grids:
            continue
        ts = np.unique(np.concatenate(grids))
        for t in ts[1:-1] if len(ts) > 2 else []:
            poses = []
            for col in range(len(robots)):
                L = lens[col]
                f = 1.0 if L <= 0 else min(float(t) / L, 1.0)
                p, q = a[col], b[col]
                poses.append((p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1]), _wrap(p[2] + f * _wrap(q[2] - p[2]))))
            on = {c for c, g in own.items() if float(t) in g}
            sample(ks, poses, {"segment": j, "time": float(t)}, on_grid=on)
        # the arrival pose is swept under the segment's action indices too
        sample(ks, b, {"segment": j, "time": float(ts[-1])})
    for key, (loc, _) in open_runs.items():
        rep.add("CFree", key, loc)
