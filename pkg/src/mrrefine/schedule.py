"""Asynchronous execution of a composite path.

The composite search moves robots in lockstep: every composite edge lasts
as long as its longest move, so a robot on a short edge waits for the
others.  Here the path is turned into a dependency graph instead.  Each
robot keeps its own sequence of moves and transitions, but it waits only
where the lockstep order matters:

* two moves of different robots whose swept bodies meet keep their lockstep
  order, and moves of the same composite edge that meet start together;
* a move that meets a resting object stays on the same side of the
  transition that puts the object down or picks it up;
* a robot moves on or completes an action only after the action's
  predecessors completed.

Every node then starts as early as its dependencies allow.  The result is
expanded back into waypoints at all event times and checked again; the
caller falls back to the lockstep timing if that check fails.
"""

from __future__ import annotations

import graphlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .geom import compose_many, interpolate, place, sweep_poses
from .solution import move_length

log = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass
class _Move:
    robot: int
    step: int  # composite edge index: from state ``step`` to ``step + 1``
    a: np.ndarray
    b: np.ndarray
    k: int
    length: float
    bodies: list  # Placed batches over the sweep poses
    center: np.ndarray
    radius: float


@dataclass
class _Fire:
    robot: int
    step: int  # state index at which the transition shows
    k: int  # action index entered
    completed: tuple  # action ids completed by this transition


def _bodies_meet(xs: list, ys: list) -> bool:
    """Any body of one sweep against any body of the other, poses unsynchronized."""
    for a in xs:
        for b in ys:
            d = np.hypot(a.cx[:, None] - b.cx[None, :], a.cy[:, None] - b.cy[None, :])
            ia, ib = np.nonzero(d <= a.bound[:, None] + b.bound[None, :] + _EPS)
            if len(ia) and kernels.collide_pairs(kernels.take(a, ia), kernels.take(b, ib)).any():
                return True
    return False


def _sweep_bodies(problem, i: int, k: int, a: np.ndarray, b: np.ndarray, exclude: Optional[int] = None) -> list:
    t = problem.tracks[i]
    held = t.held[k] if 0 <= k < t.n_actions else None
    lever = held.lever if held is not None else 0.0
    poses = sweep_poses(a, b, lever, problem.step)
    out = [place(t.body, poses)]
    if held is not None and held.movable != exclude:
        out.append(place(held.shape, compose_many(poses, held.gamma)))
    return out


def _extent(bodies: list) -> tuple:
    cx = np.concatenate([b.cx for b in bodies])
    cy = np.concatenate([b.cy for b in bodies])
    bd = np.concatenate([b.bound for b in bodies])
    c = np.array([(cx.min() + cx.max()) / 2, (cy.min() + cy.max()) / 2])
    r = float(np.max(np.hypot(cx - c[0], cy - c[1]) + bd))
    return c, r


def _events(problem, states: list, configs: list) -> tuple:
    moves, fires = [], []
    for j in range(len(states) - 1):
        s0, s1 = states[j], states[j + 1]
        for i in range(len(s0)):
            a, b = configs[j][i], configs[j + 1][i]
            if not np.array_equal(a, b):
                k = s0[i][0]
                bodies = _sweep_bodies(problem, i, k, a, b)
                c, r = _extent(bodies)
                moves.append(_Move(i, j, a, b, k, move_length(a, b, problem.rot_weight), bodies, c, r))
            k0, k1 = s0[i][0], s1[i][0]
            if k1 != k0:
                acts = problem.tracks[i].actions
                fires.append(_Fire(i, j + 1, k1, tuple(acts[max(k0, 0):max(k1, 0)])))
    return moves, fires


def _resting_runs(problem, states: list) -> list:
    """(movable, pose, first state, end state) for each stretch an object rests in one place."""
    runs = []
    poses_by_state = []
    for st in states:
        prog = problem.progress(st)
        cur = {}
        for m in sorted(problem.shapes):
            pose = problem.initial_poses.get(m)
            for a in reversed(problem.chains.get(m, ())):
                if a in prog:
                    pose = problem.place_pose.get(a)
                    break
            cur[m] = pose
        poses_by_state.append(cur)
    for m in sorted(problem.shapes):
        start = None
        for j, cur in enumerate(poses_by_state + [{}]):
            pose = cur.get(m)
            prev = poses_by_state[start][m] if start is not None else None
            same = pose is not None and prev is not None and np.array_equal(pose, prev)
            if start is not None and not same:
                runs.append((m, prev, start, j))
                start = None
            if start is None and pose is not None and j < len(poses_by_state):
                start = j
    return runs


def retime(problem, states: list) -> Optional[tuple]:
    """Earliest-start schedule for a lockstep composite path.

    Returns (times, rows): per waypoint its time and the per-robot
    ``(k, x, y, theta)`` rows, or None if the retimed motion fails the check.
    """
    configs = [problem.configs(s) for s in states]
    moves, fires = _events(problem, states, configs)
    R = len(problem.tracks)
    nodes = [("m", n) for n in range(len(moves))] + [("f", n) for n in range(len(fires))]

    def key(node):
        kind, n = node
        return 2 * moves[n].step + 1 if kind == "m" else 2 * fires[n].step

    preds: dict = {node: set() for node in nodes}
    # per-robot sequence
    for i in range(R):
        seq = sorted((nd for nd in nodes if (moves[nd[1]].robot if nd[0] == "m" else fires[nd[1]].robot) == i),
                     key=key)
        for u, v in zip(seq, seq[1:]):
            preds[v].add(u)
    # moves of different robots whose sweeps meet
    group = list(range(len(moves)))

    def root(x):
        while group[x] != x:
            group[x] = group[group[x]]
            x = group[x]
        return x

    for u in range(len(moves)):
        mu = moves[u]
        for v in range(u + 1, len(moves)):
            mv = moves[v]
            if mu.robot == mv.robot or np.hypot(*(mu.center - mv.center)) > mu.radius + mv.radius + _EPS:
                continue
            if not _bodies_meet(mu.bodies, mv.bodies):
                continue
            if mu.step == mv.step:
                group[root(u)] = root(v)
            elif mu.step < mv.step:
                preds[("m", v)].add(("m", u))
            else:
                preds[("m", u)].add(("m", v))
    # resting objects against moves
    fire_of = {a: ("f", n) for n, f in enumerate(fires) for a in f.completed}
    for m, pose, first, end in _resting_runs(problem, states):
        obj = place(problem.shapes[m], np.asarray(pose)[None])
        placed_by = next((a for a, f in fire_of.items() if fires[f[1]].step == first
                          and problem.place_pose.get(a) is not None
                          and np.array_equal(problem.place_pose[a], pose)), None) if first > 0 else None
        picked_by = None
        if end < len(states):
            picked_by = next((a for a, f in fire_of.items() if fires[f[1]].step == end
                              and a in problem.chains.get(m, ()) and a not in problem.place_pose), None)
        for n, mv in enumerate(moves):
            if first <= mv.step < end:
                continue  # the lockstep path already moved past it
            if np.hypot(mv.center[0] - obj.cx[0], mv.center[1] - obj.cy[0]) > mv.radius + float(obj.bound[0]) + _EPS:
                continue
            bodies = _sweep_bodies(problem, mv.robot, mv.k, mv.a, mv.b, exclude=m)
            if not _bodies_meet(bodies, [obj]):
                continue
            if mv.step < first and placed_by is not None:
                preds[fire_of[placed_by]].add(("m", n))
            elif mv.step >= end and picked_by is not None:
                preds[("m", n)].add(fire_of[picked_by])
    # ordering gates: an action's motion and completion wait for its predecessors
    for node in nodes:
        kind, n = node
        ev = moves[n] if kind == "m" else fires[n]
        t = problem.tracks[ev.robot]
        own = [ev.k] if kind == "m" else [t.actions.index(a) for a in ev.completed]
        for k in own:
            if not 0 <= k < t.n_actions:
                continue
            for a in problem.prec.preds(t.actions[k]):
                if a in fire_of and fire_of[a] != node:
                    preds[node].add(fire_of[a])
    # collapse synchronized groups and schedule
    def gid(node):
        return ("g", root(node[1])) if node[0] == "m" else node

    gpreds: dict = {}
    for v, us in preds.items():
        gv = gid(v)
        gpreds.setdefault(gv, set())
        for u in us:
            if gid(u) != gv:
                gpreds[gv].add(u)
    members: dict = {}
    for n in range(len(moves)):
        members.setdefault(gid(("m", n)), []).append(n)
    try:
        order = list(graphlib.TopologicalSorter({g: {gid(u) for u in us} for g, us in gpreds.items()}).static_order())
    except graphlib.CycleError:
        log.info("retiming: dependency cycle, keeping lockstep timing")
        return None
    start, end = {}, {}
    for g in order:
        t0 = max((end[u] for u in gpreds.get(g, ())), default=0.0)
        if g[0] == "g":
            for n in members[g]:
                start[("m", n)] = t0
                end[("m", n)] = t0 + moves[n].length
        else:
            start[g] = end[g] = t0
    return _expand(problem, states, moves, fires, start, end)


def _expand(problem, states, moves, fires, start, end) -> Optional[tuple]:
    R = len(problem.tracks)
    times = sorted({round(x, 12) for x in list(start.values()) + list(end.values())} | {0.0})
    per_moves = [[] for _ in range(R)]
    for n, m in enumerate(moves):
        per_moves[m.robot].append((start[("m", n)], end[("m", n)], m))
    per_fires = [[] for _ in range(R)]
    for n, f in enumerate(fires):
        per_fires[f.robot].append((start[("f", n)], f.k))
    for lst in per_moves + per_fires:
        lst.sort(key=lambda x: x[0])
    init = problem.configs(states[0])
    rows = []
    for t in times:
        row = []
        for i in range(R):
            q = init[i]
            for s, e, m in per_moves[i]:
                if s - _EPS > t:
                    break
                if t >= e - _EPS or m.length <= 0:
                    q = m.b
                elif t <= s + _EPS:
                    q = m.a
                    break
                else:
                    q = interpolate(m.a, m.b, np.array([(t - s) / m.length]))[0]
                    break
            k = states[0][i][0]
            for s, kk in per_fires[i]:
                if s <= t + _EPS:
                    k = kk
            row.append((int(k), float(q[0]), float(q[1]), float(q[2])))
        rows.append(row)
    if not _check(problem, rows):
        log.info("retiming: retimed motion failed the collision check, keeping lockstep timing")
        return None
    return times, rows


def _check(problem, rows) -> bool:
    for a, b in zip(rows, rows[1:]):
        state = tuple((w[0], 0) for w in a)
        starts = np.array([w[1:] for w in a])
        ends = np.array([w[1:] for w in b])
        _, bad = problem.segment_conflicts(state, starts, ends, first_only=True)
        if bad:
            return False
    for w in rows:
        state = tuple((x[0], 0) for x in w)
        statics = problem.statics(problem.progress(state))
        if not len(statics):
            continue
        for i, x in enumerate(w):
            q = np.array([x[1:]])
            t = problem.tracks[i]
            if kernels.hits_any(place(t.body, q), statics)[0]:
                return False
            held = problem.held_at(i, state[i])
            if held is not None and kernels.hits_any(place(held.shape, compose_many(q, held.gamma)), statics)[0]:
                return False
    return True
