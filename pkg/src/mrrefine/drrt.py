"""Step 4: composite search over the implicit product of the per-action roadmaps.

A composite vertex gives every robot an (action index, roadmap vertex) pair.
Index -1 means the robot has not started its first action and index K means
it is done; a done robot moves on a parking roadmap to make way.

Ordering gates: a robot may move on the roadmap of action A only once
every predecessor of A has completed; until then it waits at the start.
Reaching the goal of A completes A, and the robot switches to the roadmap
of its next action right away.

Timing: robots move at unit speed, every composite edge lasts as long as its
longest moved edge, and robots that arrive early wait at their edge's end.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import StepTimeout
from .geom import DEFAULT_STEP, compose_many, interpolate, place, sweep_count, wrap_angles
from .prm import Held, Roadmap
from .task import OrderingSet
from .timing import NEVER, Deadline

STAY = None


@dataclass
class Track:
    """One robot's share of the composite problem."""

    robot: int
    body: object  # Disc
    initial: np.ndarray  # (3,)
    actions: tuple
    roadmaps: tuple
    held: tuple  # per action: Held or None
    park: Optional[Roadmap] = None  # roadmap for after the last action

    @property
    def n_actions(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class CompositeVertex:
    state: tuple  # per track: (action index, vertex index)
    progress: frozenset


@dataclass
class CompositePath:
    states: list  # CompositeVertex.state tuples, root first
    moves: list  # per edge: per track STAY or (action index, from vertex, to vertex)
    durations: list
    nodes: int = 0
    iterations: int = 0

    @property
    def makespan(self) -> float:
        return float(sum(self.durations))


def _dist(a: np.ndarray, b: np.ndarray, rot_weight: float) -> np.ndarray:
    d = a - b
    return np.hypot(d[..., 0], d[..., 1]) + rot_weight * np.abs(wrap_angles(d[..., 2]))


@dataclass
class CompositeProblem:
    tracks: tuple
    prec: OrderingSet
    shapes: dict = field(default_factory=dict)  # movable -> shape
    initial_poses: dict = field(default_factory=dict)  # movable -> (3,) array
    place_pose: dict = field(default_factory=dict)  # transfer id -> (3,) array
    chains: dict = field(default_factory=dict)  # movable -> its action ids in order
    bounds: tuple = (0.0, 0.0, 1.0, 1.0)
    step: float = DEFAULT_STEP
    rot_weight: float = 0.5

    def __post_init__(self):
        self._static_memo: dict = {}
        self._lengths = []
        self._remaining = []
        for t in self.tracks:
            lens = [{(i, j): w for i, j, w in rm.edges} for rm in self._maps(t)]
            self._lengths.append(lens)
            costs = [float(rm.cost_to_go[rm.start_index]) for rm in t.roadmaps]
            suffix = np.concatenate([np.cumsum(costs[::-1])[::-1], [0.0]]) if costs else np.zeros(1)
            self._remaining.append(suffix)
        self._movable_of = {a: m for m, chain in self.chains.items() for a in chain}

    @staticmethod
    def _maps(t: Track) -> tuple:
        return tuple(t.roadmaps) + ((t.park,) if t.park is not None else ())

    # -- state bookkeeping ------------------------------------------------

    def root(self) -> tuple:
        state = tuple((-1, 0) if t.n_actions else (0, t.park.start_index if t.park else 0) for t in self.tracks)
        return self.fire(state)[0]

    def vertex(self, state: tuple) -> CompositeVertex:
        return CompositeVertex(state, self.progress(state))

    def progress(self, state: tuple) -> frozenset:
        out = []
        for t, (k, _) in zip(self.tracks, state):
            out.extend(t.actions[:max(k, 0)])
        return frozenset(out)

    def is_goal(self, state: tuple) -> bool:
        return all(k == t.n_actions for t, (k, _) in zip(self.tracks, state))

    def config(self, i: int, kv: tuple) -> np.ndarray:
        t = self.tracks[i]
        k, v = kv
        if k < 0 or (t.n_actions == 0 and t.park is None):
            return t.initial
        return self.roadmap(i, k).vertices[v]

    def configs(self, state: tuple) -> np.ndarray:
        return np.array([self.config(i, kv) for i, kv in enumerate(state)])

    def held_at(self, i: int, kv: tuple) -> Optional[Held]:
        k = kv[0]
        t = self.tracks[i]
        return t.held[k] if 0 <= k < t.n_actions else None

    def remaining(self, state: tuple) -> float:
        """Sum over robots of the Step-3 cost still ahead of them."""
        total = 0.0
        for i, (k, v) in enumerate(state):
            t = self.tracks[i]
            if k >= t.n_actions:
                continue
            if k < 0:
                total += self._remaining[i][0]
            else:
                total += float(t.roadmaps[k].cost_to_go[v]) + self._remaining[i][k + 1]
        return total

    def gate_allows(self, state: tuple, i: int, progress: Optional[frozenset] = None) -> bool:
        """Whether robot ``i`` may use the edges of its current roadmap.

        A robot that completed action k-1 stands at the start of roadmap k
        and may leave it only once every predecessor of action k completed.
        """
        t = self.tracks[i]
        k = state[i][0]
        if not 0 <= k < t.n_actions:
            return True
        if progress is None:
            progress = self.progress(state)
        return self.prec.preds(t.actions[k]) <= progress

    def fire(self, state: tuple) -> tuple:
        """Complete every action whose goal vertex was reached; returns (state, fired action ids).

        Reaching the goal completes the action at once, so other robots'
        gates see it; the robot then waits at the start of its next roadmap
        until that roadmap's gate opens.
        """
        state = list(state)
        fired = []
        changed = True
        while changed:
            changed = False
            prog = self.progress(tuple(state))
            for i, t in enumerate(self.tracks):
                k, v = state[i]
                if k >= t.n_actions:
                    continue
                if k >= 0:
                    # a zero-length action still has to wait for its gate
                    if v != t.roadmaps[k].goal_index or not self.gate_allows(tuple(state), i, prog):
                        continue
                    fired.append(t.actions[k])
                if k + 1 < t.n_actions:
                    state[i] = (k + 1, t.roadmaps[k + 1].start_index)
                elif t.park is not None:
                    state[i] = (t.n_actions, t.park.start_index)
                else:
                    state[i] = (t.n_actions, t.roadmaps[k].goal_index)
                changed = True
                prog = self.progress(tuple(state))
        return tuple(state), fired

    # -- geometry -----------------------------------------------------------

    def statics(self, progress: frozenset) -> kernels.Placed:
        """Kernel batch of every movable resting (not held) under ``progress``."""
        got = self._static_memo.get(progress)
        if got is not None:
            return got
        parts = []
        for m in sorted(self.shapes):
            pose = self.initial_poses.get(m)
            for a in reversed(self.chains.get(m, ())):
                if a in progress:
                    pose = self.place_pose.get(a)  # None when the last completed action grasped it
                    break
            if pose is not None:
                parts.append(place(self.shapes[m], np.asarray(pose)[None]))
        got = kernels.concat(parts)
        self._static_memo[progress] = got
        return got

    def edge_length(self, i: int, k: int, a: int, b: int) -> float:
        lens = self._lengths[i][min(k, len(self._lengths[i]) - 1)]
        return lens[(a, b)] if a < b else lens[(b, a)]

    def roadmap(self, i: int, k: int) -> Roadmap:
        """Roadmap robot ``i`` moves on at action index ``k``; once done, its parking roadmap."""
        maps = self._maps(self.tracks[i])
        return maps[min(k, len(maps) - 1)]

    def neighbors(self, i: int, kv: tuple, progress: Optional[frozenset] = None) -> list:
        """Roadmap neighbors robot ``i`` may move to; none while its gate is closed.

        ``progress`` is the progress of the composite state ``kv`` belongs to.
        """
        k, v = kv
        t = self.tracks[i]
        if k < 0 or (k >= t.n_actions and t.park is None):
            return []  # without a parking roadmap a done robot stays put
        if progress is not None and 0 <= k < t.n_actions and not self.prec.preds(t.actions[k]) <= progress:
            return []
        return self.roadmap(i, k).adj[v]

    def segment_conflicts(self, state: tuple, starts: np.ndarray, ends: np.ndarray,
                          first_only: bool = False) -> tuple:
        """Sweep every robot from ``starts`` to ``ends`` at unit speed under the modes of ``state``.

        Returns (duration, conflicts) where conflicts lists (i, j) track pairs
        whose bodies meet, with j = -1 for a resting object.
        """
        moving, lens, grids = [], {}, []
        for i in range(len(state)):
            a, b = starts[i], ends[i]
            if np.array_equal(a, b):
                continue
            held = self.held_at(i, state[i])
            length = float(_dist(a, b, self.rot_weight))
            n = sweep_count(a, b, held.lever if held is not None else 0.0, self.step)
            moving.append(i)
            lens[i] = length
            grids.append(length * np.arange(n + 1) / n)
        duration = max(lens.values(), default=0.0)
        if not moving:
            return duration, []
        times = np.unique(np.concatenate(grids)) if duration > 0 else np.zeros(1)
        nt = len(times)
        bodies = []  # per track: Placed for the robot, then its held object
        for i, kv in enumerate(state):
            if i in lens and lens[i] > 0:
                poses = interpolate(starts[i], ends[i], np.minimum(times / lens[i], 1.0))
            else:
                poses = np.repeat(np.asarray(ends[i])[None], nt, axis=0)
            own = [place(self.tracks[i].body, poses)]
            held = self.held_at(i, kv)
            if held is not None:
                own.append(place(held.shape, compose_many(poses, held.gamma)))
            bodies.append(own)
        left, right, owner = [], [], []
        for i, j in itertools.combinations(range(len(state)), 2):
            if i not in lens and j not in lens:
                continue
            for ba in bodies[i]:
                for bb in bodies[j]:
                    left.append(ba)
                    right.append(bb)
                    owner.append((i, j))
        conflicts = []
        if left:
            hit = kernels.collide_pairs(kernels.concat(left), kernels.concat(right)).reshape(len(left), nt)
            for (i, j), h in zip(owner, hit.any(axis=1)):
                if h and (i, j) not in conflicts:
                    conflicts.append((i, j))
                    if first_only:
                        return duration, conflicts
        statics = self.statics(self.progress(state))
        if len(statics):
            for i in moving:
                # done robots left the Step-3 obstacle context behind
                check = bodies[i][1:] if state[i][0] < self.tracks[i].n_actions else bodies[i]
                if any(kernels.hits_any(b, statics).any() for b in check):
                    conflicts.append((i, -1))
                    if first_only:
                        return duration, conflicts
        return duration, conflicts

    def edge_valid(self, state: tuple, moves: tuple) -> Optional[float]:
        """Duration of the composite edge, or None if some bodies meet along it."""
        if all(mv is STAY for mv in moves):
            raise ValueError("a composite edge must move at least one robot")
        starts = self.configs(state)
        ends = starts.copy()
        for i, mv in enumerate(moves):
            if mv is not STAY:
                ends[i] = self.roadmap(i, state[i][0]).vertices[mv]
        duration, bad = self.segment_conflicts(state, starts, ends, first_only=True)
        return None if bad else duration

    def placements_clear(self, state: tuple, fired) -> bool:
        """Objects just put down must not land on any robot or held object."""
        return not self.placement_blockers(state, fired)

    def placement_blockers(self, state: tuple, fired) -> list:
        """Tracks whose robot or held object overlaps an object just put down."""
        new = [a for a in fired if a in self.place_pose]
        if not new:
            return []
        obj = kernels.concat([place(self.shapes[self._movable_of[a]], np.asarray(self.place_pose[a])[None])
                              for a in new])
        out = []
        for i, kv in enumerate(state):
            q = self.config(i, kv)[None]
            held = self.held_at(i, kv)
            if kernels.hits_any(place(self.tracks[i].body, q), obj)[0] or (
                    held is not None and kernels.hits_any(place(held.shape, compose_many(q, held.gamma)), obj)[0]):
                out.append(i)
        return out

    def step_to(self, state: tuple, moves: tuple) -> Optional[tuple]:
        """(next state, duration) after a validated composite edge, or None."""
        progress = self.progress(state)
        if any(mv is not STAY and not self.gate_allows(state, i, progress) for i, mv in enumerate(moves)):
            return None
        duration = self.edge_valid(state, moves)
        if duration is None:
            return None
        raw = tuple(kv if mv is STAY else (kv[0], mv) for kv, mv in zip(state, moves))
        nxt, fired = self.fire(raw)
        if not self.placements_clear(nxt, fired):
            return None
        return nxt, duration


def gate_allows(problem: CompositeProblem, v: CompositeVertex, r: int) -> bool:
    """Whether robot ``r`` (track index) may cross into its next roadmap at ``v``."""
    return problem.gate_allows(v.state, r, v.progress)


def edge_valid_composite(problem: CompositeProblem, u: CompositeVertex, moves: tuple) -> bool:
    return problem.step_to(u.state, moves) is not None


def oracle_expand(problem: CompositeProblem, state: tuple, sample: np.ndarray) -> tuple:
    """Per robot, the neighbor closest to its sample (or stay); never all-stay."""
    moves, best_single = [], None
    progress = problem.progress(state)
    for i, kv in enumerate(state):
        cur = problem.config(i, kv)
        here = float(_dist(cur, sample[i], problem.rot_weight))
        choice, best = STAY, here
        for nb, _ in problem.neighbors(i, kv, progress):
            d = float(_dist(problem.roadmap(i, kv[0]).vertices[nb], sample[i], problem.rot_weight))
            if d < best:
                choice, best = nb, d
            gain = d - here
            if best_single is None or gain < best_single[0]:
                best_single = (gain, i, nb)
        moves.append(choice)
    if all(m is STAY for m in moves):
        if best_single is None:
            return tuple(moves)
        moves[best_single[1]] = best_single[2]
    return tuple(moves)


class _Tree:
    def __init__(self, problem: CompositeProblem, root: tuple):
        self.p = problem
        self.states = [root]
        self.parent = [-1]
        self.moves = [None]
        self.dur = [0.0]
        self.h = [problem.remaining(root)]
        self.fails = [0]
        self.index = {root: 0}
        self.conf = [problem.configs(root)]

    def add(self, parent: int, moves: tuple, state: tuple, duration: float) -> int:
        self.states.append(state)
        self.parent.append(parent)
        self.moves.append(moves)
        self.dur.append(duration)
        self.h.append(self.p.remaining(state))
        self.fails.append(0)
        self.conf.append(self.p.configs(state))
        self.index[state] = len(self.states) - 1
        return len(self.states) - 1

    def path(self, node: int) -> CompositePath:
        chain = []
        while node >= 0:
            chain.append(node)
            node = self.parent[node]
        chain.reverse()
        out = CompositePath([self.states[chain[0]]], [], [])
        for a, b in zip(chain, chain[1:]):
            sa = self.states[a]
            mv = tuple(STAY if m is STAY else (sa[i][0], sa[i][1], m) for i, m in enumerate(self.moves[b]))
            out.states.append(self.states[b])
            out.moves.append(mv)
            out.durations.append(self.dur[b])
        return out


def _subsets(items: list, weight: dict) -> list:
    items = sorted(items, key=lambda i: (-weight[i], i))
    if len(items) > 4:
        return [tuple(items)] + [(i,) for i in items]
    out = []
    for size in range(len(items), 0, -1):
        out.extend(itertools.combinations(items, size))
    return out


def search(problem: CompositeProblem, rng: np.random.Generator, *, deadline: Deadline = NEVER,
           goal_bias: float = 0.2, explore: float = 0.1, max_iterations: Optional[int] = None) -> CompositePath:
    """Grow a tree over the implicit composite roadmap until every robot is done.

    Raises StepTimeout when ``deadline`` passes (or ``max_iterations`` is hit).
    """
    root = problem.root()
    tree = _Tree(problem, root)
    if problem.is_goal(root):
        return tree.path(0)
    R = len(problem.tracks)

    def try_move(node: int, moves: tuple) -> Optional[int]:
        state = tree.states[node]
        got = problem.step_to(state, moves)
        if got is None:
            return None
        nxt, duration = got
        if nxt in tree.index:
            return None
        return tree.add(node, moves, nxt, duration)

    def make_way(node: int, want: dict) -> Optional[int]:
        """Step an idle robot away from the robots that want to move."""
        state = tree.states[node]
        progress = problem.progress(state)
        conf = tree.conf[node]
        busy = np.array([conf[i] for i in want])
        for j in range(R):
            if j in want:
                continue
            rm_nbs = problem.neighbors(j, state[j], progress)
            if not rm_nbs:
                continue
            verts = problem.roadmap(j, state[j][0]).vertices
            far = sorted(rm_nbs, key=lambda e: (-float(_dist(busy, verts[e[0]][None], 0.0).min()), e[0]))
            for nb, _ in far[:4]:
                for moves in (tuple(want.get(i, nb if i == j else STAY) for i in range(R)),
                              tuple(nb if i == j else STAY for i in range(R))):
                    child = try_move(node, moves)
                    if child is not None:
                        return child
        return None

    def rollout(node: int) -> Optional[int]:
        """Follow every robot's shortest path greedily; returns a goal node if reached."""
        yields = 0
        while True:
            if problem.is_goal(tree.states[node]):
                return node
            deadline.check()
            state = tree.states[node]
            progress = problem.progress(state)
            want, weight = {}, {}
            for i, (k, v) in enumerate(state):
                t = problem.tracks[i]
                if not 0 <= k < t.n_actions:
                    continue
                rm = t.roadmaps[k]
                if v == rm.goal_index or not problem.gate_allows(state, i, progress):
                    continue
                nb = min(rm.adj[v], key=lambda e: (e[1] + rm.cost_to_go[e[0]], e[0]))[0]
                want[i] = nb
                weight[i] = float(rm.cost_to_go[v])
            if not want:
                return None
            for sub in _subsets(list(want), weight):
                moves = tuple(want[i] if i in sub else STAY for i in range(R))
                child = try_move(node, moves)
                if child is not None:
                    node = child
                    break
            else:
                yields += 1
                child = make_way(node, want) if yields <= 24 else None
                if child is None:
                    return None
                node = child

    goal = rollout(0)
    iterations = 0
    x0, y0, x1, y1 = problem.bounds
    while goal is None:
        deadline.check()
        iterations += 1
        if max_iterations is not None and iterations > max_iterations:
            raise StepTimeout("composite search iteration limit")
        u = rng.random()
        if u < goal_bias:
            score = np.asarray(tree.h) + np.asarray(tree.fails, dtype=float)
            node = int(np.argmin(score))
            tree.fails[node] += 1
            goal = rollout(node)
            continue
        if u < goal_bias + explore:
            node = int(rng.integers(len(tree.states)))
            state = tree.states[node]
            progress = problem.progress(state)
            moves = []
            for i, kv in enumerate(state):
                nbs = problem.neighbors(i, kv, progress)
                c = int(rng.integers(len(nbs) + 1))
                moves.append(STAY if c == len(nbs) else nbs[c][0])
            if all(m is STAY for m in moves):
                continue
            moves = tuple(moves)
        else:
            sample = np.column_stack([rng.uniform(x0, x1, R), rng.uniform(y0, y1, R),
                                      rng.uniform(-math.pi, math.pi, R)])
            conf = np.asarray(tree.conf)
            node = int(np.argmin(_dist(conf, sample[None], problem.rot_weight).sum(axis=1)))
            moves = oracle_expand(problem, tree.states[node], sample)
            if all(m is STAY for m in moves):
                continue
        child = try_move(node, moves)
        if child is not None:
            goal = rollout(child)
    out = tree.path(goal)
    out.nodes = len(tree.states)
    out.iterations = iterations
    return out


def composite_problem(scene, plan, prec: OrderingSet, individual, transitions, placements,
                      step: float = DEFAULT_STEP, rot_weight: float = 0.5) -> CompositeProblem:
    """Assemble the composite problem from the outputs of Steps 1-3."""
    tracks = []
    for r in sorted(plan.per_robot):
        ids = tuple(plan.per_robot[r])
        paths = [individual.per_action[a] for a in ids]
        tracks.append(Track(r, scene.robot[r].body, scene.initial.robot_configs[r].as_array(), ids,
                            tuple(p.roadmap for p in paths), tuple(p.held for p in paths),
                            individual.park.get(r)))
    return CompositeProblem(
        tuple(tracks), prec,
        shapes={m.id: m.body for m in scene.movables},
        initial_poses={m: p.as_array() for m, p in scene.initial.movable_poses.items()},
        place_pose={a: p.as_array() for a, p in placements.pose_of.items()},
        chains=dict(plan.movable_chain), bounds=scene.bounds, step=step, rot_weight=rot_weight)


def drrt_search(scene, plan, prec: OrderingSet, individual, transitions, placements, time_limit: float,
                rng: np.random.Generator, *, goal_bias: float = 0.2, step: float = DEFAULT_STEP,
                rot_weight: float = 0.5, deadline: Deadline = NEVER) -> CompositePath:
    problem = composite_problem(scene, plan, prec, individual, transitions, placements, step, rot_weight)
    return search(problem, rng, deadline=deadline.sooner(time_limit, "composite search"), goal_bias=goal_bias)
