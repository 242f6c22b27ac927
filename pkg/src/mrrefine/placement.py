"""Step 1: placement poses for every transfer, with least-commitment ordering induction.

Each region is solved on its own.  The first attempt asks every movable
that ever visits the region to coexist; only if no combination of the
drawn samples allows that are remove-before-add edges introduced, and only
between colliding pairs, fewest edges first.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import CycleError, Infeasible, NoSamples
from .geom import ConvexPolygon, Disc, Pose2, Shape, place
from .params import PipelineParams
from .seeding import child_seed, rng_for
from .task import OrderingSet, Slot, TaskPlan, add_ordering
from .timing import NEVER, Deadline

log = logging.getLogger(__name__)

_BATCH = 64


@dataclass(frozen=True)
class CollisionCache:
    """Per action id, the slots (movable stays) that may be present while it runs."""

    slots: dict
    fixed: tuple

    def movables(self, aid: str) -> tuple:
        return tuple(sorted({s.split("@")[0] for s in self.slots[aid]}))


@dataclass
class PlacementSolution:
    pose_of: dict  # transfer id -> Pose2
    induced: OrderingSet  # edges added on top of the plan's orderings
    cache: CollisionCache
    prec: OrderingSet  # plan orderings plus induced
    combos: dict = field(default_factory=dict)  # region -> chosen sample indices
    samples: dict = field(default_factory=dict)  # slot id -> list of Pose2

    def slot_pose(self, plan: TaskPlan, scene, slot: Slot) -> Pose2:
        if slot.add is None:
            return scene.initial.movable_poses[slot.movable]
        return self.pose_of[slot.add]


@dataclass
class PlacementTabu:
    combos: set = field(default_factory=set)  # (region, combo tuple)
    samples: set = field(default_factory=set)  # (slot id, sample index)

    def __len__(self):
        return len(self.combos) + len(self.samples)


# ---------------------------------------------------------------------------
# sampling


def contained_mask(region, body: Shape, poses: np.ndarray) -> np.ndarray:
    """Vectorized Contain test for a batch of poses of ``body``."""
    rv = place(region.polygon, region.pose.as_array()[None]).verts[0]
    e = np.roll(rv, -1, axis=0) - rv
    length = np.hypot(e[:, 0], e[:, 1])
    if isinstance(body, Disc):
        pts = poses[:, None, :2]
        margin = body.radius
    else:
        pts = place(body, poses).verts
        margin = 0.0
    rel = pts[:, :, None, :] - rv[None, None, :, :]
    sd = (e[None, None, :, 0] * rel[..., 1] - e[None, None, :, 1] * rel[..., 0]) / length
    return np.all(sd >= margin - 1e-12, axis=(1, 2))


def sample_placement(region, body: Shape, rng: np.random.Generator, n: int,
                     obstacles: Optional[kernels.Placed] = None) -> list:
    """Up to ``n`` poses of ``body`` inside ``region``, uniform over valid translations.

    Raises NoSamples when none of the ``100 * n`` trials is valid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, y0, x1, y1 = region.bbox()
    out: list = []
    trials = 0
    budget = 100 * n
    while len(out) < n and trials < budget:
        k = min(_BATCH, budget - trials)
        xy = rng.uniform((x0, y0), (x1, y1), size=(k, 2))
        th = rng.uniform(-math.pi, math.pi, size=k)
        if isinstance(body, Disc):
            th = np.zeros(k)
        poses = np.column_stack([xy, th])
        ok = contained_mask(region, body, poses)
        if obstacles is not None and len(obstacles) and ok.any():
            ok[ok] = ~kernels.hits_any(place(body, poses[ok]), obstacles)
        trials += k
        for p in poses[ok]:
            if len(out) < n:
                out.append(Pose2(*p))
    if not out:
        raise NoSamples(f"no valid placement in region {region.id} after {trials} trials")
    return out


# ---------------------------------------------------------------------------
# occupancy reasoning


def may_coexist(prec: OrderingSet, a: Slot, b: Slot) -> bool:
    """False iff the orderings force the two stays apart in time."""
    if a.movable == b.movable:
        return False
    if a.remove is not None and b.add is not None and prec.precedes(a.remove, b.add):
        return False
    if b.remove is not None and a.add is not None and prec.precedes(b.remove, a.add):
        return False
    return True


def may_be_present(prec: OrderingSet, slot: Slot, action) -> bool:
    """Whether ``slot`` may hold a static object at some instant of ``action``."""
    if not action.is_transit and action.m == slot.movable:
        return False  # carried by this very action
    if slot.pick is not None and slot.pick != action.id and prec.precedes(slot.pick, action.id):
        return False
    if slot.add is not None and (slot.add == action.id or prec.precedes(action.id, slot.add)):
        return False
    return True


def build_cache(scene, plan: TaskPlan, prec: OrderingSet) -> CollisionCache:
    slots = {}
    for aid in plan.order:
        act = plan.actions[aid]
        slots[aid] = tuple(s.id for s in plan.slots if may_be_present(prec, s, act))
    return CollisionCache(slots, tuple(f.id for f in scene.fixed))


# ---------------------------------------------------------------------------
# region search


@dataclass
class _RegionProblem:
    region: int
    sampled: list  # slots needing a pose
    fixed_slots: list  # initial occupants (pose from s0)
    samples: list  # per sampled slot, list of Pose2
    hit_ss: dict  # (i, j) i<j -> bool matrix [n_i, n_j]
    hit_sf: dict  # (i, k) -> bool vector [n_i]


def _pair_matrix(body_a, poses_a, body_b, poses_b) -> np.ndarray:
    pa = np.array([p.as_array() for p in poses_a])
    pb = np.array([p.as_array() for p in poses_b])
    ia = np.repeat(np.arange(len(pa)), len(pb))
    ib = np.tile(np.arange(len(pb)), len(pa))
    hit = kernels.collide_pairs(place(body_a, pa[ia]), place(body_b, pb[ib]))
    return hit.reshape(len(pa), len(pb))


def _region_problem(scene, plan, w, n_place, base_seed) -> _RegionProblem:
    region = scene.region[w]
    slots = [s for s in plan.slots if s.region == w]
    sampled = [s for s in slots if s.add is not None]
    fixed_slots = [s for s in slots if s.add is None]
    samples = []
    for s in sampled:
        body = scene.movable[s.movable].body
        rng = rng_for(base_seed, "place", w, s.id)
        samples.append(sample_placement(region, body, rng, n_place, obstacles=scene.fixed_placed))
    hit_ss, hit_sf = {}, {}
    for i, si in enumerate(sampled):
        bi = scene.movable[si.movable].body
        for j in range(i + 1, len(sampled)):
            sj = sampled[j]
            if si.movable == sj.movable:
                continue
            hit_ss[i, j] = _pair_matrix(bi, samples[i], scene.movable[sj.movable].body, samples[j])
        for k, sk in enumerate(fixed_slots):
            if sk.movable == si.movable:
                continue
            pk = scene.initial.movable_poses[sk.movable]
            hit_sf[i, k] = _pair_matrix(bi, samples[i], scene.movable[sk.movable].body, [pk])[:, 0]
    return _RegionProblem(w, sampled, fixed_slots, samples, hit_ss, hit_sf)


def _resolutions(prec, conflicts, budget_left):
    """Yield orderings that separate every conflicting pair, fewest edges first."""
    pending = [(a, b) for a, b in conflicts if may_coexist(prec, a, b)]
    if not pending:
        yield prec, 0
        return
    if budget_left <= 0:
        return
    a, b = pending[0]
    options = []
    if a.remove is not None and b.add is not None:
        options.append((a.remove, b.add))
    if b.remove is not None and a.add is not None:
        options.append((b.remove, a.add))
    for before, after in sorted(options):
        try:
            nxt = add_ordering(prec, before, after)
        except CycleError:
            continue
        for out, used in _resolutions(nxt, pending[1:], budget_left - 1):
            yield out, used + 1


def _search_region(prob: _RegionProblem, prec: OrderingSet, tabu: PlacementTabu,
                   deadline: Deadline, hook=None):
    """Return (combo, prec') with the fewest added edges, or None."""
    n_s = len(prob.sampled)
    pairs_total = n_s * (n_s - 1) // 2 + n_s * len(prob.fixed_slots)
    counter = [0]

    def dfs(j, combo, cur, budget):
        if j == n_s:
            if (prob.region, tuple(combo)) in tabu.combos:
                return None
            return list(combo), cur
        sj = prob.sampled[j]
        for idx in range(len(prob.samples[j])):
            counter[0] += 1
            if hook is not None or counter[0] % 256 == 0:
                deadline.check()
            if (sj.id, idx) in tabu.samples:
                continue
            if hook is not None and not hook(prob, j, idx, combo):
                continue
            conflicts = []
            for i in range(j):
                m = prob.hit_ss.get((i, j))
                if m is not None and m[combo[i], idx]:
                    conflicts.append((prob.sampled[i], sj))
            for k, sk in enumerate(prob.fixed_slots):
                v = prob.hit_sf.get((j, k))
                if v is not None and v[idx]:
                    conflicts.append((sk, sj))
            for nxt, used in _resolutions(cur, conflicts, budget):
                got = dfs(j + 1, combo + [idx], nxt, budget - used)
                if got is not None:
                    return got
        return None

    for budget in range(pairs_total + 1):
        got = dfs(0, [], prec, budget)
        if got is not None:
            return got
    return None


def solve_placements(scene, plan: TaskPlan, params: PipelineParams, rng: np.random.Generator,
                     *, deadline: Deadline = NEVER, tabu: Optional[PlacementTabu] = None,
                     hook: Optional[Callable] = None, base_seed: Optional[int] = None) -> PlacementSolution:
    """Assign a pose to every transfer's placement variable.

    Raises Infeasible when some region admits no assignment even with
    induced orderings, StepTimeout when ``deadline`` passes.
    """
    tabu = tabu or PlacementTabu()
    if base_seed is None:
        base_seed = child_seed(rng)
    n_place = params.n_place
    while True:
        try:
            return _solve_once(scene, plan, n_place, base_seed, deadline, tabu, hook)
        except (Infeasible, NoSamples) as e:
            if params.backtrack_policy != "extend_samples" or isinstance(e, NoSamples):
                raise Infeasible(str(e)) from e
            n_place *= 2
            log.info("step 1: extending placement samples to %d", n_place)
            deadline.check()


def _solve_once(scene, plan, n_place, base_seed, deadline, tabu, hook) -> PlacementSolution:
    problems = [_region_problem(scene, plan, w, n_place, base_seed) for w in plan.regions_used()]
    results = {}
    for prob in problems:
        got = _search_region(prob, plan.prec, tabu, deadline, hook)
        if got is None:
            raise Infeasible(f"region {prob.region}: no placement combination")
        results[prob.region] = got
    try:
        prec = plan.prec
        for w, (_, p) in sorted(results.items()):
            prec = prec.with_edges(sorted(p.edges - plan.prec.edges))
    except CycleError:
        # region-local orderings conflict globally; re-solve regions in sequence
        log.info("step 1: induced orderings clash across regions, solving sequentially")
        prec = plan.prec
        for prob in problems:
            got = _search_region(prob, prec, tabu, deadline, hook)
            if got is None:
                raise Infeasible(f"region {prob.region}: no placement combination")
            results[prob.region] = got
            prec = got[1]
    pose_of, combos, samples = {}, {}, {}
    for prob in problems:
        combo, _ = results[prob.region]
        combos[prob.region] = tuple(combo)
        for s, idx, cands in zip(prob.sampled, combo, prob.samples):
            pose_of[s.add] = cands[idx]
            samples[s.id] = cands
    induced = OrderingSet(sorted(prec.edges - plan.prec.edges))
    return PlacementSolution(pose_of, induced, build_cache(scene, plan, prec), prec, combos, samples)
