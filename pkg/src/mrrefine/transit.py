"""Step 2: grasps and transition configurations, other robots ignored.

Every (transit, transfer) pair of a robot shares one grasp.  Its pick
configuration is solved at the object's current pose, its place
configuration at the Step-1 placement, and the first grasp whose two
configurations clear the cached objects and fixed shapes wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import StepFailure
from .geom import Pose2, compose, inverse, place
from .params import PipelineParams
from .placement import PlacementSolution
from .seeding import child_seed, rng_for
from .task import Grasp, TaskPlan
from .timing import NEVER, Deadline


@dataclass
class TransitionSolution:
    grasp_of: dict  # transit id -> Grasp
    config_of: dict  # action id -> Config reached at its end
    grasp_index: dict = field(default_factory=dict)  # transit id -> sample index


def contact_distance(robot, movable) -> float:
    return robot.body.radius + movable.body.circumradius


def sample_grasps(robot, movable, rng: np.random.Generator, n: int) -> list:
    """``n`` grasps with the object ahead of the robot at a distance in [contact, reach]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = contact_distance(robot, movable)
    if lo > robot.reach:
        raise ValueError(f"robot {robot.id} cannot reach around movable {movable.id}")
    u = rng.uniform(0.0, 1.0, size=(n, 2))  # row-major draws keep prefixes stable
    out = []
    for du, au in u:
        d = lo + du * (robot.reach - lo)
        out.append(Grasp(robot.id, movable.id, Pose2(d, 0.0, -math.pi + 2.0 * math.pi * au)))
    return out


def solve_kin(grasp: Grasp, object_pose: Pose2) -> Pose2:
    """The robot configuration q with q ∘ gamma = object_pose."""
    return compose(object_pose, inverse(grasp.gamma))


def grasp_valid(grasp: Grasp, robot) -> bool:
    return grasp.gamma.translation_norm <= robot.reach + 1e-12


def slot_items(scene, plan: TaskPlan, placements: PlacementSolution, slot_ids) -> list:
    """(label, shape, pose) for the given slots."""
    out = []
    for sid in slot_ids:
        s = plan.slot[sid]
        out.append((f"movable {s.movable}", scene.movable[s.movable].body,
                    placements.slot_pose(plan, scene, s)))
    return out


def obstacle_batch(scene, items) -> tuple:
    """Labels and kernel batch for fixed shapes plus ``items``."""
    labels = [f"fixed {f.id}" for f in scene.fixed] + [lab for lab, _, _ in items]
    parts = [scene.fixed_placed] + [place(shape, pose.as_array()[None]) for _, shape, pose in items]
    return labels, kernels.concat(parts)


def in_bounds(scene, q: Pose2) -> bool:
    x0, y0, x1, y1 = scene.bounds
    return x0 <= q.x <= x1 and y0 <= q.y <= y1


def _blockers(robot, q: Pose2, labels, batch) -> list:
    rb = place(robot.body, q.as_array()[None])
    n = len(batch)
    if n == 0:
        return []
    hit = kernels.collide_pairs(kernels.take(rb, np.zeros(n, dtype=int)), batch)
    return [labels[i] for i in np.nonzero(hit)[0]]


def config_free(robot, q: Pose2, batch) -> bool:
    return not bool(kernels.hits_any(place(robot.body, q.as_array()[None]), batch)[0])


def pick_slot(plan: TaskPlan, transit_id: str):
    return plan.slot_picked_by(transit_id)


def pair_contexts(scene, plan: TaskPlan, placements: PlacementSolution, t: str, f: str):
    """Obstacle batches around the pick configuration and the place configuration."""
    cache = placements.cache.slots
    pick_ids = sorted(set(cache[t]) | set(cache[f]))
    nxt = plan.next_of(f)
    place_ids = sorted(set(cache[f]) | (set(cache[nxt]) if nxt else set()))
    pick = obstacle_batch(scene, slot_items(scene, plan, placements, pick_ids))
    place_ctx = obstacle_batch(scene, slot_items(scene, plan, placements, place_ids))
    return pick, place_ctx


def solve_transitions(scene, plan: TaskPlan, placements: PlacementSolution, params: PipelineParams,
                      rng: np.random.Generator, *, deadline: Deadline = NEVER, tabu: Optional[set] = None,
                      base_seed: Optional[int] = None, n_grasp: Optional[int] = None) -> TransitionSolution:
    """Pick a shared grasp per pick/place pair.  Raises StepFailure on the first pair without one."""
    tabu = tabu or set()
    if base_seed is None:
        base_seed = child_seed(rng)
    n_grasp = n_grasp or params.n_grasp
    grasp_of, config_of, index = {}, {}, {}
    for t, f in plan.pairs():
        deadline.check()
        act = plan.actions[t]
        robot, movable = scene.robot[act.r], scene.movable[act.m]
        pick_pose = placements.slot_pose(plan, scene, pick_slot(plan, t))
        place_pose = placements.pose_of[f]
        (pl, pb), (ql, qb) = pair_contexts(scene, plan, placements, t, f)
        grasps = sample_grasps(robot, movable, rng_for(base_seed, "grasp", t), n_grasp)
        pick_any = place_any = False
        blockers: set = set()
        chosen = None
        for gi, g in enumerate(grasps):
            if (t, gi) in tabu:
                continue
            q_pick = solve_kin(g, pick_pose)
            q_place = solve_kin(g, place_pose)
            ok_pick = in_bounds(scene, q_pick) and config_free(robot, q_pick, pb)
            ok_place = in_bounds(scene, q_place) and config_free(robot, q_place, qb)
            pick_any |= ok_pick
            place_any |= ok_place
            if ok_pick and ok_place:
                chosen = gi
                break
            if not ok_pick:
                blockers.update(_blockers(robot, q_pick, pl, pb))
            if not ok_place:
                blockers.update(_blockers(robot, q_place, ql, qb))
        if chosen is None:
            failing = t if not pick_any or place_any else f
            raise StepFailure(2, failing, "no grasp with collision-free transition configurations",
                              sorted(blockers), detail={"pair": (t, f), "pick_any": pick_any,
                                                        "place_any": place_any})
        g = grasps[chosen]
        grasp_of[t] = g
        index[t] = chosen
        config_of[t] = solve_kin(g, pick_pose)
        config_of[f] = solve_kin(g, place_pose)
    return TransitionSolution(grasp_of, config_of, index)
