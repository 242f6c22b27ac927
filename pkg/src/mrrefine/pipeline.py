"""Steps 1-4 with backtracking, the synchronous baseline and the ablation modes.

Backtracking keeps a tabu set per step: a Step-2 failure excludes the Step-1
sample combination of the region involved (or, when only fixed shapes are in
the way, the single placement sample), a Step-3 failure excludes the grasp
sample of the failing pick/place pair, and a composite-search timeout first
retries Step 3 with fresh roadmaps, then excludes the whole grasp choice.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from . import kernels
from .drrt import composite_problem, search
from .errors import Disconnected, Infeasible, NoSamples, StepFailure, StepTimeout
from .geom import place
from .params import PipelineParams
from .placement import PlacementTabu, solve_placements
from .prm import Held, build_roadmap, plan_individual
from .schedule import retime
from .seeding import rng_for
from .solution import Solution, waypoints_from_states
from .synchronous import run_phases
from .task import TaskPlan
from .timing import Deadline
from .transit import config_free, in_bounds, sample_grasps, solve_kin, solve_transitions
from .validate import ValidationReport, validate_solution  # noqa: F401  re-exported

log = logging.getLogger(__name__)

SOLUTION, INFEASIBLE, TIMEOUT = "Solution", "Infeasible", "Timeout"


@dataclass
class RunReport:
    outcome: str
    planning_time: float
    step_times: dict = field(default_factory=dict)
    backtracks: int = 0
    makespan: Optional[float] = None
    solution: Optional[Solution] = None
    message: str = ""
    mode: str = "full"
    seed: int = 0

    @property
    def ok(self) -> bool:
        return self.outcome == SOLUTION

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "mode": self.mode,
            "seed": self.seed,
            "planning_time_s": round(self.planning_time, 6),
            "step_times_s": {k: round(v, 6) for k, v in sorted(self.step_times.items())},
            "backtracks": self.backtracks,
            "makespan": self.makespan,
            "message": self.message,
        }


class _Clock:
    def __init__(self):
        self.times: dict = {}

    def add(self, name: str, since: float) -> None:
        spent = time.monotonic() - since
        self.times[name] = self.times.get(name, 0.0) + spent
        log.debug("%s: %.3f s", name, spent)


# ---------------------------------------------------------------------------
# ablation hooks, called for every candidate the Step-1 search examines


def _merge12_hook(scene, plan, params, base_seed):
    """Joint placement/grasp sampling: every candidate placement gets the Step-2 grasp work at once."""
    fixed = scene.fixed_placed

    def hook(prob, j, idx, combo) -> bool:
        slot = prob.sampled[j]
        pose = prob.samples[j][idx]
        others = [(scene.movable[s.movable].body, prob.samples[i][combo[i]]) for i, s in enumerate(prob.sampled[:j])]
        others += [(scene.movable[s.movable].body, scene.initial.movable_poses[s.movable]) for s in prob.fixed_slots]
        batch = kernels.concat([fixed] + [place(b, p.as_array()[None]) for b, p in others])
        f = slot.add
        t = plan.per_robot[plan.actions[f].r][plan.position[f][1] - 1]
        robot = scene.robot[plan.actions[f].r]
        ok = False
        for g in sample_grasps(robot, scene.movable[slot.movable], rng_for(base_seed, "grasp", t), params.n_grasp):
            q = solve_kin(g, pose)
            ok |= in_bounds(scene, q) and config_free(robot, q, batch)
        if slot.pick is not None:
            r2 = scene.robot[plan.actions[slot.pick].r]
            for g in sample_grasps(r2, scene.movable[slot.movable], rng_for(base_seed, "grasp", slot.pick),
                                   params.n_grasp):
                q = solve_kin(g, pose)
                in_bounds(scene, q) and config_free(r2, q, batch)
        return ok

    return hook


def _merge123_hook(scene, plan, params, base_seed):
    """Also plans the placing motion for every candidate before global consistency is known."""
    inner = _merge12_hook(scene, plan, params, base_seed)
    fixed = scene.fixed_placed

    def hook(prob, j, idx, combo) -> bool:
        if not inner(prob, j, idx, combo):
            return False
        slot = prob.sampled[j]
        f = slot.add
        r, k = plan.position[f]
        t = plan.per_robot[r][k - 1]
        robot = scene.robot[r]
        pose = prob.samples[j][idx]
        grasps = sample_grasps(robot, scene.movable[slot.movable], rng_for(base_seed, "grasp", t), params.n_grasp)
        src = plan.slot_picked_by(t)
        start_pose = scene.initial.movable_poses[src.movable] if src.add is None else None
        for gi, g in enumerate(grasps):
            goal = solve_kin(g, pose)
            start = solve_kin(g, start_pose) if start_pose is not None else goal
            held = Held(slot.movable, scene.movable[slot.movable].body, g.gamma)
            try:
                build_roadmap(robot, start, goal, fixed, held, params.n_prm, params.k_prm,
                              rng_for(base_seed, "merge123", f, idx, gi), bounds=scene.bounds,
                              step=params.step, rot_weight=params.rot_weight)
                return True
            except Disconnected:
                continue
        return False

    return hook


# ---------------------------------------------------------------------------


def _step2_tabu(plan: TaskPlan, placements, failure: StepFailure, tabu: PlacementTabu) -> None:
    """Exclude the Step-1 choice behind a Step-2 failure.

    The slot at the failing configuration is blamed first, the other slot of
    the pick/place pair second; a slot whose pose Step 1 did not choose
    (an initial pose, alone in its region) cannot be blamed.
    """
    t, f = failure.detail.get("pair", (failure.action_id, failure.action_id))
    here, there = plan.slot_picked_by(t), plan.slot_added_by(f)
    if failure.action_id == f:
        here, there = there, here
    only_fixed = not any(b.startswith("movable") for b in failure.blockers)
    for slot in (here, there):
        if slot.add is not None and only_fixed and slot is here:
            idx = placements.samples[slot.id].index(placements.pose_of[slot.add])
            tabu.samples.add((slot.id, idx))
            return
        combo = placements.combos.get(slot.region, ())
        if combo:
            tabu.combos.add((slot.region, combo))
            return
    raise Infeasible(f"no placement choice left to revise for {t}/{f}")


def _step3_tabu(plan: TaskPlan, placements, failure: StepFailure, tabu: PlacementTabu) -> bool:
    """Exclude the placement sample nearest to a roadmap that resting objects disconnect.

    Returns False when no sampled slot is involved.
    """
    for sid in (failure.detail or {}).get("slots", ()):
        slot = plan.slot[sid]
        if slot.add is None:
            continue
        idx = placements.samples[sid].index(placements.pose_of[slot.add])
        if (sid, idx) not in tabu.samples:
            tabu.samples.add((sid, idx))
            return True
    return False


def refine(scene, plan: TaskPlan, params: PipelineParams) -> RunReport:
    """Run the refinement pipeline in ``params.mode``; failures are encoded in the report."""
    t0 = time.monotonic()
    clock = _Clock()
    overall = Deadline.after(params.overall_time_limit, "overall time limit")
    report = RunReport(TIMEOUT, 0.0, mode=params.mode, seed=params.seed)
    try:
        sol, backtracks = _refine(scene, plan, params, overall, clock, report)
        report.outcome = SOLUTION
        report.solution = sol
        report.makespan = sol.makespan
    except StepTimeout as e:
        report.outcome = TIMEOUT
        report.message = str(e)
    except (Infeasible, StepFailure, NoSamples) as e:
        report.outcome = INFEASIBLE
        report.message = str(e)
    report.planning_time = time.monotonic() - t0
    report.step_times = clock.times
    log.info("%s mode, seed %d: %s after %.2f s, %d backtrack(s)", params.mode, params.seed, report.outcome,
             report.planning_time, report.backtracks)
    return report


def solve_synchronous(scene, plan: TaskPlan, params: PipelineParams) -> RunReport:
    return refine(scene, plan, params.replace(mode="synchronous"))


def _refine(scene, plan, params, overall: Deadline, clock: _Clock, report: RunReport) -> tuple:
    seed = params.seed
    if not plan.actions:
        robots = tuple(sorted(scene.robot))
        row = [(0, *scene.initial.robot_configs[r].as_list()) for r in robots]
        return Solution({}, {}, {}, [], robots, [row], None, seed, params.mode, params.as_dict(),
                        params.rot_weight), 0
    hook = None
    if params.mode == "merge12":
        hook = _merge12_hook(scene, plan, params, seed)
    elif params.mode == "merge123":
        hook = _merge123_hook(scene, plan, params, seed)
    tabu1 = PlacementTabu()
    n_grasp, n_prm = params.n_grasp, params.n_prm
    step_limit = params.step_time_limit

    def backtrack(why: str):
        report.backtracks += 1
        log.info("backtrack %d: %s", report.backtracks, why)
        if params.backtrack_policy == "stop" or report.backtracks > params.max_backtracks:
            raise Infeasible(f"gave up after {report.backtracks} backtracks: {why}")

    while True:
        overall.check()
        t = time.monotonic()
        try:
            placements = solve_placements(scene, plan, params, rng_for(seed, "step1"),
                                          deadline=overall.sooner(step_limit, "step 1"), tabu=tabu1,
                                          hook=hook, base_seed=seed)
        finally:
            clock.add("step1", t)
        prec = placements.prec
        tabu2: set = set()
        step3_fails: dict = {}
        while True:
            overall.check()
            t = time.monotonic()
            try:
                transitions = solve_transitions(scene, plan, placements, params, rng_for(seed, "step2"),
                                                deadline=overall.sooner(step_limit, "step 2"), tabu=tabu2,
                                                base_seed=seed, n_grasp=n_grasp)
            except StepFailure as e:
                clock.add("step2", t)
                if params.backtrack_policy == "extend_samples" and n_grasp < 8 * params.n_grasp:
                    n_grasp *= 2
                    report.backtracks += 1
                    continue
                backtrack(str(e))
                _step2_tabu(plan, placements, e, tabu1)
                break
            clock.add("step2", t)
            step3_attempt = 0
            retry_step2 = False
            while True:
                overall.check()
                t = time.monotonic()
                try:
                    individual = plan_individual(scene, plan, placements, transitions, params,
                                                 rng_for(seed, "step3"),
                                                 deadline=overall.sooner(step_limit, "step 3"),
                                                 base_seed=seed, n_prm=n_prm, attempt=step3_attempt)
                except StepFailure as e:
                    clock.add("step3", t)
                    if params.backtrack_policy == "extend_samples" and n_prm < 8 * params.n_prm:
                        n_prm *= 2
                        report.backtracks += 1
                        continue
                    backtrack(str(e))
                    step3_fails[e.action_id] = step3_fails.get(e.action_id, 0) + 1
                    if step3_fails[e.action_id] > 1 and _step3_tabu(plan, placements, e, tabu1):
                        break  # objects resting in the way: revise Step 1
                    pair = next(p for p in plan.pairs() if e.action_id in p)
                    tabu2.add((pair[0], transitions.grasp_index[pair[0]]))
                    retry_step2 = True
                    break
                clock.add("step3", t)
                t = time.monotonic()
                problem = composite_problem(scene, plan, prec, individual, transitions, placements,
                                            params.step, params.rot_weight)
                try:
                    if params.mode == "synchronous":
                        paths = [[individual.per_action[a].path for a in tr.actions] for tr in problem.tracks]
                        states, configs, phases = run_phases(
                            problem, paths, deadline=overall.sooner(params.drrt_time_limit, "synchronous phases"))
                        waypoints = [[(int(kv[0]), *map(float, c[i])) for i, kv in enumerate(st)]
                                     for st, c in zip(states, configs)]
                    else:
                        cpath = search(problem, rng_for(seed, "step4", report.backtracks),
                                       deadline=overall.sooner(params.drrt_time_limit, "composite search"),
                                       goal_bias=params.goal_bias)
                        got = retime(problem, cpath.states)
                        waypoints = got[1] if got else waypoints_from_states(problem, cpath.states)
                        phases = None
                except StepTimeout as e:
                    clock.add("step4", t)
                    overall.check()
                    backtrack(str(e))
                    if step3_attempt == 0:
                        step3_attempt += 1  # fresh roadmaps first
                        continue
                    implicated = e.actions or tuple(a for pair in plan.pairs() for a in pair)
                    for pair in plan.pairs():
                        if pair[0] in implicated or pair[1] in implicated:
                            tabu2.add((pair[0], transitions.grasp_index[pair[0]]))
                    retry_step2 = True
                    break
                clock.add("step4", t)
                robots = tuple(tr.robot for tr in problem.tracks)
                sol = Solution(dict(placements.pose_of), dict(transitions.grasp_of), dict(transitions.config_of),
                               sorted(placements.induced.edges), robots, waypoints, phases, seed, params.mode,
                               params.as_dict(), params.rot_weight)
                return sol, report.backtracks
            if not retry_step2:
                break
        # fall through: back to Step 1 with the updated tabu set
