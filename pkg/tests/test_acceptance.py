"""End-to-end acceptance checks on the bundled benchmarks.

Each test records one PASS/FAIL line that is printed in the terminal summary.
These take several minutes; deselect with ``-m "not slow"``.
"""

import os
import statistics
import subprocess
import sys
from functools import lru_cache

import numpy as np
import pytest
from conftest import record
from grids import bfs_feasible, random_instance, to_problem
from scipy import stats
from support import bundled

from mrrefine.drrt import search
from mrrefine.errors import StepTimeout
from mrrefine.params import PipelineParams
from mrrefine.pipeline import refine
from mrrefine.placement import _region_problem, solve_placements
from mrrefine.seeding import rng_for
from mrrefine.validate import validate_solution

pytestmark = pytest.mark.slow

SEEDS = range(25)
PER_SEED_LIMIT = 60.0


@lru_cache(maxsize=None)
def _run(name: str, mode: str, seed: int, limit: float = 600.0):
    scn, plan = bundled(name)
    rep = refine(scn, plan, PipelineParams(seed=seed, mode=mode, overall_time_limit=limit))
    clean = rep.ok and validate_solution(scn, plan, None, rep.solution).ok
    return rep, clean


def _ci95(xs):
    m = statistics.mean(xs)
    h = stats.t.ppf(0.975, len(xs) - 1) * statistics.stdev(xs) / len(xs) ** 0.5
    return m, m - h, m + h


def test_c1_full_mode_is_clean_and_fast():
    runs = [_run("shelf3", "full", s) for s in SEEDS]
    solved = sum(r.ok for r, _ in runs)
    clean = sum(c for _, c in runs)
    worst = max(r.planning_time for r, _ in runs)
    ok = solved == clean == len(SEEDS) and worst <= PER_SEED_LIMIT
    record("C1 shelf3 full: validator-clean within 60 s", ok,
           f"{clean}/{len(SEEDS)} clean, slowest seed {worst:.1f} s")
    assert ok


def test_c2_full_beats_synchronous_makespan():
    full = [_run("shelf3", "full", s)[0].makespan for s in SEEDS]
    sync = [_run("shelf3", "synchronous", s)[0].makespan for s in SEEDS]
    assert None not in full and None not in sync
    mf, lf, hf = _ci95(full)
    ms, ls, hs = _ci95(sync)
    ok = mf < ms and hf < ls
    record("C2 shelf3 makespan full < synchronous", ok,
           f"full {mf:.2f} [{lf:.2f}, {hf:.2f}] vs synchronous {ms:.2f} [{ls:.2f}, {hs:.2f}]")
    assert ok


def test_c3_merged_steps_cost_planning_time():
    seeds = range(10)
    full = [_run("shelf3_tight", "full", s)[0] for s in seeds]
    m12 = [_run("shelf3_tight", "merge12", s)[0] for s in seeds]
    t_full = statistics.mean(r.planning_time for r in full)
    t_m12 = statistics.mean(r.planning_time for r in m12)
    cap = 5.0 * t_full
    m123 = [_run("shelf3_tight", "merge123", s, cap + 1.0)[0] for s in range(3)]
    slow = all(r.outcome == "Timeout" or r.planning_time > cap for r in m123)
    ok = t_full <= t_m12 and slow and all(r.ok for r in full)
    m123_desc = ", ".join(f"{r.outcome} {r.planning_time:.1f} s" for r in m123)
    record("C3 shelf3_tight planning time full <= merge12, merge123 > 5x", ok,
           f"full {t_full:.2f} s, merge12 {t_m12:.2f} s, merge123 (cap {cap:.1f} s): {m123_desc}")
    assert ok


def test_c4_composite_search_agrees_with_bfs():
    n, agree, feasible = 60, 0, 0
    bad = []
    for seed in range(n):
        inst = random_instance(np.random.default_rng(seed))
        want = bfs_feasible(inst)
        try:
            search(to_problem(inst), np.random.default_rng(seed), max_iterations=4000)
            got = True
        except StepTimeout:
            got = False
        feasible += want
        agree += want == got
        if want != got:
            bad.append(seed)
    ok = agree == n
    record("C4 grid instances: search feasibility == BFS", ok,
           f"{agree}/{n} agree ({feasible} feasible, {n - feasible} infeasible){' mismatches ' + str(bad) if bad else ''}")
    assert ok


def test_c5_least_commitment_orderings():
    spacious = [_run("spacious", "full", s)[0] for s in SEEDS]
    empty = sum(r.ok and not r.solution.induced for r in spacious)
    scn, plan = bundled("one_slot")
    exact = exhaustive = 0
    for s in SEEDS:
        sol = solve_placements(scn, plan, PipelineParams(seed=s), rng_for(s, "c5"), base_seed=s)
        exact += sol.induced.edges == {("f1", "f2")}
        # every sample of the incoming object overlaps the resident one, so an edge is unavoidable
        prob = _region_problem(scn, plan, 2, PipelineParams().n_place, s)
        exhaustive += all(bool(h.all()) for h in prob.hit_sf.values()) and len(prob.hit_sf) == 1
    ok = empty == len(SEEDS) and exact == exhaustive == len(SEEDS)
    record("C5 induced orderings: spacious none, one_slot exactly f1<f2", ok,
           f"spacious {empty}/{len(SEEDS)} empty, one_slot {exact}/{len(SEEDS)} exact, "
           f"{exhaustive}/{len(SEEDS)} seeds with every sample pair colliding")
    assert ok


def test_c6_same_inputs_same_bytes(tmp_path):
    outs = []
    for i, hashseed in enumerate(("1", "2")):
        for mode in ("full", "synchronous"):
            out = tmp_path / f"{mode}{i}.json"
            env = dict(os.environ, PYTHONHASHSEED=hashseed, MRREFINE_LOG="off")
            subprocess.run([sys.executable, "-m", "mrrefine.cli", "solve", "shelf3", "shelf3", "--seed", "7",
                            "--mode", mode, "--out", str(out)], check=True, capture_output=True, env=env)
            outs.append(out.read_bytes())
    ok = outs[0] == outs[2] and outs[1] == outs[3]
    record("C6 byte-identical solution files", ok, "full and synchronous, two processes with different hash seeds")
    assert ok


def test_c7_synchronous_is_clean():
    runs = [_run("shelf3", "synchronous", s) for s in SEEDS]
    clean = sum(c for _, c in runs)
    ok = clean == len(SEEDS)
    record("C7 shelf3 synchronous: validator-clean", ok, f"{clean}/{len(SEEDS)} clean")
    assert ok
