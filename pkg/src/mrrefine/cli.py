"""Command-line front end: ``solve``, ``validate``, ``bench`` and ``render``.

Exit codes: 0 success, 1 parse or validation error, 2 planner timeout or
infeasible, 3 internal error.  ``MRREFINE_LOG`` (off, info, debug) sets the
diagnostics written to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError
from .params import MODES, PipelineParams
from .pipeline import refine
from .render import render_svg
from .scene import load_scenario
from .solution import load_solution
from .task import load_plan
from .validate import validate_solution

EXIT_OK, EXIT_INPUT, EXIT_PLANNER, EXIT_INTERNAL = 0, 1, 2, 3
CSV_COLUMNS = ("seed", "mode", "outcome", "planning_time_s", "makespan")

log = logging.getLogger("mrrefine")


def _setup_logging() -> None:
    level = os.environ.get("MRREFINE_LOG", "off").strip().lower()
    root = logging.getLogger("mrrefine")
    root.handlers.clear()
    if level == "off":
        root.setLevel(logging.CRITICAL + 1)
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if level == "debug" else logging.INFO)


def _read(path: str, suffix: str) -> tuple:
    """Text and display name of ``path``; bare names fall back to the bundled scenarios."""
    p = Path(path)
    if p.exists():
        return p.read_text(), p.stem
    bundled = resources.files("mrrefine") / "scenarios" / p.name
    if not bundled.is_file() and not p.suffix:
        bundled = resources.files("mrrefine") / "scenarios" / (p.name + suffix)
    if bundled.is_file():
        return bundled.read_text(), Path(bundled.name).stem
    raise ParseError(f"no such file: {path}")


def _load_inputs(scn_path: str, plan_path: str):
    text, name = _read(scn_path, ".scn")
    scene = load_scenario(text, name)
    plan = load_plan(_read(plan_path, ".plan")[0], scene)
    return scene, plan


def _params(ns, **over) -> PipelineParams:
    kw = {
        "seed": ns.seed,
        "n_place": ns.n_place,
        "n_grasp": ns.n_grasp,
        "n_prm": ns.n_prm,
        "k_prm": ns.k_prm,
        "overall_time_limit": ns.time_limit_s,
        "mode": getattr(ns, "mode", "full"),
    }
    kw.update(over)
    try:
        return PipelineParams(**kw)
    except ValueError as e:
        raise ParseError(str(e)) from e


def _add_common(p: argparse.ArgumentParser) -> None:
    d = PipelineParams()
    p.add_argument("scenario", help="scenario file (.scn) or bundled scenario name")
    p.add_argument("plan", help="task plan file (.plan) or bundled plan name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-place", type=int, default=d.n_place)
    p.add_argument("--n-grasp", type=int, default=d.n_grasp)
    p.add_argument("--n-prm", type=int, default=d.n_prm)
    p.add_argument("--k-prm", type=int, default=d.k_prm)
    p.add_argument("--time-limit-s", type=float, default=d.overall_time_limit, help="overall planning limit")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mrrefine", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="refine a plan into multi-robot motion")
    _add_common(p)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--out", default="solution.json", help="solution file to write")

    p = sub.add_parser("validate", help="check a solution file against every constraint")
    p.add_argument("scenario")
    p.add_argument("plan")
    p.add_argument("solution")

    p = sub.add_parser("bench", help="run several seeds and modes, write a CSV")
    _add_common(p)
    p.add_argument("--seeds", type=int, default=25, help="number of seeds, starting at --seed")
    p.add_argument("--mode", action="append", choices=MODES, help="restrict to these modes (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--solutions-dir", default=None, help="also write each solution file here")
    p.add_argument("--out", default="-", help="CSV path, '-' for standard output")

    p = sub.add_parser("render", help="draw a scenario and optionally a solution as SVG")
    p.add_argument("scenario")
    p.add_argument("plan")
    p.add_argument("solution", nargs="?")
    p.add_argument("--out", default="-", help="SVG path, '-' for standard output")
    return ap


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_solve(ns) -> int:
    scene, plan = _load_inputs(ns.scenario, ns.plan)
    report = refine(scene, plan, _params(ns))
    print(json.dumps(report.summary(), sort_keys=True))
    if not report.ok:
        return EXIT_PLANNER
    _write(ns.out, report.solution.to_json())
    return EXIT_OK


def _cmd_validate(ns) -> int:
    scene, plan = _load_inputs(ns.scenario, ns.plan)
    sol = load_solution(Path(ns.solution).read_text())
    step = float(sol.params.get("step", PipelineParams().step))
    rep = validate_solution(scene, plan, None, sol, step=step)
    for v in rep.violations:
        print(f"{v.invariant} {','.join(map(str, v.ids))} {v.detail}".rstrip())
    print("ok" if rep.ok else f"{len(rep.violations)} violation(s)")
    return EXIT_OK if rep.ok else EXIT_INPUT


def _bench_one(job: tuple) -> dict:
    scn_path, plan_path, params, sol_dir = job
    scene, plan = _load_inputs(scn_path, plan_path)
    report = refine(scene, plan, params)
    if sol_dir and report.ok:
        Path(sol_dir, f"{scene.name or 'scenario'}_{params.mode}_{params.seed}.json").write_text(
            report.solution.to_json())
    return {
        "seed": params.seed,
        "mode": params.mode,
        "outcome": report.outcome,
        "planning_time_s": f"{report.planning_time:.6f}",
        "makespan": "" if report.makespan is None else f"{report.makespan:.6f}",
    }


def _cmd_bench(ns) -> int:
    _load_inputs(ns.scenario, ns.plan)  # fail fast on bad input
    modes = tuple(m for m in MODES if m in (ns.mode or MODES))
    if ns.seeds < 1 or ns.jobs < 1:
        raise ParseError("--seeds and --jobs must be >= 1")
    if ns.solutions_dir:
        Path(ns.solutions_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(ns.scenario, ns.plan, _params(ns, seed=s, mode=m), ns.solutions_dir)
            for s in range(ns.seed, ns.seed + ns.seeds) for m in modes]
    if ns.jobs == 1:
        rows = [_bench_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    rows.sort(key=lambda r: (r["seed"], MODES.index(r["mode"])))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(ns.out, buf.getvalue())
    return EXIT_OK


def _cmd_render(ns) -> int:
    scene, plan = _load_inputs(ns.scenario, ns.plan)
    sol = load_solution(Path(ns.solution).read_text()) if ns.solution else None
    _write(ns.out, render_svg(scene, plan, sol, title=scene.name))
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "validate": _cmd_validate, "bench": _cmd_bench, "render": _cmd_render}


def run(argv=None) -> int:
    _setup_logging()
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    try:
        return _COMMANDS[ns.command](ns)
    except (ParseError, ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - the exit code is the contract
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
