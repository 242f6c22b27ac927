"""Shared helpers: bundled scenarios and small hand-built scenes."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from mrrefine.scene import load_scenario
from mrrefine.task import load_plan

SCENARIOS = resources.files("mrrefine") / "scenarios"


@lru_cache(maxsize=None)
def bundled(name: str):
    scene = load_scenario((SCENARIOS / f"{name}.scn").read_text(), name)
    plan = load_plan((SCENARIOS / f"{name}.plan").read_text(), scene)
    return scene, plan


def box(w: float, h: float) -> dict:
    return {"poly": [[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]]}


def scene_doc(robots, movables=(), fixed=(), regions=(), init_robots=None, init_movables=None) -> dict:
    """robots: (id, radius, reach); movables: (id, shape dict); fixed: (id, shape, pose); regions: (id, w, h, pose)."""
    return {
        "robots": [{"id": i, "body": {"disc": r}, "reach": reach} for i, r, reach in robots],
        "movables": [{"id": i, "body": s} for i, s in movables],
        "fixed": [{"id": i, "shape": s, "pose": list(p)} for i, s, p in fixed],
        "regions": [{"id": i, "polygon": box(w, h), "pose": list(p)} for i, w, h, p in regions],
        "initial": {
            "robots": {str(k): list(v) for k, v in (init_robots or {}).items()},
            "movables": {str(k): {"pose": list(p), "region": w} for k, (p, w) in (init_movables or {}).items()},
        },
    }


def make_scene(**kw):
    return load_scenario(json.dumps(scene_doc(**kw)))


def plan_doc(actions, prec=()) -> str:
    """actions: (id, kind, r, m, w, w2) tuples in per-robot order."""
    return json.dumps({
        "actions": [dict(zip(("id", "kind", "r", "m", "w", "w2"), a)) for a in actions],
        "prec": [list(e) for e in prec],
    })


def walls(x0: float, y0: float, x1: float, y1: float, t: float = 0.1, first_id: int = 1) -> list:
    """Four fixed wall boxes just outside the given rectangle."""
    w, h = x1 - x0, y1 - y0
    return [
        (first_id, box(w + 2 * t, t), ((x0 + x1) / 2, y0 - t / 2, 0)),
        (first_id + 1, box(w + 2 * t, t), ((x0 + x1) / 2, y1 + t / 2, 0)),
        (first_id + 2, box(t, h), (x0 - t / 2, (y0 + y1) / 2, 0)),
        (first_id + 3, box(t, h), (x1 + t / 2, (y0 + y1) / 2, 0)),
    ]
