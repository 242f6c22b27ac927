"""Scenario model and the JSON scenario file format."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from . import kernels
from .errors import ParseError, ValidationError
from .geom import ConvexPolygon, Disc, Pose2, Shape, ShapeError, compose, contains, place

TOP_KEYS = ("robots", "movables", "fixed", "regions", "initial")


@dataclass(frozen=True)
class RobotSpec:
    id: int
    body: Disc
    reach: float


@dataclass(frozen=True)
class MovableSpec:
    id: int
    body: Shape


@dataclass(frozen=True)
class FixedSpec:
    id: int
    shape: Shape
    pose: Pose2


@dataclass(frozen=True)
class RegionSpec:
    id: int
    polygon: ConvexPolygon
    pose: Pose2

    def bbox(self):
        v = place(self.polygon, self.pose.as_array()[None]).verts[0]
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


@dataclass(frozen=True)
class InitialState:
    robot_configs: Mapping[int, Pose2]
    movable_poses: Mapping[int, Pose2]
    movable_regions: Mapping[int, int]


@dataclass(frozen=True, eq=False)
class Scenario:
    robots: tuple
    movables: tuple
    fixed: tuple
    regions: tuple
    initial: InitialState
    name: str = field(default="", compare=False)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.robots == other.robots
            and self.movables == other.movables
            and self.fixed == other.fixed
            and self.regions == other.regions
            and dict(self.initial.robot_configs) == dict(other.initial.robot_configs)
            and dict(self.initial.movable_poses) == dict(other.initial.movable_poses)
            and dict(self.initial.movable_regions) == dict(other.initial.movable_regions)
        )

    __hash__ = object.__hash__

    @cached_property
    def robot(self) -> dict:
        return {r.id: r for r in self.robots}

    @cached_property
    def movable(self) -> dict:
        return {m.id: m for m in self.movables}

    @cached_property
    def region(self) -> dict:
        return {w.id: w for w in self.regions}

    @cached_property
    def fixed_placed(self) -> kernels.Placed:
        return kernels.concat([place(f.shape, f.pose.as_array()[None]) for f in self.fixed])

    @cached_property
    def bounds(self) -> tuple:
        """Axis-aligned workspace box covering fixed shapes, regions and robots."""
        pts = []
        for f in self.fixed:
            p = place(f.shape, f.pose.as_array()[None])
            if f.shape.__class__ is Disc:
                r = f.shape.radius
                pts += [(f.pose.x - r, f.pose.y - r), (f.pose.x + r, f.pose.y + r)]
            else:
                pts += [tuple(v) for v in p.verts[0]]
        for w in self.regions:
            x0, y0, x1, y1 = w.bbox()
            pts += [(x0, y0), (x1, y1)]
        for q in self.initial.robot_configs.values():
            pts.append((q.x, q.y))
        a = np.asarray(pts, dtype=float)
        return (float(a[:, 0].min()), float(a[:, 1].min()), float(a[:, 0].max()), float(a[:, 1].max()))


# ---------------------------------------------------------------------------
# parsing


def _strict(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ParseError(f"{where}: unknown keys {sorted(extra)}")
    missing = [k for k in allowed if k not in obj]
    if missing:
        raise ParseError(f"{where}: missing keys {missing}")
    return obj


def _num(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number")
    return float(v)


def _int(v, where) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: expected an integer")
    return v


def parse_pose(v, where="pose") -> Pose2:
    if not isinstance(v, list) or len(v) != 3:
        raise ParseError(f"{where}: pose must be [x, y, theta]")
    return Pose2(*(_num(c, where) for c in v))


def parse_shape(v, where="shape") -> Shape:
    if not isinstance(v, dict) or len(v) != 1:
        raise ParseError(f"{where}: shape must be {{'disc': r}} or {{'poly': [...]}}")
    (kind, val), = v.items()
    try:
        if kind == "disc":
            return Disc(_num(val, where))
        if kind == "poly":
            if not isinstance(val, list) or not all(isinstance(p, list) and len(p) == 2 for p in val):
                raise ParseError(f"{where}: poly must be a list of [x, y]")
            return ConvexPolygon(tuple((_num(x, where), _num(y, where)) for x, y in val))
    except ShapeError as e:
        raise ValidationError("shape", (), f"{where}: {e}") from e
    raise ParseError(f"{where}: unknown shape kind {kind!r}")


def shape_json(s: Shape):
    if isinstance(s, Disc):
        return {"disc": s.radius}
    return {"poly": [list(v) for v in s.vertices]}


def load_scenario(text: str, name: str = "") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"scenario is not valid JSON: {e}") from e
    _strict(doc, TOP_KEYS, "scenario")

    def items(key):
        v = doc[key]
        if not isinstance(v, list):
            raise ParseError(f"{key}: expected a list")
        return v

    robots = []
    for i, r in enumerate(items("robots")):
        _strict(r, ("id", "body", "reach"), f"robots[{i}]")
        body = parse_shape(r["body"], f"robots[{i}].body")
        if not isinstance(body, Disc):
            raise ValidationError("robot body must be a disc", (r["id"],))
        robots.append(RobotSpec(_int(r["id"], f"robots[{i}].id"), body, _num(r["reach"], f"robots[{i}].reach")))
    movables = []
    for i, m in enumerate(items("movables")):
        _strict(m, ("id", "body"), f"movables[{i}]")
        movables.append(MovableSpec(_int(m["id"], f"movables[{i}].id"), parse_shape(m["body"], f"movables[{i}].body")))
    fixed = []
    for i, f in enumerate(items("fixed")):
        _strict(f, ("id", "shape", "pose"), f"fixed[{i}]")
        fixed.append(FixedSpec(_int(f["id"], f"fixed[{i}].id"), parse_shape(f["shape"], f"fixed[{i}].shape"),
                               parse_pose(f["pose"], f"fixed[{i}].pose")))
    regions = []
    for i, w in enumerate(items("regions")):
        _strict(w, ("id", "polygon", "pose"), f"regions[{i}]")
        poly = parse_shape(w["polygon"], f"regions[{i}].polygon")
        if not isinstance(poly, ConvexPolygon):
            raise ValidationError("region must be a convex polygon", (w["id"],))
        regions.append(RegionSpec(_int(w["id"], f"regions[{i}].id"), poly, parse_pose(w["pose"], f"regions[{i}].pose")))

    init = _strict(doc["initial"], ("robots", "movables"), "initial")
    if not isinstance(init["robots"], dict) or not isinstance(init["movables"], dict):
        raise ParseError("initial: robots and movables must be objects keyed by id")
    rconf = {}
    for k, v in init["robots"].items():
        rconf[_key(k, "initial.robots")] = parse_pose(v, f"initial.robots.{k}")
    mpose, mregion = {}, {}
    for k, v in init["movables"].items():
        _strict(v, ("pose", "region"), f"initial.movables.{k}")
        mid = _key(k, "initial.movables")
        mpose[mid] = parse_pose(v["pose"], f"initial.movables.{k}.pose")
        mregion[mid] = _int(v["region"], f"initial.movables.{k}.region")

    scn = Scenario(tuple(robots), tuple(movables), tuple(fixed), tuple(regions),
                   InitialState(rconf, mpose, mregion), name=name)
    validate_scenario(scn)
    return scn


def _key(k: str, where: str) -> int:
    try:
        return int(k)
    except ValueError as e:
        raise ParseError(f"{where}: key {k!r} is not an integer id") from e


def load_scenario_file(path) -> Scenario:
    from pathlib import Path

    p = Path(path)
    return load_scenario(p.read_text(encoding="utf-8"), name=p.stem)


def write_scenario(scn: Scenario) -> str:
    doc = {
        "robots": [{"id": r.id, "body": shape_json(r.body), "reach": r.reach} for r in scn.robots],
        "movables": [{"id": m.id, "body": shape_json(m.body)} for m in scn.movables],
        "fixed": [{"id": f.id, "shape": shape_json(f.shape), "pose": f.pose.as_list()} for f in scn.fixed],
        "regions": [{"id": w.id, "polygon": shape_json(w.polygon), "pose": w.pose.as_list()} for w in scn.regions],
        "initial": {
            "robots": {str(k): q.as_list() for k, q in sorted(scn.initial.robot_configs.items())},
            "movables": {
                str(k): {"pose": p.as_list(), "region": scn.initial.movable_regions[k]}
                for k, p in sorted(scn.initial.movable_poses.items())
            },
        },
    }
    return json.dumps(doc, indent=1)


# ---------------------------------------------------------------------------
# validation


def _unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {what} id", (i,))
        seen.add(i)


def validate_scenario(scn: Scenario) -> None:
    _unique([r.id for r in scn.robots], "robot")
    _unique([m.id for m in scn.movables], "movable")
    _unique([f.id for f in scn.fixed], "fixed")
    _unique([w.id for w in scn.regions], "region")
    for r in scn.robots:
        if not r.reach > 0:
            raise ValidationError("robot reach must be positive", (r.id,))
    init = scn.initial
    if set(init.robot_configs) != set(scn.robot):
        raise ValidationError("initial state must configure every robot exactly once",
                              sorted(set(init.robot_configs) ^ set(scn.robot)))
    if set(init.movable_poses) != set(scn.movable):
        raise ValidationError("initial state must place every movable exactly once",
                              sorted(set(init.movable_poses) ^ set(scn.movable)))
    for m in scn.movables:
        declared = init.movable_regions[m.id]
        if declared not in scn.region:
            raise ValidationError("initial region does not exist", (m.id, declared))
        inside = [w.id for w in scn.regions if contains(w.polygon, w.pose, m.body, init.movable_poses[m.id])]
        if inside != [declared]:
            raise ValidationError("movable must be contained in exactly its declared region",
                                  (m.id,), f"declared {declared}, geometric {inside}")
    clash = _first_collision(scn, init.robot_configs, init.movable_poses, {})
    if clash is not None:
        raise ValidationError("initial state is not collision-free",
                              tuple(f"{lab[0]} {lab[1]}" for lab in clash))


def _bodies(scn, robot_configs, movable_poses, held):
    """Return (labels, Placed) for every body in the state."""
    labels, parts = [], []
    for rid, q in sorted(robot_configs.items()):
        labels.append(("robot", rid))
        parts.append(place(scn.robot[rid].body, q.as_array()[None]))
    for rid, (mid, grasp) in sorted(held.items()):
        gamma = getattr(grasp, "gamma", grasp)
        labels.append(("held", mid, rid))
        parts.append(place(scn.movable[mid].body, compose(robot_configs[rid], gamma).as_array()[None]))
    for mid, p in sorted(movable_poses.items()):
        labels.append(("movable", mid))
        parts.append(place(scn.movable[mid].body, p.as_array()[None]))
    for f in scn.fixed:
        labels.append(("fixed", f.id))
        parts.append(place(f.shape, f.pose.as_array()[None]))
    return labels, kernels.concat(parts)


def _exempt(a, b) -> bool:
    if a[0] == "fixed" and b[0] == "fixed":
        return True
    # a robot never collides with the object in its own hand
    for x, y in ((a, b), (b, a)):
        if x[0] == "robot" and y[0] == "held" and y[2] == x[1]:
            return True
    return False


def _first_collision(scn, robot_configs, movable_poses, held):
    labels, placed = _bodies(scn, robot_configs, movable_poses, held)
    pairs = [(i, j) for i, j in itertools.combinations(range(len(labels)), 2)
             if not _exempt(labels[i], labels[j])]
    if not pairs:
        return None
    ia = np.array([p[0] for p in pairs])
    ib = np.array([p[1] for p in pairs])
    hit = kernels.collide_pairs(kernels.take(placed, ia), kernels.take(placed, ib))
    if hit.any():
        k = int(np.argmax(hit))
        return (labels[pairs[k][0]], labels[pairs[k][1]])
    return None


def in_free_space(scn: Scenario, robot_configs, movable_poses, held=None) -> bool:
    """Pairwise collision freedom of robots, held objects, unheld movables and fixed shapes.

    ``held`` maps robot id to ``(movable id, grasp)``; a held movable must be
    absent from ``movable_poses``.
    """
    held = held or {}
    owners = [mid for mid, _ in held.values()]
    if len(owners) != len(set(owners)):
        raise ValueError("a movable can be held by at most one robot")
    return _first_collision(scn, robot_configs, movable_poses, held) is None
