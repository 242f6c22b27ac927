"""Solution records and their JSON file format.

The composite path is a list of waypoints; each gives, per robot (sorted by
id), ``[k, x, y, theta]`` where ``k`` is the index of the robot's current
action (-1 before its first, K once done).  Between consecutive waypoints
every robot moves in a straight line at unit speed and waits once it arrives,
so a segment lasts as long as its longest move.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParseError
from .geom import Pose2, wrap_angle
from .task import Grasp


def move_length(a, b, rot_weight: float = 0.5) -> float:
    return float(np.hypot(b[0] - a[0], b[1] - a[1]) + rot_weight * abs(wrap_angle(b[2] - a[2])))


@dataclass
class Solution:
    placements: dict  # transfer id -> Pose2
    grasps: dict  # transit id -> Grasp
    configs: dict  # action id -> Pose2
    induced: list  # [(before, after)]
    robots: tuple  # robot ids, the column order of ``waypoints``
    waypoints: list  # per waypoint: list of (k, x, y, theta)
    phases: Optional[list] = None  # synchronous mode: per phase {"robots": [...], "start": i, "end": j}
    seed: int = 0
    mode: str = "full"
    params: dict = field(default_factory=dict)
    rot_weight: float = 0.5

    def segment_durations(self) -> list:
        out = []
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            out.append(max((move_length(p[1:], q[1:], self.rot_weight) for p, q in zip(a, b)), default=0.0))
        return out

    @property
    def makespan(self) -> float:
        return float(sum(self.segment_durations()))

    def robot_track(self, r: int) -> list:
        i = self.robots.index(r)
        return [w[i] for w in self.waypoints]

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "mode": self.mode,
            "params": self.params,
            "assignment": {
                "placements": {a: p.as_list() for a, p in self.placements.items()},
                "grasps": {a: {"robot": g.r, "movable": g.m, "gamma": g.gamma.as_list()}
                           for a, g in self.grasps.items()},
                "configs": {a: q.as_list() for a, q in self.configs.items()},
            },
            "induced_orderings": [list(e) for e in sorted(self.induced)],
            "robots": list(self.robots),
            "composite_path": [[[int(w[0]), float(w[1]), float(w[2]), float(w[3])] for w in wp]
                               for wp in self.waypoints],
            "phases": self.phases,
            "rot_weight": self.rot_weight,
            "makespan": self.makespan,
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def load_solution(text: str) -> Solution:
    try:
        doc = json.loads(text)
        asg = doc["assignment"]
        sol = Solution(
            placements={a: Pose2.of(v) for a, v in asg["placements"].items()},
            grasps={a: Grasp(int(g["robot"]), int(g["movable"]), Pose2.of(g["gamma"]))
                    for a, g in asg["grasps"].items()},
            configs={a: Pose2.of(v) for a, v in asg["configs"].items()},
            induced=[tuple(e) for e in doc["induced_orderings"]],
            robots=tuple(int(r) for r in doc["robots"]),
            waypoints=[[(int(w[0]), float(w[1]), float(w[2]), float(w[3])) for w in wp]
                       for wp in doc["composite_path"]],
            phases=doc.get("phases"),
            seed=int(doc.get("seed", 0)),
            mode=str(doc.get("mode", "full")),
            params=dict(doc.get("params", {})),
            rot_weight=float(doc.get("rot_weight", 0.5)),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as e:
        raise ParseError(f"solution file is malformed: {e}") from e
    if any(len(wp) != len(sol.robots) for wp in sol.waypoints):
        raise ParseError("solution file: every waypoint needs one entry per robot")
    return sol


def waypoints_from_states(problem, states) -> list:
    """Per composite state, the ``(k, x, y, theta)`` rows for every track."""
    out = []
    for st in states:
        conf = problem.configs(st)
        out.append([(int(kv[0]), *map(float, conf[i])) for i, kv in enumerate(st)])
    return out
