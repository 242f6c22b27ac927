"""Planar geometry: SE(2) poses, disc and convex-polygon shapes, collision,
containment and swept-segment validity.

Scalar entry points (:func:`collide`, :func:`contains`, :func:`segment_valid`)
are thin wrappers over the batched kernels in :mod:`mrrefine.kernels`; the
planners call the batched helpers (:func:`place`, :func:`sweep_poses`)
directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .kernels import DISC, POLY, Placed

TWO_PI = 2.0 * math.pi
DEFAULT_STEP = 0.05


class ShapeError(ValueError):
    pass


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    return theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    return theta - TWO_PI * np.ceil((theta - np.pi) / TWO_PI)


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @classmethod
    def of(cls, v: Sequence[float]) -> "Pose2":
        return cls(v[0], v[1], v[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def as_list(self) -> list:
        return [self.x, self.y, self.theta]

    @property
    def translation_norm(self) -> float:
        return math.hypot(self.x, self.y)


# A robot configuration is the pose of its body frame.
Config = Pose2

IDENTITY = Pose2()


def compose(a: Pose2, b: Pose2) -> Pose2:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)


def inverse(a: Pose2) -> Pose2:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(-(c * a.x + s * a.y), s * a.x - c * a.y, -a.theta)


def compose_many(q: np.ndarray, b: Pose2) -> np.ndarray:
    """Row-wise ``q[i] ∘ b`` for a (K, 3) pose array."""
    c, s = np.cos(q[:, 2]), np.sin(q[:, 2])
    out = np.empty_like(q)
    out[:, 0] = q[:, 0] + c * b.x - s * b.y
    out[:, 1] = q[:, 1] + s * b.x + c * b.y
    out[:, 2] = wrap_angles(q[:, 2] + b.theta)
    return out


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ShapeError(f"disc radius must be positive, got {self.radius}")

    @property
    def lever(self) -> float:
        return 0.0

    @property
    def circumradius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple  # ((x, y), ...) counter-clockwise, body frame

    def __post_init__(self):
        vs = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", vs)
        if len(vs) < 3:
            raise ShapeError("polygon needs at least 3 vertices")
        turn = 0.0
        n = len(vs)
        for i in range(n):
            ax, ay = vs[i]
            bx, by = vs[(i + 1) % n]
            cx, cy = vs[(i + 2) % n]
            e1 = (bx - ax, by - ay)
            e2 = (cx - bx, cy - by)
            cross = e1[0] * e2[1] - e1[1] * e2[0]
            if cross <= 0.0:
                raise ShapeError("polygon must be strictly convex and counter-clockwise")
            turn += math.atan2(cross, e1[0] * e2[0] + e1[1] * e2[1])
        if abs(turn - TWO_PI) > 1e-6:
            raise ShapeError("polygon winds more than once")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def lever(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    @property
    def circumradius(self) -> float:
        return self.lever

    @classmethod
    def box(cls, width: float, height: float) -> "ConvexPolygon":
        w, h = width / 2.0, height / 2.0
        return cls(((-w, -h), (w, -h), (w, h), (-w, h)))


Shape = Union[Disc, ConvexPolygon]


def place(shape: Shape, poses: np.ndarray) -> Placed:
    """World-frame kernel records for ``shape`` at each row of ``poses``."""
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    k = poses.shape[0]
    if isinstance(shape, Disc):
        return Placed(
            np.full(k, DISC, dtype=np.int64),
            poses[:, 0].copy(),
            poses[:, 1].copy(),
            np.full(k, shape.radius),
            np.full(k, shape.radius),
            np.zeros((k, 1, 2)),
            np.zeros(k, dtype=np.int64),
        )
    local = shape.array
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    wx = poses[:, 0:1] + c[:, None] * local[None, :, 0] - s[:, None] * local[None, :, 1]
    wy = poses[:, 1:2] + s[:, None] * local[None, :, 0] + c[:, None] * local[None, :, 1]
    verts = np.stack([wx, wy], axis=-1)
    cx = wx.mean(axis=1)
    cy = wy.mean(axis=1)
    bound = np.sqrt(((wx - cx[:, None]) ** 2 + (wy - cy[:, None]) ** 2).max(axis=1))
    return Placed(
        np.full(k, POLY, dtype=np.int64), cx, cy, np.zeros(k), bound * (1.0 + 1e-12),
        verts, np.full(k, local.shape[0], dtype=np.int64),
    )


def place_all(items: Iterable[tuple]) -> Placed:
    """Concatenate (shape, pose) pairs into one kernel batch."""
    parts = [place(shape, pose_array(pose)) for shape, pose in items]
    return kernels.concat(parts)


def pose_array(p) -> np.ndarray:
    if isinstance(p, Pose2):
        return p.as_array()[None, :]
    return np.atleast_2d(np.asarray(p, dtype=float))


def collide(sa: Shape, pa: Pose2, sb: Shape, pb: Pose2) -> bool:
    return bool(kernels.collide_pairs(place(sa, pose_array(pa)), place(sb, pose_array(pb)))[0])


def world_vertices(shape: ConvexPolygon, pose: Pose2) -> np.ndarray:
    return place(shape, pose_array(pose)).verts[0]


def contains(region: Shape, pregion: Pose2, s: Shape, ps: Pose2) -> bool:
    """True iff ``s`` at ``ps`` lies inside ``region`` (boundary contact allowed)."""
    if not isinstance(region, ConvexPolygon):
        raise ShapeError("containment region must be a convex polygon")
    rv = world_vertices(region, pregion)
    a = rv
    e = np.roll(rv, -1, axis=0) - rv
    length = np.hypot(e[:, 0], e[:, 1])
    if isinstance(s, Disc):
        pts = np.array([[ps.x, ps.y]])
        margin = s.radius
    else:
        pts = world_vertices(s, ps)
        margin = 0.0
    rel = pts[:, None, :] - a[None, :, :]
    # signed distance to each edge line, positive inside for CCW winding
    sd = (e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]) / length[None, :]
    return bool(np.all(sd >= margin - 1e-12))


# ---------------------------------------------------------------------------
# sweeps


def sweep_count(p0: np.ndarray, p1: np.ndarray, lever: float, step: float) -> int:
    """Interpolation intervals so no body point moves more than ``step``."""
    disp = math.hypot(p1[0] - p0[0], p1[1] - p0[1]) + abs(wrap_angle(p1[2] - p0[2])) * lever
    return max(1, int(math.ceil(disp / step - 1e-9)))


def interpolate(p0: np.ndarray, p1: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    """Linear in (x, y), shortest arc in theta."""
    f = np.asarray(fractions, dtype=float)[:, None]
    d = np.array([p1[0] - p0[0], p1[1] - p0[1], wrap_angle(p1[2] - p0[2])])
    out = p0[None, :] + f * d[None, :]
    out[:, 2] = wrap_angles(out[:, 2])
    return out


def sweep_poses(p0: np.ndarray, p1: np.ndarray, lever: float, step: float) -> np.ndarray:
    n = sweep_count(p0, p1, lever, step)
    return interpolate(p0, p1, np.arange(n + 1) / n)


def segment_valid(
    s: Shape,
    start: Pose2,
    end: Pose2,
    obstacles: Sequence[tuple],
    step: float = DEFAULT_STEP,
) -> bool:
    if step <= 0:
        raise ValueError("step must be positive")
    if not obstacles:
        return True
    poses = sweep_poses(start.as_array(), end.as_array(), s.lever, step)
    return not bool(kernels.hits_any(place(s, poses), place_all(obstacles)).any())
