"""Batched collision kernels over world-frame shapes.

Every body is flattened into a :class:`Placed` record of parallel arrays:
a disc is ``(cx, cy, rad)``, a convex polygon is its CCW world-frame vertex
list padded to a common width by repeating the last vertex.  Padding adds
only zero-length edges, which neither separate (SAT) nor exclude points
(half-plane test), so both kernels ignore it without masking.

Two implementations live side by side: loop kernels compiled with numba
and vectorized numpy kernels.  ``USE_NUMBA`` (env ``MRREFINE_NUMBA``)
selects which one :func:`hits_any` and :func:`collide_pairs` dispatch to.
Closed-set semantics throughout: touching counts as collision.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ._accel import USE_NUMBA, njit

DISC = 0
POLY = 1

# Pairs per vectorized chunk in the numpy path; bounds peak memory.
_CHUNK = 4096


class Placed(NamedTuple):
    kind: np.ndarray  # int64 (K,)
    cx: np.ndarray  # float64 (K,), disc center or polygon centroid
    cy: np.ndarray
    rad: np.ndarray  # disc radius, 0 for polygons
    bound: np.ndarray  # bounding-circle radius around (cx, cy)
    verts: np.ndarray  # float64 (K, V, 2)
    nv: np.ndarray  # int64 (K,), 0 for discs

    def __len__(self) -> int:
        return int(self.kind.shape[0])


def empty_placed(width: int = 1) -> Placed:
    z = np.zeros(0)
    return Placed(
        np.zeros(0, dtype=np.int64), z, z.copy(), z.copy(), z.copy(),
        np.zeros((0, width, 2)), np.zeros(0, dtype=np.int64),
    )


def pad_verts(verts: np.ndarray, width: int) -> np.ndarray:
    """Pad (K, V, 2) to (K, width, 2) by repeating the last vertex."""
    k, v, _ = verts.shape
    if v == width:
        return verts
    if v == 0:
        return np.zeros((k, width, 2))
    tail = np.repeat(verts[:, -1:, :], width - v, axis=1)
    return np.concatenate([verts, tail], axis=1)


def concat(parts: Sequence[Placed]) -> Placed:
    parts = [p for p in parts if len(p)]
    if not parts:
        return empty_placed()
    if len(parts) == 1:
        return parts[0]
    width = max(p.verts.shape[1] for p in parts)
    return Placed(
        np.concatenate([p.kind for p in parts]),
        np.concatenate([p.cx for p in parts]),
        np.concatenate([p.cy for p in parts]),
        np.concatenate([p.rad for p in parts]),
        np.concatenate([p.bound for p in parts]),
        np.concatenate([pad_verts(p.verts, width) for p in parts]),
        np.concatenate([p.nv for p in parts]),
    )


def take(p: Placed, idx) -> Placed:
    return Placed(*(a[idx] for a in p))


# ---------------------------------------------------------------------------
# numba path


@njit
def _disc_poly(px, py, r, verts, n):
    inside = True
    for i in range(n):
        ax, ay = verts[i, 0], verts[i, 1]
        bx, by = verts[(i + 1) % n, 0], verts[(i + 1) % n, 1]
        ex, ey = bx - ax, by - ay
        if ex * (py - ay) - ey * (px - ax) < 0.0:
            inside = False
        ll = ex * ex + ey * ey
        t = 0.0
        if ll > 0.0:
            t = ((px - ax) * ex + (py - ay) * ey) / ll
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        dx = ax + t * ex - px
        dy = ay + t * ey - py
        if dx * dx + dy * dy <= r * r:
            return True
    return inside


@njit
def _separated_on(va, na, vb, nb):
    # True if some edge normal of polygon a separates a from b.
    for i in range(na):
        nx = va[(i + 1) % na, 1] - va[i, 1]
        ny = va[i, 0] - va[(i + 1) % na, 0]
        if nx == 0.0 and ny == 0.0:
            continue
        amin = np.inf
        amax = -np.inf
        for j in range(na):
            d = va[j, 0] * nx + va[j, 1] * ny
            amin = min(amin, d)
            amax = max(amax, d)
        bmin = np.inf
        bmax = -np.inf
        for j in range(nb):
            d = vb[j, 0] * nx + vb[j, 1] * ny
            bmin = min(bmin, d)
            bmax = max(bmax, d)
        if amax < bmin or bmax < amin:
            return True
    return False


@njit
def _pair(ka, xa, ya, ra, ba, va, na, kb, xb, yb, rb, bb, vb, nb):
    dx = xa - xb
    dy = ya - yb
    reach = ba + bb
    if dx * dx + dy * dy > reach * reach:
        return False
    if ka == 0 and kb == 0:
        return True  # bounding circles are the discs
    if ka == 0:
        return _disc_poly(xa, ya, ra, vb, nb)
    if kb == 0:
        return _disc_poly(xb, yb, rb, va, na)
    if _separated_on(va, na, vb, nb):
        return False
    return not _separated_on(vb, nb, va, na)


@njit
def _hits_any_nb(ka, xa, ya, ra, ba, va, na, kb, xb, yb, rb, bb, vb, nb):
    out = np.zeros(ka.shape[0], dtype=np.bool_)
    for i in range(ka.shape[0]):
        for j in range(kb.shape[0]):
            if _pair(ka[i], xa[i], ya[i], ra[i], ba[i], va[i], na[i],
                     kb[j], xb[j], yb[j], rb[j], bb[j], vb[j], nb[j]):
                out[i] = True
                break
    return out


@njit
def _collide_pairs_nb(ka, xa, ya, ra, ba, va, na, kb, xb, yb, rb, bb, vb, nb):
    out = np.zeros(ka.shape[0], dtype=np.bool_)
    for i in range(ka.shape[0]):
        out[i] = _pair(ka[i], xa[i], ya[i], ra[i], ba[i], va[i], na[i],
                       kb[i], xb[i], yb[i], rb[i], bb[i], vb[i], nb[i])
    return out


def hits_any_numba(a: Placed, b: Placed) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return np.zeros(len(a), dtype=bool)
    return _hits_any_nb(*_contig(a), *_contig(b))


def collide_pairs_numba(a: Placed, b: Placed) -> np.ndarray:
    if len(a) == 0:
        return np.zeros(0, dtype=bool)
    return _collide_pairs_nb(*_contig(a), *_contig(b))


def _contig(p: Placed):
    return (
        np.ascontiguousarray(p.kind, dtype=np.int64),
        np.ascontiguousarray(p.cx, dtype=np.float64),
        np.ascontiguousarray(p.cy, dtype=np.float64),
        np.ascontiguousarray(p.rad, dtype=np.float64),
        np.ascontiguousarray(p.bound, dtype=np.float64),
        np.ascontiguousarray(p.verts, dtype=np.float64),
        np.ascontiguousarray(p.nv, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# numpy path


def _disc_poly_np(px, py, r, verts):
    a = verts
    b = np.roll(verts, -1, axis=1)
    e = b - a
    rel = np.stack([px, py], axis=-1)[:, None, :] - a
    cross = e[..., 0] * rel[..., 1] - e[..., 1] * rel[..., 0]
    inside = np.all(cross >= 0.0, axis=1)
    ll = np.einsum("pvi,pvi->pv", e, e)
    safe = np.where(ll > 0.0, ll, 1.0)
    t = np.clip(np.einsum("pvi,pvi->pv", rel, e) / safe, 0.0, 1.0)
    t = np.where(ll > 0.0, t, 0.0)
    d = rel - t[..., None] * e
    near = np.any(np.einsum("pvi,pvi->pv", d, d) <= (r * r)[:, None], axis=1)
    return inside | near


def _separated_on_np(va, vb):
    e = np.roll(va, -1, axis=1) - va
    normals = np.stack([e[..., 1], -e[..., 0]], axis=-1)  # (P, V, 2)
    pa = np.einsum("pai,pvi->pav", normals, va)
    pb = np.einsum("pai,pvi->pav", normals, vb)
    gap = (pa.max(axis=2) < pb.min(axis=2)) | (pb.max(axis=2) < pa.min(axis=2))
    return np.any(gap, axis=1)


def _pairs_np(a: Placed, b: Placed) -> np.ndarray:
    """Elementwise exact test for equal-length batches (no broadcasting)."""
    n = len(a)
    out = np.zeros(n, dtype=bool)
    dx = a.cx - b.cx
    dy = a.cy - b.cy
    reach = a.bound + b.bound
    cand = dx * dx + dy * dy <= reach * reach
    if not cand.any():
        return out
    dd = cand & (a.kind == DISC) & (b.kind == DISC)
    out[dd] = True
    dp = np.nonzero(cand & (a.kind == DISC) & (b.kind == POLY))[0]
    if dp.size:
        out[dp] = _disc_poly_np(a.cx[dp], a.cy[dp], a.rad[dp], b.verts[dp])
    pd = np.nonzero(cand & (a.kind == POLY) & (b.kind == DISC))[0]
    if pd.size:
        out[pd] = _disc_poly_np(b.cx[pd], b.cy[pd], b.rad[pd], a.verts[pd])
    pp = np.nonzero(cand & (a.kind == POLY) & (b.kind == POLY))[0]
    if pp.size:
        width = max(a.verts.shape[1], b.verts.shape[1])
        va = pad_verts(a.verts[pp], width)
        vb = pad_verts(b.verts[pp], width)
        out[pp] = ~(_separated_on_np(va, vb) | _separated_on_np(vb, va))
    return out


def collide_pairs_numpy(a: Placed, b: Placed) -> np.ndarray:
    out = np.zeros(len(a), dtype=bool)
    for s in range(0, len(a), _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[sl] = _pairs_np(take(a, sl), take(b, sl))
    return out


def hits_any_numpy(a: Placed, b: Placed) -> np.ndarray:
    out = np.zeros(len(a), dtype=bool)
    if len(a) == 0 or len(b) == 0:
        return out
    dx = a.cx[:, None] - b.cx[None, :]
    dy = a.cy[:, None] - b.cy[None, :]
    reach = a.bound[:, None] + b.bound[None, :]
    ia, ib = np.nonzero(dx * dx + dy * dy <= reach * reach)
    for s in range(0, ia.size, _CHUNK):
        sa, sb = ia[s:s + _CHUNK], ib[s:s + _CHUNK]
        hit = _pairs_np(take(a, sa), take(b, sb))
        out[sa[hit]] = True
    return out


if USE_NUMBA:
    hits_any = hits_any_numba
    collide_pairs = collide_pairs_numba
else:
    hits_any = hits_any_numpy
    collide_pairs = collide_pairs_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
