"""Static SVG of a scenario and, optionally, a solution trace."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .geom import Disc, place

# one color per robot, cycled; chosen to stay apart in grayscale too
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

_SCALE = 100.0  # pixels per meter
_PAD = 0.2


def _f(x: float) -> str:
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def _shape(shape, pose, attrs: str) -> str:
    pose = np.asarray(pose, dtype=float)
    if isinstance(shape, Disc):
        return f'<circle cx="{_f(pose[0])}" cy="{_f(pose[1])}" r="{_f(shape.radius)}" {attrs}/>'
    verts = place(shape, pose[None]).verts[0]
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in verts)
    return f'<polygon points="{pts}" {attrs}/>'


def render_svg(scene, plan=None, solution=None, title: str = "") -> str:
    """SVG 1.1 text; y points up.  Placements need ``plan`` to know which object each one holds."""
    x0, y0, x1, y1 = scene.bounds
    x0, y0, x1, y1 = x0 - _PAD, y0 - _PAD, x1 + _PAD, y1 + _PAD
    w, h = (x1 - x0) * _SCALE, (y1 - y0) * _SCALE
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(w)}" height="{_f(h)}" '
        f'viewBox="0 0 {_f(w)} {_f(h)}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    # world frame: y up
    out.append(f'<g transform="translate({_f(-x0 * _SCALE)},{_f(y1 * _SCALE)}) scale({_f(_SCALE)},{_f(-_SCALE)})">')
    out.append('<g id="regions">')
    for reg in sorted(scene.regions, key=lambda r: r.id):
        out.append(_shape(reg.polygon, reg.pose.as_array(),
                          'fill="none" stroke="#888888" stroke-width="0.02" stroke-dasharray="0.06,0.04"'))
    out.append("</g>")
    out.append('<g id="fixed">')
    for f in sorted(scene.fixed, key=lambda f: f.id):
        out.append(_shape(f.shape, f.pose.as_array(), 'fill="#555555" stroke="none"'))
    out.append("</g>")
    out.append('<g id="objects">')
    for m in sorted(scene.movables, key=lambda m: m.id):
        out.append(_shape(m.body, scene.initial.movable_poses[m.id].as_array(),
                          'fill="#f2d16b" stroke="#9a7d1e" stroke-width="0.01" opacity="0.6"'))
    if solution is not None and plan is not None:
        for aid in sorted(solution.placements):
            body = scene.movable[plan.actions[aid].m].body
            out.append(_shape(body, solution.placements[aid].as_array(),
                              'fill="none" stroke="#9a7d1e" stroke-width="0.015"'))
    out.append("</g>")
    out.append('<g id="robots">')
    for i, r in enumerate(sorted(scene.robot)):
        color = PALETTE[i % len(PALETTE)]
        q = scene.initial.robot_configs[r]
        out.append(_shape(scene.robot[r].body, q.as_array(),
                          f'fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="0.01"'))
        if solution is not None and r in solution.robots:
            pts = [(w_[1], w_[2]) for w_ in solution.robot_track(r)]
            line = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
            out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="0.02" '
                       f'stroke-linejoin="round"/>')
    out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
