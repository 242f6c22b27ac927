"""Random two-robot grid instances and a tensor-product BFS oracle.

Every action roadmap is the same 4-connected unit grid; an action runs from
one waypoint to the next.  The oracle re-implements the gate and
completion rules and checks disc contact in closed form, so it shares no
code with the composite search.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from mrrefine.drrt import CompositeProblem, Track
from mrrefine.geom import Disc
from mrrefine.prm import Roadmap, dijkstra
from mrrefine.task import OrderingSet


@dataclass
class GridInstance:
    cells: list  # (x, y) per vertex
    adj: list
    radius: float
    waypoints: list  # per robot: vertex indices, start first
    prec: list  # cross-robot (before, after) action pairs

    def action_ids(self, r: int) -> list:
        return [f"r{r}a{k}" for k in range(len(self.waypoints[r]) - 1)]


def random_instance(rng: np.random.Generator) -> GridInstance:
    while True:
        nx, ny = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        cells = [(x, y) for x in range(nx) for y in range(ny) if rng.random() > 0.25]
        if len(cells) < 3:
            continue
        index = {c: i for i, c in enumerate(cells)}
        adj = [[] for _ in cells]
        for (x, y), i in index.items():
            for nb in ((x + 1, y), (x, y + 1)):
                j = index.get(nb)
                if j is not None and rng.random() > 0.1:
                    adj[i].append((j, 1.0))
                    adj[j].append((i, 1.0))
        n_act = [int(rng.integers(1, 3)), int(rng.integers(1, 3))]
        wps = [[int(v) for v in rng.choice(len(cells), n + 1)] for n in n_act]
        if wps[0][0] == wps[1][0] or wps[0][-1] == wps[1][-1]:
            continue
        # every single action must be solvable on its own
        if not all(np.isfinite(dijkstra(adj, w[k])[0][w[k + 1]]) for w in wps for k in range(len(w) - 1)):
            continue
        radius = float(rng.choice([0.3, 0.4]))
        inst = GridInstance(cells, adj, radius, wps, [])
        if rng.random() < 0.5:
            a = str(rng.choice(inst.action_ids(0)))
            b = str(rng.choice(inst.action_ids(1)))
            inst.prec = [(a, b)] if rng.random() < 0.5 else [(b, a)]
        return inst


def to_problem(inst: GridInstance) -> CompositeProblem:
    verts = np.array([[x, y, 0.0] for x, y in inst.cells])
    edges = sorted({(min(i, j), max(i, j), w) for i, nbs in enumerate(inst.adj) for j, w in nbs})
    tracks = []
    for r, wps in enumerate(inst.waypoints):
        maps = []
        for k in range(len(wps) - 1):
            ctg, _ = dijkstra(inst.adj, wps[k + 1])
            maps.append(Roadmap(verts, edges, inst.adj, wps[k], wps[k + 1], 0.0, ctg, True))
        tracks.append(Track(r + 1, Disc(inst.radius), verts[wps[0]], tuple(inst.action_ids(r)), tuple(maps),
                            (None,) * len(maps)))
    nodes = [a for r in range(2) for a in inst.action_ids(r)]
    chains = [list(zip(inst.action_ids(r), inst.action_ids(r)[1:])) for r in range(2)]
    prec = OrderingSet(chains[0] + chains[1] + inst.prec, nodes)
    xs, ys = zip(*inst.cells)
    return CompositeProblem(tuple(tracks), prec, bounds=(min(xs) - 0.5, min(ys) - 0.5, max(xs) + 0.5, max(ys) + 0.5))


def _meet(a0, a1, b0, b1, reach: float) -> bool:
    """Whether two points moving linearly over the same unit interval come within ``reach``."""
    p = np.subtract(a0, b0, dtype=float)
    d = np.subtract(a1, b1, dtype=float) - p
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, -float(p @ d) / dd))
    return math.hypot(*(p + t * d)) <= reach + 1e-12


def bfs_feasible(inst: GridInstance) -> bool:
    cells = inst.cells
    ids = [inst.action_ids(r) for r in range(2)]
    preds = {a: {b for b, c in inst.prec if c == a} for a in ids[0] + ids[1]}

    def done_set(ks):
        return set(ids[0][:ks[0]]) | set(ids[1][:ks[1]])

    def open_(r, ks):
        return ks[r] < len(ids[r]) and preds[ids[r][ks[r]]] <= done_set(ks)

    def settle(ks, vs):
        ks = list(ks)
        changed = True
        while changed:
            changed = False
            for r in range(2):
                if ks[r] < len(ids[r]) and vs[r] == inst.waypoints[r][ks[r] + 1] and open_(r, ks):
                    ks[r] += 1
                    changed = True
        return tuple(ks)

    start = (settle((0, 0), tuple(w[0] for w in inst.waypoints)), tuple(w[0] for w in inst.waypoints))
    seen, queue = {start}, deque([start])
    while queue:
        ks, vs = queue.popleft()
        if all(ks[r] == len(ids[r]) for r in range(2)):
            return True
        options = [[None] + ([j for j, _ in inst.adj[vs[r]]] if open_(r, ks) else []) for r in range(2)]
        for mv in itertools.product(*options):
            if mv == (None, None):
                continue
            end = tuple(vs[r] if mv[r] is None else mv[r] for r in range(2))
            if _meet(cells[vs[0]], cells[end[0]], cells[vs[1]], cells[end[1]], 2 * inst.radius):
                continue
            nxt = (settle(ks, end), end)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False
