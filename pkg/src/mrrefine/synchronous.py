"""Synchronous baseline: robots leave and arrive together, in global phases.

In each phase every robot whose next action is ready follows its Step-3
path for that action; the phase ends when the slowest one arrives, and only
then do transitions fire.  When two participants collide the lower-indexed
one sits the phase out and the phase is retried; a participant that runs
into an idle robot sits out as well.
"""

from __future__ import annotations

import logging

import numpy as np

from .drrt import CompositeProblem
from .errors import StepTimeout
from .geom import interpolate, wrap_angles
from .timing import NEVER, Deadline

log = logging.getLogger(__name__)


def _timeline(roadmap, path, rot_weight) -> tuple:
    """Vertex configs along ``path`` and their arrival times at unit speed."""
    verts = roadmap.vertices[path]
    d = verts[1:] - verts[:-1]
    seg = np.hypot(d[:, 0], d[:, 1]) + rot_weight * np.abs(wrap_angles(d[:, 2]))
    return verts, np.concatenate([[0.0], np.cumsum(seg)])


def _at(verts, times, t) -> np.ndarray:
    if t >= times[-1]:
        return verts[-1]
    j = int(np.searchsorted(times, t, side="right")) - 1
    span = times[j + 1] - times[j]
    f = 0.0 if span <= 0 else (t - times[j]) / span
    return interpolate(verts[j], verts[j + 1], np.array([f]))[0]


def run_phases(problem: CompositeProblem, paths: list, *, deadline: Deadline = NEVER) -> tuple:
    """Execute the plan phase by phase.

    ``paths[i][k]`` is track i's Step-3 vertex path for its k-th action.
    Returns (states, configs, phases): per waypoint the (k, v) state tuple
    and the (R, 3) configurations, plus the phase records.
    Raises StepTimeout when no ready robot can move without a conflict.
    """
    tracks = problem.tracks
    R = len(tracks)
    state = [(-1, 0) if t.n_actions else (0, 0) for t in tracks]
    conf = np.array([t.initial for t in tracks], dtype=float)
    states, configs, phases = [tuple(state)], [conf.copy()], []
    done = [0] * R  # actions completed per track
    while any(done[i] < tracks[i].n_actions for i in range(R)):
        deadline.check()
        progress = frozenset(a for i, t in enumerate(tracks) for a in t.actions[:done[i]])
        ready = [i for i, t in enumerate(tracks) if done[i] < t.n_actions
                 and problem.prec.preds(t.actions[done[i]]) <= progress]
        participants = list(ready)
        blamed = set()
        while participants:
            deadline.check()
            got = _try_phase(problem, paths, state, conf, done, participants)
            if got[0] == "ok":
                break
            drop, other = got[1], got[2]
            log.debug("synchronous phase: track %d sits out", drop)
            participants.remove(drop)
            for i in (drop, other):
                if i >= 0 and done[i] > 0:
                    blamed.add(tracks[i].actions[done[i] - 1])  # where it stands
                if i >= 0 and done[i] < tracks[i].n_actions:
                    blamed.add(tracks[i].actions[done[i]])  # where it is headed
        if not participants:
            raise StepTimeout("synchronous phases cannot proceed without a conflict", sorted(blamed))
        _, seg_states, seg_confs, fired_state = got
        start = len(states) - 1
        # the robots that start now enter their action at the phase's first waypoint
        states[-1] = seg_states[0]
        states.extend(seg_states[1:])
        configs.extend(seg_confs[1:])
        states[-1] = fired_state
        for i in participants:
            done[i] += 1
        state = list(fired_state)
        conf = configs[-1].copy()
        phases.append({"robots": [tracks[i].robot for i in participants], "start": start,
                       "end": len(states) - 1})
    return states, configs, phases


def _try_phase(problem, paths, state, conf, done, participants) -> tuple:
    tracks = problem.tracks
    phase_state = list(state)
    lines = {}
    for i in participants:
        k = done[i]
        phase_state[i] = (k, tracks[i].roadmaps[k].start_index)
        lines[i] = _timeline(tracks[i].roadmaps[k], paths[i][k], problem.rot_weight)
    phase_state = tuple(phase_state)
    breaks = np.unique(np.concatenate([times for _, times in lines.values()]))
    confs = [conf.copy()]
    for t in breaks[1:]:
        c = confs[-1].copy()
        for i, (verts, times) in lines.items():
            c[i] = _at(verts, times, t)
        confs.append(c)
    for a, b in zip(confs, confs[1:]):
        _, bad = problem.segment_conflicts(phase_state, a, b)
        for i, j in bad:
            if j < 0:
                return "drop", i, -1
            ins, jns = i in lines, j in lines
            if ins and jns:
                return "drop", min(i, j), max(i, j)
            return ("drop", i, j) if ins else ("drop", j, i)
    fired = list(phase_state)
    fired_actions = []
    for i in participants:
        k = done[i] + 1
        t = tracks[i]
        fired_actions.append(t.actions[k - 1])
        fired[i] = (k, t.roadmaps[k].start_index) if k < t.n_actions else (
            k, t.park.start_index if t.park is not None else t.roadmaps[-1].goal_index)
    fired = tuple(fired)
    blockers = problem.placement_blockers(fired, fired_actions)
    if blockers:
        placers = [i for i in participants if tracks[i].actions[done[i]] in problem.place_pose]
        return "drop", min(placers), blockers[0]
    # waypoint states: the phase state throughout, the fired state at the end
    seg_states = [phase_state] * len(confs)
    return "ok", seg_states, confs, fired
