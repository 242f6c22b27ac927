"""Abstract actions, the ordering DAG and region event sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional

from .errors import CycleError, ParseError, ValidationError
from .geom import Pose2

TRANSIT = "transit"
TRANSFER = "transfer"


@dataclass(frozen=True)
class AbstractAction:
    id: str
    kind: str
    r: int
    m: int
    w: int
    w2: int

    @property
    def is_transit(self) -> bool:
        return self.kind == TRANSIT


@dataclass(frozen=True)
class Grasp:
    r: int
    m: int
    gamma: Pose2


@dataclass
class VariableSet:
    """Values of the refinement variables, keyed by action id.

    ``placements`` holds the placement pose of each transfer, ``grasps`` the
    grasp of each transit, ``configs`` every action's transition configuration.
    """

    placements: dict = field(default_factory=dict)
    grasps: dict = field(default_factory=dict)
    configs: dict = field(default_factory=dict)


class OrderingSet:
    """Immutable DAG over action ids.  ``a < b`` means b may not start before a completes."""

    def __init__(self, edges: Iterable[tuple] = (), nodes: Iterable[str] = ()):
        self.edges = frozenset((str(a), str(b)) for a, b in edges)
        self.nodes = frozenset(nodes) | {x for e in self.edges for x in e}

    def __eq__(self, other):
        return isinstance(other, OrderingSet) and self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __len__(self):
        return len(self.edges)

    def __repr__(self):
        return f"OrderingSet({sorted(self.edges)})"

    @cached_property
    def _succ(self) -> dict:
        succ = {n: set() for n in self.nodes}
        for a, b in self.edges:
            succ[a].add(b)
        return succ

    @cached_property
    def _pred(self) -> dict:
        pred = {n: set() for n in self.nodes}
        for a, b in self.edges:
            pred[b].add(a)
        return pred

    @cached_property
    def descendants(self) -> dict:
        memo: dict = {}

        def visit(n, stack):
            if n in memo:
                return memo[n]
            if n in stack:
                raise CycleError(n, n)
            stack.add(n)
            out = set()
            for s in self._succ.get(n, ()):
                out.add(s)
                out |= visit(s, stack)
            stack.discard(n)
            memo[n] = frozenset(out)
            return memo[n]

        for n in sorted(self.nodes):
            visit(n, set())
        return memo

    def precedes(self, a: str, b: str) -> bool:
        """True iff a ≺ b is in the transitive closure."""
        return b in self.descendants.get(a, ())

    def preds(self, b: str) -> frozenset:
        return frozenset(self._pred.get(b, ()))

    def closure_edges(self) -> frozenset:
        return frozenset((a, b) for a, ds in self.descendants.items() for b in ds)

    def with_edges(self, edges: Iterable[tuple]) -> "OrderingSet":
        out = self
        for a, b in edges:
            out = add_ordering(out, a, b)
        return out

    def topological(self) -> list:
        """Deterministic topological order (Kahn, lexicographic tie-break)."""
        import heapq

        indeg = {n: len(self._pred[n]) for n in self.nodes}
        heap = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            n = heapq.heappop(heap)
            out.append(n)
            for s in self._succ[n]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(heap, s)
        if len(out) != len(self.nodes):
            raise CycleError("?", "?")
        return out


def add_ordering(prec: OrderingSet, before: str, after: str) -> OrderingSet:
    if before == after or prec.precedes(after, before):
        raise CycleError(before, after)
    if prec.precedes(before, after):
        return prec
    return OrderingSet(prec.edges | {(before, after)}, prec.nodes)


@dataclass(frozen=True)
class Slot:
    """One stay of a movable in a region: from its add (or s0) to its removal.

    ``pick`` is the transit that grasps it there, ``remove`` the transfer that
    carries it out.  Either is None if the movable stays to the end.
    """

    id: str
    movable: int
    region: int
    add: Optional[str]
    pick: Optional[str]
    remove: Optional[str]

    @property
    def initial(self) -> bool:
        return self.add is None


@dataclass(frozen=True)
class RegionEvent:
    kind: str  # "present" | "add" | "remove"
    movable: int
    actions: tuple  # ids realizing the event; ("transit", "transfer") for removals


@dataclass(frozen=True, eq=False)
class TaskPlan:
    actions: Mapping[str, AbstractAction]
    per_robot: Mapping[int, tuple]
    prec: OrderingSet
    initial_region: Mapping[int, int] = field(default_factory=dict)

    @cached_property
    def order(self) -> list:
        """Action ids in a deterministic topological order."""
        return [a for a in self.prec.topological() if a in self.actions]

    @cached_property
    def position(self) -> dict:
        """action id -> (robot, index in its list)."""
        return {a: (r, k) for r, ids in self.per_robot.items() for k, a in enumerate(ids)}

    def next_of(self, aid: str) -> Optional[str]:
        r, k = self.position[aid]
        ids = self.per_robot[r]
        return ids[k + 1] if k + 1 < len(ids) else None

    def pairs(self) -> list:
        """(transit, transfer) id pairs, per robot in list order."""
        out = []
        for r in sorted(self.per_robot):
            ids = self.per_robot[r]
            for k in range(0, len(ids), 2):
                out.append((ids[k], ids[k + 1]))
        return out

    @cached_property
    def movable_chain(self) -> dict:
        """movable id -> its action ids in execution order."""
        chains: dict = {}
        for a in self.order:
            chains.setdefault(self.actions[a].m, []).append(a)
        return {m: tuple(c) for m, c in chains.items()}

    @cached_property
    def slots(self) -> tuple:
        out = []
        for m in sorted(set(self.initial_region) | set(self.movable_chain)):
            chain = self.movable_chain.get(m, ())
            cur_region = self.initial_region.get(m)
            cur_add = None
            k = 0
            while k <= len(chain):
                if k == len(chain):
                    if cur_region is not None:
                        out.append(Slot(_slot_id(m, cur_region, cur_add), m, cur_region, cur_add, None, None))
                    break
                t, f = chain[k], chain[k + 1]
                out.append(Slot(_slot_id(m, cur_region, cur_add), m, cur_region, cur_add, t, f))
                cur_region, cur_add = self.actions[f].w2, f
                k += 2
        return tuple(out)

    @cached_property
    def slot(self) -> dict:
        return {s.id: s for s in self.slots}

    def slot_added_by(self, transfer_id: str) -> Slot:
        for s in self.slots:
            if s.add == transfer_id:
                return s
        raise KeyError(transfer_id)

    def slot_picked_by(self, transit_id: str) -> Slot:
        for s in self.slots:
            if s.pick == transit_id:
                return s
        raise KeyError(transit_id)

    def regions_used(self) -> list:
        return sorted({s.region for s in self.slots if s.add is not None or s.pick is not None})


def _slot_id(m: int, w: int, add: Optional[str]) -> str:
    return f"m{m}@w{w}:{add or 's0'}"


def ready_actions(plan: TaskPlan, completed) -> set:
    completed = set(completed)
    out = set()
    for r, ids in plan.per_robot.items():
        nxt = next((a for a in ids if a not in completed), None)
        if nxt is not None and plan.prec.preds(nxt) <= completed:
            out.add(nxt)
    return out


def region_sequences(plan: TaskPlan, w: int) -> dict:
    """Per movable, the alternating add/remove events it undergoes in region ``w``."""
    seqs: dict = {}
    for s in plan.slots:
        if s.region != w:
            continue
        ev = seqs.setdefault(s.movable, [])
        if s.add is None:
            ev.append(RegionEvent("present", s.movable, ()))
        else:
            ev.append(RegionEvent("add", s.movable, (s.add,)))
        if s.pick is not None:
            ev.append(RegionEvent("remove", s.movable, (s.pick, s.remove)))
    return seqs


# ---------------------------------------------------------------------------
# plan file


def load_plan(text: str, scene=None) -> TaskPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"plan is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or set(doc) != {"actions", "prec"}:
        raise ParseError("plan: top-level keys must be exactly 'actions' and 'prec'")
    actions: dict = {}
    per_robot: dict = {}
    for i, a in enumerate(doc["actions"]):
        if not isinstance(a, dict) or set(a) != {"id", "kind", "r", "m", "w", "w2"}:
            raise ParseError(f"actions[{i}]: keys must be id, kind, r, m, w, w2")
        if a["kind"] not in (TRANSIT, TRANSFER):
            raise ParseError(f"actions[{i}]: kind must be transit or transfer")
        for k in ("r", "m", "w", "w2"):
            if isinstance(a[k], bool) or not isinstance(a[k], int):
                raise ParseError(f"actions[{i}].{k}: expected an integer")
        act = AbstractAction(str(a["id"]), a["kind"], a["r"], a["m"], a["w"], a["w2"])
        if act.id in actions:
            raise ValidationError("duplicate action id", (act.id,))
        actions[act.id] = act
        per_robot.setdefault(act.r, []).append(act.id)
    edges = []
    for i, e in enumerate(doc["prec"]):
        if not isinstance(e, list) or len(e) != 2:
            raise ParseError(f"prec[{i}]: expected [before, after]")
        for x in e:
            if x not in actions:
                raise ValidationError("ordering refers to an unknown action", (x,))
        edges.append((e[0], e[1]))
    initial_region = dict(scene.initial.movable_regions) if scene is not None else {}
    return build_plan(actions, per_robot, edges, initial_region, scene)


def build_plan(actions, per_robot, edges, initial_region, scene=None) -> TaskPlan:
    per_robot = {r: tuple(ids) for r, ids in sorted(per_robot.items())}
    prec = OrderingSet((), actions)
    try:
        for r, ids in per_robot.items():
            for a, b in zip(ids, ids[1:]):
                prec = add_ordering(prec, a, b)
        for a, b in edges:
            prec = add_ordering(prec, a, b)
    except CycleError as e:
        raise ValidationError("orderings are cyclic", (e.before, e.after)) from e
    plan = TaskPlan(dict(actions), per_robot, prec, dict(initial_region))
    validate_plan(plan, scene)
    return plan


def validate_plan(plan: TaskPlan, scene=None) -> None:
    for r, ids in plan.per_robot.items():
        if len(ids) % 2:
            raise ValidationError("robot actions must alternate transit/transfer pairs", (r,))
        for k in range(0, len(ids), 2):
            t, f = plan.actions[ids[k]], plan.actions[ids[k + 1]]
            if t.kind != TRANSIT or f.kind != TRANSFER:
                raise ValidationError("robot actions must alternate transit then transfer", (t.id, f.id))
            if t.m != f.m or t.w2 != f.w:
                raise ValidationError("transfer must carry the movable its transit grasped from that region",
                                      (t.id, f.id))
    if scene is not None:
        for a in plan.actions.values():
            if a.r not in scene.robot:
                raise ValidationError("unknown robot", (a.id, a.r))
            if a.m not in scene.movable:
                raise ValidationError("unknown movable", (a.id, a.m))
            for w in (a.w2,) if a.is_transit else (a.w, a.w2):
                if w not in scene.region:
                    raise ValidationError("unknown region", (a.id, w))
    for m, chain in plan.movable_chain.items():
        for a, b in zip(chain, chain[1:]):
            if not plan.prec.precedes(a, b):
                raise ValidationError("actions on one movable must be totally ordered", (a, b))
        region = plan.initial_region.get(m)
        for k in range(0, len(chain), 2):
            t = plan.actions[chain[k]]
            if k + 1 >= len(chain) or not plan.actions[chain[k + 1]].kind == TRANSFER or t.kind != TRANSIT:
                raise ValidationError("movable history must alternate grasp and placement", (m,))
            if plan.initial_region and t.w2 != region:
                raise ValidationError("transit targets a region the movable is not in", (t.id, m))
            region = plan.actions[chain[k + 1]].w2


def write_plan(plan: TaskPlan, extra_edges: Iterable[tuple] = ()) -> str:
    acts = []
    for r, ids in plan.per_robot.items():
        for a in ids:
            x = plan.actions[a]
            acts.append({"id": x.id, "kind": x.kind, "r": x.r, "m": x.m, "w": x.w, "w2": x.w2})
    edges = sorted(set(plan.prec.edges) | set(extra_edges))
    return json.dumps({"actions": acts, "prec": [list(e) for e in edges]}, indent=1)


def with_orderings(plan: TaskPlan, extra: OrderingSet | Iterable[tuple]) -> TaskPlan:
    edges = extra.edges if isinstance(extra, OrderingSet) else extra
    return TaskPlan(plan.actions, plan.per_robot, plan.prec.with_edges(sorted(edges)), plan.initial_region)
