"""Exception types shared across the pipeline."""

from __future__ import annotations


class MrRefineError(Exception):
    pass


class ParseError(MrRefineError):
    """Malformed scenario, plan or solution text."""


class ValidationError(MrRefineError):
    """A well-formed input violates a model invariant."""

    def __init__(self, invariant: str, ids=(), detail: str = ""):
        self.invariant = invariant
        self.ids = tuple(ids)
        msg = invariant
        if self.ids:
            msg += " [" + ", ".join(str(i) for i in self.ids) + "]"
        if detail:
            msg += ": " + detail
        super().__init__(msg)


class CycleError(MrRefineError):
    """An ordering edge would close a cycle."""

    def __init__(self, before: str, after: str):
        self.before = before
        self.after = after
        super().__init__(f"{before} < {after} closes a cycle")


class NoSamples(MrRefineError):
    """Rejection sampling found no valid placement."""


class Infeasible(MrRefineError):
    """Step 1 exhausted every placement combination."""


class StepTimeout(MrRefineError):
    """A step or the overall deadline ran out.

    ``actions`` optionally names the actions whose motions got in each
    other's way, so a backtrack can resample exactly those.
    """

    def __init__(self, message: str = "", actions=()):
        self.actions = tuple(actions)
        super().__init__(message)


class Disconnected(MrRefineError):
    """Roadmap start and goal ended up in different components."""


class StepFailure(MrRefineError):
    """A step could not assign its variables; carries backtracking info."""

    def __init__(self, step: int, action_id: str, cause: str, blockers=(), detail=None):
        self.step = step
        self.action_id = action_id
        self.cause = cause
        self.blockers = tuple(blockers)
        self.detail = detail
        super().__init__(f"step {step} failed at {action_id}: {cause}")
