from __future__ import annotations

import math
import time

from .errors import StepTimeout


class Deadline:
    """Cooperative wall-clock limit; ``check()`` raises StepTimeout once passed."""

    def __init__(self, at: float = math.inf, label: str = ""):
        self.at = at
        self.label = label

    @classmethod
    def after(cls, seconds: float, label: str = "") -> "Deadline":
        return cls(time.monotonic() + seconds, label)

    def sooner(self, seconds: float, label: str = "") -> "Deadline":
        """The earlier of this deadline and ``seconds`` from now."""
        at = time.monotonic() + seconds
        if at < self.at:
            return Deadline(at, label or self.label)
        return Deadline(self.at, self.label)

    def expired(self) -> bool:
        return time.monotonic() >= self.at

    def remaining(self) -> float:
        return self.at - time.monotonic()

    def check(self) -> None:
        if time.monotonic() >= self.at:
            raise StepTimeout(self.label or "deadline passed")


NEVER = Deadline()
