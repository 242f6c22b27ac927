from __future__ import annotations

import dataclasses
from dataclasses import dataclass

MODES = ("full", "merge12", "merge123", "synchronous")
POLICIES = ("stop", "backtrack", "extend_samples")


@dataclass(frozen=True)
class PipelineParams:
    n_place: int = 10
    n_grasp: int = 12
    n_prm: int = 200
    k_prm: int = 10
    step: float = 0.05  # swept-check spacing, meters
    rot_weight: float = 0.5  # edge cost per radian
    step_time_limit: float = 120.0  # Steps 1-3, each
    drrt_time_limit: float = 30.0
    overall_time_limit: float = 600.0
    backtrack_policy: str = "backtrack"
    max_backtracks: int = 40
    goal_bias: float = 0.2
    seed: int = 0
    mode: str = "full"

    def __post_init__(self):
        for name in ("n_place", "n_grasp", "n_prm", "k_prm"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("step", "step_time_limit", "drrt_time_limit", "overall_time_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.backtrack_policy not in POLICIES:
            raise ValueError(f"backtrack_policy must be one of {POLICIES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must be in [0, 1]")

    def replace(self, **kw) -> "PipelineParams":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)
