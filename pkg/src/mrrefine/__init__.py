"""Multi-robot task-and-motion refinement: turn a partially ordered plan of
pick/place actions into collision-free asynchronous multi-robot motion."""

from .errors import (CycleError, Disconnected, Infeasible, MrRefineError, NoSamples, ParseError,
                     StepFailure, StepTimeout, ValidationError)
from .geom import ConvexPolygon, Disc, Pose2
from .params import PipelineParams
from .pipeline import RunReport, refine, solve_synchronous
from .scene import Scenario, load_scenario, load_scenario_file
from .solution import Solution, load_solution
from .task import OrderingSet, TaskPlan, load_plan
from .validate import ValidationReport, validate_solution

__version__ = "0.1.0"

__all__ = [
    "ConvexPolygon", "CycleError", "Disc", "Disconnected", "Infeasible", "MrRefineError", "NoSamples",
    "OrderingSet", "ParseError", "PipelineParams", "Pose2", "RunReport", "Scenario", "Solution", "StepFailure",
    "StepTimeout", "TaskPlan", "ValidationError", "ValidationReport", "load_plan", "load_scenario",
    "load_scenario_file", "load_solution", "refine", "solve_synchronous", "validate_solution",
]
