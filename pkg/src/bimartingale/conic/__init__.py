"""Conic programs over zero, nonnegative, second-order and power cones."""

from .cones import (ConeBlock, Nonnegative, Power, ProjectionError, SecondOrder,
                    Zero, cone_violation, dual_cone_violation, project_batch,
                    project_cone)
from .program import (INFEASIBLE, MAX_ITERATIONS, OPTIMAL, UNBOUNDED,
                      ConicProgram, SolveReport)
from .solver import Settings, solve

__all__ = [
    "ConeBlock", "Zero", "Nonnegative", "SecondOrder", "Power", "ProjectionError",
    "project_cone", "project_batch", "cone_violation", "dual_cone_violation",
    "ConicProgram", "SolveReport", "Settings", "solve",
    "OPTIMAL", "MAX_ITERATIONS", "INFEASIBLE", "UNBOUNDED",
]
