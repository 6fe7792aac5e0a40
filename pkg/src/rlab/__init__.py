"""rlab: a numerical laboratory for the harmonic-map coupled Ricci flow,
its (a1, 0, b1, b2) generalization, the associated curvature/entropy
quantities, and the identity/comparison/uniqueness verification suites.
"""

__version__ = "0.1.0"

from .mesh import (Grid, MetricField, ScalarField, SPDError, TensorField,
                   build_grid, flat_metric, integrate, interior,
                   partial_derivative)
from .tensor import (CoupledBundle, CurvatureBundle, WYBundle, christoffel,
                     coupled, curvature, weighted_connection_apply,
                     wy_curvature)
from .flow import (BlowUpError, FlowParams, FlowState, Schedule, Trajectory,
                   cfl_dt, flow_rhs, is_regular, reduce_parameters, run, step)

__all__ = [
    "Grid", "MetricField", "ScalarField", "TensorField", "SPDError",
    "build_grid", "flat_metric", "integrate", "interior", "partial_derivative",
    "CurvatureBundle", "CoupledBundle", "WYBundle", "christoffel", "coupled",
    "curvature", "weighted_connection_apply", "wy_curvature",
    "FlowParams", "FlowState", "Schedule", "Trajectory", "BlowUpError",
    "cfl_dt", "flow_rhs", "is_regular", "reduce_parameters", "run", "step",
    "__version__",
]
