"""Solver-free discretization error, intrinsic dimension and debiased
Sinkhorn estimators for optimal transport between point clouds."""

from .debias import (RichardsonWeights, Schedule, bagged_diagonal_richardson, diagonal_richardson,
                     eps_only_richardson, estimate_w2, make_schedule, richardson_weights)
from .dimension import (DegenerateRatio, DimensionEstimate, DimensionProfile,
                        discrete_w1_dimension_baseline, dimension_profile, estimate_dimension,
                        estimate_dimension_from_cloud)
from .discretization import (DiscretizationEstimate, OptimalWeights, estimate_discretization_error,
                             estimate_optimal_weights, nested_discretization_errors)
from .entropic import (SinkhornResult, SinkhornState, exact_ot_assignment, sinkhorn,
                       sinkhorn_divergence)
from .measure import (CostSpec, DiscreteMeasure, EstimateReport, PointCloud, SeedSpec, cost,
                      diameter_estimate, empirical_measure)
from .nearest import Acceleration, SupportIndex, build_index, zero_ctransform
from .synth import (BrenierPair, ManifoldConfig, bures_w2sq, sample_brenier_pair, sample_manifold)

__version__ = "0.1.0"

__all__ = [
    "Acceleration", "BrenierPair", "CostSpec", "DegenerateRatio", "DimensionEstimate", "DimensionProfile",
    "DiscreteMeasure", "DiscretizationEstimate", "EstimateReport", "ManifoldConfig", "OptimalWeights",
    "PointCloud", "RichardsonWeights", "Schedule", "SeedSpec", "SinkhornResult", "SinkhornState",
    "SupportIndex", "bagged_diagonal_richardson", "build_index", "bures_w2sq", "cost",
    "diagonal_richardson", "diameter_estimate", "dimension_profile", "discrete_w1_dimension_baseline",
    "empirical_measure", "eps_only_richardson", "estimate_dimension", "estimate_dimension_from_cloud",
    "estimate_discretization_error", "estimate_optimal_weights", "estimate_w2", "exact_ot_assignment",
    "make_schedule", "nested_discretization_errors", "richardson_weights", "sample_brenier_pair",
    "sample_manifold", "sinkhorn", "sinkhorn_divergence", "zero_ctransform",
]
