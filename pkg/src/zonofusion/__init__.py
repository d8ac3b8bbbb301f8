"""Distributed zonotopic fusion estimation for multi-sensor linear systems."""

from .errors import *  # noqa: F401,F403
from .zonotope import (
    Zonotope,
    WeightMatrix,
    minkowski_sum,
    linear_image,
    reduce,
    weighted_norm_sq,
    support,
    volume,
    contains_point,
    interval_hull,
)
from .geometry import (
    HalfspaceRep,
    Strip,
    VertexSet,
    halfspace_rep,
    strips_of,
    vertex_enum,
    intersection_vertices,
    tight_strips,
    intersect_zonotope_strip,
    symmetric_polygon_to_zonotope,
)
from .local import PlantModel, SensorModel, LocalEstimate, LocalEstimator, predict, optimal_gain, observe, step
from .fusion import (
    METHODS,
    FusionProblem,
    FusionResult,
    fuse,
    fuse_batch,
    fuse_batch_optimal,
    optimal_batch_weights,
    fuse_improved,
    fuse_sequential_stage,
    fuse_sequential,
    fuse_volume_optimal,
    box_baseline,
)
from .stability import StabilityReport, compute_mu, estimate_gamma, check_ultimate_boundedness, steady_state_gain
from .sim import ScenarioConfig, run_scenario, tracking_preset, bench_fusion, sample_noise, NoiseStream

__version__ = "0.1.0"
