"""Pulled metric spaces, sewing constructions and rotationally symmetric manifolds."""

from .core_metric import (
    DomainError,
    FiniteMetric,
    ModelSpace,
    PointCloud,
    ball_volume_mc,
    check_metric,
    geodesic_distance,
    gh_exact_small,
    sample_sphere,
)
from .pulled import BASEPOINT, PulledSpace, pulled_ball_volume, pulled_distance, pulled_total_volume
from .sewing import SewnSpace, plan_sewing, scrunch_map_defect, sewn_distance, sewn_volume

__version__ = "0.1.0"
