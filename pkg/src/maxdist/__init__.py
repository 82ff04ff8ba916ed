"""Construct, optimise and check planar maximal-distance minimizers."""
from .energy import EnergeticWitness, EnergyResult, PointCloud, energy, find_energetic, is_feasible
from .geometry import (
    CircularArc,
    GeometryError,
    Point,
    Segment,
    angle_between_rays,
    dist_point_segment,
    sample_arc,
)
from .kernels import BACKEND
from .minlab import (
    CriterionReport,
    HorseshoeParams,
    criterion_check,
    horseshoe,
    negative_fixtures,
    positive_fixtures,
    trimmed_tree,
    validate_example_suite,
)
from .optimizer import OptimizerConfig, OptimizerTrace, local_angle_repair, optimize
from .sigma import OrderReport, SigmaGraph, has_cycle, is_connected, ordball_at, total_length
from .steiner import (
    RoseOfWinds,
    SteinerError,
    SteinerTree,
    angles4_d,
    assign_rose_weights,
    check_forest_line_inequality,
    steiner_3,
    steiner_exact,
)
from .svg import render_svg
from .validator import (
    Classification,
    RuleResult,
    ValidationReport,
    check_ahlfors,
    check_curvature_bound,
    check_structure,
    classify,
    validate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
