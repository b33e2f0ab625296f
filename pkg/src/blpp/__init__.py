"""Brownian last passage percolation, melons, prelimiting Airy sheets and landscape experiments."""

from .env import GridSpec, LineEnsemble, RngStream, sample_brownian_ensemble, sample_landscape_window
from .errors import BlppError, CapacityError, ConfigurationError, DomainError
from .landscape import (
    dyadic_geodesic,
    dyadic_landscape,
    extract_geodesic,
    holder_estimate,
    metric_compose,
    zk_profile,
)
from .lpp import (
    EndpointPair,
    LatticePath,
    Point,
    backwards_first_passage,
    last_passage,
    last_passage_path,
    multi_path_last_passage,
)
from .melon import MelonEnsemble, melon, melon_via_lpp, reverse_melon
from .montecarlo import ExperimentConfig, ExperimentReport, make_config, run_experiment
from .scaling import ScaledSheet, airy_rescale, sheet_rescale, sheet_sample

__all__ = [
    "BlppError",
    "CapacityError",
    "ConfigurationError",
    "DomainError",
    "EndpointPair",
    "ExperimentConfig",
    "ExperimentReport",
    "GridSpec",
    "LatticePath",
    "LineEnsemble",
    "MelonEnsemble",
    "Point",
    "RngStream",
    "ScaledSheet",
    "airy_rescale",
    "backwards_first_passage",
    "dyadic_geodesic",
    "dyadic_landscape",
    "extract_geodesic",
    "holder_estimate",
    "last_passage",
    "last_passage_path",
    "make_config",
    "melon",
    "melon_via_lpp",
    "metric_compose",
    "multi_path_last_passage",
    "reverse_melon",
    "run_experiment",
    "sample_brownian_ensemble",
    "sample_landscape_window",
    "sheet_rescale",
    "sheet_sample",
    "zk_profile",
]
