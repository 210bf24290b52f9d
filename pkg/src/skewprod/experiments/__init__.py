"""Experiment drivers; each returns an :class:`ExperimentRecord`."""

from ._common import ExperimentRecord, RegimeMismatchWarning, fan_out, stream_id
from .basins import Basin, basin_classify, graph_equivariance, intermingled_scan, invariant_graph_estimate
from .drift import drift_experiment
from .intermittency import (
    ExcursionStats,
    clt_experiment,
    excursion_statistics,
    excursion_trend,
    excursion_windows,
    half_normal_cdf,
    half_normal_cdf_quad,
    occupation_fraction,
    pooled_occupation,
    pullback_vs_forward,
)
from .synchronization import decay_slope, synchronization_experiment

__all__ = [
    "Basin",
    "ExcursionStats",
    "ExperimentRecord",
    "RegimeMismatchWarning",
    "basin_classify",
    "clt_experiment",
    "decay_slope",
    "drift_experiment",
    "excursion_statistics",
    "excursion_trend",
    "excursion_windows",
    "fan_out",
    "graph_equivariance",
    "half_normal_cdf",
    "half_normal_cdf_quad",
    "intermingled_scan",
    "invariant_graph_estimate",
    "occupation_fraction",
    "pooled_occupation",
    "pullback_vs_forward",
    "stream_id",
    "synchronization_experiment",
]
