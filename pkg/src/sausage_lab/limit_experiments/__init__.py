"""Replica experiments that compare simulated sausages with the limit theorems."""

from .clt import (
    SigmaEstimate, clt_experiment, estimate_sigma, fclt_covariance_experiment, fourth_moment_experiment,
    gap_bound_check, intersection_moment_experiment, lln_capacity_check, normality_summary,
)
from .core import Check, ExperimentConfig, ExperimentReport, ReplicaRecord, run_volume_replicas, volume_matrix
from .hitting import first_entry_times, hitting_frequency, tau_scaling_experiment
from .lil import (
    gap_violations, intersection_process_stats, lil_checkpoint_sequence, lil_paths_experiment, lil_statistics,
)
from .stats import ks_critical, ks_critical_two_sample, ks_statistic, ks_two_sample, normal_cdf, shape_moments

__all__ = [
    "Check", "ExperimentConfig", "ExperimentReport", "ReplicaRecord", "SigmaEstimate",
    "clt_experiment", "estimate_sigma", "fclt_covariance_experiment", "first_entry_times",
    "fourth_moment_experiment", "gap_bound_check", "gap_violations", "hitting_frequency",
    "intersection_moment_experiment", "intersection_process_stats", "ks_critical",
    "ks_critical_two_sample", "ks_statistic", "ks_two_sample", "lil_checkpoint_sequence",
    "lil_paths_experiment", "lil_statistics", "lln_capacity_check", "normal_cdf", "normality_summary",
    "run_volume_replicas", "shape_moments", "tau_scaling_experiment", "volume_matrix",
]
