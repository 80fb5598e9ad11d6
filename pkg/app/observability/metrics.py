"""Prometheus metrics for solver and estimator runs."""

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, write_to_textfile

# Counters
BOUND_EVALUATIONS = Counter(
    "netent_bound_evaluations_total",
    "Lower/upper bound evaluations",
    ["method"],  # witness/nonlocality/covariance/covariance_tight/seesaw
)
LMI_SOLVES = Counter(
    "netent_lmi_solves_total",
    "Cutting-plane LMI solves",
    ["status"],  # optimal/infeasible/iteration_limit
)
LMI_CUTS = Counter(
    "netent_lmi_cuts_total",
    "Spectral cuts added by the LMI solver",
)

# Histograms
OPERATION_DURATION = Histogram(
    "netent_operation_duration_seconds",
    "Wall time of expensive operations",
    ["operation"],
    buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0],
)

# Gauges
SEESAW_UPPER_BOUND = Gauge(
    "netent_seesaw_upper_bound",
    "Best certified see-saw upper bound of the last run",
)


def dump_metrics(path: str | Path) -> None:
    """Write the registry in the Prometheus text format (textfile collector)."""
    write_to_textfile(str(path), REGISTRY)
