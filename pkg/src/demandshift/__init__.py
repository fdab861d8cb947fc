"""Multi-modal travel demand anomaly detection and disruption profiling.

Pipeline: hourly demand grid -> rolling weekly signature -> standardised
deviance -> anomalous hours -> cosine agglomerative clusters -> profiles.
"""
__version__ = "0.1.0"

from .modes import MODES  # noqa: E402
from .ingest import DemandSeries, RawEvent, Schema, aggregate_hourly, decompose_slot, parse_events  # noqa: E402
from .signature import SignatureTable, build_signature, compute_element, support_weeks  # noqa: E402
from .deviance import DevianceMatrix, anomaly_fraction, compute_deviance, filter_anomalies  # noqa: E402
from .clustering import agglomerative, cosine_distance, davies_bouldin, profile_clusters, select_k  # noqa: E402
from .calibration import knee_point, sensitivity_curve  # noqa: E402
from .validation import covariate_test, one_sample_t  # noqa: E402

__all__ = [
    "MODES", "DemandSeries", "RawEvent", "Schema", "aggregate_hourly", "decompose_slot", "parse_events",
    "SignatureTable", "build_signature", "compute_element", "support_weeks",
    "DevianceMatrix", "anomaly_fraction", "compute_deviance", "filter_anomalies",
    "agglomerative", "cosine_distance", "davies_bouldin", "profile_clusters", "select_k",
    "knee_point", "sensitivity_curve", "covariate_test", "one_sample_t",
]
