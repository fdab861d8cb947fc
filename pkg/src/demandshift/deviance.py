"""Standardised deviance of observed demand from the signature, and the
anomalous-hours filter."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import SpanError
from .ingest import DemandSeries, format_hour, parse_hour
from .modes import MODES, N_MODES
from .signature import SignatureTable

# stands in for +-inf when the support is perfectly constant
CLAMP = 100.0


@dataclass
class DevianceMatrix:
    """Chronological hours x modes deviance; NaN marks missing/unsupported."""

    hours: np.ndarray
    values: np.ndarray
    alpha: float

    def __post_init__(self):
        self.hours = np.asarray(self.hours, dtype="datetime64[h]")
        self.values = np.asarray(self.values, dtype=float).reshape(-1, N_MODES)
        if len(self.hours) != len(self.values):
            raise ValueError("hours and values differ in length")
        if len(self.hours) > 1 and not (np.diff(self.hours) > np.timedelta64(0, "h")).all():
            raise ValueError("hours must be strictly increasing")

    @property
    def complete(self):
        return ~np.isnan(self.values).any(axis=1)

    def __len__(self):
        return len(self.hours)


@dataclass
class AnomalyMatrix:
    hours: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    alpha: float
    # rows that breached the band but were dropped for containing a missing cell
    n_incomplete: int = 0

    def __len__(self):
        return len(self.hours)


def standardize(observed, mu, sigma):
    """Elementwise deviance with the constant-support clamp.

    ``sigma == 0`` gives ``+-CLAMP`` when ``observed != mu`` and 0 otherwise.
    NaN in ``mu``/``sigma`` propagates.
    """
    observed = np.asarray(observed, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    diff = observed - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / sigma
    flat = sigma == 0
    z = np.where(flat, np.sign(diff) * CLAMP, z)
    return z


def compute_deviance(series: DemandSeries, table: SignatureTable) -> DevianceMatrix:
    week, weekday, hour = series.decomposition()
    if table.start is not None and np.datetime64(table.start, "h") != series.start:
        raise SpanError(f"signature built from span starting {table.start}, series starts {series.start}")
    if week[-1] >= table.n_weeks:
        raise SpanError("series extends beyond the signature table")
    in_span = np.zeros_like(table.in_span)
    in_span[week, weekday, hour] = True
    if not np.array_equal(in_span, table.in_span):
        raise SpanError("signature table and series cover different slots")

    mu, sigma = table.lookup(week, weekday, hour)
    values = standardize(series.counts, mu, sigma)
    values[series.missing] = np.nan
    return DevianceMatrix(series.hours, values, table.alpha)


def breaches(values, alpha):
    """Cells with |deviance| strictly above ``alpha`` (NaN never breaches)."""
    with np.errstate(invalid="ignore"):
        return np.abs(values) > alpha


def filter_anomalies(matrix: DevianceMatrix, alpha=None) -> AnomalyMatrix:
    """Keep the complete rows where at least one mode breaches the band."""
    alpha = matrix.alpha if alpha is None else float(alpha)
    flags = breaches(matrix.values, alpha)
    hit = flags.any(axis=1)
    complete = matrix.complete
    keep = hit & complete
    return AnomalyMatrix(
        matrix.hours[keep],
        matrix.values[keep],
        flags[keep],
        alpha,
        int((hit & ~complete).sum()),
    )


def anomaly_fraction(matrix: DevianceMatrix, alpha=None) -> float:
    """Anomalous rows over complete (no missing cell) rows."""
    alpha = matrix.alpha if alpha is None else float(alpha)
    complete = matrix.complete
    n = int(complete.sum())
    if n == 0:
        raise ValueError("deviance matrix has no complete rows")
    hit = breaches(matrix.values[complete], alpha).any(axis=1)
    return int(hit.sum()) / n


def _cell(x):
    return "" if math.isnan(x) else repr(float(x))


def write_deviance_csv(matrix: DevianceMatrix, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *MODES])
        for t, row in zip(matrix.hours, matrix.values):
            w.writerow([format_hour(t), *(_cell(v) for v in row)])


def read_deviance_csv(path, alpha) -> DevianceMatrix:
    hours, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[: 1 + N_MODES] != ["timestamp", *MODES]:
            raise SpanError(f"unexpected deviance header {header}")
        for row in reader:
            hours.append(parse_hour(row[0]))
            values.append([float(v) if v != "" else np.nan for v in row[1 : 1 + N_MODES]])
    return DevianceMatrix(np.array(hours, dtype="datetime64[h]"), np.array(values).reshape(-1, N_MODES), alpha)


def write_anomaly_csv(anomalies: AnomalyMatrix, path):
    """Deviance columns plus a ``flags`` bitmask in mode order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *MODES, "flags"])
        for t, row, f in zip(anomalies.hours, anomalies.values, anomalies.flags):
            w.writerow([format_hour(t), *(_cell(v) for v in row), "".join("1" if b else "0" for b in f)])


def read_anomaly_csv(path, alpha) -> AnomalyMatrix:
    hours, values, flags = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["timestamp", *MODES, "flags"]:
            raise SpanError(f"unexpected anomaly header {header}")
        for row in reader:
            hours.append(parse_hour(row[0]))
            values.append([float(v) for v in row[1 : 1 + N_MODES]])
            flags.append([c == "1" for c in row[-1]])
    return AnomalyMatrix(
        np.array(hours, dtype="datetime64[h]"),
        np.array(values, dtype=float).reshape(-1, N_MODES),
        np.array(flags, dtype=bool).reshape(-1, N_MODES),
        alpha,
    )
