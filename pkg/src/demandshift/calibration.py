"""Band-width calibration from the knee of the anomaly-fraction curve."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .deviance import anomaly_fraction, compute_deviance
from .errors import NoKneeError
from .signature import DEFAULT_K, build_signature

DEFAULT_ALPHA_GRID = tuple(np.arange(1.0, 8.0 + 1e-9, 0.5).round(10).tolist())
MIN_POINTS = 4


@dataclass(frozen=True)
class SensitivityCurve:
    alphas: tuple
    fractions: tuple

    def __post_init__(self):
        if len(self.alphas) != len(self.fractions):
            raise ValueError("alphas and fractions differ in length")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ValueError("alphas must be strictly increasing")

    def __iter__(self):
        return iter(zip(self.alphas, self.fractions))

    def __len__(self):
        return len(self.alphas)


def _check_grid(alphas):
    alphas = [float(a) for a in alphas]
    if len(alphas) < MIN_POINTS:
        raise ValueError(f"alpha grid needs at least {MIN_POINTS} points")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be strictly increasing")
    return alphas


def sensitivity_curve(series, alphas=DEFAULT_ALPHA_GRID, K=DEFAULT_K, threads=1) -> SensitivityCurve:
    """Anomalous-hour fraction for each alpha on the grid.

    The signature means and deviations do not depend on alpha, so the
    deviance matrix is computed once and only the threshold varies.
    """
    alphas = _check_grid(alphas)
    matrix = compute_deviance(series, build_signature(series, alphas[0], K))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fractions = list(pool.map(lambda a: anomaly_fraction(matrix, a), alphas))
    else:
        fractions = [anomaly_fraction(matrix, a) for a in alphas]
    return SensitivityCurve(tuple(alphas), tuple(fractions))


def chord_distances(curve: SensitivityCurve):
    """Distance of each min-max normalised point to the endpoint chord."""
    x = np.asarray(curve.alphas, dtype=float)
    y = np.asarray(curve.fractions, dtype=float)
    xr = x[-1] - x[0]
    yr = y.max() - y.min()
    if yr == 0:
        return np.zeros_like(x)
    xn = (x - x[0]) / xr
    yn = (y - y.min()) / yr
    dx, dy = xn[-1] - xn[0], yn[-1] - yn[0]
    return np.abs(dy * (xn - xn[0]) - dx * (yn - yn[0])) / np.hypot(dx, dy)


def knee_point(curve: SensitivityCurve) -> float:
    """Alpha at the maximum distance to the chord (ties go to the smaller alpha)."""
    if len(curve) < MIN_POINTS:
        raise ValueError(f"curve needs at least {MIN_POINTS} points")
    fr = curve.fractions
    if any(b > a for a, b in zip(fr, fr[1:])):
        raise ValueError("curve must be non-increasing")
    dist = chord_distances(curve)
    best = int(np.argmax(dist))
    if dist[best] < 1e-12:
        raise NoKneeError("curve has no knee: all points lie on the chord")
    return curve.alphas[best]


def write_curve_csv(curve: SensitivityCurve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "anomaly_fraction"])
        for a, f in curve:
            w.writerow([repr(float(a)), repr(float(f))])
