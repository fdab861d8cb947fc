"""Rolling expected-demand signature over neighbouring weeks.

For each (mode, week m, weekday d, hour h) the expected demand is the mean of
the same (d, h) slot in the K weeks nearest to m, excluding m itself. The band
half-width is ``alpha * sigma`` where sigma is the population standard
deviation of those support counts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import SpanError
from .ingest import DemandSeries
from .modes import MODES, MODE_INDEX, N_MODES

DEFAULT_K = 4
DEFAULT_ALPHA = 4.0
MIN_SAMPLES = 2


@dataclass(frozen=True)
class SignatureElement:
    mu: float
    sigma: float
    lam: float
    support: tuple
    n_samples: int

    @property
    def band(self):
        return self.mu - self.lam, self.mu + self.lam


def support_weeks(m, K, available):
    """The K weeks nearest to ``m`` (excluding ``m``), in ascending order.

    Distance ties go to the earlier week. Near the span edges fewer than K
    weeks may exist on one side; the nearest ones on the other side are used
    instead. May return fewer than K weeks if fewer are available.
    """
    if K < 2 or K % 2:
        raise ValueError(f"K must be an even integer >= 2, got {K}")
    available = set(available)
    if not available:
        raise ValueError("no available weeks")
    candidates = sorted((w for w in available if w != m), key=lambda w: (abs(w - m), w))
    return tuple(sorted(candidates[:K]))


def compute_element(counts, alpha, support=()):
    """Mean / population-std element from the non-missing support counts.

    Returns ``None`` (unsupported) when fewer than two counts are given.
    """
    values = [float(c) for c in counts]
    n = len(values)
    if n < MIN_SAMPLES:
        return None
    mu = 0.0
    for v in values:
        mu += v
    mu /= n
    ss = 0.0
    for v in values:
        ss += (v - mu) ** 2
    sigma = math.sqrt(ss / n)
    return SignatureElement(mu, sigma, alpha * sigma, tuple(support), n)


@dataclass
class SignatureTable:
    """Dense signature arrays indexed ``[mode, week, weekday, hour]``.

    Unsupported cells (fewer than two usable support slots) hold NaN in
    ``mu``/``sigma`` and ``False`` in ``supported``. ``in_span`` marks the
    (week, weekday, hour) cells that exist in the source series; cells
    outside it are NaN with zero samples.
    """

    mu: np.ndarray
    sigma: np.ndarray
    n_samples: np.ndarray
    supports: tuple
    in_span: np.ndarray
    alpha: float
    K: int
    start: np.datetime64 | None = None

    @property
    def lam(self):
        return self.alpha * self.sigma

    @property
    def supported(self):
        return self.n_samples >= MIN_SAMPLES

    @property
    def n_weeks(self):
        return self.mu.shape[1]

    @property
    def k_effective(self):
        return np.array([len(s) for s in self.supports])

    def element(self, mode, m, d, h):
        q = MODE_INDEX[mode] if isinstance(mode, str) else mode
        if not self.in_span[m, d, h]:
            raise SpanError(f"cell {(m, d, h)} outside span")
        if self.n_samples[q, m, d, h] < MIN_SAMPLES:
            return None
        mu = float(self.mu[q, m, d, h])
        sigma = float(self.sigma[q, m, d, h])
        return SignatureElement(mu, sigma, self.alpha * sigma, self.supports[m], int(self.n_samples[q, m, d, h]))

    def lookup(self, week, weekday, hour):
        """Per-slot ``(mu, sigma)`` arrays of shape ``(n_slots, n_modes)``."""
        mu = self.mu[:, week, weekday, hour].T
        sigma = self.sigma[:, week, weekday, hour].T
        return mu, sigma

    def with_alpha(self, alpha):
        return SignatureTable(self.mu, self.sigma, self.n_samples, self.supports,
                              self.in_span, alpha, self.K, self.start)


def demand_grid(series: DemandSeries):
    """Counts as a float ``[mode, week, weekday, hour]`` grid.

    Missing and out-of-span cells are NaN. Also returns the in-span mask.
    """
    week, weekday, hour = series.decomposition()
    n_weeks = int(week[-1]) + 1
    grid = np.full((N_MODES, n_weeks, 7, 24), np.nan)
    in_span = np.zeros((n_weeks, 7, 24), dtype=bool)
    in_span[week, weekday, hour] = True
    ok = ~series.missing
    grid[:, week[ok], weekday[ok], hour[ok]] = series.counts[ok].T
    return grid, in_span


def build_signature(series: DemandSeries, alpha=DEFAULT_ALPHA, K=DEFAULT_K) -> SignatureTable:
    grid, in_span = demand_grid(series)
    n_weeks = grid.shape[1]
    if n_weeks < 3:
        raise SpanError(f"series spans {n_weeks} ISO weeks, need at least 3")

    shape = (N_MODES, n_weeks, 7, 24)
    mu = np.full(shape, np.nan)
    sigma = np.full(shape, np.nan)
    n_samples = np.zeros(shape, dtype=np.int64)
    supports = []
    weeks = range(n_weeks)
    for m in weeks:
        sup = support_weeks(m, K, weeks)
        supports.append(sup)
        block = grid[:, list(sup)]
        valid = ~np.isnan(block)
        n = valid.sum(axis=1)
        # chronological accumulation keeps the summation order fixed
        total = np.zeros(block.shape[:1] + block.shape[2:])
        for j in range(block.shape[1]):
            total += np.where(valid[:, j], block[:, j], 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = total / n
            ss = np.zeros_like(total)
            for j in range(block.shape[1]):
                ss += np.where(valid[:, j], (block[:, j] - mean) ** 2, 0.0)
            std = np.sqrt(ss / n)
        n = np.where(in_span[m], n, 0)
        ok = n >= MIN_SAMPLES
        mu[:, m] = np.where(ok, mean, np.nan)
        sigma[:, m] = np.where(ok, std, np.nan)
        n_samples[:, m] = n
    return SignatureTable(mu, sigma, n_samples, tuple(supports), in_span, float(alpha), int(K), series.start)


def _fmt(x):
    return "" if math.isnan(x) else repr(float(x))


def write_signature_csv(table: SignatureTable, path):
    """One row per in-span (mode, week, weekday, hour); unsupported cells
    leave ``mu``, ``sigma`` and ``lambda`` empty."""
    cells = np.argwhere(table.in_span)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "week", "weekday", "hour", "mu", "sigma", "lambda", "n_samples"])
        for q, mode in enumerate(MODES):
            for m, d, h in cells:
                mu = table.mu[q, m, d, h]
                s = table.sigma[q, m, d, h]
                w.writerow([mode, m, d, h, _fmt(mu), _fmt(s), _fmt(table.alpha * s),
                            int(table.n_samples[q, m, d, h])])


def read_signature_csv(path, alpha=DEFAULT_ALPHA, K=DEFAULT_K) -> SignatureTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for r in reader:
            rows.append(r)
    if not rows:
        raise SpanError(f"{path}: empty signature table")
    n_weeks = max(int(r["week"]) for r in rows) + 1
    shape = (N_MODES, n_weeks, 7, 24)
    mu = np.full(shape, np.nan)
    sigma = np.full(shape, np.nan)
    n_samples = np.zeros(shape, dtype=np.int64)
    in_span = np.zeros(shape[1:], dtype=bool)
    for r in rows:
        q = MODE_INDEX[r["mode"]]
        m, d, h = int(r["week"]), int(r["weekday"]), int(r["hour"])
        in_span[m, d, h] = True
        n_samples[q, m, d, h] = int(r["n_samples"])
        if r["mu"] != "":
            mu[q, m, d, h] = float(r["mu"])
            sigma[q, m, d, h] = float(r["sigma"])
    supports = tuple(support_weeks(m, K, range(n_weeks)) for m in range(n_weeks))
    return SignatureTable(mu, sigma, n_samples, supports, in_span, float(alpha), int(K))
