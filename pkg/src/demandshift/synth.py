"""Synthetic multi-modal demand with injected disruption scenarios.

Baselines repeat a weekly 7x24 template per mode, optionally scaled by a
linear week-over-week trend, plus Gaussian noise. Scenarios overwrite chosen
hours with ``mu + target * sigma`` taken from a signature of the clean
series, so injected deviances land near their targets.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import SpanError
from .ingest import HOUR, DemandSeries, format_hour, parse_hour, parse_timestamp
from .modes import MODE_INDEX, MODES, N_MODES
from .signature import DEFAULT_ALPHA, DEFAULT_K, build_signature

DEFAULT_START = "2019-01-07T00:00"  # a Monday

# mean hourly volume at the weekday peak
PEAK_LEVEL = {"bus": 3000.0, "tram": 2500.0, "metro": 6000.0, "bike": 400.0, "car": 20000.0}

SCENARIO_TARGETS = {
    "holiday": {"bus": -7.0, "tram": -7.0, "metro": -8.0, "bike": -5.0, "car": -5.0},
    "rain": {"bus": -0.5, "tram": -0.5, "metro": -0.5, "bike": -5.0, "car": -0.5},
    "metro_closure": {"bus": 1.0, "tram": 1.0, "metro": -6.0, "bike": 3.0, "car": 0.5},
}
KINDS = (*SCENARIO_TARGETS, "custom")


def _daily_shape(weekend):
    h = np.arange(24)
    if weekend:
        # flatter, lower, early-afternoon peak
        return 0.12 + 0.5 * np.exp(-0.5 * ((h - 14) / 3.5) ** 2)
    shape = (
        0.1
        + 0.9 * np.exp(-0.5 * ((h - 8) / 1.3) ** 2)
        + 0.8 * np.exp(-0.5 * ((h - 18) / 1.6) ** 2)
        + 0.35 * np.exp(-0.5 * ((h - 13) / 2.5) ** 2)
    )
    return shape / shape.max()


def default_templates(scale=1.0):
    """``[mode, weekday, hour]`` mean counts with commuter peaks on weekdays."""
    t = np.empty((N_MODES, 7, 24))
    for q, mode in enumerate(MODES):
        for d in range(7):
            t[q, d] = PEAK_LEVEL[mode] * scale * _daily_shape(d >= 5)
    return t


@dataclass
class BaselineSpec:
    weeks: int = 30
    seed: int = 0
    noise_fraction: float = 0.05
    weekly_trend: float = 0.0
    start: str = DEFAULT_START
    templates: np.ndarray | None = None
    noise: np.ndarray | None = None

    def __post_init__(self):
        if self.weeks < 5:
            raise ValueError("baseline needs at least 5 weeks")
        if self.templates is None:
            self.templates = default_templates()
        self.templates = np.asarray(self.templates, dtype=float)
        if self.templates.shape != (N_MODES, 7, 24) or (self.templates < 0).any():
            raise ValueError("templates must be non-negative with shape (5, 7, 24)")
        if self.noise is None:
            self.noise = self.noise_fraction * self.templates
        self.noise = np.broadcast_to(np.asarray(self.noise, dtype=float), self.templates.shape)
        start = parse_timestamp(self.start)
        if start.weekday() != 0 or start.hour != 0:
            raise ValueError("baseline start must be a Monday at 00:00")

    def to_dict(self):
        return {"weeks": self.weeks, "seed": self.seed, "noise_fraction": self.noise_fraction,
                "weekly_trend": self.weekly_trend, "start": self.start}


def generate_baseline(spec: BaselineSpec) -> DemandSeries:
    rng = np.random.default_rng(spec.seed)
    # [week, weekday, hour, mode] so the flattened order is chronological
    mean = spec.templates.transpose(1, 2, 0)[None] * (1.0 + spec.weekly_trend * np.arange(spec.weeks))[:, None, None, None]
    noise = rng.standard_normal(mean.shape) * spec.noise.transpose(1, 2, 0)[None]
    counts = np.clip(np.rint(mean + noise), 0, None).astype(np.int64).reshape(-1, N_MODES)
    return DemandSeries(parse_hour(spec.start), counts, np.zeros(len(counts), dtype=bool))


@dataclass
class Scenario:
    kind: str
    ranges: list
    targets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not self.targets:
            if self.kind == "custom":
                raise ValueError("custom scenario needs explicit targets")
            self.targets = dict(SCENARIO_TARGETS[self.kind])
        for mode, v in self.targets.items():
            if mode not in MODE_INDEX:
                raise ValueError(f"unknown mode {mode!r} in targets")
            if not np.isfinite(v):
                raise ValueError("target multiples must be finite")
        self.ranges = [(_hour(a), _hour(b)) for a, b in self.ranges]

    def hours(self):
        out = []
        for a, b in self.ranges:
            if b < a:
                raise ValueError(f"empty range {a}..{b}")
            out.extend(a + np.arange(int((b - a) / HOUR) + 1) * HOUR)
        return np.array(out, dtype="datetime64[h]")

    def to_dict(self):
        return {
            "kind": self.kind,
            "ranges": [[format_hour(a), format_hour(b)] for a, b in self.ranges],
            "targets": dict(self.targets),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["ranges"], d.get("targets") or {})


def _hour(x):
    if isinstance(x, np.datetime64):
        return np.datetime64(x, "h")
    if isinstance(x, datetime):
        return np.datetime64(x.replace(minute=0, second=0, microsecond=0), "h")
    return parse_hour(x)


@dataclass
class GroundTruth:
    hours: np.ndarray
    kinds: np.ndarray
    targets: np.ndarray  # [slot, mode] target multiple, NaN where untouched

    def hours_of(self, kind):
        return self.hours[self.kinds == kind]


def inject(series: DemandSeries, scenarios, alpha=DEFAULT_ALPHA, K=DEFAULT_K):
    """Overwrite scenario hours with sigma-calibrated counts.

    Returns ``(injected_series, ground_truth)``. Overlapping scenarios: the
    later one in the list wins.
    """
    scenarios = list(scenarios)
    out = series.copy()
    if not scenarios:
        return out, GroundTruth(np.array([], dtype="datetime64[h]"), np.array([], dtype=object),
                                np.zeros((0, N_MODES)))
    table = build_signature(series, alpha, K)
    week, weekday, hour = series.decomposition()
    mu, sigma = table.lookup(week, weekday, hour)

    kind_at = {}
    target_at = {}
    for sc in scenarios:
        for t in sc.hours():
            i = int((t - series.start) / HOUR)
            if not 0 <= i < series.n_hours:
                raise SpanError(f"scenario {sc.kind} hour {t} outside series span")
            if series.missing[i]:
                raise SpanError(f"scenario {sc.kind} targets missing hour {t}")
            row = target_at.setdefault(i, np.full(N_MODES, np.nan))
            for mode, mult in sc.targets.items():
                q = MODE_INDEX[mode]
                if np.isnan(mu[i, q]):
                    raise SpanError(f"no signature support at {t} for {mode}")
                out.counts[i, q] = max(0, int(np.rint(mu[i, q] + mult * sigma[i, q])))
                row[q] = mult
            kind_at[i] = sc.kind

    idx = np.array(sorted(kind_at), dtype=np.int64)
    truth = GroundTruth(
        series.start + idx * HOUR,
        np.array([kind_at[i] for i in idx], dtype=object),
        np.array([target_at[i] for i in idx]).reshape(-1, N_MODES),
    )
    return out, truth


def load_scenarios(path):
    """Scenario file: ``{"baseline": {...}, "scenarios": [{kind, ranges, targets}]}``.

    Returns ``(baseline_overrides, scenarios)``.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        doc = {"scenarios": doc}
    return dict(doc.get("baseline", {})), [Scenario.from_dict(d) for d in doc.get("scenarios", [])]


def write_series_csv(series: DemandSeries, path, raw=False, seed=0):
    """Write ``series`` in the ingest input format.

    ``raw=False`` emits pre-aggregated ``timestamp,mode,count`` rows (read
    with ``Schema(count_column="count")``). ``raw=True`` expands each count
    into individual ``timestamp,mode`` records with random seconds inside
    the hour; only sensible for small counts.
    """
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "mode", "count"] if not raw else ["timestamp", "mode"])
        for t, row, miss in zip(series.hours, series.counts, series.missing):
            if miss:
                continue
            base = t.astype("datetime64[s]")
            for q, mode in enumerate(MODES):
                c = int(row[q])
                if not raw:
                    w.writerow([format_hour(t), mode, c])
                    continue
                for s in np.sort(rng.integers(0, 3600, size=c)):
                    stamp = (base + np.timedelta64(int(s), "s")).astype(datetime)
                    w.writerow([stamp.strftime("%Y-%m-%d %H:%M:%S"), mode])


def write_ground_truth_csv(truth: GroundTruth, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "kind", *MODES])
        for t, k, row in zip(truth.hours, truth.kinds, truth.targets):
            w.writerow([format_hour(t), k, *("" if np.isnan(v) else repr(float(v)) for v in row)])
