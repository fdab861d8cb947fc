"""One-sample Student t-test of a covariate over cluster hours."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import ValidationError
from .ingest import parse_hour

GREATER = "one-sided-greater"
TWO_SIDED = "two-sided"
SIDEDNESS = (GREATER, TWO_SIDED)
MIN_COVERAGE = 0.5


def t_tail(t, df):
    """Upper tail ``P(T > |t|)`` through the regularised incomplete beta."""
    t = float(t)
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return 0.5 * float(betainc(df / 2.0, 0.5, x))


def t_cdf(t, df):
    tail = t_tail(t, df)
    return 1.0 - tail if t > 0 else tail


def t_pvalue(t, df, sidedness=GREATER):
    if sidedness == GREATER:
        return t_tail(t, df) if t > 0 else 1.0 - t_tail(t, df)
    if sidedness == TWO_SIDED:
        return min(1.0, 2.0 * t_tail(t, df))
    raise ValueError(f"sidedness must be one of {SIDEDNESS}")


@dataclass
class TestReport:
    t_value: float
    p_value: float
    df: int
    n: int
    mu0: float
    sidedness: str
    sample_mean: float = math.nan
    coverage: float = 1.0
    warnings: list = field(default_factory=list)

    __test__ = False  # not a pytest class

    def to_dict(self):
        return asdict(self)


def one_sample_t(sample, mu0, sidedness=GREATER) -> TestReport:
    x = np.asarray(sample, dtype=float)
    n = len(x)
    if n < 2:
        raise ValidationError(f"one-sample t-test needs n >= 2, got {n}")
    if sidedness not in SIDEDNESS:
        raise ValueError(f"sidedness must be one of {SIDEDNESS}")
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    if s == 0.0:
        raise ValidationError("sample has zero variance")
    t = (mean - mu0) / (s / math.sqrt(n))
    return TestReport(t, t_pvalue(t, n - 1, sidedness), n - 1, n, float(mu0), sidedness, mean)


@dataclass
class CovariateSeries:
    hours: np.ndarray
    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        self.hours = np.asarray(self.hours, dtype="datetime64[h]")
        self.values = np.asarray(self.values, dtype=float)
        if len(np.unique(self.hours)) != len(self.hours):
            raise ValueError("covariate has more than one value for a slot")


def read_covariate_csv(path, units=""):
    """``timestamp,value`` rows; empty values are skipped."""
    hours, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            if r["value"].strip() == "":
                continue
            hours.append(parse_hour(r["timestamp"]))
            values.append(float(r["value"]))
    return CovariateSeries(np.array(hours, dtype="datetime64[h]"), np.array(values), units)


def covariate_test(cluster_hours, covariate: CovariateSeries, sidedness=GREATER) -> TestReport:
    """Test whether the covariate is higher during ``cluster_hours`` than over
    the whole covariate series."""
    cluster_hours = np.unique(np.asarray(cluster_hours, dtype="datetime64[h]"))
    present = np.isin(covariate.hours, cluster_hours)
    sample = covariate.values[present]
    if len(sample) < 2:
        raise ValidationError(f"only {len(sample)} cluster hours have covariate values")
    coverage = len(sample) / len(cluster_hours)
    report = one_sample_t(sample, float(covariate.values.mean()), sidedness)
    report.coverage = coverage
    if coverage < MIN_COVERAGE:
        msg = f"covariate covers {coverage:.0%} of cluster hours"
        report.warnings.append(msg)
        warnings.warn(msg, stacklevel=2)
    return report
