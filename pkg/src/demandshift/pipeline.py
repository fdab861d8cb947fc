"""End-to-end run: ingest -> signature -> deviance -> clustering -> reports."""
from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import knee_point, sensitivity_curve, write_curve_csv
from .clustering import (
    build_dendrogram,
    profile_clusters,
    select_k,
    write_clusters_csv,
    write_db_curve_csv,
    write_profiles_json,
)
from .config import RunConfig
from .deviance import anomaly_fraction, compute_deviance, filter_anomalies, write_anomaly_csv, write_deviance_csv
from .errors import ConfigError, DemandShiftError
from .ingest import ingest_sources, parse_timestamp, write_demand_csv
from .report import export_calendar, render_radar
from .signature import build_signature, write_signature_csv
from .validation import covariate_test, read_covariate_csv

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageFailure(DemandShiftError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json_atomic(payload, path):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(_clean(payload), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def clustering_range(n, k_min, k_max):
    """Clamp the configured k sweep to what ``n`` rows allow, or ``None``."""
    hi = min(k_max, n - 1)
    lo = min(k_min, hi)
    if lo < 2:
        return None
    return lo, hi


class _Run:
    def __init__(self, config: RunConfig, out: Path, threads: int):
        self.config = config
        self.out = out
        self.threads = threads
        self.manifest = {
            "tool": "demandshift",
            "version": __version__,
            "config": config.to_dict(),
            "status": "running",
            "stages": [],
        }
        self.timings = {}
        self.outputs = []

    def path(self, name):
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return p

    def stage(self, name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:  # any stage error aborts the run with a partial manifest
            raise StageFailure(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t0, 6)
        self.manifest["stages"].append(name)
        logger.info("stage %s done in %.3fs", name, self.timings[name])
        return result

    def finish(self, status, **extra):
        self.manifest["status"] = status
        self.manifest.update(extra)
        self.manifest["outputs"] = sorted(set(self.outputs))
        if self.config.record_timings:
            self.manifest["timings"] = self.timings
        write_json_atomic(self.manifest, self.out / MANIFEST)


def run_pipeline(config: RunConfig, output_dir, threads=1):
    """Execute every stage and write all exports plus ``manifest.json``.

    Raises :class:`StageFailure` after writing a partial manifest.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(config, out, threads)
    try:
        _execute(run)
    except StageFailure as exc:
        run.finish("failed", failed_stage=exc.stage, error=str(exc.cause))
        raise
    run.finish("ok")
    return run.manifest


def _execute(run: _Run):
    cfg = run.config
    m = run.manifest

    def ingest():
        sources = [(cfg.resolve(s.path), s.to_schema()) for s in cfg.sources]
        span = None
        if cfg.span:
            span = tuple(parse_timestamp(x) for x in cfg.span)
        series, logs = ingest_sources(sources, span, run.threads)
        write_demand_csv(series, run.path("demand.csv"))
        for i, log in enumerate(logs):
            log.write(run.path(f"rejects/source_{i}.log"))
        m["ingest"] = {
            "first_hour": str(series.start),
            "last_hour": str(series.end),
            "hours": series.n_hours,
            "missing_hours": int(series.missing.sum()),
            "records": int(series.counts.sum()),
            "rejects": [len(log) for log in logs],
        }
        return series

    series = run.stage("ingest", ingest)

    def signature():
        return build_signature(series, 1.0, cfg.K)

    table = run.stage("signature", signature)

    if cfg.alpha == "auto":

        def calibrate():
            curve = sensitivity_curve(series, cfg.alpha_grid, cfg.K, run.threads)
            write_curve_csv(curve, run.path("calibration_curve.csv"))
            return knee_point(curve)

        alpha = float(run.stage("calibrate", calibrate))
        m["alpha"] = {"value": alpha, "source": "knee"}
    else:
        alpha = float(cfg.alpha)
        m["alpha"] = {"value": alpha, "source": "config"}
    table = table.with_alpha(alpha)

    def export_signature():
        write_signature_csv(table, run.path("signature.csv"))
        m["signature"] = {
            "K": cfg.K,
            "alpha": alpha,
            "unsupported_cells": int((~table.supported[:, table.in_span]).sum()),
            "k_effective_min": int(table.k_effective.min()),
        }

    run.stage("export_signature", export_signature)

    def detect():
        matrix = compute_deviance(series, table)
        anomalies = filter_anomalies(matrix)
        write_deviance_csv(matrix, run.path("deviance.csv"))
        write_anomaly_csv(anomalies, run.path("anomalies.csv"))
        m["deviance"] = {
            "anomalous_hours": len(anomalies),
            "anomaly_fraction": anomaly_fraction(matrix),
            "incomplete_rows_dropped": anomalies.n_incomplete,
        }
        return anomalies

    anomalies = run.stage("detect", detect)

    def cluster():
        n = len(anomalies)
        rng = clustering_range(n, cfg.k_min, cfg.k_max)
        if rng is None:
            labels, curve = np.zeros(n, dtype=np.int64), {}
            logger.warning("%d anomalous hours: too few to sweep k, using a single cluster", n)
        else:
            tree = build_dendrogram(anomalies.values, run.threads)
            k_best, curve = select_k(anomalies.values, *rng, threads=run.threads, tree=tree)
            labels = tree.cut(k_best)
        result = profile_clusters(anomalies.values, labels, anomalies.hours)
        write_db_curve_csv(curve, run.path("db_curve.csv"))
        write_clusters_csv(result, run.path("clusters.csv"))
        write_profiles_json(result, run.path("profiles.json"))
        export_calendar(result.labels, result.hours, run.path("calendar.csv"))
        m["clustering"] = {
            "n_rows": n,
            "k_range": list(rng) if rng else None,
            "k": result.k,
            "db_curve": {str(k): v for k, v in curve.items()},
            "shares": result.shares.tolist(),
        }
        return result

    result = run.stage("cluster", cluster)

    if cfg.radar:

        def report():
            for c in range(result.k):
                svg = render_radar(result.profiles[c], c, int(result.sizes[c]), float(result.shares[c]))
                run.path(f"radar/cluster_{c:02d}.svg").write_text(svg, encoding="utf-8")

        run.stage("report", report)

    if cfg.covariates:

        def validate():
            reports = []
            for cov in cfg.covariates:
                if not 0 <= cov.cluster_id < result.k:
                    raise ConfigError(f"covariate {cov.name}: no cluster {cov.cluster_id}")
                series_cov = read_covariate_csv(cfg.resolve(cov.path), cov.units)
                rep = covariate_test(result.members[cov.cluster_id], series_cov, cov.sidedness)
                reports.append({"name": cov.name, "cluster_id": cov.cluster_id, **rep.to_dict()})
            m["validation"] = reports

        run.stage("validate", validate)
