"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 input error, 4 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .calibration import DEFAULT_ALPHA_GRID, knee_point, sensitivity_curve, write_curve_csv
from .clustering import (
    DEFAULT_K_RANGE,
    build_dendrogram,
    profile_clusters,
    read_clusters_csv,
    read_profiles_json,
    select_k,
    write_clusters_csv,
    write_db_curve_csv,
    write_profiles_json,
)
from .config import load_config, resolve_output_dir
from .deviance import (
    anomaly_fraction,
    compute_deviance,
    filter_anomalies,
    read_anomaly_csv,
    write_anomaly_csv,
    write_deviance_csv,
)
from .errors import ConfigError, IngestError, SpanError
from .ingest import Schema, ingest_sources, parse_timestamp, read_demand_csv, write_demand_csv
from .pipeline import StageFailure, clustering_range, run_pipeline, write_json_atomic
from .report import export_calendar, render_radar
from .signature import DEFAULT_ALPHA, DEFAULT_K, build_signature, read_signature_csv, write_signature_csv
from .synth import BaselineSpec, generate_baseline, inject, load_scenarios, write_ground_truth_csv, write_series_csv
from .validation import GREATER, TWO_SIDED, covariate_test, read_covariate_csv

logger = logging.getLogger("demandshift")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_STAGE = 0, 2, 3, 4


def _out(args, default="."):
    out = resolve_output_dir(args.out_dir, None, default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(text):
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(x) for x in text.split(",")]


def cmd_synth(args):
    overrides, scenarios = load_scenarios(args.scenarios) if args.scenarios else ({}, [])
    for key in ("weeks", "seed", "noise_fraction", "weekly_trend", "start"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    spec = BaselineSpec(**overrides)
    series, truth = inject(generate_baseline(spec), scenarios, args.alpha, args.K)
    out = _out(args)
    write_series_csv(series, out / "synth_events.csv", raw=args.raw, seed=spec.seed)
    write_ground_truth_csv(truth, out / "ground_truth.csv")
    write_json_atomic({"baseline": spec.to_dict(), "scenarios": [s.to_dict() for s in scenarios]},
                      out / "synth_spec.json")
    print(f"wrote {series.n_hours} hours, {len(truth.hours)} injected, to {out}")


def cmd_ingest(args):
    if args.config:
        cfg = load_config(args.config, args.set)
        sources = [(cfg.resolve(s.path), s.to_schema()) for s in cfg.sources]
        span = tuple(parse_timestamp(x) for x in cfg.span) if cfg.span else None
    else:
        if not args.inputs:
            raise ConfigError("give input files or --config")
        try:
            schema = Schema(
                timestamp_column=args.timestamp_column,
                mode_column=None if args.mode else args.mode_column,
                mode=args.mode,
                timestamp_format=args.timestamp_format,
                delimiter=args.delimiter,
                count_column=args.count_column,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        sources = [(p, schema) for p in args.inputs]
        span = tuple(parse_timestamp(x) for x in args.span) if args.span else None
    series, logs = ingest_sources(sources, span, args.threads)
    out = _out(args)
    write_demand_csv(series, out / "demand.csv")
    for i, log in enumerate(logs):
        (out / "rejects").mkdir(exist_ok=True)
        log.write(out / "rejects" / f"source_{i}.log")
    print(f"{series.n_hours} hours, {int(series.missing.sum())} missing, "
          f"{sum(len(log) for log in logs)} rejects -> {out / 'demand.csv'}")


def cmd_signature(args):
    series = read_demand_csv(args.demand)
    table = build_signature(series, args.alpha, args.K)
    out = _out(args)
    write_signature_csv(table, out / "signature.csv")
    print(f"signature for {table.n_weeks} weeks -> {out / 'signature.csv'}")


def cmd_detect(args):
    series = read_demand_csv(args.demand)
    if args.signature:
        table = read_signature_csv(args.signature, args.alpha, args.K)
    else:
        table = build_signature(series, args.alpha, args.K)
    matrix = compute_deviance(series, table)
    anomalies = filter_anomalies(matrix)
    out = _out(args)
    write_deviance_csv(matrix, out / "deviance.csv")
    write_anomaly_csv(anomalies, out / "anomalies.csv")
    print(f"{len(anomalies)} anomalous hours ({anomaly_fraction(matrix):.2%}) -> {out / 'anomalies.csv'}")


def cmd_calibrate(args):
    series = read_demand_csv(args.demand)
    curve = sensitivity_curve(series, args.grid, args.K, args.threads)
    out = _out(args)
    write_curve_csv(curve, out / "calibration_curve.csv")
    alpha = knee_point(curve)
    write_json_atomic({"alpha": alpha, "K": args.K, "grid": list(curve.alphas)}, out / "calibration.json")
    print(f"alpha* = {alpha}")


def cmd_cluster(args):
    anomalies = read_anomaly_csv(args.anomalies, args.alpha)
    n = len(anomalies)
    curve = {}
    if args.k:
        k = args.k
        labels = build_dendrogram(anomalies.values, args.threads).cut(k)
    else:
        rng = clustering_range(n, args.k_min, args.k_max)
        if rng is None:
            raise SpanError(f"{n} anomalous hours: too few to select k")
        tree = build_dendrogram(anomalies.values, args.threads)
        k, curve = select_k(anomalies.values, *rng, threads=args.threads, tree=tree)
        labels = tree.cut(k)
    result = profile_clusters(anomalies.values, labels, anomalies.hours)
    out = _out(args)
    write_db_curve_csv(curve, out / "db_curve.csv")
    write_clusters_csv(result, out / "clusters.csv")
    write_profiles_json(result, out / "profiles.json")
    export_calendar(result.labels, result.hours, out / "calendar.csv")
    print(f"k = {result.k}; shares " + ", ".join(f"{s:.1%}" for s in result.shares))


def cmd_validate(args):
    hours, labels = read_clusters_csv(args.clusters)
    covariate = read_covariate_csv(args.covariate, args.units)
    report = covariate_test(hours[labels == args.cluster_id], covariate,
                            TWO_SIDED if args.two_sided else GREATER)
    payload = {"cluster_id": args.cluster_id, **report.to_dict()}
    out = _out(args)
    write_json_atomic(payload, out / f"validation_cluster_{args.cluster_id}.json")
    print(json.dumps(payload, indent=2))


def cmd_report(args):
    profiles = read_profiles_json(args.profiles)
    out = _out(args) / "radar"
    out.mkdir(parents=True, exist_ok=True)
    for p in profiles:
        c = p["cluster_id"]
        (out / f"cluster_{c:02d}.svg").write_text(
            render_radar(p["profile"], c, p.get("size"), p.get("share")), encoding="utf-8")
    print(f"{len(profiles)} radar plots -> {out}")


def cmd_run(args):
    cfg = load_config(args.config, args.set)
    out = resolve_output_dir(args.out_dir, cfg)
    manifest = run_pipeline(cfg, out, args.threads)
    print(f"alpha = {manifest['alpha']['value']}, k = {manifest['clustering']['k']}, "
          f"{manifest['deviance']['anomalous_hours']} anomalous hours -> {out}")


def build_parser():
    p = argparse.ArgumentParser(prog="demandshift", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out-dir", help="output directory (overrides $DEMANDSHIFT_OUTPUT_DIR)")
    common.add_argument("--threads", type=int, default=1, help="worker cap; output does not depend on it")
    common.add_argument("-v", "--verbose", action="count", default=0)
    hyper = argparse.ArgumentParser(add_help=False)
    hyper.add_argument("--K", type=int, default=DEFAULT_K, help="support weeks (even)")
    hyper.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="band width in sigmas")

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common, hyper], help="generate synthetic demand with scenarios")
    s.add_argument("--scenarios", help="scenario JSON file")
    s.add_argument("--weeks", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--noise", dest="noise_fraction", type=float, help="noise std as a fraction of the mean")
    s.add_argument("--trend", dest="weekly_trend", type=float, help="linear growth per week")
    s.add_argument("--start", help="first Monday, e.g. 2019-01-07T00:00")
    s.add_argument("--raw", action="store_true", help="one row per record instead of counts")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", parents=[common], help="aggregate event files into hourly demand")
    s.add_argument("inputs", nargs="*")
    s.add_argument("--config")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--timestamp-column", default="timestamp")
    s.add_argument("--mode-column", default="mode")
    s.add_argument("--mode", help="fixed mode for every row")
    s.add_argument("--timestamp-format")
    s.add_argument("--delimiter", default=",")
    s.add_argument("--count-column")
    s.add_argument("--span", nargs=2, metavar=("FIRST", "LAST"))
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("signature", parents=[common, hyper], help="build the expected-demand signature")
    s.add_argument("--demand", required=True)
    s.set_defaults(func=cmd_signature)

    s = sub.add_parser("detect", parents=[common, hyper], help="deviance matrix and anomalous hours")
    s.add_argument("--demand", required=True)
    s.add_argument("--signature", help="reuse a signature.csv export")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("calibrate", parents=[common], help="pick alpha at the knee of the anomaly curve")
    s.add_argument("--demand", required=True)
    s.add_argument("--K", type=int, default=DEFAULT_K)
    s.add_argument("--grid", type=_grid, default=list(DEFAULT_ALPHA_GRID), help="lo:hi:step or a,b,c")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("cluster", parents=[common], help="cluster anomalous hours")
    s.add_argument("--anomalies", required=True)
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--k-min", type=int, default=DEFAULT_K_RANGE[0])
    s.add_argument("--k-max", type=int, default=DEFAULT_K_RANGE[1])
    s.add_argument("--k", type=int, help="fixed number of clusters (skips the sweep)")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("validate", parents=[common], help="t-test a covariate over one cluster's hours")
    s.add_argument("--clusters", required=True)
    s.add_argument("--covariate", required=True)
    s.add_argument("--cluster-id", type=int, required=True)
    s.add_argument("--units", default="")
    s.add_argument("--two-sided", action="store_true")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("report", parents=[common], help="radar SVGs from profiles.json")
    s.add_argument("--profiles", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", parents=[common], help="end-to-end pipeline from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.set_defaults(func=cmd_run)
    return p


def _exit_code(exc):
    if isinstance(exc, StageFailure):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (IngestError, OSError)):
        return EXIT_INPUT
    return EXIT_STAGE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        logger.error("%s", exc)
        logger.debug("traceback", exc_info=True)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
