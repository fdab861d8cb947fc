import numpy as np
import pytest

from demandshift.ingest import DemandSeries
from demandshift.modes import N_MODES


def make_series(seed, weeks=9, start="2019-01-07T00", missing_rate=0.0, offset_hours=0, level=100):
    """Random Poisson-ish counts; ``offset_hours`` shifts the start off Monday 00:00."""
    rng = np.random.default_rng(seed)
    n = weeks * 168 - offset_hours
    counts = rng.poisson(level, size=(n, N_MODES)).astype(np.int64)
    missing = rng.random(n) < missing_rate
    counts[missing] = 0
    s = np.datetime64(start, "h") + np.timedelta64(offset_hours, "h")
    return DemandSeries(s, counts, missing)


@pytest.fixture
def series_factory():
    return make_series


# 30-week trend baseline with one scenario of each built-in kind
DEMO_SCENARIOS = {
    "baseline": {"weeks": 30, "seed": 1, "noise_fraction": 0.0, "weekly_trend": 0.02},
    "scenarios": [
        {"kind": "holiday", "ranges": [["2019-03-04T00:00", "2019-03-05T23:00"]]},
        {"kind": "rain", "ranges": [["2019-04-17T07:00", "2019-04-17T16:00"]]},
        {"kind": "metro_closure", "ranges": [["2019-05-22T14:00", "2019-05-22T17:00"]]},
    ],
}


def write_demo_inputs(root, weeks=30):
    """Synthesize demo events plus a run config under ``root``; return the config path."""
    import json

    from demandshift.cli import main

    doc = json.loads(json.dumps(DEMO_SCENARIOS))
    doc["baseline"]["weeks"] = weeks
    (root / "scenarios.json").write_text(json.dumps(doc))
    assert main(["synth", "--scenarios", str(root / "scenarios.json"), "-o", str(root / "syn")]) == 0
    cfg = {"sources": [{"path": "syn/synth_events.csv", "schema": {"count_column": "count"}}], "k_max": 10}
    (root / "config.json").write_text(json.dumps(cfg))
    return root / "config.json"


ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    """Log one acceptance criterion's outcome; printed in the run summary."""
    line = f"acceptance {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
