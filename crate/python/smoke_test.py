#!/usr/bin/env python3
"""Smoke test of the iaqsim_py extension module.

Build the extension first:

    cargo build -p iaqsim-py            # or --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        REPO / "target" / profile / f"libiaqsim_py{suffix}"
        for profile in ("release", "debug")
        for suffix in (".so", ".dylib")
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        sys.exit("libiaqsim_py not found; run `cargo build -p iaqsim-py` first")
    staging = Path(tempfile.mkdtemp(prefix="iaqsim_py_"))
    shutil.copy2(built, staging / "iaqsim_py.so")
    sys.path.insert(0, str(staging))
    import iaqsim_py

    return iaqsim_py


def main():
    m = import_extension()

    # configuration
    config = m.Config.load(str(REPO / "fixtures" / "configs" / "baseline.json"))
    assert config.n_events == 5 and config.n_places == 14 and config.n_people == 60
    assert len(config.departments) == 7
    print(f"loaded {config!r}, digest {config.digest()[:12]}…")

    # one deterministic day
    first = m.run_day(config, 42)
    second = m.run_day(config, 42)
    assert first.digest() == second.digest(), "same seed must be bit-identical"
    assert len(first.infected) == 3
    metrics = json.loads(first.metrics_json())
    building = metrics["building"]["volume_weighted_max_co2"]
    assert 500.0 < building < 2000.0, building
    print(f"run_day(seed=42): building max CO2 {building:.1f} ppm, "
          f"infected {first.infected}")

    # aerosol operations against the frozen worked values
    co2 = m.advance_co2(415.0, 1.0, m.co2_emission(48), 1.5, 891.0)
    assert abs(co2 - 767.1) < 0.1, co2
    quanta = m.advance_quanta(0.0, 1.0, m.quanta_emission(1, 0.0), m.total_loss_rate(1.5, 0.0), 891.0)
    assert abs(quanta - 7.229e-3) < 1e-6, quanta
    inhaled = m.inhaled_quanta(quanta, 1.0, 0.0)
    assert abs(inhaled - 3.759e-3) < 1e-6, inhaled
    assert m.infection_probability(0.0) == 0.0
    assert abs(m.priority(1, 2, 8, 0.5) - 0.75) < 1e-12
    print(f"aerosol ops: co2 {co2:.1f} ppm, quanta {quanta:.3e}, inhaled {inhaled:.3e}")

    # a small batch and a null comparison
    a = m.run_batch(config, "baseline-a", 30, 1234)
    b = m.run_batch(config, "baseline-b", 30, 5678)
    assert a.s_run == 30
    samples = a.distribution("building", "building", "volume_weighted_max_co2")
    assert len(samples) == 30
    report = json.loads(m.compare(a, b))
    verdicts = [row for row in report["rows"] if row["verdict"] is True]
    assert not verdicts, f"null comparison flagged {len(verdicts)} rows"
    print(f"batch + compare: {len(report['rows'])} rows, zero significant verdicts")

    # statistics agree with an obvious case
    t, df, p = m.welch_t([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    assert t == 0.0 and p == 1.0 and df > 0
    assert m.cohens_d([1.0, 2.0], [1.0, 2.0]) == 0.0

    # scripted validation trace
    trace = m.validation_trace()
    assert trace[0][1] == 415.0
    peak = max(point[1] for point in trace)
    assert peak > 600.0 and not math.isnan(peak)
    print(f"validation trace: {len(trace)} samples, peak {peak:.1f} ppm")

    print("smoke test passed")


if __name__ == "__main__":
    main()
