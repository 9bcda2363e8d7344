"""Shared fixtures: small synthetic panels and the full acceptance sweep."""

import numpy as np
import pytest

from hybridcast import datasets, evaluation
from hybridcast.ingest import align_regions, parse_csv


@pytest.fixture(scope="session")
def fixture_panel():
    """The bundled eight-region panel, parsed and aligned."""
    observations, missing = parse_csv(datasets.generate_panel_text())
    return align_regions(observations, missing)


@pytest.fixture(scope="session")
def smoothed_region(fixture_panel):
    """One smoothed region series, shared by read-only tests."""
    from hybridcast.preprocess import smooth_series

    return smooth_series(fixture_panel.regions["Ashford"], 7)


@pytest.fixture(scope="session")
def acceptance_sweep(fixture_panel):
    """Full-panel sweep at 20 seeds per trial; built once, used by the
    acceptance tests for aggregate behavior and the mixing-weight spread.

    Covers the three kinds those checks compare (AR, single LSTM, hybrid);
    the two-layer variant stays available through the CLI and demos.
    """
    import time

    kinds = [evaluation.ModelKind.AR, evaluation.ModelKind.LSTM, evaluation.ModelKind.HYBRID]
    t0 = time.perf_counter()
    sweep = evaluation.run_sweep(fixture_panel, kinds, seeds=list(range(20)))
    sweep.timings["wall_total"] = time.perf_counter() - t0
    return sweep


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def config_file_text(echo):
    """Render a JSON config echo back into key=value config-file syntax.

    None means "use the default", so those keys are omitted. Booleans become
    true/false and lists are comma-joined, matching what the loader parses.
    """
    lines = []
    for key, value in echo.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, list):
            value = ",".join(str(item) for item in value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def make_panel_text(regions=("North", "South"), days=240, seed=3, missing_cells=()):
    """Small inline panel for ingest and CLI tests.

    missing_cells: (region, day_index) pairs whose cases field is left blank.
    """
    import datetime as dt
    import io

    rng = np.random.default_rng(seed)
    start = dt.date(2022, 3, 7)
    blanks = set(missing_cells)
    out = io.StringIO()
    out.write("date,area,cases\n")
    levels = {name: 200.0 + 120.0 * i for i, name in enumerate(regions)}
    for day in range(days):
        date = start + dt.timedelta(days=day)
        for name in regions:
            wave = 1.0 + 0.5 * np.sin(2 * np.pi * day / 90.0)
            weekday = 1.0 + 0.12 * np.sin(2 * np.pi * date.weekday() / 7.0)
            value = rng.poisson(levels[name] * wave * weekday)
            cell = "" if (name, day) in blanks else str(value)
            out.write(f"{date.isoformat()},{name},{cell}\n")
    return out.getvalue()
