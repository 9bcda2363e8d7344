"""Quickstart: score every model kind on one window of the bundled panel.

The pipeline in miniature. Raw daily counts are parsed and aligned across
regions, smoothed with a 7-day trailing mean, and one 88-observation window
is split into 63 training and 25 test observations. Each model kind then
forecasts the test stretch one step ahead and is scored with MAPE; neural
kinds repeat over several seeds.

Run from the repository root:

    python3 demos/quickstart.py
"""

from pathlib import Path

import numpy as np

from hybridcast import (
    ModelKind,
    TrialSpec,
    align_regions,
    parse_csv,
    run_trial,
    smooth_series,
)

DATA = Path(__file__).resolve().parent.parent / "data" / "synthetic_panel.csv"


def main() -> None:
    observations, missing = parse_csv(DATA.read_text())
    panel = align_regions(observations, missing)
    print(f"panel: {len(panel.region_names)} regions, {len(panel.dates)} shared dates")
    if panel.dropped_dates:
        dropped = ", ".join(d.isoformat() for d in panel.dropped_dates)
        print(f"dates dropped because some region had no value: {dropped}")

    region = "Ashford"
    series = smooth_series(panel.regions[region], tau=7)
    spec = TrialSpec(region, start_index=0)
    print(f"\ntrial for {region} starting {series.dates[0].isoformat()}: "
          f"{spec.train_len} train + {spec.trial_len - spec.train_len} test observations")

    seeds = list(range(10))
    print(f"{len(seeds)} training seeds per neural kind\n")
    for kind in (ModelKind.AR, ModelKind.LSTM, ModelKind.LSTM_DOUBLE, ModelKind.HYBRID):
        result = run_trial(series, spec, kind, seeds)
        line = f"{kind.label:>13}: MAPE {result.mean_mape:.3f}% (seed sd {result.sd_mape:.3f})"
        if result.alpha is not None:
            line += f"  alpha = {result.alpha:.3f}"
        print(line)

    # the reconstruction identity behind every forecast: each predicted level
    # is the previous true level plus the predicted change
    result = run_trial(series, spec, ModelKind.AR, seeds=[0])
    rebuilt = result.prev_true + result.predicted_changes[0]
    assert np.array_equal(rebuilt, result.predictions[0])
    print("\nprediction = previous truth + predicted change, exactly:")
    for day in range(3):
        print(f"  {result.test_dates[day].isoformat()}  "
              f"{result.prev_true[day]:9.3f} + {result.predicted_changes[0][day]:+7.3f} "
              f"= {result.predictions[0][day]:9.3f}  (truth {result.truth[day]:9.3f})")


if __name__ == "__main__":
    main()
