"""A small sweep report: accuracy table, coefficient contrast and figures.

Sweeps two regions of the bundled panel, prints the MAPE summary table, then
digs into one window: the fitted AR coefficients of the pure model next to
the combined model's AR component, and SVG figures for the forecasts and the
per-branch decomposition. Figures land in demos/output/.

Run from the repository root:

    python3 demos/report_figures.py
"""

from pathlib import Path

from hybridcast import (
    ModelKind,
    TrainConfig,
    TrialSpec,
    align_regions,
    coefficient_report,
    decompose,
    fit_ols,
    parse_csv,
    prepare_trial,
    run_sweep,
    run_trial,
    smooth_series,
    train_hybrid,
)
from hybridcast.plotting import save_decomposition_plot, save_trial_plot

DATA = Path(__file__).resolve().parent.parent / "data" / "synthetic_panel.csv"
OUTPUT = Path(__file__).resolve().parent / "output"


def main() -> None:
    panel = align_regions(*parse_csv(DATA.read_text()))
    kinds = [ModelKind.AR, ModelKind.LSTM, ModelKind.HYBRID]
    seeds = list(range(5))

    sweep = run_sweep(panel, kinds, seeds, regions=["Ashford", "Brookfield"])
    table = sweep.table()
    print(table.to_text())

    # one window in detail: pure AR fit against the jointly trained AR part
    region = "Ashford"
    series = smooth_series(panel.regions[region], tau=7)
    spec = TrialSpec(region, start_index=0)
    frames = prepare_trial(series, spec)
    baseline = fit_ols(frames.train)
    model, _ = train_hybrid(frames.train, TrainConfig(seed=0))
    print()
    print(coefficient_report(model, baseline).to_text())

    OUTPUT.mkdir(exist_ok=True)
    results = [run_trial(series, spec, kind, seeds) for kind in kinds]
    save_trial_plot(OUTPUT / "trial.svg", results)
    breakdown = decompose(model, frames.test)
    title = f"{region}, trial starting {frames.dates[0].isoformat()}, alpha = {model.alpha:.3f}"
    save_decomposition_plot(OUTPUT / "decomposition.svg", breakdown, frames.test.targets, title)
    print(f"wrote {OUTPUT / 'trial.svg'} and {OUTPUT / 'decomposition.svg'}")


if __name__ == "__main__":
    main()
