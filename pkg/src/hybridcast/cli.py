"""Command-line front end: ingest, trial, sweep and interpret commands.

Configuration precedence is flags > config file > defaults. Every JSON output
embeds the fully resolved configuration (including the expanded seed list),
so re-running a command with its emitted config reproduces the numbers
byte for byte. Exit codes: 0 success, 1 computation error, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import sys
from pathlib import Path

from . import ingest as ingest_mod
from . import nn
from .ar import fit_ols
from .errors import ComputationError, DataFormatError, DateLookupError, InputDataError
from .evaluation import (
    ModelKind,
    TrialSpec,
    parse_kinds,
    prepare_trial,
    run_sweep,
    run_trial,
    traces_csv_text,
)
from .hybrid import coefficient_report, decompose, train_hybrid
from .preprocess import smooth_series

DEFAULTS = {
    "input": None,
    "regions": None,
    "models": "ar,lstm,lstm2,hybrid",
    "tau": 7,
    "lag": 7,
    "trial_len": 88,
    "train_len": 63,
    "step": 7,
    "seeds": 100,
    "epochs": 100,
    "lr": 0.001,
    "warm_start_ar": False,
    "strict_stationarity": False,
    "plots": False,
    "out": ".",
    "region": None,
    "start": None,
}

INT_KEYS = {"tau", "lag", "trial_len", "train_len", "step", "seeds", "epochs"}
FLOAT_KEYS = {"lr"}
BOOL_KEYS = {"warm_start_ar", "strict_stationarity", "plots"}
STR_KEYS = {"input", "regions", "models", "out", "region", "start"}
# accepted in config files for round-tripping emitted configs, but ignored:
# the seed list is always regenerated from the seed count.
INFORMATIONAL_KEYS = {"seed_values"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridcast",
        description="Daily-case forecasting with AR, LSTM and combined models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_window: bool) -> None:
        p.add_argument("--input", help="long-format CSV of date,area,cases")
        p.add_argument("--config", help="key=value config file (flags win)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--tau", type=int, help="trailing-mean window (default 7)")
        if with_window:
            p.add_argument("--regions", help="comma-separated region filter")
            p.add_argument("--models", help="comma-separated kinds: ar,lstm,lstm2,hybrid")
            p.add_argument("--lag", type=int, help="autoregressive order (default 7)")
            p.add_argument("--trial-len", type=int, dest="trial_len", help="observations per trial (default 88)")
            p.add_argument("--train-len", type=int, dest="train_len", help="training observations per trial (default 63)")
            p.add_argument("--step", type=int, help="days between trial starts (default 7)")
            p.add_argument("--seeds", type=int, help="number of training seeds (default 100)")
            p.add_argument("--epochs", type=int, help="training epochs (default 100)")
            p.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
            p.add_argument("--warm-start-ar", dest="warm_start_ar", action=argparse.BooleanOptionalAction, help="start the combined model's AR layer from the OLS fit")
            p.add_argument("--strict-stationarity", dest="strict_stationarity", action=argparse.BooleanOptionalAction, help="fail trials whose differenced training window is not stationary")
            p.add_argument("--plots", action=argparse.BooleanOptionalAction, help="write SVG figures")

    p_ingest = sub.add_parser("ingest", help="parse, align and re-emit the panel")
    add_common(p_ingest, with_window=False)

    p_trial = sub.add_parser("trial", help="run one trial window for one region")
    add_common(p_trial, with_window=True)
    p_trial.add_argument("--region", help="region name (required)")
    p_trial.add_argument("--start", help="trial start date YYYY-MM-DD (default: first usable)")

    p_sweep = sub.add_parser("sweep", help="run every trial of every region")
    add_common(p_sweep, with_window=True)

    p_interpret = sub.add_parser("interpret", help="coefficient table and branch decomposition for one trial")
    add_common(p_interpret, with_window=True)
    p_interpret.add_argument("--region", help="region name (required)")
    p_interpret.add_argument("--start", help="trial start date YYYY-MM-DD (default: first usable)")

    return parser


# ---------------------------------------------------------------------------
# configuration plumbing


def _convert(key: str, raw: str):
    value = raw.strip()
    if key in INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise DataFormatError(f"config key {key!r}: expected integer, got {value!r}")
    if key in FLOAT_KEYS:
        try:
            return float(value)
        except ValueError:
            raise DataFormatError(f"config key {key!r}: expected number, got {value!r}")
    if key in BOOL_KEYS:
        lowered = value.lower()
        if lowered in ("true", "1"):
            return True
        if lowered in ("false", "0"):
            return False
        raise DataFormatError(f"config key {key!r}: expected true/false, got {value!r}")
    return value


def load_config_file(path: str) -> dict:
    """Parse a flat key=value file; keys mirror flag names."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read config file {path}: {exc}")
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataFormatError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key in INFORMATIONAL_KEYS:
            continue
        if key not in DEFAULTS:
            raise DataFormatError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge flags over config-file values over defaults."""
    from_file = load_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = dict(DEFAULTS)
    resolved.update(from_file)
    for key in DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    if resolved["input"] is None:
        raise DataFormatError("--input is required (flag or config file)")
    return resolved


def _echo_keys(command: str) -> list[str]:
    base = ["input", "tau"]
    if command == "ingest":
        return base
    window = ["regions", "models", "lag", "trial_len", "train_len", "step",
              "seeds", "epochs", "lr", "warm_start_ar", "strict_stationarity", "plots"]
    if command in ("trial", "interpret"):
        return base + window + ["region", "start"]
    return base + window


def resolved_echo(command: str, cfg: dict) -> dict:
    """The configuration block embedded in every JSON output.

    Deliberately excludes --out and --config (output locations, not inputs)
    and adds the expanded seed list so re-runs can verify the exact seed set.
    """
    echo = {key: cfg[key] for key in _echo_keys(command)}
    if "seeds" in echo:
        echo["seed_values"] = list(range(cfg["seeds"]))
    return echo


# ---------------------------------------------------------------------------
# shared loading steps


def _load_panel(cfg: dict) -> ingest_mod.AlignedPanel:
    path = Path(cfg["input"])
    text = path.read_text()
    observations, missing = ingest_mod.parse_csv(text)
    if not observations and not missing:
        raise DataFormatError(f"{path}: no data rows")
    return ingest_mod.align_regions(observations, missing)


def _region_series(panel: ingest_mod.AlignedPanel, cfg: dict):
    region = cfg.get("region")
    if not region:
        raise DataFormatError("--region is required")
    if region not in panel.regions:
        known = ", ".join(panel.region_names)
        raise DataFormatError(f"unknown region {region!r}; panel has: {known}")
    return smooth_series(panel.regions[region], cfg["tau"])


def _trial_spec(smoothed, cfg: dict) -> TrialSpec:
    n = len(smoothed)
    trial_len = cfg["trial_len"]
    if n < trial_len:
        raise DateLookupError(
            f"smoothed series has {n} observations, shorter than one {trial_len}-day trial"
        )
    if cfg.get("start") is None:
        index = 0
    else:
        try:
            start_date = dt.date.fromisoformat(cfg["start"])
        except ValueError:
            raise DataFormatError(f"--start: expected YYYY-MM-DD, got {cfg['start']!r}")
        lookup = {date: i for i, date in enumerate(smoothed.dates)}
        index = lookup.get(start_date)
        first, last = smoothed.dates[0], smoothed.dates[n - trial_len]
        if index is None or index + trial_len > n:
            raise DateLookupError(
                f"start {cfg['start']} not usable for region {smoothed.region!r}; "
                f"valid trial starts run {first.isoformat()}..{last.isoformat()}"
            )
    return TrialSpec(
        region=smoothed.region,
        start_index=index,
        trial_len=trial_len,
        train_len=cfg["train_len"],
        lag=cfg["lag"],
        step=cfg["step"],
    )


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _regions_filter(cfg: dict) -> list[str] | None:
    if cfg["regions"] is None:
        return None
    names = [token.strip() for token in str(cfg["regions"]).split(",") if token.strip()]
    if not names:
        raise DataFormatError("--regions given but names are empty")
    return names


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: dict) -> int:
    panel = _load_panel(cfg)
    out = _out_dir(cfg)

    rows = []
    for i, date in enumerate(panel.dates):
        for name in panel.region_names:
            rows.append(ingest_mod.RawObservation(date, name, float(panel.regions[name].values[i])))
    (out / "panel.csv").write_text(ingest_mod.to_csv(rows))

    payload = {
        "config": resolved_echo("ingest", cfg),
        "regions": {name: len(panel.regions[name]) for name in panel.region_names},
        "n_dates": len(panel.dates),
        "date_range": [panel.dates[0].isoformat(), panel.dates[-1].isoformat()],
        "dropped_dates": [d.isoformat() for d in panel.dropped_dates],
    }
    _write_json(out / "ingest.json", payload)

    for name in panel.region_names:
        print(f"{name}: {len(panel.regions[name])} observations")
    if panel.dropped_dates:
        dropped = ", ".join(d.isoformat() for d in panel.dropped_dates)
        print(f"dropped dates: {dropped}")
    else:
        print("dropped dates: none")
    print(f"wrote {out / 'panel.csv'} and {out / 'ingest.json'}")
    return 0


def cmd_trial(cfg: dict) -> int:
    panel = _load_panel(cfg)
    smoothed = _region_series(panel, cfg)
    spec = _trial_spec(smoothed, cfg)
    kinds = parse_kinds(cfg["models"])
    seeds = list(range(cfg["seeds"]))
    adam = nn.AdamConfig(learning_rate=cfg["lr"])
    out = _out_dir(cfg)

    results = []
    for kind in kinds:
        result = run_trial(
            smoothed,
            spec,
            kind,
            seeds,
            epochs=cfg["epochs"],
            adam=adam,
            warm_start_ar=cfg["warm_start_ar"],
            strict_stationarity=cfg["strict_stationarity"],
        )
        results.append(result)
        line = f"{kind.label}: MAPE {result.mean_mape:.3f}% (sd {result.sd_mape:.3f})"
        if result.alpha is not None:
            line += f", alpha = {result.alpha:.3f}"
        print(line)

    payload = {
        "config": resolved_echo("trial", cfg),
        "results": [r.to_dict() for r in results],
    }
    _write_json(out / "trial.json", payload)
    if cfg["plots"]:
        from . import plotting

        plotting.save_trial_plot(out / "trial.svg", results)
        print(f"wrote {out / 'trial.svg'}")
    print(f"wrote {out / 'trial.json'}")
    return 0


def cmd_sweep(cfg: dict) -> int:
    panel = _load_panel(cfg)
    kinds = parse_kinds(cfg["models"])
    seeds = list(range(cfg["seeds"]))
    adam = nn.AdamConfig(learning_rate=cfg["lr"])
    out = _out_dir(cfg)

    sweep = run_sweep(
        panel,
        kinds,
        seeds,
        tau=cfg["tau"],
        trial_len=cfg["trial_len"],
        train_len=cfg["train_len"],
        lag=cfg["lag"],
        step=cfg["step"],
        epochs=cfg["epochs"],
        adam=adam,
        warm_start_ar=cfg["warm_start_ar"],
        strict_stationarity=cfg["strict_stationarity"],
        regions=_regions_filter(cfg),
        progress=lambda message: print(message, file=sys.stderr, flush=True),
    )
    table = sweep.table()

    payload = {
        "config": resolved_echo("sweep", cfg),
        "results": [r.to_dict() for r in sweep.results],
        "failures": [
            {
                "region": f.region,
                "start_index": f.start_index,
                "model_kind": f.kind,
                "error": f.error,
            }
            for f in sweep.failures
        ],
        "advisories": [
            {
                "region": a.region,
                "start_index": a.start_index,
                "statistic": a.statistic,
            }
            for a in sweep.advisories
        ],
    }
    _write_json(out / "sweep.json", payload)
    (out / "table.csv").write_text(table.to_csv_text())
    (out / "traces.csv").write_text(traces_csv_text(sweep.results))
    (out / "summary.txt").write_text(table.to_text())
    _write_json(out / "advisory.json", {"advisories": payload["advisories"]})

    print(table.summary_line())
    print(f"trials: {len(sweep.results)} results, {len(sweep.failures)} failures, "
          f"{len(sweep.advisories)} stationarity advisories")
    print(f"wrote {out / 'sweep.json'}, {out / 'table.csv'}, {out / 'traces.csv'}, "
          f"{out / 'summary.txt'}, {out / 'advisory.json'}")
    return 0


def cmd_interpret(cfg: dict) -> int:
    panel = _load_panel(cfg)
    smoothed = _region_series(panel, cfg)
    spec = _trial_spec(smoothed, cfg)
    seeds = list(range(cfg["seeds"]))
    out = _out_dir(cfg)

    frames = prepare_trial(smoothed, spec)
    baseline = fit_ols(frames.train)
    config = nn.TrainConfig(epochs=cfg["epochs"], seed=seeds[0])
    adam = nn.AdamConfig(learning_rate=cfg["lr"])
    model, history = train_hybrid(
        frames.train,
        config,
        adam,
        warm_start=baseline if cfg["warm_start_ar"] else None,
    )
    report = coefficient_report(model, baseline)
    breakdown = decompose(model, frames.test)

    print(report.to_text())

    payload = {
        "config": resolved_echo("interpret", cfg),
        "spec": spec.to_dict(),
        "alpha": float(model.alpha),
        "coefficients": report.to_dict(),
        "final_loss": float(history.losses[-1]),
        "model": model.to_dict(),
    }
    _write_json(out / "interpret.json", payload)
    (out / "coefficients.csv").write_text(report.to_csv_text())

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["date", "target", "prediction", "ar_contribution", "lstm_contribution"])
    for i, date in enumerate(frames.test_dates):
        writer.writerow([
            date.isoformat(),
            repr(float(frames.test.targets[i])),
            repr(float(breakdown.prediction[i])),
            repr(float(breakdown.ar_contribution[i])),
            repr(float(breakdown.lstm_contribution[i])),
        ])
    (out / "decomposition.csv").write_text(buffer.getvalue())

    if cfg["plots"]:
        from . import plotting

        title = f"{spec.region}, trial starting {frames.dates[0].isoformat()}, alpha = {model.alpha:.3f}"
        plotting.save_decomposition_plot(out / "interpret.svg", breakdown, frames.test.targets, title)
        print(f"wrote {out / 'interpret.svg'}")
    print(f"wrote {out / 'interpret.json'}, {out / 'coefficients.csv'}, {out / 'decomposition.csv'}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "trial": cmd_trial,
    "sweep": cmd_sweep,
    "interpret": cmd_interpret,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
