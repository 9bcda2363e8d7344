"""End-to-end checks of the command-line interface.

Every test drives main() in-process with an explicit argv so exit codes,
printed output and emitted files can all be asserted without subprocesses.
One test spawns `python3 -m hybridcast` to prove the module entry point.
"""

import json
import subprocess
import sys

import pytest

from hybridcast.cli import (
    DEFAULTS,
    build_parser,
    load_config_file,
    main,
    resolve_config,
    resolved_echo,
)
from hybridcast.errors import DataFormatError

from conftest import config_file_text, make_panel_text


@pytest.fixture(scope="module")
def panel_file(tmp_path_factory):
    """A two-region panel long enough for four default trials per region."""
    path = tmp_path_factory.mktemp("data") / "panel.csv"
    path.write_text(make_panel_text(days=120, seed=9))
    return path


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConfigResolution:
    def parse(self, argv):
        return build_parser().parse_args(argv)

    def test_defaults_fill_unset_keys(self):
        cfg = resolve_config(self.parse(["trial", "--input", "x.csv", "--region", "R"]))
        assert cfg["epochs"] == DEFAULTS["epochs"]
        assert cfg["lr"] == DEFAULTS["lr"]
        assert cfg["models"] == "ar,lstm,lstm2,hybrid"
        assert cfg["seeds"] == 100

    def test_flag_beats_config_file(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("epochs=5\nlr=0.5\n")
        args = self.parse(["trial", "--input", "x.csv", "--region", "R",
                           "--config", str(config), "--epochs", "9"])
        cfg = resolve_config(args)
        assert cfg["epochs"] == 9
        assert cfg["lr"] == 0.5

    def test_dashed_keys_match_flag_names(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("trial-len = 90\nwarm-start-ar = true\n")
        values = load_config_file(str(config))
        assert values == {"trial_len": 90, "warm_start_ar": True}

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("# a comment\n\nseeds=4\n")
        assert load_config_file(str(config)) == {"seeds": 4}

    def test_unknown_key_names_file_and_line(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("seeds=4\nbatchsize=2\n")
        with pytest.raises(DataFormatError, match=r"run\.cfg:2.*batchsize"):
            load_config_file(str(config))

    def test_non_integer_value_rejected(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("epochs=many\n")
        with pytest.raises(DataFormatError, match="expected integer"):
            load_config_file(str(config))

    def test_seed_values_line_is_informational(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("seeds=2\nseed_values=7,8,9\n")
        assert load_config_file(str(config)) == {"seeds": 2}

    def test_missing_input_rejected(self):
        with pytest.raises(DataFormatError, match="--input is required"):
            resolve_config(self.parse(["sweep"]))

    def test_echo_expands_seed_list_and_hides_out(self):
        cfg = dict(DEFAULTS, input="x.csv", seeds=3, region="R")
        echo = resolved_echo("trial", cfg)
        assert echo["seed_values"] == [0, 1, 2]
        assert "out" not in echo
        assert "config" not in echo
        assert echo["region"] == "R"

    def test_ingest_echo_has_no_window_keys(self):
        cfg = dict(DEFAULTS, input="x.csv")
        echo = resolved_echo("ingest", cfg)
        assert sorted(echo) == ["input", "tau"]


class TestIngestCommand:
    def test_writes_panel_and_report(self, tmp_path, capsys):
        source = tmp_path / "raw.csv"
        source.write_text(make_panel_text(days=40, seed=5, missing_cells=[("South", 11)]))
        out = tmp_path / "ingested"
        code, stdout, _ = run_cli(["ingest", "--input", str(source), "--out", str(out)], capsys)
        assert code == 0
        assert "North: 39 observations" in stdout
        assert "South: 39 observations" in stdout
        assert "dropped dates: 2022-03-18" in stdout

        payload = json.loads((out / "ingest.json").read_text())
        assert payload["regions"] == {"North": 39, "South": 39}
        assert payload["dropped_dates"] == ["2022-03-18"]
        assert payload["config"]["input"] == str(source)
        assert payload["config"]["tau"] == 7

    def test_ingested_panel_reingests_cleanly(self, tmp_path, capsys):
        source = tmp_path / "raw.csv"
        source.write_text(make_panel_text(days=40, seed=5, missing_cells=[("South", 11)]))
        first = tmp_path / "first"
        run_cli(["ingest", "--input", str(source), "--out", str(first)], capsys)
        second = tmp_path / "second"
        code, stdout, _ = run_cli(
            ["ingest", "--input", str(first / "panel.csv"), "--out", str(second)], capsys)
        assert code == 0
        assert "dropped dates: none" in stdout
        assert (second / "panel.csv").read_text() == (first / "panel.csv").read_text()

    def test_header_only_input_exits_2(self, tmp_path, capsys):
        source = tmp_path / "empty.csv"
        source.write_text("date,area,cases\n")
        code, _, stderr = run_cli(["ingest", "--input", str(source), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "no data rows" in stderr

    def test_unreadable_input_exits_2(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["ingest", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "error:" in stderr


class TestTrialCommand:
    def test_reports_each_model_and_writes_json(self, panel_file, tmp_path, capsys):
        out = tmp_path / "trial"
        code, stdout, _ = run_cli(
            ["trial", "--input", str(panel_file), "--region", "North", "--out", str(out),
             "--models", "ar,hybrid", "--seeds", "2", "--epochs", "3"], capsys)
        assert code == 0
        assert "AR: MAPE" in stdout
        assert "Hybrid: MAPE" in stdout
        assert "alpha = 0." in stdout

        payload = json.loads((out / "trial.json").read_text())
        kinds = [r["model_kind"] for r in payload["results"]]
        assert kinds == ["ar", "hybrid"]
        assert payload["config"]["seed_values"] == [0, 1]
        assert payload["config"]["region"] == "North"

    def test_start_date_selects_window(self, panel_file, tmp_path, capsys):
        out = tmp_path / "trial"
        code, _, _ = run_cli(
            ["trial", "--input", str(panel_file), "--region", "North", "--out", str(out),
             "--models", "ar", "--seeds", "1", "--start", "2022-03-20"], capsys)
        assert code == 0
        payload = json.loads((out / "trial.json").read_text())
        assert payload["results"][0]["spec"]["start_index"] == 7

    def test_missing_region_flag_exits_2(self, panel_file, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["trial", "--input", str(panel_file), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "--region is required" in stderr

    def test_unknown_region_lists_panel_regions(self, panel_file, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["trial", "--input", str(panel_file), "--region", "West", "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "unknown region 'West'" in stderr
        assert "North, South" in stderr

    def test_out_of_range_start_names_valid_span(self, panel_file, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["trial", "--input", str(panel_file), "--region", "North", "--out", str(tmp_path),
             "--start", "2022-06-30"], capsys)
        assert code == 2
        assert "valid trial starts run 2022-03-13..2022-04-08" in stderr

    def test_malformed_start_exits_2(self, panel_file, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["trial", "--input", str(panel_file), "--region", "North", "--out", str(tmp_path),
             "--start", "soon"], capsys)
        assert code == 2
        assert "expected YYYY-MM-DD" in stderr

    def test_constant_region_exits_1(self, tmp_path, capsys):
        import datetime as dt
        import io

        text = io.StringIO()
        text.write("date,area,cases\n")
        start = dt.date(2022, 1, 3)
        for day in range(95):
            date = start + dt.timedelta(days=day)
            text.write(f"{date.isoformat()},Flatland,500\n")
        source = tmp_path / "flat.csv"
        source.write_text(text.getvalue())
        code, _, stderr = run_cli(
            ["trial", "--input", str(source), "--region", "Flatland", "--out", str(tmp_path),
             "--models", "ar", "--seeds", "1"], capsys)
        assert code == 1
        assert "error:" in stderr

    def test_emitted_config_reruns_byte_identical(self, panel_file, tmp_path, capsys):
        first = tmp_path / "first"
        argv = ["trial", "--input", str(panel_file), "--region", "North", "--out", str(first),
                "--models", "ar,hybrid", "--seeds", "2", "--epochs", "3", "--plots"]
        assert run_cli(argv, capsys)[0] == 0

        echo = json.loads((first / "trial.json").read_text())["config"]
        config = tmp_path / "replay.cfg"
        config.write_text(config_file_text(echo))
        second = tmp_path / "second"
        code, _, _ = run_cli(["trial", "--config", str(config), "--out", str(second)], capsys)
        assert code == 0
        assert (second / "trial.json").read_bytes() == (first / "trial.json").read_bytes()
        assert (second / "trial.svg").read_bytes() == (first / "trial.svg").read_bytes()


class TestSweepCommand:
    def test_outputs_and_trial_count(self, panel_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        code, stdout, _ = run_cli(
            ["sweep", "--input", str(panel_file), "--out", str(out),
             "--models", "ar", "--seeds", "1"], capsys)
        assert code == 0
        # 120 days smooth to 114 points: 4 starts per region at step 7
        assert "trials: 8 results, 0 failures" in stdout
        assert "Grand mean MAPE: AR" in stdout

        payload = json.loads((out / "sweep.json").read_text())
        assert len(payload["results"]) == 8
        assert payload["failures"] == []

        table = (out / "table.csv").read_text().splitlines()
        assert table[0] == "region,AR mean,AR sd,AR trials"
        assert table[-1].startswith("All regions,")

        traces = (out / "traces.csv").read_text().splitlines()
        assert traces[0] == "region,trial_start_date,day,truth,mean_ar,sd_ar"
        assert len(traces) == 1 + 8 * 18

        summary = (out / "summary.txt").read_text()
        assert summary.rstrip().endswith(stdout.splitlines()[0])
        advisory = json.loads((out / "advisory.json").read_text())
        assert "advisories" in advisory

    def test_step_flag_changes_trial_count(self, panel_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        code, stdout, _ = run_cli(
            ["sweep", "--input", str(panel_file), "--out", str(out),
             "--models", "ar", "--seeds", "1", "--step", "26"], capsys)
        assert code == 0
        assert "trials: 4 results" in stdout

    def test_regions_filter_restricts_sweep(self, panel_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        code, _, _ = run_cli(
            ["sweep", "--input", str(panel_file), "--out", str(out),
             "--models", "ar", "--seeds", "1", "--regions", "South"], capsys)
        assert code == 0
        payload = json.loads((out / "sweep.json").read_text())
        assert {r["spec"]["region"] for r in payload["results"]} == {"South"}

    def test_unknown_model_token_exits_2(self, panel_file, tmp_path, capsys):
        code, _, stderr = run_cli(
            ["sweep", "--input", str(panel_file), "--out", str(tmp_path),
             "--models", "ar,transformer"], capsys)
        assert code == 2
        assert "transformer" in stderr


@pytest.fixture(scope="module")
def interpret_out(panel_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("interpret")
    code = main(["interpret", "--input", str(panel_file), "--region", "North",
                 "--out", str(out), "--seeds", "2", "--epochs", "3", "--plots"])
    assert code == 0
    return out


class TestInterpretCommand:
    def test_coefficient_table_layout(self, interpret_out):
        lines = (interpret_out / "coefficients.csv").read_text().splitlines()
        assert lines[0] == "model,intercept,Y_t-1,Y_t-2,Y_t-3,Y_t-4,Y_t-5,Y_t-6,Y_t-7,alpha"
        assert len(lines) == 3
        assert lines[1].startswith("AR,")
        assert lines[2].startswith("Hybrid,")

    def test_decomposition_rows_sum_exactly(self, interpret_out):
        lines = (interpret_out / "decomposition.csv").read_text().splitlines()
        assert lines[0] == "date,target,prediction,ar_contribution,lstm_contribution"
        assert len(lines) == 1 + 18
        for line in lines[1:]:
            _, _, prediction, ar_part, lstm_part = line.split(",")
            assert float(prediction) == float(ar_part) + float(lstm_part)

    def test_json_payload_fields(self, interpret_out):
        payload = json.loads((interpret_out / "interpret.json").read_text())
        assert 0.0 < payload["alpha"] < 1.0
        assert payload["spec"]["region"] == "North"
        assert "final_loss" in payload
        assert payload["model"]["alpha_logit"] is not None
        assert (interpret_out / "interpret.svg").exists()


def test_module_entry_point(tmp_path):
    source = tmp_path / "raw.csv"
    source.write_text(make_panel_text(days=20, seed=2))
    proc = subprocess.run(
        [sys.executable, "-m", "hybridcast", "ingest", "--input", str(source),
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "North: 20 observations" in proc.stdout
