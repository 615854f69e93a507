import json

import pandas as pd
import pytest
from click.testing import CliRunner

from dualspin.cli import cli
from dualspin.orbit import semi_major_axis_for_period
from dualspin.presets import ORBIT_PERIOD

pytestmark = pytest.mark.integration

runner = CliRunner()

A_REFERENCE = semi_major_axis_for_period(ORBIT_PERIOD)


def write_config(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def quiet_scenario(**changes):
    payload = {
        "name": "quiet",
        "plant": "paper-longitudinal",
        "loops": ["paper-longitudinal"],
        "orbit": {"a": A_REFERENCE, "e": 0.0, "i_deg": 0.0},
        "duration": 5.0,
        "dt": 0.01,
    }
    payload.update(changes)
    return payload


def divergent_scenario(**changes):
    a = [[0.0] * 6 for _ in range(6)]
    a[1][1] = 1000.0
    a[3][0] = 1.0
    a[4][1] = 1.0
    a[5][2] = 1.0
    b = [[0.0, 0.0] for _ in range(6)]
    b[1][0] = 1.0
    b[4][1] = 1.0
    payload = quiet_scenario(
        plant={"literal": {"A": a, "B": b}},
        loops=[],
        input={"kind": "step", "amplitude": 1.0},
        duration=2.0,
    )
    payload.update(changes)
    return payload


class TestModelCommand:
    """Test the model subcommand."""

    def test_longitudinal_preset(self, tmp_path):
        """Matrices are echoed and the nutation pair is listed."""
        result = runner.invoke(cli, ["model", "--preset", "paper-longitudinal", "--out", str(tmp_path)])
        assert result.exit_code == 0
        assert "3.7113" in result.output

        report = json.loads((tmp_path / "model.json").read_text())
        assert report["A"][0][2] == 3.7113
        nutation = [m for m in report["modes"] if m["im"] > 1e-3]
        assert len(nutation) == 1
        assert abs(nutation[0]["natural_frequency"] - 3.869) < 0.01
        assert (tmp_path / "manifest.json").exists()

    def test_lateral_gravity_columns(self, tmp_path):
        """The gravity-gradient elements are echoed exactly."""
        result = runner.invoke(cli, ["model", "--preset", "paper-lateral", "--out", str(tmp_path)])
        assert result.exit_code == 0
        report = json.loads((tmp_path / "model.json").read_text())
        assert report["A"][0][3] == -6.1872e-7
        assert report["A"][1][4] == 7.2937e-7
        assert report["A"][2][4] == -1.3422e-7

    def test_zero_literal_config(self, tmp_path):
        """An all-zero literal plant reports six zero eigenvalues."""
        config = write_config(
            tmp_path / "zero.json", {"literal": {"A": [[0.0] * 6] * 6, "B": [[0.0] * 2] * 6}}
        )
        out = tmp_path / "out"
        result = runner.invoke(cli, ["model", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0
        report = json.loads((out / "model.json").read_text())
        assert len(report["modes"]) == 6
        assert all(m["re"] == 0.0 and m["im"] == 0.0 for m in report["modes"])

    def test_unknown_preset(self):
        """An unknown preset is a configuration error."""
        result = runner.invoke(cli, ["model", "--preset", "nope"])
        assert result.exit_code == 2

    def test_malformed_json(self, tmp_path):
        """Broken JSON exits 2."""
        config = tmp_path / "broken.json"
        config.write_text("{not json", encoding="utf-8")
        result = runner.invoke(cli, ["model", "--config", str(config)])
        assert result.exit_code == 2

    def test_needs_one_source(self):
        """Neither --preset nor --config is a usage error."""
        result = runner.invoke(cli, ["model"])
        assert result.exit_code == 2


class TestRootLocusCommand:
    """Test the rootlocus subcommand."""

    def test_pitch_design_gain(self, tmp_path):
        """At K = -29800 every oscillatory branch is in the left half plane."""
        result = runner.invoke(
            cli,
            [
                "rootlocus",
                "--preset",
                "paper-longitudinal",
                "--k-min",
                "1000",
                "--points-per-decade",
                "20",
                "--out",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0
        frame = pd.read_csv(tmp_path / "locus.csv")
        assert list(frame.columns[:3]) == ["gain", "re_1", "im_1"]
        row = frame[frame["gain"] == -29800.0]
        assert len(row) == 1
        n = (len(frame.columns) - 1) // 2
        for j in range(1, n + 1):
            re, im = row[f"re_{j}"].iloc[0], row[f"im_{j}"].iloc[0]
            if abs(im) > 1e-6:
                assert re < -1e-6

        annotations = json.loads((tmp_path / "locus.json").read_text())
        assert set(annotations) == {"critical_gains", "breakaway"}

    def test_explicit_gains(self, tmp_path):
        """An explicit grid gives one row per gain."""
        result = runner.invoke(
            cli,
            ["rootlocus", "--preset", "paper-directional", "--gains", "0, 1e5, 3e5", "--out", str(tmp_path)],
        )
        assert result.exit_code == 0
        frame = pd.read_csv(tmp_path / "locus.csv")
        assert list(frame["gain"]) == [0.0, 1e5, 3e5]

    def test_empty_gains(self, tmp_path):
        """An empty grid is a usage error."""
        result = runner.invoke(cli, ["rootlocus", "--gains", "", "--out", str(tmp_path)])
        assert result.exit_code == 2


class TestSimulateCommand:
    """Test the simulate subcommand."""

    def test_quiescent_config(self, tmp_path):
        """Zero input on a circular orbit writes an all-zero trace."""
        config = write_config(tmp_path / "quiet.json", quiet_scenario())
        out = tmp_path / "out"
        result = runner.invoke(cli, ["simulate", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0
        frame = pd.read_csv(out / "quiet.csv")
        assert list(frame.columns) == [
            "t",
            "p",
            "q",
            "r",
            "phi_s_deg",
            "theta_s_deg",
            "psi_s_deg",
            "xc_1",
            "de_applied",
            "dn_applied",
        ]
        assert len(frame) == 501
        assert (frame.drop(columns="t") == 0.0).all().all()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert len(manifest["config_hash"]) == 64

    def test_figure_alias(self, tmp_path):
        """A figure alias runs every scenario of its sweep."""
        result = runner.invoke(
            cli, ["simulate", "--paper-figure", "29", "--duration", "2", "--out", str(tmp_path)]
        )
        assert result.exit_code == 0
        csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
        assert len(csvs) == 3
        assert all(name.startswith("longitudinal_e-sweep_i30_short") for name in csvs)

    def test_unknown_figure(self, tmp_path):
        """A figure without a preset exits 2."""
        result = runner.invoke(cli, ["simulate", "--paper-figure", "33", "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_divergent_plant_exits_one(self, tmp_path):
        """A run that blows up exits 1."""
        config = write_config(tmp_path / "bad.json", divergent_scenario())
        result = runner.invoke(cli, ["simulate", "--config", str(config), "--out", str(tmp_path / "out")])
        assert result.exit_code == 1

    def test_divergent_run_keeps_partial_trace(self, tmp_path):
        """The trace up to the blow-up is written before exiting 1."""
        config = write_config(tmp_path / "bad.json", divergent_scenario(name="blowup"))
        out = tmp_path / "out"
        result = runner.invoke(cli, ["simulate", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 1

        frame = pd.read_csv(out / "blowup.partial.csv")
        assert list(frame.columns[:7]) == ["t", "p", "q", "r", "phi_s_deg", "theta_s_deg", "psi_s_deg"]
        assert len(frame) > 1
        assert frame["t"].iloc[0] == 0.0
        assert frame["t"].iloc[-1] < 2.0
        assert frame.notna().all().all()
        assert not (out / "blowup.csv").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        """The same configuration writes the same bytes."""
        config = write_config(
            tmp_path / "doublet.json",
            quiet_scenario(
                name="doublet",
                orbit={"a": A_REFERENCE, "e": 0.2, "i_deg": 30.0},
                input={"kind": "doublet", "amplitude": 1e-3, "t_start": 1.0, "t_half": 3.0, "t_end": 5.0},
            ),
        )
        for run in ("one", "two"):
            result = runner.invoke(cli, ["simulate", "--config", str(config), "--out", str(tmp_path / run)])
            assert result.exit_code == 0
        first = (tmp_path / "one" / "doublet.csv").read_bytes()
        second = (tmp_path / "two" / "doublet.csv").read_bytes()
        assert first == second

    def test_exactly_one_source(self, tmp_path):
        """Two scenario sources are a usage error."""
        result = runner.invoke(
            cli, ["simulate", "--paper-figure", "29", "--preset", "lateral/e-sweep/i30/short"]
        )
        assert result.exit_code == 2


class TestAnalyzeCommand:
    """Test the analyze subcommand."""

    def test_zero_column(self, tmp_path):
        """A zero trace settles at the first sample and passes the budget."""
        frame = pd.DataFrame({"t": [0.0, 0.1, 0.2, 0.3], "theta_s_deg": [0.0, 0.0, 0.0, 0.0]})
        frame.to_csv(tmp_path / "run.csv", index=False)
        out = tmp_path / "metrics.json"
        result = runner.invoke(cli, ["analyze", str(tmp_path / "run.csv"), "--band", "0.01", "--out", str(out)])
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["settling_time_s"] == 0.0
        assert report["budget"]["pass"] is True

    def test_several_columns(self, tmp_path):
        """Several columns give a mapping keyed by column."""
        frame = pd.DataFrame({"t": [0.0, 1.0, 2.0], "phi_s_deg": [0.01, 0.0, 0.0], "psi_s_deg": [0.1, 0.0, 0.0]})
        frame.to_csv(tmp_path / "run.csv", index=False)
        out = tmp_path / "metrics.json"
        result = runner.invoke(
            cli,
            ["analyze", str(tmp_path / "run.csv"), "--column", "phi_s_deg", "--column", "psi_s_deg", "--out", str(out)],
        )
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["phi_s_deg"]["budget"]["pass"] is True
        assert report["psi_s_deg"]["budget"]["pass"] is False

    def test_pitch_figure_settles(self, tmp_path):
        """The pitch doublet of the e = 0.2 sweep member settles inside a minute."""
        result = runner.invoke(cli, ["simulate", "--paper-figure", "29", "--out", str(tmp_path)])
        assert result.exit_code == 0
        out = tmp_path / "metrics.json"
        result = runner.invoke(
            cli,
            [
                "analyze",
                str(tmp_path / "longitudinal_e-sweep_i30_short_e0.2.csv"),
                "--column",
                "theta_s_deg",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["settling_time_s"] is not None
        assert report["settling_time_s"] < 60.0

    @pytest.mark.slow
    def test_yaw_figure_meets_budget(self, tmp_path):
        """The ten-orbit yaw run at e = 0.2 passes the 0.047 degree budget."""
        result = runner.invoke(
            cli, ["simulate", "--paper-figure", "40", "--workers", "3", "--out", str(tmp_path)]
        )
        assert result.exit_code == 0
        out = tmp_path / "metrics.json"
        result = runner.invoke(
            cli,
            [
                "analyze",
                str(tmp_path / "directional_e-sweep_i30_long_e0.2.csv"),
                "--column",
                "psi_s_deg",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["budget"]["pass"] is True
        assert report["budget"]["limit_deg"] == 0.047
        assert report["peak_deg"] < 0.047

    def test_missing_column(self, tmp_path):
        """A column absent from the CSV is a schema error."""
        pd.DataFrame({"t": [0.0, 1.0], "q": [0.0, 0.0]}).to_csv(tmp_path / "run.csv", index=False)
        result = runner.invoke(cli, ["analyze", str(tmp_path / "run.csv"), "--column", "theta_s_deg"])
        assert result.exit_code == 2

    def test_missing_file(self, tmp_path):
        """A missing result file exits 2."""
        result = runner.invoke(cli, ["analyze", str(tmp_path / "absent.csv")])
        assert result.exit_code == 2


class TestPresetsCommand:
    """Test the preset catalogue."""

    def test_list(self):
        """The catalogue lists plants, scenarios and figure aliases."""
        result = runner.invoke(cli, ["presets", "list"])
        assert result.exit_code == 0
        assert "paper-lateral" in result.output
        assert "29:" in result.output
        assert "longitudinal/initial-theta/i30/short" in result.output


class TestOrbitCommand:
    """Test the orbit table."""

    def test_table(self, tmp_path):
        """An orbit table with inclusive end point."""
        out = tmp_path / "orbit.csv"
        result = runner.invoke(
            cli, ["orbit", "--period", str(ORBIT_PERIOD), "--e", "0.2", "--t-end", "100", "--dt", "10", "--out", str(out)]
        )
        assert result.exit_code == 0
        frame = pd.read_csv(out)
        assert len(frame) == 11
        assert frame["R"].iloc[0] == pytest.approx(0.8 * A_REFERENCE)

    def test_both_axis_and_period(self):
        """--a and --period are exclusive."""
        result = runner.invoke(cli, ["orbit", "--a", "7e6", "--period", "6000"])
        assert result.exit_code == 2


class TestVersion:
    def test_version(self):
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "2.0.0" in result.output
