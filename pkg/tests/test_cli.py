"""Command-line interface tests: smoke runs and CSV round trips."""
import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from wolcan import simgen
from wolcan.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def sample_files(tmp_path_factory):
    """Tiny NPS/PS CSV pair with items and an outcome column."""
    root = tmp_path_factory.mktemp("data")
    pop = simgen.make_population(2000, 31, "high", (0.07, 0.07))
    b = simgen.poisson_sample(pop.pi_b, 1)
    r = simgen.poisson_sample(pop.pi_r, 2)
    aux_cols = ["a1", "a2", "a3"]
    item_cols = [f"item_{j + 1:02d}" for j in range(30)]

    nps = pd.DataFrame(pop.aux[b], columns=aux_cols)
    for j, col in enumerate(item_cols):
        nps[col] = pop.items[b, j]
    rng = np.random.default_rng(3)
    eta = -0.8 + 1.1 * (pop.classes[b] == 2)
    nps["y"] = (rng.random(b.size) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
    nps["true_class"] = np.where(pop.classes[b] == 3, 1, pop.classes[b])
    nps_path = root / "nps.csv"
    nps.to_csv(nps_path, index=False)

    ps = pd.DataFrame(pop.aux[r], columns=aux_cols)
    ps["pi_R"] = pop.pi_r[r]
    ps_path = root / "ps.csv"
    ps.to_csv(ps_path, index=False)
    return {
        "root": root,
        "nps": nps_path,
        "ps": ps_path,
        "item_cols": item_cols,
        "n_b": int(b.size),
    }


class TestSimulateWeights:
    def test_tiny_run_writes_reports(self, runner, tmp_path):
        out = tmp_path / "w"
        result = runner.invoke(
            main,
            [
                "simulate-weights",
                "--scenario", "1A",
                "--n-pop", "1200",
                "--replicates", "2",
                "--settings", "0.06:0.06",
                "--roster", "NoModel,LogRegMiss",
                "--out-dir", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        records = pd.read_csv(out / "1A_replicates.csv")
        assert len(records) == 2 * 2
        assert (out / "1A_summary.csv").exists()
        assert (out / "1A_beeswarm.svg").exists()
        assert "NoModel" in result.output

    def test_wrong_kind_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["simulate-weights", "--scenario", "2A", "--out-dir", str(tmp_path)],
        )
        assert result.exit_code != 0
        assert "not a weight scenario" in result.output

    def test_unknown_scenario_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["simulate-weights", "--scenario", "7Q", "--out-dir", str(tmp_path)],
        )
        assert result.exit_code != 0
        assert "unknown scenario" in result.output

    def test_empty_roster_header_only(self, runner, tmp_path):
        out = tmp_path / "w"
        result = runner.invoke(
            main,
            [
                "simulate-weights",
                "--n-pop", "400",
                "--replicates", "1",
                "--settings", "0.05:0.05",
                "--roster", "",
                "--out-dir", str(out),
                "--no-svg",
            ],
        )
        assert result.exit_code == 0, result.output
        lines = (out / "1A_replicates.csv").read_text().strip().splitlines()
        assert len(lines) == 1


class TestSimulateLca:
    def test_config_file_overrides_flags(self, runner, tmp_path):
        out = tmp_path / "lca"
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "n_pop": 1600,
                    "replicates": 1,
                    "m_draws": 25,
                    "d_draws": 2,
                    "k_max": 5,
                    "adaptive_iters": 700,
                    "adaptive_burn": 350,
                    "adaptive_thin": 2,
                    "fixed_iters": 1200,
                    "fixed_burn": 400,
                    "fixed_thin": 2,
                }
            )
        )
        result = runner.invoke(
            main,
            [
                "simulate-lca",
                "--scenario", "2A",
                "--n-pop", "999999",  # overridden by the config file
                "--out-dir", str(out),
                "--no-svg",
                "--config", str(cfg_path),
            ],
        )
        assert result.exit_code == 0, result.output
        records = pd.read_csv(out / "2A_replicates.csv")
        assert set(records["model"]) == {"WOLCAN", "Unweighted"}
        assert len(records) == 2
        summary = pd.read_csv(out / "2A_summary.csv")
        assert list(summary.columns)[:4] == [
            "Scenario",
            "Model",
            "Wts Abs Bias",
            "K Abs Bias",
        ]

    def test_wrong_kind_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["simulate-lca", "--scenario", "1B", "--out-dir", str(tmp_path)],
        )
        assert result.exit_code != 0
        assert "not a latent class scenario" in result.output


class TestListScenarios:
    def test_lists_all_ids(self, runner):
        result = runner.invoke(main, ["list-scenarios"])
        assert result.exit_code == 0
        for sid in ("1A", "1B", "2A", "2J"):
            assert sid in result.output


class TestEstimateWeights:
    def test_round_trip(self, runner, sample_files, tmp_path):
        draws_path = tmp_path / "draws.csv"
        means_path = tmp_path / "means.csv"
        result = runner.invoke(
            main,
            [
                "estimate-weights",
                "--nps", str(sample_files["nps"]),
                "--ps", str(sample_files["ps"]),
                "--aux-cols", "a1,a2,a3",
                "--m-draws", "30",
                "--burn", "20",
                "--seed", "4",
                "--out-draws", str(draws_path),
                "--out-means", str(means_path),
            ],
        )
        assert result.exit_code == 0, result.output
        draws = pd.read_csv(draws_path)
        assert draws.shape == (sample_files["n_b"], 30)
        assert list(draws.columns)[0] == "draw_0001"
        means = pd.read_csv(means_path)
        assert list(means.columns) == ["unit", "weight"]
        assert (means["weight"] >= 1.0).all()

    def test_requires_an_output(self, runner, sample_files):
        result = runner.invoke(
            main,
            [
                "estimate-weights",
                "--nps", str(sample_files["nps"]),
                "--ps", str(sample_files["ps"]),
                "--aux-cols", "a1,a2,a3",
            ],
        )
        assert result.exit_code != 0
        assert "out-draws" in result.output

    def test_missing_column_reported(self, runner, sample_files, tmp_path):
        result = runner.invoke(
            main,
            [
                "estimate-weights",
                "--nps", str(sample_files["nps"]),
                "--ps", str(sample_files["ps"]),
                "--aux-cols", "a1,a2,zz",
                "--out-means", str(tmp_path / "m.csv"),
            ],
        )
        assert result.exit_code != 0
        assert "zz" in result.output


@pytest.fixture(scope="module")
def weights_files(runner, sample_files):
    draws_path = sample_files["root"] / "draws.csv"
    means_path = sample_files["root"] / "means.csv"
    result = runner.invoke(
        main,
        [
            "estimate-weights",
            "--nps", str(sample_files["nps"]),
            "--ps", str(sample_files["ps"]),
            "--aux-cols", "a1,a2,a3",
            "--m-draws", "24",
            "--burn", "16",
            "--seed", "6",
            "--out-draws", str(draws_path),
            "--out-means", str(means_path),
        ],
    )
    assert result.exit_code == 0, result.output
    return {"draws": draws_path, "means": means_path}


@pytest.fixture(scope="module")
def fit_dir(runner, sample_files, weights_files):
    out = sample_files["root"] / "fit"
    result = runner.invoke(
        main,
        [
            "fit-wolcan",
            "--items", str(sample_files["nps"]),
            "--item-cols", ",".join(sample_files["item_cols"]),
            "--weights", str(weights_files["draws"]),
            "--d-draws", "2",
            "--k-hat", "2",
            "--fixed-iters", "1400",
            "--fixed-burn", "400",
            "--no-adjust",
            "--seed", "8",
            "--out-dir", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    return out


class TestFitPipeline:
    def test_fit_outputs(self, sample_files, fit_dir):
        meta = json.loads((fit_dir / "fit.json").read_text())
        assert meta["k_hat"] == 2
        assert meta["n_weight_draws"] == 2
        pi = pd.read_csv(fit_dir / "pi.csv")
        assert list(pi["class"]) == [1, 2]
        assert pi["estimate"].sum() == pytest.approx(1.0, abs=1e-6)
        theta = pd.read_csv(fit_dir / "theta.csv")
        assert len(theta) == 30 * 2 * 4
        sums = theta.groupby(["item", "class"])["estimate"].sum()
        assert np.allclose(sums, 1.0, atol=1e-6)
        assign = pd.read_csv(fit_dir / "assignments.csv")
        assert len(assign) == sample_files["n_b"]
        assert assign["class"].isin([1, 2]).all()

    def test_fit_outcome_from_assignments(self, runner, sample_files, fit_dir, tmp_path):
        out_path = tmp_path / "or.csv"
        result = runner.invoke(
            main,
            [
                "fit-outcome",
                "--data", str(sample_files["nps"]),
                "--outcome-col", "y",
                "--confounders", "a1",
                "--assignments", str(fit_dir / "assignments.csv"),
                "--weights", str(sample_files["root"] / "means.csv"),
                "--iters", "2500",
                "--burn", "1200",
                "--seed", "9",
                "--out", str(out_path),
            ],
        )
        assert result.exit_code == 0, result.output
        table = pd.read_csv(out_path)
        assert list(table.columns) == ["term", "or", "ci_lower", "ci_upper", "direction_prob"]
        assert list(table["term"]) == ["intercept", "class_2", "a1"]
        assert (table["or"] > 0).all()

    def test_fit_outcome_from_class_column(self, runner, sample_files, tmp_path):
        out_path = tmp_path / "or2.csv"
        result = runner.invoke(
            main,
            [
                "fit-outcome",
                "--data", str(sample_files["nps"]),
                "--outcome-col", "y",
                "--class-col", "true_class",
                "--iters", "2000",
                "--burn", "1000",
                "--seed", "10",
                "--out", str(out_path),
            ],
        )
        assert result.exit_code == 0, result.output
        table = pd.read_csv(out_path)
        # planted effect: class 2 raises the odds
        class2 = table.loc[table["term"] == "class_2"].iloc[0]
        assert class2["or"] > 1.0

    def test_fit_outcome_needs_labels(self, runner, sample_files, tmp_path):
        result = runner.invoke(
            main,
            [
                "fit-outcome",
                "--data", str(sample_files["nps"]),
                "--outcome-col", "y",
                "--out", str(tmp_path / "x.csv"),
            ],
        )
        assert result.exit_code != 0
        assert "--assignments or --class-col" in result.output


class TestReportRebuild:
    def test_rebuild_is_byte_identical(self, runner, tmp_path):
        out = tmp_path / "orig"
        result = runner.invoke(
            main,
            [
                "simulate-weights",
                "--n-pop", "1200",
                "--replicates", "2",
                "--settings", "0.06:0.06",
                "--roster", "NoModel,LogReg",
                "--out-dir", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rebuilt = tmp_path / "rebuilt"
        result = runner.invoke(
            main,
            [
                "report",
                "--records", str(out / "1A_replicates.csv"),
                "--out-dir", str(rebuilt),
            ],
        )
        assert result.exit_code == 0, result.output
        for name in ("1A_summary.csv", "1A_beeswarm.svg", "1A_replicates.csv"):
            assert (rebuilt / name).read_bytes() == (out / name).read_bytes()
