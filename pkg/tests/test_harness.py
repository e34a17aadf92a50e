"""Harness tests: metrics, scenario registry, runner, and reports."""
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wolcan.harness import (
    LCA_SUMMARY_COLUMNS,
    ScenarioConfig,
    emit_report,
    lca_replicate_metrics,
    match_classes,
    metric_coverage,
    population_truth,
    record_columns,
    run_scenario,
    run_weight_replicate,
    scenario_config,
    scenario_ids,
    summary_frame,
    weight_abs_bias,
)
from wolcan.wolca import LcaEstimates


def tiny_weight_config(**kw):
    base = dict(
        n_pop=1500,
        replicates=2,
        settings=((0.06, 0.06),),
        roster=("NoModel", "LogReg", "LogRegMiss"),
    )
    base.update(kw)
    return scenario_config("1A", **base)


def exact_estimates(pi, theta, n_levels, pad=0.0):
    """An LcaEstimates whose medians equal the given truth."""
    return LcaEstimates(
        pi_median=pi,
        pi_lower=np.clip(pi - pad, 0, 1),
        pi_upper=np.clip(pi + pad, 0, 1),
        theta_median=theta,
        theta_lower=np.clip(theta - pad, 0, 1),
        theta_upper=np.clip(theta + pad, 0, 1),
        n_levels=n_levels,
    )


class TestMetricCoverage:
    def test_all_inside(self):
        assert metric_coverage(([0.0, 0.1], [1.0, 0.9]), [0.5, 0.5]) == 1.0

    def test_boundary_counts_as_covered(self):
        assert metric_coverage(([0.5], [0.7]), [0.5]) == 1.0

    def test_half(self):
        cov = metric_coverage(([0.0, 0.6], [0.4, 1.0]), [0.2, 0.5])
        assert cov == 0.5

    def test_matrix_form(self):
        intervals = np.array([[0.0, 1.0], [0.4, 0.6]])
        assert metric_coverage(intervals, [0.5, 0.1]) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no intervals"):
            metric_coverage(([], []), [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            metric_coverage(([0.0], [1.0]), [0.5, 0.5])

    @given(
        st.lists(
            st.tuples(
                st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)
            ),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_always_a_proportion(self, triples):
        lo = np.minimum([a for a, _, _ in triples], [b for _, b, _ in triples])
        hi = np.maximum([a for a, _, _ in triples], [b for _, b, _ in triples])
        truth = np.array([c for _, _, c in triples])
        cov = metric_coverage((lo, hi), truth)
        assert 0.0 <= cov <= 1.0


class TestPopulationTruth:
    def test_hand_counts(self):
        classes = np.array([1, 1, 2])
        items = np.array([[1, 2], [1, 1], [2, 2]])
        n_levels = np.array([2, 2])
        pi, theta = population_truth(classes, items, 2, n_levels)
        np.testing.assert_allclose(pi, [2 / 3, 1 / 3])
        np.testing.assert_allclose(theta[0, 0], [1.0, 0.0])
        np.testing.assert_allclose(theta[1, 0], [0.5, 0.5])
        np.testing.assert_allclose(theta[0, 1], [0.0, 1.0])

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(0)
        classes = rng.integers(1, 4, size=200)
        items = rng.integers(1, 5, size=(200, 6))
        pi, theta = population_truth(classes, items, 3, np.full(6, 4))
        assert pi.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(theta.sum(axis=2), 1.0)


class TestMatchClasses:
    def test_recovers_permutation(self):
        rng = np.random.default_rng(3)
        theta_true = rng.dirichlet(np.ones(4), size=(8, 3)).transpose(0, 1, 2)
        perm = np.array([2, 0, 1])
        theta_est = theta_true[:, perm, :]
        matched = match_classes(theta_est, theta_true)
        # estimated column perm[t]... est class holding true class t is argsort
        np.testing.assert_array_equal(theta_est[:, matched[0], :], theta_true[:, 0, :])
        np.testing.assert_array_equal(theta_est[:, matched[2], :], theta_true[:, 2, :])

    def test_bijection_when_counts_match(self):
        rng = np.random.default_rng(4)
        theta_true = rng.dirichlet(np.ones(3), size=(5, 4))
        matched = match_classes(theta_true, theta_true)
        np.testing.assert_array_equal(np.sort(matched), np.arange(4))

    def test_missing_classes_marked(self):
        rng = np.random.default_rng(5)
        theta_true = rng.dirichlet(np.ones(3), size=(5, 3))
        theta_est = theta_true[:, :2, :]
        matched = match_classes(theta_est, theta_true)
        assert (matched == -1).sum() == 1
        used = matched[matched >= 0]
        assert len(set(used)) == len(used)


class TestLcaReplicateMetrics:
    def setup_method(self):
        rng = np.random.default_rng(11)
        self.n_levels = np.full(6, 3)
        self.pi = np.array([0.5, 0.3, 0.2])
        self.theta = rng.dirichlet(np.ones(3), size=(6, 3))

    def test_perfect_estimates_zero_bias_full_coverage(self):
        est = exact_estimates(self.pi, self.theta, self.n_levels, pad=0.05)
        m = lca_replicate_metrics(est, 3, self.pi, self.theta)
        assert m["k_abs_bias"] == 0.0
        assert m["pi_abs_bias"] == pytest.approx(0.0, abs=1e-12)
        assert m["theta_abs_bias"] == pytest.approx(0.0, abs=1e-12)
        assert m["pi_coverage"] == 1.0
        assert m["theta_coverage"] == 1.0

    def test_label_permutation_is_harmless(self):
        perm = [1, 2, 0]
        est = exact_estimates(self.pi[perm], self.theta[:, perm, :], self.n_levels, pad=0.02)
        m = lca_replicate_metrics(est, 3, self.pi, self.theta)
        assert m["pi_abs_bias"] == pytest.approx(0.0, abs=1e-12)
        assert m["pi_coverage"] == 1.0

    def test_missing_class_counts_its_share_as_bias(self):
        keep = [0, 1]
        est = exact_estimates(self.pi[keep], self.theta[:, keep, :], self.n_levels, pad=0.02)
        m = lca_replicate_metrics(est, 2, self.pi, self.theta)
        assert m["k_abs_bias"] == 1.0
        # classes 1-2 contribute zero bias; class 3 its full share
        assert m["pi_abs_bias"] == pytest.approx(self.pi[2] / 3)
        assert m["pi_coverage"] == pytest.approx(2 / 3)
        assert m["theta_coverage"] == pytest.approx(2 / 3)

    def test_known_bias_arithmetic(self):
        est = exact_estimates(
            np.array([0.48, 0.32, 0.20]), self.theta, self.n_levels, pad=0.25
        )
        m = lca_replicate_metrics(est, 3, self.pi, self.theta)
        assert m["pi_abs_bias"] == pytest.approx((0.02 + 0.02 + 0.0) / 3)
        assert m["pi_coverage"] == 1.0


class TestWeightAbsBias:
    def test_oracle_weights_score_zero(self):
        w = np.array([3.0, 7.5, 12.0])
        assert weight_abs_bias(w, w) == 0.0

    def test_hand_value(self):
        assert weight_abs_bias([1.0, 1.0], [3.0, 5.0]) == 3.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            weight_abs_bias([1.0], [1.0, 2.0])


class TestScenarioRegistry:
    def test_all_ids_buildable(self):
        ids = scenario_ids()
        assert ids[:2] == ["1A", "1B"]
        assert len(ids) == 12
        for sid in ids:
            cfg = scenario_config(sid)
            assert cfg.scenario == sid

    def test_variants_differ_from_baseline(self):
        base = scenario_config("2A")
        assert scenario_config("2B").overlap == "low"
        assert scenario_config("2C").fracs == (0.01, 0.01)
        assert scenario_config("2G").patterns == "non_disjoint"
        assert scenario_config("2I").missing_covariates is True
        assert scenario_config("2J").adjust is False
        assert base.adjust is True and base.patterns == "disjoint"

    def test_case_insensitive_lookup(self):
        assert scenario_config("2a").scenario == "2A"

    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            scenario_config("9Z")

    def test_overrides_apply(self):
        cfg = scenario_config("2A", replicates=3, d_draws=4)
        assert cfg.replicates == 3 and cfg.d_draws == 4

    def test_bad_roster_rejected(self):
        with pytest.raises(ValueError, match="unknown weight models"):
            scenario_config("1A", roster=("NoModel", "Oracle"))

    def test_bad_replicates_rejected(self):
        with pytest.raises(ValueError, match="replicate"):
            scenario_config("1A", replicates=0)

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            ScenarioConfig(scenario="X", kind="other")


class TestWeightReplicate:
    def test_rows_one_per_model(self):
        cfg = tiny_weight_config()
        rows = run_weight_replicate(cfg, (0.06, 0.06), np.random.SeedSequence(1))
        assert [r["model"] for r in rows] == list(cfg.roster)
        assert all(r["setting"] == "6%/6%" for r in rows)
        assert all(np.isfinite(r["wts_abs_bias"]) for r in rows)

    def test_no_model_bias_matches_direct_formula(self):
        cfg = tiny_weight_config(roster=("NoModel",))
        seed = np.random.SeedSequence(2)
        rows = run_weight_replicate(cfg, (0.06, 0.06), seed)
        # regenerate the same population and samples from the same children
        from wolcan import simgen

        s_pop, s_b, s_r, _ = np.random.SeedSequence(2).spawn(4)
        pop = simgen.make_population(cfg.n_pop, s_pop, "high", (0.06, 0.06))
        b_idx = simgen.poisson_sample(pop.pi_b, s_b)
        expect = np.abs(1.0 - pop.true_weights[b_idx]).mean()
        assert rows[0]["wts_abs_bias"] == pytest.approx(expect)

    def test_degenerate_sample_raises(self):
        cfg = tiny_weight_config(n_pop=40)
        with pytest.raises(RuntimeError, match="degenerate"):
            run_weight_replicate(cfg, (0.001, 0.001), np.random.SeedSequence(0))


class TestRunScenario:
    def test_records_shape_and_determinism(self):
        cfg = tiny_weight_config()
        rep1 = run_scenario(cfg)
        rep2 = run_scenario(cfg)
        assert len(rep1.records) == 2 * 1 * 3
        assert list(rep1.records.columns) == record_columns("weights")
        pd.testing.assert_frame_equal(rep1.records, rep2.records)
        assert rep1.records["failed"].sum() == 0

    def test_parallel_matches_serial(self):
        cfg = tiny_weight_config()
        serial = run_scenario(cfg, n_jobs=1)
        parallel = run_scenario(cfg, n_jobs=2)
        pd.testing.assert_frame_equal(serial.records, parallel.records)

    def test_replicates_differ(self):
        rep = run_scenario(tiny_weight_config())
        by_rep = rep.records.groupby("replicate")["wts_abs_bias"].mean()
        assert by_rep.iloc[0] != by_rep.iloc[1]

    def test_failures_recorded_not_fatal(self):
        # one unit expected per sample: some replicates come up degenerate
        cfg = tiny_weight_config(
            n_pop=60, settings=((0.02, 0.02),), replicates=4, seed=5
        )
        rep = run_scenario(cfg)
        assert len(rep.records) == 4 * 3
        failed = rep.records["failed"]
        assert rep.failures == failed.sum() / 3
        assert 0 < rep.failures <= 4
        assert (rep.records.loc[failed, "error"].str.len() > 0).all()
        assert rep.records.loc[failed, "wts_abs_bias"].isna().all()

    def test_progress_callback_sees_every_replicate(self):
        seen = []
        run_scenario(tiny_weight_config(), progress=lambda d, t: seen.append((d, t)))
        assert seen == [(1, 2), (2, 2)]


class TestSummaryFrame:
    def test_weight_layout(self):
        rep = run_scenario(tiny_weight_config())
        frame = summary_frame(rep)
        assert list(frame.columns) == [
            "Sample Size",
            "Overlap",
            "NoModel",
            "LogReg",
            "LogRegMiss",
        ]
        assert frame.shape[0] == 1
        assert frame.loc[0, "Sample Size"] == "6%/6%"

    def test_aggregates_are_plain_means(self):
        rep = run_scenario(tiny_weight_config())
        frame = summary_frame(rep)
        for model in rep.models:
            rows = rep.records[rep.records["model"] == model]
            expect = float(np.mean(rows["wts_abs_bias"].to_numpy()))
            assert frame.loc[0, model] == expect

    def test_failed_rows_excluded_from_aggregate(self):
        cfg = tiny_weight_config(
            n_pop=60, settings=((0.02, 0.02),), replicates=4, seed=5
        )
        rep = run_scenario(cfg)
        frame = summary_frame(rep)
        rows = rep.records
        ok = ~rows["failed"]
        for model in rep.models:
            vals = rows.loc[ok & (rows["model"] == model), "wts_abs_bias"].to_numpy()
            expect = float(np.mean(vals)) if vals.size else float("nan")
            assert frame.loc[0, model] == expect or (
                np.isnan(frame.loc[0, model]) and np.isnan(expect)
            )

    def test_lca_layout_column_names(self):
        assert LCA_SUMMARY_COLUMNS == [
            "Scenario",
            "Model",
            "Wts Abs Bias",
            "K Abs Bias",
            "π Abs Bias",
            "θ Abs Bias",
            "π CI Width",
            "θ CI Width",
            "π Cov",
            "θ Cov",
        ]


class TestEmitReport:
    def test_files_written_and_rerun_identical(self, tmp_path):
        cfg = tiny_weight_config()
        rep = run_scenario(cfg)
        first = emit_report(rep, tmp_path / "a")
        again = emit_report(run_scenario(cfg), tmp_path / "b")
        assert set(first) == {"replicates", "summary", "figure"}
        for name in first:
            assert first[name].exists()
            assert first[name].read_bytes() == again[name].read_bytes()

    def test_empty_roster_header_only(self, tmp_path):
        cfg = tiny_weight_config(roster=())
        rep = run_scenario(cfg)
        paths = emit_report(rep, tmp_path)
        text = paths["replicates"].read_text().strip().splitlines()
        assert len(text) == 1
        assert text[0].split(",")[:3] == ["scenario", "replicate", "model"]
        summary = paths["summary"].read_text().strip().splitlines()
        assert len(summary) == 1

    def test_csv_only_formats(self, tmp_path):
        rep = run_scenario(tiny_weight_config())
        paths = emit_report(rep, tmp_path, formats=("csv",))
        assert "figure" not in paths

    def test_unwritable_target_raises(self, tmp_path):
        blocker = tmp_path / "taken"
        blocker.write_text("file, not a directory")
        rep = run_scenario(tiny_weight_config())
        with pytest.raises(OSError):
            emit_report(rep, blocker / "sub")


@pytest.fixture(scope="module")
def small_report():
    """One tiny end-to-end study-2 run shared by the class below."""
    cfg = scenario_config(
        "2A",
        n_pop=2200,
        replicates=2,
        m_draws=30,
        d_draws=2,
        k_max=6,
        adaptive_iters=900,
        adaptive_burn=450,
        adaptive_thin=3,
        fixed_iters=1500,
        fixed_burn=450,
        fixed_thin=3,
    )
    return run_scenario(cfg)


class TestLcaScenarioSmall:

    def test_row_count_and_models(self, small_report):
        rec = small_report.records
        assert len(rec) == 2 * 2
        assert set(rec["model"]) == {"WOLCAN", "Unweighted"}
        assert list(rec.columns) == record_columns("lca")

    def test_metrics_populated(self, small_report):
        rec = small_report.records
        assert rec["failed"].sum() == 0
        for col in ("pi_abs_bias", "theta_abs_bias", "pi_coverage", "theta_coverage"):
            assert rec[col].notna().all()
            assert (rec[col] >= 0).all()
        assert (rec["k_hat"] >= 1).all()

    def test_weighted_bias_beats_flat_weights(self, small_report):
        rec = small_report.records
        wol = rec[rec["model"] == "WOLCAN"]["wts_abs_bias"].mean()
        unw = rec[rec["model"] == "Unweighted"]["wts_abs_bias"].mean()
        assert wol < unw

    def test_summary_layout(self, small_report):
        frame = summary_frame(small_report)
        assert list(frame.columns) == LCA_SUMMARY_COLUMNS
        assert list(frame["Model"]) == ["WOLCAN", "Unweighted"]
        wol = frame.loc[frame["Model"] == "WOLCAN"].iloc[0]
        rows = small_report.records
        expect = float(
            np.mean(rows.loc[rows["model"] == "WOLCAN", "pi_abs_bias"].to_numpy())
        )
        assert wol["π Abs Bias"] == expect
