"""Tests for pseudo-weight estimation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from wolcan.bart import BartConfig
from wolcan.pseudo_weights import (
    NonProbabilitySampleData,
    ProbabilitySampleData,
    build_weight_draws,
    crisp_pseudo_inclusion,
    estimate_nps_propensity,
    estimate_ps_inclusion_for_nps,
    select_rank_positions,
    select_weight_draws,
    stack,
)


class TestStack:
    def test_order_and_indicator(self):
        nps = NonProbabilitySampleData(aux=np.array([[1.0], [2.0]]))
        ps = ProbabilitySampleData(aux=np.array([[3.0], [4.0], [5.0]]), pi_r=np.full(3, 0.2))
        s = stack(nps, ps)
        assert s.aux[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert s.z.tolist() == [1, 1, 0, 0, 0]
        assert (s.n_nps, s.n_ps) == (2, 3)

    def test_overlap_unit_appears_twice(self):
        row = np.array([[7.5, -1.0]])
        nps = NonProbabilitySampleData(aux=row)
        ps = ProbabilitySampleData(aux=row, pi_r=np.array([0.5]))
        s = stack(nps, ps)
        assert s.aux.shape == (2, 2)
        assert np.array_equal(s.aux[0], s.aux[1])
        assert s.z.tolist() == [1, 0]

    def test_column_mismatch_rejected(self):
        nps = NonProbabilitySampleData(aux=np.zeros((2, 3)))
        ps = ProbabilitySampleData(aux=np.zeros((2, 2)), pi_r=np.full(2, 0.2))
        with pytest.raises(ValueError, match="column mismatch"):
            stack(nps, ps)

    def test_empty_ps_rejected(self):
        nps = NonProbabilitySampleData(aux=np.zeros((2, 1)))
        ps = ProbabilitySampleData(aux=np.zeros((0, 1)), pi_r=np.zeros(0))
        with pytest.raises(ValueError, match="empty"):
            stack(nps, ps)


class TestCrisp:
    def test_even_odds_passes_inclusion_through(self):
        # pi_z = 0.5 has odds 1, so the result is just pi_r.
        assert crisp_pseudo_inclusion(0.5, 0.1, 1.0, 1.0) == pytest.approx(0.1)

    def test_two_to_one_odds_doubles(self):
        assert crisp_pseudo_inclusion(2.0 / 3.0, 0.1, 1.0, 1.0) == pytest.approx(0.2)

    def test_clamped_to_one(self):
        # 9 * 0.5 * 0.8 = 3.6, far above 1.
        assert crisp_pseudo_inclusion(0.9, 0.5, 0.8, 1.0) == 1.0

    def test_clamped_at_floor(self):
        assert crisp_pseudo_inclusion(1e-9, 0.01, 1.0, 1.0) == pytest.approx(1e-6)

    def test_degenerate_propensity_rejected(self):
        with pytest.raises(ValueError):
            crisp_pseudo_inclusion(1.0, 0.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            crisp_pseudo_inclusion(0.0, 0.5, 1.0, 1.0)

    @given(
        pi_z=st.floats(0.01, 0.99),
        pi_r=st.floats(0.001, 1.0),
        p_r=st.floats(0.1, 1.0),
        p_b=st.floats(0.1, 1.0),
    )
    def test_always_in_clamp_range(self, pi_z, pi_r, p_r, p_b):
        out = crisp_pseudo_inclusion(pi_z, pi_r, p_r, p_b)
        assert 1e-6 <= out <= 1.0

    @given(lo=st.floats(0.05, 0.45), hi=st.floats(0.5, 0.9))
    def test_monotone_in_propensity(self, lo, hi):
        # Below the clamp, a higher membership propensity can only raise
        # the pseudo-inclusion probability.
        a = crisp_pseudo_inclusion(lo, 0.001, 1.0, 1.0)
        b = crisp_pseudo_inclusion(hi, 0.001, 1.0, 1.0)
        assert b >= a


class TestBuildWeightDraws:
    def test_untrimmed_weights_are_reciprocals(self):
        pi_z = np.full((4, 3), 0.5)
        pi_r = np.tile(np.array([[0.5], [0.25], [0.2], [0.1]]), (1, 3))
        w = build_weight_draws(pi_z, pi_r, trim_c=None)
        expected = np.tile(np.array([[2.0], [4.0], [5.0], [10.0]]), (1, 3))
        np.testing.assert_allclose(w.draws, expected)
        np.testing.assert_allclose(w.means, [2.0, 4.0, 5.0, 10.0])
        assert np.isinf(w.bounds).all()

    def test_trim_caps_the_outlier(self):
        # Weights {2, 4, 5, 10, 100}: Q1=4, Q2=5, Q3=10, so c=1 caps at 11.
        pi_z = np.full((5, 1), 0.5)
        pi_r = np.array([[0.5], [0.25], [0.2], [0.1], [0.01]])
        w = build_weight_draws(pi_z, pi_r, trim_c=1.0)
        np.testing.assert_allclose(w.draws[:, 0], [2.0, 4.0, 5.0, 10.0, 11.0])
        assert w.bounds[0] == pytest.approx(11.0)
        assert w.means[4] == pytest.approx(11.0)

    def test_trim_is_per_draw(self):
        rng = np.random.default_rng(3)
        pi_z = rng.uniform(0.2, 0.8, size=(50, 4))
        pi_r = rng.uniform(0.01, 0.3, size=(50, 4))
        w = build_weight_draws(pi_z, pi_r, trim_c=0.5)
        raw = build_weight_draws(pi_z, pi_r, trim_c=None)
        for m in range(4):
            q1, q2, q3 = np.quantile(raw.draws[:, m], [0.25, 0.5, 0.75])
            assert w.bounds[m] == pytest.approx(q2 + 0.5 * (q3 - q1))
            assert w.draws[:, m].max() <= w.bounds[m] + 1e-12

    def test_homogeneous_weights_untouched_by_trim(self):
        pi_z = np.full((10, 2), 0.5)
        pi_r = np.full((10, 2), 0.05)
        w = build_weight_draws(pi_z, pi_r, trim_c=20.0)
        np.testing.assert_allclose(w.draws, 20.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="share a shape"):
            build_weight_draws(np.full((3, 2), 0.5), np.full((3, 3), 0.1))

    @settings(deadline=None)
    @given(seed=st.integers(0, 10_000), c=st.floats(0.1, 30.0))
    def test_trim_never_raises_a_weight(self, seed, c):
        rng = np.random.default_rng(seed)
        pi_z = rng.uniform(0.05, 0.95, size=(20, 3))
        pi_r = rng.uniform(0.001, 1.0, size=(20, 3))
        trimmed = build_weight_draws(pi_z, pi_r, trim_c=c)
        raw = build_weight_draws(pi_z, pi_r, trim_c=None)
        assert np.all(trimmed.draws <= raw.draws + 1e-12)
        assert np.all(trimmed.draws >= 1.0 - 1e-12)
        assert np.all(np.isfinite(trimmed.draws))


class TestSelectWeightDraws:
    def _draws_with_totals(self, totals):
        # One unit per draw: the weight matrix row doubles as the total.
        pi_z = np.full((1, len(totals)), 0.5)
        pi_r = 1.0 / np.asarray(totals, dtype=float)[None, :]
        return build_weight_draws(pi_z, pi_r, trim_c=None)

    def test_rank_positions_for_twenty_of_hundred(self):
        ranks = select_rank_positions(100, 20)
        assert ranks.tolist() == list(range(3, 99, 5))

    def test_single_selection_takes_the_median_rank(self):
        assert select_rank_positions(100, 1).tolist() == [50]

    def test_selects_evenly_spaced_totals(self):
        rng = np.random.default_rng(11)
        totals = rng.permutation(np.arange(1.0, 101.0))
        w = self._draws_with_totals(totals)
        picked = select_weight_draws(w, 20)
        # Totals 1..100 shuffled: rank r holds total r exactly.
        np.testing.assert_allclose(
            [v[0] for v in picked], [float(r) for r in range(3, 99, 5)]
        )

    def test_select_all_returns_ascending_totals(self):
        w = self._draws_with_totals([5.0, 2.0, 9.0])
        picked = select_weight_draws(w, 3)
        assert [v[0] for v in picked] == [2.0, 5.0, 9.0]

    def test_more_than_available_rejected(self):
        w = self._draws_with_totals([5.0, 2.0])
        with pytest.raises(ValueError, match="1 <= D"):
            select_weight_draws(w, 3)

    def test_ties_break_by_draw_index(self):
        pi_z = np.full((2, 3), 0.5)
        pi_r = np.array([[0.5, 0.25, 0.5], [0.25, 0.5, 0.25]])
        w = build_weight_draws(pi_z, pi_r, trim_c=None)  # totals 6, 6, 6
        picked = select_weight_draws(w, 3)
        np.testing.assert_allclose(picked[0], w.draws[:, 0])
        np.testing.assert_allclose(picked[1], w.draws[:, 1])
        np.testing.assert_allclose(picked[2], w.draws[:, 2])


class TestEstimators:
    def test_constant_inclusion_recovered(self):
        rng = np.random.default_rng(4)
        ps = ProbabilitySampleData(aux=rng.normal(size=(60, 2)), pi_r=np.full(60, 0.05))
        cfg = BartConfig(n_trees=20, n_draws=30, burn=20)
        draws = estimate_ps_inclusion_for_nps(ps, rng.normal(size=(10, 2)), cfg, seed=0)
        assert draws.shape == (10, 30)
        np.testing.assert_allclose(draws, 0.05, atol=1e-3)

    def test_census_ps_rejected(self):
        ps = ProbabilitySampleData(aux=np.zeros((3, 1)), pi_r=np.array([0.5, 1.0, 0.5]))
        cfg = BartConfig(n_trees=5, n_draws=5, burn=2)
        with pytest.raises(ValueError, match="logit"):
            estimate_ps_inclusion_for_nps(ps, np.zeros((2, 1)), cfg, seed=0)

    def test_inclusion_tracks_a_covariate(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(800, 2))
        pi_r = expit(-3.0 + x[:, 0])
        ps = ProbabilitySampleData(aux=x, pi_r=pi_r)
        x_new = np.array([[-1.5, 0.0], [0.0, 0.0], [1.5, 0.0]])
        cfg = BartConfig(n_trees=50, n_draws=150, burn=100)
        draws = estimate_ps_inclusion_for_nps(ps, x_new, cfg, seed=1)
        est = draws.mean(axis=1)
        truth = expit(-3.0 + x_new[:, 0])
        assert est[0] < est[1] < est[2]
        np.testing.assert_allclose(est, truth, rtol=0.2)

    def test_propensity_separates_sources(self):
        rng = np.random.default_rng(6)
        nps = NonProbabilitySampleData(aux=rng.normal(1.0, 1.0, size=(150, 1)))
        ps = ProbabilitySampleData(
            aux=rng.normal(-1.0, 1.0, size=(150, 1)), pi_r=np.full(150, 0.1)
        )
        s = stack(nps, ps)
        cfg = BartConfig(n_trees=30, n_draws=60, burn=60)
        draws = estimate_nps_propensity(s, cfg, seed=2)
        assert draws.shape == (150, 60)
        assert draws.mean() > 0.55


class TestSelfWeightingDesign:
    def test_identical_frames_recover_design_weights(self):
        # When the same realized sample plays both roles, the membership
        # propensity hovers at 1/2 and the pseudo-weights should land near
        # the design weights 1/pi_R.
        rng = np.random.default_rng(7)
        n = 2000
        x = rng.normal(size=(n, 2))
        pi_r = expit(-2.5 + 0.8 * x[:, 0] + 0.4 * x[:, 1])
        ps = ProbabilitySampleData(aux=x, pi_r=pi_r)
        nps = NonProbabilitySampleData(aux=x)
        s = stack(nps, ps)

        pz = estimate_nps_propensity(s, BartConfig(n_trees=30, n_draws=80, burn=60), seed=3)
        pr = estimate_ps_inclusion_for_nps(
            ps, x, BartConfig(n_trees=80, n_draws=80, burn=80), seed=4
        )
        w = build_weight_draws(pz, pr, trim_c=None)
        target = 1.0 / pi_r
        rel_err = np.abs(w.means - target).mean() / target.mean()
        assert rel_err <= 0.15
