import numpy as np
import pytest
from numpy.testing import assert_allclose

from twogroups import (
    InsufficientGroupsError,
    InvalidInputError,
    MixingDistribution,
    ShrinkageState,
    TwoGroupsModel,
    ZPanel,
    bowing_profile,
    fit_shrinkage_state,
    interval_bounds,
    run_coverage_study,
)


@pytest.fixture(scope="module")
def one_group():
    return TwoGroupsModel(p0=0.0, g=MixingDistribution.normal(0.0, 1.0))


class TestShrinkageState:
    def test_equal_variance_reduces_to_sample_moments(self, rng):
        z = rng.normal(0, 1.5, 200)
        st = fit_shrinkage_state(z, np.ones(200))
        assert_allclose(st.m_hat, z.mean(), atol=1e-12)
        assert_allclose(st.a_hat, max(0.0, z.var(ddof=1) - 1.0), atol=1e-10)

    def test_boundary_flag(self):
        z = np.full(20, 0.3) + np.linspace(-0.01, 0.01, 20)
        st = fit_shrinkage_state(z, np.ones(20))
        assert st.at_boundary and st.a_hat == 0.0


class TestIntervalBounds:
    def test_raw_width_is_exact(self, one_group):
        panel, _ = one_group.sample_panel(50, seed=0)
        st = fit_shrinkage_state(panel.z, panel.resolve_variances())
        lo, hi = interval_bounds("raw", panel, st, nominal=0.95)
        assert_allclose(hi - lo, 2 * 1.959963984540054, atol=1e-9)

    def test_no_shrinkage_limit_collapses_to_raw(self, one_group):
        # B -> 0 as A_hat -> infinity: plugin and eb both coincide with raw
        panel, _ = one_group.sample_panel(30, seed=1)
        st = ShrinkageState(n_units=30, a_hat=1e14, m_hat=0.0, var_m=1e-3, at_boundary=False)
        lo_r, hi_r = interval_bounds("raw", panel, st)
        for method in ("plugin_shrunken", "eb_adjusted"):
            lo, hi = interval_bounds(method, panel, st)
            assert_allclose(lo, lo_r, atol=1e-5)
            assert_allclose(hi, hi_r, atol=1e-5)

    def test_bounds_are_ordered_and_finite(self, one_group, rng):
        V = rng.uniform(0.3, 3.0, 40)
        panel, _ = one_group.sample_panel(40, sampling_variances=V, seed=2)
        st = fit_shrinkage_state(panel.z, V)
        for method in ("raw", "plugin_shrunken", "eb_adjusted"):
            lo, hi = interval_bounds(method, panel, st)
            assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
            assert np.all(lo < hi)

    def test_eb_needs_five_groups(self, one_group):
        panel, _ = one_group.sample_panel(4, seed=3)
        st = ShrinkageState(n_units=4, a_hat=1.0, m_hat=0.0, var_m=0.5, at_boundary=False)
        with pytest.raises(InsufficientGroupsError):
            interval_bounds("eb_adjusted", panel, st)

    def test_plugin_width_never_below_center_uncertainty(self, one_group):
        # the full-shrinkage fallback at the A_hat = 0 boundary
        panel = ZPanel(ids=[str(i) for i in range(20)], z=np.full(20, 0.4) + np.linspace(-0.005, 0.005, 20))
        st = fit_shrinkage_state(panel.z, np.ones(20))
        assert st.at_boundary
        lo, hi = interval_bounds("plugin_shrunken", panel, st, nominal=0.95)
        assert_allclose(hi - lo, 2 * 1.959963984540054 * np.sqrt(st.var_m), atol=1e-9)

    def test_eb_widths_bow_outward(self, one_group):
        panel, _ = one_group.sample_panel(18, seed=0)
        st = fit_shrinkage_state(panel.z, panel.resolve_variances())
        lo, hi = interval_bounds("eb_adjusted", panel, st)
        width = hi - lo
        dist = np.abs(panel.z - st.m_hat)
        assert width[np.argmax(dist)] > width[np.argmin(dist)]


class TestRunCoverageStudy:
    def test_preconditions(self, one_group):
        with pytest.raises(InvalidInputError):
            run_coverage_study(one_group, 15, 1.0, replications=50)
        with pytest.raises(InvalidInputError):
            run_coverage_study(one_group, 3, 1.0, replications=200)
        with pytest.raises(InvalidInputError):
            run_coverage_study(one_group, 15, 1.0, methods=("bootstrap",), replications=200)

    def test_small_panel_contrast(self, one_group):
        # N=15 at nominal 95%: the naive plug-in intervals undercover badly,
        # the adjusted intervals nearly restore the nominal rate, raw is exact
        results = {r.method: r for r in run_coverage_study(
            one_group, 15, 1.0, nominal=0.95, replications=2000, seed=0)}
        assert results["plugin_shrunken"].empirical_coverage < 0.90
        assert results["eb_adjusted"].empirical_coverage >= 0.93
        raw = results["raw"]
        assert abs(raw.empirical_coverage - 0.95) < 3 * raw.mc_stderr

    def test_adjusted_beats_plugin_pairwise(self, one_group):
        results = {r.method: r for r in run_coverage_study(
            one_group, 25, 1.0, methods=("plugin_shrunken", "eb_adjusted"),
            nominal=0.95, replications=800, seed=1)}
        diff = (results["eb_adjusted"].empirical_coverage
                - results["plugin_shrunken"].empirical_coverage)
        # paired over identical replications; 99% MC confidence on the gap
        n = 800 * 25
        assert diff > 2.576 * np.sqrt(0.5 / n)

    def test_adjusted_is_shorter_than_raw_at_large_n(self, one_group):
        results = {r.method: r for r in run_coverage_study(
            one_group, 1000, 1.0, methods=("raw", "eb_adjusted"),
            nominal=0.95, replications=300, seed=2)}
        assert results["eb_adjusted"].mean_width < results["raw"].mean_width
        for r in results.values():
            assert r.empirical_coverage >= 0.945

    def test_degenerate_generator_harms_no_method(self):
        degenerate = TwoGroupsModel(p0=0.0, g=MixingDistribution.grid([0.0], [1.0]))
        results = run_coverage_study(degenerate, 15, 1.0, nominal=0.95,
                                     replications=2000, seed=0)
        floor = 0.95 - 3 * np.sqrt(0.95 * 0.05 / (2000 * 15))
        for r in results:
            assert r.empirical_coverage >= floor

    @pytest.mark.parametrize("generator_kwargs, variances", [
        (dict(p0=0.0, g=MixingDistribution.normal(0.0, 1.0)), 1.0),
        (dict(p0=0.9, g=MixingDistribution.normal(2.5, 0.5)), 1.0),
        (dict(p0=0.0, g=MixingDistribution.normal(1.0, 4.0)), [0.25, 0.5, 1.0, 2.0, 4.0] * 3),
    ])
    def test_raw_hits_nominal_everywhere(self, generator_kwargs, variances):
        model = TwoGroupsModel(**generator_kwargs)
        (raw,) = run_coverage_study(model, 15, variances, methods=("raw",),
                                    nominal=0.95, replications=1000, seed=3)
        assert abs(raw.empirical_coverage - 0.95) < 3 * raw.mc_stderr

    def test_mc_stderr_formula(self, one_group):
        (raw,) = run_coverage_study(one_group, 10, 1.0, methods=("raw",),
                                    nominal=0.9, replications=150, seed=4)
        c = raw.empirical_coverage
        assert_allclose(raw.mc_stderr, np.sqrt(c * (1 - c) / (150 * 10)), atol=1e-15)

    def test_identical_results_for_any_worker_count(self, one_group):
        runs = [run_coverage_study(one_group, 12, 1.0, nominal=0.95,
                                   replications=200, seed=5, workers=w)
                for w in (1, 4)]
        for a, b in zip(*runs):
            assert a.empirical_coverage == b.empirical_coverage
            assert a.mean_width == b.mean_width
            assert np.array_equal(a.per_unit_coverage, b.per_unit_coverage)

    def test_variance_decile_table_when_heteroscedastic(self, one_group, rng):
        V = rng.uniform(0.3, 3.0, 20)
        results = run_coverage_study(one_group, 20, V, methods=("raw",),
                                     replications=200, seed=6)
        table = results[0].by_variance_decile
        assert table is not None and len(table) >= 5
        (equal,) = run_coverage_study(one_group, 20, 1.0, methods=("raw",),
                                      replications=200, seed=6)
        assert equal.by_variance_decile is None

    def test_per_unit_coverage_at_n18(self, one_group):
        (eb,) = run_coverage_study(one_group, 18, 1.0, methods=("eb_adjusted",),
                                   nominal=0.95, replications=5000, seed=0)
        assert eb.per_unit_coverage.min() >= 0.93


class TestBowingProfile:
    def test_visible_bowing_at_small_n(self, one_group):
        for seed in range(3):
            panel, _ = one_group.sample_panel(18, seed=seed)
            st = fit_shrinkage_state(panel.z, panel.resolve_variances())
            profile = bowing_profile("eb_adjusted", panel, st)
            assert profile.ratio > 1.01
            assert np.all(np.diff(profile.width) >= -1e-12)

    def test_invisible_bowing_at_large_n(self, one_group):
        panel, _ = one_group.sample_panel(10_000, seed=0)
        st = fit_shrinkage_state(panel.z, panel.resolve_variances())
        assert bowing_profile("eb_adjusted", panel, st).ratio < 1.005

    def test_plugin_profile_is_flat(self, one_group):
        panel, _ = one_group.sample_panel(18, seed=0)
        st = fit_shrinkage_state(panel.z, panel.resolve_variances())
        assert_allclose(bowing_profile("plugin_shrunken", panel, st).ratio, 1.0, atol=1e-12)
