import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bspp.core import Window
from bspp.envelope import (
    Envelope,
    EnvelopeError,
    GridMismatchError,
    StatisticOptions,
    build_envelope,
    build_envelopes,
    data_statistic,
    envelope_from_values,
    envelope_test,
    load_envelope,
    load_report,
    save_envelope,
    save_report,
)
from bspp.fit import fit_gibbs_mpl
from bspp.netperf import NetworkConfig
from bspp.presets import MACRO_STRAUSS
from bspp.procsim import GibbsModel, McmcConfig, PoissonModel, sample_gibbs, sample_poisson
from bspp.sumstats import estimate_L

UNIT = Window.unit()
R = np.linspace(0, 0.25, 64)


def test_order_statistics_31_and_570():
    vals = np.random.default_rng(0).normal(size=(600, 5))
    env = envelope_from_values(vals, np.arange(5.0), 30)
    s = np.sort(vals, axis=0)
    np.testing.assert_array_equal(env.lo, s[30])
    np.testing.assert_array_equal(env.hi, s[569])


def test_k_drop_zero_is_min_max():
    vals = np.random.default_rng(1).random((50, 4))
    env = envelope_from_values(vals, np.arange(4.0), 0)
    np.testing.assert_array_equal(env.lo, vals.min(0))
    np.testing.assert_array_equal(env.hi, vals.max(0))


def test_constant_statistic():
    env = envelope_from_values(np.full((20, 3), 2.5), np.arange(3.0), 5)
    assert np.all(env.lo == 2.5) and np.all(env.hi == 2.5)


def test_nan_column_is_undefined():
    vals = np.ones((10, 3))
    vals[4, 1] = np.nan
    env = envelope_from_values(vals, np.arange(3.0), 1)
    assert env.defined.tolist() == [True, False, True]
    rep = envelope_test(np.array([1.0, 99.0, 1.0]), env)
    assert rep.inside


def test_bad_k_drop():
    with pytest.raises(ValueError):
        envelope_from_values(np.ones((10, 2)), np.arange(2.0), 5)


@given(st.integers(5, 60), st.integers(0, 10**6))
def test_band_ordering_and_boundary(M, seed):
    vals = np.random.default_rng(seed).normal(size=(M, 7))
    k = (M - 1) // 4
    env = envelope_from_values(vals, np.arange(7.0), k)
    assert np.all(env.lo <= env.hi)
    assert envelope_test(env.lo, env).inside and envelope_test(env.hi, env).inside
    # widening the band by dropping fewer extremes never shrinks it
    wide = envelope_from_values(vals, np.arange(7.0), max(k - 1, 0))
    assert np.all(wide.lo <= env.lo) and np.all(wide.hi >= env.hi)


def test_report_invariant_and_runs():
    env = Envelope("L", np.arange(6.0), np.zeros(6), np.ones(6), 10, 1)
    rep = envelope_test(np.array([0.5, 2, 2, 0.5, -1, 0.5]), env)
    assert rep.verdict == "rejected" and not rep.inside
    assert [(e["direction"], e["i_start"], e["i_end"]) for e in rep.exceedances] == [("above", 1, 2), ("below", 4, 4)]
    assert rep.fraction_outside == pytest.approx(0.5)
    assert envelope_test(np.full(6, 0.5), env).exceedances == []


def test_grid_mismatch():
    p = sample_poisson(PoissonModel(80), UNIT, 0)
    env = Envelope("L", R, np.zeros_like(R), np.ones_like(R), 10, 1)
    with pytest.raises(GridMismatchError):
        envelope_test(estimate_L(p, np.linspace(0, 0.25, 32)), env)
    with pytest.raises(GridMismatchError):
        envelope_test(np.zeros(3), env)


def test_envelope_deterministic_across_jobs():
    opts = StatisticOptions(r_grid=tuple(R), net=NetworkConfig(n_users=300))
    stats = ["L", "G", "SIR-CDF", "Voronoi-CDF"]
    mc = McmcConfig(n_steps=3000)
    a = build_envelopes(MACRO_STRAUSS, stats, UNIT, 21, 2, 5, opts, mc, n_jobs=1)
    b = build_envelopes(MACRO_STRAUSS, stats, UNIT, 21, 2, 5, opts, mc, n_jobs=2)
    for s in stats:
        np.testing.assert_array_equal(a[s].grid, b[s].grid)
        np.testing.assert_array_equal(a[s].lo, b[s].lo)
        np.testing.assert_array_equal(a[s].hi, b[s].hi)


def test_cdf_grid_from_pooled_quantiles():
    opts = StatisticOptions(net=NetworkConfig(n_users=200))
    env = build_envelope(PoissonModel(50), "SIR-CDF", 11, 1, master_seed=3, opts=opts)
    assert len(env.grid) <= 100 and np.all(np.diff(env.grid) > 0)
    assert np.all((env.lo >= 0) & (env.hi <= 1))


def test_infeasible_model_exhausts_attempts():
    with pytest.raises(EnvelopeError):
        build_envelope(PoissonModel(0.5), "L", 11, 1)


def test_repulsive_envelope_rejects_csr():
    strauss_data = sample_gibbs(GibbsModel.strauss(200, 0.05, 0.08), UNIT, McmcConfig(seed=1))
    fm = fit_gibbs_mpl(strauss_data, "strauss", {"r": 0.08})
    assert fm.model.gamma < 0.3
    env = build_envelope(fm, "L", 199, 10, grid=R, master_seed=2)
    ppp = sample_poisson(PoissonModel(strauss_data.n), UNIT, 7)
    rep = envelope_test(estimate_L(ppp, R), env)
    assert not rep.inside
    assert any(e["direction"] == "above" and e["start"] < 0.08 for e in rep.exceedances)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="any-exceedance rule rejects ~78% of true-model L curves on a 128-point grid")
def test_self_consistency_50_trials():
    inside = 0
    for t in range(50):
        data = sample_gibbs(MACRO_STRAUSS, UNIT, McmcConfig(seed=10_000 + t))
        fm = fit_gibbs_mpl(data, "strauss")
        env = build_envelope(fm, "L", 600, 30, master_seed=t)
        inside += envelope_test(data_statistic(data, "L"), env).inside
    assert inside >= 40


def test_files_round_trip(tmp_path):
    p = sample_poisson(PoissonModel(60), UNIT, 2)
    opts = StatisticOptions(r_grid=tuple(R))
    env = build_envelope(PoissonModel(60), "G", 21, 2, master_seed=9, opts=opts)
    data = data_statistic(p, "G", opts)
    save_envelope(env, tmp_path / "e.csv", data=data)
    back, y = load_envelope(tmp_path / "e.csv")
    assert (back.statistic, back.M, back.k_drop, back.master_seed) == ("G", 21, 2, 9)
    np.testing.assert_array_equal(back.grid, env.grid)
    np.testing.assert_array_equal(back.defined, env.defined)
    np.testing.assert_array_equal(back.lo[back.defined], env.lo[env.defined])
    rep = envelope_test(data, env)
    assert envelope_test(y, back).verdict == rep.verdict
    save_report(rep, tmp_path / "r.json")
    assert load_report(tmp_path / "r.json") == rep
