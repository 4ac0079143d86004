import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from bspp.core import PointPattern, Window
from bspp.netperf import (
    EmpiricalCdf,
    NetworkConfig,
    coverage_distribution,
    load_cdf,
    save_cdf,
    sir_batch,
    sir_realization,
    voronoi_area_distribution,
    voronoi_areas,
)
from conftest import uniform_pattern

UNIT = Window.unit()


def two_bs_coverage_symbolic():
    # SIR = max(h1, h2) / min(h1, h2) with iid Exp(1) fading; P(SIR > T) for T >= 1
    x, T = sp.symbols("x T", positive=True)
    one_side = sp.integrate(sp.exp(-x) * sp.exp(-T * x), (x, 0, sp.oo))  # P(h1 > T h2)
    return sp.simplify(2 * one_side), T


def test_two_bs_closed_form_derivation():
    expr, T = two_bs_coverage_symbolic()
    assert sp.simplify(expr - 2 / (1 + T)) == 0
    # numeric cross-check, conditioning on h2: P(h1 > 3 h2) + P(h1 < h2 / 3)
    from scipy import integrate

    val, _ = integrate.quad(lambda y: math.exp(-y) * (math.exp(-3 * y) + 1 - math.exp(-y / 3)), 0, np.inf)
    assert val == pytest.approx(float(expr.subs(T, 3)), abs=1e-10)
    assert val == pytest.approx(0.5, abs=1e-10)


def test_equidistant_equal_fading():
    p = PointPattern([[0.25, 0.5], [0.75, 0.5]], UNIT)
    assert sir_realization((0.5, 0.5), p, NetworkConfig(), [1.0, 1.0]) == pytest.approx(1.0)


def test_two_bs_monte_carlo():
    p = PointPattern([[0.25, 0.5], [0.75, 0.5]], UNIT)
    users = np.tile([0.5, 0.5], (10**6, 1))
    cdf = coverage_distribution(p, NetworkConfig(seed=1), users=users)
    t_db = 10 * math.log10(3)
    assert cdf.coverage(t_db) == pytest.approx(0.5, abs=0.01)
    assert cdf.coverage(10 * math.log10(1.5)) == pytest.approx(2 / 2.5, abs=0.01)


def exhaustive_sir(user, bs, power, fading, alpha):
    d = np.maximum(np.hypot(*(bs - user).T), 1e-6)
    s = power * fading * d ** -alpha
    best = -1.0
    for y in range(len(bs)):
        interf = sum(s[k] for k in range(len(bs)) if k != y)
        best = max(best, s[y] / interf)
    return best


@given(st.integers(0, 10**6), st.floats(2.5, 5.0))
def test_max_sir_exhaustive(seed, alpha):
    rng = np.random.default_rng(seed)
    bs = rng.random((5, 2))
    power = rng.uniform(0.5, 2.0, 5)
    users = rng.random((8, 2))
    fading = rng.exponential(size=(8, 5))
    got = sir_batch(users, bs, power, fading, alpha)
    want = [exhaustive_sir(u, bs, power, f, alpha) for u, f in zip(users, fading)]
    np.testing.assert_allclose(got, want, rtol=1e-10)


def test_nearest_association():
    bs = np.array([[0.0, 0.0], [1.0, 0.0]])
    sir = sir_batch([[0.4, 0.0]], bs, np.ones(2), np.array([[1.0, 100.0]]), 4.0, "nearest")
    assert sir[0] == pytest.approx((0.4**-4) / (100 * 0.6**-4))
    best = sir_batch([[0.4, 0.0]], bs, np.ones(2), np.array([[1.0, 100.0]]), 4.0)
    assert best[0] > 1 > sir[0]


def test_sir_needs_two_bs():
    with pytest.raises(ValueError):
        coverage_distribution(PointPattern([[0.5, 0.5]], UNIT), NetworkConfig())


def test_sir_distance_floor_warns():
    p = PointPattern([[0.25, 0.5], [0.75, 0.5]], UNIT)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        v = sir_realization((0.25, 0.5), p, NetworkConfig(), [1.0, 1.0])
    assert math.isfinite(v) and any("floor" in str(x.message) for x in w)


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(path_loss_exp=2.0)
    with pytest.raises(ValueError):
        NetworkConfig(association="random")
    with pytest.raises(ValueError):
        NetworkConfig(tx_power=(1.0, 2.0)).powers(3)


def test_coverage_deterministic_and_blocked():
    p = uniform_pattern(30, seed=2)
    a = coverage_distribution(p, NetworkConfig(n_users=5000, seed=4))
    b = coverage_distribution(p, NetworkConfig(n_users=5000, seed=4))
    np.testing.assert_array_equal(a.values, b.values)
    # the first block does not depend on how many users follow it
    c = coverage_distribution(p, NetworkConfig(n_users=4096, seed=4))
    assert a.n == 5000 and set(c.values) <= set(a.values)


def test_empirical_cdf():
    cdf = EmpiricalCdf([3.0, 1.0, 2.0, 2.0])
    assert cdf(2.0) == 0.75 and cdf(0.5) == 0.0 and cdf(3.0) == 1.0
    assert cdf.coverage(1.0) == 0.75


def test_voronoi_examples():
    np.testing.assert_allclose(voronoi_areas(PointPattern([[0.3, 0.3]], UNIT)), [1.0])
    a = voronoi_areas(PointPattern([[0.25, 0.5], [0.75, 0.5]], UNIT), 256)
    assert np.all(np.abs(a - 0.5) <= 1 / 256**2)
    with pytest.raises(ValueError):
        voronoi_area_distribution(uniform_pattern(5), grid_res=128)


def test_voronoi_tie_to_lowest_index():
    # with an odd lattice the middle column is equidistant and goes to BS 0
    a = voronoi_areas(PointPattern([[0.25, 0.5], [0.75, 0.5]], UNIT), 3)
    np.testing.assert_allclose(a, [6 / 9, 3 / 9])


@given(st.integers(1, 30), st.integers(0, 10**6), st.sampled_from([16, 64, 256]))
def test_voronoi_areas_sum_to_window(n, seed, res):
    w = Window(0, 2, 0, 3)
    a = voronoi_areas(uniform_pattern(n, seed=seed, window=w), res)
    assert a.sum() == pytest.approx(w.area, rel=1e-12)
    assert np.all(a >= 0)


def test_voronoi_refinement():
    p = uniform_pattern(10, seed=10)
    a, b = voronoi_areas(p, 512), voronoi_areas(p, 1024)
    assert np.max(np.abs(a - b)) < 0.005 * UNIT.area


def test_cdf_round_trip(tmp_path):
    cdf = voronoi_area_distribution(uniform_pattern(20, seed=1))
    save_cdf(cdf, tmp_path / "c.csv")
    back = load_cdf(tmp_path / "c.csv")
    assert back.statistic == "Voronoi-CDF"
    np.testing.assert_array_equal(back.values, cdf.values)
