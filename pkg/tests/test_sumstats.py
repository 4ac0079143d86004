import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bspp.core import PointPattern, Window
from bspp.procsim import MaternModel, PoissonModel, sample_matern, sample_poisson
from bspp.sumstats import (
    EstimationError,
    K_to_L,
    SummaryCurve,
    default_r_grid,
    estimate_G,
    estimate_K,
    estimate_L,
    load_curve,
    save_curve,
    theoretical_G_poisson,
    theoretical_K_poisson,
)
from conftest import uniform_pattern

UNIT = Window.unit()
R = np.linspace(0, 0.25, 26)


def brute_K(pattern, r):
    w = pattern.window
    xy = pattern.coords
    n = pattern.n
    out = np.zeros(len(r))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx, dy = abs(xy[i, 0] - xy[j, 0]), abs(xy[i, 1] - xy[j, 1])
            wt = (w.width - dx) * (w.height - dy) / w.area
            out += (math.hypot(dx, dy) <= r) / wt
    return w.area * out / n**2


def toroidal_K(pattern, r):
    w = pattern.window
    d = np.abs(pattern.coords[:, None, :] - pattern.coords[None, :, :])
    d = np.minimum(d, [w.width, w.height] - d)
    dist = np.hypot(d[..., 0], d[..., 1])[~np.eye(pattern.n, dtype=bool)]
    return w.area / pattern.n**2 * (dist[None, :] <= r[:, None]).sum(axis=1)


def test_K_zero_below_separation():
    p = PointPattern([[0.2, 0.2], [0.5, 0.2]], UNIT)
    k = estimate_K(p, R)
    assert np.all(k.values[R < 0.3] == 0)


def test_K_matches_double_loop():
    p = uniform_pattern(40, seed=2, window=Window(0, 2, 0, 1))
    r = np.linspace(0, 0.25, 30)
    np.testing.assert_allclose(estimate_K(p, r).values, brute_K(p, r), rtol=1e-12)


def test_K_against_toroidal_oracle():
    # both estimators are unbiased for CSR; their means must agree at small r
    r = np.linspace(0, 0.1, 11)
    tr, to = [], []
    for s in range(100):
        p = sample_poisson(PoissonModel(100), UNIT, s)
        tr.append(estimate_K(p, r).values)
        to.append(toroidal_K(p, r))
    np.testing.assert_allclose(np.mean(tr, 0)[1:], np.mean(to, 0)[1:], rtol=0.04)


def test_K_errors():
    with pytest.raises(EstimationError):
        estimate_K(PointPattern([[0.5, 0.5]], UNIT), R)
    with pytest.raises(EstimationError, match="validity"):
        estimate_K(uniform_pattern(10), np.linspace(0, 0.3, 4))
    with pytest.raises(ValueError):
        estimate_K(uniform_pattern(10), [0.0, 0.2, 0.1])


def test_default_grid():
    r = default_r_grid(Window(0, 2, 0, 1))
    assert len(r) == 128 and r[0] == 0 and r[-1] == 0.25


@given(st.integers(2, 60), st.integers(0, 10**6), st.floats(0.2, 5.0))
def test_K_properties(n, seed, s):
    p = uniform_pattern(n, seed=seed)
    k = estimate_K(p, R)
    assert k.values[0] == 0
    assert np.all(np.diff(k.values) >= 0)
    assert np.all(k.values >= 0)
    ks = estimate_K(p.scaled(s), R * s)
    np.testing.assert_allclose(ks.values, s**2 * k.values, rtol=1e-9)
    kt = estimate_K(p.translated(1.5, -0.5), R)
    np.testing.assert_allclose(kt.values, k.values, rtol=1e-9)


def test_K_to_L_examples():
    r = np.array([0.0, 0.1, 0.2])
    k = SummaryCurve("K", r, theoretical_K_poisson(r), "none", 0)
    np.testing.assert_allclose(K_to_L(k).values, r)
    c = SummaryCurve("K", np.array([0.0, 1.0]), np.array([0.0, 4 * math.pi]), "none", 0)
    np.testing.assert_allclose(K_to_L(c).values, [0.0, 2.0])
    with pytest.raises(ValueError):
        K_to_L(SummaryCurve("K", np.array([0.0]), np.array([-1.0]), "none", 0))


def test_theoretical_G():
    assert theoretical_G_poisson(1, 0) == 0
    assert theoretical_G_poisson(1, 1) == pytest.approx(0.956786, abs=1e-6)
    assert theoretical_G_poisson(37.837, 0.05) == pytest.approx(1 - math.exp(-math.pi * 37.837 * 0.0025))


def test_G_border_rule():
    # the point at 0.05 from the edge drops out once r exceeds 0.05
    p = PointPattern([[0.5, 0.5], [0.52, 0.5], [0.05, 0.5]], UNIT)
    g = estimate_G(p, np.array([0.0, 0.01, 0.03, 0.06, 0.6]))
    np.testing.assert_allclose(g.values[:4], [0, 0, 2 / 3, 1.0])
    assert np.isnan(g.values[4])


def test_G_poisson_mean():
    r = np.linspace(0, 0.08, 17)
    gs = [estimate_G(sample_poisson(PoissonModel(100), UNIT, s), r).values for s in range(200)]
    assert np.max(np.abs(np.mean(gs, 0) - theoretical_G_poisson(100, r))) < 0.03


def test_G_clustered_above_poisson():
    m = MaternModel(71.552, 2.641, 0.087)
    r = np.linspace(0, 0.03, 7)
    gs = []
    for s in range(50):
        p = sample_matern(m, UNIT, s)
        if p.n >= 2:
            gs.append(estimate_G(p, r).values)
    assert np.all(np.mean(gs, 0)[1:] > theoretical_G_poisson(m.intensity, r[1:]))


@given(st.integers(2, 40), st.integers(0, 10**6))
def test_G_bounded(n, seed):
    g = estimate_G(uniform_pattern(n, seed=seed), R)
    v = g.values[g.defined]
    assert np.all((v >= 0) & (v <= 1))


@pytest.mark.parametrize("stat", ["K", "L", "G"])
def test_curve_round_trip(tmp_path, stat):
    p = uniform_pattern(30, seed=1)
    curve = {"K": estimate_K, "L": estimate_L, "G": estimate_G}[stat](p, np.linspace(0, 0.25, 64))
    save_curve(curve, tmp_path / "c.csv")
    back = load_curve(tmp_path / "c.csv")
    assert back.statistic == stat and back.n_points == 30
    np.testing.assert_array_equal(back.r_grid, curve.r_grid)
    np.testing.assert_array_equal(back.defined, curve.defined)
    np.testing.assert_array_equal(back.values[back.defined], curve.values[curve.defined])
