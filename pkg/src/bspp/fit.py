"""Parameter estimation: Poisson MLE, Gibbs maximum pseudolikelihood, Matérn minimum contrast."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .core import PointPattern, Window, nearest_neighbour_distances
from .procsim import (
    PARAM_KEYS,
    GibbsModel,
    MaternModel,
    Model,
    PoissonModel,
    interaction_pair_count,
    model_from_params,
    model_to_params,
    papangelou_conditional_intensity,
)
from .sumstats import EstimationError, estimate_K, k_validity_bound

__all__ = [
    "QuadratureScheme",
    "FittedModel",
    "FitError",
    "MplConvergenceError",
    "fit_poisson",
    "build_quadrature",
    "interaction_statistic",
    "log_pseudolikelihood",
    "log_pseudolikelihood_grad",
    "log_pseudolikelihood_direct",
    "fit_gibbs_mpl",
    "matern_K",
    "matern_contrast",
    "fit_matern_mincontrast",
    "fit_model",
    "fitted_to_json",
    "fitted_from_json",
    "save_fitted",
    "load_fitted",
    "DEFAULT_R_CANDIDATES",
    "DEFAULT_SAT_CANDIDATES",
]

DEFAULT_R_CANDIDATES = tuple(np.linspace(0.02, 0.20, 20))
DEFAULT_SAT_CANDIDATES = (1, 2, 3, 4, 5, 6)


class FitError(RuntimeError):
    pass


class MplConvergenceError(FitError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class QuadratureScheme:
    """Data points followed by dummy points, with counting weights."""

    nodes: np.ndarray
    weights: np.ndarray
    is_data: np.ndarray
    window: Window

    @property
    def n_data(self) -> int:
        return int(self.is_data.sum())


@dataclass
class FittedModel:
    model: Model
    objective: float
    irregular_grid_trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    method: str = ""

    @property
    def family(self) -> str:
        return self.model.family


def fit_poisson(pattern: PointPattern) -> FittedModel:
    n, area = pattern.n, pattern.window.area
    lam = n / area
    flags = []
    if n == 0:
        flags.append("degenerate_empty_pattern")
        objective = 0.0
    else:
        objective = n * math.log(lam) - lam * area
    return FittedModel(PoissonModel(lam), objective, [], flags, "mle")


# ---------------------------------------------------------------------------
# Berman-Turner device


def build_quadrature(pattern: PointPattern, dummy_resolution: int = 32) -> QuadratureScheme:
    """Dummy points at the centres of a regular grid plus all data points.

    Each node gets weight (cell area) / (number of nodes in its cell), so the
    weights sum to the window area.
    """
    nd = int(dummy_resolution)
    if nd < 1:
        raise ValueError("dummy_resolution must be >= 1")
    win = pattern.window
    cw, ch = win.width / nd, win.height / nd
    gx = win.x_min + (np.arange(nd) + 0.5) * cw
    gy = win.y_min + (np.arange(nd) + 0.5) * ch
    dummies = np.column_stack([np.tile(gx, nd), np.repeat(gy, nd)])
    nodes = np.vstack([pattern.coords, dummies])

    ix = np.clip(((nodes[:, 0] - win.x_min) / cw).astype(int), 0, nd - 1)
    iy = np.clip(((nodes[:, 1] - win.y_min) / ch).astype(int), 0, nd - 1)
    cell = iy * nd + ix
    counts = np.bincount(cell, minlength=nd * nd)
    weights = (cw * ch) / counts[cell]
    is_data = np.zeros(len(nodes), dtype=bool)
    is_data[: pattern.n] = True
    return QuadratureScheme(nodes, weights, is_data, win)


def _node_distances(pattern: PointPattern, quad: QuadratureScheme) -> np.ndarray:
    """Distances from every node to every data point; a data node's own column is inf."""
    if pattern.n == 0:
        return np.empty((len(quad.nodes), 0))
    d = cdist(quad.nodes, pattern.coords)
    idx = np.flatnonzero(quad.is_data)
    d[idx, np.arange(len(idx))] = np.inf
    return d


def _stat_from_distances(d, family, r, sat, pattern_pairs, is_data):
    strict = family == "hardcore"
    t = np.count_nonzero(d < r if strict else d <= r, axis=1)
    if family != "geyer":
        return t.astype(float)
    # ratio of globally saturated densities, z minus u for data nodes
    p = pattern_pairs
    s = np.where(
        is_data,
        min(p, sat) - np.minimum(p - t, sat),
        np.minimum(p + t, sat) - min(p, sat),
    )
    return s.astype(float)


def interaction_statistic(model: GibbsModel, pattern: PointPattern, quad: QuadratureScheme) -> np.ndarray:
    """Per-node exponent s_v with lambda(v, z minus v) = beta * gamma**s_v."""
    d = _node_distances(pattern, quad)
    p = interaction_pair_count(model, pattern) if model.family == "geyer" else 0
    return _stat_from_distances(d, model.family, model.r, model.sat, p, quad.is_data)


def _log_lambda(log_beta, log_gamma, s):
    out = np.full(s.shape, log_beta)
    nz = s != 0
    if log_gamma == -math.inf:
        out[nz] = -math.inf
    else:
        out[nz] += log_gamma * s[nz]
    return out


def _objective(log_beta, log_gamma, s, w, is_data):
    ll = _log_lambda(log_beta, log_gamma, s)
    return float(ll[is_data].sum() - np.dot(w, np.exp(ll)))


def _objective_derivs(theta, s, w, is_data):
    a, b = theta
    lam = np.exp(a + b * s)
    wl = w * lam
    sd = s[is_data]
    f = float(is_data.sum() * a + b * sd.sum() - wl.sum())
    g = np.array([is_data.sum() - wl.sum(), sd.sum() - np.dot(wl, s)])
    h = -np.array([[wl.sum(), np.dot(wl, s)], [np.dot(wl, s), np.dot(wl, s * s)]])
    return f, g, h


def log_pseudolikelihood(model: GibbsModel, pattern: PointPattern, quad: QuadratureScheme) -> float:
    """Berman-Turner approximation of the log pseudolikelihood.

    sum over data u of log lambda(u, z minus u), minus the weighted sum of
    lambda(v, z minus v) over all quadrature nodes. ``-inf`` when some data
    point has zero conditional intensity.
    """
    s = interaction_statistic(model, pattern, quad)
    log_gamma = -math.inf if model.gamma == 0 else math.log(model.gamma)
    return _objective(math.log(model.beta), log_gamma, s, quad.weights, quad.is_data)


def log_pseudolikelihood_grad(model: GibbsModel, pattern: PointPattern, quad: QuadratureScheme) -> np.ndarray:
    """Gradient with respect to (log beta, log gamma); gamma must be positive."""
    s = interaction_statistic(model, pattern, quad)
    theta = (math.log(model.beta), math.log(model.gamma))
    return _objective_derivs(theta, s, quad.weights, quad.is_data)[1]


def log_pseudolikelihood_direct(model: GibbsModel, pattern: PointPattern, quad: QuadratureScheme) -> float:
    """Slow reference evaluation that calls the conditional intensity node by node."""
    total = 0.0
    n = pattern.n
    for k, v in enumerate(quad.nodes):
        rest = pattern.without(k) if quad.is_data[k] else pattern
        lam = papangelou_conditional_intensity(model, v, rest)
        if quad.is_data[k]:
            total += math.log(lam) if lam > 0 else -math.inf
        total -= quad.weights[k] * lam
    assert quad.n_data == n
    return total


def _newton(s, w, is_data, theta0, tol, max_iter):
    theta = np.asarray(theta0, dtype=float)
    f, g, h = _objective_derivs(theta, s, w, is_data)
    for it in range(max_iter):
        if np.linalg.norm(g) < tol:
            return theta, f, it
        step = np.linalg.solve(h, -g)
        t = 1.0
        while True:
            cand = theta + t * step
            fc, gc, hc = _objective_derivs(cand, s, w, is_data)
            if fc >= f - 1e-12 * abs(f) or t < 1e-12:
                break
            t *= 0.5
        theta, f, g, h = cand, fc, gc, hc
    if np.linalg.norm(g) < tol:
        return theta, f, max_iter
    raise MplConvergenceError(f"Newton did not converge, |grad|={np.linalg.norm(g):.3g}", [])


def _fit_canonical(s, w, is_data, n, fixed_gamma, tol, max_iter):
    """Maximise over (log beta, log gamma) for one irregular-parameter setting.

    Returns (beta, gamma, objective, flags).
    """
    sd = s[is_data]
    if fixed_gamma is not None:
        lg = -math.inf if fixed_gamma == 0 else math.log(fixed_gamma)
        mass = float(np.dot(w, np.exp(_log_lambda(0.0, lg, s))))
        beta = n / mass
        return beta, float(fixed_gamma), _objective(math.log(beta), lg, s, w, is_data), []
    if not np.any(s != 0):
        beta = n / w.sum()
        return beta, 1.0, _objective(math.log(beta), 0.0, s, w, is_data), ["gamma_unidentifiable"]
    if not np.any(sd > 0) and np.all(s >= 0):
        # likelihood increases monotonically as gamma -> 0
        mass = float(w[s == 0].sum())
        beta = n / mass
        return beta, 0.0, _objective(math.log(beta), -math.inf, s, w, is_data), ["gamma_zero_boundary"]
    theta, f, _ = _newton(s, w, is_data, (math.log(n / w.sum()), 0.0), tol, max_iter)
    return math.exp(theta[0]), math.exp(theta[1]), f, []


def _as_list(x):
    return [x] if np.isscalar(x) else list(x)


def fit_gibbs_mpl(
    pattern: PointPattern,
    family: str,
    irregular_grid: dict | None = None,
    dummy_resolution: int = 32,
    gamma: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> FittedModel:
    """Maximum pseudolikelihood fit with profiling over irregular parameters.

    ``irregular_grid`` maps ``"r"`` (and ``"sat"`` for geyer) to candidate
    values. For each candidate the concave objective in (log beta, log gamma)
    is maximised by damped Newton; the best candidate wins. ``gamma`` freezes
    the interaction parameter. The hard-core distance is always set to the
    smallest nearest-neighbour distance, its maximum pseudolikelihood value.
    """
    if family not in ("strauss", "geyer", "hardcore"):
        raise ValueError(f"unknown Gibbs family {family!r}")
    n = pattern.n
    if n < 2:
        raise FitError(f"pseudolikelihood fit needs at least 2 points, got {n}")
    grid = dict(irregular_grid or {})
    quad = build_quadrature(pattern, dummy_resolution)
    w, is_data = quad.weights, quad.is_data
    d = _node_distances(pattern, quad)

    if family == "hardcore":
        hc = float(nearest_neighbour_distances(pattern).min())
        s = _stat_from_distances(d, "hardcore", hc, None, 0, is_data)
        beta, _, obj, flags = _fit_canonical(s, w, is_data, n, 0.0, tol, max_iter)
        trace = [{"hc": hc, "objective": obj}]
        return FittedModel(GibbsModel.hardcore(beta, hc), obj, trace, flags, "mpl")

    r_cands = [float(r) for r in _as_list(grid.get("r", DEFAULT_R_CANDIDATES))]
    if family == "geyer":
        sat_cands = [float(v) for v in _as_list(grid.get("sat", DEFAULT_SAT_CANDIDATES))]
    else:
        sat_cands = [None]

    pdists = d[is_data]
    best = None
    trace = []
    for r, sat in itertools.product(r_cands, sat_cands):
        p = int(np.count_nonzero(pdists <= r)) // 2 if family == "geyer" else 0
        s = _stat_from_distances(d, family, r, sat, p, is_data)
        try:
            beta, gam, obj, flags = _fit_canonical(s, w, is_data, n, gamma, tol, max_iter)
        except MplConvergenceError as exc:
            exc.trace = trace
            raise
        if family == "strauss" and gam > 1:
            beta, gam, obj, _ = _fit_canonical(s, w, is_data, n, 1.0, tol, max_iter)
            flags = flags + ["gamma_clamped"]
        entry = {"r": r, "objective": obj, "beta": beta, "gamma": gam}
        if sat is not None:
            entry["sat"] = sat
        trace.append(entry)
        if best is None or obj > best[0]:
            best = (obj, r, sat, beta, gam, flags)

    obj, r, sat, beta, gam, flags = best
    if family == "strauss":
        model = GibbsModel.strauss(beta, gam, r)
    else:
        model = GibbsModel.geyer(beta, gam, r, sat)
    return FittedModel(model, obj, trace, list(flags), "mpl")


# ---------------------------------------------------------------------------
# Matérn cluster minimum contrast


def matern_K(r, lambda_p: float, R: float):
    """Closed-form K of the Matérn cluster process.

    K(r) = pi r^2 + H(r / 2R) / lambda_p, with H the distribution function
    of the distance between two independent uniform points in a disc of
    radius R, written in terms of z = r / 2R.
    """
    r = np.asarray(r, dtype=float)
    z = np.minimum(r / (2.0 * R), 1.0)
    root = np.sqrt(1.0 - z * z)
    h = 2.0 + (
        (8.0 * z * z - 4.0) * np.arccos(z)
        - 2.0 * np.arcsin(z)
        + 4.0 * z * root**3
        - 6.0 * z * root
    ) / math.pi
    return math.pi * r * r + h / lambda_p


def matern_contrast(k_obs, r, lambda_p, R, q=0.25):
    diff = k_obs**q - matern_K(r, lambda_p, R) ** q
    return float(np.trapezoid(diff * diff, r))


def fit_matern_mincontrast(
    pattern: PointPattern,
    r_max: float | None = None,
    q_exponent: float = 0.25,
    n_grid: int = 128,
) -> FittedModel:
    """Fit (lambda_p, R) by minimising the K contrast, then lambda_c = n / (lambda_p |W|).

    Bounded Nelder-Mead in log-parameters from a fixed grid of starts.
    Flags ``boundary_hit`` when the optimum sits on a bound and ``poor_fit``
    when the fitted model barely improves on the Poisson K.
    """
    n, win = pattern.n, pattern.window
    if n < 10:
        raise FitError(f"minimum contrast needs at least 10 points, got {n}")
    bound = k_validity_bound(win)
    r_max = bound if r_max is None else float(r_max)
    if not 0 < r_max <= bound * (1 + 1e-12):
        raise ValueError(f"r_max must lie in (0, {bound}]")
    r = np.linspace(0.0, r_max, n_grid)
    k_obs = estimate_K(pattern, r).values
    if not np.any(k_obs[1:] > 0):
        raise EstimationError("empirical K is identically zero")

    lam = n / win.area
    lo = np.log([lam / 100.0, r_max / 100.0])
    hi = np.log([lam * 20.0, 2.0 * r_max])

    def f(x):
        return matern_contrast(k_obs, r, math.exp(x[0]), math.exp(x[1]), q_exponent)

    best = None
    trace = []
    for fp, fr in itertools.product((0.05, 0.2, 0.6), (0.1, 0.3, 0.8)):
        x0 = np.log([lam * fp, r_max * fr])
        res = minimize(
            f, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
            options={"xatol": 1e-6, "fatol": 1e-14, "maxiter": 4000},
        )
        trace.append({"lambda_p": float(math.exp(res.x[0])), "R": float(math.exp(res.x[1])), "objective": float(res.fun)})
        if best is None or res.fun < best.fun:
            best = res

    lambda_p, R = (float(v) for v in np.exp(best.x))
    flags = []
    if np.any(np.abs(best.x - lo) < 1e-3) or np.any(np.abs(best.x - hi) < 1e-3):
        flags.append("boundary_hit")
    poisson_contrast = float(np.trapezoid((k_obs**q_exponent - (math.pi * r * r) ** q_exponent) ** 2, r))
    if poisson_contrast <= 0 or best.fun > 0.5 * poisson_contrast or "boundary_hit" in flags:
        flags.append("poor_fit")
    model = MaternModel(lambda_p, n / (lambda_p * win.area), R)
    return FittedModel(model, float(best.fun), trace, flags, "mincontrast")


# ---------------------------------------------------------------------------


def fit_model(pattern: PointPattern, family: str, **options) -> FittedModel:
    family = {"ppp": "poisson", "phcp": "hardcore", "mcp": "matern"}.get(family.lower(), family.lower())
    if family == "poisson":
        return fit_poisson(pattern)
    if family == "matern":
        return fit_matern_mincontrast(pattern, **options)
    return fit_gibbs_mpl(pattern, family, **options)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def fitted_to_json(fm: FittedModel) -> dict:
    params = model_to_params(fm.model)
    out = {k: params.get(k) for k in PARAM_KEYS if k != "seed"}
    out.update(
        objective=fm.objective,
        method=fm.method,
        trace=fm.irregular_grid_trace,
        flags=list(fm.flags),
    )
    return _jsonable(out)


def fitted_from_json(data: dict) -> FittedModel:
    params = {k: data[k] for k in PARAM_KEYS if data.get(k) is not None}
    obj = data.get("objective")
    return FittedModel(
        model_from_params(params),
        float(obj),
        list(data.get("trace", [])),
        list(data.get("flags", [])),
        data.get("method", ""),
    )


def save_fitted(fm: FittedModel, path) -> None:
    Path(path).write_text(json.dumps(fitted_to_json(fm), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_fitted(path) -> FittedModel:
    return fitted_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
