"""Point-process models: Gibbs densities, conditional intensities and samplers.

Gibbs families share one parametrisation. The Strauss density is
``beta**n * gamma**p`` with ``p`` the number of pairs at distance <= r. Geyer
caps the exponent of gamma at ``sat`` using the *total* pair count of the
pattern (not a per-point cap). The hard-core process is the ``gamma = 0``
member with ``r = hc``; for it the constraint is strict, points may sit at
exactly ``hc`` from each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numba
import numpy as np

from .core import (
    PointPattern,
    Window,
    make_rng,
    pairwise_distances,
)

__all__ = [
    "PoissonModel",
    "GibbsModel",
    "MaternModel",
    "McmcConfig",
    "Model",
    "interaction_pair_count",
    "interaction_neighbour_count",
    "unnormalized_log_density",
    "papangelou_conditional_intensity",
    "sample_poisson",
    "sample_gibbs",
    "sample_matern",
    "simulate",
    "PARAM_KEYS",
    "load_model_params",
    "save_model_params",
    "model_from_params",
    "model_to_params",
]

GIBBS_FAMILIES = ("strauss", "geyer", "hardcore")


@dataclass(frozen=True)
class PoissonModel:
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"Poisson intensity must be >= 0, got {self.lam}")

    family = "poisson"

    @property
    def intensity(self) -> float:
        return self.lam


@dataclass(frozen=True)
class GibbsModel:
    family: str
    beta: float
    gamma: float
    r: float
    sat: float | None = None
    hc: float | None = None

    def __post_init__(self):
        if self.family not in GIBBS_FAMILIES:
            raise ValueError(f"unknown Gibbs family {self.family!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"r must be > 0, got {self.r}")
        if self.family == "strauss" and self.gamma > 1:
            raise ValueError("Strauss density is integrable only for gamma <= 1")
        if self.family == "geyer":
            if self.sat is None or not self.sat >= 0:
                raise ValueError("geyer requires sat >= 0")
        if self.family == "hardcore":
            if self.hc is None or not self.hc > 0:
                raise ValueError("hardcore requires hc > 0")
            if self.gamma != 0 or self.r != self.hc:
                raise ValueError("hardcore is represented as gamma=0, r=hc")

    @classmethod
    def strauss(cls, beta: float, gamma: float, r: float) -> "GibbsModel":
        return cls("strauss", beta, gamma, r)

    @classmethod
    def geyer(cls, beta: float, gamma: float, r: float, sat: float) -> "GibbsModel":
        return cls("geyer", beta, gamma, r, sat=sat)

    @classmethod
    def hardcore(cls, beta: float, hc: float) -> "GibbsModel":
        return cls("hardcore", beta, 0.0, hc, hc=hc)

    @property
    def strict(self) -> bool:
        # hard-core forbids d < hc; Strauss/Geyer interact at d <= r
        return self.family == "hardcore"


@dataclass(frozen=True)
class MaternModel:
    lambda_p: float
    lambda_c: float
    R: float

    family = "matern"

    def __post_init__(self):
        if not (math.isfinite(self.lambda_p) and self.lambda_p > 0):
            raise ValueError(f"lambda_p must be > 0, got {self.lambda_p}")
        if not (math.isfinite(self.lambda_c) and self.lambda_c >= 0):
            raise ValueError(f"lambda_c must be >= 0, got {self.lambda_c}")
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError(f"R must be > 0, got {self.R}")

    @property
    def intensity(self) -> float:
        return self.lambda_p * self.lambda_c


Model = Union[PoissonModel, GibbsModel, MaternModel]


@dataclass(frozen=True)
class McmcConfig:
    n_steps: int = 100_000
    burn_in: int = 0
    p_birth: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 < self.p_birth < 1:
            raise ValueError("p_birth must lie in (0, 1)")


# ---------------------------------------------------------------------------
# densities and conditional intensities


def interaction_pair_count(model: GibbsModel, pattern: PointPattern) -> int:
    d = pairwise_distances(pattern)
    hits = d < model.r if model.strict else d <= model.r
    return int(np.count_nonzero(hits))


def interaction_neighbour_count(model: GibbsModel, u, pattern: PointPattern) -> int:
    if pattern.n == 0:
        return 0
    d = np.hypot(pattern.coords[:, 0] - u[0], pattern.coords[:, 1] - u[1])
    hits = d < model.r if model.strict else d <= model.r
    return int(np.count_nonzero(hits & (d > 0)))


def _gamma_term(gamma: float, m: float) -> float:
    if m == 0:
        return 0.0
    if gamma == 0:
        return -math.inf
    return m * math.log(gamma)


def unnormalized_log_density(model: GibbsModel, pattern: PointPattern) -> float:
    """log of beta**n * gamma**m without the normalising constant.

    ``m`` is the close-pair count, capped at ``sat`` for Geyer. Returns
    ``-inf`` when gamma is zero and some pair interacts.
    """
    p = interaction_pair_count(model, pattern)
    m = min(p, model.sat) if model.family == "geyer" else p
    return pattern.n * math.log(model.beta) + _gamma_term(model.gamma, m)


def papangelou_conditional_intensity(model: GibbsModel, u, pattern: PointPattern) -> float:
    t = interaction_neighbour_count(model, u, pattern)
    if model.family == "hardcore":
        return model.beta if t == 0 else 0.0
    if model.family == "strauss":
        return model.beta * model.gamma**t
    # Geyer: ratio of densities so the global cap is honoured
    p = interaction_pair_count(model, pattern)
    delta = min(p + t, model.sat) - min(p, model.sat)
    return model.beta * math.exp(_gamma_term(model.gamma, delta)) if delta else model.beta


# ---------------------------------------------------------------------------
# samplers


def _uniform_in(window: Window, rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random((n, 2))
    return np.column_stack(
        [window.x_min + u[:, 0] * window.width, window.y_min + u[:, 1] * window.height]
    )


def sample_poisson(model: PoissonModel, window: Window, seed: int) -> PointPattern:
    rng = make_rng(seed)
    n = rng.poisson(model.lam * window.area)
    return PointPattern(_uniform_in(window, rng, n), window)


@numba.njit(cache=True)
def _neighbours(xs, ys, n, x, y, skip, r2, strict):
    t = 0
    for j in range(n):
        if j == skip:
            continue
        dx = xs[j] - x
        dy = ys[j] - y
        d2 = dx * dx + dy * dy
        if strict:
            if d2 < r2:
                t += 1
        elif d2 <= r2:
            t += 1
    return t


@numba.njit(cache=True)
def _log_gamma_delta(delta, log_gamma, zero_gamma):
    if delta == 0:
        return 0.0
    if zero_gamma:
        return -np.inf if delta > 0 else np.inf
    return delta * log_gamma


@numba.njit(cache=True)
def _birth_death_kernel(
    xs0, ys0, draws, x0, y0, w, h, log_beta, log_gamma, zero_gamma, r2, strict, sat, p_birth
):
    n = xs0.shape[0]
    cap = max(16, 2 * n)
    xs = np.empty(cap)
    ys = np.empty(cap)
    xs[:n] = xs0
    ys[:n] = ys0

    # running pair count, needed for the global Geyer cap
    p = 0
    for i in range(n):
        p += _neighbours(xs, ys, i, xs[i], ys[i], -1, r2, strict)

    log_area = np.log(w * h)
    log_odds = np.log((1.0 - p_birth) / p_birth)
    geyer = sat >= 0

    for k in range(draws.shape[0]):
        u_move = draws[k, 0]
        u_a = draws[k, 1]
        u_b = draws[k, 2]
        log_acc = np.log(draws[k, 3])
        if u_move < p_birth:
            x = x0 + u_a * w
            y = y0 + u_b * h
            t = _neighbours(xs, ys, n, x, y, -1, r2, strict)
            if geyer:
                delta = min(p + t, sat) - min(p, sat)
            else:
                delta = t
            log_lam = log_beta + _log_gamma_delta(delta, log_gamma, zero_gamma)
            ratio = log_lam + log_area + log_odds - np.log(n + 1.0)
            if log_acc < ratio:
                if n == cap:
                    cap *= 2
                    nx = np.empty(cap)
                    ny = np.empty(cap)
                    nx[:n] = xs[:n]
                    ny[:n] = ys[:n]
                    xs = nx
                    ys = ny
                xs[n] = x
                ys[n] = y
                n += 1
                p += t
        elif n > 0:
            i = min(int(u_a * n), n - 1)
            t = _neighbours(xs, ys, n, xs[i], ys[i], i, r2, strict)
            if geyer:
                delta = min(p, sat) - min(p - t, sat)
            else:
                delta = t
            log_lam = log_beta + _log_gamma_delta(delta, log_gamma, zero_gamma)
            ratio = np.log(float(n)) - log_odds - log_area - log_lam
            if log_acc < ratio:
                n -= 1
                xs[i] = xs[n]
                ys[i] = ys[n]
                p -= t
    return xs[:n].copy(), ys[:n].copy()


def _inhibit(coords: np.ndarray, hc: float) -> np.ndarray:
    """Sequentially drop points closer than hc to an already kept point."""
    kept: list[int] = []
    for i, (x, y) in enumerate(coords):
        if all((x - coords[j, 0]) ** 2 + (y - coords[j, 1]) ** 2 >= hc * hc for j in kept):
            kept.append(i)
    return coords[kept]


def sample_gibbs(model: GibbsModel, window: Window, cfg: McmcConfig | None = None) -> PointPattern:
    """Metropolis-Hastings birth-death sampler; returns the final chain state.

    The chain starts from a Poisson(beta) draw (thinned to a valid state when
    gamma is zero). Each step proposes a uniform birth with probability
    ``p_birth``, otherwise the death of a uniformly chosen point.
    """
    cfg = cfg or McmcConfig()
    rng = make_rng(cfg.seed)
    n0 = rng.poisson(model.beta * window.area)
    start = _uniform_in(window, rng, n0)
    if model.gamma == 0:
        start = _inhibit(start, model.r)
    draws = rng.random((cfg.n_steps, 4))
    # log(0) must never be drawn for the acceptance uniform
    draws[:, 3] = 1.0 - draws[:, 3]

    zero_gamma = model.gamma == 0
    xs, ys = _birth_death_kernel(
        np.ascontiguousarray(start[:, 0]),
        np.ascontiguousarray(start[:, 1]),
        draws,
        window.x_min,
        window.y_min,
        window.width,
        window.height,
        math.log(model.beta),
        0.0 if zero_gamma else math.log(model.gamma),
        zero_gamma,
        model.r * model.r,
        model.strict,
        float(model.sat) if model.family == "geyer" else -1.0,
        cfg.p_birth,
    )
    return PointPattern(np.column_stack([xs, ys]), window)


def sample_matern(model: MaternModel, window: Window, seed: int) -> PointPattern:
    """Matérn cluster process; parents are drawn on the R-dilated window."""
    rng = make_rng(seed)
    outer = window.dilated(model.R)
    n_par = rng.poisson(model.lambda_p * outer.area)
    parents = _uniform_in(outer, rng, n_par)
    n_off = rng.poisson(model.lambda_c, size=n_par)
    centres = np.repeat(parents, n_off, axis=0)
    total = int(n_off.sum())
    rad = model.R * np.sqrt(rng.random(total))
    theta = 2.0 * np.pi * rng.random(total)
    pts = centres + np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
    return PointPattern(pts[window.contains(pts)], window)


def simulate(model: Model, window: Window, seed: int, mcmc: McmcConfig | None = None) -> PointPattern:
    """Draw one pattern from any supported model, fully determined by ``seed``."""
    if isinstance(model, PoissonModel):
        return sample_poisson(model, window, seed)
    if isinstance(model, MaternModel):
        return sample_matern(model, window, seed)
    if isinstance(model, GibbsModel):
        return sample_gibbs(model, window, replace(mcmc or McmcConfig(), seed=seed))
    raise TypeError(f"cannot simulate {model!r}")


# ---------------------------------------------------------------------------
# parameter files: one ``key = value`` per line, '#' starts a comment

PARAM_KEYS = ("family", "beta", "gamma", "r", "sat", "hc", "lambda", "lambda_p", "lambda_c", "R", "seed")


def _parse_number(key: str, raw: str):
    if key == "family":
        return raw
    if key == "seed":
        return int(raw)
    return float(raw)


def load_model_params(path) -> dict:
    params: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            params[key] = _parse_number(key, raw)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from None
    return params


_ALIASES = {"ppp": "poisson", "phcp": "hardcore", "mcp": "matern"}


def model_from_params(params: dict) -> Model:
    unknown = set(params) - set(PARAM_KEYS)
    if unknown:
        raise ValueError(f"unknown parameter keys {sorted(unknown)}")
    family = _ALIASES.get(str(params.get("family", "")).lower(), str(params.get("family", "")).lower())

    def need(key):
        if params.get(key) is None:
            raise ValueError(f"family {family!r} requires parameter {key!r}")
        return float(params[key])

    if family == "poisson":
        return PoissonModel(need("lambda"))
    if family == "matern":
        return MaternModel(need("lambda_p"), need("lambda_c"), need("R"))
    if family == "hardcore":
        return GibbsModel.hardcore(need("beta"), need("hc"))
    if family == "strauss":
        return GibbsModel.strauss(need("beta"), need("gamma"), need("r"))
    if family == "geyer":
        return GibbsModel.geyer(need("beta"), need("gamma"), need("r"), need("sat"))
    raise ValueError(f"unknown model family {params.get('family')!r}")


def model_to_params(model: Model) -> dict:
    if isinstance(model, PoissonModel):
        return {"family": "poisson", "lambda": model.lam}
    if isinstance(model, MaternModel):
        return {"family": "matern", "lambda_p": model.lambda_p, "lambda_c": model.lambda_c, "R": model.R}
    out = {"family": model.family, "beta": model.beta}
    if model.family == "hardcore":
        out["hc"] = model.hc
    else:
        out.update(gamma=model.gamma, r=model.r)
        if model.family == "geyer":
            out["sat"] = model.sat
    return out


def save_model_params(model: Model, path, seed: int | None = None) -> None:
    params = model_to_params(model)
    if seed is not None:
        params["seed"] = int(seed)
    text = "".join(f"{k} = {v!r}\n" if not isinstance(v, str) else f"{k} = {v}\n" for k, v in params.items())
    Path(path).write_text(text, encoding="utf-8")
