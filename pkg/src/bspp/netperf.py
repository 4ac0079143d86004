"""SIR coverage and Voronoi cell-area statistics for a base-station pattern."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .core import PointPattern, Window, make_rng

__all__ = [
    "NetworkConfig",
    "EmpiricalCdf",
    "sir_realization",
    "sir_batch",
    "coverage_distribution",
    "voronoi_areas",
    "voronoi_area_distribution",
    "save_cdf",
    "load_cdf",
]

DIST_FLOOR = 1e-6
USER_BLOCK = 4096


@dataclass(frozen=True)
class NetworkConfig:
    """Radio parameters for SIR evaluation.

    ``tx_power`` is a scalar (same power for every BS) or one value per BS.
    ``association`` is ``"max_sir"`` (instantaneous best SIR including fading)
    or ``"nearest"``.
    """

    tx_power: float | tuple = 1.0
    path_loss_exp: float = 4.0
    n_users: int = 2000
    seed: int = 0
    association: str = "max_sir"

    def __post_init__(self):
        if not self.path_loss_exp > 2:
            raise ValueError("path_loss_exp must exceed 2")
        if np.any(np.asarray(self.tx_power, dtype=float) <= 0):
            raise ValueError("tx_power must be positive")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.association not in ("max_sir", "nearest"):
            raise ValueError(f"unknown association rule {self.association!r}")

    def powers(self, n: int) -> np.ndarray:
        p = np.asarray(self.tx_power, dtype=float)
        if p.ndim == 0:
            return np.full(n, float(p))
        if p.shape != (n,):
            raise ValueError(f"tx_power has {p.size} entries for {n} base stations")
        return p


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous empirical distribution function of a sample."""

    values: np.ndarray
    statistic: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return len(self.values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.values, x, side="right") / self.n
        return float(out) if out.ndim == 0 else out

    def coverage(self, threshold):
        """P(value > threshold)."""
        return 1.0 - self(threshold)


def _sir_core(users, bs, power, fading, alpha, association):
    d = np.hypot(users[:, None, 0] - bs[None, :, 0], users[:, None, 1] - bs[None, :, 1])
    floored = d < DIST_FLOOR
    s = power[None, :] * fading * np.maximum(d, DIST_FLOOR) ** (-alpha)
    # SIR_y = S_y / (total - S_y) is increasing in S_y, so max-SIR serves the largest S
    pick = s.argmax(axis=1) if association == "max_sir" else d.argmin(axis=1)
    rows = np.arange(len(s))
    serve = s[rows, pick].copy()
    # sum the interferers directly: total - serve cancels badly when serve dominates
    s[rows, pick] = 0.0
    return serve / s.sum(axis=1), int(floored.any(axis=1).sum())


def sir_batch(users, bs, power, fading, alpha=4.0, association="max_sir"):
    """Linear SIR for each user row; fading has shape (n_users, n_bs)."""
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    return _sir_core(users, np.asarray(bs, dtype=float), power, fading, alpha, association)[0]


def sir_realization(user, pattern: PointPattern, cfg: NetworkConfig, fading) -> float:
    """SIR at ``user`` for one fading draw per BS under the configured association."""
    n = pattern.n
    if n < 2:
        raise ValueError(f"SIR needs at least 2 base stations, got {n}")
    fading = np.asarray(fading, dtype=float).reshape(1, n)
    if np.any(fading <= 0):
        raise ValueError("fading values must be positive")
    users = np.asarray(user, dtype=float).reshape(1, 2)
    sir, floored = _sir_core(users, pattern.coords, cfg.powers(n), fading, cfg.path_loss_exp, cfg.association)
    if floored:
        warnings.warn(f"user within {DIST_FLOOR} of a base station; distance floored", stacklevel=2)
    return float(sir[0])


def coverage_distribution(pattern: PointPattern, cfg: NetworkConfig, users=None) -> EmpiricalCdf:
    """Empirical CDF of SIR in dB over uniform users and exponential fading.

    Users and fading are drawn in fixed blocks of 4096 users, block ``b``
    using stream ``(cfg.seed, b)``, so the result does not depend on how the
    work is split. ``users`` fixes the user locations (one fading draw each).
    """
    n = pattern.n
    if n < 2:
        raise ValueError(f"SIR needs at least 2 base stations, got {n}")
    win = pattern.window
    power = cfg.powers(n)
    fixed = None if users is None else np.asarray(users, dtype=float).reshape(-1, 2)
    total = cfg.n_users if fixed is None else len(fixed)

    out = np.empty(total)
    n_floored = 0
    for b, start in enumerate(range(0, total, USER_BLOCK)):
        m = min(USER_BLOCK, total - start)
        rng = make_rng(cfg.seed, b)
        if fixed is None:
            u = rng.random((m, 2))
            ub = np.column_stack([win.x_min + u[:, 0] * win.width, win.y_min + u[:, 1] * win.height])
        else:
            ub = fixed[start : start + m]
        fading = rng.standard_exponential((m, n))
        sir, fl = _sir_core(ub, pattern.coords, power, fading, cfg.path_loss_exp, cfg.association)
        out[start : start + m] = sir
        n_floored += fl

    meta = {
        "n_users": total,
        "fading_draws_per_user": 1,
        "association": cfg.association,
        "floored_users": n_floored,
    }
    return EmpiricalCdf(10.0 * np.log10(out), "SIR-CDF", meta)


@numba.njit(cache=True)
def _assign_lattice(bx, by, x0, y0, dx, dy, res):
    counts = np.zeros(bx.shape[0], dtype=np.int64)
    for j in range(res):
        y = y0 + (j + 0.5) * dy
        for i in range(res):
            x = x0 + (i + 0.5) * dx
            best = 0
            bd = (bx[0] - x) ** 2 + (by[0] - y) ** 2
            for k in range(1, bx.shape[0]):
                d = (bx[k] - x) ** 2 + (by[k] - y) ** 2
                if d < bd:  # strict: ties go to the lowest index
                    bd = d
                    best = k
            counts[best] += 1
    return counts


def voronoi_areas(pattern: PointPattern, grid_res: int = 256, window: Window | None = None) -> np.ndarray:
    """Voronoi cell areas, clipped to the window, by nearest-BS lattice assignment."""
    win = window or pattern.window
    if pattern.n < 1:
        raise ValueError("Voronoi areas need at least one point")
    if grid_res < 1:
        raise ValueError("grid_res must be positive")
    xy = pattern.coords
    counts = _assign_lattice(
        np.ascontiguousarray(xy[:, 0]),
        np.ascontiguousarray(xy[:, 1]),
        win.x_min,
        win.y_min,
        win.width / grid_res,
        win.height / grid_res,
        int(grid_res),
    )
    return counts * (win.area / (grid_res * grid_res))


def voronoi_area_distribution(pattern: PointPattern, window: Window | None = None, grid_res: int = 256) -> EmpiricalCdf:
    if grid_res < 256:
        raise ValueError("grid_res must be >= 256")
    areas = voronoi_areas(pattern, grid_res, window)
    return EmpiricalCdf(areas, "Voronoi-CDF", {"grid_res": grid_res})


def save_cdf(cdf: EmpiricalCdf, path) -> None:
    lines = [f"# statistic={cdf.statistic or 'unknown'}", "value,cdf"]
    k = np.arange(1, cdf.n + 1) / cdf.n
    lines += [f"{float(v)!r},{float(c)!r}" for v, c in zip(cdf.values, k)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_cdf(path) -> EmpiricalCdf:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    stat = ""
    if lines and lines[0].startswith("#"):
        stat = dict(t.split("=", 1) for t in lines[0][1:].split()).get("statistic", "")
        lines = lines[1:]
    if lines[:1] != ["value,cdf"]:
        raise ValueError(f"{path}: expected header 'value,cdf'")
    vals = []
    for lineno, line in enumerate(lines[1:], start=3):
        try:
            vals.append(float(line.split(",")[0]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
    return EmpiricalCdf(np.array(vals), stat)
