"""Edge-corrected K, L and nearest-neighbour G estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PointPattern, Window, nearest_neighbour_distances

__all__ = [
    "SummaryCurve",
    "EstimationError",
    "default_r_grid",
    "k_validity_bound",
    "estimate_K",
    "estimate_L",
    "K_to_L",
    "estimate_G",
    "theoretical_G_poisson",
    "theoretical_K_poisson",
    "save_curve",
    "load_curve",
]


class EstimationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SummaryCurve:
    statistic: str
    r_grid: np.ndarray
    values: np.ndarray
    correction: str
    n_points: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.statistic not in ("K", "L", "G"):
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if r.shape != v.shape or r.ndim != 1:
            raise ValueError("r_grid and values must be 1-d arrays of equal length")
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "values", v)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


def k_validity_bound(window: Window) -> float:
    return min(window.width, window.height) / 4.0


def default_r_grid(window: Window, n: int = 128) -> np.ndarray:
    return np.linspace(0.0, k_validity_bound(window), n)


def _check_grid(r_grid) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) == 0:
        raise ValueError("r_grid must be a non-empty 1-d array")
    if r[0] != 0 or np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must start at 0 and be strictly increasing")
    return r


def estimate_K(pattern: PointPattern, r_grid=None, intensity: float | None = None) -> SummaryCurve:
    """Ripley's K with translation edge correction.

    K(r) = |W| / n^2 * sum_{i != j} 1[d_ij <= r] / w_ij, where
    w_ij = (width - |dx|)(height - |dy|) / |W| is the fraction of the window
    that survives the shift by z_j - z_i. Passing a known ``intensity``
    replaces n/|W|, which makes the estimator unbiased for stationary
    processes (used when checking model K formulas by simulation).
    """
    win = pattern.window
    r = _check_grid(default_r_grid(win) if r_grid is None else r_grid)
    n = pattern.n
    if n < 2:
        raise EstimationError(f"K needs at least 2 points, got {n}")
    bound = k_validity_bound(win)
    if r[-1] > bound * (1 + 1e-12):
        raise EstimationError(f"r_max={r[-1]} exceeds validity bound min(side)/4={bound}")

    xy = pattern.coords
    iu, ju = np.triu_indices(n, k=1)
    dx = np.abs(xy[iu, 0] - xy[ju, 0])
    dy = np.abs(xy[iu, 1] - xy[ju, 1])
    d = np.hypot(dx, dy)
    keep = d <= r[-1]
    d = d[keep]
    overlap = (win.width - dx[keep]) * (win.height - dy[keep])
    # each unordered pair stands for (i, j) and (j, i)
    lam2 = (n / win.area) ** 2 if intensity is None else float(intensity) ** 2
    contrib = 2.0 / (lam2 * overlap)

    order = np.argsort(d, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(contrib[order])])
    idx = np.searchsorted(d[order], r, side="right")
    return SummaryCurve("K", r, csum[idx], "translation", n)


def K_to_L(curve: SummaryCurve) -> SummaryCurve:
    if curve.statistic != "K":
        raise ValueError(f"expected a K curve, got {curve.statistic}")
    if np.any(curve.values[curve.defined] < 0):
        raise ValueError("K curve has negative values")
    return SummaryCurve(
        "L", curve.r_grid, np.sqrt(curve.values / math.pi), curve.correction, curve.n_points
    )


def estimate_L(pattern: PointPattern, r_grid=None) -> SummaryCurve:
    return K_to_L(estimate_K(pattern, r_grid))


def estimate_G(pattern: PointPattern, r_grid=None) -> SummaryCurve:
    """Reduced-sample (border corrected) nearest-neighbour distance CDF.

    At each r only points at least r from the window boundary are used.
    Grid points where no point qualifies are NaN.
    """
    win = pattern.window
    r = _check_grid(default_r_grid(win) if r_grid is None else r_grid)
    if pattern.n < 2:
        raise EstimationError(f"G needs at least 2 points, got {pattern.n}")
    nnd = nearest_neighbour_distances(pattern)
    b = win.boundary_distance(pattern.coords)

    eligible = b[None, :] >= r[:, None]
    hit = eligible & (nnd[None, :] <= r[:, None])
    denom = eligible.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(denom > 0, hit.sum(axis=1) / denom, np.nan)
    return SummaryCurve("G", r, g, "border", pattern.n)


def theoretical_G_poisson(lam: float, r):
    if lam < 0:
        raise ValueError("intensity must be >= 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    out = -np.expm1(-math.pi * lam * r * r)
    return float(out) if out.ndim == 0 else out


def theoretical_K_poisson(r):
    return math.pi * np.asarray(r, dtype=float) ** 2


def save_curve(curve: SummaryCurve, path) -> None:
    lines = [
        f"# statistic={curve.statistic} correction={curve.correction} n_points={curve.n_points}",
        "r,value,defined",
    ]
    for r, v in zip(curve.r_grid, curve.values):
        ok = not math.isnan(v)
        lines.append(f"{float(r)!r},{float(v)!r},{int(ok)}" if ok else f"{float(r)!r},nan,0")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_curve(path) -> SummaryCurve:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}:1: missing '#' metadata line")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    if lines[1:2] != ["r,value,defined"]:
        raise ValueError(f"{path}:2: expected header 'r,value,defined'")
    rs, vs = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        try:
            r, v, ok = line.split(",")
            rs.append(float(r))
            vs.append(float(v) if ok.strip() == "1" else math.nan)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
    return SummaryCurve(meta["statistic"], np.array(rs), np.array(vs), meta["correction"], int(meta["n_points"]))
