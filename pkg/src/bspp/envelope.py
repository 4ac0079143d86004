"""Pointwise Monte Carlo envelopes and the inside/rejected test."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .core import PointPattern, Window, derive_seed
from .fit import FittedModel
from .netperf import EmpiricalCdf, NetworkConfig, coverage_distribution, voronoi_areas
from .procsim import McmcConfig, Model, simulate
from .sumstats import SummaryCurve, default_r_grid, estimate_G, estimate_L

__all__ = [
    "STATISTICS",
    "StatisticOptions",
    "Envelope",
    "TestReport",
    "GridMismatchError",
    "EnvelopeError",
    "data_statistic",
    "build_envelopes",
    "build_envelope",
    "envelope_from_values",
    "envelope_test",
    "save_envelope",
    "load_envelope",
    "report_to_json",
    "save_report",
    "load_report",
]

STATISTICS = ("L", "G", "SIR-CDF", "Voronoi-CDF")
CURVE_STATS = ("L", "G")


class EnvelopeError(RuntimeError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class StatisticOptions:
    """How each statistic is evaluated on a pattern.

    ``r_grid`` defaults to 128 points on [0, min(side)/4]. CDF statistics
    are compared on ``n_cdf_grid`` pooled quantiles of the simulated values.
    """

    r_grid: tuple | None = None
    net: NetworkConfig = field(default_factory=NetworkConfig)
    grid_res: int = 256
    n_cdf_grid: int = 100

    def grid_for(self, window: Window) -> np.ndarray:
        return default_r_grid(window) if self.r_grid is None else np.asarray(self.r_grid, dtype=float)


@dataclass(frozen=True, eq=False)
class Envelope:
    statistic: str
    grid: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    M: int
    k_drop: int
    master_seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def defined(self) -> np.ndarray:
        return ~(np.isnan(self.lo) | np.isnan(self.hi))


@dataclass
class TestReport:
    __test__ = False

    verdict: str
    exceedances: list
    fraction_outside: float
    statistic: str = ""
    M: int = 0
    k_drop: int = 0
    seed: int | None = None

    @property
    def inside(self) -> bool:
        return self.verdict == "inside"


def _check_stat(name: str) -> str:
    if name not in STATISTICS:
        raise ValueError(f"unknown statistic {name!r}; expected one of {STATISTICS}")
    return name


def _feasible(pattern: PointPattern, statistics) -> bool:
    need = max(2 if s in ("L", "G", "SIR-CDF") else 1 for s in statistics)
    return pattern.n >= need


def _raw(pattern: PointPattern, stat: str, opts: StatisticOptions, sir_seed: int):
    """Curve values on the r grid, or the raw sample behind a CDF statistic."""
    if stat == "L":
        return estimate_L(pattern, opts.grid_for(pattern.window)).values
    if stat == "G":
        return estimate_G(pattern, opts.grid_for(pattern.window)).values
    if stat == "SIR-CDF":
        return coverage_distribution(pattern, replace(opts.net, seed=sir_seed)).values
    return np.sort(voronoi_areas(pattern, opts.grid_res))


def data_statistic(pattern: PointPattern, stat: str, opts: StatisticOptions | None = None):
    """The observed pattern's statistic as a SummaryCurve or EmpiricalCdf."""
    opts = opts or StatisticOptions()
    _check_stat(stat)
    r = opts.grid_for(pattern.window)
    if stat == "L":
        return estimate_L(pattern, r)
    if stat == "G":
        return estimate_G(pattern, r)
    if stat == "SIR-CDF":
        return coverage_distribution(pattern, opts.net)
    return EmpiricalCdf(voronoi_areas(pattern, opts.grid_res), "Voronoi-CDF", {"grid_res": opts.grid_res})


def _realization(model, window, statistics, opts, mcmc, master_seed, index, max_attempts):
    for attempt in range(max_attempts):
        pat = simulate(model, window, derive_seed(master_seed, index, attempt, 0), mcmc)
        if _feasible(pat, statistics):
            sir_seed = derive_seed(master_seed, index, attempt, 1)
            return attempt + 1, {s: _raw(pat, s, opts, sir_seed) for s in statistics}
    return max_attempts, None


def envelope_from_values(values, grid, k_drop: int, statistic: str = "", **kw) -> Envelope:
    """Rank-trimmed band from an (M, len(grid)) array of statistic values.

    lo is the (k_drop+1)-th smallest value per grid point and hi the
    (k_drop+1)-th largest. Grid points where any realisation is NaN are NaN.
    """
    values = np.asarray(values, dtype=float)
    M = values.shape[0]
    if not M > 2 * k_drop:
        raise ValueError(f"need M > 2*k_drop, got M={M}, k_drop={k_drop}")
    s = np.sort(values, axis=0)
    lo, hi = s[k_drop].copy(), s[M - 1 - k_drop].copy()
    undefined = np.isnan(values).any(axis=0)
    lo[undefined] = np.nan
    hi[undefined] = np.nan
    return Envelope(statistic, np.asarray(grid, dtype=float), lo, hi, M, k_drop, **kw)


def _cdf_grid(samples, n_grid):
    pooled = np.concatenate(samples)
    return np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, n_grid)))


def build_envelopes(
    model: Model | FittedModel,
    statistics,
    window: Window,
    M: int = 600,
    k_drop: int = 30,
    master_seed: int = 0,
    opts: StatisticOptions | None = None,
    mcmc: McmcConfig | None = None,
    n_jobs: int = 1,
) -> dict[str, Envelope]:
    """Simulate M patterns once and build an envelope for each statistic.

    Realisation i uses seeds derived from (master_seed, i, attempt); a draw
    that cannot support a statistic (too few points) is redrawn, at most
    3*M attempts in total. The output does not depend on ``n_jobs``.
    """
    if isinstance(model, FittedModel):
        model = model.model
    statistics = [_check_stat(s) for s in statistics]
    if not statistics:
        raise ValueError("no statistics requested")
    if not M > 2 * k_drop or k_drop < 0:
        raise ValueError(f"need M > 2*k_drop >= 0, got M={M}, k_drop={k_drop}")
    opts = opts or StatisticOptions()
    cap = 3 * M

    args = [(model, window, statistics, opts, mcmc, master_seed, i, cap) for i in range(M)]
    if n_jobs == 1:
        results = [_realization(*a) for a in args]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_realization)(*a) for a in args)
    attempts = sum(a for a, _ in results)
    if attempts > cap or any(r is None for _, r in results):
        raise EnvelopeError(f"more than {cap} simulation attempts needed for {M} usable realisations")

    out = {}
    for stat in statistics:
        raws = [r[stat] for _, r in results]
        meta = {"attempts": attempts}
        if stat in CURVE_STATS:
            grid = opts.grid_for(window)
            vals = np.vstack(raws)
        else:
            grid = _cdf_grid(raws, opts.n_cdf_grid)
            vals = np.vstack([np.searchsorted(x, grid, side="right") / len(x) for x in raws])
        out[stat] = envelope_from_values(vals, grid, k_drop, stat, master_seed=master_seed, meta=meta)
    return out


def build_envelope(model, statistic: str, M: int = 600, k_drop: int = 30, grid=None, master_seed: int = 0,
                   window: Window | None = None, opts: StatisticOptions | None = None,
                   mcmc: McmcConfig | None = None, n_jobs: int = 1) -> Envelope:
    """Single-statistic form of :func:`build_envelopes`; ``grid`` overrides the r grid."""
    opts = opts or StatisticOptions()
    if grid is not None:
        opts = replace(opts, r_grid=tuple(np.asarray(grid, dtype=float)))
    window = window or Window.unit()
    return build_envelopes(model, [statistic], window, M, k_drop, master_seed, opts, mcmc, n_jobs)[statistic]


def _data_values(data, env: Envelope) -> np.ndarray:
    if isinstance(data, SummaryCurve):
        if env.statistic and data.statistic != env.statistic:
            raise GridMismatchError(f"data is {data.statistic}, envelope is {env.statistic}")
        if data.r_grid.shape != env.grid.shape or not np.array_equal(data.r_grid, env.grid):
            raise GridMismatchError("data curve and envelope use different r grids")
        return data.values
    if isinstance(data, EmpiricalCdf):
        if env.statistic and data.statistic and data.statistic != env.statistic:
            raise GridMismatchError(f"data is {data.statistic}, envelope is {env.statistic}")
        return np.asarray(data(env.grid), dtype=float)
    vals = np.asarray(data, dtype=float)
    if vals.shape != env.grid.shape:
        raise GridMismatchError(f"data has {vals.shape} values, envelope grid has {env.grid.shape}")
    return vals


def _runs(mask):
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), ends.tolist()))


def envelope_test(data, env: Envelope) -> TestReport:
    """Inside iff lo <= data <= hi at every grid point where both are defined."""
    y = _data_values(data, env)
    ok = env.defined & ~np.isnan(y)
    above = ok & (y > env.hi)
    below = ok & (y < env.lo)
    exc = []
    for direction, mask in (("above", above), ("below", below)):
        for a, b in _runs(mask):
            exc.append({
                "direction": direction,
                "start": float(env.grid[a]),
                "end": float(env.grid[b]),
                "i_start": a,
                "i_end": b,
            })
    exc.sort(key=lambda e: e["i_start"])
    n_ok = int(ok.sum())
    frac = float((above | below).sum() / n_ok) if n_ok else 0.0
    return TestReport(
        "rejected" if exc else "inside", exc, frac, env.statistic, env.M, env.k_drop, env.master_seed
    )


def _fmt(v) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def save_envelope(env: Envelope, path, data=None) -> None:
    y = None if data is None else _data_values(data, env)
    lines = [
        f"# statistic={env.statistic} M={env.M} k_drop={env.k_drop} seed={env.master_seed}",
        "grid,lo,hi,data" if y is not None else "grid,lo,hi",
    ]
    for i, g in enumerate(env.grid):
        row = [_fmt(g), _fmt(env.lo[i]), _fmt(env.hi[i])]
        if y is not None:
            row.append(_fmt(y[i]))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_envelope(path):
    """Returns (Envelope, data values or None)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        meta = dict(t.split("=", 1) for t in lines[0][1:].split())
        lines = lines[1:]
    header = lines[0].split(",")
    if header[:3] != ["grid", "lo", "hi"] or header[3:] not in ([], ["data"]):
        raise ValueError(f"{path}: expected header 'grid,lo,hi[,data]'")
    arr = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float).reshape(-1, len(header))
    seed = meta.get("seed", "None")
    env = Envelope(
        meta.get("statistic", ""),
        arr[:, 0],
        arr[:, 1],
        arr[:, 2],
        int(meta.get("M", 0)),
        int(meta.get("k_drop", 0)),
        None if seed == "None" else int(seed),
    )
    return env, (arr[:, 3] if len(header) == 4 else None)


def report_to_json(rep: TestReport) -> dict:
    return {
        "verdict": rep.verdict,
        "exceedances": rep.exceedances,
        "fraction_outside": rep.fraction_outside,
        "statistic": rep.statistic,
        "M": rep.M,
        "k_drop": rep.k_drop,
        "seed": rep.seed,
    }


def save_report(rep: TestReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_json(rep), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> TestReport:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return TestReport(d["verdict"], d["exceedances"], d["fraction_outside"], d.get("statistic", ""),
                      d.get("M", 0), d.get("k_drop", 0), d.get("seed"))
