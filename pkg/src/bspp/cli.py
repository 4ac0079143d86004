"""Command-line driver: simulate, fit, stats, netperf, envelope, pipeline.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
The default output directory is taken from $BSPP_OUTPUT_DIR (else the cwd).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .core import PatternFormatError, Window, derive_seed, load_pattern, save_pattern
from .envelope import (
    STATISTICS,
    EnvelopeError,
    StatisticOptions,
    build_envelopes,
    data_statistic,
    envelope_test,
    report_to_json,
    save_envelope,
    save_report,
)
from .fit import FitError, fit_model, fitted_to_json, load_fitted, save_fitted
from .netperf import NetworkConfig, coverage_distribution, save_cdf, voronoi_area_distribution
from .procsim import McmcConfig, load_model_params, model_from_params, simulate
from .sumstats import EstimationError, K_to_L, estimate_G, estimate_K, save_curve

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
OUTPUT_ENV = "BSPP_OUTPUT_DIR"
FAMILIES = ("poisson", "hardcore", "strauss", "geyer", "matern")
_FAMILY_ALIASES = {"ppp": "poisson", "phcp": "hardcore", "mcp": "matern"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def canonical_family(name: str) -> str:
    fam = _FAMILY_ALIASES.get(name.strip().lower(), name.strip().lower())
    if fam not in FAMILIES:
        raise UsageError(f"unknown model family {name!r}")
    return fam


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineConfig:
    pattern: str = ""
    families: tuple = ("poisson", "strauss")
    statistics: tuple = ("L",)
    M: int = 600
    k_drop: int = 30
    master_seed: int = 0
    out_dir: str = ""
    n_jobs: int = 1
    n_r: int = 128
    r_max: float | None = None
    n_users: int = 2000
    path_loss_exp: float = 4.0
    association: str = "max_sir"
    grid_res: int = 256
    n_cdf_grid: int = 100
    n_steps: int = 100_000
    dummy_resolution: int = 32

    def validate(self) -> "PipelineConfig":
        if not self.pattern:
            raise UsageError("pipeline needs a pattern file")
        if not Path(self.pattern).is_file():
            raise UsageError(f"pattern file not found: {self.pattern}")
        if not self.statistics:
            raise UsageError("statistics list is empty")
        bad = [s for s in self.statistics if s not in STATISTICS]
        if bad:
            raise UsageError(f"unknown statistics {bad}; choose from {list(STATISTICS)}")
        if not self.families:
            raise UsageError("families list is empty")
        self.families = tuple(canonical_family(f) for f in self.families)
        if not self.M > 2 * self.k_drop >= 0:
            raise UsageError("need M > 2*k_drop >= 0")
        return self


_LIST_KEYS = ("families", "statistics")


def _coerce(name: str, raw):
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in kinds:
        raise UsageError(f"unknown config key {name!r}")
    if name in _LIST_KEYS:
        items = raw.split(",") if isinstance(raw, str) else list(raw)
        return tuple(s.strip() for s in items if s.strip())
    if name == "r_max":
        return None if raw in (None, "", "None") else float(raw)
    kind = kinds[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None
    return str(raw)


def load_pipeline_config(path) -> PipelineConfig:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        values[k] = _coerce(k, v)
    return PipelineConfig(**values)


def _options(cfg: PipelineConfig, window: Window, seed: int) -> StatisticOptions:
    r_max = cfg.r_max if cfg.r_max is not None else min(window.width, window.height) / 4
    net = NetworkConfig(
        path_loss_exp=cfg.path_loss_exp, n_users=cfg.n_users, seed=seed, association=cfg.association
    )
    return StatisticOptions(
        r_grid=tuple(np.linspace(0.0, r_max, cfg.n_r)),
        net=net,
        grid_res=cfg.grid_res,
        n_cdf_grid=cfg.n_cdf_grid,
    )


def _fit_options(cfg: PipelineConfig, family: str) -> dict:
    if family in ("strauss", "geyer", "hardcore"):
        return {"dummy_resolution": cfg.dummy_resolution}
    return {}


def run_pipeline(cfg: PipelineConfig, log=print) -> dict:
    """Fit every candidate, envelope every statistic, write artifacts and a summary.

    A failure inside one family marks that row as ``error`` and the run
    continues. The returned summary has ``ok`` False when any row failed.
    """
    cfg.validate()
    pattern = load_pattern(cfg.pattern)
    out = Path(cfg.out_dir or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    window = pattern.window
    data_opts = _options(cfg, window, derive_seed(cfg.master_seed, 0))
    mcmc = McmcConfig(n_steps=cfg.n_steps)

    data_curves = {s: data_statistic(pattern, s, data_opts) for s in cfg.statistics}
    rows = {}
    for fam in cfg.families:
        fam_dir = out / fam
        fam_dir.mkdir(exist_ok=True)
        row = {"verdicts": {}, "flags": []}
        try:
            fm = fit_model(pattern, fam, **_fit_options(cfg, fam))
            save_fitted(fm, fam_dir / "model.json")
            row["model"] = fitted_to_json(fm)
            row["flags"] = list(fm.flags)
            seed = derive_seed(cfg.master_seed, 1, FAMILIES.index(fam))
            envs = build_envelopes(
                fm, cfg.statistics, window, cfg.M, cfg.k_drop, seed, data_opts, mcmc, cfg.n_jobs
            )
            for stat in cfg.statistics:
                env = envs[stat]
                rep = envelope_test(data_curves[stat], env)
                save_envelope(env, fam_dir / f"envelope_{stat}.csv", data=data_curves[stat])
                save_report(rep, fam_dir / f"report_{stat}.json")
                row["verdicts"][stat] = rep.verdict
                row.setdefault("fraction_outside", {})[stat] = rep.fraction_outside
            log(f"{fam}: " + ", ".join(f"{s}={v}" for s, v in row["verdicts"].items()))
        except (FitError, EstimationError, EnvelopeError, ValueError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            log(f"{fam}: failed ({row['error']})")
        rows[fam] = row

    summary = {
        "pattern": str(cfg.pattern),
        "n_points": pattern.n,
        "statistics": list(cfg.statistics),
        "M": cfg.M,
        "k_drop": cfg.k_drop,
        "master_seed": cfg.master_seed,
        "rows": rows,
        "ok": all("error" not in r for r in rows.values()),
    }
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    (out / "summary.txt").write_text(format_summary(summary), encoding="utf-8")
    return summary


def format_summary(summary: dict) -> str:
    stats = summary["statistics"]
    width = max(12, *(len(s) + 2 for s in stats))
    lines = ["model".ljust(10) + "".join(s.ljust(width) for s in stats)]
    for fam, row in summary["rows"].items():
        if "error" in row:
            cells = ["error".ljust(width)] * len(stats)
        else:
            cells = [row["verdicts"].get(s, "-").ljust(width) for s in stats]
        lines.append(fam.ljust(10) + "".join(cells))
    return "\n".join(line.rstrip() for line in lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _model_from_args(args):
    params = load_model_params(args.params) if args.params else {}
    for key in ("family", "beta", "gamma", "r", "sat", "hc", "lambda_p", "lambda_c", "R"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.lam is not None:
        params["lambda"] = args.lam
    if "family" not in params:
        raise UsageError("model family is required (--family or --params)")
    try:
        return model_from_params(params), params.get("seed")
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    model, file_seed = _model_from_args(args)
    seed = args.seed if args.seed is not None else (file_seed or 0)
    window = Window(*args.window)
    pattern = simulate(model, window, seed, McmcConfig(n_steps=args.n_steps))
    out = Path(args.out) if args.out else default_out_dir() / f"simulated_{model.family}_{seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_pattern(pattern, out)
    print(pattern.n)
    return EXIT_OK


def cmd_fit(args) -> int:
    pattern = load_pattern(args.pattern)
    fam = canonical_family(args.family)
    opts = {}
    if fam in ("strauss", "geyer", "hardcore"):
        opts["dummy_resolution"] = args.dummy_resolution
        grid = {}
        if args.r_grid:
            grid["r"] = args.r_grid
        if args.sat_grid:
            grid["sat"] = args.sat_grid
        if grid:
            opts["irregular_grid"] = grid
    elif fam == "matern":
        opts.update(r_max=args.r_max, q_exponent=args.q)
    fm = fit_model(pattern, fam, **opts)
    out = Path(args.out) if args.out else default_out_dir() / f"fit_{fam}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_fitted(fm, out)
    sys.stdout.write(_dump(fitted_to_json(fm)))
    for flag in fm.flags:
        print(f"warning: fit flagged {flag}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    pattern = load_pattern(args.pattern)
    r_max = args.r_max if args.r_max is not None else min(pattern.window.width, pattern.window.height) / 4
    r = np.linspace(0.0, r_max, args.n_r)
    if args.statistic == "G":
        curve = estimate_G(pattern, r)
    else:
        curve = estimate_K(pattern, r)
        if args.statistic == "L":
            curve = K_to_L(curve)
    out = Path(args.out) if args.out else default_out_dir() / f"{args.statistic}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_curve(curve, out)
    print(out)
    return EXIT_OK


def cmd_netperf(args) -> int:
    pattern = load_pattern(args.pattern)
    if args.statistic == "SIR-CDF":
        cfg = NetworkConfig(path_loss_exp=args.alpha, n_users=args.n_users, seed=args.seed, association=args.association)
        cdf = coverage_distribution(pattern, cfg)
    else:
        cdf = voronoi_area_distribution(pattern, grid_res=args.grid_res)
    out = Path(args.out) if args.out else default_out_dir() / f"{args.statistic}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_cdf(cdf, out)
    print(out)
    return EXIT_OK


def cmd_envelope(args) -> int:
    pattern = load_pattern(args.pattern)
    if args.model:
        model = load_fitted(args.model).model
    elif args.params:
        try:
            model = model_from_params(load_model_params(args.params))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("envelope needs --model (fitted JSON) or --params")
    cfg = PipelineConfig(
        n_r=args.n_r, n_users=args.n_users, grid_res=args.grid_res, n_steps=args.n_steps
    )
    opts = _options(cfg, pattern.window, derive_seed(args.seed, 0))
    env = build_envelopes(
        model, [args.statistic], pattern.window, args.M, args.k_drop, derive_seed(args.seed, 1),
        opts, McmcConfig(n_steps=args.n_steps), args.jobs,
    )[args.statistic]
    data = data_statistic(pattern, args.statistic, opts)
    rep = envelope_test(data, env)
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    save_envelope(env, out / f"envelope_{args.statistic}.csv", data=data)
    save_report(rep, out / f"report_{args.statistic}.json")
    sys.stdout.write(_dump(report_to_json(rep)))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
    overrides = {
        "pattern": args.pattern,
        "families": args.families,
        "statistics": args.statistics,
        "M": args.M,
        "k_drop": args.k_drop,
        "master_seed": args.seed,
        "out_dir": args.out_dir,
        "n_jobs": args.jobs,
        "n_users": args.n_users,
        "n_steps": args.n_steps,
    }
    cfg = replace(cfg, **{k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    summary = run_pipeline(cfg)
    sys.stdout.write(format_summary(summary))
    return EXIT_OK if summary["ok"] else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bspp", description="Point-process models of base-station deployments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw one pattern from a model")
    s.add_argument("--params", help="flat key = value model file")
    s.add_argument("--family")
    for key in ("beta", "gamma", "r", "sat", "hc"):
        s.add_argument(f"--{key}", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--lambda-p", dest="lambda_p", type=float)
    s.add_argument("--lambda-c", dest="lambda_c", type=float)
    s.add_argument("--R", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--window", type=float, nargs=4, default=[0.0, 1.0, 0.0, 1.0],
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    s.add_argument("--n-steps", type=int, default=100_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a model family to a pattern")
    f.add_argument("pattern")
    f.add_argument("--family", required=True)
    f.add_argument("--r-grid", type=float, nargs="+")
    f.add_argument("--sat-grid", type=float, nargs="+")
    f.add_argument("--dummy-resolution", type=int, default=32)
    f.add_argument("--r-max", type=float)
    f.add_argument("--q", type=float, default=0.25)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    st = sub.add_parser("stats", help="K, L or G curve of a pattern")
    st.add_argument("pattern")
    st.add_argument("--statistic", choices=("K", "L", "G"), default="L")
    st.add_argument("--n-r", type=int, default=128)
    st.add_argument("--r-max", type=float)
    st.add_argument("--out")
    st.set_defaults(func=cmd_stats)

    n = sub.add_parser("netperf", help="SIR or Voronoi-area distribution")
    n.add_argument("pattern")
    n.add_argument("--statistic", choices=("SIR-CDF", "Voronoi-CDF"), default="SIR-CDF")
    n.add_argument("--n-users", type=int, default=2000)
    n.add_argument("--alpha", type=float, default=4.0)
    n.add_argument("--association", choices=("max_sir", "nearest"), default="max_sir")
    n.add_argument("--grid-res", type=int, default=256)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out")
    n.set_defaults(func=cmd_netperf)

    e = sub.add_parser("envelope", help="envelope test of a pattern against a model")
    e.add_argument("pattern")
    e.add_argument("--model", help="fitted-model JSON")
    e.add_argument("--params", help="flat key = value model file")
    e.add_argument("--statistic", choices=STATISTICS, default="L")
    e.add_argument("--M", type=int, default=600)
    e.add_argument("--k-drop", type=int, default=30)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--n-r", type=int, default=128)
    e.add_argument("--n-users", type=int, default=2000)
    e.add_argument("--grid-res", type=int, default=256)
    e.add_argument("--n-steps", type=int, default=100_000)
    e.add_argument("--out-dir")
    e.set_defaults(func=cmd_envelope)

    pl = sub.add_parser("pipeline", help="fit candidates and envelope-test them")
    pl.add_argument("--config", help="flat key = value pipeline config")
    pl.add_argument("--pattern")
    pl.add_argument("--families")
    pl.add_argument("--statistics")
    pl.add_argument("--M", type=int)
    pl.add_argument("--k-drop", type=int)
    pl.add_argument("--seed", type=int)
    pl.add_argument("--jobs", type=int)
    pl.add_argument("--n-users", type=int)
    pl.add_argument("--n-steps", type=int)
    pl.add_argument("--out-dir")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bspp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PatternFormatError) as exc:
        print(f"bspp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, EstimationError, EnvelopeError, np.linalg.LinAlgError) as exc:
        print(f"bspp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"bspp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
