"""Command-line interface: fit, simulate, mc, and compare-samplers."""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import __version__
from .bands import PointwiseMode, extract_irf_covariance, pointwise_interval, supt_plugin, supt_quantile
from .data_model import SpecKind, build_design, load_csv
from .dgp import DgpMode, build_vma, simulate
from .errors import DataError, NumericalError
from .estimators import MomentCovKind, asymptotic_covariance, lte_geometry, muller_sandwich
from .montecarlo import (
    ExperimentConfig,
    IvConfig,
    Method,
    compare_samplers,
    run_experiment,
)
from .posteriors import FlatPrior, RoughnessPenalty
from .samplers import ChainConfig, run_ags, run_gess, run_pseudo_gibbs


class UsageError(Exception):
    """Bad flags or config values (exit code 2)."""


def _fmt(value) -> str:
    """Locale-independent shortest round-trip decimal text."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(cell) for cell in row])
    _atomic_write(path, buf.getvalue())


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    seed: int,
    inputs: list[Path],
    started: str,
    finished: str,
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "started": started,
        "finished": finished,
    }
    _atomic_write(
        out_dir / "manifest.json",
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve options as defaults < config file < explicit flags."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(loaded)
    for key in defaults:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in str(raw).split(",") if part.strip())


def _parse_spec(raw: str) -> SpecKind:
    table = {"level": SpecKind.LEVEL, "ld": SpecKind.LONG_DIFFERENCED}
    if str(raw) not in table:
        raise UsageError(f"spec must be 'level' or 'ld', got {raw!r}")
    return table[str(raw)]


def _parse_cov(kind: str, bandwidth) -> MomentCovKind:
    if kind == "standard":
        return MomentCovKind.standard()
    if kind == "newey-west":
        S = int(bandwidth) if bandwidth is not None else None
        return MomentCovKind.newey_west(S)
    raise UsageError(f"cov must be 'standard' or 'newey-west', got {kind!r}")


def _parse_methods(raw) -> tuple[Method, ...]:
    names = _split_list(raw) if isinstance(raw, str) else tuple(raw)
    out = []
    for name in names:
        try:
            out.append(Method(name))
        except ValueError:
            valid = ", ".join(m.value for m in Method)
            raise UsageError(f"unknown method {name!r} (choose from: {valid})") from None
    return tuple(out)


FIT_DEFAULTS = {
    "data": None,
    "response": None,
    "shock": None,
    "controls": "",
    "iv": "",
    "horizons": None,
    "lags": None,
    "spec": "level",
    "ld-baseline": "previous",
    "method": "lte",
    "sampler": "gess",
    "prior": "flat",
    "kappa": 100.0,
    "cov": "standard",
    "bandwidth": None,
    "iters": 6000,
    "burn-in": 1000,
    "shrink-limit": 100,
    "alpha": 0.10,
    "band-sims": 100_000,
    "seed": 0,
    "out": "fit-out",
    "save-draws": False,
}


def cmd_fit(args: argparse.Namespace) -> int:
    started = _utc_now()
    cfg = _merge_config(args, FIT_DEFAULTS)
    problems = []
    for key in ("data", "response", "shock", "horizons", "lags"):
        if cfg[key] is None:
            problems.append(f"--{key} is required")
    if cfg["method"] not in ("lte", "pseudo"):
        problems.append(f"method must be 'lte' or 'pseudo', got {cfg['method']!r}")
    if cfg["sampler"] not in ("gess", "ags"):
        problems.append(f"sampler must be 'gess' or 'ags', got {cfg['sampler']!r}")
    if cfg["prior"] not in ("flat", "rp"):
        problems.append(f"prior must be 'flat' or 'rp', got {cfg['prior']!r}")
    if problems:
        raise UsageError("; ".join(problems))

    data = load_csv(cfg["data"])
    controls = _split_list(cfg["controls"])
    iv_cols = _split_list(cfg["iv"]) or None
    spec = _parse_spec(cfg["spec"])
    H, L = int(cfg["horizons"]), int(cfg["lags"])
    design = build_design(
        data,
        response=cfg["response"],
        shock=cfg["shock"],
        controls=controls,
        iv=iv_cols,
        H=H,
        L=L,
        spec=spec,
        ld_baseline=str(cfg["ld-baseline"]),
    )
    seed = int(cfg["seed"])
    alpha = float(cfg["alpha"])
    chain_cfg = ChainConfig(
        n_iter=int(cfg["iters"]),
        burn_in=int(cfg["burn-in"]),
        seed=seed,
        shrink_limit=int(cfg["shrink-limit"]),
    )
    chain_rng, band_rng = (
        np.random.default_rng(child)
        for child in np.random.SeedSequence(seed).spawn(2)
    )
    if cfg["prior"] == "rp":
        prior = RoughnessPenalty.create(design.J, H, float(cfg["kappa"]))
    else:
        prior = FlatPrior()
    cov_kind = _parse_cov(str(cfg["cov"]), cfg["bandwidth"])

    if cfg["method"] == "lte":
        geom = lte_geometry(design, cov_kind, use_iv=design.Z is not None)
        if cfg["sampler"] == "ags":
            chain = run_ags(geom, prior, chain_cfg, rng=chain_rng)
        else:
            chain = run_gess(geom, prior, chain_cfg, rng=chain_rng)
        omega1 = extract_irf_covariance(
            asymptotic_covariance(geom), design.shock_column, design.J, H
        )
        irf_draws = chain.irf_draws(design.J)
        point = irf_draws.mean(axis=0)
        asym = pointwise_interval(
            alpha=alpha,
            mode=PointwiseMode.ASYMPTOTIC,
            theta1_hat=point,
            Omega1=omega1,
            T_eff=design.T_eff,
        )
        plugin = supt_plugin(
            omega1, point, design.T_eff, alpha, n_sim=int(cfg["band-sims"]), rng=band_rng
        )
        plugin_bounds = (plugin.sim_lower, plugin.sim_upper)
    else:
        if cfg["sampler"] == "ags":
            raise UsageError("the ags sampler applies to the lte method only")
        chain = run_pseudo_gibbs(design, prior, chain_cfg, rng=chain_rng)
        irf_draws = chain.irf_draws(design.J)
        point = irf_draws.mean(axis=0)
        sand = muller_sandwich(design, chain.mean_theta(design.J, H), cov_kind)
        z = norm.ppf(1.0 - alpha / 2.0)
        scale = np.sqrt(sand[:, design.shock_column, design.shock_column])
        asym = (point - z * scale, point + z * scale)
        plugin_bounds = None

    raw = pointwise_interval(
        alpha=alpha, mode=PointwiseMode.RAW_QUANTILES, draws1=irf_draws
    )
    quant = supt_quantile(irf_draws, alpha)

    nan = float("nan")
    header = [
        "h",
        "point",
        "pw_raw_lower",
        "pw_raw_upper",
        "pw_asym_lower",
        "pw_asym_upper",
        "supt_plugin_lower",
        "supt_plugin_upper",
        "supt_quantile_lower",
        "supt_quantile_upper",
    ]
    rows = []
    for h in range(H + 1):
        plugin_lo = plugin_bounds[0][h] if plugin_bounds is not None else nan
        plugin_hi = plugin_bounds[1][h] if plugin_bounds is not None else nan
        rows.append(
            [
                h,
                point[h],
                raw[0][h],
                raw[1][h],
                asym[0][h],
                asym[1][h],
                plugin_lo,
                plugin_hi,
                quant.sim_lower[h],
                quant.sim_upper[h],
            ]
        )
        if quant.sim_lower[h] > raw[0][h] + 1e-12 or quant.sim_upper[h] < raw[1][h] - 1e-12:
            raise NumericalError("simultaneous band fails to contain the raw interval")
        if plugin_bounds is not None and (
            plugin_lo > asym[0][h] + 1e-12 or plugin_hi < asym[1][h] - 1e-12
        ):
            raise NumericalError("simultaneous band fails to contain the asymptotic interval")

    out_dir = Path(cfg["out"])
    _write_csv(out_dir / "summary.csv", header, rows)
    if cfg["save-draws"]:
        draw_header = [f"h{d // design.J}_x{d % design.J}" for d in range(design.D)]
        _write_csv(
            out_dir / "draws.csv",
            draw_header,
            [list(row) for row in chain.draws],
        )
    resolved = dict(cfg)
    resolved["J"] = design.J
    resolved["D"] = design.D
    resolved["T_eff"] = design.T_eff
    _write_manifest(
        out_dir, "fit", resolved, seed, [Path(cfg["data"])], started, _utc_now()
    )
    return 0


SIMULATE_DEFAULTS = {
    "length": None,
    "horizons": 7,
    "lags": 7,
    "variables": 2,
    "mode": "shock-observed",
    "R": 1,
    "rho": 0.0,
    "beta": 1.0,
    "seed": 0,
    "out": "simulate-out",
}


def cmd_simulate(args: argparse.Namespace) -> int:
    started = _utc_now()
    cfg = _merge_config(args, SIMULATE_DEFAULTS)
    if cfg["length"] is None:
        raise UsageError("--length is required")
    try:
        mode = DgpMode(str(cfg["mode"]))
    except ValueError:
        raise UsageError(
            f"mode must be 'shock-observed' or 'iv', got {cfg['mode']!r}"
        ) from None
    rng = np.random.default_rng(int(cfg["seed"]))
    params = build_vma(
        int(cfg["lags"]),
        int(cfg["variables"]),
        mode,
        rng=rng,
        R=int(cfg["R"]),
        rho=float(cfg["rho"]),
        beta=float(cfg["beta"]),
    )
    sim = simulate(params, int(cfg["length"]), int(cfg["horizons"]), rng=rng)

    out_dir = Path(cfg["out"])
    _write_csv(
        out_dir / "data.csv",
        list(sim.data.names),
        [list(row) for row in sim.data.values],
    )
    truth_rows = [["irf", l, params.irf[l]] for l in range(params.L + 1)]
    truth_rows += [["eps1", t, sim.eps1[t]] for t in range(sim.eps1.size)]
    _write_csv(out_dir / "truth.csv", ["series", "index", "value"], truth_rows)
    _write_manifest(
        out_dir, "simulate", dict(cfg), int(cfg["seed"]), [], started, _utc_now()
    )
    return 0


MC_DEFAULTS = {
    "T": "500",
    "spec": "ld",
    "methods": "pseudo-raw,pseudo-sand,lte-raw,lte-sand",
    "horizons": 7,
    "lags": 7,
    "variables": 2,
    "n-reps": 200,
    "cov": "standard",
    "bandwidth": None,
    "iv": False,
    "R": 1,
    "rho": 0.0,
    "beta": 1.0,
    "prior": "flat",
    "kappa": 100.0,
    "alpha": 0.10,
    "iters": 6000,
    "burn-in": 1000,
    "band-sims": 100_000,
    "gamma-star": None,
    "response-scale": 1.0,
    "seed": 0,
    "threads": None,
    "out": "mc-out",
}

_METRIC_ORDER = (
    "bias",
    "mae",
    "length",
    "p_coverage",
    "s_coverage_plugin",
    "s_coverage_quantile",
    "min_ess_per_iter",
    "min_ess_per_sec",
    "n_reps",
    "n_failed",
)


def _resolve_threads(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("QBLP_THREADS", "").strip()
    return int(env) if env else 1


def _experiment_config(cfg: dict, T: int, spec: SpecKind) -> ExperimentConfig:
    methods = _parse_methods(cfg["methods"])
    iv = (
        IvConfig(R=int(cfg["R"]), rho=float(cfg["rho"]), beta=float(cfg["beta"]))
        if cfg["iv"]
        else None
    )
    return ExperimentConfig(
        T=T,
        spec=spec,
        methods=methods,
        H=int(cfg["horizons"]),
        L=int(cfg["lags"]),
        M=int(cfg["variables"]),
        n_reps=int(cfg["n-reps"]),
        cov_kind=_parse_cov(str(cfg["cov"]), cfg["bandwidth"]),
        iv=iv,
        alpha=float(cfg["alpha"]),
        chain=ChainConfig(
            n_iter=int(cfg["iters"]), burn_in=int(cfg["burn-in"]), seed=int(cfg["seed"])
        ),
        seed=int(cfg["seed"]),
        workers=_resolve_threads(cfg["threads"]),
        prior=str(cfg["prior"]),
        kappa=float(cfg["kappa"]),
        band_n_sim=int(cfg["band-sims"]),
        gamma_star=None if cfg["gamma-star"] is None else float(cfg["gamma-star"]),
        response_scale=float(cfg["response-scale"]),
    )


def cmd_mc(args: argparse.Namespace) -> int:
    started = _utc_now()
    cfg = _merge_config(args, MC_DEFAULTS)
    problems = []
    try:
        T_values = [int(t) for t in _split_list(str(cfg["T"]))]
    except ValueError:
        problems.append(f"T must be a comma list of integers, got {cfg['T']!r}")
        T_values = []
    spec_names = _split_list(str(cfg["spec"]))
    specs = []
    for name in spec_names:
        try:
            specs.append(_parse_spec(name))
        except UsageError as exc:
            problems.append(str(exc))
    try:
        _parse_methods(cfg["methods"])
    except UsageError as exc:
        problems.append(str(exc))
    if not T_values:
        problems.append("at least one T value is required")
    if not specs:
        problems.append("at least one spec is required")
    if problems:
        raise UsageError("; ".join(problems))

    H = int(cfg["horizons"])
    header = ["T", "spec", "method", "metric"] + [f"h{h}" for h in range(H + 1)]
    rows = []
    out_dir = Path(cfg["out"])
    for T in T_values:
        for spec in specs:
            tables = run_experiment(_experiment_config(cfg, T, spec))
            for method, table in tables.items():
                horizon = table.horizon_metrics()
                scalars = table.scalar_metrics()
                for metric in _METRIC_ORDER:
                    if metric in horizon:
                        values = list(horizon[metric])
                    elif metric in ("n_reps", "n_failed"):
                        values = [int(scalars[metric])] + [""] * H
                    else:
                        values = [scalars[metric]] + [""] * H
                    rows.append([T, spec.value, method.value, metric] + values)
    _write_csv(out_dir / "metrics.csv", header, rows)
    _write_manifest(out_dir, "mc", dict(cfg), int(cfg["seed"]), [], started, _utc_now())
    return 0


COMPARE_DEFAULTS = {
    "T": 500,
    "spec": "ld",
    "horizons": 7,
    "lags": 7,
    "variables": 2,
    "cov": "standard",
    "bandwidth": None,
    "kappa": 100.0,
    "gamma-star": None,
    "response-scale": 1.0,
    "iters": 50_000,
    "burn-in": 10_000,
    "gess-factor": 20,
    "seed": 0,
    "out": "compare-out",
}


def cmd_compare(args: argparse.Namespace) -> int:
    started = _utc_now()
    cfg = _merge_config(args, COMPARE_DEFAULTS)
    spec = _parse_spec(str(cfg["spec"]))
    H = int(cfg["horizons"])
    exp_cfg = ExperimentConfig(
        T=int(cfg["T"]),
        spec=spec,
        methods=(Method.LTE_RAW,),
        H=H,
        L=int(cfg["lags"]),
        M=int(cfg["variables"]),
        n_reps=1,
        cov_kind=_parse_cov(str(cfg["cov"]), cfg["bandwidth"]),
        chain=ChainConfig(
            n_iter=int(cfg["iters"]), burn_in=int(cfg["burn-in"]), seed=int(cfg["seed"])
        ),
        seed=int(cfg["seed"]),
        prior="rp",
        kappa=float(cfg["kappa"]),
        gamma_star=None if cfg["gamma-star"] is None else float(cfg["gamma-star"]),
        response_scale=float(cfg["response-scale"]),
    )
    report = compare_samplers(exp_cfg, gess_factor=int(cfg["gess-factor"]))
    header = ["metric"] + [f"h{h}" for h in range(H + 1)]
    blank = [""] * H
    rows = [
        ["ks"] + list(report.ks),
        ["max_ks", report.max_ks] + blank,
        ["gess_ess_per_iter", report.gess_ess_per_iter] + blank,
        ["ags_ess_per_iter", report.ags_ess_per_iter] + blank,
        ["gess_ess_per_sec", report.gess_ess_per_sec] + blank,
        ["ags_ess_per_sec", report.ags_ess_per_sec] + blank,
        ["gess_draws", report.gess_draws] + blank,
        ["ags_draws", report.ags_draws] + blank,
    ]
    out_dir = Path(cfg["out"])
    _write_csv(out_dir / "comparison.csv", header, rows)
    _write_manifest(
        out_dir, "compare-samplers", dict(cfg), int(cfg["seed"]), [], started, _utc_now()
    )
    return 0


# options whose default is None but whose values must still parse as numbers
_INT_OPTIONS = {"horizons", "lags", "bandwidth", "length", "threads"}
_FLOAT_OPTIONS = {"gamma-star"}


def _add_option(parser: argparse.ArgumentParser, key: str, default) -> None:
    flag = f"--{key}"
    if isinstance(default, bool):
        parser.add_argument(flag, action="store_true", default=None)
    elif isinstance(default, int) and not isinstance(default, bool):
        parser.add_argument(flag, type=int, default=None)
    elif isinstance(default, float):
        parser.add_argument(flag, type=float, default=None)
    elif default is None and key in _INT_OPTIONS:
        parser.add_argument(flag, type=int, default=None)
    elif default is None and key in _FLOAT_OPTIONS:
        parser.add_argument(flag, type=float, default=None)
    else:
        parser.add_argument(flag, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qblp",
        description="Quasi-Bayesian local projections: fit, simulate, and replicate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults, func in (
        ("fit", FIT_DEFAULTS, cmd_fit),
        ("simulate", SIMULATE_DEFAULTS, cmd_simulate),
        ("mc", MC_DEFAULTS, cmd_mc),
        ("compare-samplers", COMPARE_DEFAULTS, cmd_compare),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON file of option values")
        for key, default in defaults.items():
            _add_option(p, key, default)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
