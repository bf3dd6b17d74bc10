"""Command-line front end: ``crib-bse {sweep,validate,simulate,estimate}``.

Exit codes: 0 success, 1 a validation suite failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sweep as sweep_mod
from . import validate as validate_mod
from .errors import CribError, InvalidConfig
from .fim import MODELS, crib_model
from .ggd import GgdParams
from .mle import FitOptions, ThetaCvx, fit
from .simulate import (
    empirical_isr,
    equivariant_config,
    generate,
    load_dataset,
    random_config,
    save_dataset,
    trial_seed,
)

log = logging.getLogger("crib_bse")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig("config", f"cannot read {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InvalidConfig("config", "top level must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _merged(args, names) -> dict:
    """Config-file values overridden by explicitly given flags."""
    out = _load_config(getattr(args, "config", None))
    unknown = set(out) - set(names)
    if unknown:
        raise InvalidConfig(sorted(unknown)[0], "unknown config key")
    for n in names:
        v = getattr(args, n, None)
        if v is not None:
            out[n] = v
    return out


def _parse_grid(text):
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    if len(parts) != 3:
        raise InvalidConfig("grid", f"expected min:max:points, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InvalidConfig("grid", f"expected min:max:points, got {text!r}") from None


def _parse_models(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(m.strip() for m in str(text).split(",") if m.strip())


# -- sweep -----------------------------------------------------------------------

SWEEP_KEYS = ("preset", "d", "N", "T", "alpha", "gamma", "tau", "schedule", "models", "axis", "grid", "spacing", "out", "format", "gnuplot")


def build_sweep_spec(cfg: dict) -> sweep_mod.SweepSpec:
    preset = cfg.get("preset")
    if preset is not None:
        if preset not in sweep_mod.PRESETS:
            raise InvalidConfig("preset", f"unknown preset {preset!r}; choose from {', '.join(sweep_mod.PRESETS)}")
        spec = sweep_mod.PRESETS[preset]
    else:
        spec = sweep_mod.SweepSpec()
    kw = {}
    for k in ("d", "N", "T", "alpha", "gamma", "tau", "schedule", "axis", "spacing"):
        if k in cfg:
            kw[k] = cfg[k]
    if "models" in cfg:
        kw["models"] = _parse_models(cfg["models"])
    if "grid" in cfg:
        kw["grid_min"], kw["grid_max"], kw["points"] = _parse_grid(cfg["grid"])
    spec = replace(spec, **kw)
    return spec.validate()


def cmd_sweep(args) -> int:
    cfg = _merged(args, SWEEP_KEYS)
    spec = build_sweep_spec(cfg)
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise InvalidConfig("format", f"must be csv or json, got {fmt!r}")
    rows = sweep_mod.run_sweep(spec)
    text = sweep_mod.rows_to_csv(rows) if fmt == "csv" else sweep_mod.rows_to_json(rows)
    out = cfg.get("out")
    if out is None:
        sys.stdout.write(text)
        return EXIT_OK
    out = Path(out)
    out.write_text(text)
    if cfg.get("gnuplot"):
        if fmt != "csv":
            raise InvalidConfig("gnuplot", "script emission needs --format csv")
        out.with_suffix(".gp").write_text(sweep_mod.gnuplot_script(out.name, spec, title=cfg.get("preset")))
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    return EXIT_OK


# -- validate --------------------------------------------------------------------


def cmd_validate(args) -> int:
    names = list(validate_mod.SUITES) if args.suite == "all" else [args.suite]
    reports = [validate_mod.run_suite(n) for n in names]
    text = validate_mod.report_json(reports)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for r in reports:
        print(f"{r.suite}: {'PASS' if r.passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# -- simulate --------------------------------------------------------------------

SIM_KEYS = ("d", "N", "T", "alpha", "gamma", "tau", "schedule", "seed", "geometry", "out", "format")


def build_mixture_config(cfg: dict):
    d = int(cfg.get("d", 5))
    N = int(cfg.get("N", 5000))
    T = int(cfg.get("T", 10))
    if d < 2:
        raise InvalidConfig("d", f"need at least 2 sensors, got {d}")
    if T < 1:
        raise InvalidConfig("T", f"need at least one block, got {T}")
    if N < 1 or N % T:
        raise InvalidConfig("N", f"N={N} is not divisible by T={T}")
    if cfg.get("schedule", "linear") != "linear":
        raise InvalidConfig("schedule", "only 'linear' is supported")
    try:
        ggd = GgdParams(cfg.get("alpha", 1.0), cfg.get("gamma", 0.0))
    except CribError as exc:
        raise InvalidConfig("alpha" if "alpha" in str(exc) else "gamma", str(exc)) from None
    tau = float(cfg.get("tau", 0.0))
    if not 0.0 <= tau <= 1.0:
        raise InvalidConfig("tau", f"must lie in [0, 1], got {tau}")
    seed = int(cfg.get("seed", 0))
    geometry = cfg.get("geometry", "equivariant")
    if geometry == "equivariant":
        return equivariant_config(d, N, T, ggd, tau, seed=seed)
    if geometry == "random":
        return random_config(d, N, T, ggd, tau, seed=seed)
    raise InvalidConfig("geometry", f"must be equivariant or random, got {geometry!r}")


def cmd_simulate(args) -> int:
    cfg = _merged(args, SIM_KEYS)
    config = build_mixture_config(cfg)
    fmt = cfg.get("format", "bin")
    if fmt not in ("bin", "json"):
        raise InvalidConfig("format", f"must be bin or json, got {fmt!r}")
    if cfg.get("out") is None:
        raise InvalidConfig("out", "an output path is required")
    data = generate(config)
    save_dataset(data, config, cfg["out"], fmt)
    print(f"d={config.d} N={config.N} T={config.T} N_b={config.Nb} seed={config.seed}")
    print("block  lambda    sigma")
    for t, (lam, sig) in enumerate(zip(config.schedule.lam, config.sigma), start=1):
        print(f"{t:5d}  {lam:.6f}  {sig:.6f}")
    return EXIT_OK


# -- estimate --------------------------------------------------------------------


def _true_theta(config) -> ThetaCvx:
    return ThetaCvx(config.path.a_first[1:], config.path.a_last[1:], config.w.h)


def _fit_one(data, config, opts: FitOptions, init: str, crib: float) -> dict:
    Cz = config.background_cov
    theta0 = _true_theta(config) if init == "oracle" else (ThetaCvx.zeros(config.d) if init == "zero" else None)
    res = fit(data, config.ggd, config.sigma, Cz, opts, config.schedule, init=theta0)
    isr = empirical_isr(data, res.theta.separator, config)
    return {
        "seed": config.seed,
        "theta": {k: [[float(c.real), float(c.imag)] for c in getattr(res.theta, k)] for k in ("g1", "gT", "h")},
        "loglik": res.loglik,
        "iterations": res.iterations,
        "converged": res.converged,
        "status": res.status,
        "isr": isr,
        "isr_over_crib": isr / crib if math.isfinite(crib) and crib > 0 else None,
        "oracle_isr": empirical_isr(data, config.w, config),
    }


def cmd_estimate(args) -> int:
    try:
        data, config = load_dataset(args.dataset)
    except (OSError, ValueError, KeyError, CribError) as exc:
        raise InvalidConfig("dataset", f"cannot parse {args.dataset}: {exc}") from None
    try:
        opts = FitOptions(
            max_iters=args.max_iters,
            restarts=args.restarts,
            seed=args.seed,
            estimate_cz=args.estimate_cz,
        )
    except ValueError as exc:
        raise InvalidConfig("options", str(exc)) from None
    bound = crib_model("CvxCSV", config.d, config.N, config.T, config.schedule, config.ggd, config.tau)
    report = {
        "dataset": str(args.dataset),
        "d": config.d,
        "N": config.N,
        "T": config.T,
        "crib": bound.isr if bound.identifiable else None,
        "crib_db": bound.isr_db if bound.identifiable else None,
        "identifiable": bound.identifiable,
        "warning": None if bound.identifiable else "model is not identifiable for this source; the CRIB is infinite",
    }
    if args.batch:
        # trial k re-simulates with seed ^ k and restarts from its own stream
        def run(k):
            cfg = config.with_seed(trial_seed(config.seed, k))
            trial_opts = replace(opts, seed=trial_seed(opts.seed, k))
            return _fit_one(generate(cfg), cfg, trial_opts, args.init, bound.isr)

        with ThreadPoolExecutor(max_workers=sweep_mod.max_threads()) as pool:
            runs = list(pool.map(run, range(args.batch)))
        isrs = np.array([r["isr"] for r in runs])
        report["runs"] = runs
        report["median_isr"] = float(np.median(isrs))
        report["median_isr_over_crib"] = float(np.median(isrs) / bound.isr) if bound.identifiable else None
    else:
        report.update(_fit_one(data, config, opts, args.init, bound.isr))
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def _add_model_flags(p, with_schedule=True):
    p.add_argument("--d", type=int, help="number of sensors (default 5)")
    p.add_argument("--N", type=int, help="number of samples (default 5000)")
    p.add_argument("--T", type=int, help="number of blocks (default 10)")
    p.add_argument("--alpha", type=float, help="GGD shape")
    p.add_argument("--gamma", type=float, help="GGD circularity in [0, 1)")
    p.add_argument("--tau", type=float, help="stationarity level in [0, 1]")
    if with_schedule:
        p.add_argument("--schedule", choices=["linear"], help="blending schedule")
    p.add_argument("--config", help="JSON file with the same keys as the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crib-bse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="CRIB sweeps over alpha, gamma or tau")
    _add_model_flags(p)
    p.add_argument("--preset", help="chart1 | chart2 | chart3")
    p.add_argument("--models", help="comma-separated subset of " + ",".join(m.lower() for m in MODELS))
    p.add_argument("--axis", help="alpha | gamma | tau")
    p.add_argument("--grid", help="min:max:points")
    p.add_argument("--spacing", help="linear | log")
    p.add_argument("--out")
    p.add_argument("--format", help="csv | json")
    p.add_argument("--gnuplot", action="store_const", const=True, help="also write a gnuplot script next to --out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run oracle self-checks")
    p.add_argument("suite", choices=list(validate_mod.SUITES) + ["all"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="generate a dynamic mixture")
    _add_model_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--geometry", help="equivariant | random")
    p.add_argument("--out")
    p.add_argument("--format", help="bin | json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit the ML extractor to a dataset")
    p.add_argument("dataset")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=2000, help="0 evaluates the initial point only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["random", "zero", "oracle"], default="random")
    p.add_argument("--batch", type=int, default=0, help="re-simulate and fit this many seeds of the recorded truth")
    p.add_argument("--estimate-cz", action="store_true", help="estimate background covariances from the data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"crib-bse: invalid {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CribError as exc:
        print(f"crib-bse: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
