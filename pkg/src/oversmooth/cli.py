"""Command-line interface: ``oversmooth {rates,solve,kfun,denoise,filters}``."""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import CONFIG_KEYS, ExperimentConfig, Grid, Signal, dump_config, load_config, sample
from .exceptions import InvalidParameterError, OversmoothError
from .estimators import TVDenoiser, WaveletShrinkage
from .experiments import ERROR_COLUMNS, NoiseModel, emit_results, prepare, run_rate_experiment, simulate_noise
from .interpolation import k_curve
from .norms import SeqNormSpec
from .param_choice import apriori_stochastic
from .solver import minimize_tikhonov
from .wavelet import WaveletSpec, analyze_function, daubechies_filter, filter_residuals

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_FLAGGED = 0, 2, 3, 4, 5
COLUMN_LABELS = {"err_l2": "L2", "err_lpbar": "Lpbar", "err_bminus": "Bminus"}


def _config_epilog() -> str:
    width = max(len(k) for k in CONFIG_KEYS)
    lines = ["config keys (flat 'key = value' file, '#' comments):"]
    lines += [f"  {k.ljust(width)}  {v}" for k, v in CONFIG_KEYS.items()]
    lines.append("environment: OVERSMOOTH_OUT sets the default output directory")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oversmooth", description="Tikhonov regularization with oversmoothing Besov and BV penalties.",
        epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config file")
    common.add_argument("--out", type=Path, default=None, help="output directory (default $OVERSMOOTH_OUT or ./runs)")
    common.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="only print the summary")
    sub = parser.add_subparsers(dest="command", metavar="{rates,solve,kfun,denoise,filters}")

    sub.add_parser("rates", parents=[common], help="Monte Carlo rate experiment",
                   epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)

    p = sub.add_parser("solve", parents=[common], help="one Tikhonov solve on the elliptic problem")
    p.add_argument("--data", type=Path, help="observed data, one value per line (default: simulate)")
    p.add_argument("--sigma-tilde", type=float, default=1e-3, help="noise level for simulated data")
    p.add_argument("--alpha", type=float, help="regularization parameter (default: a-priori rule)")

    p = sub.add_parser("kfun", parents=[common], help="K-functional of the truth over a t grid")
    p.add_argument("--t-min", type=float, default=1e-6)
    p.add_argument("--t-max", type=float, default=1e2)
    p.add_argument("--count", type=int, default=41)

    p = sub.add_parser("denoise", parents=[common], help="F = I shortcut: wavelet shrinkage or TV denoising")
    p.add_argument("--input", type=Path, help="noisy samples, one per line (default: simulate)")
    p.add_argument("--method", choices=("wavelet", "block", "tv"), default="wavelet")
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--r", type=float, default=1.0, help="level smoothness of the wavelet threshold")
    p.add_argument("--n", type=int, default=1024, help="grid size for simulated input")
    p.add_argument("--sigma-tilde", type=float, default=0.1)

    p = sub.add_parser("filters", help="print Daubechies filters and their verification residuals")
    p.add_argument("--order", type=int, action="append", help="filter order (repeatable; default 1..10)")
    return parser


def _out_dir(args, cfg_text: str, command: str) -> Path:
    root = args.out or Path(os.environ.get("OVERSMOOTH_OUT", "runs"))
    digest = hashlib.sha256(cfg_text.encode()).hexdigest()[:10]
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S%f")
    path = root / f"{command}-{digest}-{stamp}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def _load(args) -> ExperimentConfig:
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
    except OSError as exc:
        raise InvalidParameterError(("config", str(exc))) from exc
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _say(args, msg):
    if not getattr(args, "quiet", False):
        print(msg, flush=True)


def _read_vector(path: Path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


def cmd_rates(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, dump_config(cfg), "rates")
    (out / "config.cfg").write_text(dump_config(cfg))
    workers = args.workers or os.cpu_count() or 1
    table = run_rate_experiment(cfg, workers=workers, progress=lambda m: _say(args, m))
    paths = emit_results(table, out, column=cfg.error_column)
    fits = table.fits()
    meta = {k: v for k, v in table.meta.items()}
    meta["fits"] = {k: {"slope": s, "stderr": e} for k, (s, e) in fits.items()}
    (out / "summary.json").write_text(json.dumps(meta, indent=2, default=float))
    for col in ERROR_COLUMNS:
        slope, err = fits[col]
        print(f"slope({COLUMN_LABELS[col]})={slope:.4f} +- {err:.4f}")
    print(f"c_alpha={table.meta.get('c_alpha')} rows={len(table)} flagged={table.flagged}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK if table.flagged == 0 else EXIT_FLAGGED


def cmd_solve(args) -> int:
    cfg = _load(args)
    setup = prepare(cfg)
    if args.data:
        values = _read_vector(args.data)
        if values.size != cfg.n:
            raise InvalidParameterError(("data", f"expected {cfg.n} values, got {values.size}"))
    else:
        noise = simulate_noise(NoiseModel(args.sigma_tilde, cfg.n, cfg.seed, (0, 0)))
        values = setup.exact + noise.values
    alpha = args.alpha
    if alpha is None:
        c = cfg.c_alpha if cfg.c_alpha is not None else 1.0
        alpha = apriori_stochastic(args.sigma_tilde / math.sqrt(cfg.n), setup.smoothness, cfg.penalty.u, c)
    w = None if cfg.penalty.kind == "bv-1d" else setup.wavelet
    report = minimize_tikhonov(setup.op, Signal(setup.grid, values), alpha, cfg.penalty, w, setup.solver_opts)
    out = _out_dir(args, dump_config(cfg) + repr(alpha), "solve")
    np.savetxt(out / "minimizer.txt", np.column_stack([setup.grid.nodes, report.estimate]),
               header="x estimate", fmt="%.17g")
    err = float(np.sqrt(setup.grid.h * np.sum((report.estimate - setup.truth.values) ** 2)))
    info = {"alpha": alpha, "residual": report.residual, "objective": report.objective,
            "iterations": list(report.iterations), "converged": report.converged, "status": report.status,
            "err_l2": err}
    (out / "report.json").write_text(json.dumps(info, indent=2))
    print(f"alpha={alpha:.4g} residual={report.residual:.4g} err_l2={err:.4g} status={report.status}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_kfun(args) -> int:
    cfg = _load(args)
    grid = Grid(cfg.n)
    f = analyze_function(sample(cfg.truth, grid), WaveletSpec(cfg.wavelet_order))
    minus = SeqNormSpec(-cfg.smoothness.a, 2.0, 2.0)
    r_spec = SeqNormSpec(cfg.penalty.r, cfg.penalty.p, cfg.penalty.q)
    t = np.logspace(math.log10(args.t_min), math.log10(args.t_max), args.count)
    k = k_curve(f, t, minus, r_spec)
    out = _out_dir(args, dump_config(cfg), "kfun")
    path = out / "kfunctional.csv"
    with path.open("w") as fh:
        fh.write("t,K\n")
        for a, b in zip(t, k):
            fh.write(f"{a!r},{b!r}\n")
    _say(args, "\n".join(f"{a:.4e} {b:.6e}" for a, b in zip(t, k)))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    if args.input:
        values = _read_vector(args.input)
    else:
        grid = Grid(args.n)
        noise = simulate_noise(NoiseModel(args.sigma_tilde, args.n, args.seed or 0))
        values = sample("jump", grid).values + noise.values
    X = values[None, :]
    if args.method == "tv":
        est = TVDenoiser(alpha=args.alpha).fit(X)
    else:
        est = WaveletShrinkage(alpha=args.alpha, r=args.r, mode="soft" if args.method == "wavelet" else "block").fit(X)
    denoised = est.transform(X)[0]
    out = _out_dir(args, f"{args.method}{args.alpha}{args.r}", "denoise")
    np.savetxt(out / "denoised.txt", np.column_stack([values, denoised]), header="noisy denoised", fmt="%.17g")
    print(f"method={args.method} alpha={args.alpha:.4g} wrote {out / 'denoised.txt'}")
    return EXIT_OK


def cmd_filters(args) -> int:
    for order in args.order or range(1, 11):
        h = daubechies_filter(order)
        res = filter_residuals(h)
        print(f"db{order}: ({', '.join(f'{v:.10f}' for v in h)})")
        print("  residuals: " + ", ".join(f"{k}={v:.2e}" for k, v in res.items()))
    return EXIT_OK


COMMANDS = {"rates": cmd_rates, "solve": cmd_solve, "kfun": cmd_kfun, "denoise": cmd_denoise,
            "filters": cmd_filters}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OversmoothError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"runtime error [{module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
