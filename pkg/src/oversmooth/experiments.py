"""Monte Carlo convergence-rate experiments for the elliptic coefficient problem."""
from __future__ import annotations

import csv
import math
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import RHS, ExperimentConfig, Grid, PenaltySpec, Signal, SmoothnessSpec, sample, validate_config
from .exceptions import InsufficientDataError, InvalidParameterError, OversmoothError
from .interpolation import rho_from_grid
from .norms import SeqNormSpec, besov_error_norm, lp_norm
from .operators import EllipticOperator
from .param_choice import apriori_deterministic, apriori_stochastic, discrepancy_search
from .solver import SolverOptions, minimize_tikhonov
from .wavelet import WaveletSpec, analyze_function

CSV_COLUMNS = ("sigma_tilde", "rep", "alpha", "residual", "err_l2", "err_lpbar", "err_bminus",
               "penalty_value", "flag")
ERROR_COLUMNS = ("err_l2", "err_lpbar", "err_bminus")
CALIBRATION_GRID = tuple(10.0 ** np.arange(-3.0, 3.0 + 1e-9, 0.25))
CALIBRATION_REPS = 3
CALIBRATION_KEY = 7919  # spawn-key tag that keeps pilot draws apart from the main run


@dataclass(frozen=True)
class NoiseModel:
    """iid ``N(0, sigma_tilde^2)`` sample noise; ``sigma = sigma_tilde / sqrt(n)`` is the white-noise level."""

    sigma_tilde: float
    n: int
    seed: int = 0
    spawn_key: tuple = ()

    def __post_init__(self):
        if not self.sigma_tilde >= 0:
            raise InvalidParameterError(("sigma_tilde", "must be nonnegative"))
        if not self.n >= 1:
            raise InvalidParameterError(("n", "must be positive"))

    @property
    def sigma(self) -> float:
        return self.sigma_tilde / math.sqrt(self.n)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))


def simulate_noise(model: NoiseModel) -> Signal:
    values = model.rng().standard_normal(model.n) * model.sigma_tilde
    return Signal(Grid(model.n), values)


# ---------------------------------------------------------------------------
# tables

@dataclass(frozen=True)
class RateRow:
    sigma_tilde: float
    rep: int
    alpha: float
    residual: float
    err_l2: float
    err_lpbar: float
    err_bminus: float
    penalty_value: float
    flag: str = ""


@dataclass
class RateTable:
    """Rows ordered by (noise index, repetition) plus run metadata."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def valid_rows(self):
        return [r for r in self.rows if not r.flag]

    @property
    def flagged(self) -> int:
        return len(self.rows) - len(self.valid_rows())

    def summary(self, column: str = "err_l2") -> dict:
        """Per-noise-level ``sigma``, ``mean``, ``std`` (ddof=1) and ``count`` over unflagged rows."""
        if column not in ERROR_COLUMNS + ("alpha", "residual", "penalty_value"):
            raise InvalidParameterError(("column", f"unknown column {column!r}"))
        levels = sorted({r.sigma_tilde for r in self.rows})
        out = {"sigma": [], "mean": [], "std": [], "count": []}
        for s in levels:
            vals = np.array([getattr(r, column) for r in self.valid_rows() if r.sigma_tilde == s])
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            out["sigma"].append(s)
            out["mean"].append(float(np.mean(vals)))
            out["std"].append(float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0)
            out["count"].append(int(vals.size))
        return {k: np.asarray(v) for k, v in out.items()}

    def fits(self) -> dict:
        result = {}
        for col in ERROR_COLUMNS:
            try:
                result[col] = fit_rate(self, col)
            except InsufficientDataError:
                result[col] = (float("nan"), float("nan"))
        return result


def fit_rate(table: RateTable, column: str = "err_l2") -> tuple:
    """Least-squares slope of ``log(mean error)`` against ``log(sigma_tilde)`` and its standard error."""
    summ = table.summary(column)
    ok = summ["mean"] > 0
    if ok.sum() < 4:
        raise InsufficientDataError(f"need at least 4 noise levels with valid rows, have {int(ok.sum())}")
    x, y = np.log(summ["sigma"][ok]), np.log(summ["mean"][ok])
    if np.ptp(y) == 0:
        return 0.0, 0.0
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


# ---------------------------------------------------------------------------
# experiment

@dataclass
class ExperimentSetup:
    cfg: ExperimentConfig
    grid: Grid
    op: EllipticOperator
    truth: Signal
    exact: np.ndarray
    wavelet: WaveletSpec
    smoothness: SmoothnessSpec
    minus: SeqNormSpec
    pbar: float
    solver_opts: SolverOptions
    c_alpha: Optional[float] = None


def truth_rho(truth: Signal, smoothness: SmoothnessSpec, penalty: PenaltySpec, w: WaveletSpec,
              t_grid=None) -> float:
    """Oracle budget ``rho = max_t t^{-theta} K(t, truth)`` for ``(b^{-a}_{2,2}, b^r_{p,q})``."""
    t_grid = np.logspace(-6, 3, 37) if t_grid is None else t_grid
    f = analyze_function(truth, w)
    minus = SeqNormSpec(-smoothness.a, 2.0, 2.0, smoothness.d)
    r_spec = SeqNormSpec(penalty.r, penalty.p, penalty.q, smoothness.d)
    return rho_from_grid(f, smoothness.theta, t_grid, minus, r_spec)


def prepare(cfg: ExperimentConfig) -> ExperimentSetup:
    cfg = validate_config(cfg)
    grid = Grid(cfg.n)
    truth = sample(cfg.truth, grid)
    op = EllipticOperator(sample(cfg.rhs, grid, RHS))
    w = WaveletSpec(cfg.wavelet_order)
    sm = replace(cfg.smoothness, p=cfg.penalty.p)
    if cfg.rho_auto and cfg.penalty.kind != "bv-1d":
        sm = sm.with_rho(truth_rho(truth, sm, cfg.penalty, w))
    opts = SolverOptions(max_outer=cfg.gn_max_iter, max_inner=cfg.fista_max_iter, inner_tol=cfg.fista_tol)
    return ExperimentSetup(cfg, grid, op, truth, op.apply(truth.values), w, sm,
                           SeqNormSpec(-sm.a, 2.0, 2.0, sm.d), sm.pbar, opts, cfg.c_alpha)


def _alpha_for(setup: ExperimentSetup, sigma_tilde: float, c: float) -> float:
    cfg, sm = setup.cfg, setup.smoothness
    if cfg.rule == "apriori-stoch":
        return apriori_stochastic(sigma_tilde / math.sqrt(cfg.n), sm, cfg.penalty.u, c)
    return apriori_deterministic(sigma_tilde, sm, cfg.penalty.u, c)


def run_row(setup: ExperimentSetup, sigma_tilde: float, rep: int, spawn_key: tuple,
            c_alpha: Optional[float] = None, alpha_sigma: Optional[float] = None) -> RateRow:
    """One data set: simulate, choose alpha, solve, measure.

    ``alpha_sigma`` overrides the noise level fed to the a-priori rule (used
    for noiseless sanity rows).
    """
    cfg = setup.cfg
    c = setup.c_alpha if c_alpha is None else c_alpha
    noise = simulate_noise(NoiseModel(sigma_tilde, cfg.n, cfg.seed, spawn_key))
    g_obs = Signal(setup.grid, setup.exact + noise.values)
    w = None if cfg.penalty.kind == "bv-1d" else setup.wavelet
    nan = float("nan")
    try:
        if cfg.rule == "discrepancy":
            alpha, rep_ = discrepancy_search(setup.op, g_obs, sigma_tilde, cfg.c_D, cfg.C_D,
                                             cfg.penalty, w, setup.solver_opts)
        else:
            if c is None:
                raise InvalidParameterError(("c_alpha", "not calibrated"))
            alpha = _alpha_for(setup, sigma_tilde if alpha_sigma is None else alpha_sigma, c)
            rep_ = minimize_tikhonov(setup.op, g_obs, alpha, cfg.penalty, w, setup.solver_opts)
    except (OversmoothError, ValueError, ArithmeticError, RuntimeError) as exc:
        return RateRow(sigma_tilde, rep, nan, nan, nan, nan, nan, nan, f"{type(exc).__name__}")
    diff = Signal(setup.grid, rep_.estimate - setup.truth.values)
    return RateRow(
        float(sigma_tilde), int(rep), float(alpha), float(rep_.residual),
        lp_norm(diff, 2.0), lp_norm(diff, setup.pbar), besov_error_norm(diff, setup.minus, setup.wavelet),
        float(rep_.penalty_value), "")


def calibrate_c_alpha(setup: ExperimentSetup, grid: Sequence[float] = CALIBRATION_GRID,
                      reps: int = CALIBRATION_REPS, column: Optional[str] = None,
                      progress: Optional[Callable] = None) -> tuple:
    """Pick ``c_alpha`` minimizing the mean pilot error at the median noise level.

    Returns ``(c_alpha, errors)`` with one mean error per grid value.
    """
    column = column or setup.cfg.error_column
    sig = float(np.exp(np.median(np.log(setup.cfg.noise_grid))))
    errors = []
    for k, c in enumerate(grid):
        vals = [getattr(run_row(setup, sig, r, (CALIBRATION_KEY, r), c_alpha=c), column) for r in range(reps)]
        errors.append(float(np.mean(vals)) if np.all(np.isfinite(vals)) else float("inf"))
        if progress:
            progress(f"calibration c_alpha={c:.3g} error={errors[-1]:.5g}")
    best = int(np.argmin(errors))
    return float(grid[best]), errors


_WORKER_SETUP: Optional[ExperimentSetup] = None


def _init_worker(setup):
    global _WORKER_SETUP
    _WORKER_SETUP = setup


def _work(args):
    i, rep, sig = args
    return run_row(_WORKER_SETUP, sig, rep, (i, rep))


def run_rate_experiment(cfg: ExperimentConfig, workers: int = 1,
                        progress: Optional[Callable] = None) -> RateTable:
    """Full sweep over the noise grid; deterministic given ``cfg.seed``.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int
        Worker processes for the rows; results do not depend on it.
    progress : callable, optional
        Receives one human-readable line per finished row.
    """
    setup = prepare(cfg)
    meta = {"rho": setup.smoothness.rho, "theta": setup.smoothness.theta, "pbar": setup.pbar}
    if cfg.rule != "discrepancy" and setup.c_alpha is None:
        setup.c_alpha, cal = calibrate_c_alpha(setup, progress=progress)
        meta["calibration"] = cal
    meta["c_alpha"] = setup.c_alpha
    tasks = [(i, rep, float(s)) for i, s in enumerate(cfg.noise_grid) for rep in range(cfg.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(setup,)) as pool:
            rows = list(pool.map(_work, tasks))
    else:
        _init_worker(setup)
        rows = []
        for t in tasks:
            rows.append(_work(t))
            if progress:
                r = rows[-1]
                progress(f"sigma_tilde={r.sigma_tilde:.3e} rep={r.rep} alpha={r.alpha:.3e} "
                         f"err_l2={r.err_l2:.4f} {r.flag}".rstrip())
    return RateTable(rows, meta)


# ---------------------------------------------------------------------------
# emission

def write_csv(table: RateTable, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in table.rows:
            writer.writerow([repr(float(r.sigma_tilde)), r.rep, repr(float(r.alpha)), repr(float(r.residual)),
                             repr(float(r.err_l2)), repr(float(r.err_lpbar)), repr(float(r.err_bminus)),
                             repr(float(r.penalty_value)), r.flag.replace(",", ";")])
    return path


def read_csv(path) -> RateTable:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidParameterError(("csv", f"unexpected header {reader.fieldnames}"))
        rows = []
        for rec in reader:
            vals = {f.name: rec[f.name] for f in fields(RateRow)}
            rows.append(RateRow(float(vals["sigma_tilde"]), int(vals["rep"]), float(vals["alpha"]),
                                float(vals["residual"]), float(vals["err_l2"]), float(vals["err_lpbar"]),
                                float(vals["err_bminus"]), float(vals["penalty_value"]), vals["flag"]))
    return RateTable(rows)


def write_svg(table: RateTable, path, column: str = "err_l2") -> Optional[Path]:
    """Log-log plot of mean errors with error bars and the fitted trend; ``None`` if nothing to plot."""
    summ = table.summary(column)
    if summ["sigma"].size == 0:
        return None
    width, height, pad = 480, 360, 50
    x = np.log10(summ["sigma"])
    lo = np.maximum(summ["mean"] - summ["std"], summ["mean"] * 1e-3)
    hi = summ["mean"] + summ["std"]
    y_all = np.log10(np.concatenate([lo, hi]))
    x0, x1 = x.min() - 0.1, x.max() + 0.1
    y0, y1 = y_all.min() - 0.1, y_all.max() + 0.1

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x=str(pad), y=str(pad), width=str(width - 2 * pad),
                  height=str(height - 2 * pad), fill="none", stroke="black")
    for xi, l, h in zip(x, np.log10(lo), np.log10(hi)):
        ET.SubElement(svg, "line", {"class": "errorbar", "x1": f"{px(xi):.2f}", "x2": f"{px(xi):.2f}",
                                    "y1": f"{py(l):.2f}", "y2": f"{py(h):.2f}", "stroke": "gray"})
    for xi, m in zip(x, np.log10(summ["mean"])):
        ET.SubElement(svg, "circle", {"class": "marker", "cx": f"{px(xi):.2f}", "cy": f"{py(m):.2f}",
                                      "r": "4", "fill": "steelblue"})
    title = f"{column} vs sigma_tilde"
    if summ["sigma"].size >= 2:
        fit = stats.linregress(x, np.log10(summ["mean"]))
        xs = np.array([x.min(), x.max()])
        ys = fit.intercept + fit.slope * xs
        ET.SubElement(svg, "polyline", {"class": "trend", "fill": "none", "stroke": "firebrick",
                                        "points": " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))})
        title += f", slope {fit.slope:.4f}"
    ET.SubElement(svg, "text", x=str(pad), y=str(pad - 15), **{"font-size": "13"}).text = title
    ET.SubElement(svg, "text", x=str(width // 2), y=str(height - 15),
                  **{"font-size": "12"}).text = "log10 sigma_tilde"
    path = Path(path)
    ET.ElementTree(svg).write(path, encoding="unicode")
    return path


def emit_results(table: RateTable, out_dir, stem: str = "rates", column: str = "err_l2") -> dict:
    """Write ``<stem>.csv`` and, when there is data, ``<stem>.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = {"csv": write_csv(table, out_dir / f"{stem}.csv")}
    svg = write_svg(table, out_dir / f"{stem}.svg", column) if table.rows else None
    if svg is not None:
        paths["svg"] = svg
    return paths
