"""Value types shared across the package and experiment configuration I/O."""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError, SizeMismatchError

PENALTY_KINDS = ("besov-sequence", "bv-1d")
SOLVER_PQU = ((1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (2.0, 2.0, 2.0))
CHOICE_RULES = ("apriori-det", "apriori-stoch", "discrepancy")


def is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform midpoint grid on [0, 1] with ``n`` samples."""

    n: int

    def __post_init__(self):
        if not is_power_of_two(self.n):
            raise InvalidParameterError(("n", "power of two required"))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n


@dataclass(frozen=True, eq=False)
class Signal:
    """Samples of a function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        if values.shape != (self.grid.n,):
            raise SizeMismatchError(f"expected {self.grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError(("values", "all values must be finite"))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Signal":
        return cls(grid, func(grid.nodes))

    def with_values(self, values) -> "Signal":
        return Signal(self.grid, values)


@lru_cache(maxsize=64)
def _level_index(coarse_len: int, max_level: int) -> np.ndarray:
    parts = [np.zeros(2 * coarse_len, dtype=np.intp) if max_level else np.zeros(coarse_len, dtype=np.intp)]
    for j in range(1, max_level):
        parts.append(np.full(coarse_len << j, j, dtype=np.intp))
    idx = np.concatenate(parts)
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True, eq=False)
class CoeffTree:
    """Wavelet coefficients organized by level.

    ``details[j]`` holds the detail coefficients of level ``j`` (coarse to
    fine, ``len(details[j]) == len(scaling) * 2**j``). In all level-weighted
    norms the scaling block is counted as part of level 0.
    """

    scaling: np.ndarray
    details: tuple = ()

    def __post_init__(self):
        scaling = _readonly(self.scaling)
        details = tuple(_readonly(d) for d in self.details)
        if scaling.ndim != 1 or scaling.size == 0:
            raise SizeMismatchError("scaling block must be a non-empty vector")
        for j, d in enumerate(details):
            if d.shape != (scaling.size << j,):
                raise SizeMismatchError(
                    f"detail level {j} has {d.size} coefficients, expected {scaling.size << j}")
        object.__setattr__(self, "scaling", scaling)
        object.__setattr__(self, "details", details)

    @property
    def max_level(self) -> int:
        return len(self.details)

    @property
    def coarse_len(self) -> int:
        return self.scaling.size

    @property
    def size(self) -> int:
        return self.coarse_len << self.max_level

    def to_vector(self) -> np.ndarray:
        return np.concatenate((self.scaling,) + self.details)

    @classmethod
    def from_vector(cls, vec, coarse_len: int, max_level: int) -> "CoeffTree":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (coarse_len << max_level,):
            raise SizeMismatchError(
                f"vector of length {vec.size} does not match layout ({coarse_len}, {max_level})")
        scaling = vec[:coarse_len]
        details, start = [], coarse_len
        for j in range(max_level):
            stop = start + (coarse_len << j)
            details.append(vec[start:stop])
            start = stop
        return cls(scaling, tuple(details))

    def like(self, vec) -> "CoeffTree":
        """A tree with this layout holding the flat coefficients ``vec``."""
        return CoeffTree.from_vector(vec, self.coarse_len, self.max_level)

    def level_index(self) -> np.ndarray:
        """Level number of every entry of :meth:`to_vector`."""
        return _level_index(self.coarse_len, self.max_level)

    def levels(self) -> list:
        """Per-level coefficient blocks, scaling merged into level 0."""
        if not self.details:
            return [self.scaling]
        return [np.concatenate((self.scaling, self.details[0]))] + list(self.details[1:])

    @classmethod
    def zeros(cls, coarse_len: int, max_level: int) -> "CoeffTree":
        return cls.from_vector(np.zeros(coarse_len << max_level), coarse_len, max_level)


def level_index(coarse_len: int, max_level: int) -> np.ndarray:
    return _level_index(coarse_len, max_level)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty ``(1/u) ||h||^u`` in ``b^r_{p,q}`` or the 1D BV norm."""

    r: float = 2.0
    p: float = 2.0
    q: float = 1.0
    u: float = 1.0
    kind: str = "besov-sequence"

    def __post_init__(self):
        bad = []
        if self.kind not in PENALTY_KINDS:
            bad.append(("kind", f"must be one of {PENALTY_KINDS}"))
        if not self.r >= 0:
            bad.append(("r", "must be nonnegative"))
        for name in ("p", "q"):
            if not getattr(self, name) > 0:
                bad.append((name, "must lie in (0, inf]"))
        if not (self.u > 0 and math.isfinite(self.u)):
            bad.append(("u", "must lie in (0, inf)"))
        if self.kind == "bv-1d" and (self.r, self.p, self.q, self.u) != (1, 1, 1, 1):
            bad.append(("kind", "bv-1d requires (r, p, q, u) = (1, 1, 1, 1)"))
        if bad:
            raise InvalidParameterError(bad)

    @classmethod
    def bv(cls) -> "PenaltySpec":
        return cls(1.0, 1.0, 1.0, 1.0, "bv-1d")

    @property
    def solver_supported(self) -> bool:
        if self.kind == "bv-1d":
            return True
        return (float(self.p), float(self.q), float(self.u)) in SOLVER_PQU


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness class of a truth relative to a penalty.

    ``s`` is the truth smoothness, ``a`` the degree of ill-posedness, ``r``
    the penalty smoothness, ``p`` the penalty integrability (enters only
    ``pbar``) and ``rho`` the norm budget.
    """

    s: float
    a: float
    r: float
    d: int = 1
    rho: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        bad = []
        if not self.a >= 0:
            bad.append(("a", "must be nonnegative"))
        if not self.r > 0:
            bad.append(("r", "must be positive"))
        if not (0 < self.s <= self.r):
            bad.append(("s", "must lie in (0, r]"))
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            bad.append(("d", "must be a positive integer"))
        if not self.rho > 0:
            bad.append(("rho", "must be positive"))
        if not bad and self.pbar < 1:
            bad.append(("p", "pbar = 2p(a+r)/(2a+pr) must be at least 1"))
        if bad:
            raise InvalidParameterError(bad)

    @property
    def theta(self) -> float:
        return (self.s + self.a) / (self.a + self.r)

    @property
    def xi(self) -> float:
        return self.a / (self.a + self.r)

    @property
    def pbar(self) -> float:
        if math.isinf(self.p):
            return 2.0 * (self.a + self.r) / self.r
        return 2.0 * self.p * (self.a + self.r) / (2.0 * self.a + self.p * self.r)

    @property
    def t_s(self) -> float:
        """Integrability of the Besov class for ``b^r_{1,1}`` / BV penalties."""
        return (2.0 * self.a + 2.0 * self.r) / (self.s + 2.0 * self.a + self.r)

    def with_rho(self, rho: float) -> "SmoothnessSpec":
        return replace(self, rho=float(rho))


# ---------------------------------------------------------------------------
# experiment configuration

ERROR_COLUMNS = ("err_l2", "err_lpbar", "err_bminus")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1024
    noise_grid: tuple = tuple(np.logspace(-4, -2, 8))
    repetitions: int = 10
    seed: int = 0
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    smoothness: SmoothnessSpec = field(default_factory=lambda: SmoothnessSpec(0.5, 2.0, 2.0))
    rule: str = "apriori-stoch"
    c_alpha: Optional[float] = None
    c_D: float = 1.5
    C_D: float = 2.0
    c_l: float = 1.0
    c_r: float = 1.0
    truth: str = "jump"
    rhs: str = "one"
    tau: Optional[float] = None
    wavelet_order: int = 7
    error_column: str = "err_l2"
    rho_auto: bool = True
    gn_max_iter: int = 50
    fista_max_iter: int = 2000
    fista_tol: float = 1e-9


# key -> (parser, help)
CONFIG_KEYS = {
    "n": "number of grid points (power of two)",
    "noise_grid": "sigma-tilde values: comma list or logspace(lo, hi, count) with endpoint values",
    "repetitions": "data sets drawn per noise level",
    "seed": "master seed",
    "penalty_kind": "besov-sequence or bv-1d",
    "penalty_r": "penalty smoothness r",
    "penalty_p": "penalty integrability p",
    "penalty_q": "penalty fine index q",
    "penalty_u": "penalty power u",
    "smoothness_s": "truth smoothness s",
    "smoothness_a": "degree of ill-posedness a",
    "smoothness_d": "dimension d (only 1 is supported)",
    "rho": "smoothness budget rho, or auto (fitted on the truth)",
    "rule": "apriori-det, apriori-stoch or discrepancy",
    "c_alpha": "a-priori constant, or auto (calibrated)",
    "c_D": "lower discrepancy factor",
    "C_D": "upper discrepancy factor",
    "c_l": "lower a-priori window constant",
    "c_r": "upper a-priori window constant",
    "truth": "truth coefficient id (jump, smooth)",
    "rhs": "right-hand side id (one, sine)",
    "tau": "domain-ball radius (recorded, not enforced)",
    "wavelet_order": "Daubechies order N",
    "error_column": "column used for rate fitting and calibration",
    "gn_max_iter": "Gauss-Newton iteration cap",
    "fista_max_iter": "inner FISTA iteration cap",
    "fista_tol": "inner relative objective tolerance",
}

_LOGSPACE = re.compile(r"^\s*logspace\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)\s*$")


def parse_noise_grid(text: str) -> tuple:
    m = _LOGSPACE.match(text)
    if m:
        lo, hi, count = float(m.group(1)), float(m.group(2)), int(m.group(3))
        if lo <= 0 or hi <= 0:
            raise InvalidParameterError(("noise_grid", "logspace bounds must be positive"))
        return tuple(float(v) for v in np.geomspace(lo, hi, count))
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _opt_float(text: str) -> Optional[float]:
    text = text.strip()
    return None if text.lower() in ("", "auto", "none") else float(text)


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Return ``cfg`` unchanged if all invariants hold, else raise.

    Raises :class:`InvalidParameterError` listing every violated constraint.
    """
    bad = []
    if not is_power_of_two(cfg.n):
        bad.append(("n", "power of two required"))
    grid = np.asarray(cfg.noise_grid, dtype=float)
    if grid.size == 0:
        bad.append(("noise_grid", "must not be empty"))
    elif not np.all(grid > 0):
        bad.append(("noise_grid", "values must be strictly positive"))
    elif np.any(np.diff(grid) <= 0):
        bad.append(("noise_grid", "values must be sorted increasingly"))
    if not (isinstance(cfg.repetitions, (int, np.integer)) and cfg.repetitions >= 1):
        bad.append(("repetitions", "must be at least 1"))
    if not isinstance(cfg.penalty, PenaltySpec):
        bad.append(("penalty", "must be a PenaltySpec"))
    elif not cfg.penalty.solver_supported:
        bad.append(("penalty", "(p, q, u) must be one of (1,1,1), (2,1,1), (2,2,2) for minimization"))
    if not isinstance(cfg.smoothness, SmoothnessSpec):
        bad.append(("smoothness", "must be a SmoothnessSpec"))
    elif cfg.smoothness.d != 1:
        bad.append(("smoothness_d", "only d = 1 is supported"))
    if cfg.rule not in CHOICE_RULES:
        bad.append(("rule", f"must be one of {CHOICE_RULES}"))
    if not cfg.c_D > 1:
        bad.append(("c_D", "must exceed 1"))
    if not cfg.C_D >= cfg.c_D:
        bad.append(("C_D", "must be at least c_D"))
    if not (0 < cfg.c_l <= cfg.c_r):
        bad.append(("c_l", "need 0 < c_l <= c_r"))
    if cfg.c_alpha is not None and not cfg.c_alpha > 0:
        bad.append(("c_alpha", "must be positive"))
    if cfg.tau is not None and not cfg.tau > 0:
        bad.append(("tau", "must be positive"))
    if not (1 <= cfg.wavelet_order <= 10):
        bad.append(("wavelet_order", "must lie in 1..10"))
    elif is_power_of_two(cfg.n) and cfg.n < 2 * _coarse_len(cfg.wavelet_order):
        bad.append(("n", "too small for the wavelet filter"))
    if cfg.error_column not in ERROR_COLUMNS:
        bad.append(("error_column", f"must be one of {ERROR_COLUMNS}"))
    if cfg.truth not in TRUTHS:
        bad.append(("truth", f"must be one of {tuple(TRUTHS)}"))
    if cfg.rhs not in RHS:
        bad.append(("rhs", f"must be one of {tuple(RHS)}"))
    for name in ("gn_max_iter", "fista_max_iter"):
        if not getattr(cfg, name) >= 1:
            bad.append((name, "must be at least 1"))
    if not cfg.fista_tol > 0:
        bad.append(("fista_tol", "must be positive"))
    if bad:
        raise InvalidParameterError(bad)
    return cfg


def _coarse_len(order: int) -> int:
    length = 1
    while length < 2 * order:
        length *= 2
    return length


def config_from_mapping(items: dict) -> ExperimentConfig:
    """Build a config from flat string key/value pairs (file schema)."""
    unknown = sorted(set(items) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidParameterError([(k, "unknown config key") for k in unknown])
    base = ExperimentConfig()
    kw = {}
    try:
        if "n" in items:
            kw["n"] = int(items["n"])
        if "noise_grid" in items:
            kw["noise_grid"] = parse_noise_grid(items["noise_grid"])
        for key in ("repetitions", "seed", "wavelet_order", "gn_max_iter", "fista_max_iter"):
            if key in items:
                kw[key] = int(items[key])
        for key in ("c_D", "C_D", "c_l", "c_r", "fista_tol"):
            if key in items:
                kw[key] = float(items[key])
        for key in ("rule", "truth", "rhs", "error_column"):
            if key in items:
                kw[key] = items[key].strip()
        if "c_alpha" in items:
            kw["c_alpha"] = _opt_float(items["c_alpha"])
        if "tau" in items:
            kw["tau"] = _opt_float(items["tau"])
        pen = base.penalty
        penalty = PenaltySpec(
            r=float(items.get("penalty_r", pen.r)),
            p=float(items.get("penalty_p", pen.p)),
            q=float(items.get("penalty_q", pen.q)),
            u=float(items.get("penalty_u", pen.u)),
            kind=items.get("penalty_kind", pen.kind).strip(),
        )
        sm = base.smoothness
        rho = _opt_float(items.get("rho", "auto"))
        smoothness = SmoothnessSpec(
            s=float(items.get("smoothness_s", sm.s)),
            a=float(items.get("smoothness_a", sm.a)),
            r=penalty.r,
            d=int(items.get("smoothness_d", sm.d)),
            rho=1.0 if rho is None else rho,
            p=penalty.p,
        )
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(("config", str(exc))) from exc
    kw.update(penalty=penalty, smoothness=smoothness, rho_auto=rho is None)
    return validate_config(replace(base, **kw))


def load_config(path) -> ExperimentConfig:
    """Read a flat ``key = value`` config file (``#`` starts a comment)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text()
    try:
        parser.read_string("[experiment]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise InvalidParameterError(("config", str(exc))) from exc
    return config_from_mapping(dict(parser["experiment"]))


def config_to_mapping(cfg: ExperimentConfig) -> dict:
    out = {
        "n": str(cfg.n),
        "noise_grid": ", ".join(repr(float(v)) for v in cfg.noise_grid),
        "repetitions": str(cfg.repetitions),
        "seed": str(cfg.seed),
        "penalty_kind": cfg.penalty.kind,
        "penalty_r": repr(float(cfg.penalty.r)),
        "penalty_p": repr(float(cfg.penalty.p)),
        "penalty_q": repr(float(cfg.penalty.q)),
        "penalty_u": repr(float(cfg.penalty.u)),
        "smoothness_s": repr(float(cfg.smoothness.s)),
        "smoothness_a": repr(float(cfg.smoothness.a)),
        "smoothness_d": str(cfg.smoothness.d),
        "rho": "auto" if cfg.rho_auto else repr(float(cfg.smoothness.rho)),
        "rule": cfg.rule,
        "c_alpha": "auto" if cfg.c_alpha is None else repr(float(cfg.c_alpha)),
        "c_D": repr(float(cfg.c_D)),
        "C_D": repr(float(cfg.C_D)),
        "c_l": repr(float(cfg.c_l)),
        "c_r": repr(float(cfg.c_r)),
        "truth": cfg.truth,
        "rhs": cfg.rhs,
        "tau": "none" if cfg.tau is None else repr(float(cfg.tau)),
        "wavelet_order": str(cfg.wavelet_order),
        "error_column": cfg.error_column,
        "gn_max_iter": str(cfg.gn_max_iter),
        "fista_max_iter": str(cfg.fista_max_iter),
        "fista_tol": repr(float(cfg.fista_tol)),
    }
    assert set(out) == set(CONFIG_KEYS)
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_to_mapping(cfg).items())


# ---------------------------------------------------------------------------
# named truths and right-hand sides

def jump_coefficient(x):
    """Piecewise smooth coefficient with two jumps."""
    x = np.asarray(x, dtype=float)
    return 1.0 + 2.0 * ((x >= 0.3) & (x < 0.6)) + 0.5 * np.sin(2 * np.pi * x)


def smooth_coefficient(x):
    x = np.asarray(x, dtype=float)
    return 1.0 + 0.5 * np.sin(2 * np.pi * x)


TRUTHS = {"jump": jump_coefficient, "smooth": smooth_coefficient}
RHS = {
    "one": lambda x: np.ones_like(np.asarray(x, dtype=float)),
    "sine": lambda x: np.pi**2 * np.sin(np.pi * np.asarray(x, dtype=float)),
}


def sample(name: str, grid: Grid, table=None) -> Signal:
    table = TRUTHS if table is None else table
    return Signal.from_function(grid, table[name])


def config_field_names() -> Sequence[str]:
    return [f.name for f in fields(ExperimentConfig)]
