"""Parameter recovery from classical and quantum characterization data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .devices import CavityParams, OpoParams, squeezing_vs_pump, to_db
from .errors import (
    InsufficientDataError,
    InvalidArgument,
    NoDipError,
    SchemaError,
)
from .lm import levenberg_marquardt, parameter_covariance
from .records import DuanSimonResult, Spectrum

SPEED_OF_LIGHT = 299_792_458.0
LN10_OVER_10 = math.log(10.0) / 10.0

SWEEP_COLUMNS = ("p_pump_W", "s_minus_dB", "s_plus_dB", "sigma_minus_dB", "sigma_plus_dB")


@dataclass
class FitResult:
    parameters: dict
    uncertainties: dict
    residual_norm: float
    converged: bool
    iterations: int
    kind: str = ""
    message: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameters": self.parameters,
            "uncertainties": self.uncertainties,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            **self.extra,
        }


@dataclass(frozen=True)
class SweepPoint:
    p_pump: float
    s_minus_db: float
    s_plus_db: float
    sigma_minus_db: float = 0.0
    sigma_plus_db: float = 0.0

    def __post_init__(self):
        if self.sigma_minus_db < 0 or self.sigma_plus_db < 0:
            raise InvalidArgument("sweep uncertainties must be non-negative")


# --- resonator characterization -------------------------------------------------


def q_from_linewidth(lambda0: float, hwhm: float) -> float:
    """Loaded quality factor ``nu0 / (2 hwhm)``."""
    if lambda0 <= 0 or hwhm <= 0:
        raise InvalidArgument("wavelength and linewidth must be positive")
    return (SPEED_OF_LIGHT / lambda0) / (2.0 * hwhm)


def escape_from_extinction(t_min: float, regime: str = "overcoupled") -> float:
    """Escape efficiency of an all-pass ring from its on-resonance transmission."""
    if not 0.0 <= t_min <= 1.0:
        raise InvalidArgument(f"t_min must lie in [0, 1], got {t_min}")
    root = math.sqrt(t_min)
    if regime == "overcoupled":
        return (1.0 + root) / 2.0
    if regime == "undercoupled":
        return (1.0 - root) / 2.0
    raise InvalidArgument(f"unknown coupling regime {regime!r}")


def extinction_from_escape(eta_esc: float, regime: str = "overcoupled") -> float:
    if regime == "overcoupled":
        if not 0.5 <= eta_esc <= 1.0:
            raise InvalidArgument("an overcoupled ring has escape efficiency in [0.5, 1]")
        return (2.0 * eta_esc - 1.0) ** 2
    if regime == "undercoupled":
        if not 0.0 <= eta_esc <= 0.5:
            raise InvalidArgument("an undercoupled ring has escape efficiency in [0, 0.5]")
        return (1.0 - 2.0 * eta_esc) ** 2
    raise InvalidArgument(f"unknown coupling regime {regime!r}")


def _lorentzian_guess(f, y):
    i_min = int(np.argmin(y))
    y_min = float(y[i_min])
    baseline = 1.0
    depth = baseline - y_min
    if not depth > 1e-9 * max(abs(baseline), 1.0) or np.ptp(y) <= 1e-12 * np.max(np.abs(y)):
        raise NoDipError("transmission shows no resonance dip")
    below = np.flatnonzero(y <= baseline - depth / 2)
    spacing = np.min(np.diff(f))
    hwhm = max((f[below[-1]] - f[below[0]]) / 2.0, spacing / 2.0)
    return float(f[i_min]), hwhm, max(y_min, 0.0)


def fit_lorentzian(spectrum: Spectrum, max_iter: int = 200, xtol: float = 1e-8) -> FitResult:
    """Least-squares fit of the ring transmission to ``(f0, hwhm, t_min)``."""
    f = spectrum.frequencies[spectrum.valid]
    y = spectrum.psd[spectrum.valid]
    if f.size < 8:
        raise InsufficientDataError(f"need at least 8 points, got {f.size}")
    f0_g, hwhm_g, t_g = _lorentzian_guess(f, y)
    if np.ptp(f) < 3 * 2 * hwhm_g:
        raise InsufficientDataError("data must span at least three linewidths")

    # centered, linewidth-scaled frequency axis keeps the problem well conditioned
    u = (f - f0_g) / hwhm_g

    def residuals(p):
        c, g, t = p
        if g <= 0:
            return np.full(u.shape, np.inf)
        return 1.0 - (1.0 - t) * g * g / ((u - c) ** 2 + g * g) - y

    res = levenberg_marquardt(residuals, [0.0, 1.0, t_g], max_iter=max_iter, xtol=xtol)
    c, g, t = res.x
    cov = parameter_covariance(res, u.size)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        parameters={"f0": float(f0_g + c * hwhm_g), "hwhm": float(g * hwhm_g), "t_min": float(t)},
        uncertainties={
            "f0": float(sig[0] * hwhm_g),
            "hwhm": float(sig[1] * hwhm_g),
            "t_min": float(sig[2]),
        },
        residual_norm=math.sqrt(res.cost),
        converged=res.converged,
        iterations=res.iterations,
        kind="lorentzian",
        message=res.message,
    )


def cavity_from_fit(fit: FitResult, regime: str = "overcoupled", fsr: float = 55e9) -> CavityParams:
    p = fit.parameters
    return CavityParams(p["f0"], p["hwhm"], float(np.clip(p["t_min"], 0.0, 1.0)), regime, fsr)


# --- threshold fits ---------------------------------------------------------------


def _sweep_arrays(sweep):
    pts = list(sweep)
    if len(pts) < 3:
        raise InsufficientDataError(f"need at least 3 sweep points, got {len(pts)}")
    p = np.array([s.p_pump for s in pts], float)
    if np.all(p == 0):
        raise InsufficientDataError("all pump powers are zero")
    if np.any(p < 0):
        raise InvalidArgument("pump powers must be non-negative")
    y = np.concatenate([[s.s_minus_db for s in pts], [s.s_plus_db for s in pts]])
    sig = np.concatenate([[s.sigma_minus_db for s in pts], [s.sigma_plus_db for s in pts]])
    if np.all(sig == 0):
        sig = np.ones_like(sig)
    elif np.any(sig <= 0):
        raise InvalidArgument("either all or none of the sweep uncertainties may be zero")
    return p, y, sig


def sweep_model_db(p_pump, p_th: float, eta_tot: float):
    """Squeezing and anti-squeezing in dB for an array of pump powers."""
    x = np.sqrt(np.asarray(p_pump, float) / p_th)
    ratio = (1.0 - x) ** 2 / (1.0 + x) ** 2
    s_minus = (1.0 - eta_tot) + eta_tot * ratio
    s_plus = (1.0 - eta_tot) + eta_tot / ratio
    return to_db(s_minus), to_db(s_plus)


def fit_threshold(sweep, eta_tot: float, max_iter: int = 200, xtol: float = 1e-8) -> FitResult:
    """Weighted dB-domain fit of the threshold power with fixed total efficiency."""
    if not 0.0 < eta_tot <= 1.0:
        raise InvalidArgument(f"eta_tot must lie in (0, 1], got {eta_tot}")
    p, y, sig = _sweep_arrays(sweep)
    p_max = float(p.max())

    def residuals(q):
        p_th = math.exp(q[0])
        if p_th <= p_max:
            return np.full(y.shape, np.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            m_minus, m_plus = sweep_model_db(p, p_th, eta_tot)
        return (np.concatenate([m_minus, m_plus]) - y) / sig

    # coarse log grid for the starting point
    grid = p_max * np.logspace(0.001, 6, 400)
    costs = []
    for g in grid:
        r = residuals([math.log(g)])
        costs.append(r @ r if np.all(np.isfinite(r)) else np.inf)
    q0 = math.log(grid[int(np.argmin(costs))])

    res = levenberg_marquardt(residuals, [q0], max_iter=max_iter, xtol=xtol)
    p_th = math.exp(res.x[0])
    cov = parameter_covariance(res, y.size)
    sigma = p_th * math.sqrt(max(cov[0, 0], 0.0))
    return FitResult(
        parameters={"p_th": p_th},
        uncertainties={"p_th": sigma},
        residual_norm=math.sqrt(res.cost),
        converged=res.converged,
        iterations=res.iterations,
        kind="threshold",
        message=res.message,
        extra={"eta_tot": eta_tot},
    )


def synthetic_sweep(powers, params: OpoParams, sigma_db: float = 0.0, rng=None):
    """Sweep points from the closed-form model, optionally with Gaussian dB noise."""
    pts = []
    for p in powers:
        s_minus, s_plus = squeezing_vs_pump(p, params)
        dm = dp = 0.0
        if sigma_db > 0:
            dm, dp = rng.normal(0.0, sigma_db, 2)
        pts.append(SweepPoint(p, to_db(s_minus) + dm, to_db(s_plus) + dp, sigma_db, sigma_db))
    return pts


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SWEEP_COLUMNS:
            raise SchemaError(f"sweep CSV must have columns {','.join(SWEEP_COLUMNS)}")
        try:
            rows = [SweepPoint(*(float(row[c]) for c in SWEEP_COLUMNS)) for row in reader]
        except ValueError as exc:
            raise SchemaError(f"malformed sweep row: {exc}") from None
    if not rows:
        raise SchemaError("sweep CSV contains no data rows")
    return rows


def write_sweep_csv(path, sweep) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for s in sweep:
            w.writerow([repr(float(v)) for v in (s.p_pump, s.s_minus_db, s.s_plus_db, s.sigma_minus_db, s.sigma_plus_db)])


# --- entanglement -----------------------------------------------------------------


def propagate_duan_simon(
    var_minus_db: float,
    sigma_minus_db: float,
    var_plus_db: float,
    sigma_plus_db: float,
    k_sigma: float = 1.0,
) -> DuanSimonResult:
    """EPR variance sum from two dB-valued, shot-normalized variances.

    The uncertainty is first-order propagation of the dB uncertainties;
    ``entangled`` requires the sum to sit ``k_sigma`` standard deviations
    below the separable bound of 2.
    """
    a = 10.0 ** (var_minus_db / 10.0)
    b = 10.0 ** (var_plus_db / 10.0)
    value = a + b
    sigma = math.hypot(LN10_OVER_10 * a * sigma_minus_db, LN10_OVER_10 * b * sigma_plus_db)
    return DuanSimonResult(
        value=value,
        sigma=sigma,
        entangled=bool(value + k_sigma * sigma < 2.0),
        k_sigma=k_sigma,
        terms=(a, b),
    )
