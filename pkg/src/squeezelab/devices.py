"""Closed-form device physics: OPO squeezing, ring transmission, SHG phase matching."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import AboveThresholdError, InvalidArgument
from .gaussian import GaussianState, apply_loss, squeezed_thermal_state

PHASE_SQUEEZED = np.pi / 2


@dataclass(frozen=True)
class OpoParams:
    """Physical parameters of one below-threshold degenerate OPO.

    ``squeeze_angle`` is the quadrature angle of the squeezed quadrature;
    ``pi/2`` (phase squeezing) is what a deamplification lock produces.
    """

    eta_esc: float
    eta_cpl: float
    eta_det: float
    p_th: float
    hwhm: float
    squeeze_angle: float = PHASE_SQUEEZED
    label: str = ""

    def __post_init__(self):
        for name in ("eta_esc", "eta_cpl", "eta_det"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidArgument(f"{name} must lie in (0, 1], got {v}")
        if not self.p_th > 0:
            raise InvalidArgument(f"p_th must be positive, got {self.p_th}")
        if not self.hwhm > 0:
            raise InvalidArgument(f"hwhm must be positive, got {self.hwhm}")

    @property
    def eta_tot(self) -> float:
        return total_efficiency(self)

    def with_total_efficiency(self, eta_tot: float) -> "OpoParams":
        """Copy whose whole efficiency budget sits in ``eta_esc`` (others set to 1)."""
        return OpoParams(eta_tot, 1.0, 1.0, self.p_th, self.hwhm, self.squeeze_angle, self.label)

    def to_dict(self) -> dict:
        return asdict(self)


# Characterized efficiencies, thresholds and linewidths of the two sources at 1550 nm.
OPO1 = OpoParams(eta_esc=0.846, eta_cpl=0.72, eta_det=0.87, p_th=23.0, hwhm=6.719e9, label="OPO 1")
OPO2 = OpoParams(eta_esc=0.864, eta_cpl=0.72, eta_det=0.87, p_th=15.0, hwhm=7.026e9, label="OPO 2")


@dataclass(frozen=True)
class CavityParams:
    f0: float
    hwhm: float
    t_min: float
    regime: str = "overcoupled"
    fsr: float = 55e9

    def __post_init__(self):
        if not 0.0 <= self.t_min <= 1.0:
            raise InvalidArgument(f"t_min must lie in [0, 1], got {self.t_min}")
        if self.regime not in ("overcoupled", "undercoupled"):
            raise InvalidArgument(f"unknown coupling regime {self.regime!r}")
        if not self.hwhm > 0:
            raise InvalidArgument("hwhm must be positive")
        if not self.hwhm < self.fsr / 2:
            raise InvalidArgument("hwhm must be smaller than half the free spectral range")


@dataclass(frozen=True)
class ShgParams:
    lambda_pm: float
    fwhm_bandwidth: float
    tuning_slope: float = 0.1e-9
    t_ref: float = 293.15

    def __post_init__(self):
        if not self.fwhm_bandwidth > 0:
            raise InvalidArgument("fwhm_bandwidth must be positive")


def total_efficiency(params: OpoParams) -> float:
    return params.eta_esc * params.eta_cpl * params.eta_det


def _pump_ratio(p_pump: float, params: OpoParams) -> float:
    if p_pump < 0:
        raise InvalidArgument(f"pump power must be non-negative, got {p_pump}")
    if p_pump >= params.p_th:
        raise AboveThresholdError(
            f"pump power {p_pump} W is not below the threshold {params.p_th} W"
        )
    return np.sqrt(p_pump / params.p_th)


def squeezing_vs_pump(p_pump: float, params: OpoParams, sideband: float | None = None):
    """Squeezed and anti-squeezed quadrature variances (shot-noise units).

    With ``x = sqrt(P / P_th)``::

        S_minus = 1 - 4 eta x / (1 + x)**2
        S_plus  = 1 + 4 eta x / (1 - x)**2

    ``sideband`` (Hz) optionally adds the cavity roll-off term
    ``(sideband / hwhm)**2`` to the denominators; the default evaluates the
    zero-frequency limit.
    """
    x = _pump_ratio(p_pump, params)
    eta = total_efficiency(params)
    if x == 0.0:
        return 1.0, 1.0
    w2 = 0.0 if sideband is None else (sideband / params.hwhm) ** 2
    # same expressions rearranged as lossy mixtures of the pure-state ratio,
    # which avoids cancellation in S_minus close to threshold
    ratio = ((1.0 - x) ** 2 + w2) / ((1.0 + x) ** 2 + w2)
    s_minus = (1.0 - eta) + eta * ratio
    s_plus = (1.0 - eta) + eta / ratio
    return s_minus, s_plus


def linearized_squeezing(p_pump: float, params: OpoParams):
    """First-order expansion ``1 -/+ 4 eta sqrt(P / P_th)``, valid far below threshold."""
    if p_pump < 0:
        raise InvalidArgument(f"pump power must be non-negative, got {p_pump}")
    d = 4.0 * total_efficiency(params) * np.sqrt(p_pump / params.p_th)
    return 1.0 - d, 1.0 + d


def opo_output_state(p_pump: float, params: OpoParams, sideband: float | None = None) -> GaussianState:
    s_minus, s_plus = squeezing_vs_pump(p_pump, params, sideband)
    return squeezed_thermal_state(s_minus, s_plus, params.squeeze_angle)


def opo_output_state_via_loss(p_pump: float, params: OpoParams) -> GaussianState:
    """Same state built as a pure squeezer followed by a loss channel of ``eta_tot``."""
    pure = opo_output_state(p_pump, params.with_total_efficiency(1.0))
    return apply_loss(pure, 0, total_efficiency(params))


def lorentzian_transmission(f, cavity: CavityParams, periodic: bool = False):
    """Bus-waveguide power transmission past an all-pass ring."""
    detuning = np.asarray(f, dtype=float) - cavity.f0
    if periodic:
        detuning = np.mod(detuning + cavity.fsr / 2, cavity.fsr) - cavity.fsr / 2
    g2 = cavity.hwhm ** 2
    return 1.0 - (1.0 - cavity.t_min) * g2 / (detuning ** 2 + g2)


@lru_cache(maxsize=None)
def sinc2_half_width() -> float:
    """Argument ``u`` at which ``(sin u / u)**2 = 1/2`` (about 0.4429 pi)."""
    return brentq(lambda u: (np.sin(u) / u) ** 2 - 0.5, 1.0, 2.0, xtol=1e-12, rtol=1e-15)


def phase_matching_wavelength(temp: float, shg: ShgParams) -> float:
    return shg.lambda_pm + shg.tuning_slope * (temp - shg.t_ref)


def shg_efficiency(wavelength, temp: float, shg: ShgParams):
    """Normalized sinc-squared phase-matching curve; FWHM equals ``fwhm_bandwidth``."""
    beta = 2.0 * sinc2_half_width()
    u = beta * (np.asarray(wavelength, dtype=float) - phase_matching_wavelength(temp, shg)) / shg.fwhm_bandwidth
    return np.sinc(u / np.pi) ** 2


def to_db(value):
    return 10.0 * np.log10(value)


def from_db(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
