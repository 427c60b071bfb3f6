"""Plain data records passed between the estimation and analysis stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Frequency-binned spectrum.

    ``unit`` is ``"linear"`` for power spectral densities (or any non-negative
    trace such as a transmission scan) and ``"dB"`` for spectra expressed
    relative to a reference. ``valid`` flags bins that carry a usable value.
    """

    frequencies: np.ndarray
    psd: np.ndarray
    resolution_bw: float = 0.0
    n_averages: int = 1
    unit: str = "linear"
    valid: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.psd, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise InvalidArgument("frequencies and psd must be 1-D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise InvalidArgument("frequencies must be strictly increasing")
        valid = np.ones(f.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != f.shape:
            raise InvalidArgument("valid mask must match the frequency grid")
        if self.unit == "linear" and np.any(p[valid] < 0):
            raise InvalidArgument("linear psd must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "psd", p)
        object.__setattr__(self, "valid", valid)

    def band(self, f_lo: float, f_hi: float) -> np.ndarray:
        """Boolean mask of valid bins with ``f_lo <= f <= f_hi``."""
        return self.valid & (self.frequencies >= f_lo) & (self.frequencies <= f_hi)


@dataclass(frozen=True)
class DuanSimonResult:
    value: float
    sigma: float | None
    entangled: bool
    k_sigma: float = 1.0
    bound: float = 2.0
    terms: tuple = ()

    def to_dict(self) -> dict:
        return {
            "duan_simon_sum": self.value,
            "sigma": self.sigma,
            "entangled": self.entangled,
            "k_sigma": self.k_sigma,
            "bound": self.bound,
            "terms": list(self.terms),
        }
