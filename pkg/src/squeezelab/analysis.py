"""Measurement pipeline: spectra, dark subtraction, shot normalization, block variances."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import (
    DegenerateClearanceError,
    GridMismatchError,
    InsufficientDataError,
    InvalidArgument,
    MissingSegmentError,
)
from .estimation import SweepPoint, propagate_duan_simon
from .gaussian import QuadratureCombination
from .records import DuanSimonResult, Spectrum
from .synth import TraceSet

DEFAULT_SEGMENT_LEN = 2 ** 14
SINGLE_MODE_CENTER = 12e6
TWO_MODE_CENTER = 10e6
TWO_MODE_BANDWIDTH = 1e6

X_SEGMENT = "signal:x1x2"
P_SEGMENT = "signal:p1p2"
X_DIFF = QuadratureCombination((1 / math.sqrt(2), -1 / math.sqrt(2)), "(x1-x2)/sqrt2")
P_SUM = QuadratureCombination((1 / math.sqrt(2), 1 / math.sqrt(2)), "(p1+p2)/sqrt2")


@dataclass(frozen=True)
class BlockVarianceSeries:
    label: str
    segment: str
    block_times: np.ndarray
    variances_db: np.ndarray
    sigma_db: float | None
    ratios: np.ndarray

    @property
    def mean_db(self) -> float:
        return float(np.mean(self.variances_db))


def welch_psd(
    samples,
    sample_rate: float,
    segment_len: int = DEFAULT_SEGMENT_LEN,
    overlap: float = 0.5,
    window: str = "hann",
) -> Spectrum:
    """One-sided Welch PSD estimate (power per hertz)."""
    x = np.asarray(samples, dtype=float)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise InvalidArgument(f"segment_len must be a power of two, got {segment_len}")
    if segment_len > x.size:
        raise InvalidArgument(f"segment_len {segment_len} exceeds the {x.size} available samples")
    if not 0 <= overlap < 1:
        raise InvalidArgument("overlap must lie in [0, 1)")
    win = {"hann": "hann", "rect": "boxcar"}.get(window)
    if win is None:
        raise InvalidArgument(f"unknown window {window!r}")
    noverlap = int(round(overlap * segment_len))
    f, p = sps.welch(
        x,
        fs=sample_rate,
        window=win,
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        return_onesided=True,
        scaling="density",
    )
    n_avg = 1 + (x.size - segment_len) // (segment_len - noverlap)
    w = sps.get_window(win, segment_len)
    enbw = sample_rate * np.sum(w ** 2) / np.sum(w) ** 2
    return Spectrum(
        f,
        p,
        resolution_bw=float(enbw),
        n_averages=int(n_avg),
        meta={"window": window, "segment_len": segment_len, "overlap": overlap},
    )


def normalize_to_shot(signal: Spectrum, shot: Spectrum, dark: Spectrum) -> Spectrum:
    """Dark-subtracted signal relative to dark-subtracted shot noise, in dB."""
    if not (
        np.array_equal(signal.frequencies, shot.frequencies)
        and np.array_equal(signal.frequencies, dark.frequencies)
    ):
        raise GridMismatchError("signal, shot and dark spectra must share one frequency grid")
    num = signal.psd - dark.psd
    den = shot.psd - dark.psd
    valid = (den > 0) & (num > 0) & signal.valid & shot.valid & dark.valid
    if not np.any(valid):
        raise DegenerateClearanceError("no bin has shot noise above the dark level")
    out = np.full(num.shape, np.nan)
    out[valid] = 10.0 * np.log10(num[valid] / den[valid])
    return Spectrum(
        signal.frequencies,
        out,
        resolution_bw=signal.resolution_bw,
        n_averages=signal.n_averages,
        unit="dB",
        valid=valid,
        meta=dict(signal.meta),
    )


def band_level_db(signal: Spectrum, shot: Spectrum, dark: Spectrum, f_lo: float, f_hi: float) -> float:
    """Band-integrated dark-subtracted signal-to-shot ratio in dB."""
    band = signal.band(f_lo, f_hi)
    if not np.any(band):
        raise InvalidArgument(f"no frequency bins in [{f_lo}, {f_hi}] Hz")
    num = np.sum(signal.psd[band] - dark.psd[band])
    den = np.sum(shot.psd[band] - dark.psd[band])
    if den <= 0:
        raise DegenerateClearanceError("shot noise does not exceed dark noise in band")
    return 10.0 * math.log10(num / den)


def _band_bins(n: int, sample_rate: float, f_lo: float, f_hi: float) -> np.ndarray:
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    return (f >= f_lo) & (f <= f_hi)


def brickwall_bandpass(samples, sample_rate: float, f_lo: float, f_hi: float) -> np.ndarray:
    """Zero every Fourier bin outside ``[f_lo, f_hi]``."""
    x = np.asarray(samples, dtype=float)
    spec = np.fft.rfft(x, axis=-1)
    spec[..., ~_band_bins(x.shape[-1], sample_rate, f_lo, f_hi)] = 0.0
    return np.fft.irfft(spec, x.shape[-1], axis=-1)


def band_power(samples, sample_rate: float, f_lo: float, f_hi: float) -> np.ndarray:
    """Mean square of the brick-wall band-passed signal, computed from its spectrum.

    Equal (to rounding) to ``mean(brickwall_bandpass(x, ...)**2)`` along the
    last axis, without the inverse transform.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    mask = _band_bins(n, sample_rate, f_lo, f_hi)
    weight = np.where(mask, 2.0, 0.0)
    weight[0] = 1.0 if mask[0] else 0.0
    if n % 2 == 0:
        weight[-1] = 1.0 if mask[-1] else 0.0
    return np.sum(weight * (spec.real ** 2 + spec.imag ** 2), axis=-1) / n ** 2


def _check_band(sample_rate: float, f_center: float, bandwidth: float) -> tuple:
    f_lo, f_hi = f_center - bandwidth / 2, f_center + bandwidth / 2
    if bandwidth <= 0 or f_lo <= 0:
        raise InvalidArgument("band must be positive and exclude DC")
    if 2 * f_hi >= sample_rate:
        raise InvalidArgument(f"band edge {f_hi} Hz exceeds Nyquist ({sample_rate / 2} Hz)")
    return f_lo, f_hi


def _segment(traces: TraceSet, label: str) -> np.ndarray:
    try:
        return traces.segments[label]
    except KeyError:
        raise MissingSegmentError(f"trace set has no segment {label!r}") from None


def bandpass_block_variances(
    traces: TraceSet,
    combination: QuadratureCombination,
    f_center: float = TWO_MODE_CENTER,
    bandwidth: float = TWO_MODE_BANDWIDTH,
    n_blocks: int = 10,
    segment: str = X_SEGMENT,
    subtract_dark: bool = True,
) -> BlockVarianceSeries:
    """Shot-normalized band-passed variance of a channel combination, block by block.

    The shot (and dark) reference for a combination ``c`` is
    ``sum_i c_i**2 * var_i`` with every channel filtered identically, so the
    detector response cancels in the ratio.
    """
    c = combination.vector
    if c.size != traces.channels:
        raise InvalidArgument(
            f"combination has {c.size} coefficients for {traces.channels} channels"
        )
    if n_blocks < 1:
        raise InvalidArgument("n_blocks must be at least 1")
    fs = traces.sample_rate
    f_lo, f_hi = _check_band(fs, f_center, bandwidth)
    sig = _segment(traces, segment)
    shot = _segment(traces, "shot")
    dark = _segment(traces, "dark") if subtract_dark else None
    block = traces.n_samples // n_blocks
    if block < 10 * fs / bandwidth:
        raise InsufficientDataError(
            f"blocks of {block} samples hold fewer than 10 correlation times of a {bandwidth} Hz band"
        )
    c2 = c ** 2
    ratios = np.empty(n_blocks)
    for b in range(n_blocks):
        sl = slice(b * block, (b + 1) * block)
        v_sig = band_power(c @ sig[:, sl], fs, f_lo, f_hi)
        v_shot = c2 @ band_power(shot[:, sl], fs, f_lo, f_hi)
        v_dark = c2 @ band_power(dark[:, sl], fs, f_lo, f_hi) if dark is not None else 0.0
        if v_shot - v_dark <= 0:
            raise DegenerateClearanceError(f"block {b}: shot noise does not exceed dark noise")
        ratios[b] = (v_sig - v_dark) / (v_shot - v_dark)
    with np.errstate(invalid="ignore", divide="ignore"):
        db = 10.0 * np.log10(ratios)
    sigma = float(np.std(db, ddof=1) / math.sqrt(n_blocks)) if n_blocks > 1 else None
    return BlockVarianceSeries(
        label=combination.label,
        segment=segment,
        block_times=np.arange(n_blocks) * block / fs,
        variances_db=db,
        sigma_db=sigma,
        ratios=ratios,
    )


def duan_simon_from_traces(
    traces: TraceSet,
    f_center: float = TWO_MODE_CENTER,
    bandwidth: float = TWO_MODE_BANDWIDTH,
    n_blocks: int = 10,
    k_sigma: float = 1.0,
):
    """Inseparability sum from the ``(x1, x2)`` and ``(p1, p2)`` records.

    Returns ``(DuanSimonResult, [x_series, p_series])``.
    """
    for label in (X_SEGMENT, P_SEGMENT):
        if label not in traces.segments:
            raise MissingSegmentError(f"trace set has no segment {label!r}")
    if traces.channels != 2:
        raise InvalidArgument("two-mode analysis needs a two-channel trace set")
    xs = bandpass_block_variances(traces, X_DIFF, f_center, bandwidth, n_blocks, X_SEGMENT)
    ps = bandpass_block_variances(traces, P_SUM, f_center, bandwidth, n_blocks, P_SEGMENT)
    res = propagate_duan_simon(xs.mean_db, xs.sigma_db or 0.0, ps.mean_db, ps.sigma_db or 0.0, k_sigma)
    if xs.sigma_db is None:
        res = DuanSimonResult(res.value, None, bool(res.value < 2.0), k_sigma, terms=res.terms)
    return res, [xs, ps]


def segment_spectra(traces: TraceSet, segment_len: int = DEFAULT_SEGMENT_LEN, overlap: float = 0.5):
    """Normalized spectra of every signal segment: ``{(label, channel): Spectrum}``."""
    fs = traces.sample_rate
    ref = {}
    for label in ("dark", "shot"):
        arr = _segment(traces, label)
        ref[label] = [welch_psd(arr[c], fs, segment_len, overlap) for c in range(traces.channels)]
    out = {}
    for label in traces.signal_labels:
        arr = traces.segments[label]
        for c in range(traces.channels):
            s = welch_psd(arr[c], fs, segment_len, overlap)
            out[(label, c)] = (s, ref["shot"][c], ref["dark"][c])
    return out


def single_mode_levels(
    traces: TraceSet,
    f_center: float = SINGLE_MODE_CENTER,
    bandwidth: float = 2e6,
    segment_len: int = DEFAULT_SEGMENT_LEN,
) -> dict:
    """Band-integrated dB level of each signal channel: ``{(label, channel): dB}``."""
    f_lo, f_hi = _check_band(traces.sample_rate, f_center, bandwidth)
    return {
        key: band_level_db(s, sh, d, f_lo, f_hi)
        for key, (s, sh, d) in segment_spectra(traces, segment_len).items()
    }


def sweep_point_from_traces(
    traces: TraceSet,
    f_center: float = SINGLE_MODE_CENTER,
    bandwidth: float = TWO_MODE_BANDWIDTH,
    n_blocks: int = 10,
) -> SweepPoint:
    """Squeezing and anti-squeezing level of a single-channel sweep trace set."""
    unit = QuadratureCombination((1.0,), "q")
    sq = bandpass_block_variances(traces, unit, f_center, bandwidth, n_blocks, "signal:sqz")
    asq = bandpass_block_variances(traces, unit, f_center, bandwidth, n_blocks, "signal:asqz")
    return SweepPoint(
        float(traces.meta.get("p_pump_W", 0.0)),
        sq.mean_db,
        asq.mean_db,
        sq.sigma_db or 0.0,
        asq.sigma_db or 0.0,
    )


def _fmt(v) -> str:
    return repr(float(v))


def write_spectrum_csv(path, spectrum: Spectrum) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_Hz", "psd_rel_shot_dB", "valid_flag"])
        for f, p, ok in zip(spectrum.frequencies, spectrum.psd, spectrum.valid):
            w.writerow([_fmt(f), _fmt(p) if ok else "nan", int(ok)])


def write_block_csv(path, series_list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block_index", "t_start_s", "variance_dB", "combination"])
        for s in series_list:
            for i, (t, v) in enumerate(zip(s.block_times, s.variances_db)):
                w.writerow([i, _fmt(t), _fmt(v), s.label])
