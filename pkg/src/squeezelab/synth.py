"""Seeded synthesis of balanced-homodyne digitizer traces.

Every trace set holds a ``dark`` segment (electronic noise only), a ``shot``
segment (vacuum, unit variance per channel before filtering) and one or more
``signal:<name>`` segments whose per-sample channel covariance equals a
target covariance in shot-noise units. Independent electronic noise at the
configured shot-noise clearance is added to every segment, and each segment
is passed through the single-pole detector response.

Sub-seeds
---------
Each random stream is keyed by ``(label, index)`` and seeded with::

    seed XOR int.from_bytes(sha256(f"{label}|{index}".encode())[:8], "little")

using numpy's ``PCG64`` bit generator. Keys in use: ``(segment, channel)`` for
vacuum/quantum streams, ``(segment + "#dark", channel)`` for the additive
electronic noise, ``(segment + "#jitter", 0)`` for lock phase jitter and
``("sweep", i)`` for the seed of the i-th trace set of a power sweep.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .devices import OpoParams, opo_output_state
from .errors import InvalidArgument, ManifestError
from .gaussian import GaussianState, measured_covariance

MASK64 = (1 << 64) - 1
FORMAT_VERSION = 1

DESK_SAMPLE_RATE = 100e6
DESK_N_SAMPLES = 10_000_000
DESK_DETECTOR_BW = 40e6
FULL_SAMPLE_RATE = 3.2e9
FULL_N_SAMPLES = 1_000_000_000
FULL_DETECTOR_BW = 1.2e9


def derive_subseed(seed: int, label: str, index: int) -> int:
    digest = hashlib.sha256(f"{label}|{index}".encode()).digest()
    return (int(seed) & MASK64) ^ int.from_bytes(digest[:8], "little")


def _rng(seed: int, label: str, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_subseed(seed, label, index)))


def synth_white_gaussian(n: int, sigma: float, seed: int) -> np.ndarray:
    if n < 1:
        raise InvalidArgument(f"sample count must be positive, got {n}")
    return sigma * np.random.Generator(np.random.PCG64(int(seed) & MASK64)).standard_normal(n)


def apply_detector_response(samples, sample_rate: float, detector_bw: float) -> np.ndarray:
    """Single-pole low-pass ``1 / (1 + i f / bw)`` applied in the frequency domain."""
    if not 0 < detector_bw < sample_rate / 2:
        raise InvalidArgument(
            f"detector bandwidth {detector_bw} Hz must lie below Nyquist ({sample_rate / 2} Hz)"
        )
    x = np.asarray(samples, dtype=float)
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    spec /= 1.0 + 1j * f / detector_bw
    return np.fft.irfft(spec, x.size)


@dataclass(frozen=True, eq=False)
class SignalSpec:
    """Target statistics of one signal segment.

    ``cov`` is the joint covariance of the measured quadratures, one per
    channel. When built from a state (``from_state``) the full state is kept
    so lock phase jitter can rotate the measured quadratures.
    """

    cov: np.ndarray
    state: GaussianState | None = None
    angles: tuple | None = None

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise InvalidArgument("signal covariance must be square")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-15):
            raise InvalidArgument("signal covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise InvalidArgument("signal covariance must be positive definite")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_state(cls, state: GaussianState, angles) -> "SignalSpec":
        angles = tuple(float(a) for a in angles)
        return cls(measured_covariance(state, angles), state, angles)

    @property
    def channels(self) -> int:
        return self.cov.shape[0]

    def to_dict(self) -> dict:
        d = {"cov": self.cov.tolist()}
        if self.angles is not None:
            d["angles"] = list(self.angles)
        return d


@dataclass(frozen=True, eq=False)
class SynthPlan:
    signals: dict
    n_samples: int = DESK_N_SAMPLES
    sample_rate: float = DESK_SAMPLE_RATE
    detector_bw: float = DESK_DETECTOR_BW
    clearance_db: float = 10.0
    phase_jitter_rms: float = 0.0
    jitter_block: int = 2 ** 14
    seed: int = 0

    def __post_init__(self):
        signals = {}
        for label, spec in dict(self.signals).items():
            if not isinstance(spec, SignalSpec):
                spec = SignalSpec(spec)
            signals[label if label.startswith("signal:") else f"signal:{label}"] = spec
        if not signals:
            raise InvalidArgument("plan needs at least one signal segment")
        channels = {s.channels for s in signals.values()}
        if len(channels) != 1 or channels.pop() not in (1, 2):
            raise InvalidArgument("all signal segments must have the same 1 or 2 channels")
        if self.n_samples < 2:
            raise InvalidArgument("n_samples must be at least 2")
        if not self.sample_rate > 0:
            raise InvalidArgument("sample_rate must be positive")
        if not 0 < self.detector_bw < self.sample_rate / 2:
            raise InvalidArgument("detector_bw must lie between 0 and Nyquist")
        if not self.clearance_db > 0:
            raise InvalidArgument("clearance_db must be positive")
        if self.phase_jitter_rms < 0:
            raise InvalidArgument("phase_jitter_rms must be non-negative")
        if self.phase_jitter_rms > 0 and any(s.state is None for s in signals.values()):
            raise InvalidArgument("phase jitter needs signal segments built from states")
        object.__setattr__(self, "signals", signals)

    @property
    def channels(self) -> int:
        return next(iter(self.signals.values())).channels

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def dark_variance(self) -> float:
        return 10.0 ** (-self.clearance_db / 10.0)

    def memory_estimate_bytes(self) -> int:
        return 8 * self.n_samples * self.channels * (2 + len(self.signals))


@dataclass(eq=False)
class TraceSet:
    """Segments of a multi-channel acquisition; arrays have shape ``(channels, n)``."""

    sample_rate: float
    segments: dict
    seed: int = 0
    detector_bw: float = DESK_DETECTOR_BW
    clearance_db: float = 10.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = set()
        for label, arr in self.segments.items():
            arr = np.atleast_2d(np.asarray(arr, dtype=float))
            self.segments[label] = arr
            lengths.add(arr.shape)
        if len(lengths) > 1:
            raise InvalidArgument(f"segments differ in shape: {sorted(lengths)}")

    @property
    def channels(self) -> int:
        return next(iter(self.segments.values())).shape[0]

    @property
    def n_samples(self) -> int:
        return next(iter(self.segments.values())).shape[1]

    @property
    def labels(self) -> list:
        return list(self.segments)

    @property
    def signal_labels(self) -> list:
        return [k for k in self.segments if k.startswith("signal:")]

    def digest(self) -> str:
        """SHA-256 over labels and raw little-endian sample bytes."""
        h = hashlib.sha256()
        for label in sorted(self.segments):
            h.update(label.encode())
            h.update(np.ascontiguousarray(self.segments[label], dtype="<f8").tobytes())
        return h.hexdigest()

    def scaled(self, gain: float) -> "TraceSet":
        return TraceSet(
            self.sample_rate,
            {k: gain * v for k, v in self.segments.items()},
            self.seed,
            self.detector_bw,
            self.clearance_db,
            dict(self.meta),
        )


def segment_filename(label: str, channel: int) -> str:
    return f"{re.sub(r'[^A-Za-z0-9]+', '_', label).strip('_')}_ch{channel}.f64"


def save_traceset(traces: TraceSet, directory) -> Path:
    """Write ``manifest.json`` plus one raw little-endian float64 file per segment channel."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for label, arr in traces.segments.items():
        names = []
        for ch in range(arr.shape[0]):
            name = segment_filename(label, ch)
            np.ascontiguousarray(arr[ch], dtype="<f8").tofile(out / name)
            names.append(name)
        files[label] = names
    manifest = {
        "format_version": FORMAT_VERSION,
        "sample_rate": traces.sample_rate,
        "seed": traces.seed,
        "channels": traces.channels,
        "n_samples": traces.n_samples,
        "detector_bw": traces.detector_bw,
        "clearance_db": traces.clearance_db,
        "labels": traces.labels,
        "files": files,
        "meta": traces.meta,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_traceset(directory) -> TraceSet:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except FileNotFoundError:
        raise ManifestError(f"no manifest.json in {d}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"unreadable manifest: {exc}") from None
    required = ("sample_rate", "seed", "channels", "n_samples", "labels", "files")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise ManifestError(f"manifest lacks keys: {', '.join(missing)}")
    n, ch = int(manifest["n_samples"]), int(manifest["channels"])
    segments = {}
    for label in manifest["labels"]:
        names = manifest["files"].get(label)
        if names is None or len(names) != ch:
            raise ManifestError(f"segment {label!r} does not list {ch} channel files")
        rows = []
        for name in names:
            path = d / name
            if not path.is_file():
                raise ManifestError(f"segment file {name} is missing")
            arr = np.fromfile(path, dtype="<f8")
            if arr.size != n:
                raise ManifestError(f"{name} holds {arr.size} samples, manifest says {n}")
            rows.append(arr)
        segments[label] = np.vstack(rows)
    return TraceSet(
        float(manifest["sample_rate"]),
        segments,
        int(manifest["seed"]),
        float(manifest.get("detector_bw", DESK_DETECTOR_BW)),
        float(manifest.get("clearance_db", 10.0)),
        manifest.get("meta", {}),
    )


def _white(plan: SynthPlan, label: str, index: int, sigma: float = 1.0) -> np.ndarray:
    return sigma * _rng(plan.seed, label, index).standard_normal(plan.n_samples)


def _finish(plan: SynthPlan, label: str, channel: int, quantum: np.ndarray | None) -> np.ndarray:
    dark = _white(plan, f"{label}#dark" if quantum is not None else label, channel, np.sqrt(plan.dark_variance))
    x = dark if quantum is None else quantum + dark
    return apply_detector_response(x, plan.sample_rate, plan.detector_bw)


def signal_streams(plan: SynthPlan, label: str, spec: SignalSpec) -> np.ndarray:
    """Unfiltered quantum part of a signal segment, shape ``(channels, n_samples)``."""
    k = spec.channels
    if plan.phase_jitter_rms == 0:
        chol = np.linalg.cholesky(spec.cov)
        white = np.vstack([_white(plan, label, j) for j in range(k)])
        return chol @ white

    chol = np.linalg.cholesky(spec.state.cov)
    white = np.vstack([_white(plan, label, j) for j in range(2 * k)])
    z = chol @ white
    n_blk = -(-plan.n_samples // plan.jitter_block)
    jitter = _rng(plan.seed, f"{label}#jitter", 0).normal(0.0, plan.phase_jitter_rms, (k, n_blk))
    out = np.empty((k, plan.n_samples))
    for c in range(k):
        phase = np.repeat(spec.angles[c] + jitter[c], plan.jitter_block)[: plan.n_samples]
        out[c] = np.cos(phase) * z[2 * c] + np.sin(phase) * z[2 * c + 1]
    return out


def synth_homodyne_run(plan: SynthPlan) -> TraceSet:
    k = plan.channels
    segments = {
        "dark": np.vstack([_finish(plan, "dark", c, None) for c in range(k)]),
        "shot": np.vstack([_finish(plan, "shot", c, _white(plan, "shot", c)) for c in range(k)]),
    }
    for label, spec in plan.signals.items():
        q = signal_streams(plan, label, spec)
        segments[label] = np.vstack([_finish(plan, label, c, q[c]) for c in range(k)])
        del q
    meta = {
        "signals": {label: spec.to_dict() for label, spec in plan.signals.items()},
        "phase_jitter_rms": plan.phase_jitter_rms,
    }
    return TraceSet(plan.sample_rate, segments, plan.seed, plan.detector_bw, plan.clearance_db, meta)


def single_mode_signals(state: GaussianState, squeeze_angle: float) -> dict:
    """Signal segments for the deamplification and amplification lock points."""
    return {
        "signal:sqz": SignalSpec.from_state(state, [squeeze_angle]),
        "signal:asqz": SignalSpec.from_state(state, [squeeze_angle + np.pi / 2]),
    }


def epr_signals(state: GaussianState) -> dict:
    """Two-channel segments measuring ``(x1, x2)`` and ``(p1, p2)``."""
    return {
        "signal:x1x2": SignalSpec.from_state(state, [0.0, 0.0]),
        "signal:p1p2": SignalSpec.from_state(state, [np.pi / 2, np.pi / 2]),
    }


def synth_power_sweep(opo: OpoParams, powers, template: SynthPlan) -> list:
    """One single-channel trace set per pump power."""
    plans = []
    for i, p in enumerate(powers):
        state = opo_output_state(p, opo)
        plans.append(
            SynthPlan(
                single_mode_signals(state, opo.squeeze_angle),
                n_samples=template.n_samples,
                sample_rate=template.sample_rate,
                detector_bw=template.detector_bw,
                clearance_db=template.clearance_db,
                phase_jitter_rms=template.phase_jitter_rms,
                jitter_block=template.jitter_block,
                seed=derive_subseed(template.seed, "sweep", i),
            )
        )
    out = []
    for p, plan in zip(powers, plans):
        ts = synth_homodyne_run(plan)
        ts.meta["p_pump_W"] = float(p)
        out.append(ts)
    return out
