"""Experiment configuration: strict JSON-compatible key/value records.

Unknown keys are rejected and every failure names the offending field path,
e.g. ``synth.detector_bw``. :func:`effective_config` returns a document with
every default filled in; feeding it back reproduces the run exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field

from .errors import ConfigError, SqueezeLabError


@dataclass
class OpoConfig:
    eta_esc: float
    eta_cpl: float = 0.72
    eta_det: float = 0.87
    p_th: float = 15.0
    hwhm: float = 7.026e9
    squeeze_angle: float = math.pi / 2
    label: str = ""


def _opo1():
    return OpoConfig(eta_esc=0.846, p_th=23.0, hwhm=6.719e9, label="OPO 1")


def _opo2():
    return OpoConfig(eta_esc=0.864, p_th=15.0, hwhm=7.026e9, label="OPO 2")


@dataclass
class SynthConfig:
    n_samples: int = 10_000_000
    sample_rate: float = 100e6
    detector_bw: float = 40e6
    clearance_db: float = 10.0
    phase_jitter_rms: float = 0.0
    jitter_block: int = 2 ** 14
    covariances: typing.Optional[typing.Dict[str, typing.List[typing.List[float]]]] = None


@dataclass
class AnalysisConfig:
    f_center: float = 10e6
    bandwidth: float = 1e6
    n_blocks: int = 10
    single_mode_center: float = 12e6
    single_mode_bandwidth: float = 2e6
    welch_segment_len: int = 2 ** 14
    welch_overlap: float = 0.5
    k_sigma: float = 1.0


@dataclass
class FitConfig:
    eta_tot: typing.Optional[float] = None
    regime: str = "overcoupled"
    max_iter: int = 200
    xtol: float = 1e-8


@dataclass
class ModelConfig:
    powers_w: typing.Optional[typing.List[float]] = None
    n_points: int = 46


@dataclass
class ExperimentConfig:
    opo1: OpoConfig = field(default_factory=_opo1)
    opo2: OpoConfig = field(default_factory=_opo2)
    pump_power_w: float = 0.05
    beam_splitter_transmissivity: float = 0.5
    relative_phase: float = math.pi / 2
    path_efficiency: typing.List[float] = field(default_factory=lambda: [1.0, 1.0])
    synth: SynthConfig = field(default_factory=SynthConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    out_dir: str = "out"
    seed: int = 0


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return _build(tp, value, path)
    if origin in (list, typing.List):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (inner,) = typing.get_args(tp)
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if origin in (dict, typing.Dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        _, inner = typing.get_args(tp)
        return {str(k): _coerce(v, inner, f"{path}.{k}") for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise TypeError(f"unsupported config type {tp}")


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key {where}{unknown[0]}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        sub = f"{path}.{f.name}" if path else f.name
        if f.name in data:
            kwargs[f.name] = _coerce(data[f.name], hints[f.name], sub)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{sub}: required")
    return cls(**kwargs)


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    cfg = _build(ExperimentConfig, data)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)


def effective_config(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(effective_config(cfg), indent=2, sort_keys=True) + "\n"


def _check(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate(cfg: ExperimentConfig) -> None:
    """Run every module precondition that can be checked without doing work."""
    for name in ("opo1", "opo2"):
        try:
            opo_params(getattr(cfg, name))
        except SqueezeLabError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    _check(cfg.pump_power_w >= 0, "pump_power_w", "must be non-negative")
    _check(0 <= cfg.beam_splitter_transmissivity <= 1, "beam_splitter_transmissivity", "must lie in [0, 1]")
    _check(len(cfg.path_efficiency) == 2, "path_efficiency", "needs one value per arm")
    for i, e in enumerate(cfg.path_efficiency):
        _check(0 <= e <= 1, f"path_efficiency[{i}]", "must lie in [0, 1]")
    s = cfg.synth
    _check(s.n_samples >= 2, "synth.n_samples", "must be at least 2")
    _check(s.sample_rate > 0, "synth.sample_rate", "must be positive")
    _check(0 < s.detector_bw < s.sample_rate / 2, "synth.detector_bw", "must lie below Nyquist")
    _check(s.clearance_db > 0, "synth.clearance_db", "must be positive")
    _check(s.phase_jitter_rms >= 0, "synth.phase_jitter_rms", "must be non-negative")
    _check(s.jitter_block >= 1, "synth.jitter_block", "must be positive")
    a = cfg.analysis
    for prefix, fc, bw in (
        ("analysis.f_center", a.f_center, a.bandwidth),
        ("analysis.single_mode_center", a.single_mode_center, a.single_mode_bandwidth),
    ):
        _check(bw > 0 and fc - bw / 2 > 0, prefix, "band must be positive and exclude DC")
        _check(2 * (fc + bw / 2) < s.sample_rate, prefix, "band exceeds Nyquist")
    _check(a.n_blocks >= 1, "analysis.n_blocks", "must be at least 1")
    _check(
        s.n_samples // a.n_blocks >= 10 * s.sample_rate / a.bandwidth,
        "analysis.n_blocks",
        "blocks too short for the analysis bandwidth",
    )
    seg = a.welch_segment_len
    _check(seg >= 2 and not seg & (seg - 1), "analysis.welch_segment_len", "must be a power of two")
    _check(seg <= s.n_samples, "analysis.welch_segment_len", "exceeds the trace length")
    _check(0 <= a.welch_overlap < 1, "analysis.welch_overlap", "must lie in [0, 1)")
    _check(cfg.fit.regime in ("overcoupled", "undercoupled"), "fit.regime", "unknown coupling regime")
    if cfg.fit.eta_tot is not None:
        _check(0 < cfg.fit.eta_tot <= 1, "fit.eta_tot", "must lie in (0, 1]")
    _check(cfg.fit.max_iter >= 1, "fit.max_iter", "must be positive")
    _check(cfg.model.n_points >= 2, "model.n_points", "must be at least 2")
    if cfg.model.powers_w is not None:
        for i, p in enumerate(cfg.model.powers_w):
            _check(p >= 0, f"model.powers_w[{i}]", "must be non-negative")
    _check(cfg.seed >= 0, "seed", "must be non-negative")


def opo_params(c: OpoConfig):
    from .devices import OpoParams

    return OpoParams(c.eta_esc, c.eta_cpl, c.eta_det, c.p_th, c.hwhm, c.squeeze_angle, c.label)
