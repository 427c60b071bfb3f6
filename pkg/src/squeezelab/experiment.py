"""Assemble the two-source experiment from a configuration."""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig, opo_params
from .devices import opo_output_state, squeezing_vs_pump, to_db
from .gaussian import (
    GaussianState,
    apply_beam_splitter,
    apply_loss,
    apply_phase_rotation,
    duan_simon,
    epr_combinations,
    quadrature_variance,
    tensor_product,
)
from .synth import SignalSpec, SynthPlan, epr_signals


def two_mode_state(
    cfg: ExperimentConfig, pump_power: float | None = None, path_losses: bool = True
) -> GaussianState:
    """Both OPO outputs, per-arm path loss, relative phase on arm 1, then the beam splitter."""
    p = cfg.pump_power_w if pump_power is None else pump_power
    state = tensor_product(
        opo_output_state(p, opo_params(cfg.opo1)),
        opo_output_state(p, opo_params(cfg.opo2)),
    )
    if path_losses:
        for k, eta in enumerate(cfg.path_efficiency):
            state = apply_loss(state, k, eta)
    state = apply_phase_rotation(state, 0, cfg.relative_phase)
    return apply_beam_splitter(state, 0, 1, cfg.beam_splitter_transmissivity)


def predicted_combinations(state: GaussianState) -> dict:
    cx, cp = epr_combinations(2, 0, 1)
    return {cx.label: quadrature_variance(state, cx), cp.label: quadrature_variance(state, cp)}


def synth_plan(cfg: ExperimentConfig, state: GaussianState | None = None) -> SynthPlan:
    s = cfg.synth
    if s.covariances:
        signals = {label: SignalSpec(np.array(cov)) for label, cov in s.covariances.items()}
    else:
        signals = epr_signals(two_mode_state(cfg) if state is None else state)
    return SynthPlan(
        signals,
        n_samples=s.n_samples,
        sample_rate=s.sample_rate,
        detector_bw=s.detector_bw,
        clearance_db=s.clearance_db,
        phase_jitter_rms=s.phase_jitter_rms,
        jitter_block=s.jitter_block,
        seed=cfg.seed,
    )


def model_curves(cfg: ExperimentConfig):
    """Rows ``(P, opo1 S-, opo1 S+, opo2 S-, opo2 S+)`` in dB."""
    opos = [opo_params(cfg.opo1), opo_params(cfg.opo2)]
    if cfg.model.powers_w is not None:
        powers = list(cfg.model.powers_w)
    else:
        powers = list(np.linspace(0.0, 0.9 * min(o.p_th for o in opos), cfg.model.n_points))
    rows = []
    for p in powers:
        row = [float(p)]
        for o in opos:
            row += [float(to_db(v)) for v in squeezing_vs_pump(p, o)]
        rows.append(row)
    return rows


def model_summary(cfg: ExperimentConfig) -> dict:
    p = cfg.pump_power_w
    out = {"pump_power_W": p}
    for name in ("opo1", "opo2"):
        o = opo_params(getattr(cfg, name))
        s_minus, s_plus = squeezing_vs_pump(p, o)
        out[name] = {
            "label": o.label,
            "eta_tot": o.eta_tot,
            "s_minus": s_minus,
            "s_plus": s_plus,
            "s_minus_dB": float(to_db(s_minus)),
            "s_plus_dB": float(to_db(s_plus)),
        }
    lossless = two_mode_state(cfg, path_losses=False)
    full = two_mode_state(cfg)
    out["duan_simon_lossless"] = duan_simon(lossless)
    out["duan_simon"] = duan_simon(full)
    out["combinations"] = predicted_combinations(full)
    return out
