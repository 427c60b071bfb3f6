"""Command line front-end: ``squeezelab model|synth|analyze|fit``.

Failures print one line ``error <CODE>: <message>`` on stderr and exit
nonzero. Analysis verdicts never change the exit status.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, config, estimation, experiment, synth
from .devices import lorentzian_transmission, to_db
from .errors import ConfigError, ConvergenceError, SchemaError, SqueezeLabError
from .records import Spectrum

EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _log(out: Path, message: str) -> None:
    with open(out / "run.log", "a") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def _prepare(args) -> tuple:
    cfg = config.load_config(args.config) if args.config else config.parse_config({})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "paper_scale", False):
        cfg.synth.sample_rate = synth.FULL_SAMPLE_RATE
        cfg.synth.n_samples = synth.FULL_N_SAMPLES
        cfg.synth.detector_bw = synth.FULL_DETECTOR_BW
        cfg.analysis.welch_segment_len = 2 ** 18
    config.validate(cfg)
    return cfg, Path(cfg.out_dir)


def _finish_outputs(cfg, out: Path, command: str) -> None:
    (out / "effective_config.json").write_text(config.dump_config(cfg))
    _log(out, f"{command} done")


def cmd_model(args) -> int:
    cfg, out = _prepare(args)
    summary = experiment.model_summary(cfg)
    rows = experiment.model_curves(cfg)
    state = experiment.two_mode_state(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "model_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p_pump_W", "opo1_s_minus_dB", "opo1_s_plus_dB", "opo2_s_minus_dB", "opo2_s_plus_dB"])
        for row in rows:
            w.writerow([repr(v) for v in row])
    (out / "two_mode_state.txt").write_text(state.to_text())
    _write_json(out / "model_summary.json", summary)
    lines = [f"pump power: {summary['pump_power_W']} W"]
    for name in ("opo1", "opo2"):
        s = summary[name]
        lines.append(
            f"{name} ({s['label']}): eta_tot={s['eta_tot']:.4f} "
            f"s_minus_dB={s['s_minus_dB']:.3f} s_plus_dB={s['s_plus_dB']:.3f}"
        )
    lines.append(f"duan_simon_lossless={summary['duan_simon_lossless']:.4f}")
    lines.append(f"duan_simon={summary['duan_simon']:.4f} (bound 2)")
    text = "\n".join(lines) + "\n"
    (out / "model_summary.txt").write_text(text)
    sys.stdout.write(text)
    _finish_outputs(cfg, out, "model")
    return 0


def cmd_synth(args) -> int:
    cfg, out = _prepare(args)
    try:
        plan = experiment.synth_plan(cfg)
    except SqueezeLabError as exc:
        raise ConfigError(f"synth: {exc}") from None
    mem = plan.memory_estimate_bytes()
    if args.paper_scale or mem > 2 ** 31:
        print(f"warning: trace set needs about {mem / 2 ** 30:.1f} GiB of memory", file=sys.stderr)
    if args.dry_run:
        print(f"plan ok: {plan.channels} channels x {2 + len(plan.signals)} segments x {plan.n_samples} samples")
        return 0
    t0 = time.perf_counter()
    traces = synth.synth_homodyne_run(plan)
    trace_dir = out / "traces"
    synth.save_traceset(traces, trace_dir)
    wall = time.perf_counter() - t0
    total = traces.channels * len(traces.segments) * traces.n_samples
    print(f"wrote {trace_dir}: {total} samples total, sha256 {traces.digest()}")
    print(f"wall time {wall:.2f} s")
    _finish_outputs(cfg, out, f"synth wall={wall:.3f}s")
    return 0


def _predictions(traces) -> dict:
    sig = traces.meta.get("signals", {})
    pred = {}
    for comb, seg in ((analysis.X_DIFF, analysis.X_SEGMENT), (analysis.P_SUM, analysis.P_SEGMENT)):
        if seg in sig:
            cov = np.array(sig[seg]["cov"])
            if cov.shape == (2, 2):
                c = comb.vector
                pred[comb.label] = float(c @ cov @ c)
    return pred


def cmd_analyze(args) -> int:
    cfg, out = _prepare(args)
    traces = synth.load_traceset(args.trace_dir)
    a = cfg.analysis
    out.mkdir(parents=True, exist_ok=True)
    summary = {"n_samples": traces.n_samples, "sample_rate": traces.sample_rate, "channels": traces.channels}

    if traces.channels == 2:
        res, series = analysis.duan_simon_from_traces(traces, a.f_center, a.bandwidth, a.n_blocks, a.k_sigma)
    else:
        unit = analysis.QuadratureCombination((1.0,), "q")
        series = [
            analysis.bandpass_block_variances(traces, unit, a.single_mode_center, a.bandwidth, a.n_blocks, label)
            for label in traces.signal_labels
        ]
        res = None

    spectra = analysis.segment_spectra(traces, a.welch_segment_len, a.welch_overlap)
    levels = {}
    f_lo = a.single_mode_center - a.single_mode_bandwidth / 2
    f_hi = a.single_mode_center + a.single_mode_bandwidth / 2
    for (label, ch), (s, sh, d) in spectra.items():
        norm = analysis.normalize_to_shot(s, sh, d)
        name = f"spectrum_{synth.segment_filename(label, ch)[:-4]}.csv"
        analysis.write_spectrum_csv(out / name, norm)
        levels[f"{label}/ch{ch}"] = analysis.band_level_db(s, sh, d, f_lo, f_hi)
    analysis.write_block_csv(out / "blocks.csv", series)

    summary["single_mode_levels_dB"] = levels
    summary["combinations"] = {
        s.label: {"segment": s.segment, "mean_dB": s.mean_db, "sigma_dB": s.sigma_db} for s in series
    }
    pred = _predictions(traces)
    if pred:
        summary["predicted_combinations"] = {k: {"linear": v, "dB": float(to_db(v))} for k, v in pred.items()}
    if res is not None:
        summary.update(res.to_dict())
        if len(pred) == 2:
            summary["predicted_duan_simon"] = sum(pred.values())
    _write_json(out / "summary.json", summary)
    if res is not None:
        sigma = "n/a" if res.sigma is None else f"{res.sigma:.4f}"
        print(f"duan_simon_sum={res.value:.4f} sigma={sigma} entangled={str(res.entangled).lower()}")
    _finish_outputs(cfg, out, "analyze")
    return 0


def _read_lorentzian_csv(path) -> Spectrum:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ("frequency_Hz", "transmission"):
            raise SchemaError("lorentzian CSV must have columns frequency_Hz,transmission")
        try:
            rows = [(float(r["frequency_Hz"]), float(r["transmission"])) for r in reader]
        except ValueError as exc:
            raise SchemaError(f"malformed row: {exc}") from None
    if not rows:
        raise SchemaError("lorentzian CSV contains no data rows")
    rows.sort()
    f, t = np.array(rows).T
    return Spectrum(f, t)


def cmd_fit(args) -> int:
    cfg, out = _prepare(args)
    fc = cfg.fit
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "lorentzian":
        spec = _read_lorentzian_csv(args.data_csv)
        fit = estimation.fit_lorentzian(spec, fc.max_iter, fc.xtol)
        p = fit.parameters
        lambda0 = estimation.SPEED_OF_LIGHT / p["f0"]
        fit.extra["q_loaded"] = estimation.q_from_linewidth(lambda0, p["hwhm"])
        fit.extra["lambda0_m"] = lambda0
        fit.extra["regime"] = fc.regime
        fit.extra["eta_esc"] = estimation.escape_from_extinction(min(max(p["t_min"], 0.0), 1.0), fc.regime)
        x = spec.frequencies
        cav = estimation.cavity_from_fit(fit, fc.regime)
        curve = [("frequency_Hz", "data", "model"), *zip(x, spec.psd, lorentzian_transmission(x, cav))]
    else:
        eta = args.eta_tot if args.eta_tot is not None else fc.eta_tot
        if eta is None:
            raise ConfigError("fit.eta_tot: required for threshold fits (or pass --eta-tot)")
        sweep = estimation.read_sweep_csv(args.data_csv)
        fit = estimation.fit_threshold(sweep, eta, fc.max_iter, fc.xtol)
        p = np.array([s.p_pump for s in sweep])
        m_minus, m_plus = estimation.sweep_model_db(p, fit.parameters["p_th"], eta)
        curve = [("p_pump_W", "s_minus_dB", "s_plus_dB", "model_minus_dB", "model_plus_dB")]
        curve += list(zip(p, [s.s_minus_db for s in sweep], [s.s_plus_db for s in sweep], m_minus, m_plus))
    _write_json(out / "fit_result.json", fit.to_dict())
    with open(out / "fit_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(curve[0])
        for row in curve[1:]:
            w.writerow([repr(float(v)) for v in row])
    for k, v in fit.parameters.items():
        print(f"{k}={v:.6g} +/- {fit.uncertainties[k]:.3g}")
    if "q_loaded" in fit.extra:
        print(f"q_loaded={fit.extra['q_loaded']:.6g}")
    _finish_outputs(cfg, out, f"fit {args.kind}")
    if not fit.converged:
        raise ConvergenceError(f"fit did not converge after {fit.iterations} iterations: {fit.message}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeezelab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("--paper-scale", action="store_true", help="3.2 GS/s, 1e9-sample acquisition")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", parents=[common], help="closed-form predictions")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("synth", parents=[common], help="synthesize a homodyne trace set")
    p.add_argument("--dry-run", action="store_true", help="validate and report the plan only")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", parents=[common], help="analyze a trace directory")
    p.add_argument("trace_dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", parents=[common], help="fit a resonance scan or a pump sweep")
    p.add_argument("data_csv")
    p.add_argument("--kind", choices=("lorentzian", "threshold"), required=True)
    p.add_argument("--eta-tot", type=float, help="fixed total efficiency for threshold fits")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SqueezeLabError as exc:
        msg = " ".join(str(exc).split())
        print(f"error {exc.code}: {msg}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_FAILURE
    except OSError as exc:
        print(f"error E_IO: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
