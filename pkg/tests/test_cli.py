import json
import subprocess
import sys

import numpy as np
import pytest

from squeezelab import config
from squeezelab.cli import main
from squeezelab.devices import CavityParams, OpoParams, lorentzian_transmission
from squeezelab.estimation import synthetic_sweep, write_sweep_csv

SMALL = {"synth": {"n_samples": 2_000_000}}


def write_cfg(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_model_defaults(tmp_path, capsys):
    code, out, _ = run(["model", "--out", str(tmp_path)], capsys)
    assert code == 0
    s = json.loads((tmp_path / "model_summary.json").read_text())
    # default chain 0.864 * 0.72 * 0.87 = 0.5412
    assert s["opo2"]["s_minus_dB"] == pytest.approx(-0.5145, abs=5e-4)
    assert s["opo1"]["s_minus_dB"] == pytest.approx(-0.4107, abs=5e-4)
    assert s["duan_simon"] == pytest.approx(s["duan_simon_lossless"], abs=1e-12)
    assert "duan_simon_lossless=" in out
    for name in ("model_curves.csv", "two_mode_state.txt", "model_summary.txt", "effective_config.json", "run.log"):
        assert (tmp_path / name).is_file()


def test_model_rounded_efficiency(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"opo2": {"eta_esc": 0.54, "eta_cpl": 1.0, "eta_det": 1.0}})
    assert main(["model", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o" / "model_summary.json").read_text())
    assert round(s["opo2"]["s_minus_dB"], 3) == -0.513
    assert "s_minus_dB=-0.513" in (tmp_path / "o" / "model_summary.txt").read_text()


def test_model_zero_pump(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"pump_power_w": 0.0})
    assert main(["model", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o" / "model_summary.json").read_text())
    for name in ("opo1", "opo2"):
        assert s[name]["s_minus_dB"] == 0.0 and s[name]["s_plus_dB"] == 0.0
    assert s["duan_simon"] == pytest.approx(2.0, abs=1e-12)


def test_model_above_threshold(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"pump_power_w": 20.0})
    code, _, err = run(["model", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code != 0
    assert err.startswith("error E_ABOVE_THRESHOLD:")
    assert len(err.strip().splitlines()) == 1


def test_config_errors(tmp_path, capsys):
    bad = write_cfg(tmp_path / "bad.json", {"synth": {"n_sample": 5}})
    code, _, err = run(["model", "--config", bad, "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert err.startswith("error E_CONFIG:") and "synth.n_sample" in err
    code, _, err = run(["model", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2
    (tmp_path / "broken.json").write_text("{")
    code, _, err = run(["model", "--config", str(tmp_path / "broken.json")], capsys)
    assert code == 2
    bad = write_cfg(tmp_path / "b2.json", {"opo1": {"eta_esc": 1.5}})
    code, _, err = run(["model", "--config", bad], capsys)
    assert code == 2 and "opo1" in err


def test_synth_deterministic(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", SMALL)
    code, out1, _ = run(["synth", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "a")], capsys)
    assert code == 0
    assert "16000000 samples total" in out1 and "wall time" in out1
    _, out2, _ = run(["synth", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "b")], capsys)
    digest = lambda s: s.split("sha256 ")[1].split()[0]
    assert digest(out1) == digest(out2)
    for f in (tmp_path / "a" / "traces").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "traces" / f.name).read_bytes()
    _, out3, _ = run(["synth", "--config", cfg, "--seed", "6", "--out", str(tmp_path / "c")], capsys)
    assert digest(out3) != digest(out1)


def test_synth_paper_scale_dry_run(tmp_path, capsys):
    code, out, err = run(["synth", "--paper-scale", "--dry-run", "--out", str(tmp_path / "p")], capsys)
    assert code == 0
    assert "warning" in err and "GiB" in err
    assert "1000000000 samples" in out
    eff = json.loads(config.dump_config(config.parse_config({})))
    assert eff["synth"]["sample_rate"] == 100e6
    assert not (tmp_path / "p").exists()


def test_synth_invalid_covariance(tmp_path, capsys):
    data = {"synth": {"n_samples": 100_000, "covariances": {"x1x2": [[1, 2], [2, 1]]}}, "analysis": {"n_blocks": 1}}
    cfg = write_cfg(tmp_path / "c.json", data)
    out = tmp_path / "o"
    code, _, err = run(["synth", "--config", cfg, "--out", str(out)], capsys)
    assert code != 0 and err.startswith("error E_CONFIG:")
    assert not out.exists()


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    cfg = write_cfg(d / "c.json", SMALL)
    assert main(["synth", "--config", cfg, "--seed", "3", "--out", str(d / "s")]) == 0
    assert main(["analyze", str(d / "s" / "traces"), "--config", cfg, "--seed", "3", "--out", str(d / "a")]) == 0
    return d


def test_analyze_matches_prediction(default_run):
    s = json.loads((default_run / "a" / "summary.json").read_text())
    assert abs(s["duan_simon_sum"] - s["predicted_duan_simon"]) < 5 * s["sigma"]
    assert s["entangled"] is True
    for label, pred in s["predicted_combinations"].items():
        got = s["combinations"][label]
        assert abs(got["mean_dB"] - pred["dB"]) < 5 * got["sigma_dB"]
    names = sorted(p.name for p in (default_run / "a").iterdir())
    assert "blocks.csv" in names and "spectrum_signal_x1x2_ch0.csv" in names
    blocks = (default_run / "a" / "blocks.csv").read_text().splitlines()
    assert blocks[0] == "block_index,t_start_s,variance_dB,combination"
    assert len(blocks) == 21


def test_effective_config_round_trip(default_run, tmp_path):
    eff = default_run / "a" / "effective_config.json"
    data = json.loads(eff.read_text())
    assert data["seed"] == 3 and data["synth"]["n_samples"] == 2_000_000
    data["out_dir"] = str(tmp_path / "again")
    cfg = write_cfg(tmp_path / "eff.json", data)
    assert main(["analyze", str(default_run / "s" / "traces"), "--config", cfg]) == 0
    for name in ("summary.json", "blocks.csv", "spectrum_signal_p1p2_ch1.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (default_run / "a" / name).read_bytes()
    assert (tmp_path / "again" / "effective_config.json").read_text() == json.dumps(data, indent=2, sort_keys=True) + "\n"


def test_analyze_vacuum(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path / "c.json",
        {"synth": {"n_samples": 2_000_000, "covariances": {"x1x2": [[1, 0], [0, 1]], "p1p2": [[1, 0], [0, 1]]}}},
    )
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    code, out, _ = run(["analyze", str(tmp_path / "s" / "traces"), "--config", cfg, "--out", str(tmp_path / "a")], capsys)
    assert code == 0
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert s["duan_simon_sum"] == pytest.approx(2.0, abs=5 * s["sigma"])
    assert s["entangled"] is False
    assert "entangled=false" in out


def test_analyze_missing_segment(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {"synth": {"n_samples": 200_000, "covariances": {"x1x2": [[1, 0], [0, 1]]}}})
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    code, _, err = run(["analyze", str(tmp_path / "s" / "traces"), "--config", cfg, "--out", str(tmp_path / "a")], capsys)
    assert code == 1
    assert err.startswith("error E_MISSING_SEGMENT:") and "signal:p1p2" in err


def test_analyze_bad_manifest(tmp_path, capsys):
    code, _, err = run(["analyze", str(tmp_path), "--out", str(tmp_path / "a")], capsys)
    assert code == 1 and err.startswith("error E_MANIFEST:")


def test_fit_lorentzian(tmp_path, capsys):
    cav = CavityParams(193.414e12, 6.719e9, 0.4789)
    f = cav.f0 + np.linspace(-10, 10, 401) * cav.hwhm
    rows = ["frequency_Hz,transmission"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(f, lorentzian_transmission(f, cav))]
    (tmp_path / "scan.csv").write_text("\n".join(rows) + "\n")
    code, out, _ = run(["fit", str(tmp_path / "scan.csv"), "--kind", "lorentzian", "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    r = json.loads((tmp_path / "o" / "fit_result.json").read_text())
    assert r["parameters"]["hwhm"] == pytest.approx(6.719e9, rel=1e-6)
    assert r["q_loaded"] == pytest.approx(193.414e12 / (2 * 6.719e9), rel=1e-6)
    assert r["eta_esc"] == pytest.approx(0.846, abs=5e-4)
    assert "q_loaded=" in out
    curve = (tmp_path / "o" / "fit_curve.csv").read_text().splitlines()
    assert curve[0] == "frequency_Hz,data,model" and len(curve) == 402


def test_fit_threshold(tmp_path, capsys):
    rng = np.random.default_rng(23)
    opo = OpoParams(0.53, 1, 1, 23.0, 6.719e9)
    sweep = synthetic_sweep([0.05, 0.1, 0.3, 0.6, 1.0, 2.0], opo, 0.02, rng)
    write_sweep_csv(tmp_path / "sweep.csv", sweep)
    code, _, err = run(["fit", str(tmp_path / "sweep.csv"), "--kind", "threshold", "--out", str(tmp_path / "x")], capsys)
    assert code == 2 and "eta_tot" in err
    code, out, _ = run(
        ["fit", str(tmp_path / "sweep.csv"), "--kind", "threshold", "--eta-tot", "0.53", "--out", str(tmp_path / "o")],
        capsys,
    )
    assert code == 0
    r = json.loads((tmp_path / "o" / "fit_result.json").read_text())
    assert r["parameters"]["p_th"] == pytest.approx(23.0, rel=0.05)
    assert r["converged"] and r["uncertainties"]["p_th"] > 0


def test_fit_empty_csv(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("")
    for kind in ("threshold", "lorentzian"):
        code, _, err = run(["fit", str(tmp_path / "e.csv"), "--kind", kind, "--eta-tot", "0.5", "--out", str(tmp_path / "o")], capsys)
        assert code == 1 and err.startswith("error E_SCHEMA:")


def test_fit_non_convergence(tmp_path, capsys):
    rng = np.random.default_rng(1)
    cav = CavityParams(193.414e12, 6.719e9, 0.4789)
    f = cav.f0 + np.linspace(-10, 10, 401) * cav.hwhm
    t = lorentzian_transmission(f, cav) * (1 + 0.01 * rng.standard_normal(f.size))
    rows = ["frequency_Hz,transmission"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(f, t)]
    (tmp_path / "scan.csv").write_text("\n".join(rows) + "\n")
    cfg = write_cfg(tmp_path / "c.json", {"fit": {"max_iter": 1}})
    code, _, err = run(["fit", str(tmp_path / "scan.csv"), "--kind", "lorentzian", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and err.startswith("error E_NO_CONVERGENCE:")
    assert json.loads((tmp_path / "o" / "fit_result.json").read_text())["converged"] is False


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "squeezelab", "model", "--out", str(tmp_path)], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "opo2" in proc.stdout
