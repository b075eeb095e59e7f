import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from drivendicke import cli
from drivendicke.dynamics import IntegrationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(args, **kw):
    return CliRunner().invoke(cli.main, [str(a) for a in args], **kw)


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_spectrum_gaps(tmp_path):
    r = run(["--config", CONFIGS / "spectrum_n4.toml", "--out", tmp_path, "spectrum"])
    assert r.exit_code == 0, r.output
    rows = [row for row in read_csv(tmp_path / "spectrum.csv") if row["n"] == "0"]
    gaps = [float(row["Delta_k"]) for row in rows[:-1]]
    assert gaps == pytest.approx([3.1457, 2.6849, 2.2241, 1.7633], abs=5e-4)
    assert rows[-1]["Delta_k"] == ""


def test_spectrum_uncoupled_and_magnon(tmp_path):
    cfg = write(tmp_path, "[system]\nN = 4\ng = 0.0\n")
    assert run(["--config", cfg, "--out", tmp_path / "a", "spectrum"]).exit_code == 0
    gaps = {row["Delta_k"] for row in read_csv(tmp_path / "a" / "spectrum.csv") if row["Delta_k"]}
    assert [float(x) for x in gaps] == pytest.approx([5.4 / 2.2])
    r = run(["--config", CONFIGS / "magnon_n200.toml", "--out", tmp_path / "m", "spectrum"])
    assert r.exit_code == 0, r.output
    first = read_csv(tmp_path / "m" / "spectrum.csv")[0]
    assert float(first["Delta_m"]) == pytest.approx(48.3041, abs=1e-3)


def test_si_units(tmp_path):
    w = 2 * 3.141592653589793 * 2.2e9
    cfg = write(tmp_path, f"[system]\nunits = 'si'\nN = 4\ng = {0.24 * w}\n")
    assert run(["--config", cfg, "--out", tmp_path, "spectrum"]).exit_code == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["params"]["natural"]["g"] == pytest.approx(0.24)
    assert doc["params"]["si"]["omega_r_rad_s"] == pytest.approx(w)


def test_sidebands_selected_period(tmp_path):
    cfg = write(tmp_path, "[system]\nN = 4\ng = 0.24\n[drive]\nk0 = 1\neta_d = 1.84\n")
    assert run(["--config", cfg, "--out", tmp_path, "sidebands"]).exit_code == 0
    doc = json.loads((tmp_path / "sidebands.json").read_text())
    assert doc["selected"]["period_T_s"] == pytest.approx(1.7893e-8, rel=5e-3)
    assert doc["collisions"] == [] and len(doc["terms"]) > 100


def test_sidebands_interaction_off(tmp_path):
    cfg = write(tmp_path, "[system]\nN = 4\ng = 0.24\n[drive]\nk0 = 1\neta_d = 3.8317059702075125\n")
    assert run(["--config", cfg, "--out", tmp_path, "sidebands"]).exit_code == 0
    doc = json.loads((tmp_path / "sidebands.json").read_text())
    assert abs(doc["selected"]["rabi"]) < 1e-12 and "interaction off" in doc["selected"]["note"]


def test_collision_exit_codes(tmp_path):
    args = ["--config", CONFIGS / "collision_n5.toml", "--out", tmp_path]
    r = run(args + ["sidebands"])
    assert r.exit_code == 0
    doc = json.loads((tmp_path / "sidebands.json").read_text())
    assert len(doc["collisions"]) == 1 and "Delta_0/2" in doc["collisions"][0]
    assert run(args + ["--strict", "sidebands"]).exit_code == 3
    assert run(args + ["--strict", "evolve"]).exit_code == 3


@pytest.mark.parametrize("text", [
    "[system]\ng = 0.2\n",                                # missing N
    "[system]\nN = 4\ng = 0.2\nunits = 'imperial'\n",
    "[system\nN = 4\n",                                   # malformed TOML
    "[system]\nN = 4\ng = 0.2\n[sweep]\naxis = 'delta'\ncount = 3\nstart = 0\nstop = 1\n",
])
def test_config_errors(tmp_path, text):
    cfg = write(tmp_path, text)
    verb = "sweep" if "sweep" in text else "spectrum"
    assert run(["--config", cfg, "--out", tmp_path, verb]).exit_code == 2


def test_missing_config_and_bad_tol(tmp_path):
    assert run(["--config", tmp_path / "nope.toml", "spectrum"]).exit_code == 2
    assert run(["--config", CONFIGS / "spectrum_n4.toml", "--tol", "0.1", "spectrum"]).exit_code == 2


def test_zero_duration_schedule_rejected(tmp_path):
    sched = {"segments": [{"omega_d": 2.0, "Omega_d": 1.0, "duration": 0.0}]}
    (tmp_path / "s.json").write_text(json.dumps(sched))
    cfg = write(tmp_path, "[system]\nN = 2\ng = 0.24\n[evolve]\nprotocol = 'schedule'\nschedule_file = 's.json'\n")
    assert run(["--config", cfg, "--out", tmp_path, "evolve"]).exit_code == 2


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def fail(*a, **k):
        raise IntegrationError("boom")

    monkeypatch.setattr(cli, "simulate_protocol", fail)
    cfg = write(tmp_path, "[system]\nN = 2\ng = 0.24\n[evolve]\nprotocol = 'step'\n")
    assert run(["--config", cfg, "--out", tmp_path, "evolve"]).exit_code == 4


def test_evolve_schedule_file(tmp_path):
    sched = {"segments": [{"omega_d": 3.0, "Omega_d": 2.0, "duration": 5.0}]}
    (tmp_path / "s.json").write_text(json.dumps(sched))
    cfg = write(tmp_path, "[system]\nN = 2\ng = 0.24\nfock_cutoff = 6\n"
                          "[evolve]\nprotocol = 'schedule'\nschedule_file = 's.json'\nsample_count = 4\n")
    assert run(["--config", cfg, "--out", tmp_path, "evolve"]).exit_code == 0
    rows = read_csv(tmp_path / "evolution.csv")
    assert len(rows) == 5 and list(rows[0]) == ["t", "P_0_0", "P_1_0", "P_2_0", "norm"]


def test_evolve_ghz_and_determinism(tmp_path):
    args = ["--config", CONFIGS / "ghz_n4.toml"]
    assert run(args + ["--out", tmp_path / "a", "evolve"]).exit_code == 0
    assert run(args + ["--out", tmp_path / "b", "evolve"]).exit_code == 0
    doc = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert doc["final_fidelity"] == pytest.approx(0.998, abs=2e-3)
    assert doc["step_end_times_s"][-1] == pytest.approx(6.8657e-8, rel=1e-3)
    for name in ("summary.json", "evolution.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_evolve_trapping_plateaus(tmp_path):
    r = run(["--config", CONFIGS / "trapping_amplitude.toml", "--out", tmp_path, "evolve"])
    assert r.exit_code == 0, r.output
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert [seg["segment"] for seg in doc["off_segments"]] == [1, 3]
    assert all(seg["max_loss"] < 0.01 for seg in doc["off_segments"])


def test_evolve_rabi_fit(tmp_path):
    assert run(["--config", CONFIGS / "rabi_k1.toml", "--out", tmp_path, "evolve"]).exit_code == 0
    fit = json.loads((tmp_path / "summary.json").read_text())["rabi_fit"]
    assert fit["T_s"] == pytest.approx(1.7893e-8, rel=5e-3) and fit["residual_max"] < 0.02


def test_sweep_g(tmp_path):
    assert run(["--config", CONFIGS / "sweep_g.toml", "--out", tmp_path, "sweep"]).exit_code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert [float(r["fidelity"]) for r in rows] == pytest.approx([0.9893, 0.9998], abs=2e-3)


def test_sweep_omega_d_peak_and_workers(tmp_path):
    cfg = write(tmp_path, "[system]\nN = 4\ng = 0.24\n[sweep]\naxis = 'omega_d'\n"
                          "values = [2.9, 3.1457454545454545, 3.4]\nk0 = 0\nsample_count = 2\nworkers = 2\n")
    assert run(["--config", cfg, "--out", tmp_path, "sweep"]).exit_code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    p = [float(r["P_target"]) for r in rows]
    assert [float(r["omega_d"]) for r in rows] == pytest.approx([2.9, 3.1457454545, 3.4])
    assert p[1] > 0.98 and max(p[0], p[2]) < 0.1


def test_single_point_sweep_matches_evolve(tmp_path):
    cfg = write(tmp_path, "[system]\nN = 3\ng = 0.24\nfock_cutoff = 8\n"
                          "[evolve]\nprotocol = 'step'\nk0 = 0\nsample_count = 4\n"
                          "[sweep]\naxis = 'eta_d'\nstart = 1.84\nstop = 1.84\ncount = 1\nk0 = 0\nsample_count = 4\n")
    assert run(["--config", cfg, "--out", tmp_path, "sweep"]).exit_code == 0
    assert run(["--config", cfg, "--out", tmp_path, "evolve"]).exit_code == 0
    row = read_csv(tmp_path / "sweep.csv")[0]
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert float(row["fidelity"]) == pytest.approx(doc["final_fidelity"], abs=1e-11)
