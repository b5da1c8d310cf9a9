import json
import subprocess
import sys

import numpy as np
import pytest

from axismots.cli import dump_json, load_config, run
from axismots.errors import ConfigError

RIGID = """\
[metric]
preset = round

[extrinsic]
beta = 0.6:1:0

[solver]
n = 128
c = 0.64
"""

PERTURBED = """\
[metric]
preset = sin3
eps = 0.1

[extrinsic]
alpha = 0.2
beta = 0.3:2:0
warp = 0.5:2:0, 0.3:2:2

[solver]
n = 64
"""

LEMMA = """\
[metric]
preset = round

[extrinsic]
beta = 0.4:2:0

[solver]
n = 64
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="model.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# nariai


def test_nariai_point_json(capsys):
    code, out, _ = call(capsys, "nariai", "point", "--a", "0.2", "--ell", "1")
    assert code == 0
    d = json.loads(out)
    assert abs(d["area"] - 3.7548) <= 1e-3 and abs(d["bound"] - 3.7651) <= 1e-3
    assert list(d)[:3] == ["a_over_ell", "ell", "rc2"]


def test_nariai_point_csv_and_out(capsys, tmp_path):
    code, out, _ = call(capsys, "nariai", "point", "--a", "0.25", "--csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "a_over_ell,rc2,area,omega,bound,gap" and len(lines) == 2
    target = tmp_path / "pt.json"
    code, out, _ = call(capsys, "nariai", "point", "--a", "0.25", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["a_over_ell"] == 0.25


def test_nariai_beyond_a_max_is_domain_error(capsys):
    code, out, err = call(capsys, "nariai", "point", "--a", "0.3", "--ell", "1")
    assert code == 1 and out == ""
    assert "0.267949" in err


def test_nariai_sweep(capsys):
    code, out, _ = call(capsys, "nariai", "sweep", "--a-min", "0", "--a-max", "0.1",
                        "--steps", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "a_over_ell,rc2,area,omega,bound,gap" and len(lines) == 6
    gaps = [float(r.split(",")[-1]) for r in lines[2:]]
    assert all(g > 0 for g in gaps)


def test_nariai_sweep_bad_range(capsys):
    code, _, err = call(capsys, "nariai", "sweep", "--a-min", "0.2", "--a-max", "0.1",
                        "--steps", "3")
    assert code == 3 and "a-min" in err


# ---------------------------------------------------------------------------
# eig / omega


def test_eig_round_rigid(capsys):
    code, out, _ = call(capsys, "eig", "--preset", "round", "--c", "1.0", "--n", "256")
    assert code == 0
    d = json.loads(out)
    assert abs(d["lambda1"]) <= 1e-6 and d["n"] == 256 and d["axisymmetric_minimum"]


def test_eig_config(capsys, cfg):
    code, out, _ = call(capsys, "eig", "--config", cfg(PERTURBED), "--m-max", "3", "--json")
    assert code == 0
    d = json.loads(out)
    assert d["lambda1"] > 0 and d["m_max"] == 3


def test_eig_preset_needing_parameters(capsys):
    code, _, err = call(capsys, "eig", "--preset", "poly")
    assert code == 3 and "--config" in err


def test_eig_unknown_preset(capsys):
    code, _, _ = call(capsys, "eig", "--preset", "torus")
    assert code == 1


def test_omega_rigid(capsys, cfg):
    code, out, _ = call(capsys, "omega", "--config", cfg(RIGID))
    assert code == 0
    d = json.loads(out)
    assert d["area"] == pytest.approx(d["bound"], rel=1e-10)
    # beta = 0.6 sin on the unit sphere: |X^eta|^2 = 0.36 everywhere
    assert d["omega"] == pytest.approx(0.36, rel=1e-11)
    assert d["area"] == pytest.approx(4 * np.pi, rel=1e-11)


def test_omega_nonpositive_c(capsys, cfg):
    code, _, _ = call(capsys, "omega", "--config", cfg(RIGID), "--c", "0")
    assert code == 1


# ---------------------------------------------------------------------------
# foliate / verify


def test_foliate_outputs(capsys, cfg, tmp_path):
    out_dir = tmp_path / "chart"
    code, out, _ = call(capsys, "foliate", "--config", cfg(PERTURBED), "--s-max", "0.2",
                        "--leaves", "3", "--out", str(out_dir))
    assert code == 0 and out == ""
    d = json.loads((out_dir / "chart.json").read_text())
    assert [lf["s"] for lf in d["leaves"]] == [0.0, 0.1, 0.2]
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "chart.json", "leaf_000.csv", "leaf_001.csv", "leaf_002.csv"]


def test_foliate_non_mots(capsys, cfg):
    text = PERTURBED.replace("warp = 0.5:2:0, 0.3:2:2", "warp = 0.5:1:0")
    code, _, err = call(capsys, "foliate", "--config", cfg(text), "--s-max", "0.1",
                        "--leaves", "2")
    assert code == 1 and "MOTS" in err


def test_foliate_nonconvergence(capsys, cfg):
    text = PERTURBED + "max_iters = 1\n"
    code, _, err = call(capsys, "foliate", "--config", cfg(text), "--s-max", "0.3",
                        "--leaves", "2")
    assert code == 2 and "numerical" in err


def test_verify_rigidity_passes(capsys, cfg):
    code, out, _ = call(capsys, "verify", "rigidity", "--config", cfg(RIGID))
    assert code == 0
    d = json.loads(out)
    assert d["ok"] and d["checks"]["saturated"] and d["checks"]["lambda1_zero"]
    assert not d["checks"]["slice_minimizes_omega"]


def test_verify_rigidity_round_k0(capsys, cfg):
    text = "[metric]\npreset = round_r\nscale = 2.0\n\n[solver]\nn = 64\nc = 0.25\n"
    code, out, _ = call(capsys, "verify", "rigidity", "--config", cfg(text))
    d = json.loads(out)
    assert code == 0 and d["checks"]["round_kappa_c"] and d["checks"]["beta_vanishes"]


def test_verify_beta_deformation(capsys, cfg):
    code, out, _ = call(capsys, "verify", "lemma-beta", "--config", cfg(LEMMA), "--basis", "3")
    assert code == 0
    d = json.loads(out)
    assert d["omega_star"] < d["base_omega"] - 1e-3 * 0.16
    assert d["base_omega"] == pytest.approx(2 / 3 * 0.16, rel=1e-9)


# ---------------------------------------------------------------------------
# plotdata


def test_plotdata_variants(capsys, cfg):
    code, out, _ = call(capsys, "plotdata", "nariai", "point", "--a", "0.1")
    assert code == 0 and out.startswith("a_over_ell,")
    code, out, _ = call(capsys, "plotdata", "eig", "--preset", "round", "--n", "16")
    assert code == 0 and out.splitlines()[0] == "theta,u" and len(out.splitlines()) == 17
    code, out, _ = call(capsys, "plotdata", "foliate", "--config", cfg(PERTURBED),
                        "--s-max", "0.1", "--leaves", "2")
    assert code == 0 and out.splitlines()[0] == "theta,f_0,f_1"
    code, out, _ = call(capsys, "plotdata", "omega", "--config", cfg(RIGID))
    assert code == 0 and out.startswith("theta,")


# ---------------------------------------------------------------------------
# usage, config, determinism


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["nariai", "point"],
    ["nariai", "point", "--a", "x"],
    ["nariai", "point", "--a", "0.1", "--json", "--csv"],
    ["eig", "--preset", "round", "--config", "x.ini"],
    ["eig", "--preset", "round", "--n", "4"],
    ["eig", "--preset", "round", "--n", "5000"],
])
def test_usage_errors_exit_3(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 3 and out == "" and err


def test_strict_config_rejects_unknown_key(capsys, cfg):
    path = cfg(RIGID.replace("c = 0.64", "cc = 0.64"))
    with pytest.raises(ConfigError, match="cc"):
        load_config(path)
    code, _, err = call(capsys, "omega", "--config", path)
    assert code == 3 and "cc" in err


@pytest.mark.parametrize("text", [
    "[metrik]\npreset = round\n",
    "[metric]\npreset = round\n[solver]\nn = abc\n",
    "[metric]\npreset = sin3\neps = x\n",
    "[extrinsic]\nbeta = 0.3:2\n",
])
def test_malformed_configs(capsys, cfg, text):
    code, _, _ = call(capsys, "omega", "--config", cfg(text))
    assert code == 3


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = call(capsys, "omega", "--config", str(tmp_path / "nope.ini"))
    assert code == 3


def test_output_is_deterministic(capsys, cfg):
    runs = [("nariai", "point", "--a", "0.2"),
            ("nariai", "sweep", "--a-min", "0", "--a-max", "0.2", "--steps", "4"),
            ("eig", "--config", cfg(PERTURBED), "--m-max", "2")]
    for argv in runs:
        _, a, _ = call(capsys, *argv)
        _, b, _ = call(capsys, *argv)
        assert a == b and a


def test_json_floats_twelve_digits():
    text = dump_json({"x": np.pi, "y": [np.float64(1 / 3)], "z": np.nan, "b": np.True_})
    d = json.loads(text)
    assert d["x"] == 3.14159265359 and d["y"] == [0.333333333333]
    assert d["z"] is None and d["b"] is True


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "axismots", "nariai", "point", "--a", "0.1"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 0
    assert json.loads(r.stdout)["a_over_ell"] == 0.1
    r = subprocess.run([sys.executable, "-m", "axismots", "nariai", "point", "--a", "0.5"],
                       capture_output=True, text=True, timeout=120)
    assert r.returncode == 1 and r.stdout == ""


def test_rigidity_battery_reports_hypotheses(capsys, cfg):
    # mu + J(nu) < 0 on this surface: the bound is not applicable
    code, out, _ = call(capsys, "verify", "rigidity", "--config", cfg(PERTURBED))
    d = json.loads(out)
    assert code == 0 and not d["hypotheses"]
    assert not d["checks"]["energy_ge_c"] and d["checks"]["stable"]
    assert d["values"]["min_energy"] < 0


def test_rigidity_battery_flags_violated_bound(capsys, cfg):
    # radius 2 with c = 1: mu = 1/4 < c, so the area excess is not a violation
    big = "[metric]\npreset = round_r\nscale = 2.0\n\n[solver]\nn = 64\nc = 1.0\n"
    code, out, _ = call(capsys, "verify", "rigidity", "--config", cfg(big))
    d = json.loads(out)
    assert not d["hypotheses"] and not d["checks"]["area_le_bound"] and code == 0
    # unit sphere with c = 1/2: hypotheses hold and the bound is strict
    small = "[metric]\npreset = round\n\n[solver]\nn = 64\nc = 0.5\n"
    code, out, _ = call(capsys, "verify", "rigidity", "--config", cfg(small))
    d = json.loads(out)
    assert d["hypotheses"] and d["checks"]["area_le_bound"] and not d["checks"]["saturated"]
    assert code == 0
