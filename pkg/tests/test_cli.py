import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from platelab.cli import EXIT_CONFIG, EXIT_NOCONV, EXIT_OK, main
from platelab.stability import fit_log_law

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def workdir(tmp_path):
    for f in CONFIGS.iterdir():
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def config(workdir, name, base="forward.yaml", **overrides):
    """Copy of ``base`` with dotted-key overrides written to ``name``."""
    cfg = yaml.safe_load((workdir / base).read_text())
    for key, value in overrides.items():
        node = cfg
        *head, last = key.split(".")
        for part in head:
            node = node.setdefault(part, {})
        node[last] = value
    path = workdir / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def geometry(workdir, name, **overrides):
    return config(workdir, name, base="disc_in_disc.geometry.yaml", **overrides).name


def run(*argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------- check-config and forward


def test_check_config_accepts_shipped_files(workdir, capsys):
    for name in ("forward.yaml", "invert.yaml", "sweep.yaml"):
        assert run("check-config", workdir / name) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_forward_writes_experiment_directory(workdir):
    cfg = config(workdir, "f.yaml", **{"solver.resolution": 16})
    out = workdir / "exp"
    assert run("forward", cfg, "--out", out) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"solution.csv", "solution.json", "energy.json", "traces.csv", "traces.csv.json", "config.yaml",
            "manifest.json", "meta.json"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and set(manifest["input_sha256"]) == {"config", "geometry", "material"}
    header = json.loads((out / "solution.json").read_text())
    assert header["residual"] <= 1e-10 and header["resolution"] == 16
    rows = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == 3 and np.all(np.isfinite(rows))


def test_reruns_are_byte_identical_except_meta(workdir):
    cfg = config(workdir, "f.yaml", **{"solver.resolution": 16})
    run("forward", cfg, "--out", workdir / "a")
    run("forward", cfg, "--out", workdir / "b")
    files = sorted(p.name for p in (workdir / "a").iterdir())
    assert files == sorted(p.name for p in (workdir / "b").iterdir())
    for name in files:
        if name != "meta.json":
            assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes(), name


def test_missing_material_file_names_the_path(workdir, capsys):
    cfg = config(workdir, "f.yaml", material="nowhere.material.yaml")
    assert run("forward", cfg, "--out", workdir / "x") == EXIT_CONFIG
    assert "nowhere.material.yaml" in capsys.readouterr().err


def test_compactness_violation_rejected(workdir, capsys):
    geo = geometry(workdir, "near.geometry.yaml", **{"inclusion.center": [1.2, 0.0]})
    cfg = config(workdir, "f.yaml", geometry=geo)
    assert run("forward", cfg, "--out", workdir / "x") == EXIT_CONFIG
    assert "a-priori" in capsys.readouterr().err


def test_unknown_key_rejected(workdir, capsys):
    cfg = config(workdir, "f.yaml", **{"solver.resoluton": 16})
    assert run("check-config", cfg) == EXIT_CONFIG
    assert "resoluton" in capsys.readouterr().err


# ---------------------------------------------------------------- invert


def invert_config(workdir, **overrides):
    base = {"solver.resolution": 16, "invert.restarts": 0, "invert.budget": 150}
    base.update(overrides)
    return config(workdir, "i.yaml", base="invert.yaml", **base)


def test_invert_writes_reconstruction(workdir):
    out = workdir / "inv"
    assert run("invert", invert_config(workdir), "--out", out) == EXIT_OK
    rec = json.loads((out / "reconstruction.json").read_text())
    assert rec["converged"] and rec["evaluations"] <= 150
    assert rec["hausdorff"] < 0.05
    assert "reconstruction_wall_time_s" in json.loads((out / "meta.json").read_text())


def test_invert_budget_exhaustion_exit_code(workdir, capsys):
    cfg = invert_config(workdir, **{"invert.budget": 1})
    assert run("invert", cfg, "--out", workdir / "inv") == EXIT_NOCONV
    assert "budget" in capsys.readouterr().err
    manifest = json.loads((workdir / "inv" / "manifest.json").read_text())
    assert manifest["status"] == "not converged"


def test_invert_without_truth_rejected(workdir):
    geo = yaml.safe_load((workdir / "disc_in_disc.geometry.yaml").read_text())
    del geo["inclusion"]
    (workdir / "empty.geometry.yaml").write_text(yaml.safe_dump(geo))
    cfg = invert_config(workdir, geometry="empty.geometry.yaml")
    assert run("invert", cfg, "--out", workdir / "inv") == EXIT_CONFIG


# ---------------------------------------------------------------- sweep and fit


def test_sweep_writes_eight_records(workdir):
    cfg = config(workdir, "s.yaml", base="sweep.yaml", **{"solver.resolution": 16})
    out = workdir / "sw"
    assert run("sweep", cfg, "--out", out, "--jobs", 1) == EXIT_OK
    rows = (out / "records.csv").read_text().strip().splitlines()
    assert len(rows) == 9 and rows[0].startswith("pair_id,epsilon,epsilon_norm,delta")
    assert {"fit.json", "sweep.gp"} <= {p.name for p in out.iterdir()}
    vcfg = config(workdir, "c.yaml", **{"verify.records": str(out / "records.csv")})
    assert run("verify", vcfg, "cauchy", "--out", workdir / "c") == EXIT_OK
    assert json.loads((workdir / "c" / "verify_cauchy.json").read_text())["n_points"] == 8


def test_fit_recovers_planted_csv(workdir, capsys):
    eps = np.logspace(-10, -2, 8)
    delta = 2.0 * np.abs(np.log(eps)) ** -0.5
    path = workdir / "planted.csv"
    path.write_text("epsilon_norm,delta\n" + "".join(f"{e!r},{d!r}\n" for e, d in zip(eps.tolist(), delta.tolist())))
    assert run("fit", path, "--out", workdir / "fit", "--family", "planted") == EXIT_OK
    fit = json.loads((workdir / "fit" / "fit.json").read_text())
    assert fit["C_fit"] == pytest.approx(2.0, rel=1e-6)
    assert fit["eta_fit"] == pytest.approx(0.5, abs=1e-6)
    assert fit["family"] == "planted"
    assert fit_log_law(list(zip(eps, delta))).to_dict()["eta_fit"] == pytest.approx(fit["eta_fit"], rel=1e-12)


def test_fit_too_few_records(workdir):
    path = workdir / "short.csv"
    path.write_text("epsilon_norm,delta\n0.1,0.2\n0.01,0.1\n")
    assert run("fit", path, "--out", workdir / "fit") == EXIT_CONFIG


# ---------------------------------------------------------------- verify


def test_verify_three_spheres_bad_radii(workdir, capsys):
    cfg = config(workdir, "v.yaml", **{"solver.resolution": 16, "verify.radii": [0.3, 0.2, 0.1]})
    assert run("verify", cfg, "3sph", "--out", workdir / "v") == EXIT_CONFIG
    assert "r1 < r2 < r3" in capsys.readouterr().err


@pytest.mark.parametrize("which", ["3sph", "fvr-int", "fvr-bnd", "lps"])
def test_verify_defaults(workdir, which):
    cfg = config(workdir, "v.yaml", **{"solver.resolution": 16})
    out = workdir / "v"
    assert run("verify", cfg, which, "--out", out) == EXIT_OK
    report = json.loads((out / f"verify_{which}.json").read_text())
    if which == "3sph":
        assert report["nested"] and report["ratio"] > 0
    elif which == "lps":
        assert report["positive"]
    else:
        assert report["finite"] and report["exponent"] > 1.5


# ---------------------------------------------------------------- help


def test_help_lists_configuration_keys():
    proc = subprocess.run([sys.executable, "-m", "platelab.cli", "--help"], capture_output=True, text=True, check=True)
    for key in ("geometry", "material", "solver.resolution", "invert.budget", "sweep.sizes", "verify.radii"):
        assert key in proc.stdout, key
    assert "exit codes" in proc.stdout
