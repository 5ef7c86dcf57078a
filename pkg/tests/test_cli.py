import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from heisvp import cli
from heisvp.field import GridField


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_wordmetric_writes_ball_and_sidecar(tmp_path):
    out = tmp_path / "ball.csv"
    assert cli.run(["wordmetric", "--radius", "2", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["x", "y", "two_z", "dist"] and len(r) == 1 + 17
    side = json.loads((tmp_path / "ball.csv.json").read_text())
    assert side["size"] == 17
    assert side["versions"]["numpy"] == np.__version__


def test_vper_linear_field(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.run(["vper", "--field", "z", "--a-min", "0", "--a-max", "3", "--steps", "4", "--out", str(out)]) == 0
    vals = [float(v) for _, v in rows(out)[1:]]
    np.testing.assert_allclose(vals, 2.0 ** -np.arange(4.0), rtol=1e-12)
    side = json.loads((tmp_path / "p.csv.json").read_text())
    assert set(side["lq_norms"]) == {"2.0", "4.0"}
    assert side["region"]["x0"] == 0.0


def test_vper_reads_field_files(tmp_path):
    g = GridField.from_function(lambda x, z: 0.1 * np.sin(2 * np.pi * z), 8, 64, (0, 1, 0, 1), periodic=True)
    for name in ("f.field", "f.csv"):
        path = tmp_path / name
        g.save_csv(path) if name.endswith(".csv") else g.save(path)
        assert cli.run(["vper", "--field", str(path), "--steps", "3", "--a-max", "1", "--out", str(tmp_path / "o.csv")]) == 0


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 5, "wordmetric": {"radius": 1}}))
    out = tmp_path / "b.csv"
    assert cli.run(["--config", str(conf), "wordmetric", "--out", str(out)]) == 0
    assert len(rows(out)) == 6
    side = json.loads((tmp_path / "b.csv.json").read_text())
    assert side["config"]["seed"] == 5
    assert cli.run(["--config", str(conf), "wordmetric", "--radius", "2", "--out", str(out)]) == 0
    assert len(rows(out)) == 18


def test_omega_on_plane_is_zero(tmp_path):
    out = tmp_path / "o.json"
    assert cli.run(["omega", "--field", "affine:0.1,0.2,0", "--R", "1", "4", "--nsamples", "256", "--m-max", "1",
                    "--out", str(out)]) == 0
    ests = json.loads(out.read_text())
    assert [e["value"] for e in ests] == [0.0, 0.0]


def test_corona_on_flat_field(tmp_path):
    out = tmp_path / "t.json"
    assert cli.run(["corona", "--field", "zero", "--depth", "2", "--nsamples", "64", "--min-width", "0",
                    "--out", str(out)]) == 0
    nodes = json.loads(out.read_text())
    assert len(nodes) == 7 and all(n["cut"] in ("horizontal", "leaf") for n in nodes)
    diag = json.loads((tmp_path / "t.json.json").read_text())["diagnostics"]
    assert diag["carleson_ratio"] == 0.0 and diag["invariants"]["tiling"] == 0


def test_surface_command(tmp_path):
    out = tmp_path / "surf"
    assert cli.run(["surface", "--rho", "8", "--layers", "2", "--grid", "64", "--nx", "16", "--nz", "16",
                    "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["layers"] == 2 and man["report"]["grid"][0] == 64
    assert (out / "manifest.json.json").exists()


def test_embed_command(tmp_path):
    out = tmp_path / "h.csv"
    assert cli.run(["embed", "--k", "256", "--alpha", "2", "--layers", "1", "--n", "1", "--nodes", "4",
                    "--angles", "4", "--scales", "4", "--out", str(out)]) == 0
    assert len(rows(out)) == 11
    summary = json.loads((tmp_path / "h.csv.json").read_text())["summary"]
    assert summary["exhaustive"] and summary["ratio_min"] > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["vper", "--field", "/nonexistent/field.bin", "--out", "x.csv"],
        ["vper", "--field", "affine:1,2", "--out", "x.csv"],
        ["vper", "--field", "z", "--region", "1,0,0,1", "--out", "x.csv"],
        ["wordmetric", "--radius", "-1", "--out", "x.csv"],
        ["wordmetric", "--radius", "500", "--out", "x.csv"],
        ["surface", "--rho", "7", "--out", "s"],
        ["--config", "/nonexistent.json", "wordmetric", "--out", "x.csv"],
    ],
)
def test_invalid_input_exits_with_one(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert cli.run(argv) == 1


def test_thread_environment_override(monkeypatch, tmp_path):
    monkeypatch.setenv("HVP_THREADS", "zero")
    assert cli.run(["vper", "--field", "z", "--steps", "2", "--out", str(tmp_path / "p.csv")]) == 1
    monkeypatch.setenv("HVP_THREADS", "2")
    assert cli.run(["vper", "--field", "z", "--steps", "2", "--out", str(tmp_path / "p.csv")]) == 0


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "heisvp.cli", "wordmetric", "--radius", "1", "--out",
                        str(tmp_path / "b.csv")], capture_output=True, text=True)
    assert r.returncode == 0 and "5 points" in r.stdout
