import json
import subprocess
import sys

import numpy as np
import pytest

from i3d import __version__
from i3d.cli import build_parser, config_namespace, main, parse_range, resolve_seed
from i3d.errors import ArgumentError


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out), "--workers", "1"])
    return code, out


def load(path):
    return json.loads(path.read_text())


@pytest.fixture
def uniform2d(tmp_path):
    code, out = run(tmp_path, "gen", "generate", "--family", "uniform", "--dim", "2",
                    "--side", "50", "--n", "2500", "--seed", "3")
    assert code == 0
    return out / "points.txt"


def test_parse_range():
    assert parse_range("2:16:2") == [2, 4, 6, 8, 10, 12, 14, 16]
    assert parse_range("4:6") == [4, 5, 6]
    assert parse_range("8") == [8]
    for bad in ("4:2:1", "1:5:0", "a,b", ""):
        with pytest.raises(ArgumentError):
            parse_range(bad)


def test_seed_resolution(monkeypatch):
    monkeypatch.setenv("IDD_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(4) == 4
    monkeypatch.setenv("IDD_SEED", "x")
    with pytest.raises(ArgumentError):
        resolve_seed(None)
    monkeypatch.delenv("IDD_SEED")
    assert isinstance(resolve_seed(None), int)


def test_generate_writes_meta_and_config(tmp_path, uniform2d):
    out = uniform2d.parent
    meta = load(out / "points.meta.json")
    assert meta["metric"] == "l1-periodic" and meta["box_side"] == [50, 50]
    conf = load(out / "config.json")
    assert conf["version"] == __version__ and conf["seed"] == 3
    code, spin = run(tmp_path, "spin", "generate", "--family", "spin", "--id", "2", "--n", "300",
                     "--seed", "1")
    assert code == 0
    alphas = np.array(load(spin / "points.meta.json")["alphas"])
    assert alphas.shape == (2, 50)


def test_estimate_uniform(tmp_path, uniform2d, capsys):
    code, out = run(tmp_path, "est", "estimate", "--input", str(uniform2d),
                    "--metric", "l1-periodic", "--box-side", "50", "--t2", "6")
    assert code == 0
    est = load(out / "estimate.json")
    assert est["t1"] == 3 and abs(est["d"] - 2) < 0.15
    assert (out / "cdf.txt").read_text().startswith("#")
    assert not (out / "posterior.txt").exists()
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["d"] == est["d"]


def test_estimate_bayes_writes_posterior(tmp_path, uniform2d):
    code, out = run(tmp_path, "bayes", "estimate", "--input", str(uniform2d),
                    "--metric", "l1-periodic", "--box-side", "50", "--t2", "6",
                    "--method", "bayes", "--bootstrap", "50", "--seed", "0")
    assert code == 0
    assert (out / "posterior.txt").exists()
    assert 0 < load(out / "estimate.json")["p_value"] <= 1


def test_estimate_error_json(tmp_path, capsys):
    pts = tmp_path / "far.txt"
    pts.write_text("0 0\n100 100\n200 0\n")
    code, out = run(tmp_path, "err", "estimate", "--input", str(pts), "--t2", "4")
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "no_neighbors" and err["command"] == "estimate"
    assert load(out / "error.json") == err
    code, _ = run(tmp_path, "missing", "estimate", "--input", str(tmp_path / "nope"),
                  "--t2", "4")
    assert code == 2


def test_scan_and_determinism(tmp_path, uniform2d):
    args = ("scan", "--input", str(uniform2d), "--metric", "l1-periodic", "--box-side", "50",
            "--t2-range", "2:16:2", "--bootstrap", "20", "--seed", "5")
    _, a = run(tmp_path, "a", *args)
    _, b = run(tmp_path, "b", *args)
    for name in ("scan.json", "scan.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = load(a / "scan.json")["rows"]
    assert [r["t2"] for r in rows] == list(range(2, 17, 2))
    dims = [r["d"] for r in rows if r.get("d") is not None]
    assert abs(np.mean(dims) - 2) < 0.1


def test_config_round_trip(tmp_path, uniform2d):
    _, first = run(tmp_path, "first", "scan", "--input", str(uniform2d),
                   "--metric", "l1-periodic", "--box-side", "50", "--t2-range", "4:8:2")
    conf = load(first / "config.json")
    ns = config_namespace(conf)
    assert {k: v for k, v in vars(ns).items()} == {k: v for k, v in conf.items()
                                                  if k != "version"}
    replay = tmp_path / "replay"
    assert main(["--config", str(first / "config.json"), "--out", str(replay)]) == 0
    assert (replay / "scan.json").read_bytes() == (first / "scan.json").read_bytes()
    with pytest.raises(ArgumentError):
        config_namespace({"command": "scan", "bogus": 1})


def test_baseline(tmp_path):
    _, gen = run(tmp_path, "sier", "generate", "--family", "sierpinski", "--level", "7")
    code, out = run(tmp_path, "bl", "baseline", "--input", str(gen / "points.txt"),
                    "--scales", "1,2,4,8,16,32")
    assert code == 0
    res = load(out / "baseline.json")
    assert set(res) == {"box_counting", "fractal_dimension"}
    assert abs(res["box_counting"]["slope"] - np.log(3) / np.log(2)) < 0.1
    assert (out / "fractal_dimension.txt").exists()


def test_pipeline(tmp_path):
    from i3d.generators import SpinEnsembleSpec, gen_spin
    from i3d.sequences import spins_to_fasta

    pts, _ = gen_spin(SpinEnsembleSpec(2, 50, 1500, seed=11, binary=True))
    fasta = tmp_path / "reads.fa"
    fasta.write_text(spins_to_fasta(pts))
    code, out = run(tmp_path, "pipe", "pipeline", "--input", str(fasta), "--k-clusters", "2",
                    "--t2-range", "3:6", "--pca-t2", "20", "--seed", "0")
    assert code == 0
    summary = load(out / "pipeline.json")
    assert summary["n_read"] == 1500 and summary["n_unique"] <= 1500
    assert summary["k_clusters"] == 2
    labels = (out / "labels.txt").read_text().splitlines()
    assert len(labels) == summary["n_filtered"] and labels[0].split()[0].startswith("s")
    agg = load(out / "cluster_scan.json")["aggregate"]
    assert [r["t2"] for r in agg] == [3, 4, 5, 6]
    assert len(load(out / "pca.json")) == 2


def test_pool_small(tmp_path):
    code, out = run(tmp_path, "pool", "pool", "--dim", "2", "--side", "20", "--n", "300",
                    "--realizations", "50", "--t2", "4", "--seed", "1")
    assert code == 0
    rec = load(out / "pool.json")
    assert rec["std_ind"] == pytest.approx(1.0) and rec["t1"] == 2


def test_parser_rejects_unknown_metric():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["scan", "--metric", "euclid"])


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "i3d.cli", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
