import hashlib

import numpy as np
import pytest

from eie.cli import main
from eie.formats import read_activations, read_container, read_stats_csv, write_matrix_market


def run(*args):
    return main([str(a) for a in args])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def layer(tmp_path):
    assert run("bench", "Alex-8", "--in-dim", 256, "--out-dim", 128, "--pes", 8, "--seed", 3,
               "--out-dir", tmp_path) == 0
    return tmp_path / "Alex-8.eiec", tmp_path / "Alex-8.act.txt"


def test_compress_and_verify(tmp_path, capsys):
    w = np.random.default_rng(0).normal(size=(64, 64))
    write_matrix_market(tmp_path / "w.mtx", w)
    assert run("compress", tmp_path / "w.mtx", tmp_path / "w.eiec", "--density", 0.1, "--pes", 4) == 0
    out = capsys.readouterr().out
    assert "density: 0.100098" in out and "codebook:" in out
    assert run("verify", tmp_path / "w.eiec") == 0
    assert run("compress", tmp_path / "w.mtx", tmp_path / "d.eiec", "--density", 1.0, "--pes", 4) == 0
    assert "padding entries: 0" in capsys.readouterr().out


def test_compress_capacity_error(tmp_path, capsys):
    write_matrix_market(tmp_path / "tall.mtx", np.ones((66000, 1)))
    assert run("compress", tmp_path / "tall.mtx", tmp_path / "t.eiec", "--density", 1.0, "--pes", 1) == 2
    assert "PE 0" in capsys.readouterr().err


def test_verify_rejects_corruption(layer, tmp_path):
    model, _ = layer
    data = bytearray(model.read_bytes())
    data[len(data) // 2] ^= 1
    bad = tmp_path / "bad.eiec"
    bad.write_bytes(bytes(data))
    assert run("verify", bad) == 3


def test_run_and_simulate_identical(layer, tmp_path, capsys):
    model, acts = layer
    assert run("run", model, acts, "--relu", "--out", tmp_path / "r.txt") == 0
    assert run("simulate", model, acts, "--relu", "--out", tmp_path / "s.txt", "--stats", tmp_path / "s.csv",
               "--json", tmp_path / "s.json") == 0
    assert (tmp_path / "r.txt").read_bytes() == (tmp_path / "s.txt").read_bytes()
    conf, row = read_stats_csv((tmp_path / "s.csv").read_text())
    assert conf["fifo_depth"] == "8" and conf["n_pe"] == "8"
    assert float(row["seconds"]) == int(row["total_cycles"]) / 800e6
    # re-encoding for a different PE count keeps values
    assert run("simulate", model, acts, "--relu", "--pes", 3, "--out", tmp_path / "s3.txt", "--format", "raw") == 0
    assert read_activations(tmp_path / "s3.txt") == read_activations(tmp_path / "r.txt")


def test_dimension_mismatch(layer, tmp_path):
    model, _ = layer
    (tmp_path / "short.txt").write_text("1.0\n2.0\n")
    assert run("run", model, tmp_path / "short.txt") == 2
    assert run("simulate", model, tmp_path / "short.txt") == 2


def test_bench_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("bench", "NT-LSTM", "--seed", 7, "--out-dir", tmp_path / d, "--in-dim", 300, "--out-dim", 200) == 0
    for name in ("NT-LSTM.eiec", "NT-LSTM.act.txt"):
        assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)


def test_bench_tiles_wide_layer(tmp_path):
    assert run("bench", "VGG-6", "--pes", 4, "--in-dim", 600, "--out-dim", 64, "--out-dir", tmp_path) == 0
    e = read_container(tmp_path / "VGG-6.eiec")
    assert e.cols == 600 and e.tile_cols == 256
    assert run("verify", tmp_path / "VGG-6.eiec") == 0


def test_sweep_cli(tmp_path):
    out = tmp_path / "fifo.csv"
    assert run("sweep", "--preset", "Alex-6", "--in-dim", 1024, "--out-dim", 512, "--pes", 16,
               "--axis", "fifo", "--values", "1,2,4,8,16", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 6
    eff = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(x <= y for x, y in zip(eff, eff[1:]))


def test_sweep_from_model(layer, tmp_path):
    model, acts = layer
    assert run("sweep", "--model", model, "--activations", acts, "--axis", "pes", "--values", "2,4",
               "--out", tmp_path / "p.csv") == 0
    assert run("sweep", "--axis", "pes", "--values", "2") == 1


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    for argv in (["simulate", "--bogus"], ["frobnicate"], ["sweep", "--axis", "fifo", "--values", "a,b"], []):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1
    assert run("verify", "/nonexistent/file.eiec") == 1
