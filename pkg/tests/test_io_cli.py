import filecmp
from pathlib import Path

import numpy as np
import pytest

from dcgan import io as dio
from dcgan.cli import main
from dcgan.signature import PathBatch


def test_path_csv_roundtrip_exact(tmp_path, rng):
    vals = rng.normal(size=(5, 7, 3)) * np.array([1e-300, 1.0, 1e300])
    b = PathBatch(np.cumsum(rng.uniform(0.01, 1.0, 7)) / 3, vals)
    dio.write_paths(b, tmp_path / "p.csv")
    back = dio.read_paths(tmp_path / "p.csv")
    assert np.array_equal(back.values, b.values) and np.array_equal(back.times, b.times)


def test_ragged_grid_names_both_series(tmp_path):
    (tmp_path / "r.csv").write_text("series_id,t,ch0\nA,0,1\nA,1,2\nB,0,1\nB,2,2\n")
    with pytest.raises(dio.FormatError, match="B.*A|A.*B"):
        dio.read_paths(tmp_path / "r.csv")


def test_nonmonotone_time(tmp_path):
    (tmp_path / "r.csv").write_text("series_id,t,ch0\nA,1,1\nA,0,2\n")
    with pytest.raises(dio.FormatError, match="A"):
        dio.read_paths(tmp_path / "r.csv")


def test_bad_header_and_missing(tmp_path):
    (tmp_path / "h.csv").write_text("id,time,x\n0,0,1\n")
    with pytest.raises(dio.FormatError):
        dio.read_paths(tmp_path / "h.csv")
    with pytest.raises(FileNotFoundError):
        dio.read_paths(tmp_path / "nope.csv")


def test_stock_shaped_ingest(rng):
    raw = rng.normal(size=(3796, 6)).cumsum(axis=0)
    batch, (lo, hi) = dio.ingest_windows(raw, 24)
    assert (len(batch), batch.times.size - 1, batch.n_channels) == (3773, 23, 6)
    assert batch.values.min() >= 0.0 and batch.values.max() <= 1.0


def test_kv_roundtrip(tmp_path):
    dio.write_kv(tmp_path / "c.txt", {"train": {"steps": 5, "hidden": (8, 8), "lr": 0.001, "basepoint": True}})
    sec = dio.read_kv(tmp_path / "c.txt")["train"]
    assert dio.coerce(sec["steps"], 0) == 5
    assert dio.coerce(sec["hidden"], (1,)) == (8, 8)
    assert dio.coerce(sec["lr"], 1.0) == 0.001
    assert dio.coerce(sec["basepoint"], False) is True


def _same_tree(a: Path, b: Path):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    for d in cmp.common_dirs:
        _same_tree(a / d, b / d)


def test_simulate_twice_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate-data", "--dataset", "opinion", "--particles", "40", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    _same_tree(tmp_path / "a", tmp_path / "b")


def test_sample_q1_equals_data(tmp_path):
    main(["simulate-data", "--dataset", "opinion", "--particles", "20", "--seed", "1", "--out", str(tmp_path / "d")])
    main(["train", "--data", str(tmp_path / "d"), "--steps", "0", "--out", str(tmp_path / "g")])
    assert main(["sample", "--generator", str(tmp_path / "g"), "--data", str(tmp_path / "d"), "--q", "1", "--out", str(tmp_path / "s")]) == 0
    a = dio.read_paths(tmp_path / "d" / "data.csv")
    b = dio.read_paths(tmp_path / "s" / "chain0.csv")
    assert np.array_equal(a.values, b.values)


def test_csv_ingest_command(tmp_path, rng):
    raw = tmp_path / "raw.csv"
    rows = ["date,a,b"] + [f"d{i},{x:.6f},{y:.6f}" for i, (x, y) in enumerate(rng.normal(size=(40, 2)))]
    raw.write_text("\n".join(rows) + "\n")
    assert main(["simulate-data", "--dataset", "csv", "--input", str(raw), "--window", "10", "--stride", "5", "--out", str(tmp_path / "o")]) == 0
    b = dio.read_paths(tmp_path / "o" / "data.csv")
    assert b.values.shape == (7, 10, 2)


def test_errors(tmp_path, capsys):
    assert main(["bogus"]) != 0
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == 2
    assert "missing.csv" in capsys.readouterr().err
    assert main(["simulate-data", "--dataset", "opinion", "--wat", "1", "--out", str(tmp_path)]) != 0
    bad = tmp_path / "bad.txt"
    bad.write_text("[train]\nnope = 1\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "y")]) == 1
