import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedwards.io import read_npz, read_path_csv, write_npz, write_path_csv


def test_npz_is_deterministic(tmp_path):
    arrays = {"b": np.arange(5.0), "a": np.eye(2)}
    write_npz(tmp_path / "x.npz", arrays, {"k": 1})
    write_npz(tmp_path / "y.npz", dict(reversed(list(arrays.items()))), {"k": 1})
    assert (tmp_path / "x.npz").read_bytes() == (tmp_path / "y.npz").read_bytes()
    back, meta = read_npz(tmp_path / "x.npz")
    assert meta == {"k": 1}
    np.testing.assert_array_equal(back["a"], np.eye(2))
    with np.load(tmp_path / "x.npz") as plain:
        assert set(plain.files) == {"a", "b", "__meta__"}


def test_zero_path_csv(tmp_path):
    grid = np.arange(1, 5) / 4
    write_path_csv(tmp_path / "z.csv", grid, np.zeros((2, 4)))
    lines = (tmp_path / "z.csv").read_text().splitlines()
    assert lines[0] == "tau,x1,x2"
    assert all(row.split(",")[1:] == ["0", "0"] for row in lines[1:])


def test_bad_csv(tmp_path):
    (tmp_path / "b.csv").write_text("t,x\n1,2\n")
    with pytest.raises(ValueError):
        read_path_csv(tmp_path / "b.csv")


@settings(max_examples=30, deadline=None)
@given(vals=arrays(np.float64, (3, 9), elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_path_csv_round_trip(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("csv") / "p.csv"
    grid = np.arange(1, 10) / 9
    write_path_csv(path, grid, vals)
    g, v = read_path_csv(path)
    np.testing.assert_array_equal(g, grid)
    np.testing.assert_array_equal(v, vals)
