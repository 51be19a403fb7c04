import json

import numpy as np
import pytest

from sheetwalk.gridio import GridIOError, export_grid, grid_to_csv, provenance, read_grid
from sheetwalk.rng import make_rng


def _grid():
    axes = [np.linspace(0, 1, 4), np.linspace(0, 1, 3)]
    return axes, make_rng(0).standard_normal((4, 3)) / 3.0


@pytest.mark.parametrize("fmt,suffix", [("csv", ".csv"), ("json", ".json")])
def test_round_trip_bitwise(tmp_path, fmt, suffix):
    axes, values = _grid()
    path = tmp_path / f"g{suffix}"
    export_grid(axes, values, path, fmt, {"n": 1}, provenance({"seed": 1}))
    got_axes, got = read_grid(path)
    assert np.array_equal(got, values)
    assert all(np.array_equal(a, b) for a, b in zip(got_axes, axes))


def test_csv_layout():
    text = grid_to_csv([np.zeros(1), np.zeros(1)], np.zeros((1, 1)), {"artifact": "x"})
    lines = text.splitlines()
    assert lines[0].startswith("# ") and json.loads(lines[0][2:]) == {"artifact": "x"}
    assert lines[1:] == ["axis1,axis2,value", "0.0,0.0,0.0"]


def test_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(GridIOError, match="missing"):
        export_grid(*_grid(), bad, "csv", {})
    with pytest.raises(GridIOError):
        read_grid(bad)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        export_grid(*_grid(), tmp_path / "x", "xml", {})
