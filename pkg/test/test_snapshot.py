import sys, os

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from qns.errors import ConfigError
from qns.fieldkit import Grid, random_smooth_positive, random_smooth_vector
from qns.snapshot import MAGIC, Snapshot, read_snapshot, write_snapshot


def test_snapshot_round_trip_is_bit_exact(tmp_path):
    grid = Grid((8, 16), (1.0, 2.0))
    fields = {
        "rho": random_smooth_positive(grid, 3, 2, 0.5).values,
        "u": random_smooth_vector(grid, 3, 2).values,
    }
    path = tmp_path / "state.snapshot"
    write_snapshot(path, Snapshot(grid, 0.125, "u-form", fields))
    snapshot = read_snapshot(path)
    assert snapshot.grid == grid
    assert snapshot.time == 0.125
    assert snapshot.form == "u-form"
    assert list(snapshot.fields) == ["rho", "u"]
    for name, values in fields.items():
        assert np.array_equal(snapshot.fields[name], values)


def test_snapshot_starts_with_the_magic_line(tmp_path):
    grid = Grid.cube(1, 8)
    path = tmp_path / "rest.snapshot"
    write_snapshot(path, Snapshot(grid, 0.0, None, {"rho": np.ones(grid.shape)}))
    lines = path.read_text().splitlines()
    assert lines[0] == MAGIC
    assert len(lines) == 2 + 8


def test_missing_snapshot(tmp_path):
    with pytest.raises(ConfigError):
        read_snapshot(tmp_path / "nothing.snapshot")


@pytest.mark.parametrize(
    "text",
    [
        "not a snapshot\n{}\n",
        MAGIC + "\n{\"n\": [8]}\n",
        MAGIC + "\n{\"n\": [8], \"length\": [1.0], \"fields\": [{\"name\": \"rho\", \"shape\": [8]}]}\n1.0\n",
        MAGIC + "\n{\"n\": [7], \"length\": [1.0], \"fields\": []}\n",
    ],
)
def test_malformed_snapshots(tmp_path, text):
    path = tmp_path / "bad.snapshot"
    path.write_text(text)
    with pytest.raises(ConfigError):
        read_snapshot(path)
