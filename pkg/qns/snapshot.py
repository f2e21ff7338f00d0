"""
Field snapshot files.

Layout (text, UTF-8):
    line 1   QNS-SNAPSHOT 1
    line 2   JSON header {"dim", "n", "length", "time", "form", "fields": [{"name", "shape"}, ...]}
    then     every field's values in header order, row-major, one repr() float per line
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from atomicwrites import atomic_write
from loguru import logger

from qns.errors import ConfigError
from qns.fieldkit import Grid

MAGIC = "QNS-SNAPSHOT 1"


@dataclass()
class Snapshot:
    grid: Grid
    time: float
    form: Optional[str]
    fields: Dict[str, np.ndarray] = field(default_factory=dict)


def write_snapshot(path: Union[str, Path], snapshot: Snapshot):
    header = dict(snapshot.grid.to_dict())
    header["time"] = snapshot.time
    header["form"] = snapshot.form
    header["fields"] = [{"name": name, "shape": list(np.shape(values))} for name, values in snapshot.fields.items()]
    with atomic_write(str(path), overwrite=True) as f:
        f.write(MAGIC + "\n")
        f.write(json.dumps(header) + "\n")
        for values in snapshot.fields.values():
            for value in np.asarray(values, dtype=float).ravel(order="C"):
                f.write(repr(float(value)) + "\n")
    logger.debug(f"Wrote snapshot {path} with fields {list(snapshot.fields)}")


def read_snapshot(path: Union[str, Path]) -> Snapshot:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Snapshot file {path} does not exist")
    with open(path) as f:
        lines = f.read().splitlines()
    if len(lines) < 2 or lines[0].strip() != MAGIC:
        raise ConfigError(f"{path} is not a snapshot file (expected first line {MAGIC!r})")
    try:
        header = json.loads(lines[1])
        grid = Grid(tuple(header["n"]), tuple(header["length"]))
        values = np.array([float(x) for x in lines[2:] if x.strip()])
        fields = {}
        offset = 0
        for entry in header["fields"]:
            shape = tuple(entry["shape"])
            size = int(np.prod(shape))
            fields[entry["name"]] = values[offset : offset + size].reshape(shape)
            offset += size
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"Malformed snapshot {path}: {e}") from e
    if offset != values.size:
        raise ConfigError(f"Snapshot {path} holds {values.size} values, header describes {offset}")
    return Snapshot(grid=grid, time=float(header.get("time", 0.0)), form=header.get("form"), fields=fields)
