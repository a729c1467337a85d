"""Raw tensor blobs for the loss-check interface.

Each array is little-endian float64, row-major, in `<name>` with a JSON
sidecar `<name>.json` holding {"shape": [...], "dtype": "<f8"}. Boolean
arrays are stored as 0/1 float64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SepmixError


def save_tensor(array, path) -> None:
    path = Path(path)
    arr = np.asarray(array, dtype=np.float64)
    arr.astype("<f8").tofile(path)
    sidecar = {"dtype": "<f8", "shape": list(arr.shape)}
    with open(path.with_suffix(path.suffix + ".json"), "w") as f:
        json.dump(sidecar, f, sort_keys=True)
        f.write("\n")


def load_tensor(path) -> np.ndarray:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as f:
        meta = json.load(f)
    raw = np.fromfile(path, dtype=np.dtype(meta["dtype"]))
    shape = tuple(meta["shape"])
    if raw.size != int(np.prod(shape)):
        raise SepmixError(f"tensor size mismatch in {path}")
    return raw.reshape(shape).astype(np.float64)
