"""File formats: NPY stacks, raw binary with JSON sidecar, manifests."""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch

_ALLOWED_DTYPES = {"float32", "float64", "uint16"}


def load_stack(path):
    """Load a (T, H, W) stack from NPY or raw binary + JSON sidecar.

    A raw file <name>.bin expects <name>.json next to it holding
    {"shape": [T, H, W], "dtype": "...", "fs": ...}. Returns
    (stack, fs_or_None).
    """
    path = Path(path)
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim != 3:
            raise ShapeMismatch(f"{path}: expected 3-D stack, got shape {arr.shape}")
        if arr.dtype.name not in _ALLOWED_DTYPES:
            raise ShapeMismatch(f"{path}: unsupported dtype {arr.dtype}")
        return arr.astype(np.float64), None

    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise FileNotFoundError(f"sidecar {sidecar} missing for raw stack {path}")
    meta = json.loads(sidecar.read_text())
    dtype = meta["dtype"]
    if dtype not in _ALLOWED_DTYPES:
        raise ShapeMismatch(f"{path}: unsupported dtype {dtype}")
    shape = tuple(meta["shape"])
    if len(shape) != 3:
        raise ShapeMismatch(f"{path}: sidecar shape must be [T, H, W]")
    arr = np.fromfile(path, dtype=np.dtype(dtype).newbyteorder("<"))
    if arr.size != np.prod(shape):
        raise ShapeMismatch(f"{path}: file size does not match sidecar shape")
    return arr.reshape(shape).astype(np.float64), meta.get("fs")


def load_mask(path):
    mask = np.load(path)
    if mask.ndim != 2 or mask.dtype != bool:
        raise ShapeMismatch(f"{path}: expected boolean 2-D mask")
    return mask


def load_aux(path):
    aux = np.load(path)
    if aux.ndim != 1:
        raise ShapeMismatch(f"{path}: expected 1-D aux series")
    return aux.astype(np.float64)


def save_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_array(path, arr):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, arr)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Machine-readable index of every output file with content hashes.

    Paths are stored relative to the output root so reruns in different
    directories stay byte-comparable.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.path = self.root / "manifest.json"
        self.entries = {}
        if self.path.exists():
            self.entries = json.loads(self.path.read_text())

    def add(self, path):
        rel = str(Path(path).relative_to(self.root))
        self.entries[rel] = sha256_file(path)

    def write(self):
        save_json(self.path, self.entries)
