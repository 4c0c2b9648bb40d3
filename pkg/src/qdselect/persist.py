"""Deterministic array-bundle files.

``numpy.savez`` stamps zip entries with the current time, which breaks
byte-identical reruns. This writer fixes the timestamp and entry order so
the same arrays always produce the same bytes. Files load with ``np.load``.
"""

from __future__ import annotations

import io
import zipfile
from pathlib import Path

import numpy as np

_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_bundle(path, **arrays) -> None:
    """Write arrays to a reproducible ``.npz``-compatible zip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o600 << 16
            zf.writestr(info, buf.getvalue())


def load_bundle(path) -> dict:
    """Load a bundle written by :func:`save_bundle` into a dict of arrays."""
    out = {}
    with np.load(path, allow_pickle=False) as data:
        for key in data.files:
            out[key] = data[key]
    return out
