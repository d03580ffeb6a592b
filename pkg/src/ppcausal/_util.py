"""Small shared helpers: grid node construction, float formatting, atomic writes."""

import json
import os
import tempfile

import numpy as np


def axis_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform nodes on [lo, hi], built from centered integer offsets.

    The centered construction ``c + (i - (n-1)/2) * h`` guarantees that a
    symmetric range (lo == -hi) yields nodes that are exact floating-point
    mirrors of each other, and that an odd node count places 0.0 exactly at
    the center.  Plain ``lo + i*h`` does not have either property.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    if not hi > lo:
        raise ValueError("need hi > lo")
    h = (hi - lo) / (n - 1)
    c = 0.5 * (lo + hi)
    return c + (np.arange(n) - (n - 1) / 2.0) * h


def fmt_float(x) -> str:
    """Round-trip decimal form (17 significant digits)."""
    return format(float(x), ".17g")


def _json_sanitize(obj):
    """Strict-JSON form: non-finite floats become null, numpy scalars plain."""
    if isinstance(obj, dict):
        return {k: _json_sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def write_json_atomic(path, payload) -> None:
    """Serialize to JSON and rename into place so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_json_sanitize(payload), fh, indent=2, sort_keys=True,
                      allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
