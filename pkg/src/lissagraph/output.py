"""Deterministic CSV/JSON writers and the run manifest."""
from __future__ import annotations

import json
import platform
import sys
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"


def write_csv(path: Path, header: list[str], columns) -> Path:
    """Write columns with 17 significant digits; integer columns stay integers."""
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise ValueError("columns differ in length")
    fmts = ["%d" if np.issubdtype(c.dtype, np.integer) else FLOAT_FMT for c in cols]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(f % c[i] for f, c in zip(fmts, cols)) + "\n")
    return path


def write_json(path: Path, data) -> Path:
    with open(path, "w") as fh:
        json.dump(_plain(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def versions() -> dict:
    import matplotlib
    import scipy

    from . import __version__

    return {
        "lissagraph": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "platform": platform.platform(),
    }
