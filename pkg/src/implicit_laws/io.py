"""CSV tables with lossless floats, and run manifests."""
from __future__ import annotations

import csv
import json
import math
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def tool_version() -> str:
    try:
        return metadata.version("implicit-laws")
    except metadata.PackageNotFoundError:
        return "unknown"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT % v
    return str(v)


def parse_value(text: str):
    if text in ("true", "false"):
        return text == "true"
    if text == "":
        return None
    if text == "-0":
        return -0.0
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[parse_value(v) for v in row] for row in r]
    return header, rows


def write_manifest(path, subcommand, config, seed, outputs, duration, argv=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "subcommand": subcommand,
        "config": {k: _jsonable(v) for k, v in config.items()},
        "seed": seed,
        "version": tool_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": [str(p) for p in outputs],
        "duration_s": duration,
        "argv": list(argv) if argv is not None else None,
    }
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    return v
