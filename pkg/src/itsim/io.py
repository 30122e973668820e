"""CSV/JSON emission and run manifests."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

TOOL_NAME = "itsim"


class NonFiniteOutputError(RuntimeError):
    """A NaN or infinity was about to be written to disk."""


def _fmt(v):
    if isinstance(v, str):
        return v
    x = float(v)
    if not math.isfinite(x):
        raise NonFiniteOutputError(f"non-finite value {x!r} in output")
    return "%.17g" % x


def write_csv(path, columns):
    """Write ``{header: array}`` columns with 17 significant digits, '.' decimals, UTF-8."""
    names = list(columns)
    cols = [np.atleast_1d(np.asarray(columns[k])) for k in names]
    n = cols[0].shape[0]
    if any(c.shape[0] != n for c in cols):
        raise ValueError("CSV columns differ in length")
    rows = [[_fmt(c[i]) for c in cols] for i in range(n)]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(rows)


def read_csv(path, names):
    """Read the named numeric columns from a headed CSV file."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [n for n in names if n not in header]
    if missing:
        raise ValueError(f"{path} lacks column(s) {missing}; found {header}")
    idx = [header.index(n) for n in names]
    data = np.array([[float(r[i]) for i in idx] for r in rows[1:] if r], dtype=float)
    return tuple(data[:, j] for j in range(len(names))) if data.size else tuple(np.empty(0) for _ in names)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NonFiniteOutputError(f"non-finite value {obj!r} in JSON output")
    return obj


def write_json(path, payload):
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def build_manifest(subcommand, cfg, summary, wall_time, outputs):
    """Manifest dict; everything except ``wall_time_s`` depends only on (config, seed, version)."""
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "outputs": sorted(outputs),
        "summary": summary,
        "wall_time_s": float(wall_time),
    }


def output_schema():
    """The shipped JSON schema describing the manifest and every subcommand's JSON output."""
    text = resources.files("itsim").joinpath("schemas/outputs.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
