"""File formats: timestamp traces, CSV tables, JSON documents.

* traces: one decimal timestamp per line (``repr`` of the float, so values
  round-trip exactly);
* occupancy CSV: header ``k,time_fraction``;
* summary CSV: header ``metric,value``;
* grid CSV: header ``q_a,q_b,prob``;
* curve CSV: header ``psi_a,psi_b,delta_rel``;
* region report CSV: header ``n_a,n_b,psi_a,psi_b,seed,flow,chi2,st,verdict``.

JSON is written with sorted keys and two-space indentation; non-finite
floats become ``null``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def write_trace(path, trace) -> None:
    with open(path, "w") as fh:
        for t in np.asarray(trace, dtype=np.float64).tolist():
            fh.write(repr(t) + "\n")


def read_trace(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    arr = np.array(values, dtype=np.float64)
    if len(arr) > 1 and np.any(np.diff(arr) <= 0):
        raise ValueError(f"{path}: timestamps must be strictly increasing")
    return arr


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def write_sim_output(out_dir, o) -> list[str]:
    """Write a ``SimOutput`` as traces, occupancy CSV and summary JSON/CSV."""
    from .des import occupancy_distribution

    out_dir = Path(out_dir)
    write_trace(out_dir / "in_trace.txt", o.in_trace)
    write_trace(out_dir / "out_trace.txt", o.out_trace)
    write_trace(out_dir / "sojourns.txt", o.sojourn_samples)
    pmf = occupancy_distribution(o)
    write_csv(out_dir / "occupancy.csv", ("k", "time_fraction"), ((k, float(v)) for k, v in enumerate(pmf)))
    summary = o.summary()
    write_json(out_dir / "summary.json", summary)
    write_csv(out_dir / "summary.csv", ("metric", "value"), sorted(summary.items()))
    return ["in_trace.txt", "out_trace.txt", "sojourns.txt", "occupancy.csv", "summary.json", "summary.csv"]
