"""Result files: an RFC-4180 CSV (UTF-8, LF line endings) plus a JSON provenance sidecar."""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

BASE_HEADER = ("sweep_value", "replicate", "statistic", "p_value", "reject", "seed", "elapsed_ms")


def _cell(value) -> str:
    # repr round-trips floats exactly; missing values stay empty
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def emit_results(rows, aggregate, path, config=None, theta_names=()) -> tuple[Path, Path]:
    """Write ``rows`` (ReplicateResult-like) to ``path`` and the JSON sidecar next to it."""
    rows = list(rows)
    if not rows:
        raise ValueError("no result rows to write")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path.parent}: {exc}") from exc
    k = max([len(theta_names)] + [len(r.theta) for r in rows])
    names = list(theta_names) + [str(i) for i in range(len(theta_names), k)]
    header = list(BASE_HEADER) + [f"theta_{nm}" for nm in names]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            theta = list(r.theta) + [None] * (k - len(r.theta))
            writer.writerow([_cell(v) for v in (r.sweep_value, r.replicate, r.statistic,
                                                 r.p_value, r.reject, r.seed, r.elapsed_ms,
                                                 *theta)])
    failures = [{"sweep_value": r.sweep_value, "replicate": r.replicate, "seed": r.seed,
                 "error": r.error} for r in rows if r.failed]
    flagged = [{"sweep_value": r.sweep_value, "replicate": r.replicate,
                "n_failed_bootstrap": r.n_failed} for r in rows
               if not r.failed and config is not None and r.n_failed > 0.02 * config.B]
    doc = {
        "config": config.to_dict() if config is not None else None,
        "aggregate": [_finite(a) for a in aggregate],
        "failures": failures,
        "bootstrap_failure_flags": flagged,
        "theta_columns": header[len(BASE_HEADER):],
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    side = sidecar_path(path)
    side.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path, side


def _finite(entry: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in entry.items()}


def _parse(text: str, kind):
    if text == "":
        return None
    return kind(text)


def read_results(path) -> tuple[list[dict], dict]:
    """Parse a result CSV back into row dicts, and load its sidecar."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header[: len(BASE_HEADER)]) != BASE_HEADER:
            raise ValueError(f"unexpected header in {path}: {header}")
        rows = []
        for rec in reader:
            row = {
                "sweep_value": float(rec[0]),
                "replicate": int(rec[1]),
                "statistic": _parse(rec[2], float),
                "p_value": _parse(rec[3], float),
                "reject": _parse(rec[4], int),
                "seed": int(rec[5]),
                "elapsed_ms": float(rec[6]),
                "theta": [float(v) for v in rec[len(BASE_HEADER):] if v != ""],
            }
            rows.append(row)
    side = sidecar_path(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return rows, meta
