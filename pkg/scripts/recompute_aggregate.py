"""Recompute per-grid rejection rates from a result CSV and compare them with its sidecar.

Uses only the standard library and reads nothing but the CSV and the JSON file,
so it is independent of the package that wrote them.

    python3 scripts/recompute_aggregate.py results/normality/gaussian_mle_sksd.csv
"""
import csv
import json
import math
import sys
from collections import OrderedDict
from pathlib import Path


def recompute(csv_path):
    groups = OrderedDict()
    with open(csv_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = float(row["sweep_value"])
            ok, failed = groups.setdefault(key, ([], [0]))
            if row["reject"] == "":
                failed[0] += 1
            else:
                ok.append(int(row["reject"]))
    out = []
    for value, (ok, failed) in groups.items():
        m = len(ok)
        rate = sum(ok) / m if m else math.nan
        se = math.sqrt(rate * (1 - rate) / m) if m else math.nan
        out.append({"sweep_value": value, "rejection_rate": rate, "se": se, "n_ok": m,
                    "n_failed": failed[0]})
    return out


def max_discrepancy(csv_path):
    """Largest absolute difference between recomputed and sidecar rates and SEs."""
    side = json.loads(Path(csv_path).with_suffix(".json").read_text(encoding="utf-8"))
    mine = recompute(csv_path)
    theirs = side["aggregate"]
    if len(mine) != len(theirs):
        return math.inf
    worst = 0.0
    for a, b in zip(mine, theirs):
        if a["sweep_value"] != float(b["sweep_value"]) or a["n_ok"] != b["n_ok"]:
            return math.inf
        for key in ("rejection_rate", "se"):
            x, y = a[key], b[key]
            if y is None:
                if not math.isnan(x):
                    return math.inf
                continue
            worst = max(worst, abs(x - y))
    return worst


def main(argv):
    status = 0
    for path in argv:
        gap = max_discrepancy(path)
        for entry in recompute(path):
            print(f"{path}\t{entry['sweep_value']:g}\t{entry['rejection_rate']:.4f}"
                  f"\t+-{entry['se']:.4f}\t(n={entry['n_ok']}, failed={entry['n_failed']})")
        print(f"{path}\tmax |recomputed - sidecar| = {gap:.3g}")
        status |= gap > 1e-12
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
