"""Small helpers shared by the experiment scripts."""

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

PI = math.pi


def pi_grid(start, stop, step):
    """Uniform grid in radians from bounds given in units of pi."""
    return np.round(np.arange(start, stop + step / 2, step), 12) * PI


def write_outputs(out_dir, name, columns, rows, config, summary):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    meta = {"config": asdict(config), "summary": summary}
    (out / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    print(f"wrote {out / name}.csv")
