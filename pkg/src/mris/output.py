"""Deterministic result serialization.

Rerunning a command with the same inputs must produce byte-identical files:
JSON is written with sorted keys and no timestamps, floats go through %.17g
(round-trip exact for doubles), complex values become [re, im] pairs, and
every report carries a sha256 digest of its own canonical form.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def jsonable(obj):
    """Recursively convert numbers, arrays, and containers to JSON-ready
    structures; complex scalars become [re, im]."""
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return [jsonable(float(obj.real)), jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_json(doc) -> str:
    return json.dumps(jsonable(doc), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


@dataclass
class RunReport:
    command: str
    params: dict
    results: dict
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        body = {
            "command": self.command,
            "params": jsonable(self.params),
            "results": jsonable(self.results),
            "verdicts": {k: bool(v) for k, v in sorted(self.verdicts.items())},
            "passed": self.passed,
        }
        body["digest"] = hashlib.sha256(canonical_json(body).encode()).hexdigest()
        return body

    def write(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_csv(path: str, header, rows):
    """Plain CSV with %.17g floats; complex cells are split by the caller."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for x in row:
                if isinstance(x, str):
                    cells.append(x)
                elif isinstance(x, (int, np.integer)):
                    cells.append(str(int(x)))
                else:
                    cells.append(_fmt(x))
            fh.write(",".join(cells) + "\n")


PLOT_TEMPLATE = '''\
# Standalone plot script (generated alongside {csv_name}).
# Run with: python3 {script_name}
# Requires matplotlib, which the generating package deliberately does not.
import csv

import matplotlib.pyplot as plt

with open("{csv_name}", "r", encoding="utf-8") as fh:
    reader = csv.reader(fh)
    header = next(reader)
    columns = {{name: [] for name in header}}
    for row in reader:
        for name, cell in zip(header, row):
            try:
                columns[name].append(float(cell))
            except ValueError:
                columns[name].append(cell)

x = columns[{x!r}]
fig, ax = plt.subplots(figsize=(7, 4.5))
for name in {ys!r}:
    ax.plot(x, columns[name], marker=".", label=name)
ax.set_xlabel({x!r})
ax.set_ylabel({ylabel!r})
ax.legend()
ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
print("wrote {png_name}")
'''


def write_plot_script(path: str, csv_name: str, x: str, ys, ylabel: str):
    """Emit a self-contained matplotlib script as text next to a CSV."""
    png_name = csv_name.rsplit(".", 1)[0] + ".png"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PLOT_TEMPLATE.format(csv_name=csv_name, script_name=path,
                                      x=x, ys=list(ys), ylabel=ylabel,
                                      png_name=png_name))
