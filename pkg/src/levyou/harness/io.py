"""Output files.  Floats are written with ``%.17g`` so values round-trip
exactly; no file body contains timestamps or timings.

Schemas (one header line, comma separated):

* ``density.csv``: ``y1,...,yn,value`` with one row per grid point, the
  first coordinate varying slowest.
* ``density_header.json``: t, freq_radius, points_per_axis, center,
  spacing, truncation_error_bound, mass, coverage.
* ``samples.csv``: ``x1,...,xn`` with one row per endpoint sample.
* ``decay.csv``: ``direction,radius,modulus,log_modulus,bound``.
* ``charfn.csv``: ``h1,...,hn,re,im,exponent_re,exponent_im``.
* ``hypothesis.csv``: ``kind,direction,r,moment,bound,ratio``.
* ``summary.json``: scenario, config digest, seed, criteria and metrics.
* ``report.txt``: the human-readable report.
"""

from __future__ import annotations

import json
import os

import numpy as np

FLOAT_FORMAT = "%.17g"


def _write_table(path: str, header: list[str], table: np.ndarray) -> None:
    table = np.asarray(table, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if table.size:
            np.savetxt(fh, table, fmt=FLOAT_FORMAT, delimiter=",")


def write_density(out_dir: str, grid) -> list[str]:
    n = grid.dim
    table = np.column_stack([grid.points(), grid.values.ravel()])
    dens = os.path.join(out_dir, "density.csv")
    _write_table(dens, [f"y{i + 1}" for i in range(n)] + ["value"], table)
    header = {
        "t": grid.t,
        "freq_radius": grid.freq_radius.tolist(),
        "points_per_axis": grid.spec.points_per_axis,
        "center": grid.center.tolist(),
        "spacing": grid.spacing.tolist(),
        "truncation_error_bound": grid.truncation_error_bound,
        "mass": grid.mass(),
        "coverage": grid.coverage(),
    }
    head = os.path.join(out_dir, "density_header.json")
    write_json(head, header)
    return [dens, head]


def write_samples(out_dir: str, sample) -> list[str]:
    path = os.path.join(out_dir, "samples.csv")
    _write_table(path, [f"x{i + 1}" for i in range(sample.dim)], sample.values)
    return [path]


def write_decay(out_dir: str, report) -> list[str]:
    path = os.path.join(out_dir, "decay.csv")
    _write_table(path, ["direction", "radius", "modulus", "log_modulus", "bound"], np.array(list(report.rows())))
    return [path]


def write_charfn(out_dir: str, h: np.ndarray, cf: np.ndarray, phi: np.ndarray) -> list[str]:
    path = os.path.join(out_dir, "charfn.csv")
    n = h.shape[1]
    table = np.column_stack([h, cf.real, cf.imag, phi.real, phi.imag])
    _write_table(path, [f"h{i + 1}" for i in range(n)] + ["re", "im", "exponent_re", "exponent_im"], table)
    return [path]


def write_hypothesis(out_dir: str, report) -> list[str]:
    path = os.path.join(out_dir, "hypothesis.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,direction,r,moment,bound,ratio\n")
        for kind, rows in (("r", report.rows), ("k", report.rescaled_rows or [])):
            for row in rows:
                vals = ",".join(FLOAT_FORMAT % v for v in (row.r, row.moment, row.bound, row.ratio))
                fh.write(f"{kind},{row.direction},{vals}\n")
    return [path]


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
