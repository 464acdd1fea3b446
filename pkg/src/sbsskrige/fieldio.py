"""CSV ingestion and emission.

Field CSVs carry a header row with coordinate columns named ``x``, ``y``
(optionally ``z``) followed by named value columns; decimal point, comma
separator, UTF-8.  Floats are written with ``repr`` (shortest round-trip
form), which keeps output byte-identical across runs of the same build.
"""

import csv
import json

import numpy as np

from .core import LocationSet, MultiField

COORD_NAMES = ("x", "y", "z")


def _fmt(value):
    return repr(float(value))


def read_table_csv(path):
    """Header and float rows of a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        rows = [[float(cell) for cell in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def split_coord_columns(header):
    """Number of leading coordinate columns (x, y, then optionally z)."""
    ncoord = 0
    for name, expected in zip(header, COORD_NAMES):
        if name.strip().lower() != expected:
            break
        ncoord += 1
    if ncoord < 1:
        raise ValueError(f"expected leading coordinate columns named {COORD_NAMES[:2]}, "
                         f"got {header[:2]}")
    return ncoord


def read_field_csv(path):
    """Read a field CSV; returns (MultiField, value column names)."""
    header, data = read_table_csv(path)
    ncoord = split_coord_columns(header)
    if data.shape[1] <= ncoord:
        raise ValueError(f"{path}: no value columns after the coordinates")
    locs = LocationSet(data[:, :ncoord])
    return MultiField(locs, data[:, ncoord:]), [h.strip() for h in header[ncoord:]]


def read_locations_csv(path):
    """Read only the coordinate columns of a CSV."""
    header, data = read_table_csv(path)
    ncoord = split_coord_columns(header)
    return LocationSet(data[:, :ncoord])


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_field_csv(path, field, value_names=None):
    """Write a field as coordinates followed by named value columns."""
    if value_names is None:
        value_names = [f"v{i + 1}" for i in range(field.p)]
    if len(value_names) != field.p:
        raise ValueError(f"need {field.p} value names, got {len(value_names)}")
    header = list(COORD_NAMES[: field.locations.ndim]) + list(value_names)
    rows = ([_fmt(c) for c in coord] + [_fmt(v) for v in vals]
            for coord, vals in zip(field.locations.coords, field.values))
    write_rows_csv(path, header, rows)


def write_predictions_csv(path, targets, predictions, value_names=None, variances=None):
    """Write predictions (and kriging variances, where defined) per target site."""
    preds = np.atleast_2d(np.asarray(predictions, dtype=float))
    if preds.shape[0] != targets.n:
        preds = preds.T
    p = preds.shape[1]
    if value_names is None:
        value_names = [f"v{i + 1}" for i in range(p)]
    header = list(COORD_NAMES[: targets.ndim]) + list(value_names)
    columns = [targets.coords, preds]
    if variances is not None:
        var = np.atleast_2d(np.asarray(variances, dtype=float))
        if var.shape[0] != targets.n:
            var = var.T
        header += [f"{name}_var" for name in value_names]
        columns.append(var)
    stacked = np.hstack(columns)
    rows = ([_fmt(v) for v in row] for row in stacked)
    write_rows_csv(path, header, rows)


def write_matrix_csv(path, mat, header=None):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if header is None:
        header = [f"c{i + 1}" for i in range(mat.shape[1])]
    write_rows_csv(path, header, ([_fmt(v) for v in row] for row in mat))


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
