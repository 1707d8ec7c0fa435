"""CSV intake: plain column-oriented reads with hard schema checks."""

from __future__ import annotations

import csv


def read_columns(path):
    """Read a CSV into {column: list}; numeric cells become floats,
    empty cells become None, anything else stays a string."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, no header") from None
        rows = list(reader)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} cells, "
                             f"header has {len(header)}")
    cols = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            cols[name].append(_parse(cell))
    return cols


def _parse(cell):
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        return cell


def require_columns(cols, needed, path):
    missing = [c for c in needed if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}; "
                         f"have {list(cols)}")


def unique_in_order(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen
