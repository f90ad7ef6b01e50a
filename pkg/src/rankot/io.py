"""CSV and JSON helpers shared by the command-line interface."""

import csv
from datetime import datetime, timezone
import json
import sys

import numpy as np

from .errors import InvalidArgumentError

SCHEMA_VERSION = 1


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_matrix(path):
    """Read a numeric CSV into a 2-D float array.

    A first row containing any non-numeric field is taken as a header and
    skipped. Raises FileNotFoundError for missing files.

    Returns
    -------
    (array, header)
        `header` is None when the file has none.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    header = None
    if rows and not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise InvalidArgumentError(f"{path}: no numeric rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise InvalidArgumentError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    return data, header


def write_matrix(path, array, header=None):
    """Write a 2-D array as CSV with full float precision; ``"-"`` is stdout."""
    arr = np.asarray(array, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in arr:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def write_table(path, rows, columns):
    """Write a list of dicts as CSV with the given column order; ``"-"`` is stdout."""
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n",
                                extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(payload: dict, timestamp=True) -> str:
    """One JSON object with ``schema_version`` and an optional UTC timestamp."""
    out = {"schema_version": SCHEMA_VERSION}
    out.update(payload)
    if timestamp:
        out["timestamp"] = datetime.now(timezone.utc).isoformat()
    return json.dumps(out, default=_default, indent=2, sort_keys=True)


def write_json(path, payload: dict, timestamp=True):
    text = to_json(payload, timestamp) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
