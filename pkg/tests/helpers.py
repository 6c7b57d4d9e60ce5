"""Shared helpers for the test suite."""

import numpy as np


def read_csv(path):
    """Parse a homolock CSV: '#' comments, header row, numeric columns."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.strip() for line in fh
                if line.strip() and not line.startswith("#")]
    names = rows[0].split(",")
    cols = {name: [] for name in names}
    for row in rows[1:]:
        for name, cell in zip(names, row.split(",")):
            try:
                cols[name].append(float(cell))
            except ValueError:
                cols[name].append(cell)
    return {name: (np.asarray(vals) if vals and isinstance(vals[0], float) else vals)
            for name, vals in cols.items()}
