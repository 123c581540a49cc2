"""FBLAB1 text format for nodal fields.

Header line:  FBLAB1 n m dims... origin... spacing
Body:         one line per node in row-major order, m decimal values each.

Readers reject any count mismatch.
"""

import numpy as np

from .core import ConfigError
from .grid import GridField

MAGIC = "FBLAB1"


def write_field(path, field: GridField):
    field.assert_finite()
    head = [MAGIC, str(field.n), str(field.m)]
    head += [str(d) for d in field.dims]
    head += [f"{x:.17g}" for x in field.origin]
    head.append(f"{field.spacing:.17g}")
    flat = field.values.reshape(-1, field.m)
    lines = [" ".join(head)]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in flat]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> GridField:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) < 4 or header[0] != MAGIC:
            raise ConfigError(f"{path}: not an {MAGIC} field file")
        try:
            n = int(header[1])
            m = int(header[2])
            if len(header) != 3 + 2 * n + 2:
                raise ValueError
            dims = tuple(int(x) for x in header[3:3 + n])
            origin = np.array([float(x) for x in header[3 + n:3 + 2 * n]])
            spacing = float(header[3 + 2 * n])
        except ValueError:
            raise ConfigError(f"{path}: malformed {MAGIC} header") from None
        if n not in (2, 3) or m < 1 or any(d < 2 for d in dims) or spacing <= 0:
            raise ConfigError(f"{path}: invalid header values")
        n_nodes = int(np.prod(dims))
        vals = np.empty((n_nodes, m))
        count = 0
        for line in fh:
            if not line.strip():
                continue
            row = line.split()
            if len(row) != m:
                raise ConfigError(
                    f"{path}: node line {count + 1} has {len(row)} values, expected {m}")
            if count >= n_nodes:
                raise ConfigError(f"{path}: more node lines than {n_nodes}")
            try:
                vals[count] = [float(x) for x in row]
            except ValueError:
                raise ConfigError(f"{path}: non-numeric value on node line {count + 1}") from None
            count += 1
        if count != n_nodes:
            raise ConfigError(f"{path}: {count} node lines, expected {n_nodes}")
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"{path}: field contains non-finite values")
    return GridField(origin, spacing, vals.reshape(dims + (m,)))
