"""Pivot isometric log-ratio coordinates.

Maps a D-part composition (strictly positive entries, scale ignored) to
D - 1 unconstrained coordinates and back.  The pivot order is the column
order of the input: coordinate j contrasts part j against the geometric
mean of the parts after it.  The transform is an isometry between the
Aitchison and Euclidean geometries.
"""

import numpy as np


def contrast_matrix(num_parts):
    """Orthonormal D x (D - 1) pivot contrast matrix (columns sum to zero)."""
    d = int(num_parts)
    if d < 2:
        raise ValueError(f"need at least 2 parts, got {d}")
    v = np.zeros((d, d - 1))
    for j in range(1, d):
        scale = np.sqrt((d - j) / (d - j + 1.0))
        v[j - 1, j - 1] = scale
        v[j:, j - 1] = -scale / (d - j)
    return v


def _as_rows(x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2):
        raise ValueError("expected a composition vector or a matrix of row compositions")
    return arr.reshape(1, -1) if arr.ndim == 1 else arr, arr.ndim == 1


def ilr_forward(x):
    """Pivot ilr coordinates of composition(s); scale-invariant.

    Accepts one D-vector or an (n, D) matrix of row compositions and returns
    D - 1 coordinates per row.  Raises ``ValueError`` naming the first
    nonpositive part.
    """
    rows, squeeze = _as_rows(x)
    if rows.shape[1] < 2:
        raise ValueError("need at least 2 parts")
    bad = ~(rows > 0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"part {j} (row {i}) is not strictly positive: {rows[i, j]!r}")
    z = np.log(rows) @ contrast_matrix(rows.shape[1])
    return z[0] if squeeze else z


def ilr_inverse(z):
    """Composition (closed to sum 1) whose pivot ilr coordinates are ``z``."""
    rows, squeeze = _as_rows(z)
    if not np.all(np.isfinite(rows)):
        raise ValueError("coordinates must be finite")
    y = rows @ contrast_matrix(rows.shape[1] + 1).T
    # stabilize the closure; subtracting the row max leaves the result unchanged
    y = y - y.max(axis=1, keepdims=True)
    e = np.exp(y)
    x = e / e.sum(axis=1, keepdims=True)
    return x[0] if squeeze else x
