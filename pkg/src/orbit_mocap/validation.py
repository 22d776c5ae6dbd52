"""Small input-validation helpers used by the public estimators and loaders."""

import numpy as np

from .errors import DataError


def as_float_array(x, name, shape=None):
    """Convert to a float64 ndarray, checking finiteness and optional shape.

    Entries of `shape` set to None are unconstrained.
    """
    arr = np.asarray(x, dtype=float)
    if shape is not None:
        if arr.ndim != len(shape):
            raise DataError(f"{name}: expected {len(shape)}-d array, got {arr.ndim}-d")
        for axis, want in enumerate(shape):
            if want is not None and arr.shape[axis] != want:
                raise DataError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name}: non-finite entries")
    return arr


def check_joint_count(p_expected, p_got, name):
    if p_expected != p_got:
        raise DataError(f"{name}: joint count mismatch ({p_got} != {p_expected})")


def check_row_orthonormal(rows, tol=1e-9, name="camera"):
    """Check R @ R.T == I2 within tol (Stiefel St(3,2) membership)."""
    rows = np.asarray(rows, dtype=float)
    gram = rows @ rows.T
    err = np.max(np.abs(gram - np.eye(rows.shape[0])))
    if err > tol:
        raise DataError(f"{name}: rows not orthonormal (deviation {err:.3e} > {tol:.1e})")
    return rows
