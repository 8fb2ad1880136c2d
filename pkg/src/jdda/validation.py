"""Input validation helpers shared by the library and the estimator front end.

Matrices throughout the package are plain 2-D float64 numpy arrays in
row-major (C) order; these helpers coerce and check inputs at public
boundaries so the numerical kernels can assume clean data.
"""

import numpy as np


def as_matrix(values, name="matrix", allow_empty=False):
    """Coerce ``values`` to a contiguous 2-D float64 array.

    Rejects non-2-D shapes, non-finite entries, and (unless
    ``allow_empty``) matrices with zero rows.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise ValueError(f"{name} must have at least one row")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def as_labels(values, class_count=None, name="labels"):
    """Coerce ``values`` to a 1-D int64 label vector.

    When ``class_count`` is given, every label must lie in
    ``[0, class_count)``.
    """
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.all(np.isfinite(rounded)) or np.any(rounded != arr):
            raise ValueError(f"{name} must contain integers")
        arr = rounded
    arr = arr.astype(np.int64)
    if class_count is not None and arr.size:
        if arr.min() < 0 or arr.max() >= class_count:
            raise ValueError(
                f"{name} must lie in [0, {class_count}), "
                f"got range [{arr.min()}, {arr.max()}]"
            )
    return arr


def check_same_shape(a, b, name_a="first", name_b="second"):
    """Raise if two arrays differ in shape."""
    if a.shape != b.shape:
        raise ValueError(
            f"{name_a} has shape {a.shape} but {name_b} has shape {b.shape}"
        )


def check_feature_dim(features, expected, name="features"):
    """Raise if a feature matrix does not have ``expected`` columns."""
    if features.shape[1] != expected:
        raise ValueError(
            f"{name} has {features.shape[1]} columns, expected {expected}"
        )
