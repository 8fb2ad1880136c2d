"""Dense numerical kernels used by the loss functions.

All kernels take and return plain 2-D float64 numpy arrays.  Pairwise
distances and covariances are built from matrix products and explicitly
symmetrized, so the outputs satisfy the symmetry and diagonal contracts
exactly rather than up to rounding.
"""

import numpy as np

from .validation import as_matrix, check_same_shape


def pairwise_euclidean(features, squared=False):
    """All-pairs Euclidean distances between rows of ``features``.

    Returns a ``(b, b)`` matrix that is exactly symmetric with an exactly
    zero diagonal.  ``squared=True`` skips the final square root.
    """
    h = as_matrix(features, "features")
    sq_norms = np.einsum("ij,ij->i", h, h)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (h @ h.T)
    # The product form can go slightly negative for near-identical rows.
    np.maximum(d2, 0.0, out=d2)
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)
    if squared:
        return d2
    return np.sqrt(d2)


def centered_covariance(features):
    """Column-centered second-moment matrix ``Hc.T @ Hc``.

    ``Hc`` is ``features`` with per-column means removed.  No ``1/(b-1)``
    factor is applied; callers that need a normalized covariance divide
    themselves.  The result is exactly symmetric.
    """
    h = as_matrix(features, "features")
    hc = h - h.mean(axis=0, keepdims=True)
    cov = hc.T @ hc
    return 0.5 * (cov + cov.T)


def frobenius_sq(matrix):
    """Squared Frobenius norm: sum of squared entries."""
    a = as_matrix(matrix, "matrix", allow_empty=True)
    return float(np.einsum("ij,ij->", a, a))


def masked_sum(matrix, mask):
    """Sum of ``matrix * mask`` over all entries.

    ``mask`` must have the same shape as ``matrix``; it is typically a
    0/1 indicator but any weights are accepted.
    """
    a = as_matrix(matrix, "matrix", allow_empty=True)
    m = as_matrix(mask, "mask", allow_empty=True)
    check_same_shape(a, m, "matrix", "mask")
    return float(np.einsum("ij,ij->", a, m))
