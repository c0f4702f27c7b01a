"""Average k-NN statistic, empirical ranks and rank quantization.

All functions operate on an ``(n, d)`` array of nominal points.  Scores
follow the convention that larger means "more nominal": the statistic is
the *negated* mean distance to the K nearest other points.
"""

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_K = 10
DEFAULT_LEVELS = 3


class DataError(ValueError):
    """Input data failed validation."""


def as_dataset(points, min_rows=2):
    """Validate and return ``points`` as a float ``(n, d)`` array.

    Raises
    ------
    DataError
        If the array is not 2-D, has fewer than ``min_rows`` rows, has no
        columns, or contains a non-finite entry.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D array of points, got shape {X.shape}")
    n, d = X.shape
    if d < 1:
        raise DataError("points must have at least one column")
    if n < min_rows:
        raise DataError(f"need at least {min_rows} points, got {n}")
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        raise DataError(f"non-finite value in row {int(np.flatnonzero(bad)[0])}")
    return X


def cross_distances(A, B):
    """Euclidean distances between the rows of ``A`` and ``B``."""
    return cdist(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def pairwise_distances(points):
    """Symmetric ``(n, n)`` Euclidean distance matrix with a zero diagonal."""
    X = as_dataset(points)
    return cross_distances(X, X)


def _check_k(K, n_available, strict):
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    if K > n_available:
        limit = "n-1" if strict else "n"
        raise ValueError(
            f"K={K} too large for n={n_available + strict} points (K must be <= {limit})"
        )
    return int(K)


def knn_mean_distance(dist_rows, K):
    """Mean of the ``K`` smallest entries in each row of ``dist_rows``."""
    part = np.partition(dist_rows, K - 1, axis=1)[:, :K]
    # sort before summing so the reduction order is fixed
    part.sort(axis=1)
    return part.sum(axis=1) / K


def aknn_scores(points, K=DEFAULT_K, distances=None):
    """Negated average distance to the ``K`` nearest *other* points.

    A point is never counted as its own neighbour; duplicated rows are
    still each other's neighbours at distance zero.

    Parameters
    ----------
    points : array_like, shape (n, d)
    K : int
        Neighbourhood size, ``1 <= K <= n - 1``.
    distances : ndarray, optional
        Precomputed output of :func:`pairwise_distances`.

    Returns
    -------
    ndarray, shape (n,)
        Scores ``G``, all ``<= 0``.
    """
    X = as_dataset(points)
    n = X.shape[0]
    K = _check_k(K, n - 1, strict=True)
    D = pairwise_distances(X) if distances is None else np.array(distances, dtype=float)
    np.fill_diagonal(D, np.inf)
    return -knn_mean_distance(D, K)


def ranks_from_scores(scores):
    """Fraction of scores ``<=`` each entry, self included.

    Tied scores all receive the count of the whole tied block.
    """
    g = np.asarray(scores, dtype=float)
    s = np.sort(g)
    return np.searchsorted(s, g, side="right") / g.size


def quantize_ranks(ranks, m=DEFAULT_LEVELS):
    """Map ranks in ``(0, 1]`` to integer levels ``ceil(m * r)`` clipped to ``[1, m]``."""
    if m < 2:
        raise ValueError(f"need at least 2 levels, got m={m}")
    r = np.asarray(ranks, dtype=float)
    # ranks are multiples of 1/n, so m*r can land a hair above an integer
    levels = np.ceil(np.round(m * r, 12))
    return np.clip(levels, 1, m).astype(int)


def mean_knn_distance(points, K=DEFAULT_K, distances=None):
    """Average over all points of their mean distance to the K nearest others."""
    return float(-aknn_scores(points, K, distances).mean())
