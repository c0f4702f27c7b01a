"""ROC/AUC, empirical false alarm, score grids and test-time benchmarks.

Score convention throughout: larger = more nominal, so anomalies are the
"positives" detected by *low* scores.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import rankdata


@dataclass(frozen=True)
class RocCurve:
    """Operating points from sweeping a threshold over the pooled scores.

    Point ``k`` flags every sample with score ``<= thresholds[k]``;
    ``thresholds`` starts at ``-inf`` (nothing flagged).  ``tpr`` is the
    fraction of anomalies flagged and ``fpr`` the fraction of nominals.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def area(self):
        return float(trapezoid(self.tpr, self.fpr))


def _check_lists(nominal_scores, anomaly_scores):
    a = np.asarray(nominal_scores, dtype=float).ravel()
    b = np.asarray(anomaly_scores, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both score lists must be non-empty")
    return a, b


def auc_score(nominal_scores, anomaly_scores):
    """P(random nominal outscores random anomaly), ties counted one half.

    Computed from mid-ranks of the pooled sample (Mann-Whitney U).
    """
    a, b = _check_lists(nominal_scores, anomaly_scores)
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


def roc_curve(nominal_scores, anomaly_scores):
    a, b = _check_lists(nominal_scores, anomaly_scores)
    thr = np.unique(np.concatenate([a, b]))
    a.sort()
    b.sort()
    fpr = np.searchsorted(a, thr, side="right") / a.size
    tpr = np.searchsorted(b, thr, side="right") / b.size
    return RocCurve(
        np.concatenate([[-np.inf], thr]),
        np.concatenate([[0.0], fpr]),
        np.concatenate([[0.0], tpr]),
    )


def roc_auc(nominal_scores, anomaly_scores):
    """ROC curve and AUC (lower score = more anomalous)."""
    return roc_curve(nominal_scores, anomaly_scores), auc_score(nominal_scores, anomaly_scores)


def empirical_false_alarm(detector, fresh_nominal, alpha):
    """Fraction of ``fresh_nominal`` rows the detector flags at level ``alpha``."""
    return float(np.mean(detector.flags(np.atleast_2d(fresh_nominal), alpha)))


@dataclass(frozen=True)
class LevelGrid:
    """Scores on a regular 2-D grid.

    ``values[r, c]`` is the score at ``(xs[c], ys[r])``: rows run along the
    second coordinate (bottom to top), columns along the first (left to
    right).  Nodes are cell centres of the bounding box split into
    ``resolution`` cells per axis.
    """

    bbox: tuple
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    @property
    def resolution(self):
        return self.values.shape[1], self.values.shape[0]

    def nodes(self):
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def grid_axes(bbox, resolution):
    xmin, xmax, ymin, ymax = map(float, bbox)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError(f"degenerate bounding box {bbox}")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nx < 1 or ny < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    return xs, ys


def level_grid(scorer, bbox, resolution, dim=2):
    """Evaluate ``scorer`` on the cell centres of ``bbox = (xmin, xmax, ymin, ymax)``."""
    if dim != 2:
        raise ValueError(f"level grids need 2-D data, got d={dim}")
    xs, ys = grid_axes(bbox, resolution)
    gx, gy = np.meshgrid(xs, ys)
    vals = np.asarray(scorer(np.column_stack([gx.ravel(), gy.ravel()])), dtype=float)
    return LevelGrid(tuple(map(float, bbox)), xs, ys, vals.reshape(gx.shape))


@dataclass(frozen=True)
class LatencyReport:
    """Per-point wall times in seconds; one median per repeat for each method."""

    detector_samples: np.ndarray
    aklpe_samples: np.ndarray
    n_support: int
    n_train: int
    n_points: int

    @property
    def detector_median(self):
        return float(np.median(self.detector_samples))

    @property
    def aklpe_median(self):
        return float(np.median(self.aklpe_samples))


def _per_point_median(fn, points):
    times = np.empty(len(points))
    for k, p in enumerate(points):
        t0 = time.perf_counter()
        fn(p)
        times[k] = time.perf_counter() - t0
    return float(np.median(times))


def latency_benchmark(detector, baseline, test_points, repeats=3, alpha=0.05):
    """Median per-point classify time of ``detector`` vs ``baseline`` (an :class:`AkLpe`).

    Both methods answer one query at a time, as they would online.  The
    first point of each method is run once untimed to warm caches.
    """
    if repeats < 3:
        raise ValueError("need at least 3 repeats")
    pts = np.atleast_2d(np.asarray(test_points, dtype=float))
    detector.classify(pts[0], alpha)
    baseline.rank_one(pts[0])
    det, base = [], []
    for _ in range(repeats):
        det.append(_per_point_median(lambda p: detector.classify(p, alpha), pts))
        base.append(_per_point_median(baseline.rank_one, pts))
    return LatencyReport(np.array(det), np.array(base), detector.model.n_support, detector.n, len(pts))
