"""alpha-level anomaly detection from a trained scorer, plus the aK-LPE baseline."""

import math
from dataclasses import dataclass

import numpy as np

from . import knn


@dataclass(frozen=True)
class DetectionResult:
    score: float
    rank: float
    is_anomaly: bool
    alpha: float


def order_index(alpha, n):
    """``ceil(alpha * n)`` with guards against ``alpha * n`` landing a hair above an integer."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return min(n, math.ceil(round(alpha * n, 9)))


@dataclass(frozen=True)
class Detector:
    """Scorer plus the ascending scores of its own training points."""

    model: object
    sorted_scores: np.ndarray

    @property
    def n(self):
        return int(self.sorted_scores.size)

    def score(self, X):
        return self.model.decision_function(X)

    def threshold(self, alpha):
        """The ``ceil(alpha n)``-th smallest training score, or ``-inf`` when that index is 0."""
        k = order_index(alpha, self.n)
        return -np.inf if k == 0 else float(self.sorted_scores[k - 1])

    def rank_of_scores(self, scores):
        return np.searchsorted(self.sorted_scores, scores, side="right") / self.n

    def test_rank(self, eta):
        """Fraction of training scores ``<= g(eta)``."""
        return self.rank_of_scores(self.score(eta))

    def flags(self, X, alpha):
        """Boolean anomaly flag for every row of ``X`` (strictly below the threshold)."""
        return self.score(np.atleast_2d(X)) < self.threshold(alpha)

    def classify(self, eta, alpha):
        s = float(self.score(np.asarray(eta, dtype=float).ravel()))
        return DetectionResult(s, float(self.rank_of_scores(s)), bool(s < self.threshold(alpha)), alpha)

    def classify_many(self, X, alpha):
        """Scores, ranks and flags for every row of ``X``."""
        s = self.score(np.atleast_2d(X))
        return s, self.rank_of_scores(s), s < self.threshold(alpha)


def build_detector(model, data):
    """Attach the sorted training scores of ``model`` on ``data``."""
    X = knn.as_dataset(data)
    return Detector(model, np.sort(np.atleast_1d(model.decision_function(X))))


class AkLpe:
    """Average k-NN distance detector evaluated directly at test time.

    Every query costs distances to all ``n`` training points.  Queries may
    use up to ``K = n`` neighbours; the training statistic is capped at
    ``n - 1`` because a training point is not its own neighbour.
    """

    def __init__(self, data, K=knn.DEFAULT_K):
        self.data = knn.as_dataset(data)
        n = self.data.shape[0]
        self.K = knn._check_k(K, n, strict=False)
        self.sorted_scores = np.sort(knn.aknn_scores(self.data, min(self.K, n - 1)))

    @property
    def n(self):
        return int(self.sorted_scores.size)

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return -knn.knn_mean_distance(knn.cross_distances(X, self.data), self.K)

    def score_one(self, eta):
        diff = self.data - np.asarray(eta, dtype=float).ravel()
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        part = np.partition(d, self.K - 1)[: self.K]
        part.sort()
        return -part.sum() / self.K

    def rank(self, X):
        return np.searchsorted(self.sorted_scores, self.score(X), side="right") / self.n

    def rank_one(self, eta):
        return np.searchsorted(self.sorted_scores, self.score_one(eta), side="right") / self.n


def aklpe_rank(data, K, eta):
    """Rank of ``eta`` among the training points under the average k-NN statistic."""
    return float(AkLpe(data, K).rank_one(eta))
