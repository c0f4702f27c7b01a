"""End-to-end fit: k-NN ranks -> preference pairs -> rank-SVM -> detector."""

import logging

import numpy as np

from . import knn
from .detector import build_detector
from .pairs import DEFAULT_PAIR_CAP, generate_pairs, subsample_pairs
from .selection import CV_SOLVER, DEFAULT_CV_PAIR_CAP, DEFAULT_FOLDS, ParamGrid, cv_select
from .solver import KernelSpec, SolverConfig, train

log = logging.getLogger(__name__)


class RankAD:
    """Ranking-based anomaly detector.

    Parameters
    ----------
    K : int
        Neighbourhood size of the average k-NN statistic.
    m : int
        Number of quantized rank levels used to form preference pairs.
    C, sigma : float, optional
        Rank-SVM trade-off and RBF width.  When ``cv`` is set they are chosen
        by cross-validation; otherwise missing values default to ``C = 1``
        and ``sigma`` = mean K-NN distance of the training set.
    cv : bool
        Select ``(C, sigma)`` over ``grid`` (default: the standard grid).
    pair_cap : int
        Upper bound on the number of training pairs (stratified subsample).
    cv_pair_cap : int
        The same bound for each side of every cross-validation split.
    seed : int
        Seeds pair subsampling, fold assignment and solver sweep order.
    """

    def __init__(
        self,
        K=knn.DEFAULT_K,
        m=knn.DEFAULT_LEVELS,
        C=None,
        sigma=None,
        cv=False,
        grid=None,
        folds=DEFAULT_FOLDS,
        pair_cap=DEFAULT_PAIR_CAP,
        seed=0,
        tol=1e-4,
        max_epochs=500_000,
        cv_solver=CV_SOLVER,
        cv_pair_cap=DEFAULT_CV_PAIR_CAP,
        rank_scope="fold",
    ):
        self.K = K
        self.m = m
        self.C = C
        self.sigma = sigma
        self.cv = cv
        self.grid = grid
        self.folds = folds
        self.pair_cap = pair_cap
        self.seed = seed
        self.tol = tol
        self.max_epochs = max_epochs
        self.cv_solver = cv_solver
        self.cv_pair_cap = cv_pair_cap
        self.rank_scope = rank_scope

    def fit(self, X):
        X = knn.as_dataset(X)
        D = knn.pairwise_distances(X)
        self.knn_scores_ = knn.aknn_scores(X, self.K, distances=D)
        self.mean_knn_distance_ = float(-self.knn_scores_.mean())
        self.ranks_ = knn.ranks_from_scores(self.knn_scores_)
        self.levels_ = knn.quantize_ranks(self.ranks_, self.m)
        self.pairs_ = subsample_pairs(generate_pairs(self.levels_), self.pair_cap, self.seed)

        C, sigma = self.C, self.sigma
        self.cv_report_ = None
        if self.cv:
            grid = self.grid or ParamGrid.default(self.mean_knn_distance_)
            self.cv_report_ = cv_select(
                X, grid, self.folds, self.seed, K=self.K, m=self.m, pair_cap=self.cv_pair_cap,
                solver=self.cv_solver, rank_scope=self.rank_scope,
                pairs=self.pairs_ if self.rank_scope == "full" else None,
            )
            C, sigma = self.cv_report_.C, self.cv_report_.sigma
            log.info("cross-validation chose C=%g sigma=%g", C, sigma)
        self.C_ = 1.0 if C is None else float(C)
        self.sigma_ = self.mean_knn_distance_ if sigma is None else float(sigma)

        cfg = SolverConfig(C=self.C_, tol=self.tol, max_epochs=self.max_epochs, seed=self.seed)
        self.model_ = train(X, self.pairs_, KernelSpec(self.sigma_), cfg)
        if not self.model_.info.converged:
            log.warning(
                "rank-SVM stopped after %d epochs with KKT violation %.2e",
                self.model_.info.epochs,
                self.model_.info.max_violation,
            )
        self.detector_ = build_detector(self.model_, X)
        return self

    def score_samples(self, X):
        """Scorer ``g``; larger is more nominal."""
        return self.model_.decision_function(np.atleast_2d(X))

    def rank(self, X):
        return self.detector_.rank_of_scores(self.score_samples(X))

    def predict(self, X, alpha):
        """True where a row is declared anomalous at false-alarm level ``alpha``."""
        return self.detector_.flags(X, alpha)

    def params(self):
        return {
            "K": self.K,
            "m": self.m,
            "C": self.C_,
            "sigma": self.sigma_,
            "pair_cap": self.pair_cap,
            "seed": self.seed,
            "tol": self.tol,
            "max_epochs": self.max_epochs,
            "n_pairs": len(self.pairs_),
            "cv": bool(self.cv),
        }
