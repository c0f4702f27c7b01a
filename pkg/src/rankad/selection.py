"""Cross-validated choice of the rank-SVM trade-off ``C`` and RBF width ``sigma``.

Each fold trains on preference pairs among its training indices and is
scored by the fraction of held-out pairs it orders wrongly.  By default the
k-NN ranks and levels are recomputed inside each fold, separately for the
training part and the held-out part, so held-out labels never see training
points.  ``rank_scope="full"`` instead ranks the whole set once and restricts
those pairs to each side of the split.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import knn
from .pairs import PreferencePairSet, VacuousPairsWarning, generate_pairs, subsample_pairs
from scipy.spatial.distance import cdist

from .solver import KernelSpec, PairProblem, SolverConfig, _collapse, solve

log = logging.getLogger(__name__)

DEFAULT_C_VALUES = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0)
DEFAULT_SIGMA_EXPONENTS = tuple(range(-10, 11))
DEFAULT_FOLDS = 4
# CV only needs the held-out ordering, so its solves are looser than a final
# fit and each fold trains on a smaller stratified subsample of pairs
CV_SOLVER = SolverConfig(tol=1e-2, max_epochs=300)
DEFAULT_CV_PAIR_CAP = 20_000


@dataclass(frozen=True)
class ParamGrid:
    c_values: Tuple[float, ...]
    sigma_values: Tuple[float, ...]

    def __post_init__(self):
        for name in ("c_values", "sigma_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} is empty")
            if min(vals) <= 0:
                raise ValueError(f"{name} must be strictly positive")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be sorted strictly ascending")
            object.__setattr__(self, name, vals)

    @classmethod
    def default(cls, mean_knn_dist, c_values=DEFAULT_C_VALUES, exponents=DEFAULT_SIGMA_EXPONENTS):
        """The standard grid: ``sigma = 2**i * mean_knn_dist`` for ``i`` in ``-10..10``."""
        return cls(tuple(c_values), tuple(2.0**i * mean_knn_dist for i in exponents))

    def __len__(self):
        return len(self.c_values) * len(self.sigma_values)


@dataclass
class Candidate:
    C: float
    sigma: float
    fold_rates: List[Optional[float]]
    converged: List[bool]
    skipped: bool = False

    @property
    def mean_rate(self):
        rates = [r for r in self.fold_rates if r is not None]
        return float(np.mean(rates)) if rates else float("nan")


@dataclass
class CvReport:
    candidates: List[Candidate]
    chosen: Candidate
    folds: int
    seed: int
    fold_sizes: List[int] = field(default_factory=list)

    @property
    def C(self):
        return self.chosen.C

    @property
    def sigma(self):
        return self.chosen.sigma

    @property
    def all_converged(self):
        return all(all(c.converged) for c in self.candidates if not c.skipped)


def disagreement(scorer, pairs, points):
    """Fraction of pairs ``(i, j)`` with ``g(x_i) <= g(x_j)``; ties count against."""
    if len(pairs) == 0:
        raise ValueError("disagreement is undefined on an empty pair set")
    scores = np.asarray(scorer(np.asarray(points, dtype=float)), dtype=float)
    return float(np.mean(scores[pairs.i] <= scores[pairs.j]))


def fold_assignment(n, folds, seed):
    """Seeded permutation of ``range(n)`` cut into ``folds`` near-equal blocks."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, folds)]


def pairs_within(X, idx, K, m, pair_cap, seed):
    """Pairs among ``X[idx]`` from ranks computed on that subset alone, in global indices."""
    sub = X[idx]
    k = min(K, sub.shape[0] - 1)
    levels = knn.quantize_ranks(knn.ranks_from_scores(knn.aknn_scores(sub, k)), m)
    local = subsample_pairs(generate_pairs(levels), pair_cap, seed)
    full_levels = np.zeros(X.shape[0], dtype=int)
    full_levels[idx] = levels
    return PreferencePairSet(idx[local.i], idx[local.j], full_levels, local.seed)


def _choose(candidates):
    live = [c for c in candidates if not c.skipped]
    if not live:
        raise ValueError("every candidate was skipped: no fold had validation pairs")
    return min(live, key=lambda c: (c.mean_rate, c.C, c.sigma))


def cv_select(
    data,
    grid=None,
    folds=DEFAULT_FOLDS,
    seed=0,
    K=knn.DEFAULT_K,
    m=knn.DEFAULT_LEVELS,
    pair_cap=DEFAULT_CV_PAIR_CAP,
    solver=CV_SOLVER,
    rank_scope="fold",
    pairs=None,
):
    """Grid search over ``(C, sigma)`` by ``folds``-fold cross-validation.

    Parameters
    ----------
    data : array_like, shape (n, d)
    grid : ParamGrid, optional
        Defaults to :meth:`ParamGrid.default` around the mean K-NN distance.
    folds, seed : int
        Fold count and the seed of the fold permutation (also used for pair
        subsampling and the solver's sweep order).
    rank_scope : {"fold", "full"}
        Where k-NN ranks are computed: inside each side of every split, or
        once on all of ``data``.
    pair_cap : int
        Cap on the pairs of each side of every split.
    pairs : PreferencePairSet, optional
        Precomputed pairs over ``data`` for ``rank_scope="full"``; built
        from ``K`` and ``m`` otherwise.

    Returns
    -------
    CvReport
        The winner has the smallest mean held-out disagreement; ties go to
        the smaller ``C`` and then the smaller ``sigma``.  Refitting the
        winner on all of ``data`` is left to the caller.
    """
    X = knn.as_dataset(data)
    n = X.shape[0]
    if n < 2 * folds:
        raise ValueError(f"need at least {2 * folds} points for {folds}-fold CV, got {n}")
    if rank_scope not in ("fold", "full"):
        raise ValueError(f"rank_scope must be 'fold' or 'full', got {rank_scope!r}")
    if rank_scope == "full" and pairs is None:
        G = knn.aknn_scores(X, K)
        levels = knn.quantize_ranks(knn.ranks_from_scores(G), m)
        pairs = subsample_pairs(generate_pairs(levels), pair_cap, seed)
    if grid is None:
        grid = ParamGrid.default(knn.mean_knn_distance(X, K))

    blocks = fold_assignment(n, folds, seed)
    splits = []
    with warnings.catch_warnings():
        # an all-one-level side just yields an empty set, handled below
        warnings.simplefilter("ignore", VacuousPairsWarning)
        for f, val_idx in enumerate(blocks):
            train_idx = np.sort(np.concatenate([b for k, b in enumerate(blocks) if k != f]))
            if rank_scope == "full":
                splits.append(
                    (
                        subsample_pairs(pairs.restrict(train_idx), pair_cap, seed),
                        subsample_pairs(pairs.restrict(val_idx), pair_cap, seed),
                    )
                )
            else:
                splits.append(
                    (
                        pairs_within(X, train_idx, K, m, pair_cap, seed),
                        pairs_within(X, val_idx, K, m, pair_cap, seed),
                    )
                )

    table = {
        (C, s): Candidate(C, s, [None] * folds, [True] * folds)
        for s in grid.sigma_values
        for C in grid.c_values
    }
    for f, (train_pairs, val_pairs) in enumerate(splits):
        if len(train_pairs) == 0 or len(val_pairs) == 0:
            log.warning("fold %d has no training or validation pairs; skipped", f)
            continue
        problem = PairProblem(X, train_pairs)
        val_pts, val_inv = np.unique(np.concatenate([val_pairs.i, val_pairs.j]), return_inverse=True)
        vi, vj = val_inv[: len(val_pairs)], val_inv[len(val_pairs) :]
        val_sq = cdist(X[val_pts], problem.X, "sqeuclidean")
        for s in grid.sigma_values:
            kernel = KernelSpec(s)
            gram = problem.gram(kernel)
            cross = np.exp(-val_sq / s**2)
            warm = None
            # ascending C keeps the previous duals feasible as a warm start
            for C in grid.c_values:
                cfg = SolverConfig(C=C, tol=solver.tol, max_epochs=solver.max_epochs, seed=seed)
                model = solve(problem, kernel, cfg, init_alpha=warm, gram=gram)
                warm = model.dual_alphas
                # scores of the held-out points from the full (unpruned) coefficients
                beta = _collapse(warm, problem.li, problem.lj, gram.shape[0])
                g = cross @ beta
                cand = table[(C, s)]
                cand.fold_rates[f] = float(np.mean(g[vi] <= g[vj]))
                cand.converged[f] = model.info.converged
        log.debug("fold %d done", f)

    candidates = list(table.values())
    for cand in candidates:
        cand.skipped = all(r is None for r in cand.fold_rates)
    return CvReport(candidates, _choose(candidates), folds, seed, [b.size for b in blocks])
