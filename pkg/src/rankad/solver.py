"""Kernel pairwise rank-SVM trained by dual coordinate descent.

The primal problem is

    min_w  1/2 ||w||^2 + C * sum_p max(0, 1 - <w, phi(x_i) - phi(x_j)>)

over the preference pairs ``p = (i, j)``.  It has no bias, so the dual is a
box-constrained QP in one variable per pair,

    max_a  sum_p a_p - 1/2 a^T Q a,   0 <= a_p <= C,

with ``Q_pq = <phi(x_ip) - phi(x_jp), phi(x_iq) - phi(x_jq)>``.  Pair
duals collapse onto per-point coefficients ``beta`` and the scorer is
``g(x) = sum_l beta_l k(x_l, x)``.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .knn import as_dataset


class TrainingError(ValueError):
    """Training could not start, e.g. because there are no pairs."""


class NumericalError(ArithmeticError):
    """The kernel produced a non-PSD pair Hessian beyond round-off."""


def rbf_kernel(X, Y, sigma):
    """``exp(-||x - y||^2 / sigma^2)`` for every row pair of ``X`` and ``Y``."""
    sq = cdist(np.atleast_2d(X), np.atleast_2d(Y), "sqeuclidean")
    return np.exp(-sq / (sigma * sigma))


@dataclass(frozen=True)
class KernelSpec:
    sigma: float
    family: str = "rbf"

    def __post_init__(self):
        if self.family != "rbf":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    def matrix(self, X, Y):
        return rbf_kernel(X, Y, self.sigma)


def kernel_eval(spec, x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    diff = x - y
    return math.exp(-float(diff @ diff) / spec.sigma**2)


@dataclass(frozen=True)
class SolverConfig:
    C: float = 1.0
    tol: float = 1e-4
    max_epochs: int = 500_000
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be positive, got {self.max_epochs}")


@dataclass(frozen=True)
class TrainingInfo:
    primal_objective: float
    dual_objective: float
    epochs: int
    converged: bool
    max_violation: float
    dual_history: tuple = ()


@dataclass(frozen=True)
class RankModel:
    """Trained scorer ``g``.

    ``dual_alphas`` is aligned with the pair set passed to :func:`train`;
    ``support_points``/``betas`` keep only points with a nonzero coefficient.
    """

    support_points: np.ndarray
    betas: np.ndarray
    kernel: KernelSpec
    C: float
    dual_alphas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    info: TrainingInfo = None

    @property
    def n_support(self):
        return int(self.betas.size)

    @property
    def dim(self):
        return int(self.support_points.shape[1])

    def decision_function(self, X):
        """Score every row of ``X``; larger means more nominal."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model has d={self.dim}, got {X.shape[1]}")
        if self.n_support == 0:
            out = np.zeros(X.shape[0])
        else:
            out = self.kernel.matrix(X, self.support_points) @ self.betas
        return out[0] if single else out


def zero_model(dim, kernel, C=1.0):
    return RankModel(np.zeros((0, dim)), np.zeros(0), kernel, C)


@numba.njit(cache=True)
def _cd_pass(gram, li, lj, qdiag, C, alpha, g, active, n_active, pg_hi, pg_lo):
    """One sweep of exact single-variable updates over ``active[:n_active]``.

    The active prefix is shuffled first with numba's generator, seeded by
    :func:`_seed_sweeps`.

    Bound variables whose gradient points firmly outside the box (beyond
    the previous sweep's extreme projected gradients) are swapped out of
    the active prefix.  Returns the new active count and the extreme
    projected gradients of the minimisation form seen in this sweep.
    """
    n = g.size
    for t in range(n_active - 1, 0, -1):
        r = np.random.randint(0, t + 1)
        tmp = active[t]
        active[t] = active[r]
        active[r] = tmp
    new_hi = -np.inf
    new_lo = np.inf
    t = 0
    while t < n_active:
        p = active[t]
        i = li[p]
        j = lj[p]
        grad = (g[i] - g[j]) - 1.0
        a = alpha[p]
        pg = 0.0
        if a <= 0.0:
            if grad > pg_hi:
                n_active -= 1
                active[t] = active[n_active]
                active[n_active] = p
                continue
            if grad < 0.0:
                pg = grad
        elif a >= C:
            if grad < pg_lo:
                n_active -= 1
                active[t] = active[n_active]
                active[n_active] = p
                continue
            if grad > 0.0:
                pg = grad
        else:
            pg = grad
        t += 1
        if pg > new_hi:
            new_hi = pg
        if pg < new_lo:
            new_lo = pg
        if pg == 0.0:
            continue
        q = qdiag[p]
        if q > 1e-12:
            new = a - grad / q
        elif grad < 0.0:
            new = C
        else:
            new = 0.0
        if new < 0.0:
            new = 0.0
        elif new > C:
            new = C
        d = new - a
        if d != 0.0:
            alpha[p] = new
            for k in range(n):
                g[k] += d * (gram[i, k] - gram[j, k])
    return n_active, new_hi, new_lo


@numba.njit(cache=True)
def _seed_sweeps(seed):
    np.random.seed(seed)


def kkt_violations(alpha, margins, C):
    """Projected-gradient violation of every pair dual."""
    grad = 1.0 - margins
    viol = np.abs(grad)
    at_low = alpha <= 0.0
    at_high = alpha >= C
    viol[at_low] = np.maximum(grad[at_low], 0.0)
    viol[at_high] = np.maximum(-grad[at_high], 0.0)
    return viol


def _collapse(alpha, li, lj, m):
    return np.bincount(li, alpha, minlength=m) - np.bincount(lj, alpha, minlength=m)


def _objectives(alpha, beta, g, li, lj, C):
    quad = float(beta @ g)
    hinge = np.maximum(0.0, 1.0 - (g[li] - g[lj])).sum()
    return 0.5 * quad + C * hinge, float(alpha.sum()) - 0.5 * quad


class PairProblem:
    """Pairs mapped onto the distinct points they touch, with squared distances.

    Building one of these is the kernel-independent part of training; the
    cross-validation search reuses it for every ``(C, sigma)`` of a fold.
    """

    def __init__(self, data, pairs):
        X = as_dataset(data)
        if len(pairs) == 0:
            raise TrainingError("cannot train on an empty pair set")
        pts, inv = np.unique(np.concatenate([pairs.i, pairs.j]), return_inverse=True)
        P = len(pairs)
        self.pairs = pairs
        self.points = pts
        self.li = np.ascontiguousarray(inv[:P], dtype=np.int64)
        self.lj = np.ascontiguousarray(inv[P:], dtype=np.int64)
        self.X = X[pts]
        self.sqdist = cdist(self.X, self.X, "sqeuclidean")

    def __len__(self):
        return self.li.size

    def gram(self, kernel):
        if kernel.family != "rbf":
            return kernel.matrix(self.X, self.X)
        return np.exp(-self.sqdist / kernel.sigma**2)


def train(data, pairs, kernel, cfg=None, init_alpha=None, track_dual=False):
    """Fit a rank-SVM scorer on index pairs into ``data``.

    Parameters
    ----------
    data : array_like, shape (n, d)
    pairs : PreferencePairSet
    kernel : KernelSpec
    cfg : SolverConfig, optional
    init_alpha : ndarray, optional
        Warm start for the pair duals; clipped into ``[0, C]``.
    track_dual : bool
        Record the dual objective after every epoch in ``info.dual_history``.

    Returns
    -------
    RankModel
        ``info.converged`` reports whether every pair satisfied the KKT
        conditions to ``cfg.tol`` within ``cfg.max_epochs`` epochs.
    """
    problem = PairProblem(data, pairs)
    return solve(problem, kernel, cfg, init_alpha, track_dual)


def solve(problem, kernel, cfg=None, init_alpha=None, track_dual=False, gram=None):
    """Train on a prepared :class:`PairProblem`; ``gram`` may be passed in if cached."""
    cfg = cfg or SolverConfig()
    C = float(cfg.C)
    li, lj = problem.li, problem.lj
    P = len(problem)
    if gram is None:
        gram = problem.gram(kernel)
    qdiag = gram[li, li] - 2.0 * gram[li, lj] + gram[lj, lj]
    if qdiag.min() < -1e-9:
        p = int(np.argmin(qdiag))
        raise NumericalError(f"negative pair curvature {qdiag[p]:.3e} at pair {p}")

    if init_alpha is None:
        alpha = np.zeros(P)
    else:
        alpha = np.clip(np.asarray(init_alpha, dtype=float), 0.0, C).copy()
    m = problem.points.size
    g = gram @ _collapse(alpha, li, lj, m)

    _seed_sweeps(cfg.seed & 0xFFFFFFFF)
    history = []
    converged = False
    epochs = 0
    active = np.arange(P, dtype=np.int64)
    n_active = P
    pg_hi, pg_lo = np.inf, -np.inf
    while epochs < cfg.max_epochs:
        n_active, new_hi, new_lo = _cd_pass(
            gram, li, lj, qdiag, C, alpha, g, active, n_active, pg_hi, pg_lo
        )
        epochs += 1
        if track_dual:
            beta = _collapse(alpha, li, lj, m)
            history.append(float(alpha.sum()) - 0.5 * float(beta @ (gram @ beta)))
        if max(new_hi, -new_lo, 0.0) <= cfg.tol:
            # refresh scores to shed accumulated round-off, then check every pair
            g = gram @ _collapse(alpha, li, lj, m)
            if kkt_violations(alpha, g[li] - g[lj], C).max() <= cfg.tol:
                converged = True
                break
            n_active = P
            pg_hi, pg_lo = np.inf, -np.inf
            continue
        pg_hi = new_hi if new_hi > 0 else np.inf
        pg_lo = new_lo if new_lo < 0 else -np.inf

    beta = _collapse(alpha, li, lj, m)
    g = gram @ beta
    viol = float(kkt_violations(alpha, g[li] - g[lj], C).max())
    primal, dual = _objectives(alpha, beta, g, li, lj, C)
    keep = beta != 0.0
    info = TrainingInfo(primal, dual, epochs, converged, viol, tuple(history))
    return RankModel(problem.X[keep].copy(), beta[keep], kernel, C, alpha, info)


def pair_margins(model, data, pairs):
    scores = model.decision_function(as_dataset(data))
    return scores[pairs.i] - scores[pairs.j]


def primal_objective(model, data, pairs, C=None):
    """``1/2 beta^T K beta + C * sum_p hinge(1 - margin_p)``."""
    C = model.C if C is None else C
    if model.n_support:
        norm2 = float(model.betas @ model.decision_function(model.support_points))
    else:
        norm2 = 0.0
    hinge = np.maximum(0.0, 1.0 - pair_margins(model, data, pairs)).sum()
    return 0.5 * norm2 + C * float(hinge)


def dual_objective(model):
    """``sum_p alpha_p - 1/2 beta^T K beta`` of the stored duals."""
    if model.n_support:
        norm2 = float(model.betas @ model.decision_function(model.support_points))
    else:
        norm2 = 0.0
    return float(model.dual_alphas.sum()) - 0.5 * norm2
