"""Seeded synthetic data and analytic ground truth.

Samplers use :func:`numpy.random.default_rng` (PCG64); a given seed
reproduces the same dataset within this package.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import multivariate_normal


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture ``sum_c w_c N(mean_c, cov_c)``."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covs, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise ValueError("weights, means and covs disagree on component count or dimension")
        if (w <= 0).any() or not np.isclose(w.sum(), 1.0, atol=1e-9):
            raise ValueError("mixture weights must be positive and sum to 1")
        for c in range(k):
            if not np.allclose(cov[c], cov[c].T):
                raise ValueError(f"covariance {c} is not symmetric")
            if np.linalg.eigvalsh(cov[c]).min() <= 0:
                raise ValueError(f"covariance {c} is not positive definite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)

    @property
    def dim(self):
        return int(self.means.shape[1])

    @property
    def n_components(self):
        return int(self.weights.size)


@dataclass(frozen=True)
class UniformBoxSpec:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or not (lo < hi).all():
            raise ValueError("box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return int(self.lower.size)


# two tight blobs used for the level-curve illustration
LEVEL_CURVE_MIXTURE = MixtureSpec(
    weights=[0.5, 0.5],
    means=[[4.0, 1.0], [4.0, -1.0]],
    covs=[0.5 * np.eye(2), 0.5 * np.eye(2)],
)

# elongated two-component nominal density with a uniform anomaly box
GAUSSIAN_TOY_MIXTURE = MixtureSpec(
    weights=[0.2, 0.8],
    means=[[5.0, 0.0], [-5.0, 0.0]],
    covs=[np.diag([1.0, 9.0]), np.diag([9.0, 1.0])],
)
GAUSSIAN_TOY_ANOMALY = UniformBoxSpec([-18.0, -18.0], [18.0, 18.0])

STANDARD_NORMAL_1D = MixtureSpec(weights=[1.0], means=[[0.0]], covs=[[[1.0]]])

BUILTIN_SPECS = {
    "fig1": LEVEL_CURVE_MIXTURE,
    "fig2": GAUSSIAN_TOY_MIXTURE,
    "fig2-anomaly": GAUSSIAN_TOY_ANOMALY,
    "normal1d": STANDARD_NORMAL_1D,
}


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n}")
    return int(n)


def sample_mixture(spec, n, seed=None, return_components=False):
    """Draw ``n`` i.i.d. points: a component by weight, then a Gaussian draw."""
    n = _check_n(n)
    rng = np.random.default_rng(seed)
    comp = rng.choice(spec.n_components, size=n, p=spec.weights)
    z = rng.standard_normal((n, spec.dim))
    chol = np.linalg.cholesky(spec.covs)
    X = spec.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
    return (X, comp) if return_components else X


def sample_uniform_box(spec, n, seed=None):
    n = _check_n(n)
    rng = np.random.default_rng(seed)
    return rng.uniform(spec.lower, spec.upper, size=(n, spec.dim))


def _as_points(spec, x):
    # a scalar (d=1) or a length-d vector (d>1) is one point
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and spec.dim > 1)
    return x.reshape(-1, spec.dim), single


def mixture_density(spec, x):
    """Exact mixture density at one point or at every row of ``x``."""
    pts, single = _as_points(spec, x)
    dens = np.zeros(pts.shape[0])
    for w, mu, cov in zip(spec.weights, spec.means, spec.covs):
        dens += w * multivariate_normal(mu, cov).pdf(pts).reshape(-1)
    return float(dens[0]) if single else dens


def oracle_pvalue(spec, x, mc_samples=100_000, seed=0):
    """Monte Carlo estimate of ``P(f(X) <= f(x))`` for ``X`` drawn from ``spec``.

    Vectorised over rows of ``x``; the same reference sample is shared by
    all query points.
    """
    pts, single = _as_points(spec, x)
    ref = np.sort(mixture_density(spec, sample_mixture(spec, mc_samples, seed)))
    p = np.searchsorted(ref, mixture_density(spec, pts), side="right") / mc_samples
    return float(p[0]) if single else p
