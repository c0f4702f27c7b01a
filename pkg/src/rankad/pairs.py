"""Preference pairs built from quantized rank levels."""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_PAIR_CAP = 200_000


class VacuousPairsWarning(UserWarning):
    """All samples share one level, so no preference pair exists."""


@dataclass(frozen=True)
class PreferencePairSet:
    """Index pairs ``(i[p], j[p])`` meaning sample ``i`` should outscore sample ``j``.

    ``levels`` is the level vector the pairs were generated from; ``seed`` is
    set when the set is a random subsample.
    """

    i: np.ndarray
    j: np.ndarray
    levels: np.ndarray
    seed: Optional[int] = None

    def __len__(self):
        return int(self.i.size)

    def as_tuples(self):
        return list(zip(self.i.tolist(), self.j.tolist()))

    def strata(self):
        """Ordered level pair ``(level_i, level_j)`` of every pair, shape ``(P, 2)``."""
        return np.column_stack([self.levels[self.i], self.levels[self.j]])

    def select(self, mask):
        return PreferencePairSet(self.i[mask], self.j[mask], self.levels, self.seed)

    def restrict(self, indices):
        """Pairs whose two endpoints both lie in ``indices`` (original numbering kept)."""
        keep = np.zeros(self.levels.size, dtype=bool)
        keep[np.asarray(indices, dtype=int)] = True
        return self.select(keep[self.i] & keep[self.j])


def generate_pairs(levels):
    """All ``(i, j)`` with ``levels[i] > levels[j]``, in i-major, j-minor order."""
    lv = np.asarray(levels)
    I, J = np.nonzero(lv[:, None] > lv[None, :])
    if I.size == 0:
        warnings.warn(
            "all samples share one quantized level; no preference pairs",
            VacuousPairsWarning,
            stacklevel=2,
        )
    return PreferencePairSet(I.astype(np.int64), J.astype(np.int64), lv.copy())


def expected_pair_count(levels):
    """Sum over level pairs a > b of ``count(a) * count(b)``."""
    _, counts = np.unique(np.asarray(levels), return_counts=True)
    counts = counts.astype(np.int64)
    return int((counts.sum() ** 2 - (counts**2).sum()) // 2)


def _proportional_quota(sizes, cap):
    # largest-remainder allocation; ties resolved toward earlier strata
    sizes = np.asarray(sizes, dtype=np.int64)
    exact = cap * sizes / sizes.sum()
    quota = np.floor(exact).astype(np.int64)
    short = cap - quota.sum()
    order = np.argsort(-(exact - quota), kind="stable")
    quota[order[:short]] += 1
    return np.minimum(quota, sizes)


def subsample_pairs(pairs, cap=DEFAULT_PAIR_CAP, seed=0):
    """Uniformly subsample to at most ``cap`` pairs, stratified by level pair.

    Each ordered level-pair stratum keeps a share of ``cap`` proportional to
    its size.  The result preserves the input order and is deterministic
    given ``seed``.
    """
    if cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    if len(pairs) <= cap:
        return pairs
    rng = np.random.default_rng(seed)
    st = pairs.strata()
    keys, inverse = np.unique(st, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sizes = np.bincount(inverse, minlength=len(keys))
    quota = _proportional_quota(sizes, cap)
    keep = np.zeros(len(pairs), dtype=bool)
    for s in range(len(keys)):
        members = np.flatnonzero(inverse == s)
        keep[rng.choice(members, size=quota[s], replace=False)] = True
    return PreferencePairSet(pairs.i[keep], pairs.j[keep], pairs.levels, seed)
