import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankad import detector, knn
from rankad.detector import AkLpe, Detector, aklpe_rank, build_detector, order_index
from rankad.pipeline import RankAD
from rankad.solver import KernelSpec, zero_model


class Identity:
    """Scorer g(x) = x[0]."""

    dim = 1

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        return X[0] if X.ndim == 1 else X[:, 0]


def ten():
    return Detector(Identity(), np.arange(1.0, 11.0))


class TestBuild:
    def test_sorted(self):
        det = build_detector(Identity(), [[0.3], [0.1], [0.2]])
        np.testing.assert_array_equal(det.sorted_scores, [0.1, 0.2, 0.3])

    def test_zero_model(self):
        det = build_detector(zero_model(2, KernelSpec(1.0)), np.ones((4, 2)))
        np.testing.assert_array_equal(det.sorted_scores, 0.0)


class TestRank:
    def test_between(self):
        det = Detector(Identity(), np.array([1.0, 2, 3, 4]))
        assert det.test_rank([2.5]) == 0.5

    def test_below_min(self):
        assert Detector(Identity(), np.array([1.0, 2, 3, 4])).test_rank([0.0]) == 0.0

    def test_tied_block_counted_whole(self):
        det = Detector(Identity(), np.array([1.0, 2, 2, 2, 5]))
        assert det.test_rank([2.0]) == pytest.approx(0.8)


class TestClassify:
    def test_threshold(self):
        assert ten().threshold(0.2) == 2.0

    def test_below_threshold_flags(self):
        res = ten().classify([1.5], 0.2)
        assert res.is_anomaly and res.score == 1.5 and res.rank == 0.1

    def test_boundary_is_nominal(self):
        assert not ten().classify([2.0], 0.2).is_anomaly

    def test_alpha_one(self):
        det = ten()
        assert det.classify([9.99], 1.0).is_anomaly
        assert not det.classify([10.0], 1.0).is_anomaly

    def test_alpha_zero_never_flags(self):
        det = ten()
        assert det.threshold(0.0) == -np.inf
        assert not det.flags(np.array([[-1e300], [0.0]]), 0.0).any()

    @pytest.mark.parametrize("alpha", [-0.1, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            ten().classify([1.0], alpha)

    def test_order_index_float_guard(self):
        # 0.07 * 100 is 7.000000000000001 in floating point
        assert order_index(0.07, 100) == 7
        assert order_index(0.3, 10) == 3

    def test_classify_many_agrees(self):
        det = ten()
        X = np.array([[0.5], [2.0], [2.5], [11.0]])
        s, r, f = det.classify_many(X, 0.3)
        for k, x in enumerate(X):
            one = det.classify(x, 0.3)
            assert (one.score, one.rank, one.is_anomaly) == (s[k], r[k], f[k])

    def test_training_sample_false_alarm_bound(self):
        # at most ceil(alpha n) - 1 distinct training scores lie strictly below the threshold
        det = ten()
        for alpha in (0.05, 0.1, 0.25, 0.5):
            assert det.flags(np.arange(1.0, 11.0)[:, None], alpha).mean() <= alpha


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=1, max_size=40),
    st.lists(st.floats(-120, 120), min_size=1, max_size=40),
    st.floats(0, 1),
    st.floats(0, 1),
)
def test_regions_nest(train_scores, probes, a1, a2):
    lo, hi = sorted((a1, a2))
    det = Detector(Identity(), np.sort(train_scores))
    P = np.array(probes)[:, None]
    assert not (det.flags(P, lo) & ~det.flags(P, hi)).any()


class TestAkLpe:
    def test_hand_example(self):
        assert aklpe_rank([0.0, 1.0, 3.0], 2, [0.5]) == 1.0

    def test_far_point(self):
        assert aklpe_rank([0.0, 1.0, 3.0], 2, [100.0]) == 0.0

    def test_coincident_k1(self):
        base = AkLpe([[0.0], [1.0], [3.0]], 1)
        assert base.score_one([1.0]) == 0.0 and base.rank_one([1.0]) == 1.0

    def test_batch_matches_single(self):
        X = np.random.default_rng(0).normal(size=(50, 3))
        base = AkLpe(X, 5)
        T = np.random.default_rng(1).normal(size=(10, 3))
        np.testing.assert_allclose(base.score(T), [base.score_one(t) for t in T], rtol=1e-12)
        np.testing.assert_array_equal(base.rank(T), [base.rank_one(t) for t in T])

    def test_training_scores(self):
        base = AkLpe([[0.0], [1.0], [3.0]], 2)
        np.testing.assert_allclose(base.sorted_scores, [-2.5, -2.0, -1.5])

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            AkLpe([[0.0], [1.0]], 3)


def test_end_to_end_nesting():
    X = np.random.default_rng(0).normal(size=(120, 2))
    est = RankAD(sigma=1.0).fit(X)
    P = np.random.default_rng(1).uniform(-4, 4, size=(1000, 2))
    f05, f10, f20 = (est.predict(P, a) for a in (0.05, 0.1, 0.2))
    assert not (f05 & ~f10).any() and not (f10 & ~f20).any()
    assert est.detector_.n == 120
    assert isinstance(est.detector_, detector.Detector)
    np.testing.assert_allclose(-est.knn_scores_.mean(), knn.mean_knn_distance(X))
