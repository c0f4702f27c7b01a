import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from rankad import datagen
from rankad.datagen import MixtureSpec, UniformBoxSpec

STD2 = MixtureSpec([1.0], [[0.0, 0.0]], [np.eye(2)])


class TestSpecs:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(weights=[0.5, 0.6], means=[[0.0], [1.0]], covs=[[[1.0]], [[1.0]]]),
            dict(weights=[-0.5, 1.5], means=[[0.0], [1.0]], covs=[[[1.0]], [[1.0]]]),
            dict(weights=[1.0], means=[[0.0, 0.0]], covs=[[[1.0, 0.5], [0.4, 1.0]]]),
            dict(weights=[1.0], means=[[0.0, 0.0]], covs=[[[1.0, 2.0], [2.0, 1.0]]]),
            dict(weights=[1.0], means=[[0.0, 0.0]], covs=[[[1.0]]]),
        ],
    )
    def test_invalid_mixture(self, kwargs):
        with pytest.raises(ValueError):
            MixtureSpec(**kwargs)

    def test_invalid_box(self):
        with pytest.raises(ValueError):
            UniformBoxSpec([0.0, 1.0], [1.0, 1.0])

    def test_builtins(self):
        assert set(datagen.BUILTIN_SPECS) >= {"fig1", "fig2", "fig2-anomaly"}
        np.testing.assert_array_equal(datagen.GAUSSIAN_TOY_MIXTURE.weights, [0.2, 0.8])
        np.testing.assert_array_equal(datagen.GAUSSIAN_TOY_ANOMALY.lower, [-18, -18])


class TestSampling:
    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            datagen.sample_mixture(STD2, 0, seed=0)

    def test_n_one(self):
        assert datagen.sample_mixture(STD2, 1, seed=0).shape == (1, 2)

    def test_seeded(self):
        a = datagen.sample_mixture(datagen.GAUSSIAN_TOY_MIXTURE, 50, seed=7)
        b = datagen.sample_mixture(datagen.GAUSSIAN_TOY_MIXTURE, 50, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_component_frequencies(self):
        _, comp = datagen.sample_mixture(datagen.GAUSSIAN_TOY_MIXTURE, 10_000, seed=1, return_components=True)
        freq = np.bincount(comp, minlength=2) / comp.size
        np.testing.assert_allclose(freq, [0.2, 0.8], atol=0.02)

    def test_component_moments(self):
        X, comp = datagen.sample_mixture(datagen.GAUSSIAN_TOY_MIXTURE, 20_000, seed=2, return_components=True)
        big = X[comp == 1]
        np.testing.assert_allclose(big.mean(0), [-5.0, 0.0], atol=0.1)
        np.testing.assert_allclose(big.var(0), [9.0, 1.0], rtol=0.05)

    def test_box_samples(self):
        box = datagen.GAUSSIAN_TOY_ANOMALY
        A = datagen.sample_uniform_box(box, 20_000, seed=3)
        assert ((A >= -18) & (A <= 18)).all()
        # uniform on [-18, 18]: sd 36 / sqrt(12), so 4 standard errors is about 0.29
        np.testing.assert_allclose(A.mean(0), [0.0, 0.0], atol=4 * 36 / math.sqrt(12 * 20_000))
        np.testing.assert_array_equal(A, datagen.sample_uniform_box(box, 20_000, seed=3))


class TestDensity:
    def test_standard_normal(self):
        assert datagen.mixture_density(STD2, [0.0, 0.0]) == pytest.approx(1 / (2 * math.pi), rel=1e-12)

    def test_level_curve_fixture(self):
        expected = 0.5 / math.pi + 0.5 * math.exp(-4) / math.pi
        assert expected == pytest.approx(0.1620700, abs=1e-7)
        assert datagen.mixture_density(datagen.LEVEL_CURVE_MIXTURE, [4.0, 1.0]) == pytest.approx(expected, rel=1e-12)

    def test_reflection_symmetry(self):
        P = np.random.default_rng(0).normal(size=(20, 2)) * 3 + [4, 0]
        f = datagen.mixture_density(datagen.LEVEL_CURVE_MIXTURE, P)
        g = datagen.mixture_density(datagen.LEVEL_CURVE_MIXTURE, P * [1, -1])
        np.testing.assert_allclose(f, g, rtol=1e-12)

    def test_batch_matches_pointwise(self):
        P = np.random.default_rng(1).normal(size=(5, 2)) * 4
        f = datagen.mixture_density(datagen.GAUSSIAN_TOY_MIXTURE, P)
        for k in range(5):
            assert f[k] == datagen.mixture_density(datagen.GAUSSIAN_TOY_MIXTURE, P[k])

    @pytest.mark.parametrize("spec,box", [("fig1", (-6, 14, -10, 10)), ("fig2", (-25, 25, -25, 25))])
    def test_integrates_to_one(self, spec, box):
        s = datagen.BUILTIN_SPECS[spec]
        xs = np.linspace(box[0], box[1], 801)
        ys = np.linspace(box[2], box[3], 801)
        gx, gy = np.meshgrid(xs, ys)
        f = datagen.mixture_density(s, np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
        total = integrate.trapezoid(integrate.trapezoid(f, xs, axis=1), ys)
        assert total == pytest.approx(1.0, abs=1e-2)


class TestOraclePvalue:
    def test_matches_closed_form_1d(self):
        n = 40_000
        xs = np.linspace(-3, 3, 13)
        p = datagen.oracle_pvalue(datagen.STANDARD_NORMAL_1D, xs, mc_samples=n, seed=4)
        exact = 2 * norm.cdf(-np.abs(xs))
        se = np.sqrt(exact * (1 - exact) / n) + 0.5 / n
        assert (np.abs(p - exact) <= 3 * se + 1e-12).all()

    def test_mode(self):
        assert datagen.oracle_pvalue(STD2, [0.0, 0.0], mc_samples=10_000) == 1.0

    def test_far_tail(self):
        assert datagen.oracle_pvalue(datagen.GAUSSIAN_TOY_MIXTURE, [0.0, 17.0], mc_samples=10_000) == 0.0

    def test_scalar_for_single_point(self):
        assert isinstance(datagen.oracle_pvalue(STD2, [1.0, 1.0], mc_samples=10_000), float)
