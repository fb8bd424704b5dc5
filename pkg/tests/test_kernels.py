"""Kernel closed forms, measure densities/samplers, Halton sequence."""

import math

import numpy as np
import pytest
from scipy.special import gamma, kv

from condgrad import (
    ContractViolation,
    Gaussian,
    GaussianMixture,
    Matern32,
    Matern52,
    TruncatedGaussian,
    UniformBox,
    halton_points,
    kernel_by_name,
    kernel_eval,
)
from condgrad.herding import tensor_gauss_legendre

ALL_KERNELS = (Matern32(), Matern52(), Gaussian())


def bessel_form(nu, rho, r):
    """Textbook Bessel-function form of the Matern family."""
    if r == 0.0:
        return 1.0
    arg = math.sqrt(2.0 * nu) * r / rho
    return 2.0 ** (1.0 - nu) / gamma(nu) * arg**nu * kv(nu, arg)


class TestKernelValues:
    @pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.name)
    def test_unit_at_coincident_points(self, kernel, rng):
        for _ in range(10):
            x = rng.uniform(-1, 1, size=3)
            assert kernel_eval(kernel, x, x) == pytest.approx(1.0)

    def test_matern32_closed_form_at_unit_distance(self):
        assert kernel_eval(Matern32(), [1.0], [0.0]) == pytest.approx(
            2.0 * math.exp(-1.0), abs=1e-12
        )

    def test_gaussian_at_unit_distance(self):
        assert kernel_eval(Gaussian(), [1.0], [0.0]) == pytest.approx(
            math.exp(-1.0), abs=1e-15
        )

    @pytest.mark.parametrize(
        "kernel,nu,rho",
        [(Matern32(), 1.5, math.sqrt(3.0)), (Matern52(), 2.5, math.sqrt(5.0))],
        ids=["matern32", "matern52"],
    )
    def test_matches_bessel_form(self, kernel, nu, rho, rng):
        for r in rng.uniform(0.05, 3.0, size=30):
            closed = kernel_eval(kernel, [float(r)], [0.0])
            assert closed == pytest.approx(bessel_form(nu, rho, float(r)), abs=1e-12)

    @pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.name)
    def test_symmetry_and_range(self, kernel, rng):
        for _ in range(50):
            x = rng.uniform(-1, 1, size=2)
            y = rng.uniform(-1, 1, size=2)
            kxy = kernel_eval(kernel, x, y)
            assert kxy == kernel_eval(kernel, y, x)
            assert 0.0 <= kxy <= 1.0

    @pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.name)
    def test_gram_matrices_positive_semidefinite(self, kernel, rng):
        for _ in range(10):
            pts = rng.uniform(-1, 1, size=(12, 2))
            eigs = np.linalg.eigvalsh(kernel.gram(pts))
            assert eigs.min() >= -1e-8

    def test_kernel_by_name(self):
        assert kernel_by_name("gaussian").name == "gaussian"
        with pytest.raises(ContractViolation):
            kernel_by_name("nope")


class TestMeasures:
    @pytest.mark.parametrize(
        "measure",
        [UniformBox(1), UniformBox(2), TruncatedGaussian(1), TruncatedGaussian(2),
         GaussianMixture(2)],
        ids=["uni1", "uni2", "trunc1", "trunc2", "mix2"],
    )
    def test_density_integrates_to_one(self, measure):
        nodes, weights = tensor_gauss_legendre(64, measure.dimension)
        mass = float(weights @ measure.density(nodes))
        assert mass == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize(
        "measure",
        [UniformBox(2), TruncatedGaussian(2), GaussianMixture(2)],
        ids=["uni", "trunc", "mix"],
    )
    def test_samples_stay_in_box(self, measure, rng):
        pts = measure.sample(rng, 500)
        assert pts.shape == (500, 2)
        assert np.all(np.abs(pts) <= 1.0)

    def test_mixture_weights_validated(self):
        with pytest.raises(ContractViolation):
            GaussianMixture(2, components=[(0.7, np.zeros(2), 0.3)])

    def test_mixture_default_is_reproducible(self):
        a = GaussianMixture(2)
        b = GaussianMixture(2)
        assert a.cache_key() == b.cache_key()

    def test_density_rejects_wrong_dimension(self):
        with pytest.raises(ContractViolation):
            UniformBox(2).density(np.zeros((3, 3)))


class TestHalton:
    def test_deterministic_and_in_box(self):
        a = halton_points(512, 2)
        b = halton_points(512, 2)
        np.testing.assert_array_equal(a, b)
        assert np.all(np.abs(a) <= 1.0)

    def test_first_points_match_radical_inverse(self):
        pts = halton_points(3, 2)
        # index 1: (1/2, 1/3); index 2: (1/4, 2/3); index 3: (3/4, 1/9)
        expected01 = np.array([[0.5, 1 / 3], [0.25, 2 / 3], [0.75, 1 / 9]])
        np.testing.assert_allclose(pts, 2.0 * expected01 - 1.0, atol=1e-15)

    def test_low_discrepancy_fills_the_box(self):
        pts = halton_points(4096, 2)
        # every quadrant cell of a 4x4 grid receives points
        cells = ((pts + 1.0) / 2.0 * 4.0).astype(int).clip(0, 3)
        assert len({(i, j) for i, j in cells}) == 16

    def test_dimension_cap(self):
        with pytest.raises(ContractViolation):
            halton_points(8, 11)
