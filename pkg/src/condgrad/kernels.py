"""Kernels, probability measures, and low-discrepancy sampling on the box.

All kernels satisfy K(x, x) = 1 and K(x, y) >= 0, the conditions under
which the quadrature-error functional is 2-smooth with bounded energy
diameter.  Measures live on the box [-1, 1]^d and expose a density (for
quadrature) and a sampler (for the Monte-Carlo baseline).
"""

from __future__ import annotations

import math

import numpy as np

from .core import ContractViolation

_SQRT3 = math.sqrt(3.0)


class Kernel:
    """Symmetric positive-definite kernel with vectorized evaluation."""

    name: str = "kernel"

    def _from_sqdist(self, sq: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, x, y) -> float:
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ContractViolation("kernel arguments must share a shape")
        diff = x - y
        return float(self._from_sqdist(np.array(float(np.dot(diff, diff)))))

    def pairwise(self, xs, ys) -> np.ndarray:
        """Kernel matrix between row-stacked point sets (n, d) and (m, d)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        sq = (
            np.sum(xs * xs, axis=1)[:, None]
            + np.sum(ys * ys, axis=1)[None, :]
            - 2.0 * (xs @ ys.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return self._from_sqdist(sq)

    def gram(self, xs) -> np.ndarray:
        return self.pairwise(xs, xs)


class Matern32(Kernel):
    """Matern kernel with smoothness 3/2 and scale sqrt(3): (1+r) e^{-r}."""

    name = "matern32"

    def _from_sqdist(self, sq):
        r = np.sqrt(sq)
        return (1.0 + r) * np.exp(-r)


class Matern52(Kernel):
    """Matern kernel with smoothness 5/2 and scale sqrt(5):
    (1 + r + r^2/3) e^{-r}."""

    name = "matern52"

    def _from_sqdist(self, sq):
        r = np.sqrt(sq)
        return (1.0 + r + sq / 3.0) * np.exp(-r)


class Gaussian(Kernel):
    """Squared-exponential kernel e^{-r^2}."""

    name = "gaussian"

    def _from_sqdist(self, sq):
        return np.exp(-sq)


KERNELS = {k.name: k for k in (Matern32(), Matern52(), Gaussian())}


def kernel_by_name(name: str) -> Kernel:
    try:
        return KERNELS[name]
    except KeyError:
        raise ContractViolation(f"unknown kernel {name!r}") from None


def kernel_eval(kernel: Kernel, x, y) -> float:
    """Pointwise kernel evaluation (functional form)."""
    return kernel.eval(x, y)


class Measure:
    """Probability measure on the box [-1, 1]^d."""

    name: str = "measure"

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ContractViolation("dimension must be >= 1")
        self.dimension = int(dimension)

    def density(self, xs) -> np.ndarray:
        """Density values at row-stacked points inside the box."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def cache_key(self) -> tuple:
        return (self.name, self.dimension)

    def _check(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dimension:
            raise ContractViolation(
                f"points must have dimension {self.dimension}"
            )
        return xs


class UniformBox(Measure):
    """Uniform distribution on [-1, 1]^d."""

    name = "uniform"

    def density(self, xs):
        xs = self._check(xs)
        return np.full(xs.shape[0], 0.5**self.dimension)

    def sample(self, rng, n):
        return rng.uniform(-1.0, 1.0, size=(n, self.dimension))


class TruncatedGaussian(Measure):
    """Density proportional to exp(-||x||^2) restricted to the box."""

    name = "truncated-gaussian"

    def __init__(self, dimension: int):
        super().__init__(dimension)
        # One-dimensional mass of exp(-u^2) on [-1, 1] is sqrt(pi) erf(1).
        self._norm = (math.sqrt(math.pi) * math.erf(1.0)) ** dimension

    def density(self, xs):
        xs = self._check(xs)
        return np.exp(-np.sum(xs * xs, axis=1)) / self._norm

    def sample(self, rng, n):
        out = np.empty((n, self.dimension))
        filled = 0
        while filled < n:
            m = max(2 * (n - filled), 16)
            cand = rng.uniform(-1.0, 1.0, size=(m, self.dimension))
            accept = rng.random(m) < np.exp(-np.sum(cand * cand, axis=1))
            took = cand[accept][: n - filled]
            out[filled : filled + took.shape[0]] = took
            filled += took.shape[0]
        return out


class GaussianMixture(Measure):
    """Mixture of isotropic Gaussians truncated to the box.

    Each component has density proportional to
    ``exp(-||x - center||^2 / (2 bandwidth^2))`` renormalized on the box,
    so the component weights keep their meaning after truncation.
    """

    name = "gaussian-mixture"

    DEFAULT_WEIGHTS = (0.5, 0.3, 0.2)
    DEFAULT_BANDWIDTH = 0.3
    DEFAULT_SEED = 20210907

    def __init__(self, dimension: int = 2, components=None):
        super().__init__(dimension)
        if components is None:
            rng = np.random.default_rng(self.DEFAULT_SEED)
            components = [
                (w, rng.uniform(-0.8, 0.8, size=dimension), self.DEFAULT_BANDWIDTH)
                for w in self.DEFAULT_WEIGHTS
            ]
        comps = []
        total = 0.0
        for weight, center, bandwidth in components:
            center = np.asarray(center, dtype=float)
            if center.shape != (self.dimension,):
                raise ContractViolation("component center has wrong dimension")
            if bandwidth <= 0.0 or weight <= 0.0:
                raise ContractViolation("weights and bandwidths must be positive")
            comps.append((float(weight), center, float(bandwidth)))
            total += weight
        if abs(total - 1.0) > 1e-12:
            raise ContractViolation("mixture weights must sum to one")
        self.components = comps
        # Box mass of each untruncated component, for renormalization.
        self._box_mass = [
            float(
                np.prod(
                    [
                        self._component_mass_1d(c[k], b)
                        for k in range(self.dimension)
                    ]
                )
            )
            for _, c, b in comps
        ]

    @staticmethod
    def _component_mass_1d(center: float, bandwidth: float) -> float:
        s = bandwidth * math.sqrt(2.0)
        return (
            0.5
            * math.sqrt(math.pi)
            * s
            * (math.erf((1.0 - center) / s) + math.erf((1.0 + center) / s))
        )

    def cache_key(self):
        parts = tuple(
            (w, tuple(np.round(c, 12)), b) for w, c, b in self.components
        )
        return (self.name, self.dimension, parts)

    def density(self, xs):
        xs = self._check(xs)
        out = np.zeros(xs.shape[0])
        for (weight, center, bandwidth), mass in zip(self.components, self._box_mass):
            sq = np.sum((xs - center) ** 2, axis=1)
            out += weight * np.exp(-sq / (2.0 * bandwidth**2)) / mass
        return out

    def sample(self, rng, n):
        weights = np.array([w for w, _, _ in self.components])
        out = np.empty((n, self.dimension))
        which = rng.choice(len(self.components), size=n, p=weights)
        for i in range(n):
            _, center, bandwidth = self.components[which[i]]
            while True:
                x = rng.normal(center, bandwidth, size=self.dimension)
                if np.all(np.abs(x) <= 1.0):
                    out[i] = x
                    break
        return out


MEASURES = {
    "uniform": UniformBox,
    "truncated-gaussian": TruncatedGaussian,
    "gaussian-mixture": GaussianMixture,
}


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=float)
    f = 1.0 / base
    idx = indices.copy()
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


def halton_points(n: int, dimension: int) -> np.ndarray:
    """First ``n`` Halton points mapped to the box [-1, 1]^d.

    Deterministic; coordinate k uses the k-th prime base, and the
    sequence starts at index 1 to skip the origin.
    """
    if dimension > len(_PRIMES):
        raise ContractViolation("dimension too large for the Halton bases")
    indices = np.arange(1, n + 1)
    cols = [_radical_inverse(indices, _PRIMES[k]) for k in range(dimension)]
    return 2.0 * np.stack(cols, axis=1) - 1.0
