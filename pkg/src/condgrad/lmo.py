"""Linear minimization oracles for the four benchmark feasible regions.

Each oracle returns ``argmin_{v in V(P)} <c, v>`` as an :class:`Atom` and
exposes the Euclidean diameter of its region.  The pyramidal width can be
attached as user-supplied metadata; it is never computed here.

Oracles are stateless and safe for concurrent use.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Atom, ConfigurationError, ContractViolation


class LinearMinimizationOracle:
    """Interface: ``minimize(c) -> Atom`` plus region geometry."""

    diameter: float = float("nan")
    pyramidal_width: Optional[float] = None

    def minimize(self, c) -> Atom:
        raise NotImplementedError


def _as_finite(c, shape_hint=None) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ContractViolation("direction must be non-empty")
    if not np.all(np.isfinite(c)):
        raise ContractViolation("direction must be finite")
    return c


class SimplexLMO(LinearMinimizationOracle):
    """Probability simplex: vertices are the standard basis vectors."""

    def __init__(self, n: int, pyramidal_width: Optional[float] = None):
        if n < 1:
            raise ContractViolation("simplex dimension must be >= 1")
        self.n = int(n)
        self.diameter = math.sqrt(2.0) if n > 1 else 0.0
        self.pyramidal_width = pyramidal_width

    def minimize(self, c) -> Atom:
        c = _as_finite(c)
        if c.shape != (self.n,):
            raise ContractViolation(f"direction must have shape ({self.n},)")
        # argmin returns the lowest index on ties.
        i = int(np.argmin(c))
        v = np.zeros(self.n)
        v[i] = 1.0
        return Atom(v, kind="vector")


def simplex_lmo(c) -> Atom:
    """Basis vector minimizing ``<c, e_i>`` (lowest index on ties)."""
    c = _as_finite(c)
    return SimplexLMO(c.shape[0]).minimize(c)


class BirkhoffLMO(LinearMinimizationOracle):
    """Doubly stochastic matrices: vertices are permutation matrices.

    The assignment problem is solved exactly by the O(n^3)
    Jonker-Volgenant solver from scipy.
    """

    def __init__(self, n: int, pyramidal_width: Optional[float] = None):
        if n < 1:
            raise ContractViolation("Birkhoff dimension must be >= 1")
        self.n = int(n)
        self.diameter = math.sqrt(2.0 * n) if n > 1 else 0.0
        self.pyramidal_width = pyramidal_width

    def minimize(self, c) -> Atom:
        c = _as_finite(c)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractViolation("cost matrix must be square")
        if c.shape != (self.n, self.n):
            raise ContractViolation(f"cost matrix must be {self.n}x{self.n}")
        _, sigma = linear_sum_assignment(c)
        return Atom(np.asarray(sigma, dtype=np.int64), kind="permutation")


def birkhoff_lmo(cost) -> Atom:
    """Permutation minimizing ``sum_i C[i, sigma(i)]``."""
    cost = _as_finite(cost)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ContractViolation("cost matrix must be square")
    return BirkhoffLMO(cost.shape[0]).minimize(cost)


class LpBallLMO(LinearMinimizationOracle):
    """Unit lp-norm ball for p > 1.

    The minimizer of ``<c, v>`` over the ball has the closed form
    ``v_i = -sign(c_i) |c_i|**(1/(p-1)) / ||(|c_j|**(1/(p-1)))||_p`` with
    value ``-||c||_q`` for the dual exponent q = p/(p-1).
    """

    def __init__(self, n: int, p: float, pyramidal_width: Optional[float] = None):
        if n < 1:
            raise ContractViolation("dimension must be >= 1")
        if not p > 1.0:
            raise ContractViolation("p must be > 1")
        self.n = int(n)
        self.p = float(p)
        # max ||v||_2 over the unit lp sphere is n**(1/2 - 1/p) for p >= 2.
        self.diameter = 2.0 * max(1.0, n ** (0.5 - 1.0 / p))
        self.pyramidal_width = pyramidal_width

    def minimize(self, c) -> Atom:
        c = _as_finite(c)
        if c.shape != (self.n,):
            raise ContractViolation(f"direction must have shape ({self.n},)")
        if not np.any(c):
            raise ContractViolation(
                "zero direction: the lp-ball minimizer is undefined"
            )
        mag = np.abs(c) ** (1.0 / (self.p - 1.0))
        mag /= np.max(mag)  # rescale before the p-norm to avoid overflow
        scale = float(np.sum(mag**self.p)) ** (1.0 / self.p)
        v = -np.sign(c) * mag / scale
        return Atom(v, kind="vector")


def lp_ball_lmo(c, p: float) -> Atom:
    """Boundary point of the unit lp ball minimizing ``<c, v>``."""
    c = _as_finite(c)
    return LpBallLMO(c.shape[0], p).minimize(c)


class PowerIterationError(RuntimeError):
    """Shifted power iteration failed to meet its residual target."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class SpectrahedronLMO(LinearMinimizationOracle):
    """Trace-one PSD matrices: vertices are rank-one projectors u u^T.

    The minimal-eigenvalue eigenvector is found by power iteration on the
    shifted matrix ``shift * I - G`` with ``shift = ||G||_F``, which makes
    the target eigenvalue dominant.  Only the extreme pair is needed, so a
    full eigendecomposition is avoided.
    """

    def __init__(
        self,
        n: int,
        residual_tol: float = 1e-8,
        max_iterations: int = 2000,
        pyramidal_width: Optional[float] = None,
    ):
        if n < 1:
            raise ContractViolation("dimension must be >= 1")
        self.n = int(n)
        self.residual_tol = float(residual_tol)
        self.max_iterations = int(max_iterations)
        self.diameter = math.sqrt(2.0) if n > 1 else 0.0
        self.pyramidal_width = pyramidal_width

    def minimize(self, c) -> Atom:
        g = _as_finite(c)
        if g.ndim != 2 or g.shape != (self.n, self.n):
            raise ContractViolation(f"matrix must be {self.n}x{self.n}")
        if np.max(np.abs(g - g.T)) > 1e-10:
            raise ContractViolation("matrix must be symmetric within 1e-10")
        g = 0.5 * (g + g.T)
        norm = float(np.linalg.norm(g))
        if norm == 0.0 or self.n == 1:
            # Zero matrix or a 1x1 region: every unit vector is optimal.
            u = np.zeros(self.n)
            u[0] = 1.0
            return Atom(u, kind="psd_factor")
        target = self.residual_tol * norm
        # Deterministic start, nudged so it cannot be orthogonal to the
        # minimal eigenspace for adversarial diagonal matrices.
        u = np.full(self.n, 1e-6)
        u[0] = 1.0
        u /= np.linalg.norm(u)
        shifted = norm * np.eye(self.n) - g
        residual = math.inf
        for _ in range(self.max_iterations):
            v = shifted @ u
            vnorm = float(np.linalg.norm(v))
            if vnorm == 0.0:
                # u is the top eigenvector with eigenvalue equal to the
                # shift; restart orthogonal to it to reach the other end.
                k = int(np.argmin(np.abs(u)))
                w = np.zeros(self.n)
                w[k] = 1.0
                w = w - float(w @ u) * u
                u = w / np.linalg.norm(w)
                continue
            u = v / vnorm
            lam = float(u @ (g @ u))
            residual = float(np.linalg.norm(g @ u - lam * u))
            if residual <= target:
                u = u / np.linalg.norm(u)
                return Atom(u, kind="psd_factor")
        # Clustered minimal eigenvalues make plain power iteration stall;
        # refine the warm iterate with Rayleigh-quotient steps, which keep
        # the residual contract without a full decomposition.
        lam = float(u @ (g @ u))
        for _ in range(12):
            residual = float(np.linalg.norm(g @ u - lam * u))
            if residual <= target:
                u = u / np.linalg.norm(u)
                return Atom(u, kind="psd_factor")
            shift = lam - 1e-12 * norm
            try:
                v = np.linalg.solve(g - shift * np.eye(self.n), u)
            except np.linalg.LinAlgError:
                break
            vnorm = float(np.linalg.norm(v))
            if vnorm == 0.0 or not np.isfinite(vnorm):
                break
            u = v / vnorm
            lam = float(u @ (g @ u))
        residual = float(np.linalg.norm(g @ u - lam * u))
        if residual <= target:
            u = u / np.linalg.norm(u)
            return Atom(u, kind="psd_factor")
        raise PowerIterationError(
            f"extreme eigenpair did not reach residual {target:.3e} "
            f"(last {residual:.3e})",
            residual,
        )


def spectrahedron_lmo(g) -> Atom:
    """Unit factor of the rank-one minimizer of ``<G, X>`` over trace-one PSD."""
    g = _as_finite(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractViolation("matrix must be square")
    return SpectrahedronLMO(g.shape[0]).minimize(g)
