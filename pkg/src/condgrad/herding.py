"""Kernel quadrature by conditional gradients over discrete measures.

The objective is the squared maximum mean discrepancy between a discrete
measure and a target measure; its gradient pairs with a Dirac at x as

    <grad F(xi), delta_x> = 2 * (sum_i w_i K(x_i, x) - z(x)),

where ``z`` is the mean embedding of the target.  The continuous linear
minimization is approximated by scanning a fixed Halton candidate pool
(plus the current nodes) and refining the incumbent coordinate-wise with
golden-section search, which keeps runs deterministic.

Squared-MMD values are tracked incrementally through the exact quadratic
expansion of the objective and re-anchored from scratch every
``MMD_REANCHOR_PERIOD`` iterations; the largest observed drift is kept on
the trace.

Embedding caches are immutable after construction and shared read-only;
each run owns its node/weight state.
"""

from __future__ import annotations

import csv
import math
import time
from typing import Optional

import numpy as np

from .core import (
    ConfigurationError,
    ContractViolation,
    RunTrace,
    StepKind,
    StepRecord,
)
from .kernels import Kernel, Measure, halton_points
from .linesearch import golden_section_minimize
from .solvers import SolverConfig, StepChoice, select_step

QUADRATURE_ORDER = 64
POOL_SIZE = 4096
NODE_DEDUP_TOL = 1e-10
WEIGHT_FLOOR = 1e-14
MMD_REANCHOR_PERIOD = 50
REFINE_SWEEPS = 5

HERDING_SMOOTHNESS = 2.0
HERDING_DIAMETER = math.sqrt(2.0)


class GramSingularError(RuntimeError):
    """The node Gram system stayed singular despite the ridge."""


def tensor_gauss_legendre(order: int, dimension: int):
    """Tensor-product Gauss-Legendre rule on the box [-1, 1]^d."""
    x1, w1 = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x1] * dimension), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(nodes.shape[0])
    for k in range(dimension):
        weights *= np.meshgrid(*([w1] * dimension), indexing="ij")[k].ravel()
    return nodes, weights


class EmbeddingCache:
    """Quadrature-backed mean embedding of a target measure.

    ``z(x) = integral of K(x, .) against the measure`` evaluated with a
    tensor Gauss-Legendre rule (density folded into the weights); the
    double integral of the kernel is computed lazily and chunked.
    """

    def __init__(self, kernel: Kernel, measure: Measure,
                 order: int = QUADRATURE_ORDER):
        if measure.dimension > 3:
            raise ConfigurationError(
                "mean embeddings support dimension <= 3 only"
            )
        self.kernel = kernel
        self.measure = measure
        self.order = int(order)
        nodes, gl_weights = tensor_gauss_legendre(order, measure.dimension)
        self.nodes = nodes
        self.weights = gl_weights * measure.density(nodes)
        self._c_mu: Optional[float] = None

    def z(self, xs) -> np.ndarray:
        """Mean-embedding values at row-stacked points."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return self.kernel.pairwise(xs, self.nodes) @ self.weights

    def z_point(self, x) -> float:
        return float(self.z(np.asarray(x, dtype=float)[None, :])[0])

    @property
    def c_mu(self) -> float:
        """Double integral of the kernel against the measure."""
        if self._c_mu is None:
            n = self.nodes.shape[0]
            chunk = max(1, (1 << 22) // n)
            total = 0.0
            for i in range(0, n, chunk):
                block = self.kernel.pairwise(self.nodes[i : i + chunk], self.nodes)
                total += float(self.weights[i : i + chunk] @ (block @ self.weights))
            self._c_mu = total
        return self._c_mu


_EMBEDDING_CACHES: dict = {}


def get_embedding_cache(kernel: Kernel, measure: Measure,
                        order: int = QUADRATURE_ORDER) -> EmbeddingCache:
    key = (kernel.name, measure.cache_key(), order)
    cache = _EMBEDDING_CACHES.get(key)
    if cache is None:
        cache = EmbeddingCache(kernel, measure, order)
        _EMBEDDING_CACHES[key] = cache
    return cache


def mean_embedding(kernel: Kernel, measure: Measure, x,
                   cache: Optional[EmbeddingCache] = None) -> float:
    """``z(x)``, the embedding of the target measure evaluated at x."""
    cache = cache or get_embedding_cache(kernel, measure)
    return cache.z_point(x)


def embedding_constant(kernel: Kernel, measure: Measure,
                       cache: Optional[EmbeddingCache] = None) -> float:
    """The constant term ``c_mu``, a double kernel integral."""
    cache = cache or get_embedding_cache(kernel, measure)
    return cache.c_mu


class DiscreteMeasure:
    """Finitely supported measure: nodes in the box with their weights.

    Probability measures (the default) require weights in (0, 1] summing
    to one; ``constrained=False`` admits the unconstrained reweighting
    used by the Bayesian-quadrature baseline.
    """

    def __init__(self, nodes, weights, constrained: bool = True):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        weights = np.asarray(weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0]:
            raise ContractViolation("one weight per node is required")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise ContractViolation("nodes and weights must be finite")
        if constrained:
            if np.any(weights <= 0.0):
                raise ContractViolation("weights must be strictly positive")
            if abs(float(weights.sum()) - 1.0) > 1e-12:
                raise ContractViolation("weights must sum to one")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        self.nodes = nodes
        self.weights = weights
        self.constrained = bool(constrained)

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    def to_csv(self, path) -> None:
        """One row per node: x_1..x_d followed by the weight."""
        d = self.dimension
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x_{k + 1}" for k in range(d)] + ["weight"])
            for node, w in zip(self.nodes, self.weights):
                writer.writerow([repr(float(v)) for v in node] + [repr(float(w))])


def mmd_squared(kernel: Kernel, measure: Measure, xi: DiscreteMeasure,
                cache: Optional[EmbeddingCache] = None) -> float:
    """Squared maximum mean discrepancy between ``xi`` and the target.

    Assembled as ``w' K w - 2 w' z + c_mu`` and floored at zero to absorb
    cancellation at the 1e-12 level.
    """
    cache = cache or get_embedding_cache(kernel, measure)
    w = xi.weights
    gram = kernel.gram(xi.nodes)
    val = float(w @ gram @ w - 2.0 * (w @ cache.z(xi.nodes)) + cache.c_mu)
    return max(val, 0.0)


class CandidatePool:
    """Fixed low-discrepancy candidate set with precomputed embeddings."""

    def __init__(self, cache: EmbeddingCache, size: int = POOL_SIZE):
        self.points = halton_points(size, cache.measure.dimension)
        self.z = cache.z(self.points)
        # Per-axis resolution of the pool, used to bracket refinements.
        per_axis = max(2, round(size ** (1.0 / cache.measure.dimension)))
        self.bracket = 2.0 * (2.0 / per_axis)


class _HerdingState:
    """Nodes, weights, Gram matrix and embeddings of the running measure."""

    def __init__(self, x0, kernel: Kernel, cache: EmbeddingCache):
        x0 = np.asarray(x0, dtype=float).ravel()
        if x0.shape[0] != cache.measure.dimension:
            raise ContractViolation("start point has the wrong dimension")
        if np.any(np.abs(x0) > 1.0 + 1e-12):
            raise ContractViolation("start point must lie in the box")
        self.kernel = kernel
        self.cache = cache
        self.nodes = x0[None, :].copy()
        self.weights = np.array([1.0])
        self.kmat = np.array([[1.0]])
        self.zvec = cache.z(self.nodes)
        self.mmd2 = float(1.0 - 2.0 * self.zvec[0] + cache.c_mu)
        self.max_drift = 0.0
        self._steps_since_anchor = 0

    def __len__(self):
        return self.nodes.shape[0]

    def scores(self) -> np.ndarray:
        """Half gradient pairings ``K w - z`` at the current nodes."""
        return self.kmat @ self.weights - self.zvec

    def xi_energy(self) -> float:
        return float(self.weights @ self.kmat @ self.weights)

    def grad_xi_inner(self) -> float:
        """``<grad F(xi), xi>`` for the current measure."""
        return 2.0 * float(
            self.weights @ self.kmat @ self.weights - self.weights @ self.zvec
        )

    def g_values(self, xs) -> np.ndarray:
        """``K(nodes, x) . w - z(x)`` for row-stacked query points."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return (
            self.kernel.pairwise(xs, self.nodes) @ self.weights
            - self.cache.z(xs)
        )

    def find(self, x) -> Optional[int]:
        diff = np.max(np.abs(self.nodes - x[None, :]), axis=1)
        i = int(np.argmin(diff))
        return i if diff[i] <= NODE_DEDUP_TOL else None

    def exact_mmd2(self) -> float:
        return float(
            self.weights @ self.kmat @ self.weights
            - 2.0 * (self.weights @ self.zvec)
            + self.cache.c_mu
        )

    def account(self, dir_gap: float, energy: float, lam: float) -> None:
        """Advance the incremental squared MMD through one exact step."""
        self.mmd2 = self.mmd2 - lam * dir_gap + lam * lam * energy
        self._steps_since_anchor += 1
        if self._steps_since_anchor >= MMD_REANCHOR_PERIOD:
            exact = self.exact_mmd2()
            self.max_drift = max(self.max_drift, abs(exact - self.mmd2))
            self.mmd2 = exact
            self._steps_since_anchor = 0

    def _remove(self, idx: int) -> None:
        keep = np.arange(len(self)) != idx
        self.nodes = self.nodes[keep]
        self.weights = self.weights[keep]
        self.zvec = self.zvec[keep]
        self.kmat = self.kmat[np.ix_(keep, keep)]

    def _cleanup(self) -> None:
        if np.all(self.weights >= WEIGHT_FLOOR):
            return
        keep = self.weights >= WEIGHT_FLOOR
        if not np.any(keep):
            raise ContractViolation("cleanup removed every node")
        self.nodes = self.nodes[keep]
        self.weights = self.weights[keep]
        self.zvec = self.zvec[keep]
        self.kmat = self.kmat[np.ix_(keep, keep)]
        self.weights = self.weights / self.weights.sum()

    def pairwise_step(self, away_i: int, local_i: int, lam: float) -> StepKind:
        lam_max = float(self.weights[away_i])
        if lam < 0.0 or lam > lam_max + 1e-12:
            raise ContractViolation("pairwise step size outside its cap")
        if away_i == local_i:
            return StepKind.DESCENT
        drop = lam >= lam_max - 1e-14
        if lam <= 0.0:
            return StepKind.DESCENT
        moved = lam_max if drop else lam
        self.weights[local_i] += moved
        if drop:
            self._remove(away_i)
            return StepKind.DROP
        self.weights[away_i] = lam_max - lam
        return StepKind.DESCENT

    def fw_step(self, x, z_x: float, kvec: np.ndarray, lam: float) -> None:
        if lam < 0.0 or lam > 1.0:
            raise ContractViolation("FW step size outside [0, 1]")
        x = np.asarray(x, dtype=float).ravel()
        if lam == 1.0:
            self.nodes = x[None, :].copy()
            self.weights = np.array([1.0])
            self.zvec = np.array([z_x])
            self.kmat = np.array([[1.0]])
            return
        if lam == 0.0:
            return
        self.weights = (1.0 - lam) * self.weights
        existing = self.find(x)
        if existing is not None:
            self.weights[existing] += lam
        else:
            self.nodes = np.vstack([self.nodes, x[None, :]])
            self.weights = np.append(self.weights, lam)
            self.zvec = np.append(self.zvec, z_x)
            k = len(self.weights)
            newmat = np.empty((k, k))
            newmat[: k - 1, : k - 1] = self.kmat
            newmat[k - 1, : k - 1] = kvec
            newmat[: k - 1, k - 1] = kvec
            newmat[k - 1, k - 1] = 1.0
            self.kmat = newmat
        self._cleanup()

    def as_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.nodes.copy(), self.weights.copy())


def _refine_candidate(state: _HerdingState, x0: np.ndarray, g0: float,
                      bracket: float):
    """Coordinate-wise golden-section refinement of an incumbent point.

    Moving one coordinate changes every squared distance by the same
    per-coordinate term, so the distance contributions of the remaining
    coordinates are precomputed once per coordinate scan.
    """
    best_x = np.array(x0, dtype=float)
    best_g = g0
    d = best_x.shape[0]
    kernel = state.kernel
    q_nodes = state.cache.nodes
    q_weights = state.cache.weights
    for _ in range(REFINE_SWEEPS):
        for k in range(d):
            diff_q = best_x[None, :] - q_nodes
            base_q = np.sum(diff_q * diff_q, axis=1) - diff_q[:, k] ** 2
            diff_n = best_x[None, :] - state.nodes
            base_n = np.sum(diff_n * diff_n, axis=1) - diff_n[:, k] ** 2
            qk = q_nodes[:, k]
            nk = state.nodes[:, k]

            def g_coord(t):
                sq_q = base_q + (t - qk) ** 2
                sq_n = base_n + (t - nk) ** 2
                np.maximum(sq_q, 0.0, out=sq_q)
                np.maximum(sq_n, 0.0, out=sq_n)
                return float(
                    kernel._from_sqdist(sq_n) @ state.weights
                    - kernel._from_sqdist(sq_q) @ q_weights
                )

            lo = max(-1.0, best_x[k] - bracket)
            hi = min(1.0, best_x[k] + bracket)
            t_star = golden_section_minimize(g_coord, lo, hi, tol=1e-8)
            g_star = g_coord(t_star)
            if g_star < best_g:
                best_g = g_star
                best_x[k] = t_star
    return best_x, best_g


def _continuous_lmo(state: _HerdingState, pool: CandidatePool):
    """Approximate argmin over the box of the gradient-Dirac pairing.

    Scans the fixed pool plus the current nodes, then refines the best
    candidate; the returned value never exceeds the best scanned one.
    Returns ``(point, g_value, z_value)``.
    """
    g_pool = (
        state.kernel.pairwise(pool.points, state.nodes) @ state.weights - pool.z
    )
    pool_i = int(np.argmin(g_pool))
    best_x = pool.points[pool_i]
    best_g = float(g_pool[pool_i])
    node_scores = state.scores()
    node_i = int(np.argmin(node_scores))
    if node_scores[node_i] < best_g:
        best_x = state.nodes[node_i]
        best_g = float(node_scores[node_i])
    best_x, best_g = _refine_candidate(state, best_x, best_g, pool.bracket)
    z_x = state.cache.z_point(best_x)
    return best_x, best_g, z_x


def herding_lmo(kernel: Kernel, measure: Measure, xi: DiscreteMeasure,
                mode: str = "exhaustive_candidates",
                cache: Optional[EmbeddingCache] = None,
                pool: Optional[CandidatePool] = None) -> np.ndarray:
    """Continuous linear minimization for a given discrete measure."""
    if mode != "exhaustive_candidates":
        raise ConfigurationError(f"unknown herding LMO mode {mode!r}")
    cache = cache or get_embedding_cache(kernel, measure)
    pool = pool or CandidatePool(cache)
    state = _HerdingState(xi.nodes[0], kernel, cache)
    state.nodes = np.array(xi.nodes, dtype=float)
    state.weights = np.array(xi.weights, dtype=float)
    state.zvec = cache.z(state.nodes)
    state.kmat = kernel.gram(state.nodes)
    point, _, _ = _continuous_lmo(state, pool)
    return point


def _herding_setup(kernel, measure, x0, cache, pool):
    cache = cache or get_embedding_cache(kernel, measure)
    pool = pool or CandidatePool(cache)
    state = _HerdingState(x0, kernel, cache)
    return cache, pool, state


def _herding_trace(state: _HerdingState, solver: str) -> RunTrace:
    trace = RunTrace(primal_start=state.mmd2)
    trace.meta.update(
        solver=solver,
        step_size="linesearch",
        smoothness=HERDING_SMOOTHNESS,
        diameter=HERDING_DIAMETER,
        k_sc=1.0,
    )
    return trace


def run_bpcg_herding(kernel: Kernel, measure: Measure, x0,
                     config: SolverConfig,
                     cache: Optional[EmbeddingCache] = None,
                     pool: Optional[CandidatePool] = None):
    """Blended pairwise conditional gradients on the measure polytope.

    Gradient pairings are evaluated through the node Gram matrix and the
    mean embedding; line search is exact via the quadratic expansion of
    the squared MMD.  Returns the final measure and the run trace with
    squared MMD in the primal column.
    """
    cache, pool, state = _herding_setup(kernel, measure, x0, cache, pool)
    trace = _herding_trace(state, "bpcg-herding")
    started = time.perf_counter_ns()
    for _ in range(config.max_iterations):
        scores = state.scores()
        away_i = int(np.argmax(scores))
        local_i = int(np.argmin(scores))
        pairwise_gap = 2.0 * float(scores[away_i] - scores[local_i])
        w_point, g_w, z_w = _continuous_lmo(state, pool)
        trace.lmo_calls += 1
        fw_gap = state.grad_xi_inner() - 2.0 * g_w
        away_global_gap = 2.0 * (float(scores[away_i]) - g_w)
        if fw_gap <= config.dual_gap_tolerance:
            break
        if select_step(pairwise_gap, fw_gap, config.k_sc) is StepChoice.PAIRWISE:
            energy = 2.0 - 2.0 * float(state.kmat[away_i, local_i])
            lam_max = float(state.weights[away_i])
            lam = 0.0 if energy <= 0.0 else min(
                max(pairwise_gap / (2.0 * energy), 0.0), lam_max
            )
            kind = state.pairwise_step(away_i, local_i, lam)
            state.account(pairwise_gap, energy, lam)
            trace.add(
                StepRecord(
                    kind=kind, lam=lam, lam_max=lam_max,
                    primal=state.mmd2, support_size=len(state),
                    lmo_called=True, pairwise_gap=pairwise_gap, fw_gap=fw_gap,
                    dir_gap=pairwise_gap, dir_norm_sq=energy,
                    away_global_gap=away_global_gap,
                ),
                time.perf_counter_ns() - started,
            )
        else:
            kvec = state.kernel.pairwise(
                w_point[None, :], state.nodes
            ).ravel()
            energy = state.xi_energy() - 2.0 * float(kvec @ state.weights) + 1.0
            lam = 1.0 if energy <= 0.0 else min(
                max(fw_gap / (2.0 * energy), 0.0), 1.0
            )
            state.fw_step(w_point, z_w, kvec, lam)
            state.account(fw_gap, energy, lam)
            trace.add(
                StepRecord(
                    kind=StepKind.FW, lam=lam, lam_max=1.0,
                    primal=state.mmd2, support_size=len(state),
                    lmo_called=True, pairwise_gap=pairwise_gap, fw_gap=fw_gap,
                    dir_gap=fw_gap, dir_norm_sq=energy,
                    away_global_gap=away_global_gap,
                ),
                time.perf_counter_ns() - started,
            )
    trace.max_incremental_drift = state.max_drift
    return state.as_measure(), trace


def run_lazy_bpcg_herding(kernel: Kernel, measure: Measure, x0,
                          config: SolverConfig,
                          cache: Optional[EmbeddingCache] = None,
                          pool: Optional[CandidatePool] = None):
    """Lazified blended pairwise conditional gradients for herding.

    The continuous LMO is consulted only when the local pairwise gap
    falls below the gap estimate ``phi``; gap steps halve ``phi`` and
    leave the measure unchanged.
    """
    cache, pool, state = _herding_setup(kernel, measure, x0, cache, pool)
    trace = _herding_trace(state, "lazy-bpcg-herding")
    accuracy = config.lazy_accuracy
    started = time.perf_counter_ns()
    _, g_w, _ = _continuous_lmo(state, pool)
    trace.lmo_calls += 1
    phi = 0.5 * (state.grad_xi_inner() - 2.0 * g_w)
    trace.phi_start = phi
    for _ in range(config.max_iterations):
        if 2.0 * phi <= config.dual_gap_tolerance:
            break
        scores = state.scores()
        away_i = int(np.argmax(scores))
        local_i = int(np.argmin(scores))
        pairwise_gap = 2.0 * float(scores[away_i] - scores[local_i])
        if pairwise_gap >= phi:
            energy = 2.0 - 2.0 * float(state.kmat[away_i, local_i])
            lam_max = float(state.weights[away_i])
            lam = 0.0 if energy <= 0.0 else min(
                max(pairwise_gap / (2.0 * energy), 0.0), lam_max
            )
            kind = state.pairwise_step(away_i, local_i, lam)
            state.account(pairwise_gap, energy, lam)
            trace.add(
                StepRecord(
                    kind=kind, lam=lam, lam_max=lam_max,
                    primal=state.mmd2, support_size=len(state),
                    lmo_called=False, pairwise_gap=pairwise_gap, phi=phi,
                    dir_gap=pairwise_gap, dir_norm_sq=energy,
                ),
                time.perf_counter_ns() - started,
            )
            continue
        w_point, g_w, z_w = _continuous_lmo(state, pool)
        trace.lmo_calls += 1
        fw_gap = state.grad_xi_inner() - 2.0 * g_w
        away_global_gap = 2.0 * (float(scores[away_i]) - g_w)
        if fw_gap >= phi / accuracy:
            kvec = state.kernel.pairwise(w_point[None, :], state.nodes).ravel()
            energy = state.xi_energy() - 2.0 * float(kvec @ state.weights) + 1.0
            lam = 1.0 if energy <= 0.0 else min(
                max(fw_gap / (2.0 * energy), 0.0), 1.0
            )
            state.fw_step(w_point, z_w, kvec, lam)
            state.account(fw_gap, energy, lam)
            trace.add(
                StepRecord(
                    kind=StepKind.FW, lam=lam, lam_max=1.0,
                    primal=state.mmd2, support_size=len(state),
                    lmo_called=True, pairwise_gap=pairwise_gap, fw_gap=fw_gap,
                    phi=phi, dir_gap=fw_gap, dir_norm_sq=energy,
                    away_global_gap=away_global_gap,
                ),
                time.perf_counter_ns() - started,
            )
        else:
            phi = phi / 2.0
            trace.add(
                StepRecord(
                    kind=StepKind.GAP, lam=0.0, lam_max=1.0,
                    primal=state.mmd2, support_size=len(state),
                    lmo_called=True, pairwise_gap=pairwise_gap, fw_gap=fw_gap,
                    phi=phi, away_global_gap=away_global_gap,
                ),
                time.perf_counter_ns() - started,
            )
    trace.max_incremental_drift = state.max_drift
    return state.as_measure(), trace


def run_vanilla_herding(kernel: Kernel, measure: Measure, x0,
                        rule: str = "linesearch",
                        max_iterations: int = 100,
                        dual_gap_tolerance: float = 0.0,
                        cache: Optional[EmbeddingCache] = None,
                        pool: Optional[CandidatePool] = None):
    """Classical kernel herding: vanilla Frank-Wolfe on measures.

    ``rule`` is ``"linesearch"`` (exact) or ``"equal_weight"`` (step
    ``1/(t+1)`` in one-based iterations, leaving uniform weights over the
    visited nodes).
    """
    if rule not in ("linesearch", "equal_weight"):
        raise ConfigurationError(f"unknown herding step rule {rule!r}")
    cache, pool, state = _herding_setup(kernel, measure, x0, cache, pool)
    trace = _herding_trace(state, f"herding-{rule}")
    if rule == "equal_weight":
        trace.meta["step_size"] = "equal_weight"
    started = time.perf_counter_ns()
    for t in range(max_iterations):
        w_point, g_w, z_w = _continuous_lmo(state, pool)
        trace.lmo_calls += 1
        fw_gap = state.grad_xi_inner() - 2.0 * g_w
        if fw_gap <= dual_gap_tolerance:
            break
        kvec = state.kernel.pairwise(w_point[None, :], state.nodes).ravel()
        energy = state.xi_energy() - 2.0 * float(kvec @ state.weights) + 1.0
        if rule == "equal_weight":
            lam = 1.0 / (t + 2.0)
        else:
            lam = 1.0 if energy <= 0.0 else min(
                max(fw_gap / (2.0 * energy), 0.0), 1.0
            )
        state.fw_step(w_point, z_w, kvec, lam)
        state.account(fw_gap, energy, lam)
        trace.add(
            StepRecord(
                kind=StepKind.FW, lam=lam, lam_max=1.0,
                primal=state.mmd2, support_size=len(state),
                lmo_called=True, fw_gap=fw_gap,
                dir_gap=fw_gap, dir_norm_sq=energy,
            ),
            time.perf_counter_ns() - started,
        )
    trace.max_incremental_drift = state.max_drift
    return state.as_measure(), trace


class SbqResult:
    """Greedy Bayesian-quadrature rule: nodes, weights, and MMD history."""

    def __init__(self, measure: DiscreteMeasure, mmd2: float, history):
        self.measure = measure
        self.mmd_squared = float(mmd2)
        self.history = list(history)


def run_sbq(kernel: Kernel, measure: Measure, candidate_pool, n_nodes: int,
            ridge: float = 1e-10,
            cache: Optional[EmbeddingCache] = None) -> SbqResult:
    """Sequential Bayesian quadrature over a candidate pool.

    Greedily adds the candidate that minimizes the squared MMD after
    reweighting, where weights solve the ridge-stabilized Gram system
    ``(G + ridge I) w = z`` over the selected nodes.  Weights are not
    simplex-constrained.
    """
    points = np.atleast_2d(np.asarray(candidate_pool, dtype=float))
    if n_nodes < 1 or n_nodes > points.shape[0]:
        raise ContractViolation("n_nodes must be in [1, len(pool)]")
    cache = cache or get_embedding_cache(kernel, measure)
    z_pool = cache.z(points)
    selected: list[int] = []
    history = []
    gram = np.zeros((0, 0))
    weights = np.zeros(0)
    for _ in range(n_nodes):
        if not selected:
            gain = z_pool**2
        else:
            cross = kernel.pairwise(points[selected], points)
            try:
                ridge_gram = gram + ridge * np.eye(len(selected))
                u = np.linalg.solve(ridge_gram, cross)
                z_sel = z_pool[selected]
                alpha = np.linalg.solve(ridge_gram, z_sel)
            except np.linalg.LinAlgError as exc:
                raise GramSingularError(str(exc)) from exc
            denom = 1.0 + ridge - np.sum(cross * u, axis=0)
            resid = z_pool - alpha @ cross
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(denom > 1e-12, resid**2 / denom, -np.inf)
        gain[selected] = -np.inf
        pick = int(np.argmax(gain))
        if not np.isfinite(gain[pick]):
            break  # pool exhausted up to duplicates
        selected.append(pick)
        gram = kernel.gram(points[selected])
        try:
            weights = np.linalg.solve(
                gram + ridge * np.eye(len(selected)), z_pool[selected]
            )
        except np.linalg.LinAlgError as exc:
            raise GramSingularError(str(exc)) from exc
        if not np.all(np.isfinite(weights)):
            raise GramSingularError("non-finite weights from the Gram solve")
        mmd2 = float(
            weights @ gram @ weights
            - 2.0 * (weights @ z_pool[selected])
            + cache.c_mu
        )
        history.append((len(selected), max(mmd2, 0.0)))
    nodes = points[selected]
    result = DiscreteMeasure(nodes, weights, constrained=False)
    return SbqResult(result, history[-1][1], history)


def run_monte_carlo(measure: Measure, n: int, seed: int) -> DiscreteMeasure:
    """``n`` independent draws from the target with uniform weights."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    rng = np.random.default_rng(seed)
    nodes = measure.sample(rng, n)
    return DiscreteMeasure(nodes, np.full(n, 1.0 / n))
