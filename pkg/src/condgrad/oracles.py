"""Independent reference implementations used to certify the library.

These deliberately avoid the production code paths they check: the
assignment oracle enumerates permutations, the eigen oracle runs Jacobi
rotations instead of power iteration, and the quadrature-error oracle
rebuilds its own high-order rule.  They are shipped for reproducibility
but tuned for test sizes, not performance.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import ContractViolation
from .herding import DiscreteMeasure
from .kernels import Kernel, Measure


def simplex_projection_oracle(x0) -> np.ndarray:
    """Exact Euclidean projection onto the probability simplex.

    Sort-and-threshold method: with u the coordinates sorted in
    decreasing order, find the largest k with
    ``u_k + (1 - sum_{j<=k} u_j) / k > 0`` and clip at the resulting
    threshold.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size == 0:
        raise ContractViolation("expected a non-empty vector")
    u = np.sort(x0)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, x0.size + 1)
    cond = u + (1.0 - css) / ks > 0.0
    k = int(np.nonzero(cond)[0][-1]) + 1
    tau = (css[k - 1] - 1.0) / k
    return np.maximum(x0 - tau, 0.0)


def assignment_bruteforce(cost) -> np.ndarray:
    """Exhaustive minimum-cost assignment for matrices up to 8x8."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ContractViolation("cost matrix must be square")
    n = cost.shape[0]
    if n > 8:
        raise ContractViolation("brute force is limited to n <= 8")
    best_perm = None
    best_cost = math.inf
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        c = float(cost[rows, perm].sum())
        if c < best_cost:
            best_cost = c
            best_perm = perm
    return np.array(best_perm, dtype=np.int64)


def _tensor_rule(order: int, dimension: int):
    x1, w1 = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x1] * dimension), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(nodes.shape[0])
    for k in range(dimension):
        weights *= np.meshgrid(*([w1] * dimension), indexing="ij")[k].ravel()
    return nodes, weights


_ORACLE_RULES: dict = {}


def _oracle_rule(kernel: Kernel, measure: Measure, order: int):
    """Quadrature nodes/weights and the double kernel integral, memoized."""
    key = (kernel.name, measure.cache_key(), order)
    hit = _ORACLE_RULES.get(key)
    if hit is not None:
        return hit
    nodes, weights = _tensor_rule(order, measure.dimension)
    weights = weights * measure.density(nodes)
    n = nodes.shape[0]
    chunk = max(1, (1 << 22) // n)
    c_mu = 0.0
    for i in range(0, n, chunk):
        block = kernel.pairwise(nodes[i : i + chunk], nodes)
        c_mu += float(weights[i : i + chunk] @ (block @ weights))
    _ORACLE_RULES[key] = (nodes, weights, c_mu)
    return _ORACLE_RULES[key]


def mmd_numeric_oracle(kernel: Kernel, measure: Measure, xi: DiscreteMeasure,
                       order: int = 256) -> float:
    """Squared quadrature error of ``xi`` via an order-256 tensor rule."""
    nodes, weights, c_mu = _oracle_rule(kernel, measure, order)
    w = np.asarray(xi.weights, dtype=float)
    pts = np.atleast_2d(np.asarray(xi.nodes, dtype=float))
    gram = kernel.pairwise(pts, pts)
    z = kernel.pairwise(pts, nodes) @ weights
    return float(w @ gram @ w - 2.0 * (w @ z) + c_mu)


def dense_min_eigenpair(g, sweeps: int = 60, tol: float = 1e-13):
    """Minimal eigenpair of a symmetric matrix by cyclic Jacobi rotations.

    Chosen as the reference for the power-iteration oracle precisely
    because it shares no code with it.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractViolation("matrix must be square")
    if np.max(np.abs(g - g.T)) > 1e-10:
        raise ContractViolation("matrix must be symmetric")
    n = g.shape[0]
    a = 0.5 * (g + g.T)
    v = np.eye(n)
    if n == 1:
        return float(a[0, 0]), np.array([1.0])
    scale = np.max(np.abs(a)) or 1.0
    for _ in range(sweeps):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= tol * scale / (n * n):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    idx = int(np.argmin(np.diag(a)))
    vec = v[:, idx]
    vec = vec / np.linalg.norm(vec)
    # Deterministic sign: make the largest-magnitude entry positive.
    lead = int(np.argmax(np.abs(vec)))
    if vec[lead] < 0:
        vec = -vec
    return float(a[idx, idx]), vec
