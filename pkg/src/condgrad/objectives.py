"""Differentiable objectives with analytic gradients and exact curvature.

Every objective exposes ``value`` and ``gradient``; quadratics additionally
expose ``quadratic_coefficient(x, d)``, the exact second-order term
``<d, H d>`` so that line searches can be solved in closed form:

    f(x - lam * d) = f(x) - lam * <grad f(x), d> + (lam**2 / 2) * qc(x, d)

Objectives are immutable after construction and safe for concurrent use.
"""

from __future__ import annotations

import csv
from typing import Optional

import numpy as np

from .core import ContractViolation


class Objective:
    """Interface: value, gradient, smoothness/convexity bounds, curvature."""

    smoothness_bound: Optional[float] = None
    strong_convexity_bound: Optional[float] = None

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def quadratic_coefficient(self, x, d) -> Optional[float]:
        """Exact ``<d, H d>`` when the objective is quadratic, else None."""
        return None


def eval(obj: Objective, x) -> float:  # noqa: A001 - mirrors the operation name
    return obj.value(x)


def grad(obj: Objective, x) -> np.ndarray:
    return obj.gradient(x)


class QuadraticDistance(Objective):
    """Squared Euclidean distance ``f(x) = ||x - center||_2**2``.

    Works for vector and matrix ambients alike; L = mu = 2.
    """

    smoothness_bound = 2.0
    strong_convexity_bound = 2.0

    def __init__(self, center):
        center = np.array(center, dtype=float)
        if not np.all(np.isfinite(center)):
            raise ContractViolation("center must be finite")
        center.setflags(write=False)
        self.center = center

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.center.shape:
            raise ContractViolation(
                f"shape mismatch: got {x.shape}, expected {self.center.shape}"
            )
        return x

    def value(self, x) -> float:
        diff = self._check(x) - self.center
        return float(np.sum(diff * diff))

    def gradient(self, x) -> np.ndarray:
        return 2.0 * (self._check(x) - self.center)

    def quadratic_coefficient(self, x, d) -> float:
        d = np.ravel(np.asarray(d, dtype=float))
        return 2.0 * float(np.dot(d, d))


class MatrixCompletionLoss(Objective):
    """Squared loss over observed entries of an n-by-n matrix.

    ``f(X) = sum_{(i,j) in observed} (X[i,j] - T[i,j])**2`` with the
    gradient ``2 (X - T)`` masked to the observed entries.  Iterates are
    stored densely; only gradients are entry-masked.
    """

    smoothness_bound = 2.0
    strong_convexity_bound = None

    def __init__(self, shape, entries):
        """``entries`` is an iterable of ``(i, j, target)`` triples."""
        n, m = shape
        rows, cols, targets = [], [], []
        seen = {}
        for i, j, t in entries:
            seen[(int(i), int(j))] = float(t)
        for (i, j), t in sorted(seen.items()):
            if not (0 <= i < n and 0 <= j < m):
                raise ContractViolation(f"entry ({i}, {j}) outside shape {shape}")
            rows.append(i)
            cols.append(j)
            targets.append(t)
        if not rows:
            raise ContractViolation("at least one observed entry is required")
        self.shape = (int(n), int(m))
        self.rows = np.array(rows, dtype=int)
        self.cols = np.array(cols, dtype=int)
        self.targets = np.array(targets, dtype=float)
        for arr in (self.rows, self.cols, self.targets):
            arr.setflags(write=False)

    @property
    def observed(self):
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ContractViolation(
                f"shape mismatch: got {x.shape}, expected {self.shape}"
            )
        return x

    def _residuals(self, x) -> np.ndarray:
        return x[self.rows, self.cols] - self.targets

    def value(self, x) -> float:
        r = self._residuals(self._check(x))
        return float(np.dot(r, r))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        g = np.zeros(self.shape)
        # Observed index pairs are unique, so no accumulation is needed.
        g[self.rows, self.cols] = 2.0 * self._residuals(x)
        return g

    def quadratic_coefficient(self, x, d) -> float:
        d = np.asarray(d, dtype=float)
        dd = d[self.rows, self.cols]
        return 2.0 * float(np.dot(dd, dd))


class RatingsData:
    """Observed (user, item, rating) triples with dense contiguous ids."""

    def __init__(self, n_users, n_items, triples):
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.triples = [(int(u), int(i), float(r)) for u, i, r in triples]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["userId", "movieId", "rating", "timestamp"])
            for u, i, r in self.triples:
                writer.writerow([u, i, repr(r), 0])

    def completion_loss(self) -> MatrixCompletionLoss:
        """Loss over the symmetric block embedding of the ratings matrix.

        A rating (u, i) lands at positions (u, n_users + i) and its mirror
        so that gradients stay symmetric, as the trace-one PSD feasible
        region requires.
        """
        n = self.n_users + self.n_items
        entries = []
        for u, i, r in self.triples:
            entries.append((u, self.n_users + i, r))
            entries.append((self.n_users + i, u, r))
        return MatrixCompletionLoss((n, n), entries)


class RatingsParseError(ValueError):
    """Malformed ratings CSV; carries the offending line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = int(line)


def load_ratings_csv(path, max_users: int = 300, max_items: int = 300) -> RatingsData:
    """Parse a ratings CSV with header ``userId,movieId,rating,timestamp``.

    Ids are remapped to dense indices, duplicate (user, item) pairs keep
    the last rating, and the table is truncated to the ``max_users`` /
    ``max_items`` most frequent users and items.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RatingsParseError("empty file", 1) from None
        if [h.strip() for h in header[:4]] != ["userId", "movieId", "rating", "timestamp"]:
            raise RatingsParseError(
                "expected header userId,movieId,rating,timestamp", 1
            )
        ratings = {}
        user_counts: dict = {}
        item_counts: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 3:
                raise RatingsParseError("expected at least 3 fields", lineno)
            try:
                user = int(row[0])
                item = int(row[1])
                rating = float(row[2])
            except ValueError as exc:
                raise RatingsParseError(str(exc), lineno) from None
            if (user, item) not in ratings:
                user_counts[user] = user_counts.get(user, 0) + 1
                item_counts[item] = item_counts.get(item, 0) + 1
            ratings[(user, item)] = rating
    if not ratings:
        raise RatingsParseError("no data rows", 2)

    def top(counts, limit):
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return {key for key, _ in ordered[:limit]}

    keep_users = top(user_counts, max_users)
    keep_items = top(item_counts, max_items)
    user_ids = {u: k for k, u in enumerate(sorted(keep_users))}
    item_ids = {i: k for k, i in enumerate(sorted(keep_items))}
    triples = [
        (user_ids[u], item_ids[i], r)
        for (u, i), r in sorted(ratings.items())
        if u in keep_users and i in keep_items
    ]
    if not triples:
        raise RatingsParseError("truncation removed every rating", 2)
    return RatingsData(len(user_ids), len(item_ids), triples)
