"""Objective values, analytic gradients, exact curvature, ratings parsing."""

import numpy as np
import pytest

from condgrad import (
    ContractViolation,
    MatrixCompletionLoss,
    QuadraticDistance,
    RatingsParseError,
    load_ratings_csv,
)
from condgrad.objectives import eval as obj_eval
from condgrad.objectives import grad as obj_grad


def central_difference_gradient(obj, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (obj.value(xp) - obj.value(xm)) / (2 * h)
        it.iternext()
    return g


class TestQuadraticDistance:
    def test_value_at_center_is_zero(self):
        obj = QuadraticDistance(np.array([0.5, 0.5]))
        assert obj_eval(obj, np.array([0.5, 0.5])) == 0.0
        np.testing.assert_array_equal(obj_grad(obj, np.array([0.5, 0.5])), [0.0, 0.0])

    def test_unit_offset(self):
        obj = QuadraticDistance(np.zeros(2))
        assert obj.value(np.array([1.0, 0.0])) == 1.0
        np.testing.assert_array_equal(obj.gradient(np.array([1.0, 0.0])), [2.0, 0.0])

    def test_bounds(self):
        obj = QuadraticDistance(np.zeros(3))
        assert obj.smoothness_bound == 2.0
        assert obj.strong_convexity_bound == 2.0

    def test_quadratic_coefficient_exact(self, rng):
        obj = QuadraticDistance(rng.normal(size=5))
        for _ in range(20):
            d = rng.normal(size=5)
            assert obj.quadratic_coefficient(None, d) == 2.0 * float(np.dot(d, d))

    def test_expansion_identity(self, rng):
        obj = QuadraticDistance(rng.normal(size=4))
        for _ in range(50):
            x = rng.normal(size=4)
            d = rng.normal(size=4)
            lam = float(rng.random())
            lhs = obj.value(x - lam * d)
            rhs = (
                obj.value(x)
                - lam * float(obj.gradient(x) @ d)
                + 0.5 * lam**2 * obj.quadratic_coefficient(x, d)
            )
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        obj = QuadraticDistance(rng.normal(size=6))
        for _ in range(100):
            x = rng.normal(size=6)
            fd = central_difference_gradient(obj, x)
            an = obj.gradient(x)
            assert np.max(np.abs(fd - an)) <= 1e-5 * max(1.0, np.max(np.abs(an)))

    def test_shape_mismatch(self):
        obj = QuadraticDistance(np.zeros(3))
        with pytest.raises(ContractViolation):
            obj.value(np.zeros(4))


class TestMatrixCompletionLoss:
    def test_identity_fit(self):
        loss = MatrixCompletionLoss((2, 2), [(0, 0, 1.0)])
        assert loss.value(np.eye(2)) == 0.0

    def test_masked_gradient(self):
        loss = MatrixCompletionLoss((2, 2), [(0, 1, 0.5)])
        x = np.zeros((2, 2))
        g = loss.gradient(x)
        np.testing.assert_array_equal(g, [[0.0, -1.0], [0.0, 0.0]])

    def test_duplicate_entries_keep_last(self):
        loss = MatrixCompletionLoss((2, 2), [(0, 0, 1.0), (0, 0, 3.0)])
        assert loss.value(np.zeros((2, 2))) == 9.0

    def test_quadratic_coefficient_masked(self, rng):
        entries = [(0, 0, 0.1), (1, 2, -0.2), (2, 1, 0.3)]
        loss = MatrixCompletionLoss((3, 3), entries)
        d = rng.normal(size=(3, 3))
        masked = sum(d[i, j] ** 2 for i, j, _ in entries)
        assert loss.quadratic_coefficient(None, d) == pytest.approx(2.0 * masked)

    def test_gradient_matches_finite_differences(self, rng):
        entries = [(int(i), int(j), float(rng.normal()))
                   for i, j in zip(rng.integers(0, 5, 12), rng.integers(0, 5, 12))]
        loss = MatrixCompletionLoss((5, 5), entries)
        for _ in range(100):
            x = rng.normal(size=(5, 5))
            fd = central_difference_gradient(loss, x)
            an = loss.gradient(x)
            assert np.max(np.abs(fd - an)) <= 1e-5 * max(1.0, np.max(np.abs(an)))

    def test_requires_entries(self):
        with pytest.raises(ContractViolation):
            MatrixCompletionLoss((2, 2), [])


RATINGS = """userId,movieId,rating,timestamp
1,10,3.5,100
1,20,4.0,101
2,10,2.0,102
"""


class TestRatingsCsv:
    def test_three_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(RATINGS)
        data = load_ratings_csv(path)
        assert len(data.triples) == 3
        assert data.n_users == 2
        assert data.n_items == 2

    def test_duplicates_keep_last(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(RATINGS + "1,10,5.0,103\n")
        data = load_ratings_csv(path)
        assert len(data.triples) == 3
        by_pair = {(u, i): r for u, i, r in data.triples}
        assert by_pair[(0, 0)] == 5.0

    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(RATINGS)
        data = load_ratings_csv(path)
        out = tmp_path / "export.csv"
        data.to_csv(out)
        again = load_ratings_csv(out)
        assert sorted(again.triples) == sorted(data.triples)

    def test_truncation_keeps_most_frequent(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(RATINGS)
        data = load_ratings_csv(path, max_users=1, max_items=1)
        # user 1 and item 10 are the most frequent
        assert data.n_users == 1 and data.n_items == 1
        assert data.triples == [(0, 0, 3.5)]

    def test_bad_header(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("user,item\n1,2\n")
        with pytest.raises(RatingsParseError) as err:
            load_ratings_csv(path)
        assert err.value.line == 1

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("userId,movieId,rating,timestamp\n1,10,3.5,1\n2,x,1.0,2\n")
        with pytest.raises(RatingsParseError) as err:
            load_ratings_csv(path)
        assert err.value.line == 3

    def test_block_embedding_is_symmetric(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(RATINGS)
        data = load_ratings_csv(path)
        loss = data.completion_loss()
        n = data.n_users + data.n_items
        assert loss.shape == (n, n)
        g = loss.gradient(np.zeros((n, n)))
        np.testing.assert_allclose(g, g.T)
