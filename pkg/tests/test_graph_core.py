# This file is part of topolearn.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import logging
import unittest

import numpy as np
import pytest
import topolearn

logging.basicConfig(
    format="%(asctime)s:%(levelname)s:%(name)s:%(message)s", level=logging.DEBUG
)


class GraphCoreTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(1234)

    def random_w(self, m: int) -> np.ndarray:
        k = topolearn.num_edges(m)
        return self.rng.uniform(0.0, 2.0, k) * (self.rng.random(k) < 0.4)

    def test_num_edges(self) -> None:
        assert topolearn.num_edges(20) == 190
        assert topolearn.num_nodes_from_length(190) == 20
        assert topolearn.num_nodes_from_length(1) == 2
        for length in (0, 2, 4, 189):
            with pytest.raises(topolearn.ValidationError):
                topolearn.num_nodes_from_length(length)

    def test_edge_order(self) -> None:
        W = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], dtype=float)
        np.testing.assert_array_equal(topolearn.halfvec(W), [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(topolearn.unhalfvec([1.0, 2.0, 3.0]), W)

    def test_halfvec_round_trip(self) -> None:
        for m in (2, 5, 20):
            w = self.random_w(m)
            np.testing.assert_array_equal(topolearn.halfvec(topolearn.unhalfvec(w)), w)

    def test_halfvec_rejects_invalid(self) -> None:
        with pytest.raises(topolearn.ValidationError):
            topolearn.halfvec(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(topolearn.ValidationError):
            topolearn.halfvec(np.eye(3))
        with pytest.raises(topolearn.ValidationError):
            topolearn.halfvec(np.zeros((2, 3)))
        with pytest.raises(topolearn.ValidationError):
            topolearn.unhalfvec(np.zeros(4))

    def test_degree_adjoint(self) -> None:
        for _ in range(100):
            m = int(self.rng.integers(2, 30))
            w = self.rng.standard_normal(topolearn.num_edges(m))
            v = self.rng.standard_normal(m)
            lhs = np.dot(topolearn.degree_apply(w), v)
            rhs = np.dot(w, topolearn.degree_adjoint(v))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_degree_matches_row_sums(self) -> None:
        w = self.random_w(12)
        np.testing.assert_allclose(
            topolearn.degree_apply(w), topolearn.unhalfvec(w).sum(axis=1), atol=1e-14
        )

    def test_degree_operator_norm(self) -> None:
        for m in (3, 7, 20):
            k = topolearn.num_edges(m)
            D = np.array([topolearn.degree_apply(e) for e in np.eye(k)]).T
            norm = np.linalg.norm(D, 2)
            assert norm <= topolearn.degree_operator_norm(m) + 1e-12
            assert norm == pytest.approx(np.sqrt(2.0 * (m - 1)), rel=1e-12)

    def test_laplacian(self) -> None:
        for _ in range(100):
            w = self.random_w(int(self.rng.integers(2, 25)))
            L = topolearn.laplacian(w)
            assert np.max(np.abs(L.sum(axis=1))) <= 1e-12
            np.testing.assert_array_equal(L, L.T)

    def test_smoothness_identity(self) -> None:
        # sum_ij W_ij ||x_i - x_j||^2 = 2 w^T y = 2 tr(X^T L X).
        for _ in range(100):
            m = int(self.rng.integers(2, 20))
            w = self.random_w(m)
            X = self.rng.standard_normal((m, int(self.rng.integers(1, 30))))
            y = topolearn.pairwise_sq_dist(X)
            W = topolearn.unhalfvec(w)
            diffs = X[:, None, :] - X[None, :, :]
            double_sum = np.sum(W * np.sum(diffs * diffs, axis=2))
            rhs = 2.0 * np.dot(w, y)
            assert abs(double_sum - rhs) <= 1e-9 * max(1.0, abs(rhs))
            trace = np.trace(X.T @ topolearn.laplacian(w) @ X)
            assert abs(2.0 * trace - rhs) <= 1e-9 * max(1.0, abs(rhs))

    def test_small_examples(self) -> None:
        w = np.array([2.0, 5.0, 7.0])
        np.testing.assert_array_equal(topolearn.degree_apply(w), [7.0, 9.0, 12.0])
        np.testing.assert_array_equal(topolearn.degree_adjoint([1.0, 0.0, 0.0]), [1.0, 1.0, 0.0])
        np.testing.assert_array_equal(
            topolearn.laplacian(w), np.diag([7.0, 9.0, 12.0]) - topolearn.unhalfvec(w)
        )
        A = topolearn.binarize(np.array([1e-5, 0.5, 2e-4]), 1e-4)
        np.testing.assert_array_equal(topolearn.halfvec(A), [0.0, 1.0, 1.0])
        np.testing.assert_array_equal(topolearn.binarize(topolearn.halfvec(A), 0.5), A)

    def test_laplacian_psd(self) -> None:
        for _ in range(20):
            L = topolearn.laplacian(self.random_w(15))
            assert np.linalg.eigvalsh(L).min() >= -1e-10

    def test_pairwise_sq_dist(self) -> None:
        X = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
        np.testing.assert_allclose(topolearn.pairwise_sq_dist(X), [25.0, 1.0, 18.0])
        with pytest.raises(topolearn.ValidationError):
            topolearn.pairwise_sq_dist(np.zeros((1, 5)))
        with pytest.raises(topolearn.ValidationError):
            topolearn.pairwise_sq_dist(np.array([[0.0, np.nan], [1.0, 2.0]]))

    def test_binarize(self) -> None:
        w = np.array([0.0, 1e-4, 2e-4])
        np.testing.assert_array_equal(topolearn.binarize_vector(w), [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(topolearn.binarize_vector(w, eta=0.0), [0.0, 1.0, 1.0])
        A = topolearn.binarize(w)
        np.testing.assert_array_equal(A, A.T)
        assert A[1, 2] == 1.0
        with pytest.raises(topolearn.ValidationError):
            topolearn.binarize_vector(w, eta=-1.0)

    def test_symmetrize(self) -> None:
        W = self.rng.standard_normal((5, 5))
        S = topolearn.symmetrize(W)
        np.testing.assert_array_equal(S, S.T)
        assert np.all(np.diag(S) == 0.0)
