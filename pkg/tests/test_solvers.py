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
import math
import typing
import unittest

import numpy as np
import pytest
import topolearn

logging.basicConfig(
    format="%(asctime)s:%(levelname)s:%(name)s:%(message)s", level=logging.DEBUG
)


def ternary_minimize(func: typing.Callable[[float], float], lo: float, hi: float) -> float:
    """Minimizer of a convex scalar function on [lo, hi]."""
    for _ in range(200):
        a = lo + (hi - lo) / 3.0
        b = hi - (hi - lo) / 3.0
        if func(a) < func(b):
            hi = b
        else:
            lo = a
    return 0.5 * (lo + hi)


def random_instance(rng: np.random.Generator, m: int = 20, n: int = 10) -> np.ndarray:
    y = topolearn.pairwise_sq_dist(rng.standard_normal((m, n)))
    return y / y.mean()


class Sample:
    def __init__(self, y: np.ndarray, w: np.ndarray) -> None:
        self.y = y
        self.w = w


class ProxTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(42)

    def test_logbarrier_closed_form(self) -> None:
        for _ in range(1000):
            u = self.rng.uniform(-5.0, 5.0)
            alpha = self.rng.uniform(0.1, 3.0)
            gamma = self.rng.uniform(0.01, 1.0)
            hi = abs(u) + 2.0 * math.sqrt(alpha * gamma) + 1.0
            expected = ternary_minimize(
                lambda x: -alpha * gamma * math.log(x) + 0.5 * (x - u) ** 2, 1e-300, hi
            )
            assert float(topolearn.prox_logbarrier(u, alpha, gamma)) == pytest.approx(
                expected, abs=1e-6
            )

    def test_dual_logbarrier_closed_form(self) -> None:
        for _ in range(1000):
            r = self.rng.uniform(-5.0, 5.0)
            alpha = self.rng.uniform(0.1, 3.0)
            gamma = self.rng.uniform(0.01, 1.0)
            lo = -(abs(r) + 2.0 * math.sqrt(alpha * gamma) + 1.0)
            expected = ternary_minimize(
                lambda s: -alpha * gamma * math.log(-s) + 0.5 * (s - r) ** 2, lo, -1e-300
            )
            result = float(topolearn.prox_dual_logbarrier(r, alpha, gamma))
            assert result < 0.0
            assert result == pytest.approx(expected, abs=1e-6)

    def test_moreau_identity(self) -> None:
        r = self.rng.uniform(-5.0, 5.0, 50)
        alpha, gamma = 0.7, 0.3
        total = topolearn.prox_dual_logbarrier(r, alpha, gamma) + gamma * topolearn.prox_logbarrier(
            r / gamma, alpha, 1.0 / gamma
        )
        np.testing.assert_allclose(total, r, atol=1e-12)

    def test_prox_nonneg(self) -> None:
        np.testing.assert_array_equal(topolearn.prox_nonneg([-1.0, 0.0, 2.5]), [0.0, 0.0, 2.5])

    def test_prox_rejects_nonpositive(self) -> None:
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.prox_dual_logbarrier(np.ones(3), 0.0, 0.1)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.prox_logbarrier(np.ones(3), 1.0, -0.1)

    def test_objective(self) -> None:
        y = np.array([1.0, 2.0, 3.0])
        w = np.array([1.0, 1.0, 1.0])
        expected = 2.0 * 6.0 - 0.5 * 3.0 * math.log(2.0) + 0.25 * 3.0
        assert topolearn.objective(w, y, 0.5, 0.25) == pytest.approx(expected)
        assert topolearn.objective([-1.0, 1.0, 1.0], y, 1.0, 1.0) == math.inf
        # Node 2 is isolated.
        assert topolearn.objective([1.0, 0.0, 0.0], y, 1.0, 1.0) == math.inf


class SolverConfigTestCase(unittest.TestCase):
    def test_defaults(self) -> None:
        cfg = topolearn.SolverConfig()
        assert cfg.gamma is None
        assert cfg.step_size(20) == pytest.approx(0.9 / (2.0 + math.sqrt(38.0)))
        assert cfg.replace(gamma=0.05).step_size(20) == 0.05

    def test_round_trip(self) -> None:
        cfg = topolearn.SolverConfig(alpha=0.3, beta=2.0, tol=1e-8, lambda_relax=1.8)
        assert topolearn.SolverConfig.from_dict(cfg.as_dict()) == cfg

    def test_invalid(self) -> None:
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.SolverConfig(alpha=0.0)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.SolverConfig(lambda_relax=1.0)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.SolverConfig(max_iter=0)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.SolverConfig.from_dict(dict(alpha=1.0, unknown=3))


class SolverTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.rng = np.random.default_rng(2024)

    def test_pds_admm_agree(self) -> None:
        cfg = topolearn.SolverConfig(alpha=1.0, beta=1.0, tol=1e-8, max_iter=100000)
        for _ in range(20):
            y = random_instance(self.rng)
            pds = topolearn.pds_solve(y, cfg)
            admm = topolearn.admm_solve(y, cfg)
            assert pds.converged and admm.converged
            assert np.all(pds.w >= 0.0) and np.all(admm.w >= 0.0)
            error = np.linalg.norm(pds.w - admm.w) / np.linalg.norm(pds.w)
            assert error <= 1e-3

    def test_solution_is_optimal(self) -> None:
        cfg = topolearn.SolverConfig(alpha=1.0, beta=0.5, tol=1e-10, max_iter=100000)
        y = random_instance(self.rng, m=10)
        result = topolearn.solve(y, cfg, topolearn.SolverKind.PDS)
        best = topolearn.objective(result.w, y, cfg.alpha, cfg.beta)
        assert np.isfinite(best)
        for _ in range(200):
            direction = self.rng.standard_normal(result.w.size)
            candidate = np.maximum(result.w + 1e-3 * direction, 0.0)
            assert topolearn.objective(candidate, y, cfg.alpha, cfg.beta) >= best - 1e-9

    def test_admm_step_extrapolates_projected_point(self) -> None:
        y = random_instance(self.rng, m=6)
        w = np.abs(self.rng.standard_normal(y.size))
        w[::3] = 0.0
        v = -0.01 * np.abs(self.rng.standard_normal(6)) - 0.01
        alpha, beta, gamma, relax = 1.0, 0.5, 0.1, 1.5
        r1 = w - gamma * (2.0 * beta * w + 2.0 * y + topolearn.degree_adjoint(v))
        assert np.any(r1 < 0.0)
        p1 = np.maximum(r1, 0.0)
        p2 = topolearn.prox_dual_logbarrier(v + gamma * topolearn.degree_apply(2.0 * p1 - w), alpha, gamma)
        w_next, v_next = topolearn.admm_step(w, v, y, alpha, beta, gamma, relax)
        np.testing.assert_allclose(w_next, w + relax * (p1 - w), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(v_next, v + relax * (p2 - v), rtol=1e-12, atol=1e-14)

    def test_scaling_consistency(self) -> None:
        y = random_instance(self.rng, m=10)
        cfg = topolearn.SolverConfig(alpha=1.0, beta=0.5, tol=1e-11, max_iter=200000)
        reference = topolearn.pds_solve(y, cfg)
        assert reference.converged
        for c in (0.25, 4.0):
            scaled = topolearn.pds_solve(c * y, cfg.replace(alpha=c * cfg.alpha, beta=c * cfg.beta))
            assert scaled.converged
            np.testing.assert_allclose(scaled.w, reference.w, rtol=0.0, atol=1e-6)

    def test_result_fields(self) -> None:
        cfg = topolearn.SolverConfig(tol=1e-6, max_iter=50000)
        result = topolearn.solve(random_instance(self.rng, m=8), cfg, "admm")
        assert result.v_dual.shape == (8,)
        assert result.objective_trace.shape == (result.iterations,)
        assert result.converged
        # The degree log-barrier keeps every node connected.
        assert np.all(topolearn.degree_apply(result.w) > 0.0)

    def test_max_iter(self) -> None:
        cfg = topolearn.SolverConfig(tol=1e-14, max_iter=5)
        result = topolearn.pds_solve(random_instance(self.rng), cfg)
        assert result.iterations == 5
        assert not result.converged

    def test_divergence(self) -> None:
        cfg = topolearn.SolverConfig(gamma=1e3, max_iter=10000)
        with pytest.raises(topolearn.SolverError) as excinfo:
            topolearn.pds_solve(random_instance(self.rng), cfg)
        assert excinfo.value.iteration is not None
        assert isinstance(excinfo.value, topolearn.NumericError)

    def test_invalid_distances(self) -> None:
        cfg = topolearn.SolverConfig()
        with pytest.raises(topolearn.ValidationError):
            topolearn.pds_solve(np.array([1.0, -1.0, 1.0]), cfg)
        with pytest.raises(topolearn.ValidationError):
            topolearn.admm_solve(np.ones(4), cfg)
        with pytest.raises(topolearn.ValidationError):
            topolearn.pds_solve(np.array([1.0, np.inf, 1.0]), cfg)

    def test_solve_batch_order(self) -> None:
        cfg = topolearn.SolverConfig(tol=1e-6)
        ys = [random_instance(self.rng, m=6) for _ in range(5)]
        serial = topolearn.solve_batch(ys, cfg, topolearn.SolverKind.PDS, threads=1)
        threaded = topolearn.solve_batch(ys, cfg, topolearn.SolverKind.PDS, threads=3)
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.w, b.w)


class GridSearchTestCase(unittest.TestCase):
    def test_tie_break(self) -> None:
        alphas = [1.0, 0.1, 10.0]
        betas = [2.0, 0.5]
        scores = np.ones((3, 2))
        cfg = topolearn.select_grid_point(scores, alphas, betas)
        assert (cfg.alpha, cfg.beta) == (0.1, 0.5)
        scores[2, 1] = 0.5
        cfg = topolearn.select_grid_point(scores, alphas, betas)
        assert (cfg.alpha, cfg.beta) == (10.0, 2.0)

    def test_all_diverged(self) -> None:
        with pytest.raises(topolearn.SolverError):
            topolearn.select_grid_point(np.full((2, 2), np.inf), [1.0, 2.0], [1.0, 2.0])

    def test_grid_search(self) -> None:
        spec = topolearn.GraphFamilySpec("ba", 10, density_interval=(0.0, 1.0))
        samples = [
            topolearn.generate_sample(spec, index, n_signals=100, sigma=0.1, seed=3)
            for index in range(4)
        ]
        alphas = [0.1, 1.0, 10.0]
        betas = [0.1, 1.0]
        base = topolearn.SolverConfig(tol=1e-5, max_iter=2000)
        scores = topolearn.grid_scores(samples, alphas, betas, base=base)
        assert scores.shape == (3, 2)
        assert np.all(np.isfinite(scores))
        cfg = topolearn.grid_search(samples, alphas, betas, base=base, threads=2)
        i, j = np.unravel_index(int(np.argmin(scores)), scores.shape)
        assert (cfg.alpha, cfg.beta) == (alphas[i], betas[j])
        assert cfg.tol == 1e-5

    def test_empty(self) -> None:
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.grid_scores([], [1.0], [1.0])
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.grid_scores([Sample(np.ones(3), np.ones(3))], [], [1.0])
