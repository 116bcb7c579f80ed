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

"""Iterative solvers of the log-barrier graph learning problem

    minimize  2 w^T y - alpha 1^T log(D w) + beta ||w||^2   over w >= 0

where D maps an edge vector to node degrees.
"""

__all__ = [
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_BETA_GRID",
    "SolverConfig",
    "SolveResult",
    "default_step_size",
    "objective",
    "prox_nonneg",
    "prox_dual_logbarrier",
    "prox_logbarrier",
    "pds_step",
    "admm_step",
    "pds_solve",
    "admm_solve",
    "solve",
    "solve_batch",
    "grid_scores",
    "select_grid_point",
    "grid_search",
]

import logging
import typing

import numpy as np
import numpy.typing as npt

from . import graph_core
from .batch import map_ordered
from .enums import SolverKind
from .errors import ConfigurationError, SolverError, ValidationError
from .metrics import gmse
from .schema_registry import validate

DEFAULT_ALPHA_GRID = np.logspace(-2.0, 1.0, 7)
DEFAULT_BETA_GRID = np.logspace(-2.0, 1.0, 7)

log = logging.getLogger(__name__)


def default_step_size(beta: float, num_nodes: int) -> float:
    """Step size 0.9 / (2 beta + sqrt(2 (m - 1)))."""
    return 0.9 / (2.0 * beta + graph_core.degree_operator_norm(num_nodes))


class SolverConfig:
    """Hyperparameters of the classical solvers.

    Parameters
    ----------
    alpha : `float`
        Weight of the degree log-barrier; > 0.
    beta : `float`
        Weight of the squared l2 norm of the edge weights; >= 0.
    gamma : `float` or `None`
        Step size; `None` selects `default_step_size` for the problem size.
    tol : `float`
        Stop once the infinity norm of successive iterate differences is at
        most this.
    max_iter : `int`
        Iteration cap.
    lambda_relax : `float`
        Relaxation factor of ADMM, in [1.5, 2].

    Raises
    ------
    ConfigurationError
        If a value is out of range.
    """

    def __init__(
        self,
        alpha: float = 1.0,
        beta: float = 1.0,
        gamma: typing.Optional[float] = None,
        tol: float = 1e-6,
        max_iter: int = 10000,
        lambda_relax: float = 1.5,
    ) -> None:
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.gamma = None if gamma is None else float(gamma)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.lambda_relax = float(lambda_relax)
        try:
            validate(self.as_dict(), "solver_config")
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e

    def step_size(self, num_nodes: int) -> float:
        if self.gamma is not None:
            return self.gamma
        return default_step_size(self.beta, num_nodes)

    def replace(self, **kwargs: typing.Any) -> "SolverConfig":
        """Return a copy with some fields changed."""
        return SolverConfig(**dict(self.as_dict(), **kwargs))

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            tol=self.tol,
            max_iter=self.max_iter,
            lambda_relax=self.lambda_relax,
        )

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "SolverConfig":
        try:
            validate(data, "solver_config")
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e
        return cls(**data)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SolverConfig) and self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        fields = ", ".join(f"{key}={value!r}" for key, value in self.as_dict().items())
        return f"SolverConfig({fields})"


class SolveResult:
    """Output of a solver run.

    Attributes
    ----------
    w : `numpy.ndarray`
        Estimated edge vector; every entry is >= 0.
    v_dual : `numpy.ndarray`
        Final dual (node) variable.
    iterations : `int`
        Number of iterations performed.
    converged : `bool`
        Whether the stopping tolerance was reached before ``max_iter``.
    objective_trace : `numpy.ndarray`
        Objective at the nonnegative part of every iterate.
    """

    def __init__(
        self,
        w: np.ndarray,
        v_dual: np.ndarray,
        iterations: int,
        converged: bool,
        objective_trace: np.ndarray,
    ) -> None:
        self.w = w
        self.v_dual = v_dual
        self.iterations = iterations
        self.converged = converged
        self.objective_trace = objective_trace


def objective(w: npt.ArrayLike, y: npt.ArrayLike, alpha: float, beta: float) -> float:
    """Value of the graph learning objective.

    Returns +inf when an entry of ``w`` is negative or a node has zero
    degree, the boundary of the domain.
    """
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(w < 0.0):
        return np.inf
    degrees = graph_core.degree_apply(w)
    if np.any(degrees <= 0.0):
        return np.inf
    return float(2.0 * np.dot(w, y) - alpha * np.log(degrees).sum() + beta * np.dot(w, w))


def prox_nonneg(r: npt.ArrayLike) -> np.ndarray:
    """Projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(r, dtype=np.float64), 0.0)


def _check_positive(alpha: typing.Any, gamma: typing.Any) -> None:
    if not (np.all(alpha > 0) and np.all(gamma > 0)):
        raise ConfigurationError(f"alpha={alpha} and gamma={gamma} must be positive.")


def prox_dual_logbarrier(r: npt.ArrayLike, alpha: typing.Any, gamma: typing.Any) -> np.ndarray:
    """Proximal step of the dual of the degree log-barrier,
    (r - sqrt(r^2 + 4 alpha gamma)) / 2 elementwise.

    The result is strictly negative when alpha * gamma > 0.

    Raises
    ------
    ConfigurationError
        If ``alpha`` or ``gamma`` is not positive.
    """
    _check_positive(alpha, gamma)
    r = np.asarray(r, dtype=np.float64)
    return 0.5 * (r - np.sqrt(r * r + 4.0 * alpha * gamma))


def prox_logbarrier(u: npt.ArrayLike, alpha: typing.Any, gamma: typing.Any) -> np.ndarray:
    """Proximal step of -alpha log(x) with step gamma,
    (u + sqrt(u^2 + 4 alpha gamma)) / 2 elementwise.

    It is related to `prox_dual_logbarrier` through the Moreau identity
    ``prox_dual_logbarrier(r, a, g) + g * prox_logbarrier(r / g, a, 1 / g) == r``.
    """
    _check_positive(alpha, gamma)
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * (u + np.sqrt(u * u + 4.0 * alpha * gamma))


def pds_step(
    w: np.ndarray,
    v: np.ndarray,
    y: np.ndarray,
    alpha: float,
    beta: float,
    gamma: float,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """One forward-backward-forward primal-dual iteration.

    Returns
    -------
    w, v : `numpy.ndarray`
        Next primal (edge) and dual (node) iterates.
    """
    r1 = w - gamma * (2.0 * beta * w + 2.0 * y + graph_core.degree_adjoint(v))
    r2 = v + gamma * graph_core.degree_apply(w)
    p1 = prox_nonneg(r1)
    p2 = prox_dual_logbarrier(r2, alpha, gamma)
    q1 = p1 - gamma * (2.0 * beta * p1 + 2.0 * y + graph_core.degree_adjoint(p2))
    q2 = p2 + gamma * graph_core.degree_apply(p1)
    return w - r1 + q1, v - r2 + q2


def admm_step(
    w: np.ndarray,
    v: np.ndarray,
    y: np.ndarray,
    alpha: float,
    beta: float,
    gamma: float,
    lambda_relax: float,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """One relaxed primal-dual iteration with dual extrapolation.

    The dual forward step uses the extrapolated primal point 2 p1 - w,
    where p1 is the projected primal step, rather than 2 r1 - w from the
    forward step r1; the dual update only sees nonnegative weights. At a
    fixed point p1 = w and the dual step sees D w as in `pds_step`.
    """
    r1 = w - gamma * (2.0 * beta * w + 2.0 * y + graph_core.degree_adjoint(v))
    p1 = prox_nonneg(r1)
    r2 = v + gamma * graph_core.degree_apply(2.0 * p1 - w)
    p2 = prox_dual_logbarrier(r2, alpha, gamma)
    return w + lambda_relax * (p1 - w), v + lambda_relax * (p2 - v)


def _iterate(
    name: str,
    step: typing.Callable[
        [np.ndarray, np.ndarray], typing.Tuple[np.ndarray, np.ndarray]
    ],
    y: np.ndarray,
    cfg: SolverConfig,
) -> SolveResult:
    m = graph_core.num_nodes_from_length(y.size)
    w = np.zeros_like(y)
    v = np.zeros(m)
    trace = []
    converged = False
    iteration = 0
    while iteration < cfg.max_iter:
        iteration += 1
        w_next, v = step(w, v)
        if not (np.all(np.isfinite(w_next)) and np.all(np.isfinite(v))):
            raise SolverError(f"{name} produced a non-finite iterate", iteration=iteration)
        change = float(np.max(np.abs(w_next - w)))
        w = w_next
        trace.append(objective(prox_nonneg(w), y, cfg.alpha, cfg.beta))
        if change <= cfg.tol:
            converged = True
            break
    if converged:
        log.debug(f"{name} converged after {iteration} iterations.")
    else:
        log.debug(f"{name} stopped at max_iter={cfg.max_iter} without converging.")
    return SolveResult(prox_nonneg(w), v, iteration, converged, np.array(trace))


def _as_distances(y: npt.ArrayLike) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValidationError(f"Distance vector must be one-dimensional; got {y.shape}.")
    graph_core.num_nodes_from_length(y.size)
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValidationError("Distance vector must be finite and nonnegative.")
    return y


def pds_solve(y: npt.ArrayLike, cfg: SolverConfig) -> SolveResult:
    """Solve with the forward-backward-forward primal-dual splitting method.

    Iterates `pds_step` from w = 0, v = 0 until the infinity norm of the
    change of w is at most ``cfg.tol`` or ``cfg.max_iter`` is reached.

    Parameters
    ----------
    y : `numpy.ndarray`
        Squared pairwise distances.
    cfg : `SolverConfig`
        Hyperparameters.

    Returns
    -------
    result : `SolveResult`
        The estimate, projected onto w >= 0.

    Raises
    ------
    SolverError
        If an iterate becomes non-finite.
    """
    y = _as_distances(y)
    gamma = cfg.step_size(graph_core.num_nodes_from_length(y.size))
    return _iterate(
        "PDS",
        lambda w, v: pds_step(w, v, y, cfg.alpha, cfg.beta, gamma),
        y,
        cfg,
    )


def admm_solve(y: npt.ArrayLike, cfg: SolverConfig) -> SolveResult:
    """Solve with the relaxed ADMM-type primal-dual method.

    Same stopping rule and error handling as `pds_solve`; the relaxation
    factor is ``cfg.lambda_relax``, held constant over iterations.
    """
    y = _as_distances(y)
    gamma = cfg.step_size(graph_core.num_nodes_from_length(y.size))
    return _iterate(
        "ADMM",
        lambda w, v: admm_step(w, v, y, cfg.alpha, cfg.beta, gamma, cfg.lambda_relax),
        y,
        cfg,
    )


_SOLVERS = {SolverKind.PDS: pds_solve, SolverKind.ADMM: admm_solve}


def solve(y: npt.ArrayLike, cfg: SolverConfig, kind: SolverKind = SolverKind.PDS) -> SolveResult:
    """Run the solver of the given kind."""
    return _SOLVERS[SolverKind(kind)](y, cfg)


def solve_batch(
    ys: typing.Sequence[npt.ArrayLike],
    cfg: SolverConfig,
    kind: SolverKind = SolverKind.PDS,
    threads: int = 1,
) -> typing.List[SolveResult]:
    """Solve independent instances, at most ``threads`` at a time."""
    return map_ordered(lambda y: solve(y, cfg, kind), ys, threads)


class _HasPair(typing.Protocol):
    y: np.ndarray
    w: np.ndarray


def grid_scores(
    samples: typing.Sequence[_HasPair],
    alphas: npt.ArrayLike = DEFAULT_ALPHA_GRID,
    betas: npt.ArrayLike = DEFAULT_BETA_GRID,
    kind: SolverKind = SolverKind.PDS,
    base: typing.Optional[SolverConfig] = None,
    threads: int = 1,
) -> np.ndarray:
    """Mean GMSE of every (alpha, beta) grid point over a training set.

    Parameters
    ----------
    samples : `list`
        Training samples with distance vector ``y`` and groundtruth ``w``.
    alphas, betas : `numpy.ndarray`
        Grid values; sorted ascending before use.
    kind : `SolverKind`
        Solver to tune.
    base : `SolverConfig`, optional
        Source of the remaining solver settings.
    threads : `int`
        Worker cap; grid points are evaluated in parallel.

    Returns
    -------
    scores : `numpy.ndarray`
        Shape (len(alphas), len(betas)); +inf where the solver diverged.
    """
    if len(samples) == 0:
        raise ConfigurationError("Grid search needs a nonempty training set.")
    alphas = np.sort(np.asarray(alphas, dtype=np.float64))
    betas = np.sort(np.asarray(betas, dtype=np.float64))
    if alphas.size == 0 or betas.size == 0:
        raise ConfigurationError("Grid search needs nonempty grids.")
    base = base or SolverConfig()
    points = [(a, b) for a in alphas for b in betas]

    def score(point: typing.Tuple[float, float]) -> float:
        cfg = base.replace(alpha=point[0], beta=point[1])
        try:
            estimates = [solve(sample.y, cfg, kind).w for sample in samples]
        except SolverError as e:
            log.warning(f"alpha={point[0]:.4g}, beta={point[1]:.4g} diverged: {e}")
            return np.inf
        return gmse(estimates, [sample.w for sample in samples])

    values = map_ordered(score, points, threads)
    return np.array(values).reshape(alphas.size, betas.size)


def select_grid_point(
    scores: np.ndarray,
    alphas: npt.ArrayLike,
    betas: npt.ArrayLike,
    base: typing.Optional[SolverConfig] = None,
) -> SolverConfig:
    """Return the configuration of the lowest score.

    Ties go to the smaller alpha, then the smaller beta.

    Raises
    ------
    SolverError
        If every grid point diverged.
    """
    alphas = np.sort(np.asarray(alphas, dtype=np.float64))
    betas = np.sort(np.asarray(betas, dtype=np.float64))
    if not np.any(np.isfinite(scores)):
        raise SolverError(
            f"Every grid point diverged; alphas={alphas.tolist()}, betas={betas.tolist()}."
        )
    # argmin returns the first minimum in row-major (alpha-major) order.
    i, j = np.unravel_index(int(np.argmin(scores)), scores.shape)
    base = base or SolverConfig()
    log.info(
        f"Selected alpha={alphas[i]:.4g}, beta={betas[j]:.4g} with GMSE {scores[i, j]:.4f}."
    )
    return base.replace(alpha=float(alphas[i]), beta=float(betas[j]))


def grid_search(
    samples: typing.Sequence[_HasPair],
    alphas: npt.ArrayLike = DEFAULT_ALPHA_GRID,
    betas: npt.ArrayLike = DEFAULT_BETA_GRID,
    kind: SolverKind = SolverKind.PDS,
    base: typing.Optional[SolverConfig] = None,
    threads: int = 1,
) -> SolverConfig:
    """Tune (alpha, beta) by minimizing the mean GMSE over a training set.

    See `grid_scores` and `select_grid_point`.
    """
    scores = grid_scores(samples, alphas, betas, kind, base, threads)
    return select_grid_point(scores, alphas, betas, base)
