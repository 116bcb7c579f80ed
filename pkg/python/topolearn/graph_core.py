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

"""Graph and vector primitives.

Edge ordering
-------------
An `EdgeVector` stacks the strict upper triangle of a symmetric m x m
matrix in row-major order: (0, 1), (0, 2), ..., (0, m-1), (1, 2), ...,
(m-2, m-1). This is the order of `numpy.triu_indices` with ``k=1`` and of
`scipy.spatial.distance.pdist`, and every module in the package relies on
it.
"""

__all__ = [
    "DEFAULT_ETA",
    "EdgeVector",
    "DistanceVector",
    "AdjacencyMatrix",
    "LaplacianMatrix",
    "BinaryAdjacency",
    "num_edges",
    "num_nodes_from_length",
    "edge_indices",
    "halfvec",
    "unhalfvec",
    "degree_apply",
    "degree_adjoint",
    "degree_operator_norm",
    "laplacian",
    "pairwise_sq_dist",
    "binarize",
    "binarize_vector",
    "symmetrize",
]

import functools
import math
import typing

import numpy as np
import numpy.typing as npt
from scipy.spatial import distance

from .errors import ValidationError

# Threshold below which an edge weight is treated as absent.
DEFAULT_ETA = 1e-4

EdgeVector = npt.NDArray[np.float64]
DistanceVector = npt.NDArray[np.float64]
AdjacencyMatrix = npt.NDArray[np.float64]
LaplacianMatrix = npt.NDArray[np.float64]
BinaryAdjacency = npt.NDArray[np.float64]


def num_edges(m: int) -> int:
    """Number of node pairs, m(m-1)/2."""
    return m * (m - 1) // 2


def num_nodes_from_length(length: int) -> int:
    """Return m such that ``length == m(m-1)/2``.

    Raises
    ------
    ValidationError
        If ``length`` is not of that form for an integer m >= 2.
    """
    m = (1 + math.isqrt(1 + 8 * length)) // 2
    if length < 1 or num_edges(m) != length:
        raise ValidationError(
            f"Length {length} is not m(m-1)/2 for any integer m >= 2."
        )
    return m


@functools.lru_cache(maxsize=64)
def edge_indices(m: int) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the edges, in the canonical order."""
    rows, cols = np.triu_indices(m, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _as_vector(w: npt.ArrayLike, name: str = "w") -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional; got shape {w.shape}.")
    num_nodes_from_length(w.size)
    return w


def halfvec(W: npt.ArrayLike, atol: float = 1e-12) -> EdgeVector:
    """Stack the strict upper triangle of an adjacency matrix.

    Parameters
    ----------
    W : `numpy.ndarray`
        Symmetric m x m matrix with zero diagonal.
    atol : `float`
        Absolute tolerance of the symmetry check.

    Returns
    -------
    w : `numpy.ndarray`
        Edge vector of length m(m-1)/2.

    Raises
    ------
    ValidationError
        If ``W`` is not square, not symmetric or has a nonzero diagonal.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 2:
        raise ValidationError(f"Expected a square matrix; got shape {W.shape}.")
    if not np.allclose(W, W.T, rtol=0.0, atol=atol):
        raise ValidationError("Adjacency matrix is not symmetric.")
    if np.any(np.diag(W) != 0.0):
        raise ValidationError("Adjacency matrix has a nonzero diagonal.")
    rows, cols = edge_indices(W.shape[0])
    return W[rows, cols].copy()


def unhalfvec(w: npt.ArrayLike) -> AdjacencyMatrix:
    """Inverse of `halfvec`: a symmetric matrix with zero diagonal."""
    w = _as_vector(w)
    m = num_nodes_from_length(w.size)
    rows, cols = edge_indices(m)
    W = np.zeros((m, m))
    W[rows, cols] = w
    W[cols, rows] = w
    return W


def degree_apply(w: npt.ArrayLike) -> np.ndarray:
    """Node degrees of an edge vector, i.e. ``unhalfvec(w).sum(axis=1)``."""
    w = _as_vector(w)
    m = num_nodes_from_length(w.size)
    rows, cols = edge_indices(m)
    return np.bincount(rows, weights=w, minlength=m) + np.bincount(
        cols, weights=w, minlength=m
    )


def degree_adjoint(v: npt.ArrayLike) -> EdgeVector:
    """Adjoint of `degree_apply`: the entry of edge (i, j) is v_i + v_j."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError(f"Expected a node vector; got shape {v.shape}.")
    rows, cols = edge_indices(v.size)
    return v[rows] + v[cols]


def degree_operator_norm(m: int) -> float:
    """Upper bound sqrt(2(m-1)) on the operator norm of the degree map."""
    return math.sqrt(2.0 * (m - 1))


def laplacian(w: npt.ArrayLike) -> LaplacianMatrix:
    """Combinatorial Laplacian L = diag(degrees) - W."""
    W = unhalfvec(w)
    L = -W
    L[np.diag_indices_from(L)] = W.sum(axis=1)
    return L


def pairwise_sq_dist(X: npt.ArrayLike) -> DistanceVector:
    """Squared Euclidean distances between the rows of a data matrix.

    Parameters
    ----------
    X : `numpy.ndarray`
        m x n matrix; row i holds the n observations of node i.

    Returns
    -------
    y : `numpy.ndarray`
        Distance vector in the canonical edge order.

    Raises
    ------
    ValidationError
        If ``X`` is not two-dimensional, has fewer than two rows or no
        columns, or contains non-finite entries.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValidationError(f"Expected an m x n data matrix; got shape {X.shape}.")
    if not np.all(np.isfinite(X)):
        raise ValidationError("Data matrix contains non-finite entries.")
    return distance.pdist(X, metric="sqeuclidean")


def binarize_vector(w: npt.ArrayLike, eta: float = DEFAULT_ETA) -> np.ndarray:
    """0/1 edge vector marking weights strictly greater than ``eta``."""
    if eta < 0:
        raise ValidationError(f"eta={eta} must be nonnegative.")
    return (np.asarray(w, dtype=np.float64) > eta).astype(np.float64)


def binarize(w: npt.ArrayLike, eta: float = DEFAULT_ETA) -> BinaryAdjacency:
    """Binary adjacency matrix of the edges whose weight exceeds ``eta``."""
    return unhalfvec(binarize_vector(_as_vector(w), eta))


def symmetrize(W: npt.ArrayLike) -> AdjacencyMatrix:
    """Return (W + W^T)/2 with the diagonal cleared."""
    W = np.asarray(W, dtype=np.float64)
    S = 0.5 * (W + W.T)
    S[np.diag_indices_from(S)] = 0.0
    return S
