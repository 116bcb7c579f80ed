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

"""Topological-difference variational autoencoder.

The encoder embeds two binarized graphs with a 2-layer graph convolution
(node degrees as input feature, ReLU activations, mean readout) and maps
the difference of the embeddings to the mean and log-variance of a
Gaussian latent code. The decoder maps the concatenation of a rough edge
vector and a latent code to a nonnegative edge vector.

All functions evaluate on a `Tape`; pass a `VaeParams` to evaluate
without recording, or the result of `VaeParams.bind` to record.
"""

__all__ = [
    "VaeDims",
    "VaeParams",
    "LatentStats",
    "gcn_embed",
    "encode",
    "sample_latent",
    "decode",
    "kl_divergence",
    "kl_value",
    "enhance",
]

import typing

import numpy as np
import numpy.typing as npt

from . import graph_core, tape
from .enums import RunMode
from .errors import ConfigurationError, ContractError
from .tape import Tape, Variable

Weights = typing.Mapping[str, Variable]


class VaeDims:
    """Layer widths of the autoencoder.

    Parameters
    ----------
    num_nodes : `int`
        Graph size m; the decoder input and output have m(m-1)/2 entries.
    nhid : `int`
        Width of the graph convolution and of the hidden layers of the
        mean and log-variance heads.
    nhid2 : `int`
        Width of the decoder hidden layer.
    nlatent : `int`
        Dimension of the latent code.
    emb_out : `int`
        Dimension of the graph embedding.
    """

    def __init__(
        self,
        num_nodes: int,
        nhid: int = 64,
        nhid2: int = 256,
        nlatent: int = 16,
        emb_out: int = 64,
    ) -> None:
        for name, value in (
            ("num_nodes", num_nodes),
            ("nhid", nhid),
            ("nhid2", nhid2),
            ("nlatent", nlatent),
            ("emb_out", emb_out),
        ):
            if int(value) < (2 if name == "num_nodes" else 1):
                raise ConfigurationError(f"{name}={value} is too small.")
        self.num_nodes = int(num_nodes)
        self.nhid = int(nhid)
        self.nhid2 = int(nhid2)
        self.nlatent = int(nlatent)
        self.emb_out = int(emb_out)

    @property
    def num_edges(self) -> int:
        return graph_core.num_edges(self.num_nodes)

    def shapes(self) -> typing.Dict[str, typing.Tuple[int, ...]]:
        """Shape of every weight array, by name."""
        k = self.num_edges
        shapes: typing.Dict[str, typing.Tuple[int, ...]] = {
            "gcn_h0": (self.nhid,),
            "gcn_H1": (self.nhid, self.emb_out),
        }
        for head in ("mean", "cov"):
            shapes[f"{head}_W1"] = (self.emb_out, self.nhid)
            shapes[f"{head}_b1"] = (self.nhid,)
            shapes[f"{head}_W2"] = (self.nhid, self.nlatent)
            shapes[f"{head}_b2"] = (self.nlatent,)
        shapes["dec_W1"] = (k + self.nlatent, self.nhid2)
        shapes["dec_b1"] = (self.nhid2,)
        shapes["dec_W2"] = (self.nhid2, k)
        shapes["dec_b2"] = (k,)
        return shapes

    def as_dict(self) -> typing.Dict[str, int]:
        return dict(
            num_nodes=self.num_nodes,
            nhid=self.nhid,
            nhid2=self.nhid2,
            nlatent=self.nlatent,
            emb_out=self.emb_out,
        )

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "VaeDims":
        return cls(**data)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VaeDims) and self.as_dict() == other.as_dict()


class VaeParams:
    """Weights of the autoencoder.

    Parameters
    ----------
    dims : `VaeDims`
        Layer widths.
    arrays : `dict` [`str`, `numpy.ndarray`]
        One array per name of ``dims.shapes()``.

    Raises
    ------
    ConfigurationError
        If an array is missing or has the wrong shape.
    """

    def __init__(self, dims: VaeDims, arrays: typing.Mapping[str, npt.ArrayLike]) -> None:
        self.dims = dims
        self.arrays: typing.Dict[str, np.ndarray] = {}
        for name, shape in dims.shapes().items():
            if name not in arrays:
                raise ConfigurationError(f"Missing autoencoder weight {name!r}.")
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != shape:
                raise ConfigurationError(
                    f"Weight {name!r} has shape {value.shape}; expected {shape}."
                )
            self.arrays[name] = value

    @classmethod
    def initial(cls, dims: VaeDims, rng: np.random.Generator) -> "VaeParams":
        """Glorot-uniform weights and zero biases."""
        arrays = {}
        for name, shape in dims.shapes().items():
            if "_b" in name:
                arrays[name] = np.zeros(shape)
            else:
                fan_in, fan_out = (1, shape[0]) if len(shape) == 1 else shape
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                arrays[name] = rng.uniform(-limit, limit, size=shape)
        return cls(dims, arrays)

    def bind(self, tp: Tape) -> typing.Dict[str, Variable]:
        """Create one tape leaf per weight array."""
        return {name: tp.variable(value, name=name) for name, value in self.arrays.items()}


class LatentStats:
    """Mean and standard deviation of the Gaussian latent posterior.

    Parameters
    ----------
    mu : `Variable`
        Mean.
    log_var : `Variable`
        Log-variance; the standard deviation is exp(log_var / 2) > 0.
    """

    def __init__(self, mu: Variable, log_var: Variable) -> None:
        self.mu = mu
        self.log_var = log_var
        self.sigma = tape.exp(0.5 * log_var)

    @classmethod
    def from_arrays(
        cls, mu: npt.ArrayLike, sigma: npt.ArrayLike, tp: typing.Optional[Tape] = None
    ) -> "LatentStats":
        tp = tp or Tape(record=False)
        log_var = 2.0 * np.log(np.asarray(sigma, dtype=np.float64))
        return cls(tp.constant(mu), tp.constant(log_var))


def _weights(params: typing.Union[VaeParams, Weights]) -> Weights:
    if isinstance(params, VaeParams):
        return params.bind(Tape(record=False))
    return params


def _tape_of(weights: Weights) -> Tape:
    return next(iter(weights.values())).tape


Activation = typing.Callable[[Variable], Variable]


def _mlp(
    x: Variable,
    weights: Weights,
    prefix: str,
    hidden: Activation,
    out: typing.Optional[Activation],
) -> Variable:
    h = hidden(x @ weights[f"{prefix}_W1"] + weights[f"{prefix}_b1"])
    o = h @ weights[f"{prefix}_W2"] + weights[f"{prefix}_b2"]
    return o if out is None else out(o)


def gcn_embed(A: npt.ArrayLike, params: typing.Union[VaeParams, Weights]) -> Variable:
    """Graph embedding mean_nodes(relu(A relu(A d h0^T) H1)) with degrees
    d = A 1.

    Parameters
    ----------
    A : `numpy.ndarray`
        Binary adjacency matrix; no gradient flows through it.
    params : `VaeParams` or `dict` [`str`, `Variable`]
        Autoencoder weights.

    Returns
    -------
    embedding : `Variable`
        Vector of length ``emb_out``.

    Raises
    ------
    ConfigurationError
        If ``A`` does not have the node count of the weights.
    """
    weights = _weights(params)
    tp = _tape_of(weights)
    A = np.asarray(A, dtype=np.float64)
    m = A.shape[0]
    h0 = weights["gcn_h0"]
    if A.shape != (m, m) or graph_core.num_edges(m) != weights["dec_b2"].size:
        raise ConfigurationError(f"Adjacency of shape {A.shape} does not fit the encoder.")
    # A (d h0^T) = (A d) h0^T
    ad = (A @ A.sum(axis=1)).reshape(m, 1)
    h = tape.relu(tape.matmul(tp.constant(ad), tape.reshape(h0, (1, h0.size))))
    h = tape.relu(tape.matmul(tp.constant(A), h @ weights["gcn_H1"]))
    return tape.mean(h, axis=0)


def encode(
    A_r: npt.ArrayLike, A_w: npt.ArrayLike, params: typing.Union[VaeParams, Weights]
) -> LatentStats:
    """Latent posterior of the topological difference
    f_emb(A_w) - f_emb(A_r)."""
    A_r = np.asarray(A_r, dtype=np.float64)
    A_w = np.asarray(A_w, dtype=np.float64)
    if A_r.shape != A_w.shape:
        raise ConfigurationError(f"Adjacency shapes {A_r.shape} and {A_w.shape} differ.")
    weights = _weights(params)
    delta = gcn_embed(A_w, weights) - gcn_embed(A_r, weights)
    mu = _mlp(delta, weights, "mean", tape.tanh, None)
    log_var = _mlp(delta, weights, "cov", tape.tanh, None)
    return LatentStats(mu, log_var)


def sample_latent(stats: LatentStats, noise: npt.ArrayLike) -> Variable:
    """Reparameterized draw z = mu + sigma * noise."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != stats.mu.shape:
        raise ConfigurationError(f"Noise shape {noise.shape} != latent shape {stats.mu.shape}.")
    return stats.mu + stats.sigma * noise


def decode(
    r1: typing.Union[Variable, npt.ArrayLike],
    z: typing.Union[Variable, npt.ArrayLike],
    params: typing.Union[VaeParams, Weights],
) -> Variable:
    """Edge vector estimate relu(f_dec([r1, z])), hence nonnegative."""
    weights = _weights(params)
    tp = _tape_of(weights)
    r1 = tp.constant(r1)
    z = tp.constant(z)
    expected = weights["dec_W1"].shape[0]
    if r1.size + z.size != expected:
        raise ConfigurationError(
            f"Decoder input of length {r1.size + z.size}; expected {expected}."
        )
    return _mlp(tape.concat([r1, z]), weights, "dec", tape.relu, tape.relu)


def kl_divergence(stats: LatentStats) -> Variable:
    """KL divergence from N(0, I) of the latent posterior,
    0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)."""
    terms = tape.square(stats.mu) + tape.exp(stats.log_var) - 1.0 - stats.log_var
    return 0.5 * tape.sum(terms)


def kl_value(mu: npt.ArrayLike, sigma: npt.ArrayLike) -> float:
    """`kl_divergence` of plain arrays."""
    return float(kl_divergence(LatentStats.from_arrays(mu, sigma)).value)


def enhance(
    r1: Variable,
    mode: RunMode,
    params: typing.Union[VaeParams, Weights],
    groundtruth_A: typing.Optional[npt.ArrayLike] = None,
    noise: typing.Optional[npt.ArrayLike] = None,
    eta: float = graph_core.DEFAULT_ETA,
) -> typing.Tuple[Variable, typing.Optional[LatentStats]]:
    """Replace the nonnegative projection of a primal step.

    Parameters
    ----------
    r1 : `Variable`
        Primal forward step.
    mode : `RunMode`
        In `RunMode.TRAIN` the latent code is drawn from the posterior
        given the binarized ``r1`` and the groundtruth; in
        `RunMode.INFER` it is the prior mean 0, or ``noise`` when given.
    params : `VaeParams` or `dict` [`str`, `Variable`]
        Autoencoder weights.
    groundtruth_A : `numpy.ndarray`, optional
        Binary groundtruth adjacency; required in training, forbidden in
        inference.
    noise : `numpy.ndarray`, optional
        Standard normal draw of the latent dimension; zero when omitted.
    eta : `float`
        Binarization threshold of ``r1``.

    Returns
    -------
    p1 : `Variable`
        Enhanced estimate.
    stats : `LatentStats` or `None`
        Posterior statistics in training, for the KL term.

    Raises
    ------
    ContractError
        If the groundtruth presence does not match the mode.
    """
    weights = _weights(params)
    nlatent = weights["mean_b2"].size
    noise = np.zeros(nlatent) if noise is None else np.asarray(noise, dtype=np.float64)
    if RunMode(mode) == RunMode.TRAIN:
        if groundtruth_A is None:
            raise ContractError("Training mode needs the groundtruth adjacency.")
        A_r = graph_core.binarize(r1.value, eta)
        stats: typing.Optional[LatentStats] = encode(A_r, groundtruth_A, weights)
        z: typing.Union[Variable, np.ndarray] = sample_latent(stats, noise)
    else:
        if groundtruth_A is not None:
            raise ContractError("Inference mode does not accept a groundtruth.")
        stats = None
        z = noise
    return decode(r1, z, weights), stats
