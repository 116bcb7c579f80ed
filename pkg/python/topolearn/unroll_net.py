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

"""Unrolled primal-dual network.

Every layer repeats one forward-backward-forward iteration of
`solvers.pds_step` with its own trainable (alpha, beta, gamma), kept
positive through softplus. Layers flagged in the enhancement mask replace
the nonnegative projection of the primal step by the topological
difference autoencoder.
"""

__all__ = [
    "DEFAULT_LAYERS",
    "DEFAULT_INIT",
    "softplus",
    "inverse_softplus",
    "UnrollParams",
    "UnrollModel",
    "ForwardTrace",
    "Checkpoint",
    "enhancement_mask",
    "build_model",
    "forward",
    "loss",
    "gradients",
    "infer",
]

import logging
import pathlib
import typing

import numpy as np
import numpy.typing as npt

from . import graph_core, tape
from .container import FORMAT_VERSION, config_digest, load_container, save_container
from .enums import ModelKind, RunMode
from .errors import ConfigurationError, ContractError, DataError, NumericError, ValidationError
from .solvers import prox_dual_logbarrier, prox_nonneg
from .tape import Tape, Variable
from .topodiffvae import LatentStats, VaeDims, VaeParams, enhance, kl_divergence

DEFAULT_LAYERS = 20
# Effective (alpha, beta, gamma) of a fresh model without tuned values.
DEFAULT_INIT = (0.5, 0.5, 0.1)

_RAW_NAMES = ("raw_alpha", "raw_beta", "raw_gamma")
_VAE_PREFIX = "vae."

log = logging.getLogger(__name__)


def softplus(x: npt.ArrayLike) -> np.ndarray:
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def inverse_softplus(x: npt.ArrayLike) -> np.ndarray:
    """Raw value whose softplus is ``x`` > 0."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ConfigurationError(f"softplus has no preimage for {x}.")
    return np.log(np.expm1(x))


class UnrollParams:
    """Unconstrained per-layer parameters.

    Parameters
    ----------
    raw_alpha, raw_beta, raw_gamma : `numpy.ndarray`
        Length T, or length 1 when ``shared``.
    layers : `int`
        Number of layers T.
    shared : `bool`
        Recurrent mode: every layer uses entry 0.
    enhancement_mask : `numpy.ndarray` [`bool`]
        Length T; layers that use the autoencoder.

    Raises
    ------
    ConfigurationError
        If the lengths are inconsistent.
    """

    def __init__(
        self,
        raw_alpha: npt.ArrayLike,
        raw_beta: npt.ArrayLike,
        raw_gamma: npt.ArrayLike,
        layers: int,
        shared: bool = False,
        enhancement_mask: typing.Optional[npt.ArrayLike] = None,
    ) -> None:
        if layers < 1:
            raise ConfigurationError(f"layers={layers} must be at least 1.")
        self.layers = int(layers)
        self.shared = bool(shared)
        size = 1 if self.shared else self.layers
        self.raw: typing.Dict[str, np.ndarray] = {}
        for name, value in zip(_RAW_NAMES, (raw_alpha, raw_beta, raw_gamma)):
            value = np.array(value, dtype=np.float64).reshape(-1)
            if value.size != size:
                raise ConfigurationError(f"{name} has {value.size} entries; expected {size}.")
            self.raw[name] = value
        if enhancement_mask is None:
            enhancement_mask = np.zeros(self.layers, dtype=bool)
        self.enhancement_mask = np.array(enhancement_mask, dtype=bool).reshape(-1)
        if self.enhancement_mask.size != self.layers:
            raise ConfigurationError(
                f"Enhancement mask has {self.enhancement_mask.size} entries for "
                f"{self.layers} layers."
            )

    @classmethod
    def initial(
        cls,
        layers: int,
        shared: bool = False,
        enhancement_mask: typing.Optional[npt.ArrayLike] = None,
        alpha: float = DEFAULT_INIT[0],
        beta: float = DEFAULT_INIT[1],
        gamma: float = DEFAULT_INIT[2],
    ) -> "UnrollParams":
        """Parameters whose effective values are (alpha, beta, gamma) in
        every layer."""
        size = 1 if shared else layers
        raws = [np.full(size, inverse_softplus(v)) for v in (alpha, beta, gamma)]
        return cls(*raws, layers=layers, shared=shared, enhancement_mask=enhancement_mask)

    def effective(self) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Effective (alpha, beta, gamma) per layer, each of length T."""
        return typing.cast(
            typing.Tuple[np.ndarray, np.ndarray, np.ndarray],
            tuple(
                np.broadcast_to(softplus(self.raw[name]), (self.layers,)).copy()
                for name in _RAW_NAMES
            ),
        )


class UnrollModel:
    """A trainable model: unrolled parameters plus optional autoencoder.

    Parameters
    ----------
    kind : `ModelKind`
        Model family.
    params : `UnrollParams`
        Per-layer parameters.
    vae : `VaeParams`, optional
        Autoencoder weights; required when a layer is enhanced.
    eta : `float`
        Binarization threshold used by the autoencoder.
    """

    def __init__(
        self,
        kind: ModelKind,
        params: UnrollParams,
        vae: typing.Optional[VaeParams] = None,
        eta: float = graph_core.DEFAULT_ETA,
    ) -> None:
        self.kind = ModelKind(kind)
        self.params = params
        self.vae = vae
        self.eta = eta
        if params.enhancement_mask.any() and vae is None:
            raise ConfigurationError("Enhanced layers need autoencoder weights.")

    @property
    def layers(self) -> int:
        return self.params.layers

    @property
    def num_nodes(self) -> typing.Optional[int]:
        """Graph size the model is bound to; `None` if any size works."""
        return None if self.vae is None else self.vae.dims.num_nodes

    def arrays(self) -> typing.Dict[str, np.ndarray]:
        """All trainable arrays by name, in a fixed order."""
        arrays = {name: self.params.raw[name] for name in _RAW_NAMES}
        if self.vae is not None:
            for name, value in self.vae.arrays.items():
                arrays[_VAE_PREFIX + name] = value
        return arrays

    def with_arrays(self, arrays: typing.Mapping[str, npt.ArrayLike]) -> "UnrollModel":
        """Copy of the model holding the given trainable arrays."""
        params = UnrollParams(
            *(np.array(arrays[name], dtype=np.float64) for name in _RAW_NAMES),
            layers=self.params.layers,
            shared=self.params.shared,
            enhancement_mask=self.params.enhancement_mask,
        )
        vae = None
        if self.vae is not None:
            vae = VaeParams(
                self.vae.dims,
                {
                    name: np.array(arrays[_VAE_PREFIX + name], dtype=np.float64)
                    for name in self.vae.arrays
                },
            )
        return UnrollModel(self.kind, params, vae, self.eta)


def enhancement_mask(layers: int, spec: typing.Union[str, typing.Sequence[int]]) -> np.ndarray:
    """Boolean mask from ``"last"``, ``"none"``, ``"all"`` or 1-based
    layer numbers."""
    mask = np.zeros(layers, dtype=bool)
    if isinstance(spec, str):
        if spec == "last":
            mask[-1] = True
        elif spec == "all":
            mask[:] = True
        elif spec != "none":
            return enhancement_mask(layers, [int(s) for s in spec.split(",")])
        return mask
    for layer in spec:
        if not 1 <= layer <= layers:
            raise ConfigurationError(f"Layer {layer} is not in 1..{layers}.")
        mask[layer - 1] = True
    return mask


def build_model(
    kind: ModelKind,
    layers: int = DEFAULT_LAYERS,
    num_nodes: typing.Optional[int] = None,
    enhance: typing.Union[str, typing.Sequence[int]] = "last",
    vae_dims: typing.Optional[typing.Dict[str, int]] = None,
    seed: int = 0,
    init: typing.Tuple[float, float, float] = DEFAULT_INIT,
    eta: float = graph_core.DEFAULT_ETA,
) -> UnrollModel:
    """Create a fresh model.

    Parameters
    ----------
    kind : `ModelKind`
        `ModelKind.UNROLL` (per-layer parameters, no autoencoder),
        `ModelKind.RECURRENT` (shared parameters, no autoencoder) or
        `ModelKind.L2G` (per-layer parameters, autoencoder at the layers
        selected by ``enhance``).
    layers : `int`
        Number of layers T.
    num_nodes : `int`, optional
        Graph size; required for `ModelKind.L2G`.
    enhance : `str` or `list` [`int`]
        Enhancement placement of `ModelKind.L2G`, see `enhancement_mask`.
    vae_dims : `dict`, optional
        Overrides of the `VaeDims` widths.
    seed : `int`
        Seed of the autoencoder initialization.
    init : `tuple` [`float`]
        Initial effective (alpha, beta, gamma), e.g. tuned solver values.
    eta : `float`
        Binarization threshold.
    """
    kind = ModelKind(kind)
    mask = np.zeros(layers, dtype=bool)
    vae = None
    if kind == ModelKind.L2G:
        if num_nodes is None:
            raise ConfigurationError("An l2g model needs the number of nodes.")
        mask = enhancement_mask(layers, enhance)
        dims = VaeDims(num_nodes, **(vae_dims or {}))
        vae = VaeParams.initial(dims, np.random.default_rng(seed))
    params = UnrollParams.initial(
        layers,
        shared=kind == ModelKind.RECURRENT,
        enhancement_mask=mask,
        alpha=init[0],
        beta=init[1],
        gamma=init[2],
    )
    return UnrollModel(kind, params, vae, eta)


class ForwardTrace:
    """Everything a forward pass produced.

    Attributes
    ----------
    w_layers : `list` [`Variable`]
        Primal iterates w(1) ... w(T); the last one is the estimate.
    r1_layers : `list` [`Variable`]
        Primal forward steps of every layer.
    v_layers : `list` [`Variable`]
        Dual iterates of every layer.
    latent_stats : `dict` [`int`, `LatentStats`]
        Posterior statistics of the enhanced layers, by 0-based layer.
    tape : `Tape`
        The tape the pass ran on.
    leaves : `dict` [`str`, `Variable`]
        Trainable arrays as tape leaves, named as in
        `UnrollModel.arrays`.
    """

    def __init__(self, tp: Tape, leaves: typing.Dict[str, Variable]) -> None:
        self.tape = tp
        self.leaves = leaves
        self.w_layers: typing.List[Variable] = []
        self.r1_layers: typing.List[Variable] = []
        self.v_layers: typing.List[Variable] = []
        self.latent_stats: typing.Dict[int, LatentStats] = {}

    @property
    def estimate(self) -> np.ndarray:
        """Final estimate, projected onto w >= 0."""
        return prox_nonneg(self.w_layers[-1].value)

    def layer_estimates(self) -> typing.List[np.ndarray]:
        return [prox_nonneg(w.value) for w in self.w_layers]


def _dual_prox(r: Variable, alpha: Variable, gamma: Variable) -> Variable:
    s = np.sqrt(r.value * r.value + 4.0 * alpha.value * gamma.value)

    def vjp(g: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            0.5 * g * (1.0 - r.value / s),
            -(g * gamma.value / s).sum(),
            -(g * alpha.value / s).sum(),
        )

    value = prox_dual_logbarrier(r.value, alpha.value, gamma.value)
    return r.tape.apply(value, (r, alpha, gamma), vjp)


def forward(
    y: npt.ArrayLike,
    model: UnrollModel,
    groundtruth_w: typing.Optional[npt.ArrayLike] = None,
    mode: RunMode = RunMode.INFER,
    record: bool = False,
    noise: typing.Optional[typing.Mapping[int, npt.ArrayLike]] = None,
) -> ForwardTrace:
    """Run the unrolled network.

    Parameters
    ----------
    y : `numpy.ndarray`
        Squared pairwise distances.
    model : `UnrollModel`
        The model.
    groundtruth_w : `numpy.ndarray`, optional
        Groundtruth edge vector; required in training when a layer is
        enhanced, forbidden in inference.
    mode : `RunMode`
        Training or inference.
    record : `bool`
        Record the pass so that `gradients` can be called.
    noise : `dict` [`int`, `numpy.ndarray`], optional
        Standard normal latent draws by 0-based enhanced layer; the latent
        code is deterministic where none is given.

    Returns
    -------
    trace : `ForwardTrace`
        Iterates of every layer.

    Raises
    ------
    ContractError
        If the groundtruth presence does not match the mode.
    DataError
        If the model is bound to another graph size.
    NumericError
        If a layer produces non-finite values.
    """
    mode = RunMode(mode)
    y = np.asarray(y, dtype=np.float64)
    m = graph_core.num_nodes_from_length(y.size)
    params = model.params
    enhanced = params.enhancement_mask.any()
    if mode == RunMode.INFER and groundtruth_w is not None:
        raise ContractError("Inference mode does not accept a groundtruth.")
    if mode == RunMode.TRAIN and enhanced and groundtruth_w is None:
        raise ContractError("Training an enhanced model needs the groundtruth.")
    if model.num_nodes is not None and model.num_nodes != m:
        raise DataError(f"Model is bound to {model.num_nodes} nodes; input has {m}.")
    noise = noise or {}

    tp = Tape(record=record)
    leaves = {name: tp.variable(params.raw[name], name=name) for name in _RAW_NAMES}
    vae_weights: typing.Dict[str, Variable] = {}
    if model.vae is not None:
        vae_weights = model.vae.bind(tp)
        leaves.update({_VAE_PREFIX + name: var for name, var in vae_weights.items()})
    trace = ForwardTrace(tp, leaves)

    alphas = tape.softplus(leaves["raw_alpha"])
    betas = tape.softplus(leaves["raw_beta"])
    gammas = tape.softplus(leaves["raw_gamma"])
    groundtruth_A = None
    if mode == RunMode.TRAIN and enhanced:
        groundtruth_A = graph_core.binarize(groundtruth_w, model.eta)
    two_y = 2.0 * y

    w = tp.constant(np.zeros_like(y))
    v = tp.constant(np.zeros(m))
    for t in range(params.layers):
        index = 0 if params.shared else t
        a, b, g = alphas[index], betas[index], gammas[index]
        r1 = w - g * (2.0 * b * w + two_y + tape.degree_t(v))
        r2 = v + g * tape.degree(w)
        if params.enhancement_mask[t]:
            p1, stats = enhance(
                r1, mode, vae_weights, groundtruth_A, noise.get(t), model.eta
            )
            if stats is not None:
                trace.latent_stats[t] = stats
        else:
            p1 = tape.relu(r1)
        p2 = _dual_prox(r2, a, g)
        q1 = p1 - g * (2.0 * b * p1 + two_y + tape.degree_t(p2))
        q2 = p2 + g * tape.degree(p1)
        w = w - r1 + q1
        v = v - r2 + q2
        if not (np.all(np.isfinite(w.value)) and np.all(np.isfinite(v.value))):
            raise NumericError("Non-finite iterate in the unrolled network", layer=t + 1)
        trace.r1_layers.append(r1)
        trace.w_layers.append(w)
        trace.v_layers.append(v)
    return trace


def loss(
    trace: ForwardTrace,
    w: npt.ArrayLike,
    tau: float = 0.9,
    beta_kl: float = 1.0,
) -> Variable:
    """Discounted training loss

        sum_t tau^(T-t) ||w(t) - w||^2 / ||w||^2 + beta_kl * sum KL

    with KL terms from the enhanced layers only.

    Raises
    ------
    ValidationError
        If ``w`` is zero or does not match the trace.
    """
    w = np.asarray(w, dtype=np.float64)
    norm = float(np.dot(w, w))
    if norm == 0.0:
        raise ValidationError("Loss of a zero groundtruth is undefined.")
    if w.shape != trace.w_layers[-1].shape:
        raise ValidationError(f"Groundtruth shape {w.shape} does not match the trace.")
    num_layers = len(trace.w_layers)
    total = None
    for t, w_t in enumerate(trace.w_layers, start=1):
        term = (tau ** (num_layers - t) / norm) * tape.sum(tape.square(w_t - w))
        total = term if total is None else total + term
    assert total is not None
    for stats in trace.latent_stats.values():
        total = total + beta_kl * kl_divergence(stats)
    return total


def gradients(trace: ForwardTrace, loss_value: Variable) -> typing.Dict[str, np.ndarray]:
    """Gradient of a loss with respect to every trainable array.

    Raises
    ------
    ContractError
        If the forward pass was not recorded.
    """
    names = list(trace.leaves)
    grads = trace.tape.gradients(loss_value, [trace.leaves[n] for n in names])
    return dict(zip(names, grads))


def infer(
    y: npt.ArrayLike,
    model: UnrollModel,
    samples: int = 0,
    rng: typing.Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Estimate a graph with a trained model.

    With ``samples`` > 0 the latent codes of enhanced layers are drawn
    from the prior and the mean of ``samples`` estimates is returned;
    otherwise the prior mean is used.
    """
    if samples <= 0 or model.vae is None:
        return forward(y, model).estimate
    rng = rng or np.random.default_rng(0)
    layers = np.flatnonzero(model.params.enhancement_mask)
    nlatent = model.vae.dims.nlatent
    estimates = [
        forward(y, model, noise={int(t): rng.standard_normal(nlatent) for t in layers}).estimate
        for _ in range(samples)
    ]
    return np.mean(estimates, axis=0)


class Checkpoint:
    """A model with its training provenance.

    Parameters
    ----------
    model : `UnrollModel`
        The model.
    train_config : `dict`
        Training configuration the model was produced with.
    epoch : `int`
        Epoch the model was selected at; -1 for the initial model.
    val_gmse : `float` or `None`
        Validation GMSE at selection.
    """

    schema_name = "checkpoint_manifest"

    def __init__(
        self,
        model: UnrollModel,
        train_config: typing.Dict[str, typing.Any],
        epoch: int = -1,
        val_gmse: typing.Optional[float] = None,
    ) -> None:
        self.model = model
        self.train_config = train_config
        self.epoch = epoch
        self.val_gmse = val_gmse

    def manifest(self) -> typing.Dict[str, typing.Any]:
        model = self.model
        return dict(
            format_version=FORMAT_VERSION,
            kind="checkpoint",
            model_kind=model.kind.value,
            layers=model.layers,
            num_nodes=model.num_nodes,
            shared=model.params.shared,
            enhancement_mask=model.params.enhancement_mask.tolist(),
            vae_dims=None if model.vae is None else model.vae.dims.as_dict(),
            train_config=self.train_config,
            train_config_digest=config_digest(self.train_config),
            epoch=self.epoch,
            val_gmse=self.val_gmse,
        )

    def save(self, path: typing.Union[str, pathlib.Path]) -> pathlib.Path:
        return save_container(path, self.manifest(), self.model.arrays(), self.schema_name)

    @classmethod
    def load(cls, path: typing.Union[str, pathlib.Path]) -> "Checkpoint":
        """Read a checkpoint written by `save`.

        Raises
        ------
        DataError
            If the container is unreadable or inconsistent.
        """
        manifest, arrays = load_container(path, cls.schema_name)
        if config_digest(manifest["train_config"]) != manifest["train_config_digest"]:
            raise DataError(f"Training config digest mismatch in {str(path)!r}.")
        try:
            params = UnrollParams(
                *(arrays[name] for name in _RAW_NAMES),
                layers=manifest["layers"],
                shared=manifest["shared"],
                enhancement_mask=manifest["enhancement_mask"],
            )
            vae = None
            if manifest["vae_dims"] is not None:
                dims = VaeDims.from_dict(manifest["vae_dims"])
                vae = VaeParams(
                    dims,
                    {
                        name[len(_VAE_PREFIX):]: value
                        for name, value in arrays.items()
                        if name.startswith(_VAE_PREFIX)
                    },
                )
            model = UnrollModel(
                ModelKind(manifest["model_kind"]),
                params,
                vae,
                manifest["train_config"].get("eta", graph_core.DEFAULT_ETA),
            )
        except (KeyError, ConfigurationError) as e:
            raise DataError(f"Inconsistent checkpoint {str(path)!r}: {e}") from e
        return cls(model, manifest["train_config"], manifest["epoch"], manifest["val_gmse"])
