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

__all__ = [
    "AUDIT_VAE_DIMS",
    "TrainConfig",
    "AdamState",
    "EpochRecord",
    "AuditReport",
    "TrainResult",
    "Trainer",
    "adam_step",
    "sample_gradients",
    "finite_diff_audit",
    "step_sweep",
    "audit_model",
    "audit_sample",
    "preflight_audit",
    "train",
]

import json
import logging
import pathlib
import typing

import numpy as np

from . import graph_core
from .batch import map_ordered
from .container import config_digest
from .datagen import GraphSample, gen_signals
from .enums import RunMode
from .errors import ConfigurationError, DataError, NumericError, ValidationError
from .metrics import gmse
from .schema_registry import validate
from .unroll_net import Checkpoint, UnrollModel, build_model, forward, gradients, loss

# Layer widths of the models built for gradient audits.
AUDIT_VAE_DIMS = dict(nhid=4, nhid2=8, nlatent=2, emb_out=4)
# Gradients smaller than this are compared in absolute terms.
AUDIT_FLOOR = 1e-3


class _Pair(typing.Protocol):
    y: np.ndarray
    w: np.ndarray


class TrainConfig:
    """Settings of end-to-end training.

    Parameters
    ----------
    lr0 : `float`
        Learning rate of epoch 0.
    lr_decay : `float`
        Per-epoch learning rate factor, in (0, 1].
    batch_size : `int`
        Samples per Adam step.
    epochs : `int`
        Maximum number of epochs.
    patience : `int`
        Stop after this many epochs without a better validation GMSE.
    tau : `float`
        Loss discount of earlier layers, in (0, 1].
    beta_kl : `float`
        Weight of the KL terms.
    seed : `int`
        Seed of shuffling and latent noise.
    adam_beta1, adam_beta2, adam_eps : `float`
        Adam settings.
    eta : `float`
        Binarization threshold of the autoencoder.

    Raises
    ------
    ConfigurationError
        If a value is out of range.
    """

    def __init__(
        self,
        lr0: float = 1e-2,
        lr_decay: float = 0.95,
        batch_size: int = 32,
        epochs: int = 200,
        patience: int = 20,
        tau: float = 0.9,
        beta_kl: float = 1.0,
        seed: int = 0,
        adam_beta1: float = 0.9,
        adam_beta2: float = 0.999,
        adam_eps: float = 1e-8,
        eta: float = graph_core.DEFAULT_ETA,
    ) -> None:
        self.lr0 = float(lr0)
        self.lr_decay = float(lr_decay)
        self.batch_size = int(batch_size)
        self.epochs = int(epochs)
        self.patience = int(patience)
        self.tau = float(tau)
        self.beta_kl = float(beta_kl)
        self.seed = int(seed)
        self.adam_beta1 = float(adam_beta1)
        self.adam_beta2 = float(adam_beta2)
        self.adam_eps = float(adam_eps)
        self.eta = float(eta)
        try:
            validate(self.as_dict(), "train_config")
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e

    def learning_rate(self, epoch: int) -> float:
        """lr0 * lr_decay ** epoch."""
        return self.lr0 * self.lr_decay**epoch

    def digest(self) -> str:
        return config_digest(self.as_dict())

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(
            lr0=self.lr0,
            lr_decay=self.lr_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            patience=self.patience,
            tau=self.tau,
            beta_kl=self.beta_kl,
            seed=self.seed,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            eta=self.eta,
        )

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "TrainConfig":
        try:
            validate(data, "train_config")
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e
        return cls(**data)


class AdamState:
    """First and second moment estimates and the step count."""

    def __init__(
        self,
        step: int = 0,
        m: typing.Optional[typing.Dict[str, np.ndarray]] = None,
        v: typing.Optional[typing.Dict[str, np.ndarray]] = None,
    ) -> None:
        self.step = step
        self.m = m or {}
        self.v = v or {}


def adam_step(
    params: typing.Mapping[str, np.ndarray],
    grads: typing.Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> typing.Tuple[typing.Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Parameters
    ----------
    params, grads : `dict` [`str`, `numpy.ndarray`]
        Parameters and their gradients, by name.
    state : `AdamState`
        Moments before the step; not modified.
    lr : `float`
        Learning rate.
    beta1, beta2, eps : `float`
        Adam settings.

    Returns
    -------
    params : `dict` [`str`, `numpy.ndarray`]
        Updated parameters.
    state : `AdamState`
        Moments after the step.

    Raises
    ------
    NumericError
        If a gradient has non-finite entries.
    """
    bad = [name for name in params if not np.all(np.isfinite(grads[name]))]
    if bad:
        raise NumericError(f"Non-finite gradient of {', '.join(bad)} at step {state.step + 1}")
    step = state.step + 1
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = beta1 * state.m.get(name, np.zeros_like(value)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(value)) + (1.0 - beta2) * (g * g)
        new_params[name] = value - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step, new_m, new_v)


class EpochRecord:
    """One line of the training log."""

    def __init__(self, epoch: int, lr: float, train_loss: float, val_gmse: float) -> None:
        self.epoch = epoch
        self.lr = lr
        self.train_loss = train_loss
        self.val_gmse = val_gmse

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(
            epoch=self.epoch, lr=self.lr, train_loss=self.train_loss, val_gmse=self.val_gmse
        )


def _latent_noise(
    model: UnrollModel, key: typing.Sequence[int]
) -> typing.Optional[typing.Dict[int, np.ndarray]]:
    if model.vae is None:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(list(key)))
    return {
        int(t): rng.standard_normal(model.vae.dims.nlatent)
        for t in np.flatnonzero(model.params.enhancement_mask)
    }


def sample_gradients(
    model: UnrollModel,
    sample: _Pair,
    config: TrainConfig,
    noise: typing.Optional[typing.Mapping[int, np.ndarray]] = None,
) -> typing.Tuple[float, typing.Dict[str, np.ndarray]]:
    """Training loss of one sample and its gradient."""
    trace = forward(sample.y, model, sample.w, RunMode.TRAIN, record=True, noise=noise)
    value = loss(trace, sample.w, config.tau, config.beta_kl)
    return float(value.value), gradients(trace, value)


def _loss_only(
    model: UnrollModel,
    sample: _Pair,
    config: TrainConfig,
    noise: typing.Optional[typing.Mapping[int, np.ndarray]],
) -> float:
    trace = forward(sample.y, model, sample.w, RunMode.TRAIN, noise=noise)
    return float(loss(trace, sample.w, config.tau, config.beta_kl).value)


class AuditReport:
    """Comparison of analytic and central-difference gradients.

    Attributes
    ----------
    step : `float`
        Finite-difference step.
    tolerance : `float`
        Largest accepted relative error.
    errors : `dict` [`str`, `float`]
        Largest relative error per parameter array.
    rechecked : `int`
        Entries re-evaluated with smaller steps because the first
        difference straddled a kink.
    """

    def __init__(
        self, step: float, tolerance: float, errors: typing.Dict[str, float], rechecked: int
    ) -> None:
        self.step = step
        self.tolerance = tolerance
        self.errors = errors
        self.rechecked = rechecked

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(
            step=self.step,
            tolerance=self.tolerance,
            max_rel_error=self.max_rel_error,
            passed=self.passed,
            rechecked=self.rechecked,
            errors=self.errors,
        )


GradientFunction = typing.Callable[
    [UnrollModel, _Pair, TrainConfig, typing.Optional[typing.Mapping[int, np.ndarray]]],
    typing.Tuple[float, typing.Dict[str, np.ndarray]],
]


def finite_diff_audit(
    model: UnrollModel,
    sample: _Pair,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    config: typing.Optional[TrainConfig] = None,
    seed: int = 0,
    gradient_fn: GradientFunction = sample_gradients,
    recheck: bool = True,
) -> AuditReport:
    """Compare every analytic gradient entry with a central difference.

    The relative error of an entry is |a - n| / max(|a|, |n|, 1e-3). With
    ``recheck`` an entry that fails is re-evaluated with steps ten and a
    hundred times smaller and keeps the smallest error, which avoids
    false alarms where a difference straddles a ReLU kink or a
    binarization threshold.

    Parameters
    ----------
    model : `UnrollModel`
        A small model (m <= 8, T <= 3).
    sample : `GraphSample`
        Sample with ``y`` and ``w``.
    step : `float`
        Finite-difference step.
    tolerance : `float`
        Largest accepted relative error.
    config : `TrainConfig`, optional
        Source of tau and beta_kl.
    seed : `int`
        Seed of the latent noise, held fixed across evaluations.
    gradient_fn : callable
        Analytic gradient under test.
    recheck : `bool`
        Re-evaluate failing entries with smaller steps.

    Returns
    -------
    report : `AuditReport`
        Per-array errors.
    """
    config = config or TrainConfig()
    noise = _latent_noise(model, [seed])
    _, analytic = gradient_fn(model, sample, config, noise)
    base = model.arrays()
    errors: typing.Dict[str, float] = {}
    rechecked = 0

    def central(name: str, index: typing.Tuple[int, ...], h: float) -> float:
        values = []
        for sign in (1.0, -1.0):
            arrays = {key: value.copy() for key, value in base.items()}
            arrays[name][index] += sign * h
            values.append(_loss_only(model.with_arrays(arrays), sample, config, noise))
        return (values[0] - values[1]) / (2.0 * h)

    def rel_error(a: float, n: float) -> float:
        return abs(a - n) / max(abs(a), abs(n), AUDIT_FLOOR)

    for name, value in base.items():
        worst = 0.0
        for index in np.ndindex(value.shape):
            a = float(analytic[name][index])
            error = rel_error(a, central(name, index, step))
            if error > tolerance and recheck:
                rechecked += 1
                for h in (step / 10.0, step / 100.0):
                    error = min(error, rel_error(a, central(name, index, h)))
            worst = max(worst, error)
        errors[name] = worst
    return AuditReport(step, tolerance, errors, rechecked)


def step_sweep(
    model: UnrollModel,
    sample: _Pair,
    steps: typing.Sequence[float] = (1e-4, 1e-5, 1e-6),
    config: typing.Optional[TrainConfig] = None,
    seed: int = 0,
) -> typing.Dict[float, float]:
    """Largest relative gradient error for each finite-difference step,
    without rechecks."""
    return {
        h: finite_diff_audit(model, sample, h, np.inf, config, seed, recheck=False).max_rel_error
        for h in steps
    }


def audit_model(model: UnrollModel, num_nodes: int = 6, seed: int = 0) -> UnrollModel:
    """A small fresh model of the same kind and enhancement placement."""
    layers = min(3, model.layers)
    mask = model.params.enhancement_mask
    enhance = "last" if mask[-1] else ("all" if mask.any() else "none")
    return build_model(
        model.kind,
        layers=layers,
        num_nodes=num_nodes,
        enhance=enhance,
        vae_dims=AUDIT_VAE_DIMS,
        seed=seed,
        eta=model.eta,
    )


def audit_sample(num_nodes: int = 6, seed: int = 0) -> GraphSample:
    """A random weighted graph with smooth signals for gradient audits;
    distances are scaled to unit mean."""
    rng = np.random.default_rng(seed)
    k = graph_core.num_edges(num_nodes)
    w = rng.uniform(0.5, 1.5, k) * (rng.random(k) < 0.5)
    w[0] = 1.0
    X = gen_signals(w, 50, 0.5, rng)
    y = graph_core.pairwise_sq_dist(X)
    return GraphSample(w, y / y.mean(), "audit", seed, 50, 0.5)


def preflight_audit(
    model: UnrollModel,
    config: TrainConfig,
    tolerance: float = 1e-4,
    log: typing.Optional[logging.Logger] = None,
) -> AuditReport:
    """Audit a small model of the same kind before a long training job.

    Raises
    ------
    NumericError
        If the audit fails.
    """
    small = audit_model(model, seed=config.seed)
    report = finite_diff_audit(
        small, audit_sample(seed=config.seed), tolerance=tolerance, config=config, seed=config.seed
    )
    if log is not None:
        log.info(
            f"Gradient audit: max relative error {report.max_rel_error:.3g} "
            f"({report.rechecked} entries rechecked)."
        )
    if not report.passed:
        worst = max(report.errors, key=lambda name: report.errors[name])
        raise NumericError(
            f"Gradient audit failed: relative error {report.max_rel_error:.3g} in {worst}"
        )
    return report


class TrainResult:
    """Selected checkpoint, per-epoch history and pre-flight audit."""

    def __init__(
        self,
        checkpoint: Checkpoint,
        history: typing.List[EpochRecord],
        audit: typing.Optional[AuditReport],
    ) -> None:
        self.checkpoint = checkpoint
        self.history = history
        self.audit = audit


class Trainer:
    """Adam training of an unrolled model with validation selection.

    Parameters
    ----------
    model : `UnrollModel`
        Initial model.
    config : `TrainConfig`
        Settings.
    threads : `int`
        Worker cap for per-sample gradients within a batch.
    log : `logging.Logger`, optional
        Parent logger.
    """

    def __init__(
        self,
        model: UnrollModel,
        config: TrainConfig,
        threads: int = 1,
        log: typing.Optional[logging.Logger] = None,
    ) -> None:
        self.model = model
        self.config = config
        self.threads = threads
        if log is None:
            self.log = logging.getLogger(type(self).__name__)
        else:
            self.log = log.getChild(type(self).__name__)

    def validate(self, model: UnrollModel, samples: typing.Sequence[_Pair]) -> float:
        """GMSE of the final-layer inference estimates."""
        estimates = map_ordered(lambda s: forward(s.y, model).estimate, samples, self.threads)
        return gmse(estimates, [s.w for s in samples])

    def batch_gradients(
        self,
        model: UnrollModel,
        samples: typing.Sequence[_Pair],
        indices: np.ndarray,
        epoch: int,
    ) -> typing.Tuple[typing.List[float], typing.Dict[str, np.ndarray]]:
        """Per-sample losses and the summed gradient of the samples at
        ``indices``; latent noise is keyed by (seed, epoch, index)."""

        def one(index: int) -> typing.Tuple[float, typing.Dict[str, np.ndarray]]:
            noise = _latent_noise(model, [self.config.seed, epoch, int(index)])
            return sample_gradients(model, samples[index], self.config, noise)

        results = map_ordered(one, indices.tolist(), self.threads)
        losses = [value for value, _ in results]
        bad = [int(i) for i, value in zip(indices, losses) if not np.isfinite(value)]
        if bad:
            raise NumericError(f"Non-finite training loss for samples {bad} in epoch {epoch}")
        # Fixed summation order keeps the result reproducible.
        total = {name: np.zeros_like(value) for name, value in model.arrays().items()}
        for _, grads in results:
            for name in total:
                total[name] = total[name] + grads[name]
        return losses, total

    def train(
        self,
        train_set: typing.Sequence[_Pair],
        val_set: typing.Sequence[_Pair],
        log_path: typing.Optional[typing.Union[str, pathlib.Path]] = None,
        audit: bool = True,
    ) -> TrainResult:
        """Train and return the checkpoint of lowest validation GMSE.

        Epoch e shuffles the training set with a generator keyed by
        (seed, e) and uses learning rate lr0 * lr_decay ** e. Training
        stops after ``epochs`` epochs, or after ``patience`` epochs without
        improvement. The initial model is logged as epoch -1 and competes
        in the selection.

        Parameters
        ----------
        train_set, val_set : `list` [`GraphSample`]
            Training and validation samples.
        log_path : `str` or `pathlib.Path`, optional
            Line-delimited JSON training log.
        audit : `bool`
            Run `preflight_audit` first.

        Raises
        ------
        ConfigurationError
            If a split is empty.
        NumericError
            If the audit fails or a loss or gradient is non-finite.
        """
        if len(train_set) == 0 or len(val_set) == 0:
            raise ConfigurationError("Training and validation sets must be nonempty.")
        config = self.config
        report = preflight_audit(self.model, config, log=self.log) if audit else None

        model = self.model
        state = AdamState()
        best_val = self.validate(model, val_set)
        best = Checkpoint(model, config.as_dict(), -1, best_val)
        history = [EpochRecord(-1, 0.0, float("nan"), best_val)]
        self.log.info(f"Initial validation GMSE {best_val:.5f}.")
        log_file = None
        try:
            if log_path is not None:
                log_file = open(log_path, "w")
                self._write_record(log_file, history[0])
            for epoch in range(config.epochs):
                lr = config.learning_rate(epoch)
                rng = np.random.Generator(
                    np.random.Philox(np.random.SeedSequence([config.seed, epoch]))
                )
                order = rng.permutation(len(train_set))
                epoch_losses: typing.List[float] = []
                for start in range(0, len(order), config.batch_size):
                    indices = order[start : start + config.batch_size]
                    losses, grads = self.batch_gradients(model, train_set, indices, epoch)
                    epoch_losses.extend(losses)
                    arrays, state = adam_step(
                        model.arrays(),
                        grads,
                        state,
                        lr,
                        config.adam_beta1,
                        config.adam_beta2,
                        config.adam_eps,
                    )
                    model = model.with_arrays(arrays)
                val = self.validate(model, val_set)
                record = EpochRecord(epoch, lr, float(np.mean(epoch_losses)), val)
                history.append(record)
                if log_file is not None:
                    self._write_record(log_file, record)
                self.log.info(
                    f"Epoch {epoch}: lr={lr:.4g} train_loss={record.train_loss:.5f} "
                    f"val_gmse={val:.5f}"
                )
                if val < best_val:
                    best_val = val
                    best = Checkpoint(model, config.as_dict(), epoch, val)
                elif epoch - best.epoch >= config.patience:
                    self.log.info(f"No improvement for {config.patience} epochs; stopping.")
                    break
        except OSError as e:
            raise DataError(f"Could not write training log {str(log_path)!r}: {e}") from e
        finally:
            if log_file is not None:
                log_file.close()
        self.log.info(f"Selected epoch {best.epoch} with validation GMSE {best_val:.5f}.")
        return TrainResult(best, history, report)

    @staticmethod
    def _write_record(log_file: typing.TextIO, record: EpochRecord) -> None:
        data = record.as_dict()
        if not np.isfinite(data["train_loss"]):
            data["train_loss"] = None
        log_file.write(json.dumps(data, sort_keys=True) + "\n")
        log_file.flush()


def train(
    train_set: typing.Sequence[_Pair],
    val_set: typing.Sequence[_Pair],
    model: UnrollModel,
    config: TrainConfig,
    log_path: typing.Optional[typing.Union[str, pathlib.Path]] = None,
    threads: int = 1,
    audit: bool = True,
) -> TrainResult:
    """Train ``model``; see `Trainer.train`."""
    return Trainer(model, config, threads).train(train_set, val_set, log_path, audit)
