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

import json
import logging
import pathlib
import tempfile
import unittest

import numpy as np
import pytest
import topolearn

logging.basicConfig(
    format="%(asctime)s:%(levelname)s:%(name)s:%(message)s", level=logging.DEBUG
)


class AdamTestCase(unittest.TestCase):
    def test_first_step(self) -> None:
        params = {"a": np.array([1.0, -2.0])}
        grads = {"a": np.array([0.5, -3.0])}
        state = topolearn.AdamState()
        new_params, new_state = topolearn.adam_step(params, grads, state, lr=0.1)
        # Bias correction makes the first step lr * sign(g).
        np.testing.assert_allclose(new_params["a"], [0.9, -1.9], atol=1e-6)
        assert new_state.step == 1
        assert state.step == 0
        np.testing.assert_allclose(new_state.m["a"], [0.05, -0.3])
        np.testing.assert_array_equal(params["a"], [1.0, -2.0])

    def test_second_step(self) -> None:
        params = {"a": np.array([0.0])}
        state = topolearn.AdamState()
        params, state = topolearn.adam_step(params, {"a": np.array([1.0])}, state, lr=0.1)
        params, state = topolearn.adam_step(params, {"a": np.array([1.0])}, state, lr=0.1)
        np.testing.assert_allclose(params["a"], [-0.2], atol=1e-6)
        assert state.step == 2

    def test_non_finite_gradient(self) -> None:
        with pytest.raises(topolearn.NumericError):
            topolearn.adam_step(
                {"a": np.zeros(2)}, {"a": np.array([1.0, np.nan])}, topolearn.AdamState(), 0.1
            )


class TrainConfigTestCase(unittest.TestCase):
    def test_defaults(self) -> None:
        config = topolearn.TrainConfig()
        assert (config.tau, config.beta_kl, config.epochs, config.patience) == (0.9, 1.0, 200, 20)
        assert config.learning_rate(0) == 1e-2
        assert config.learning_rate(2) == pytest.approx(1e-2 * 0.95**2)
        assert topolearn.TrainConfig.from_dict(config.as_dict()).as_dict() == config.as_dict()
        assert config.digest() == topolearn.TrainConfig().digest()
        assert config.digest() != topolearn.TrainConfig(seed=1).digest()

    def test_invalid(self) -> None:
        for kwargs in (dict(tau=0.0), dict(lr_decay=1.5), dict(batch_size=0), dict(lr0=-1.0)):
            with pytest.raises(topolearn.ConfigurationError):
                topolearn.TrainConfig(**kwargs)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.TrainConfig.from_dict(dict(topolearn.TrainConfig().as_dict(), extra=1))


class TrainerTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.train_set = [topolearn.audit_sample(num_nodes=6, seed=seed) for seed in range(6)]
        self.val_set = [topolearn.audit_sample(num_nodes=6, seed=seed) for seed in range(10, 13)]
        self.config = topolearn.TrainConfig(lr0=0.05, batch_size=2, epochs=3, patience=10, seed=7)

    def run_training(self, threads: int = 1) -> topolearn.TrainResult:
        model = topolearn.build_model("unroll", layers=3)
        return topolearn.train(
            self.train_set, self.val_set, model, self.config, threads=threads, audit=False
        )

    def test_batch_gradient_is_sum(self) -> None:
        model = topolearn.build_model("l2g", layers=2, num_nodes=6, vae_dims=topolearn.AUDIT_VAE_DIMS)
        trainer = topolearn.Trainer(model, self.config, threads=2)
        indices = np.array([4, 1, 3])
        losses, total = trainer.batch_gradients(model, self.train_set, indices, epoch=5)
        assert len(losses) == 3
        expected = {name: np.zeros_like(value) for name, value in model.arrays().items()}
        for index in indices:
            noise = {
                1: np.random.default_rng(
                    np.random.SeedSequence([self.config.seed, 5, int(index)])
                ).standard_normal(2)
            }
            _, grads = topolearn.sample_gradients(model, self.train_set[index], self.config, noise)
            for name in expected:
                expected[name] = expected[name] + grads[name]
        assert set(total) == set(expected)
        for name in expected:
            np.testing.assert_allclose(total[name], expected[name], rtol=1e-12, atol=1e-15)

    def test_history_and_selection(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            log_path = pathlib.Path(tmpdir) / "train_log.jsonl"
            model = topolearn.build_model("unroll", layers=3)
            result = topolearn.Trainer(model, self.config).train(
                self.train_set, self.val_set, log_path, audit=False
            )
            lines = [json.loads(line) for line in log_path.read_text().splitlines()]
        assert [record.epoch for record in result.history] == [-1, 0, 1, 2]
        assert [line["epoch"] for line in lines] == [-1, 0, 1, 2]
        assert lines[0]["train_loss"] is None
        assert all(line["train_loss"] >= 0.0 for line in lines[1:])
        assert lines[1]["lr"] == pytest.approx(0.05)
        vals = [record.val_gmse for record in result.history]
        best = int(np.argmin(vals))
        assert result.checkpoint.epoch == result.history[best].epoch
        assert result.checkpoint.val_gmse == min(vals)
        assert result.audit is None

    def test_deterministic(self) -> None:
        first = self.run_training()
        second = self.run_training()
        threaded = self.run_training(threads=3)
        for other in (second, threaded):
            assert other.checkpoint.epoch == first.checkpoint.epoch
            for name, value in first.checkpoint.model.arrays().items():
                np.testing.assert_array_equal(other.checkpoint.model.arrays()[name], value)
            assert [r.val_gmse for r in other.history] == [r.val_gmse for r in first.history]

    def test_l2g_training(self) -> None:
        model = topolearn.build_model(
            "l2g", layers=2, num_nodes=6, vae_dims=topolearn.AUDIT_VAE_DIMS
        )
        config = topolearn.TrainConfig(batch_size=3, epochs=2, seed=1)
        result = topolearn.train(self.train_set, self.val_set, model, config)
        assert result.audit is not None and result.audit.passed
        assert result.checkpoint.model.kind == topolearn.ModelKind.L2G
        assert len(result.history) == 3

    def test_empty_split(self) -> None:
        model = topolearn.build_model("unroll", layers=2)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.train([], self.val_set, model, self.config, audit=False)
        with pytest.raises(topolearn.ConfigurationError):
            topolearn.train(self.train_set, [], model, self.config, audit=False)


class AuditTestCase(unittest.TestCase):
    def test_step_sweep(self) -> None:
        model = topolearn.build_model("unroll", layers=3)
        sample = topolearn.audit_sample(num_nodes=6, seed=4)
        errors = topolearn.step_sweep(model, sample, steps=(1e-2, 1e-5, 1e-9))
        assert errors[1e-5] < errors[1e-2]
        assert errors[1e-5] < errors[1e-9]

    def test_preflight(self) -> None:
        config = topolearn.TrainConfig(seed=2)
        for model in (
            topolearn.build_model("recurrent", layers=20),
            topolearn.build_model("l2g", layers=20, num_nodes=20),
        ):
            report = topolearn.preflight_audit(model, config)
            assert report.passed
            assert report.as_dict()["passed"]

    def test_audit_model(self) -> None:
        model = topolearn.build_model("l2g", layers=20, num_nodes=20)
        small = topolearn.audit_model(model, num_nodes=6)
        assert small.layers == 3
        assert small.num_nodes == 6
        np.testing.assert_array_equal(small.params.enhancement_mask, [False, False, True])
        assert small.vae.dims.nhid == topolearn.AUDIT_VAE_DIMS["nhid"]
