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

import jsonschema
import pytest
import topolearn

logging.basicConfig(
    format="%(asctime)s:%(levelname)s:%(name)s:%(message)s", level=logging.DEBUG
)


class SchemaRegistryTestCase(unittest.TestCase):
    def test_schemas_are_valid(self) -> None:
        for schema in topolearn.registry.values():
            jsonschema.Draft7Validator.check_schema(schema)

    def test_solver_config_schema(self) -> None:
        validator = jsonschema.Draft7Validator(schema=topolearn.registry["solver_config"])
        # The default configuration, which should pass.
        validator.validate(topolearn.SolverConfig().as_dict())

        # A configuration with a fixed step size, which should pass.
        config = dict(topolearn.SolverConfig().as_dict(), gamma=0.05)
        validator.validate(config)

        # A configuration with a relaxation factor below 1.5, which should fail.
        with pytest.raises(jsonschema.exceptions.ValidationError):
            validator.validate(dict(config, lambda_relax=1.2))

        # A configuration without 'tol', which should fail.
        with pytest.raises(jsonschema.exceptions.ValidationError):
            config_without_tol = dict(config)
            del config_without_tol["tol"]
            validator.validate(config_without_tol)

    def test_train_config_schema(self) -> None:
        validator = jsonschema.Draft7Validator(schema=topolearn.registry["train_config"])
        validator.validate(topolearn.TrainConfig().as_dict())
        with pytest.raises(jsonschema.exceptions.ValidationError):
            validator.validate(dict(topolearn.TrainConfig().as_dict(), tau=1.5))

    def test_dataset_manifest_schema(self) -> None:
        validator = jsonschema.Draft7Validator(schema=topolearn.registry["dataset_manifest"])
        spec = topolearn.GraphFamilySpec("ba", 8, density_interval=(0.0, 1.0))
        dataset = topolearn.build_dataset(spec, 2, n_signals=20)
        validator.validate(dataset.manifest())
        with pytest.raises(jsonschema.exceptions.ValidationError):
            validator.validate(dict(dataset.manifest(), family="lattice"))

    def test_run_config_schema(self) -> None:
        validator = jsonschema.Draft7Validator(schema=topolearn.registry["run_config"])
        validator.validate({"command": "solve", "arguments": {"solver": "pds"}, "version": "1.0"})
        with pytest.raises(jsonschema.exceptions.ValidationError):
            validator.validate({"command": "plot", "arguments": {}, "version": "1.0"})

    def test_validate(self) -> None:
        topolearn.validate({"command": "eval", "arguments": {}, "version": "?"}, "run_config")
        with pytest.raises(topolearn.ValidationError):
            topolearn.validate({"command": "eval"}, "run_config")
