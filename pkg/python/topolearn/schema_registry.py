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

__all__ = ["registry", "validate"]

import json
import typing

import jsonschema

from .errors import ValidationError

registry: typing.Dict[str, typing.Any] = {
    "solver_config": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for a classical solver configuration",
  "type": "object",
  "properties": {
    "alpha": {
      "type": "number",
      "exclusiveMinimum": 0
    },
    "beta": {
      "type": "number",
      "minimum": 0
    },
    "gamma": {
      "type": ["number", "null"],
      "exclusiveMinimum": 0
    },
    "tol": {
      "type": "number",
      "exclusiveMinimum": 0
    },
    "max_iter": {
      "type": "integer",
      "minimum": 1
    },
    "lambda_relax": {
      "type": "number",
      "minimum": 1.5,
      "maximum": 2
    }
  },
  "required": ["alpha", "beta", "gamma", "tol", "max_iter", "lambda_relax"],
  "additionalProperties": false
}
        """
    ),
    "train_config": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for an end-to-end training configuration",
  "type": "object",
  "properties": {
    "lr0": {
      "type": "number",
      "exclusiveMinimum": 0
    },
    "lr_decay": {
      "type": "number",
      "exclusiveMinimum": 0,
      "maximum": 1
    },
    "batch_size": {
      "type": "integer",
      "minimum": 1
    },
    "epochs": {
      "type": "integer",
      "minimum": 1
    },
    "patience": {
      "type": "integer",
      "minimum": 1
    },
    "tau": {
      "type": "number",
      "exclusiveMinimum": 0,
      "maximum": 1
    },
    "beta_kl": {
      "type": "number",
      "minimum": 0
    },
    "seed": {
      "type": "integer"
    },
    "adam_beta1": {
      "type": "number",
      "minimum": 0,
      "exclusiveMaximum": 1
    },
    "adam_beta2": {
      "type": "number",
      "minimum": 0,
      "exclusiveMaximum": 1
    },
    "adam_eps": {
      "type": "number",
      "exclusiveMinimum": 0
    },
    "eta": {
      "type": "number",
      "minimum": 0
    }
  },
  "required": [
    "lr0",
    "lr_decay",
    "batch_size",
    "epochs",
    "patience",
    "tau",
    "beta_kl",
    "seed",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "eta"
  ],
  "additionalProperties": false
}
        """
    ),
    "dataset_manifest": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for the manifest of a generated dataset",
  "type": "object",
  "properties": {
    "format_version": {
      "type": "integer"
    },
    "kind": {
      "enum": ["dataset"]
    },
    "family": {
      "enum": ["ba", "er", "sbm", "ws"]
    },
    "num_nodes": {
      "type": "integer",
      "minimum": 2
    },
    "count": {
      "type": "integer",
      "minimum": 0
    },
    "n_signals": {
      "type": "integer",
      "minimum": 1
    },
    "sigma": {
      "type": "number",
      "exclusiveMinimum": 0
    },
    "seed": {
      "type": "integer"
    },
    "split": {
      "type": "string"
    },
    "split_id": {
      "type": "integer",
      "minimum": 0
    },
    "weighting": {
      "enum": ["lognormal", "binary"]
    },
    "family_params": {
      "type": "object"
    },
    "density_interval": {
      "type": "array",
      "minItems": 2,
      "maxItems": 2,
      "items": {
        "type": "number"
      }
    },
    "disconnected": {
      "type": "array",
      "items": {
        "type": "boolean"
      }
    },
    "has_partition": {
      "type": "boolean"
    }
  },
  "required": [
    "format_version",
    "kind",
    "family",
    "num_nodes",
    "count",
    "n_signals",
    "sigma",
    "seed",
    "split",
    "split_id",
    "weighting",
    "family_params",
    "density_interval",
    "disconnected",
    "has_partition"
  ],
  "additionalProperties": false
}
        """
    ),
    "checkpoint_manifest": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for the manifest of a trained model checkpoint",
  "type": "object",
  "properties": {
    "format_version": {
      "type": "integer"
    },
    "kind": {
      "enum": ["checkpoint"]
    },
    "model_kind": {
      "enum": ["unroll", "recurrent", "l2g"]
    },
    "layers": {
      "type": "integer",
      "minimum": 1
    },
    "num_nodes": {
      "type": ["integer", "null"]
    },
    "shared": {
      "type": "boolean"
    },
    "enhancement_mask": {
      "type": "array",
      "items": {
        "type": "boolean"
      }
    },
    "vae_dims": {
      "type": ["object", "null"]
    },
    "train_config": {
      "type": "object"
    },
    "train_config_digest": {
      "type": "string"
    },
    "epoch": {
      "type": "integer",
      "minimum": -1
    },
    "val_gmse": {
      "type": ["number", "null"]
    }
  },
  "required": [
    "format_version",
    "kind",
    "model_kind",
    "layers",
    "num_nodes",
    "shared",
    "enhancement_mask",
    "vae_dims",
    "train_config",
    "train_config_digest",
    "epoch",
    "val_gmse"
  ],
  "additionalProperties": false
}
        """
    ),
    "estimates_manifest": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for the manifest of a set of graph estimates",
  "type": "object",
  "properties": {
    "format_version": {
      "type": "integer"
    },
    "kind": {
      "enum": ["estimates"]
    },
    "source": {
      "type": "string"
    },
    "num_nodes": {
      "type": "integer",
      "minimum": 2
    },
    "count": {
      "type": "integer",
      "minimum": 0
    },
    "config": {
      "type": "object"
    },
    "iterations": {
      "type": "array",
      "items": {
        "type": "integer"
      }
    },
    "gmse": {
      "type": ["number", "null"]
    }
  },
  "required": [
    "format_version",
    "kind",
    "source",
    "num_nodes",
    "count",
    "config",
    "iterations",
    "gmse"
  ],
  "additionalProperties": false
}
        """
    ),
    "run_config": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for the provenance record of a command line run",
  "type": "object",
  "properties": {
    "command": {
      "enum": ["generate", "tune", "solve", "train", "infer", "eval", "compare"]
    },
    "arguments": {
      "type": "object"
    },
    "version": {
      "type": "string"
    }
  },
  "required": ["command", "arguments", "version"],
  "additionalProperties": false
}
        """
    ),
    "eval_report": json.loads(
        """
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "description": "Schema for an evaluation report",
  "type": "object",
  "properties": {
    "source": {
      "type": "string"
    },
    "count": {
      "type": "integer",
      "minimum": 0
    },
    "metrics": {
      "type": "object",
      "additionalProperties": {
        "type": "object",
        "properties": {
          "mean": {
            "type": ["number", "null"]
          },
          "ci95": {
            "type": ["number", "null"]
          },
          "values": {
            "type": "array",
            "items": {
              "type": ["number", "null"]
            }
          }
        },
        "required": ["mean", "ci95", "values"]
      }
    },
    "notes": {
      "type": "array",
      "items": {
        "type": "string"
      }
    }
  },
  "required": ["source", "count", "metrics", "notes"],
  "additionalProperties": false
}
        """
    ),
}


def validate(data: typing.Dict[str, typing.Any], schema_name: str) -> None:
    """Validate a dict against one of the registered schemas.

    Parameters
    ----------
    data : `dict`
        The data to validate.
    schema_name : `str`
        Key of the schema in `registry`.

    Raises
    ------
    ValidationError
        If the data do not conform to the schema.
    """
    validator = jsonschema.Draft7Validator(schema=registry[schema_name])
    try:
        validator.validate(data)
    except jsonschema.exceptions.ValidationError as e:
        raise ValidationError(f"Invalid {schema_name}: {e.message}") from e
