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
    "TopoLearnError",
    "ValidationError",
    "ConfigurationError",
    "ContractError",
    "NumericError",
    "SolverError",
    "MetricError",
    "DataError",
]

import typing


class TopoLearnError(Exception):
    """Base class of all errors raised by topolearn."""


class ValidationError(TopoLearnError, ValueError):
    """An input value has the wrong shape or violates an invariant."""


class ConfigurationError(TopoLearnError, ValueError):
    """A configuration value is invalid or a generator target is
    unreachable."""


class ContractError(TopoLearnError, RuntimeError):
    """An API was used in a way its contract forbids, e.g. asking for
    gradients of an unrecorded computation."""


class NumericError(TopoLearnError, ArithmeticError):
    """A computation produced non-finite values.

    Parameters
    ----------
    message : `str`
        Description of the failure.
    layer : `int`, optional
        Index of the unrolled layer where the failure occurred.
    """

    def __init__(self, message: str, layer: typing.Optional[int] = None) -> None:
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
        self.layer = layer


class SolverError(NumericError):
    """An iterative solver diverged or could not produce a result.

    Parameters
    ----------
    message : `str`
        Description of the failure.
    iteration : `int`, optional
        Iteration index at which the failure was detected.
    """

    def __init__(self, message: str, iteration: typing.Optional[int] = None) -> None:
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class MetricError(TopoLearnError, ValueError):
    """The inputs of a metric are degenerate, e.g. a single label class."""


class DataError(TopoLearnError, OSError):
    """An artifact could not be read or written, or its content is
    inconsistent."""
