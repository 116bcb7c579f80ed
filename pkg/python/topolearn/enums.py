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
    "GraphFamily",
    "EdgeWeighting",
    "SolverKind",
    "ModelKind",
    "RunMode",
    "ExitCode",
]

import enum


class GraphFamily(str, enum.Enum):
    """Random graph model a sample is drawn from."""

    BA = "ba"
    ER = "er"
    SBM = "sbm"
    WS = "ws"


class EdgeWeighting(str, enum.Enum):
    """How weights are put on the edges of a generated topology."""

    LOGNORMAL = "lognormal"
    BINARY = "binary"


class SolverKind(str, enum.Enum):
    """Classical iterative solver."""

    PDS = "pds"
    ADMM = "admm"


class ModelKind(str, enum.Enum):
    """Trainable model built on the unrolled primal-dual iterations."""

    UNROLL = "unroll"
    RECURRENT = "recurrent"
    L2G = "l2g"


class RunMode(enum.IntEnum):
    """Forward pass mode."""

    TRAIN = enum.auto()
    INFER = enum.auto()


class ExitCode(enum.IntEnum):
    """Process exit codes of the command line interface."""

    OK = 0
    USAGE = 2
    DATA = 3
    NUMERIC = 4
