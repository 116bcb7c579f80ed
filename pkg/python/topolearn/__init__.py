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

import typing

# The version module is generated by setuptools_scm at build time; type
# checkers run on a source tree that may lack it.
if typing.TYPE_CHECKING:
    __version__ = "?"
else:
    try:
        from .version import *
    except ImportError:
        __version__ = "?"

# Import sub modules
from . import tape
from .batch import *
from .container import *
from .datagen import *
from .enums import *
from .errors import *
from .graph_core import *
from .metrics import *
from .schema_registry import *
from .solvers import *
from .topodiffvae import *
from .trainer import *
from .unroll_net import *

from . import cli  # isort: skip
