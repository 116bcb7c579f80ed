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
    "FORMAT_VERSION",
    "MANIFEST_NAME",
    "dump_json",
    "save_container",
    "load_container",
    "config_digest",
]

import hashlib
import json
import logging
import pathlib
import re
import typing

import numpy as np
import numpy.typing as npt

from .errors import DataError, ValidationError
from .schema_registry import validate

# Version of the container layout; bump when the manifest schemas change.
FORMAT_VERSION = 1

MANIFEST_NAME = "manifest.json"

# All arrays are stored as little-endian IEEE-754 doubles.
ARRAY_DTYPE = np.dtype("<f8")

_ARRAY_NAME = re.compile(r"^[A-Za-z0-9_.\-]+$")

log = logging.getLogger(__name__)


def dump_json(data: typing.Any) -> str:
    """Serialize to canonical JSON: sorted keys, fixed indentation and a
    trailing newline, so equal data give equal bytes."""
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_digest(config: typing.Dict[str, typing.Any]) -> str:
    """Return the sha256 hex digest of the canonical JSON of a config."""
    return hashlib.sha256(dump_json(config).encode()).hexdigest()


def save_container(
    path: typing.Union[str, pathlib.Path],
    manifest: typing.Dict[str, typing.Any],
    arrays: typing.Mapping[str, npt.ArrayLike],
    schema_name: str,
) -> pathlib.Path:
    """Write a manifest and named arrays to a container directory.

    Parameters
    ----------
    path : `str` or `pathlib.Path`
        Container directory. Created, with parents, if missing.
    manifest : `dict`
        Manifest; validated against ``schema_name`` before anything is
        written.
    arrays : `dict` [`str`, `numpy.ndarray`]
        Named arrays, cast to little-endian float64.
    schema_name : `str`
        Name of the manifest schema in the registry.

    Returns
    -------
    path : `pathlib.Path`
        The container directory.

    Raises
    ------
    DataError
        If the directory cannot be written or an array name is invalid.
    """
    validate(manifest, schema_name)
    path = pathlib.Path(path)
    manifest = dict(manifest, arrays=sorted(arrays))
    try:
        path.mkdir(parents=True, exist_ok=True)
        for name, value in arrays.items():
            if not _ARRAY_NAME.match(name):
                raise DataError(f"Invalid array name {name!r}.")
            np.save(
                path / f"{name}.npy",
                np.ascontiguousarray(np.asarray(value, dtype=ARRAY_DTYPE)),
                allow_pickle=False,
            )
        (path / MANIFEST_NAME).write_text(dump_json(manifest))
    except OSError as e:
        raise DataError(f"Could not write container {str(path)!r}: {e}") from e
    log.debug(f"Wrote container {str(path)!r} with {len(arrays)} arrays.")
    return path


def load_container(
    path: typing.Union[str, pathlib.Path], schema_name: str
) -> typing.Tuple[typing.Dict[str, typing.Any], typing.Dict[str, np.ndarray]]:
    """Read a container written by `save_container`.

    Parameters
    ----------
    path : `str` or `pathlib.Path`
        Container directory.
    schema_name : `str`
        Name of the manifest schema in the registry.

    Returns
    -------
    manifest : `dict`
        The validated manifest, without the array index.
    arrays : `dict` [`str`, `numpy.ndarray`]
        The named arrays.

    Raises
    ------
    DataError
        If the manifest is missing or invalid, or an array is unreadable.
    """
    path = pathlib.Path(path)
    try:
        manifest = json.loads((path / MANIFEST_NAME).read_text())
    except (OSError, json.decoder.JSONDecodeError) as e:
        raise DataError(f"Could not read manifest of {str(path)!r}: {e}") from e
    if not isinstance(manifest, dict):
        raise DataError(f"Manifest of {str(path)!r} is not a json-encoded dict.")
    names = manifest.pop("arrays", [])
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"Container {str(path)!r} has format version "
            f"{manifest.get('format_version')!r}; expected {FORMAT_VERSION}."
        )
    try:
        validate(manifest, schema_name)
    except ValidationError as e:
        raise DataError(f"Invalid manifest in {str(path)!r}: {e}") from e
    arrays: typing.Dict[str, np.ndarray] = {}
    for name in names:
        try:
            arrays[name] = np.load(path / f"{name}.npy", allow_pickle=False)
        except (OSError, ValueError) as e:
            raise DataError(f"Could not read array {name!r} of {str(path)!r}.") from e
        if arrays[name].dtype != ARRAY_DTYPE:
            raise DataError(f"Array {name!r} of {str(path)!r} is not <f8.")
    return manifest, arrays
