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

__all__ = ["map_ordered"]

import concurrent.futures
import typing

T = typing.TypeVar("T")
R = typing.TypeVar("R")


def map_ordered(
    func: typing.Callable[[T], R], items: typing.Iterable[T], threads: int = 1
) -> typing.List[R]:
    """Apply ``func`` to independent items, at most ``threads`` at a time.

    Results come back in input order, so reductions over them are
    reproducible regardless of scheduling. The first exception raised by
    ``func`` propagates.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))
