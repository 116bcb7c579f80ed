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

"""Reverse-mode differentiation over a small, fixed vocabulary of array
operations.

A `Tape` records every operation applied to `Variable` objects created
from it, together with a vector-Jacobian product closure. `Tape.gradients`
replays the record backwards. A tape created with ``record=False``
evaluates the same expressions without keeping anything, which is what
inference uses.
"""

__all__ = [
    "Tape",
    "Variable",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "reshape",
    "concat",
    "sum",
    "mean",
    "relu",
    "tanh",
    "softplus",
    "exp",
    "log",
    "sqrt",
    "square",
    "degree",
    "degree_t",
]

import builtins
import typing

import numpy as np
import numpy.typing as npt
from scipy import special

from . import graph_core
from .errors import ContractError

Operand = typing.Union["Variable", npt.ArrayLike]
VjpFunction = typing.Callable[[np.ndarray], typing.Sequence[typing.Optional[np.ndarray]]]


class Variable:
    """An array value that remembers how it was computed.

    Parameters
    ----------
    value : `numpy.ndarray`
        The value.
    tape : `Tape`
        The tape the value belongs to.
    requires_grad : `bool`
        Whether gradients flow to this value.
    name : `str`, optional
        Label used in diagnostics.

    Attributes
    ----------
    index : `int` or `None`
        Position on the tape; `None` when nothing was recorded.
    """

    __array_ufunc__ = None

    def __init__(
        self,
        value: npt.ArrayLike,
        tape: "Tape",
        requires_grad: bool = False,
        name: typing.Optional[str] = None,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.requires_grad = requires_grad
        self.name = name
        self.index: typing.Optional[int] = None
        self.parents: typing.Tuple[Variable, ...] = ()
        self.vjp: typing.Optional[VjpFunction] = None

    @property
    def shape(self) -> typing.Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        """Return a copy of the value."""
        return self.value.copy()

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Variable{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Operand) -> "Variable":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Variable":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Variable":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Variable":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Variable":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Variable":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Variable":
        return div(self, other)

    def __neg__(self) -> "Variable":
        return neg(self)

    def __matmul__(self, other: Operand) -> "Variable":
        return matmul(self, other)

    def __rmatmul__(self, other: Operand) -> "Variable":
        return matmul(other, self)

    def __getitem__(self, key: typing.Union[int, slice]) -> "Variable":
        shape = self.shape

        def vjp(g: np.ndarray) -> typing.Tuple[np.ndarray]:
            grad = np.zeros(shape)
            grad[key] = g
            return (grad,)

        return self.tape.apply(self.value[key], (self,), vjp)


class Tape:
    """Record of operations for reverse-mode differentiation.

    Parameters
    ----------
    record : `bool`
        Keep the operations so that `gradients` can be called. When
        `False` only values are computed.
    """

    def __init__(self, record: bool = True) -> None:
        self.record = record
        self.nodes: typing.List[Variable] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def variable(self, value: npt.ArrayLike, name: typing.Optional[str] = None) -> Variable:
        """Create a leaf that gradients are taken with respect to."""
        var = Variable(value, self, requires_grad=self.record, name=name)
        if self.record:
            var.index = len(self.nodes)
            self.nodes.append(var)
        return var

    def constant(self, value: npt.ArrayLike) -> Variable:
        """Wrap a value that no gradient flows to."""
        if isinstance(value, Variable):
            return value
        return Variable(value, self, requires_grad=False)

    def apply(
        self,
        value: npt.ArrayLike,
        parents: typing.Sequence[Variable],
        vjp: VjpFunction,
    ) -> Variable:
        """Record a primitive operation.

        Parameters
        ----------
        value : `numpy.ndarray`
            Result of the operation.
        parents : `list` [`Variable`]
            Inputs of the operation.
        vjp : callable
            Maps the gradient of the result to one gradient per parent (or
            `None` for parents that need none).

        Returns
        -------
        result : `Variable`
            The recorded result.
        """
        requires_grad = self.record and builtins.any(p.requires_grad for p in parents)
        var = Variable(value, self, requires_grad=requires_grad)
        if requires_grad:
            var.parents = tuple(parents)
            var.vjp = vjp
            var.index = len(self.nodes)
            self.nodes.append(var)
        return var

    def gradients(
        self, output: Variable, wrt: typing.Sequence[Variable]
    ) -> typing.List[np.ndarray]:
        """Gradients of a scalar output with respect to leaves.

        Parameters
        ----------
        output : `Variable`
            Scalar result recorded on this tape.
        wrt : `list` [`Variable`]
            Leaves created with `variable`.

        Returns
        -------
        grads : `list` [`numpy.ndarray`]
            One gradient per leaf, shaped like the leaf. Leaves the output
            does not depend on get zeros.

        Raises
        ------
        ContractError
            If the tape does not record or the output is not a recorded
            scalar of this tape.
        """
        if not self.record:
            raise ContractError("Gradients requested from a tape that does not record.")
        if output.tape is not self or output.size != 1:
            raise ContractError("Gradients require a scalar output of this tape.")
        grads: typing.Dict[int, np.ndarray] = {}
        if output.index is not None:
            grads[output.index] = np.ones(output.shape)
            for node in reversed(self.nodes[: output.index + 1]):
                g = grads.get(node.index)  # type: ignore[arg-type]
                if g is None or node.vjp is None:
                    continue
                for parent, parent_grad in zip(node.parents, node.vjp(g)):
                    if parent_grad is None or not parent.requires_grad:
                        continue
                    parent_grad = _unbroadcast(parent_grad, parent.shape)
                    assert parent.index is not None
                    if parent.index in grads:
                        grads[parent.index] = grads[parent.index] + parent_grad
                    else:
                        grads[parent.index] = parent_grad
        result = []
        for var in wrt:
            if var.tape is not self or var.index is None:
                raise ContractError(f"{var!r} is not a leaf of this tape.")
            result.append(grads.get(var.index, np.zeros(var.shape)))
        return result


def _unbroadcast(grad: np.ndarray, shape: typing.Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _operands(a: Operand, b: Operand) -> typing.Tuple[Variable, Variable]:
    if isinstance(a, Variable):
        return a, a.tape.constant(b)
    if isinstance(b, Variable):
        return b.tape.constant(a), b
    raise ContractError("At least one operand must be a Variable.")


def add(a: Operand, b: Operand) -> Variable:
    a, b = _operands(a, b)
    return a.tape.apply(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Operand, b: Operand) -> Variable:
    a, b = _operands(a, b)
    return a.tape.apply(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Operand, b: Operand) -> Variable:
    a, b = _operands(a, b)
    av, bv = a.value, b.value
    return a.tape.apply(av * bv, (a, b), lambda g: (g * bv, g * av))


def div(a: Operand, b: Operand) -> Variable:
    a, b = _operands(a, b)
    av, bv = a.value, b.value
    return a.tape.apply(av / bv, (a, b), lambda g: (g / bv, -g * av / (bv * bv)))


def neg(a: Variable) -> Variable:
    return a.tape.apply(-a.value, (a,), lambda g: (-g,))


def matmul(a: Operand, b: Operand) -> Variable:
    """Matrix or matrix-vector product of 1-d and 2-d operands."""
    a, b = _operands(a, b)
    av, bv = a.value, b.value

    def vjp(g: np.ndarray) -> typing.Tuple[np.ndarray, np.ndarray]:
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return a.tape.apply(av @ bv, (a, b), vjp)


def reshape(a: Variable, shape: typing.Tuple[int, ...]) -> Variable:
    old = a.shape
    return a.tape.apply(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(parts: typing.Sequence[Operand]) -> Variable:
    """Concatenate one-dimensional operands."""
    tape = next(p.tape for p in parts if isinstance(p, Variable))
    variables = [tape.constant(p) for p in parts]
    splits = np.cumsum([v.size for v in variables])[:-1]

    def vjp(g: np.ndarray) -> typing.List[np.ndarray]:
        return np.split(g, splits)

    return tape.apply(np.concatenate([v.value for v in variables]), variables, vjp)


def sum(a: Variable, axis: typing.Optional[int] = None) -> Variable:
    shape = a.shape

    def vjp(g: np.ndarray) -> typing.Tuple[np.ndarray]:
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return a.tape.apply(a.value.sum(axis=axis), (a,), vjp)


def mean(a: Variable, axis: typing.Optional[int] = None) -> Variable:
    count = a.size if axis is None else a.shape[axis]
    return sum(a, axis=axis) / float(count)


def relu(a: Variable) -> Variable:
    """max(0, a); the subgradient at exactly 0 is 0."""
    mask = (a.value > 0.0).astype(np.float64)
    return a.tape.apply(np.maximum(a.value, 0.0), (a,), lambda g: (g * mask,))


def tanh(a: Variable) -> Variable:
    t = np.tanh(a.value)
    return a.tape.apply(t, (a,), lambda g: (g * (1.0 - t * t),))


def softplus(a: Variable) -> Variable:
    x = a.value
    return a.tape.apply(np.logaddexp(0.0, x), (a,), lambda g: (g * special.expit(x),))


def exp(a: Variable) -> Variable:
    e = np.exp(a.value)
    return a.tape.apply(e, (a,), lambda g: (g * e,))


def log(a: Variable) -> Variable:
    x = a.value
    return a.tape.apply(np.log(x), (a,), lambda g: (g / x,))


def sqrt(a: Variable) -> Variable:
    s = np.sqrt(a.value)
    return a.tape.apply(s, (a,), lambda g: (0.5 * g / s,))


def square(a: Variable) -> Variable:
    x = a.value
    return a.tape.apply(x * x, (a,), lambda g: (2.0 * x * g,))


def degree(w: Variable) -> Variable:
    """Node degrees of an edge vector; the transpose is `degree_t`."""
    return w.tape.apply(
        graph_core.degree_apply(w.value),
        (w,),
        lambda g: (graph_core.degree_adjoint(g),),
    )


def degree_t(v: Variable) -> Variable:
    """Adjoint of the degree operator applied to a node vector."""
    return v.tape.apply(
        graph_core.degree_adjoint(v.value),
        (v,),
        lambda g: (graph_core.degree_apply(g),),
    )
