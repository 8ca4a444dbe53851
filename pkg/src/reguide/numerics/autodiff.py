"""Define-by-run reverse-mode automatic differentiation over numpy arrays.

A `Tape` records every operation whose inputs live on it. Each recorded node
keeps the indices of its parents and a closure mapping the output cotangent to
the parent cotangents. `grad` walks the tape once in reverse order.

Tensors with no tape are constants: operations on constants only are not
recorded, which is how model weights are held fixed while differentiating with
respect to the input.
"""

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, TypeAlias

import numpy as np
from numpy.typing import ArrayLike

from reguide.errors import (
    NonFiniteError,
    NonScalarLossError,
    NotOnTapeError,
    ShapeError,
    TapeConsumedError,
    TapeMismatchError,
)

Backward: TypeAlias = Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class TapeNode:
    op: str
    parents: tuple[int, ...]
    backward: Backward | None


class Tape:
    """Ordered record of operations. Parents always precede their children."""

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self.consumed = False

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, value: "ArrayLike | Tensor") -> "Tensor":
        """Place a leaf value on the tape so gradients can be taken w.r.t. it."""
        if isinstance(value, Tensor):
            value = value.value
        self._check_open()
        self.nodes.append(TapeNode("leaf", (), None))
        return Tensor(value, tape=self, index=len(self.nodes) - 1)

    def record(
        self,
        op: str,
        value: np.ndarray,
        parents: Sequence["Tensor"],
        backward: Backward,
    ) -> "Tensor":
        self._check_open()
        indices = tuple(p.index if p.tape is self else -1 for p in parents)
        self.nodes.append(TapeNode(op, indices, backward))  # type: ignore[arg-type]
        return Tensor(value, tape=self, index=len(self.nodes) - 1)

    def _check_open(self) -> None:
        if self.consumed:
            raise TapeConsumedError("tape was already consumed by a backward pass")


class Tensor:
    """Immutable float64 array, optionally recorded on a tape."""

    __array_ufunc__ = None  # numpy defers to the reflected operators below

    def __init__(
        self,
        value: ArrayLike,
        tape: Tape | None = None,
        index: int | None = None,
    ) -> None:
        array = np.array(value, dtype=np.float64)
        array.flags.writeable = False
        self.value = array
        self.tape = tape
        self.index = index

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def T(self) -> "Tensor":  # noqa: N802
        return transpose(self)

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def __repr__(self) -> str:
        where = "const" if self.tape is None else f"tape[{self.index}]"
        return f"Tensor(shape={self.shape}, {where})"

    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: Any) -> "Tensor":
        return matmul(self, other)

    def __rmatmul__(self, other: Any) -> "Tensor":
        return matmul(other, self)

    def __getitem__(self, key: Any) -> "Tensor":
        return getitem(self, key)


TensorLike: TypeAlias = Tensor | ArrayLike


def as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _common_tape(tensors: Sequence[Tensor]) -> Tape | None:
    tape = None
    for tensor in tensors:
        if tensor.tape is None:
            continue
        if tape is None:
            tape = tensor.tape
        elif tensor.tape is not tape:
            raise TapeMismatchError("operands are recorded on different tapes")
    return tape


def _apply(
    op: str,
    value: np.ndarray,
    parents: Sequence[Tensor],
    backward: Backward,
) -> Tensor:
    tape = _common_tape(parents)
    if tape is None:
        return Tensor(value)
    return tape.record(op, value, parents, backward)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        "add",
        a.value + b.value,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        "sub",
        a.value - b.value,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _apply(
        "mul",
        a.value * b.value,
        (a, b),
        lambda g: (
            unbroadcast(g * b.value, a.shape),
            unbroadcast(g * a.value, b.shape),
        ),
    )


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value / b.value
    return _apply(
        "div",
        out,
        (a, b),
        lambda g: (
            unbroadcast(g / b.value, a.shape),
            unbroadcast(-g * out / b.value, b.shape),
        ),
    )


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _apply("neg", -a.value, (a,), lambda g: (-g,))


def power(a: TensorLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    return _apply(
        "pow",
        a.value**exponent,
        (a,),
        lambda g: (g * exponent * a.value ** (exponent - 1),),
    )


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _apply("exp", out, (a,), lambda g: (g * out,))


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _apply("log", np.log(a.value), (a,), lambda g: (g / a.value,))


def sqrt(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.value)
    return _apply("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _apply("tanh", out, (a,), lambda g: (g * (1.0 - out**2),))


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _apply("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _apply(
        "silu",
        a.value * sig,
        (a,),
        lambda g: (g * sig * (1.0 + a.value * (1.0 - sig)),),
    )


def absolute(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _apply("abs", np.abs(a.value), (a,), lambda g: (g * np.sign(a.value),))


def smooth_l1(a: TensorLike, beta: float = 1.0) -> Tensor:
    """Elementwise Huber-style penalty: quadratic below `beta`, linear above."""
    a = as_tensor(a)
    x = a.value
    inside = np.abs(x) < beta
    out = np.where(inside, 0.5 * x**2 / beta, np.abs(x) - 0.5 * beta)
    return _apply(
        "smooth_l1",
        out,
        (a,),
        lambda g: (g * np.where(inside, x / beta, np.sign(x)),),
    )


# Linear algebra and shape manipulation


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _apply("matmul", a.value @ b.value, (a, b), backward)


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return _apply(
        "reshape",
        a.value.reshape(tuple(shape)),
        (a,),
        lambda g: (g.reshape(a.shape),),
    )


def transpose(a: TensorLike, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _apply(
        "transpose",
        np.transpose(a.value, axes),
        (a,),
        lambda g: (np.transpose(g, inverse),),
    )


def broadcast_to(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    return _apply(
        "broadcast_to",
        np.broadcast_to(a.value, tuple(shape)),
        (a,),
        lambda g: (unbroadcast(g, a.shape),),
    )


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, splits, axis=axis)

    return _apply(
        "concat",
        np.concatenate([p.value for p in parts], axis=axis),
        parts,
        backward,
    )


def _is_basic_index(key: Any) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None for k in parts)


def getitem(a: TensorLike, key: Any) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(a.shape)
        if _is_basic_index(key):
            out[key] = g
        else:
            np.add.at(out, key, g)  # repeated indices accumulate
        return (out,)

    return _apply("getitem", a.value[key], (a,), backward)


def take(table: TensorLike, indices: ArrayLike) -> Tensor:
    """Row lookup `table[indices]` (embedding gather)."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(table.shape)
        np.add.at(out, idx, g)
        return (out,)

    return _apply("take", table.value[idx], (table,), backward)


# Reductions


def _expand(g: np.ndarray, shape: tuple[int, ...], axis: Any, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(  # noqa: A001
    a: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    a = as_tensor(a)
    return _apply(
        "sum",
        np.sum(a.value, axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims).copy(),),
    )


def mean(
    a: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    a = as_tensor(a)
    count = a.size / np.mean(a.value, axis=axis, keepdims=keepdims).size
    return _apply(
        "mean",
        np.mean(a.value, axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims) / count,),
    )


def softmax(a: TensorLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _apply(
        "softmax",
        out,
        (a,),
        lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),),
    )


def logsumexp(a: TensorLike, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """log(sum(exp(a))) along `axis`, restricted to entries where `mask` is True."""
    a = as_tensor(a)
    keep = np.ones(a.shape, dtype=bool) if mask is None else np.broadcast_to(mask, a.shape)
    masked = np.where(keep, a.value, -np.inf)
    peak = masked.max(axis=axis, keepdims=True)
    e = np.where(keep, np.exp(masked - peak), 0.0)
    total = e.sum(axis=axis, keepdims=True)
    out = np.squeeze(peak + np.log(total), axis=axis)
    weights = e / total
    return _apply(
        "logsumexp",
        out,
        (a,),
        lambda g: (np.expand_dims(g, axis) * weights,),
    )


# Composites


def normalize(a: TensorLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    return a / sqrt(sum(a * a, axis=axis, keepdims=True))


def cosine_similarity(a: TensorLike, b: TensorLike, axis: int = -1) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    dot = sum(a * b, axis=axis)
    return dot / sqrt(sum(a * a, axis=axis) * sum(b * b, axis=axis))


def layer_norm(
    a: TensorLike, gain: TensorLike, bias: TensorLike, eps: float = 1e-5
) -> Tensor:
    a = as_tensor(a)
    centered = a - mean(a, axis=-1, keepdims=True)
    var = mean(centered * centered, axis=-1, keepdims=True)
    return centered / sqrt(var + eps) * gain + bias


# Gradients

Wrt: TypeAlias = Tensor | Sequence[Tensor] | Mapping[str, Tensor]


def grad(f: Tensor, wrt: Wrt) -> Any:
    """Reverse-mode gradient of the scalar `f` with respect to `wrt`.

    Args:
        f: Scalar tensor produced by operations recorded on a tape.
        wrt: A tensor, a sequence of tensors or a mapping of named tensors,
            each watched on the same tape as `f`.

    Returns:
        Arrays with the same structure as `wrt`. Inputs that do not influence
        `f` receive zeros.

    Raises:
        NonScalarLossError: If `f` holds more than one value.
        NotOnTapeError: If a `wrt` tensor was never recorded on `f`'s tape.
        TapeConsumedError: If the tape was already used for a backward pass.
    """
    if f.size != 1:
        raise NonScalarLossError(f"loss must be a scalar, got shape {f.shape}")

    if isinstance(wrt, Tensor):
        flat = [wrt]
    elif isinstance(wrt, Mapping):
        flat = list(wrt.values())
    else:
        flat = list(wrt)

    tape = f.tape if f.tape is not None else _common_tape(flat)
    for i, tensor in enumerate(flat):
        if tensor.tape is None or tensor.tape is not tape:
            raise NotOnTapeError(f"wrt tensor #{i} is not on the loss's tape")
    if tape is None:
        raise NotOnTapeError("nothing to differentiate: no tensor is on a tape")
    if tape.consumed:
        raise TapeConsumedError("tape was already consumed by a backward pass")

    cotangents: list[np.ndarray | None] = [None] * len(tape.nodes)
    if f.tape is tape:
        cotangents[f.index] = np.ones(f.shape)  # type: ignore[index]
        for i in range(f.index, -1, -1):  # type: ignore[arg-type]
            node = tape.nodes[i]
            g = cotangents[i]
            if g is None or node.backward is None:
                continue
            for parent, parent_grad in zip(node.parents, node.backward(g)):
                if parent < 0 or parent_grad is None:
                    continue
                if cotangents[parent] is None:
                    cotangents[parent] = np.array(parent_grad, dtype=np.float64)
                else:
                    cotangents[parent] = cotangents[parent] + parent_grad
    tape.consumed = True

    grads = [
        np.zeros(t.shape) if cotangents[t.index] is None else cotangents[t.index]  # type: ignore[index]
        for t in flat
    ]
    if isinstance(wrt, Tensor):
        return grads[0]
    if isinstance(wrt, Mapping):
        return dict(zip(wrt.keys(), grads))
    return grads


def value_and_grad(
    fn: Callable[[Tensor], Tensor], x: ArrayLike
) -> tuple[float, np.ndarray]:
    """Evaluate the scalar function `fn` at `x` on a fresh tape and differentiate it."""
    tape = Tape()
    watched = tape.watch(x)
    out = fn(watched)
    return out.item(), grad(out, watched)


def finite_diff_grad(
    fn: Callable[[np.ndarray], float], x: ArrayLike, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function.

    Raises:
        ValueError: If `h` is not positive.
        NonFiniteError: If `fn` is not finite at one of the evaluation points.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    base = np.array(x, dtype=np.float64)
    out = np.zeros_like(base)
    for coord in np.ndindex(base.shape):
        shifted = base.copy()
        shifted[coord] = base[coord] + h
        upper = float(fn(shifted))
        shifted[coord] = base[coord] - h
        lower = float(fn(shifted))
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NonFiniteError(f"function is not finite around coordinate {coord}")
        out[coord] = (upper - lower) / (2 * h)
    return out
