"""Dense float64 tensors with shape-checked arithmetic.

Storage is a read-only, row-major numpy array; every operation returns a
new tensor, so values can be shared between threads without locking.
"""
from math import prod
from typing import Callable, Iterable, Union

import numpy as np

from utils.checks import same_shape, has_rank
from utils.exceptions import DimensionError, NumericError

SOFTPLUS_THRESHOLD = 30.0


class Tensor:
    __slots__ = ("_array",)

    def __init__(self, data, shape: Iterable[int] = None):
        array = np.array(data, dtype=np.float64, order="C")
        if shape is not None:
            shape = tuple(int(n) for n in shape)
            if prod(shape) != array.size:
                raise DimensionError(
                    f"Cannot shape {array.size} values as {shape}"
                )
            array = array.reshape(shape)
        if not np.isfinite(array).all():
            raise NumericError("Tensor data contains NaN or Inf")
        array.setflags(write=False)
        self._array = array

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape))

    @classmethod
    def ones(cls, shape):
        return cls(np.ones(shape))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def shape(self) -> tuple:
        return self._array.shape

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the values."""
        return self._array.reshape(-1)

    @property
    def array(self) -> np.ndarray:
        return self._array

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Tensor(self._array, shape)

    def equal(self, other: "Tensor") -> bool:
        return self.shape == other.shape and np.array_equal(self._array, other._array)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return map_unary(self, "neg")

    def __repr__(self):
        return f"<Tensor shape={self.shape}>"


def matmul(a: Tensor, b: Tensor) -> Tensor:
    has_rank(a, 2, "left operand")
    has_rank(b, 2, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"Cannot contract {a.shape} with {b.shape}")
    m, k = a.shape
    n = b.shape[1]
    lhs, rhs = a.array, b.array
    out = np.zeros((m, n))
    # rank-1 updates keep every entry summed left to right over k
    for t in range(k):
        out += lhs[:, t : t + 1] * rhs[t : t + 1, :]
    return Tensor(out)


def softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    safe = np.minimum(x, SOFTPLUS_THRESHOLD)
    return np.where(x > SOFTPLUS_THRESHOLD, x, np.log1p(np.exp(safe)))


def scale(c: float) -> Callable[[np.ndarray], np.ndarray]:
    c = float(c)

    def _scale(x):
        return x * c

    _scale.__name__ = f"scale({c})"
    return _scale


UNARY = {
    "exp": np.exp,
    "softplus": softplus,
    "neg": np.negative,
}


def map_unary(x: Tensor, fn: Union[str, Callable]) -> Tensor:
    if isinstance(fn, str):
        try:
            fn = UNARY[fn]
        except KeyError:
            raise ValueError(
                f"Unknown unary map {fn!r}, expected one of {', '.join(UNARY)} or scale(c)"
            ) from None
    return Tensor(fn(x.array))


def add(a: Tensor, b: Tensor) -> Tensor:
    same_shape(a, b, "add operands")
    return Tensor(a.array + b.array)


def mul(a: Tensor, b: Tensor) -> Tensor:
    same_shape(a, b, "mul operands")
    return Tensor(a.array * b.array)


def stack(tensors, axis=0) -> Tensor:
    tensors = list(tensors)
    for t in tensors[1:]:
        same_shape(tensors[0], t, "stacked tensors")
    return Tensor(np.stack([t.array for t in tensors], axis=axis))


def concat(tensors, axis=0) -> Tensor:
    return Tensor(np.concatenate([t.array for t in tensors], axis=axis))
