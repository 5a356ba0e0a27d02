"""Discretized selective state-space scan.

Shapes follow one convention throughout: a sequence is ``L x d``, per-step
``B``/``C`` are ``L x d x d_state`` and ``delta`` is ``L x d``.  ``A`` is a
strictly negative ``d x d_state`` diagonal state matrix.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from ssfuse.tensor import Tensor, matmul, softplus
from utils.checks import extent, has_rank, same_shape
from utils.exceptions import DimensionError, ParameterError

logger = logging.getLogger(__name__)

ZOH_SINGULAR = 1e-8
# softplus underflows to 0.0 below about -745
DELTA_FLOOR = np.finfo(np.float64).tiny

Sequence = Tensor
HiddenState = Tensor


@dataclass(frozen=True)
class SsmWeights:
    A: Tensor
    D: Tensor
    W_B: Tensor
    W_C: Tensor
    W_delta: Tensor
    b_B: Tensor
    b_C: Tensor
    b_delta: Tensor

    def __post_init__(self):
        has_rank(self.A, 2, "A")
        d, n = self.A.shape
        if not (self.A.array < 0).all():
            raise ParameterError("A must be strictly negative")
        extent(self.D, 0, d, "D")
        has_rank(self.D, 1, "D")
        for name, shape in (
            ("W_B", (d, d * n)),
            ("W_C", (d, d * n)),
            ("W_delta", (d, d)),
            ("b_B", (d * n,)),
            ("b_C", (d * n,)),
            ("b_delta", (d,)),
        ):
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} must have shape {shape} for d={d}, d_state={n}, "
                    f"got {getattr(self, name).shape}"
                )

    @classmethod
    def create(cls, A, D, W_B, W_C, W_delta, b_B=None, b_C=None, b_delta=None):
        """Builds weights from array-likes, filling missing biases with zeros."""
        A = Tensor(A)
        d, n = A.shape
        return cls(
            A=A,
            D=Tensor(D),
            W_B=Tensor(W_B),
            W_C=Tensor(W_C),
            W_delta=Tensor(W_delta),
            b_B=Tensor(np.zeros(d * n) if b_B is None else b_B),
            b_C=Tensor(np.zeros(d * n) if b_C is None else b_C),
            b_delta=Tensor(np.zeros(d) if b_delta is None else b_delta),
        )

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def d_state(self) -> int:
        return self.A.shape[1]

    def named_parameters(self, prefix=""):
        for name in ("A", "D", "W_B", "W_C", "W_delta", "b_B", "b_C", "b_delta"):
            yield f"{prefix}{name}", getattr(self, name)


@dataclass(frozen=True)
class SelectiveParams:
    B: Tensor
    C: Tensor
    delta: Tensor

    def __post_init__(self):
        has_rank(self.B, 3, "B")
        same_shape(self.B, self.C, "B and C")
        if self.delta.shape != self.B.shape[:2]:
            raise DimensionError(
                f"delta shape {self.delta.shape} does not match B shape {self.B.shape}"
            )
        if not (self.delta.array > 0).all():
            raise ParameterError("delta must be strictly positive")

    @property
    def length(self) -> int:
        return self.B.shape[0]

    def with_c(self, C: Tensor) -> "SelectiveParams":
        return replace(self, C=C)


def _check_sequence(x: Sequence, d: int):
    has_rank(x, 2, "sequence")
    if x.shape[0] < 1:
        raise DimensionError("sequence must have at least one step")
    if x.shape[1] != d:
        raise DimensionError(f"sequence has {x.shape[1]} channels, weights expect {d}")


def project_selective(x: Sequence, w: SsmWeights) -> SelectiveParams:
    _check_sequence(x, w.d)
    L = x.shape[0]
    B = matmul(x, w.W_B).array + w.b_B.array
    C = matmul(x, w.W_C).array + w.b_C.array
    delta = np.maximum(softplus(matmul(x, w.W_delta).array + w.b_delta.array), DELTA_FLOOR)
    shape = (L, w.d, w.d_state)
    return SelectiveParams(Tensor(B, shape), Tensor(C, shape), Tensor(delta))


def _zoh(A: np.ndarray, delta: np.ndarray, B: np.ndarray):
    dA = delta[..., None] * A
    a_bar = np.exp(dA)
    singular = np.abs(dA) < ZOH_SINGULAR
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(singular, 1.0, np.expm1(dA) / dA)
    b_bar = np.where(singular, delta[..., None] * B, gain * B)
    return a_bar, b_bar


def discretize(A: Tensor, delta: Tensor, B: Tensor) -> Tuple[Tensor, Tensor]:
    """Zero-order hold for one step: ``A_bar = exp(dA)``, ``B_bar = (exp(dA) - 1)/dA * B``."""
    has_rank(A, 2, "A")
    same_shape(A, B, "A and B")
    extent(delta, 0, A.shape[0], "delta")
    if not (delta.array > 0).all():
        raise ParameterError("delta must be strictly positive")
    a_bar, b_bar = _zoh(A.array, delta.array, B.array)
    return Tensor(a_bar), Tensor(b_bar)


def scan_recurrent(
    x: Sequence,
    sp: SelectiveParams,
    w: SsmWeights,
    h0: Optional[HiddenState] = None,
) -> Tuple[Sequence, HiddenState]:
    _check_sequence(x, w.d)
    if sp.B.shape != (x.shape[0], w.d, w.d_state):
        raise DimensionError(
            f"parameters of shape {sp.B.shape} do not fit sequence {x.shape} "
            f"with d_state={w.d_state}"
        )
    if h0 is None:
        h = np.zeros((w.d, w.d_state))
    else:
        same_shape(h0, w.A, "initial state")
        h = h0.array.copy()

    a_bar, b_bar = _zoh(w.A.array, sp.delta.array, sp.B.array)
    xs = x.array
    C = sp.C.array
    D = w.D.array
    ys = np.empty(xs.shape)
    # channels run side by side; each channel is a strict left-to-right recurrence
    for i in range(xs.shape[0]):
        h = a_bar[i] * h + b_bar[i] * xs[i, :, None]
        ys[i] = (C[i] * h).sum(axis=1) + D * xs[i]
    return Tensor(ys), Tensor(h)


def kernel_lti(w: SsmWeights, B: Tensor, C: Tensor, delta: Tensor, L: int) -> Tensor:
    """Convolution kernel ``(C B_bar, C A_bar B_bar, ..., C A_bar^(L-1) B_bar)`` per channel."""
    a_bar, b_bar = discretize(w.A, delta, B)
    same_shape(C, B, "C and B")
    a_bar, power, c = a_bar.array, b_bar.array, C.array
    kernel = np.empty((w.d, L))
    for t in range(L):
        kernel[:, t] = (c * power).sum(axis=1)
        power = a_bar * power
    return Tensor(kernel)


def apply_kernel(x: Sequence, kernel: Tensor, D: Tensor) -> Sequence:
    has_rank(x, 2, "sequence")
    has_rank(kernel, 2, "kernel")
    L, d = x.shape
    if kernel.shape[0] != d or D.shape != (d,):
        raise DimensionError(
            f"kernel {kernel.shape} and D {D.shape} do not fit sequence {x.shape}"
        )
    if kernel.shape[1] < L:
        raise DimensionError(
            f"kernel length {kernel.shape[1]} is shorter than sequence length {L}"
        )
    xs, k = x.array, kernel.array
    y = np.zeros((L, d))
    for t in range(L):
        y[t:] += k[:, t] * xs[: L - t]
    return Tensor(y + D.array * xs)


def lti_params(B: Tensor, C: Tensor, delta: Tensor, L: int) -> SelectiveParams:
    """Repeats one time-invariant ``(B, C, delta)`` over ``L`` steps."""
    return SelectiveParams(
        Tensor(np.broadcast_to(B.array, (L,) + B.shape)),
        Tensor(np.broadcast_to(C.array, (L,) + C.shape)),
        Tensor(np.broadcast_to(delta.array, (L,) + delta.shape)),
    )
