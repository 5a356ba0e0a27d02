"""Feature map <-> sequence conversion under the supported scan orders."""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from ssfuse.tensor import Tensor
from utils.checks import has_rank
from utils.exceptions import DimensionError


class ScanOrder(Enum):
    ROWS = "rows"
    COLUMNS = "columns"
    ROWS_AND_COLUMNS = "rows_and_columns"

    @property
    def directions(self) -> Tuple["ScanOrder", ...]:
        if self is ScanOrder.ROWS_AND_COLUMNS:
            return (ScanOrder.ROWS, ScanOrder.COLUMNS)
        return (self,)

    @classmethod
    def parse(cls, value: str) -> "ScanOrder":
        value = value.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"both": "rows_and_columns", "rows_columns": "rows_and_columns"}
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class FeatureMap:
    data: Tensor

    def __post_init__(self):
        has_rank(self.data, 3, "feature map")
        if min(self.data.shape) < 1:
            raise DimensionError(f"feature map extents must be >= 1, got {self.data.shape}")

    @classmethod
    def from_array(cls, array) -> "FeatureMap":
        return cls(Tensor(array))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def H(self) -> int:
        return self.data.shape[1]

    @property
    def W(self) -> int:
        return self.data.shape[2]

    @property
    def array(self) -> np.ndarray:
        return self.data.array

    def __add__(self, other: "FeatureMap") -> "FeatureMap":
        return FeatureMap(self.data + other.data)


def _unfold_one(array: np.ndarray, order: ScanOrder) -> Tensor:
    d = array.shape[0]
    if order is ScanOrder.COLUMNS:
        array = array.transpose(0, 2, 1)
    return Tensor(array.reshape(d, -1).T)


def unfold(f: FeatureMap, order: ScanOrder = ScanOrder.ROWS) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """Rows gives raster order, columns gives column-major order, both gives the pair."""
    if order is ScanOrder.ROWS_AND_COLUMNS:
        return tuple(_unfold_one(f.array, o) for o in order.directions)
    return _unfold_one(f.array, order)


def _fold_one(s: Tensor, d: int, H: int, W: int, order: ScanOrder) -> np.ndarray:
    has_rank(s, 2, "sequence")
    if s.shape != (H * W, d):
        raise DimensionError(
            f"sequence of shape {s.shape} cannot fold into {d}x{H}x{W}"
        )
    if order is ScanOrder.COLUMNS:
        return s.array.T.reshape(d, W, H).transpose(0, 2, 1)
    return s.array.T.reshape(d, H, W)


def fold(s, d: int, H: int, W: int, order: ScanOrder = ScanOrder.ROWS) -> FeatureMap:
    """Inverse of :func:`unfold`; a rows-and-columns pair folds to the mean of both maps."""
    if order is ScanOrder.ROWS_AND_COLUMNS:
        if not isinstance(s, tuple) or len(s) != 2:
            raise DimensionError("rows_and_columns folding needs a (rows, columns) pair")
        rows, cols = (_fold_one(seq, d, H, W, o) for seq, o in zip(s, order.directions))
        return FeatureMap(Tensor((rows + cols) * 0.5))
    return FeatureMap(Tensor(_fold_one(s, d, H, W, order)))


def reverse(s: Tensor) -> Tensor:
    has_rank(s, 2, "sequence")
    return Tensor(s.array[::-1])


def mean_maps(maps) -> FeatureMap:
    """Averages maps produced by the individual directions of a scan order."""
    maps = list(maps)
    if len(maps) == 1:
        return maps[0]
    total = maps[0].array
    for m in maps[1:]:
        total = total + m.array
    return FeatureMap(Tensor(total * (1.0 / len(maps))))
