"""Cross-parametric, shared-parametric and feature-fusion SSM blocks.

Every block maps a pair of ``d x H x W`` maps to ``d x H x W`` output(s).
Scan orders with two directions run each direction independently and
average the folded results.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from math import sqrt
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from ssfuse.layout import FeatureMap, ScanOrder, fold, mean_maps, unfold
from ssfuse.ssm import SelectiveParams, SsmWeights, project_selective, scan_recurrent
from ssfuse.tensor import Tensor, concat
from utils.checks import same_shape
from utils.exceptions import ParameterError

logger = logging.getLogger(__name__)

DELTA_MIN = 1e-3
DELTA_MAX = 1e-1


class FfPaths(Enum):
    BIDIRECTIONAL = "bidirectional"
    FORWARD = "12"
    BACKWARD = "21"


@dataclass(frozen=True)
class BranchWeights:
    ssm: SsmWeights

    @property
    def d(self):
        return self.ssm.d

    @property
    def d_state(self):
        return self.ssm.d_state


@dataclass(frozen=True)
class FfWeights:
    path_12: BranchWeights
    path_21: BranchWeights

    def swapped(self) -> "FfWeights":
        return FfWeights(path_12=self.path_21, path_21=self.path_12)


@dataclass(frozen=True)
class FusionBlockWeights:
    cp_v: BranchWeights
    cp_t: BranchWeights
    sp: BranchWeights
    ff_enh_v: FfWeights
    ff_enh_t: FfWeights
    ff_final: FfWeights
    exchange_c: bool = True
    scan_order: ScanOrder = ScanOrder.ROWS
    ff_paths: FfPaths = FfPaths.BIDIRECTIONAL
    residual: bool = False
    use_cp: bool = True
    use_sp: bool = True
    use_ff: bool = True

    def __post_init__(self):
        dims = {(b.d, b.d_state) for _, b in self.branches()}
        if len(dims) != 1:
            raise ParameterError(f"sub-blocks disagree on (d, d_state): {sorted(dims)}")

    def branches(self) -> Iterator[Tuple[str, BranchWeights]]:
        yield "cp_v", self.cp_v
        yield "cp_t", self.cp_t
        yield "sp", self.sp
        for name in ("ff_enh_v", "ff_enh_t", "ff_final"):
            ff = getattr(self, name)
            yield f"{name}.path_12", ff.path_12
            yield f"{name}.path_21", ff.path_21

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for prefix, branch in self.branches():
            yield from branch.ssm.named_parameters(f"{prefix}.")

    def configure(self, **switches) -> "FusionBlockWeights":
        return replace(self, **switches)

    @property
    def d(self):
        return self.sp.d

    @property
    def d_state(self):
        return self.sp.d_state


@dataclass
class FusedOutput:
    f_fused: FeatureMap
    intermediates: Optional[Dict[str, FeatureMap]] = field(default=None)


def _residual(out: FeatureMap, inp: FeatureMap, enabled: bool) -> FeatureMap:
    return out + inp if enabled else out


def cp_ssm(
    f_v: FeatureMap,
    f_t: FeatureMap,
    w_v: SsmWeights,
    w_t: SsmWeights,
    exchange_c: bool = True,
    order: ScanOrder = ScanOrder.ROWS,
    residual: bool = False,
) -> Tuple[FeatureMap, FeatureMap]:
    """Scans each modality with its own ``B``/``delta`` and, when exchanging, the other's ``C``."""
    same_shape(f_v, f_t, "CP-SSM inputs")
    d, H, W = f_v.shape
    outs_v, outs_t = [], []
    for direction in order.directions:
        x_v, x_t = unfold(f_v, direction), unfold(f_t, direction)
        sp_v, sp_t = project_selective(x_v, w_v), project_selective(x_t, w_t)
        if exchange_c:
            sp_v, sp_t = sp_v.with_c(sp_t.C), sp_t.with_c(sp_v.C)
        y_v, _ = scan_recurrent(x_v, sp_v, w_v)
        y_t, _ = scan_recurrent(x_t, sp_t, w_t)
        outs_v.append(fold(y_v, d, H, W, direction))
        outs_t.append(fold(y_t, d, H, W, direction))
    return (
        _residual(mean_maps(outs_v), f_v, residual),
        _residual(mean_maps(outs_t), f_t, residual),
    )


def shared_params(
    f_v: FeatureMap, f_t: FeatureMap, w: SsmWeights, direction: ScanOrder = ScanOrder.ROWS
) -> SelectiveParams:
    """The one parameter set SP-SSM projects from ``F_V + F_T`` along ``direction``."""
    same_shape(f_v, f_t, "SP-SSM inputs")
    return project_selective(unfold(f_v + f_t, direction), w)


def sp_ssm(
    f_v: FeatureMap,
    f_t: FeatureMap,
    w: SsmWeights,
    order: ScanOrder = ScanOrder.ROWS,
    residual: bool = False,
) -> Tuple[FeatureMap, FeatureMap]:
    same_shape(f_v, f_t, "SP-SSM inputs")
    d, H, W = f_v.shape
    outs_v, outs_t = [], []
    for direction in order.directions:
        params = shared_params(f_v, f_t, w, direction)
        y_v, _ = scan_recurrent(unfold(f_v, direction), params, w)
        y_t, _ = scan_recurrent(unfold(f_t, direction), params, w)
        outs_v.append(fold(y_v, d, H, W, direction))
        outs_t.append(fold(y_t, d, H, W, direction))
    return (
        _residual(mean_maps(outs_v), f_v, residual),
        _residual(mean_maps(outs_t), f_t, residual),
    )


def _path_sequences(x_lead: Tensor, x_trail: Tensor, w: SsmWeights) -> Tuple[Tensor, Tensor]:
    L = x_lead.shape[0]
    s = concat([x_lead, x_trail])
    y, _ = scan_recurrent(s, project_selective(s, w), w)
    return Tensor(y.array[:L]), Tensor(y.array[L:])


def ff_path(
    f_lead: FeatureMap,
    f_trail: FeatureMap,
    w: SsmWeights,
    order: ScanOrder = ScanOrder.ROWS,
) -> Tuple[FeatureMap, FeatureMap]:
    """One concatenation path: scans ``[seq(lead); seq(trail)]`` and folds both halves."""
    same_shape(f_lead, f_trail, "FF-SSM inputs")
    d, H, W = f_lead.shape
    leads, trails = [], []
    for direction in order.directions:
        y_lead, y_trail = _path_sequences(unfold(f_lead, direction), unfold(f_trail, direction), w)
        leads.append(fold(y_lead, d, H, W, direction))
        trails.append(fold(y_trail, d, H, W, direction))
    return mean_maps(leads), mean_maps(trails)


def ff_ssm(
    f_1: FeatureMap,
    f_2: FeatureMap,
    w_12: SsmWeights,
    w_21: SsmWeights,
    order: ScanOrder = ScanOrder.ROWS,
    paths: FfPaths = FfPaths.BIDIRECTIONAL,
    residual: bool = False,
) -> FeatureMap:
    """Merges the ``(F1; F2)`` and ``(F2; F1)`` paths by the mean of their four aligned halves."""
    same_shape(f_1, f_2, "FF-SSM inputs")
    if paths is FfPaths.FORWARD:
        lead, trail = ff_path(f_1, f_2, w_12, order)
        merged = FeatureMap(Tensor((lead.array + trail.array) * 0.5))
    elif paths is FfPaths.BACKWARD:
        lead, trail = ff_path(f_2, f_1, w_21, order)
        merged = FeatureMap(Tensor((lead.array + trail.array) * 0.5))
    else:
        f1_from_12, f2_from_12 = ff_path(f_1, f_2, w_12, order)
        f2_from_21, f1_from_21 = ff_path(f_2, f_1, w_21, order)
        f1_part = f1_from_12.array + f1_from_21.array
        f2_part = f2_from_12.array + f2_from_21.array
        merged = FeatureMap(Tensor((f1_part + f2_part) * 0.25))
    if residual:
        merged = FeatureMap(Tensor(merged.array + (f_1.array + f_2.array) * 0.5))
    return merged


def _average(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    return FeatureMap(Tensor((a.array + b.array) * 0.5))


def _fuse_pair(f_1: FeatureMap, f_2: FeatureMap, ff: FfWeights, w: FusionBlockWeights) -> FeatureMap:
    if not w.use_ff:
        return _average(f_1, f_2)
    return ff_ssm(
        f_1,
        f_2,
        ff.path_12.ssm,
        ff.path_21.ssm,
        order=w.scan_order,
        paths=w.ff_paths,
        residual=w.residual,
    )


def ms2fusion(
    f_v: FeatureMap, f_t: FeatureMap, w: FusionBlockWeights, record: bool = False
) -> FusedOutput:
    same_shape(f_v, f_t, "fusion inputs")
    if w.use_cp:
        cp_v, cp_t = cp_ssm(
            f_v,
            f_t,
            w.cp_v.ssm,
            w.cp_t.ssm,
            exchange_c=w.exchange_c,
            order=w.scan_order,
            residual=w.residual,
        )
    else:
        cp_v, cp_t = f_v, f_t
    if w.use_sp:
        sp_v, sp_t = sp_ssm(f_v, f_t, w.sp.ssm, order=w.scan_order, residual=w.residual)
    else:
        sp_v, sp_t = f_v, f_t
    enh_v = _fuse_pair(cp_v, sp_v, w.ff_enh_v, w)
    enh_t = _fuse_pair(cp_t, sp_t, w.ff_enh_t, w)
    fused = _fuse_pair(enh_v, enh_t, w.ff_final, w)
    logger.debug(f"Fused {f_v.shape} pair with order={w.scan_order.value}, exchange_c={w.exchange_c}")
    intermediates = None
    if record:
        intermediates = {
            "cp_v": cp_v,
            "cp_t": cp_t,
            "sp_v": sp_v,
            "sp_t": sp_t,
            "enh_v": enh_v,
            "enh_t": enh_t,
        }
    return FusedOutput(f_fused=fused, intermediates=intermediates)


def _init_ssm(rng: np.random.Generator, d: int, d_state: int, delta_bias: bool) -> SsmWeights:
    bound = 1.0 / sqrt(d)
    A = -(1.0 + rng.uniform(0.0, 1.0, (d, d_state)))
    W_B = rng.uniform(-bound, bound, (d, d * d_state))
    W_C = rng.uniform(-bound, bound, (d, d * d_state))
    W_delta = rng.uniform(-bound, bound, (d, d))
    b_delta = np.zeros(d)
    if delta_bias:
        # softplus(b_delta) log-uniform in [DELTA_MIN, DELTA_MAX]
        dt = np.exp(rng.uniform(np.log(DELTA_MIN), np.log(DELTA_MAX), d))
        b_delta = dt + np.log(-np.expm1(-dt))
    return SsmWeights.create(A, np.ones(d), W_B, W_C, W_delta, b_delta=b_delta)


def init_weights(d: int, d_state: int, seed: int, delta_bias: bool = False, **switches) -> FusionBlockWeights:
    if d < 1 or d_state < 1:
        raise ParameterError(f"d and d_state must be >= 1, got d={d}, d_state={d_state}")
    rng = np.random.default_rng(seed)

    def branch():
        return BranchWeights(_init_ssm(rng, d, d_state, delta_bias))

    def ff():
        return FfWeights(path_12=branch(), path_21=branch())

    return FusionBlockWeights(
        cp_v=branch(),
        cp_t=branch(),
        sp=branch(),
        ff_enh_v=ff(),
        ff_enh_t=ff(),
        ff_final=ff(),
        **switches,
    )


def from_named_parameters(params: Dict[str, Tensor], **switches) -> FusionBlockWeights:
    """Rebuilds block weights from ``named_parameters`` output, e.g. a loaded manifest."""

    def branch(prefix):
        return BranchWeights(
            SsmWeights(**{name: params[f"{prefix}.{name}"] for name in SsmWeights.__dataclass_fields__})
        )

    def ff(prefix):
        return FfWeights(path_12=branch(f"{prefix}.path_12"), path_21=branch(f"{prefix}.path_21"))

    return FusionBlockWeights(
        cp_v=branch("cp_v"),
        cp_t=branch("cp_t"),
        sp=branch("sp"),
        ff_enh_v=ff("ff_enh_v"),
        ff_enh_t=ff("ff_enh_t"),
        ff_final=ff("ff_final"),
        **switches,
    )
