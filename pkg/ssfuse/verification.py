"""Oracles for the fusion stack: finite differences, ERF maps, scan equivalence and the property suite."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ssfuse.blocks import (
    FusionBlockWeights,
    ff_path,
    ff_ssm,
    init_weights,
    ms2fusion,
    cp_ssm,
    sp_ssm,
)
from ssfuse.layout import FeatureMap, ScanOrder, fold, unfold
from ssfuse.ssm import (
    SsmWeights,
    SelectiveParams,
    apply_kernel,
    discretize,
    kernel_lti,
    lti_params,
    scan_recurrent,
)
from ssfuse.tensor import Tensor
from utils.checks import positive, same_shape
from utils.exceptions import DimensionError, UsageError
from utils.utilities import make_rng, thread_count

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-4
DEFAULT_TRIALS = 8
SUPPORT_THRESHOLD = 1e-12

Block = Callable[[FeatureMap, FeatureMap], FeatureMap]
OutPos = Tuple[Optional[int], int, int]


@dataclass(frozen=True)
class ErfMap:
    values: Tensor
    center: Tuple[int, int]
    normalization: float

    @property
    def raw(self) -> np.ndarray:
        return self.values.array * self.normalization

    def support(self, threshold=SUPPORT_THRESHOLD) -> int:
        return int((self.raw > threshold).sum())

    def support_mask(self, threshold=SUPPORT_THRESHOLD) -> np.ndarray:
        return self.raw > threshold


@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_err: float
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    measured: float
    limit: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: measured={self.measured:.3e} limit={self.limit:.3e}"
        return f"{text} ({self.note})" if self.note else text


def compare(actual: Tensor, expected: Tensor, tol: float) -> EquivalenceReport:
    same_shape(actual, expected, "compared tensors")
    err = float(np.max(np.abs(actual.array - expected.array), initial=0.0))
    scale = float(np.max(np.abs(expected.array), initial=0.0))
    rel = err / max(scale, np.finfo(np.float64).tiny)
    return EquivalenceReport(max_abs_err=err, max_rel_err=rel, tolerance=tol)


def _probe_value(out: FeatureMap, out_pos: OutPos) -> float:
    channel, row, col = out_pos
    if channel is None:
        return float(out.array[:, row, col].sum())
    return float(out.array[channel, row, col])


def _check_position(shape, out_pos: OutPos):
    d, H, W = shape
    channel, row, col = out_pos
    if not (0 <= row < H and 0 <= col < W) or (channel is not None and not 0 <= channel < d):
        raise DimensionError(f"probe position {out_pos} is outside a {d}x{H}x{W} map")


def _evaluate(block: Block, stacked: np.ndarray, out_pos: OutPos) -> float:
    out = block(FeatureMap(Tensor(stacked[0])), FeatureMap(Tensor(stacked[1])))
    return _probe_value(out, out_pos)


def probe_fd(block: Block, f_v, f_t, out_pos: OutPos, in_index, eps=DEFAULT_EPS) -> float:
    """Central difference of one output entry against one input coordinate ``(modality, c, r, col)``."""
    positive(eps, "eps")
    base = np.stack([f_v.array, f_t.array])
    plus, minus = base.copy(), base.copy()
    plus[in_index] += eps
    minus[in_index] -= eps
    return (_evaluate(block, plus, out_pos) - _evaluate(block, minus, out_pos)) / (2.0 * eps)


def sensitivity_fd(block: Block, f_v: FeatureMap, f_t: FeatureMap, out_pos: OutPos, eps=DEFAULT_EPS) -> Tensor:
    """``d y[out_pos] / d input`` for both modalities as a ``2 x d x H x W`` tensor.

    ``out_pos`` is ``(channel, row, col)``; a ``None`` channel probes the channel sum.
    """
    positive(eps, "eps")
    same_shape(f_v, f_t, "sensitivity inputs")
    _check_position(f_v.shape, out_pos)
    base = np.stack([f_v.array, f_t.array])
    indices = list(np.ndindex(base.shape))

    def coordinate(index):
        plus, minus = base.copy(), base.copy()
        plus[index] += eps
        minus[index] -= eps
        return (_evaluate(block, plus, out_pos) - _evaluate(block, minus, out_pos)) / (2.0 * eps)

    workers = min(thread_count(), len(indices))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(coordinate, indices))
    else:
        values = [coordinate(index) for index in indices]
    return Tensor(np.array(values).reshape(base.shape))


def erf_map(
    block: Block,
    input_shape,
    center: Tuple[int, int],
    eps=DEFAULT_EPS,
    trials=DEFAULT_TRIALS,
    seed=0,
) -> ErfMap:
    d, H, W = input_shape
    row, col = center
    _check_position(input_shape, (None, row, col))
    positive(trials, "trials")
    rng = make_rng(seed)
    total = np.zeros((H, W))
    for trial in range(trials):
        f_v = FeatureMap(Tensor(rng.standard_normal(input_shape)))
        f_t = FeatureMap(Tensor(rng.standard_normal(input_shape)))
        sens = sensitivity_fd(block, f_v, f_t, (None, row, col), eps)
        total += np.abs(sens.array).sum(axis=1).mean(axis=0)
        logger.debug(f"ERF trial {trial + 1}/{trials} done")
    raw = total / trials
    peak = float(raw.max())
    values = raw / peak if peak > 0 else raw
    return ErfMap(values=Tensor(values), center=(row, col), normalization=peak)


def conv3_block(d: int, seed=0) -> Block:
    """Two-branch 3x3 convolution fusion with zero padding, summed across modalities."""
    rng = make_rng(seed)
    bound = 1.0 / sqrt(9 * d)
    k_v = rng.uniform(-bound, bound, (d, d, 3, 3))
    k_t = rng.uniform(-bound, bound, (d, d, 3, 3))

    def conv(x, k):
        windows = sliding_window_view(np.pad(x, ((0, 0), (1, 1), (1, 1))), (3, 3), axis=(1, 2))
        return np.einsum("ihwab,oiab->ohw", windows, k)

    def block(f_v: FeatureMap, f_t: FeatureMap) -> FeatureMap:
        same_shape(f_v, f_t, "conv inputs")
        return FeatureMap(Tensor(conv(f_v.array, k_v) + conv(f_t.array, k_t)))

    return block


ERF_BLOCKS = ("ms2fusion", "ff_uni_12", "ff_uni_21", "ff_bidir", "conv3_ref")


def erf_block(selector: str, weights: FusionBlockWeights, seed=0) -> Block:
    """Block under test for an ERF selector; single-path selectors expose the leading half."""
    ff, order = weights.ff_final, weights.scan_order
    if selector == "ms2fusion":
        return lambda f_v, f_t: ms2fusion(f_v, f_t, weights).f_fused
    if selector == "ff_uni_12":
        return lambda f_v, f_t: ff_path(f_v, f_t, ff.path_12.ssm, order)[0]
    if selector == "ff_uni_21":
        return lambda f_v, f_t: ff_path(f_t, f_v, ff.path_21.ssm, order)[0]
    if selector == "ff_bidir":
        return lambda f_v, f_t: ff_ssm(f_v, f_t, ff.path_12.ssm, ff.path_21.ssm, order)
    if selector == "conv3_ref":
        return conv3_block(weights.d, seed)
    raise UsageError(f"Unknown block {selector!r}; valid blocks: {', '.join(ERF_BLOCKS)}")


def random_lti(rng, d: int, d_state: int):
    A = -(1.0 + rng.uniform(0.0, 1.0, (d, d_state)))
    w = SsmWeights.create(
        A,
        rng.standard_normal(d),
        np.zeros((d, d * d_state)),
        np.zeros((d, d * d_state)),
        np.zeros((d, d)),
    )
    B = Tensor(rng.standard_normal((d, d_state)))
    C = Tensor(rng.standard_normal((d, d_state)))
    delta = Tensor(rng.uniform(1e-2, 1.0, d))
    return w, B, C, delta


def check_scan_equivalence(seed, d, d_state, L, tol, corrupt=False) -> EquivalenceReport:
    """Recurrent scan against kernel convolution on one seeded time-invariant instance."""
    rng = make_rng(seed)
    w, B, C, delta = random_lti(rng, d, d_state)
    x = Tensor(rng.standard_normal((L, d)))
    y_scan, _ = scan_recurrent(x, lti_params(B, C, delta, L), w)
    kernel = kernel_lti(w, B, C, delta, L)
    if corrupt:
        bad = kernel.array.copy()
        bad[0, 0] += 1.0
        kernel = Tensor(bad)
    report = compare(y_scan, apply_kernel(x, kernel, w.D), tol)
    logger.debug(f"scan equivalence seed={seed} d={d} d_state={d_state} L={L}: {report}")
    return report


def _random_pair(rng, shape):
    return (
        FeatureMap(Tensor(rng.standard_normal(shape))),
        FeatureMap(Tensor(rng.standard_normal(shape))),
    )


def _max_diff(a, b) -> float:
    return float(np.max(np.abs(a.array - b.array), initial=0.0))


def run_property_suite(config) -> List[CheckOutcome]:
    """Runs every property check at the configured sizes; the caller decides what failure means."""
    d, n, H, W = config.d, config.d_state, config.H, config.W
    shape, L = (d, H, W), H * W
    rng = make_rng(config.seed)
    weights = init_weights(d, n, config.seed, delta_bias=config.delta_bias, **config.block_switches)
    order = config.scan_order
    outcomes = []

    report = check_scan_equivalence(config.seed, d, n, L, config.tol)
    outcomes.append(
        CheckOutcome("scan_equivalence", report.passed, report.max_rel_err, config.tol,
                     f"max_abs_err={report.max_abs_err:.3e}")
    )

    A = Tensor(-(1.0 + rng.uniform(0.0, 1.0, (d, n))))
    B = Tensor(rng.standard_normal((d, n)))
    worst = 0.0
    for step in (1e-3, 1e-5):
        a_bar, _ = discretize(A, Tensor(np.full(d, step)), B)
        dA = step * A.array
        err = np.abs(a_bar.array - (1.0 + dA))
        worst = max(worst, float(np.max(err / (2.0 * dA**2))))
    outcomes.append(CheckOutcome("zoh_limit", worst <= 1.0, worst, 1.0, "|A_bar-(1+dA)| / 2(dA)^2"))

    tiny_a = Tensor(np.full((d, n), -1e-12))
    _, b_bar = discretize(tiny_a, Tensor(np.ones(d)), B)
    err = _max_diff(b_bar, B)
    outcomes.append(CheckOutcome("zoh_singular_branch", err <= 1e-9, err, 1e-9))

    steps = min(L, 16)
    w_lti, Bl, Cl, dl = random_lti(rng, d, n)
    frozen = lti_params(Bl, Cl, dl, steps)
    x = rng.standard_normal((steps, d))
    y0, _ = scan_recurrent(Tensor(x), frozen, w_lti)
    leak = 0.0
    for k in range(steps):
        bumped = x.copy()
        bumped[k] += config.eps
        y1, _ = scan_recurrent(Tensor(bumped), frozen, w_lti)
        leak = max(leak, float(np.max(np.abs(y1.array[:k] - y0.array[:k]), initial=0.0)) / config.eps)
    outcomes.append(CheckOutcome("causality", leak <= 1e-12, leak, 1e-12))

    sel = SelectiveParams(
        Tensor(rng.standard_normal((steps, d, n))),
        Tensor(rng.standard_normal((steps, d, n))),
        Tensor(rng.uniform(1e-2, 1.0, (steps, d))),
    )
    x1, x2 = Tensor(rng.standard_normal((steps, d))), Tensor(rng.standard_normal((steps, d)))
    alpha, beta = 0.7, -1.3
    mixed, _ = scan_recurrent(Tensor(alpha * x1.array + beta * x2.array), sel, w_lti)
    y1, _ = scan_recurrent(x1, sel, w_lti)
    y2, _ = scan_recurrent(x2, sel, w_lti)
    report = compare(mixed, Tensor(alpha * y1.array + beta * y2.array), config.tol)
    outcomes.append(CheckOutcome("linearity", report.passed, report.max_rel_err, config.tol))

    f_v, f_t = _random_pair(rng, shape)
    err = 0.0
    for o in ScanOrder:
        err = max(err, _max_diff(fold(unfold(f_v, o), d, H, W, o).data, f_v.data))
    outcomes.append(CheckOutcome("fold_roundtrip", err == 0.0, err, 0.0, "all scan orders"))

    sym_v, sym_t = cp_ssm(f_v, f_v, weights.cp_v.ssm, weights.cp_v.ssm, True, order)
    plain_v, plain_t = cp_ssm(f_v, f_v, weights.cp_v.ssm, weights.cp_v.ssm, False, order)
    err = max(_max_diff(sym_v, plain_v), _max_diff(sym_t, plain_t))
    outcomes.append(CheckOutcome("cp_exchange_noop", err == 0.0, err, 0.0, "symmetric inputs"))

    swap_on, _ = cp_ssm(f_v, f_t, weights.cp_v.ssm, weights.cp_t.ssm, True, order)
    swap_off, _ = cp_ssm(f_v, f_t, weights.cp_v.ssm, weights.cp_t.ssm, False, order)
    diff = _max_diff(swap_on, swap_off)
    outcomes.append(CheckOutcome("cp_exchange_live", diff > 1e-8, diff, 1e-8, "must exceed limit"))

    out_v, out_t = sp_ssm(f_v, f_t, weights.sp.ssm, order)
    back_t, back_v = sp_ssm(f_t, f_v, weights.sp.ssm, order)
    err = max(_max_diff(out_v, back_v), _max_diff(out_t, back_t))
    outcomes.append(CheckOutcome("sp_swap_equivariance", err == 0.0, err, 0.0))

    ff = weights.ff_final
    forward = ff_ssm(f_v, f_t, ff.path_12.ssm, ff.path_21.ssm, order)
    relabelled = ff_ssm(f_t, f_v, ff.path_21.ssm, ff.path_12.ssm, order)
    err = _max_diff(forward, relabelled)
    outcomes.append(CheckOutcome("ff_relabel_symmetry", err == 0.0, err, 0.0))

    first = ms2fusion(f_v, f_t, weights).f_fused
    second = ms2fusion(f_v, f_t, weights).f_fused
    err = _max_diff(first, second)
    outcomes.append(CheckOutcome("determinism", err == 0.0, err, 0.0))

    zero = FeatureMap(Tensor.zeros(shape))
    err = float(np.max(np.abs(ms2fusion(zero, zero, weights).f_fused.array)))
    outcomes.append(CheckOutcome("zero_input", err == 0.0, err, 0.0))

    if L > 1:
        # reach checks run on the log-uniform step init; zero-bias steps decay below rounding
        reach_weights = init_weights(d, n, config.seed, delta_bias=True, **config.block_switches)
        block = erf_block("ms2fusion", reach_weights)
        reach = 0.0
        for modality in range(2):
            for channel in range(d):
                reach += abs(
                    probe_fd(block, f_v, f_t, (None, 0, 0), (modality, channel, H - 1, W - 1), config.eps)
                )
        outcomes.append(
            CheckOutcome("global_context", reach > SUPPORT_THRESHOLD, reach, SUPPORT_THRESHOLD,
                         "must exceed limit")
        )

        bidir = erf_map(erf_block("ff_bidir", reach_weights), shape, (0, 0), config.eps, 1, config.seed)
        uni = erf_map(erf_block("ff_uni_12", reach_weights), shape, (0, 0), config.eps, 1, config.seed)
        contained = bool(np.all(bidir.support_mask() >= uni.support_mask()))
        ok = contained and bidir.support() > uni.support()
        outcomes.append(
            CheckOutcome("bidirectional_coverage", ok, float(bidir.support()), float(uni.support()),
                         "bidirectional support must strictly contain the single path")
        )

    for outcome in outcomes:
        logger.debug(outcome.line())
    return outcomes
