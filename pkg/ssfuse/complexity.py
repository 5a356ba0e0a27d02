"""Closed-form parameter and multiply-accumulate counts.

``attention_ref`` is a two-branch cross-attention fusion (Q, K, V, O per
branch) and ``cnn_ref`` a two-branch 3x3 convolution followed by a 1x1
merge, both at the same channel width as the fusion block.
"""
from dataclasses import dataclass

from utils.exceptions import UsageError

METHODS = ("ms2fusion", "cnn_ref", "attention_ref")
SSM_BRANCHES = 9


@dataclass(frozen=True)
class ComplexityReport:
    method_label: str
    params: int
    flops: int
    d: int
    H: int
    W: int


def ssm_params(d: int, n: int) -> int:
    # A, D, W_B, W_C, W_delta, b_B, b_C, b_delta
    return d * n + d + 2 * d * d * n + d * d + 2 * d * n + d


def projection_macs(steps: int, d: int, n: int) -> int:
    return steps * (2 * d * d * n + d * d)


def scan_macs(steps: int, d: int, n: int) -> int:
    # discretisation 2dn, state update 2dn, readout dn, skip d
    return steps * (5 * d * n + d)


def _ms2fusion_flops(d, n, L, directions):
    cp = 2 * projection_macs(L, d, n) + 2 * scan_macs(L, d, n)
    sp = projection_macs(L, d, n) + 2 * scan_macs(L, d, n)
    ff = 2 * projection_macs(2 * L, d, n) + 2 * scan_macs(2 * L, d, n)
    return directions * (cp + sp + 3 * ff)


def _counts(method, d, n, L, directions):
    if method == "ms2fusion":
        return SSM_BRANCHES * ssm_params(d, n), _ms2fusion_flops(d, n, L, directions)
    if method == "attention_ref":
        return 2 * (4 * d * d + 4 * d), 2 * (4 * L * d * d + 2 * L * L * d)
    if method == "cnn_ref":
        params = 2 * (9 * d * d + d) + (2 * d * d + d)
        return params, 2 * 9 * d * d * L + 2 * d * d * L
    raise UsageError(f"Unknown method {method!r}; valid methods: {', '.join(METHODS)}")


def count_flops(config, H: int, W: int, method="ms2fusion") -> ComplexityReport:
    directions = len(config.scan_order.directions)
    params, flops = _counts(method, config.d, config.d_state, H * W, directions)
    return ComplexityReport(method, params, flops, config.d, H, W)


def count_params(config, method="ms2fusion") -> ComplexityReport:
    return count_flops(config, config.H, config.W, method)


def scaling_exponent(config, H: int, W: int, method: str) -> float:
    """FLOPs at twice the sequence length over FLOPs at the given length."""
    base = count_flops(config, H, W, method).flops
    return count_flops(config, 2 * H, W, method).flops / base


def compare_methods(config, H=None, W=None):
    H = config.H if H is None else H
    W = config.W if W is None else W
    return [count_flops(config, H, W, method) for method in METHODS]
