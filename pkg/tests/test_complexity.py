import pytest

from ssfuse.complexity import (
    METHODS,
    compare_methods,
    count_flops,
    count_params,
    scaling_exponent,
    ssm_params,
)
from ssfuse.layout import ScanOrder
from utils.config import RunConfig
from utils.exceptions import UsageError


@pytest.fixture
def wide():
    return RunConfig(d=64, H=32, W=32)


class TestCounts:
    def test_single_channel_params(self):
        assert ssm_params(1, 1) == 8
        assert count_params(RunConfig(d=1, d_state=1)).params == 72

    def test_params_independent_of_extent(self):
        config = RunConfig(d=8, d_state=4)
        for method in METHODS:
            assert count_flops(config, 4, 4, method).params == count_flops(config, 32, 16, method).params

    def test_attention_costs_more_than_fusion(self, wide):
        flops = {r.method_label: r.flops for r in compare_methods(wide)}
        assert flops["ms2fusion"] == 195035136
        assert flops["attention_ref"] == 301989888
        assert flops["attention_ref"] / flops["ms2fusion"] > 1.0

    def test_doubling_height_doubles_fusion_flops(self, wide):
        assert count_flops(wide, 64, 32).flops == 2 * count_flops(wide, 32, 32).flops

    def test_two_directions_double_the_scan_cost(self):
        rows = RunConfig(d=4, d_state=2)
        both = RunConfig(d=4, d_state=2, scan_order=ScanOrder.ROWS_AND_COLUMNS)
        assert count_flops(both, 8, 8).flops == 2 * count_flops(rows, 8, 8).flops

    def test_unknown_method(self, wide):
        with pytest.raises(UsageError):
            count_flops(wide, 4, 4, "rnn_ref")


class TestScaling:
    def test_fusion_is_linear(self, wide):
        assert scaling_exponent(wide, 32, 32, "ms2fusion") == pytest.approx(2.0, abs=0.01)

    def test_attention_is_quadratic(self, wide):
        assert scaling_exponent(wide, 32, 32, "attention_ref") >= 3.5

    def test_report_fields(self, wide):
        report = count_params(wide, "cnn_ref")
        assert (report.method_label, report.d, report.H, report.W) == ("cnn_ref", 64, 32, 32)
