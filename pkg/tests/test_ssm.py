import math

import numpy as np
import pytest

from ssfuse.ssm import (
    DELTA_FLOOR,
    SelectiveParams,
    SsmWeights,
    apply_kernel,
    discretize,
    kernel_lti,
    lti_params,
    project_selective,
    scan_recurrent,
)
from ssfuse.tensor import Tensor
from utils.exceptions import DimensionError, ParameterError

LN2 = math.log(2.0)


def scalar_weights(A=-1.0, D=0.5):
    return SsmWeights.create([[A]], [D], [[0.0]], [[0.0]], [[0.0]])


def random_weights(rng, d, n, bias=False):
    return SsmWeights.create(
        -(1.0 + rng.uniform(0.0, 1.0, (d, n))),
        rng.standard_normal(d),
        rng.standard_normal((d, d * n)),
        rng.standard_normal((d, d * n)),
        rng.standard_normal((d, d)),
        b_B=rng.standard_normal(d * n) if bias else None,
        b_C=rng.standard_normal(d * n) if bias else None,
        b_delta=rng.standard_normal(d) if bias else None,
    )


def random_params(rng, L, d, n):
    return SelectiveParams(
        Tensor(rng.standard_normal((L, d, n))),
        Tensor(rng.standard_normal((L, d, n))),
        Tensor(rng.uniform(1e-2, 1.0, (L, d))),
    )


class TestWeights:
    def test_rejects_non_negative_a(self):
        with pytest.raises(ParameterError):
            SsmWeights.create([[0.0]], [1.0], [[0.0]], [[0.0]], [[0.0]])

    def test_rejects_bad_projection_shape(self):
        with pytest.raises(DimensionError):
            SsmWeights.create([[-1.0, -1.0]], [1.0], [[0.0]], [[0.0, 0.0]], [[0.0]])

    def test_named_parameters(self, rng):
        names = [name for name, _ in random_weights(rng, 2, 3).named_parameters("sp.")]
        assert names[0] == "sp.A"
        assert len(names) == 8


class TestProjection:
    def test_zero_input(self, rng):
        w = random_weights(rng, 2, 3)
        sp = project_selective(Tensor.zeros((5, 2)), w)
        assert not sp.B.array.any()
        assert not sp.C.array.any()
        assert np.allclose(sp.delta.array, LN2, rtol=1e-15, atol=0.0)

    def test_identity_delta_projection(self):
        w = SsmWeights.create([[-1.0]], [1.0], [[0.0]], [[0.0]], [[1.0]])
        sp = project_selective(Tensor([[1.0]]), w)
        assert sp.delta.data[0] == pytest.approx(1.3132616875182228, rel=1e-15)

    def test_step_stays_positive_when_softplus_underflows(self):
        w = SsmWeights.create([[-1.0]], [1.0], [[1.0]], [[1.0]], [[1.0]])
        sp = project_selective(Tensor([[-1000.0], [-745.5], [2.0]]), w)
        assert sp.delta.array[0, 0] == DELTA_FLOOR
        assert np.all(sp.delta.array > 0.0)
        y, _ = scan_recurrent(Tensor([[-1000.0], [-745.5], [2.0]]), sp, w)
        assert np.all(np.isfinite(y.array))

    def test_matches_per_row_oracle(self, rng):
        L, d, n = 3, 2, 2
        w = random_weights(rng, d, n, bias=True)
        x = rng.standard_normal((L, d))
        sp = project_selective(Tensor(x), w)
        for name, W, b in (("B", w.W_B.array, w.b_B.array), ("C", w.W_C.array, w.b_C.array)):
            expected = np.empty((L, d * n))
            for t in range(L):
                for k in range(d * n):
                    s = 0.0
                    for i in range(d):
                        s += x[t, i] * W[i, k]
                    expected[t, k] = s + b[k]
            assert np.array_equal(getattr(sp, name).array.reshape(L, d * n), expected)

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            project_selective(Tensor.zeros((4, 3)), random_weights(rng, 2, 1))


class TestDiscretize:
    def test_a_bar(self):
        a_bar, _ = discretize(Tensor([[-1.0]]), Tensor([LN2]), Tensor([[1.0]]))
        assert a_bar.data[0] == pytest.approx(0.5, rel=1e-15)

    def test_singular_branch(self):
        _, b_bar = discretize(Tensor([[-1e-12]]), Tensor([1.0]), Tensor([[2.0]]))
        assert abs(b_bar.data[0] - 2.0) <= 1e-9

    def test_b_bar(self):
        _, b_bar = discretize(Tensor([[-2.0]]), Tensor([0.5]), Tensor([[3.0]]))
        assert b_bar.data[0] == pytest.approx(1.8963617, abs=1e-7)
        assert b_bar.data[0] == pytest.approx(3.0 * (1.0 - math.exp(-1.0)), rel=1e-14)

    @pytest.mark.parametrize("step", [1e-3, 1e-5])
    def test_small_step_limit(self, rng, step):
        A = -(1.0 + rng.uniform(0.0, 1.0, (3, 4)))
        a_bar, _ = discretize(Tensor(A), Tensor(np.full(3, step)), Tensor(np.ones((3, 4))))
        dA = step * A
        assert np.all(np.abs(a_bar.array - (1.0 + dA)) <= 2.0 * dA**2)

    def test_rejects_non_positive_delta(self):
        with pytest.raises(ParameterError):
            discretize(Tensor([[-1.0]]), Tensor([0.0]), Tensor([[1.0]]))


class TestScan:
    def test_zero_input(self, rng):
        w = random_weights(rng, 2, 3)
        y, h = scan_recurrent(Tensor.zeros((6, 2)), random_params(rng, 6, 2, 3), w)
        assert not y.array.any()
        assert not h.array.any()

    def test_single_step_closed_form(self):
        sp = SelectiveParams(Tensor([[[1.0]]]), Tensor([[[1.0]]]), Tensor([[LN2]]))
        y, _ = scan_recurrent(Tensor([[2.0]]), sp, scalar_weights(A=-1.0, D=0.5))
        assert abs(y.data[0] - 2.44269504) <= 1e-8
        assert y.data[0] == pytest.approx(1.0 / LN2 + 1.0, rel=1e-14)

    def test_final_state_continues_the_scan(self, rng):
        L, d, n = 10, 2, 3
        w = random_weights(rng, d, n)
        params = random_params(rng, L, d, n)
        x = rng.standard_normal((L, d))
        y_full, h_full = scan_recurrent(Tensor(x), params, w)

        def part(lo, hi):
            return SelectiveParams(
                Tensor(params.B.array[lo:hi]),
                Tensor(params.C.array[lo:hi]),
                Tensor(params.delta.array[lo:hi]),
            )

        y_a, h_a = scan_recurrent(Tensor(x[:4]), part(0, 4), w)
        y_b, h_b = scan_recurrent(Tensor(x[4:]), part(4, L), w, h0=h_a)
        assert np.array_equal(np.concatenate([y_a.array, y_b.array]), y_full.array)
        assert h_b.equal(h_full)

    def test_linear_in_x_for_frozen_params(self, rng):
        w = random_weights(rng, 2, 2)
        params = random_params(rng, 12, 2, 2)
        x1, x2 = rng.standard_normal((12, 2)), rng.standard_normal((12, 2))
        mixed, _ = scan_recurrent(Tensor(0.7 * x1 - 1.3 * x2), params, w)
        y1, _ = scan_recurrent(Tensor(x1), params, w)
        y2, _ = scan_recurrent(Tensor(x2), params, w)
        assert np.allclose(mixed.array, 0.7 * y1.array - 1.3 * y2.array, rtol=0.0, atol=1e-10)

    def test_causal(self, rng):
        L = 16
        w = random_weights(rng, 2, 1)
        params = random_params(rng, L, 2, 1)
        x = rng.standard_normal((L, 2))
        y0, _ = scan_recurrent(Tensor(x), params, w)
        for k in range(L):
            bumped = x.copy()
            bumped[k] += 1.0
            y1, _ = scan_recurrent(Tensor(bumped), params, w)
            assert np.array_equal(y1.array[:k], y0.array[:k])

    @pytest.mark.parametrize("seed", range(10))
    def test_selective_scan_sensitivity_is_causal(self, seed):
        L, d, eps = 16, 2, 1e-4
        rng = np.random.default_rng(seed)
        w = random_weights(rng, d, 2, bias=True)
        x = rng.standard_normal((L, d))

        def run(seq):
            y, _ = scan_recurrent(Tensor(seq), project_selective(Tensor(seq), w), w)
            return y.array

        for k in range(L):
            for c in range(d):
                plus, minus = x.copy(), x.copy()
                plus[k, c] += eps
                minus[k, c] -= eps
                sens = (run(plus) - run(minus)) / (2.0 * eps)
                assert np.all(np.abs(sens[:k]) <= 1e-12)
                assert np.any(np.abs(sens[k:]) > 1e-12)

    def test_shape_mismatch(self, rng):
        w = random_weights(rng, 2, 3)
        with pytest.raises(DimensionError):
            scan_recurrent(Tensor.zeros((5, 2)), random_params(rng, 4, 2, 3), w)
        with pytest.raises(DimensionError):
            scan_recurrent(Tensor.zeros((4, 2)), random_params(rng, 4, 2, 3), w, h0=Tensor.zeros((2, 2)))


class TestKernel:
    def test_geometric_kernel(self):
        # B = 2 ln 2 makes B_bar exactly one step of gain 1 at A = -1, delta = ln 2
        w = scalar_weights(A=-1.0)
        kernel = kernel_lti(w, Tensor([[2.0 * LN2]]), Tensor([[1.0]]), Tensor([LN2]), 4)
        assert np.allclose(kernel.array[0], [1.0, 0.5, 0.25, 0.125], rtol=1e-12, atol=0.0)

    def test_memoryless_kernel(self):
        w = scalar_weights(A=-50.0)
        kernel = kernel_lti(w, Tensor([[1.0]]), Tensor([[1.0]]), Tensor([1.0]), 5)
        assert kernel.array[0, 0] == pytest.approx(1.0 / 50.0, rel=1e-12)
        assert np.all(np.abs(kernel.array[0, 1:]) < 1e-20)

    def test_impulse_response_is_non_increasing(self, rng):
        w = random_weights(rng, 3, 1)
        B = Tensor(rng.standard_normal((3, 1)))
        C = Tensor(rng.standard_normal((3, 1)))
        kernel = np.abs(kernel_lti(w, B, C, Tensor(rng.uniform(0.1, 1.0, 3)), 20).array)
        assert np.all(np.diff(kernel, axis=1) <= 0.0)

    def test_apply_impulse(self, rng):
        kernel = Tensor(rng.standard_normal((2, 6)))
        D = Tensor([0.3, -0.4])
        x = np.zeros((6, 2))
        x[0] = 1.0
        y = apply_kernel(Tensor(x), kernel, D)
        expected = kernel.array.T.copy()
        expected[0] += D.array
        assert np.allclose(y.array, expected, rtol=0.0, atol=1e-15)

    def test_apply_identity_kernel(self, rng):
        x = Tensor(rng.standard_normal((5, 2)))
        kernel = np.zeros((2, 5))
        kernel[:, 0] = 1.0
        assert apply_kernel(x, Tensor(kernel), Tensor.zeros((2,))).equal(x)

    def test_matches_naive_double_loop(self, rng):
        L, d = 32, 3
        x, k, D = rng.standard_normal((L, d)), rng.standard_normal((d, L)), rng.standard_normal(d)
        expected = np.empty((L, d))
        for i in range(L):
            for j in range(d):
                s = 0.0
                for t in range(i + 1):
                    s += k[j, t] * x[i - t, j]
                expected[i, j] = s + D[j] * x[i, j]
        assert np.array_equal(apply_kernel(Tensor(x), Tensor(k), Tensor(D)).array, expected)

    def test_short_kernel(self):
        with pytest.raises(DimensionError):
            apply_kernel(Tensor.zeros((5, 1)), Tensor.zeros((1, 4)), Tensor.zeros((1,)))

    def test_scan_and_kernel_agree(self, rng):
        d, n, L = 4, 8, 64
        w = random_weights(rng, d, n)
        B, C = Tensor(rng.standard_normal((d, n))), Tensor(rng.standard_normal((d, n)))
        delta = Tensor(rng.uniform(1e-2, 1.0, d))
        x = Tensor(rng.standard_normal((L, d)))
        y_scan, _ = scan_recurrent(x, lti_params(B, C, delta, L), w)
        y_conv = apply_kernel(x, kernel_lti(w, B, C, delta, L), w.D)
        scale = np.max(np.abs(y_conv.array))
        assert np.max(np.abs(y_scan.array - y_conv.array)) / scale <= 1e-9

    def test_kernel_is_the_scan_impulse_response(self, rng):
        d, n, L = 2, 3, 8
        w = random_weights(rng, d, n)
        B, C = Tensor(rng.standard_normal((d, n))), Tensor(rng.standard_normal((d, n)))
        delta = Tensor(rng.uniform(1e-2, 1.0, d))
        impulse = np.zeros((L, d))
        impulse[0] = 1.0
        y, _ = scan_recurrent(Tensor(impulse), lti_params(B, C, delta, L), w)
        response = y.array - w.D.array * impulse
        kernel = kernel_lti(w, B, C, delta, L).array
        assert np.max(np.abs(response - kernel.T)) <= 1e-10
