"""Engine contracts: shapes, graph mechanics, and primitive gradients."""

import numpy as np
import pytest

import sepscan.numerics as nm
from sepscan.gradcheck import run_suite
from sepscan.numerics import NumericsError, Tensor


def t(arr, grad=False):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


# ---------------------------------------------------------------------------
# operand rules
# ---------------------------------------------------------------------------


class TestOperandRules:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(NumericsError):
            nm.add(t(np.zeros((2, 3))), t(np.zeros(3)))
        with pytest.raises(NumericsError):
            nm.mul(t(np.zeros((2, 3))), t(np.zeros((2, 1))))

    def test_scalar_broadcast_allowed(self):
        y = nm.mul(t(np.ones((2, 3))), t(2.0))
        assert y.shape == (2, 3)
        assert np.all(y.data == 2.0)
        y2 = nm.add(t(3.0), t(np.full((4,), 1.5)))
        assert np.all(y2.data == 4.5)

    def test_dtype_mismatch_rejected(self):
        a = Tensor(np.zeros(3, dtype=np.float64))
        b = Tensor(np.zeros(3, dtype=np.float32))
        with pytest.raises(NumericsError):
            nm.add(a, b)

    def test_matmul_strictly_2d(self):
        with pytest.raises(NumericsError):
            nm.matmul(t(np.zeros((2, 3, 4))), t(np.zeros((4, 5))))
        with pytest.raises(NumericsError) as e:
            nm.matmul(t(np.zeros((2, 3))), t(np.zeros((4, 5))))
        assert "(2, 3)" in str(e.value) and "(4, 5)" in str(e.value)

    def test_views_are_copies(self):
        x = t(np.arange(6.0).reshape(2, 3))
        for y in (nm.reshape(x, 3, 2), nm.permute(x, 1, 0),
                  nm.flip_last_axis(x)):
            y.data[...] = -1.0
            assert np.array_equal(x.data, np.arange(6.0).reshape(2, 3))


# ---------------------------------------------------------------------------
# graph mechanics
# ---------------------------------------------------------------------------


class TestBackward:
    def test_fanout_accumulates(self):
        x = t([1.0, 2.0], grad=True)
        y = nm.tsum(nm.add(x, x))
        y.backward()
        assert np.array_equal(x.grad, [2.0, 2.0])

    def test_repeated_backward_accumulates(self):
        x = t([3.0], grad=True)
        y = nm.tsum(nm.mul(x, x))
        y.backward()
        y.backward()
        assert np.array_equal(x.grad, [12.0])

    def test_nonscalar_loss_rejected(self):
        x = t([1.0, 2.0], grad=True)
        with pytest.raises(NumericsError, match="scalar"):
            nm.mul(x, x).backward()

    def test_detached_loss_rejected(self):
        x = t([1.0, 2.0])
        with pytest.raises(NumericsError):
            nm.tsum(nm.mul(x, x)).backward()

    def test_zero_grad(self):
        x = t([1.0], grad=True)
        nm.tsum(x).backward()
        assert x.grad is not None
        x.zero_grad()
        assert x.grad is None

    def test_detach_cuts_history(self):
        x = t([2.0], grad=True)
        y = nm.mul(x, x).detach()
        z = nm.tsum(nm.mul(y, y))
        assert not z.requires_grad

    def test_branchy_graph_exact_chain(self):
        # f(x) = sum((x*x + x) * x) -> df/dx = 3x^2 + 2x
        x = t([1.0, -2.0, 0.5], grad=True)
        y = nm.tsum(nm.mul(nm.add(nm.mul(x, x), x), x))
        y.backward()
        expect = 3 * x.data**2 + 2 * x.data
        np.testing.assert_allclose(x.grad, expect, rtol=1e-12)


class TestDebugMode:
    def test_nonfinite_flagged_with_op_name(self):
        nm.set_debug(True)
        try:
            with pytest.raises(NumericsError, match="exp"):
                nm.exp(t(1e4))
        finally:
            nm.set_debug(False)

    def test_disabled_by_default(self):
        y = nm.exp(t(1e4))
        assert np.isinf(y.data)


# ---------------------------------------------------------------------------
# op semantics
# ---------------------------------------------------------------------------


class TestOpSemantics:
    def test_sigmoid_extreme_inputs_finite(self):
        y = nm.sigmoid(t([-1e4, 0.0, 1e4]))
        assert np.all(np.isfinite(y.data))
        np.testing.assert_allclose(y.data, [0.0, 0.5, 1.0], atol=1e-12)

    def test_softplus_large_input_linear(self):
        y = nm.softplus(t([500.0]))
        np.testing.assert_allclose(y.data, [500.0], rtol=1e-12)

    def test_pad_narrow_roundtrip(self):
        x = t(np.arange(12.0).reshape(3, 4))
        padded = nm.pad_last(x, 3)
        assert padded.shape == (3, 7)
        assert np.all(padded.data[:, 4:] == 0)
        back = nm.narrow(padded, 1, 0, 4)
        assert np.array_equal(back.data, x.data)

    def test_frame_contents(self):
        x = t(np.arange(8.0))
        f = nm.frame(x, size=4, hop=2)
        assert f.shape == (3, 4)
        assert np.array_equal(f.data[1], [2, 3, 4, 5])

    def test_overlap_add_constant_coverage(self):
        frames = t(np.ones((3, 4)))
        y = nm.overlap_add(frames, hop=2, out_len=8)
        assert np.array_equal(y.data, [1, 1, 2, 2, 2, 2, 1, 1])

    def test_conv_is_causal(self):
        # bump an input sample; outputs strictly before it must not move
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 10))
        k = rng.standard_normal((2, 4))
        b = rng.standard_normal(2)
        base = nm.conv1d_depthwise(t(x), t(k), t(b)).data
        x2 = x.copy()
        x2[:, 6] += 1.0
        out = nm.conv1d_depthwise(t(x2), t(k), t(b)).data
        assert np.array_equal(out[:, :6], base[:, :6])
        assert not np.array_equal(out[:, 6:], base[:, 6:])

    def test_layernorm_standardizes_columns(self):
        rng = np.random.default_rng(1)
        x = t(rng.standard_normal((16, 5)) * 3 + 1)
        y = nm.layernorm(x, t(np.ones(16)), t(np.zeros(16)))
        np.testing.assert_allclose(y.data.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(y.data.std(axis=0), 1.0, atol=1e-6)

    def test_rmsnorm_scale_property(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((8, 3))
        g = np.ones(8)
        y1 = nm.rmsnorm(t(x), t(g)).data
        y2 = nm.rmsnorm(t(5.0 * x), t(g)).data
        np.testing.assert_allclose(y1, y2, atol=1e-9)

    def test_mean_pair(self):
        a, b = t([2.0, 4.0]), t([4.0, 0.0])
        assert np.array_equal(nm.mean_pair(a, b).data, [3.0, 2.0])


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_every_primitive_gradient():
    results = run_suite("numerics")
    bad = [f"{r.name}: {r.max_rel_err:.2e}" for r in results if not r.ok]
    assert not bad, f"primitive gradchecks failed: {bad}"
