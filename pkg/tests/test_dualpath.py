"""Chunking, overlap-add reconstruction, norms, and the dual-path block."""

import numpy as np
import pytest

import sepscan.dualpath as dp
import sepscan.numerics as nm
from sepscan.gradcheck import run_suite
from sepscan.numerics import NumericsError, Tensor


class TestChunk:
    def test_worked_example(self):
        # N=6, K=4, hop=2 -> two frames [0..3] and [2..5]
        x = Tensor(np.arange(6.0)[None, :])
        cf = dp.chunk(x, 4)
        assert cf.data.shape == (1, 4, 2)
        np.testing.assert_array_equal(cf.data.data[0, :, 0], [0, 1, 2, 3])
        np.testing.assert_array_equal(cf.data.data[0, :, 1], [2, 3, 4, 5])

    def test_short_input_zero_padded(self):
        x = Tensor(np.arange(3.0)[None, :])
        cf = dp.chunk(x, 4)
        assert cf.data.shape == (1, 4, 1)
        np.testing.assert_array_equal(cf.data.data[0, :, 0], [0, 1, 2, 0])

    def test_frame_count_formula(self):
        for n in (1, 5, 63, 64, 65, 250, 999):
            x = Tensor(np.zeros((2, n)))
            cf = dp.chunk(x, 64)
            hop = 32
            expect = max(0, -(-(n - 64) // hop)) + 1 if n > 64 else 1
            assert cf.data.shape[2] == expect, n

    def test_roundtrip_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(1, 700))
            k = int(rng.integers(2, 80)) * 2
            x = rng.standard_normal((3, n))
            cf = dp.chunk(Tensor(x), k)
            back = dp.dechunk(cf).data
            assert back.shape == (3, n)
            assert np.array_equal(back, x), (n, k)

    def test_roundtrip_k250(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(1, 3000))
            x = rng.standard_normal((2, n))
            assert np.array_equal(dp.dechunk(dp.chunk(Tensor(x), 250)).data, x)

    def test_all_ones_normalization(self):
        # overlap regions see double coverage; dechunk must divide it out
        x = Tensor(np.ones((1, 20)))
        out = dp.dechunk(dp.chunk(x, 8)).data
        np.testing.assert_array_equal(out, np.ones((1, 20)))

    def test_odd_chunk_rejected(self):
        with pytest.raises(NumericsError):
            dp.chunk(Tensor(np.zeros((1, 10))), 5)


class TestNorms:
    def test_kinds(self):
        assert dp.NORM_KINDS == ("rmsnorm", "layernorm")
        with pytest.raises(NumericsError):
            dp.init_norm(4, "batchnorm")

    def test_rmsnorm_has_no_bias(self):
        w = dp.init_norm(4, "rmsnorm")
        assert w.bias is None
        w2 = dp.init_norm(4, "layernorm")
        assert w2.bias is not None

    def test_apply_norm_channel_axis(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.standard_normal((6, 9)) * 4)
        w = dp.init_norm(6, "layernorm")
        y = dp.apply_norm(x, w).data
        np.testing.assert_allclose(y.mean(axis=0), 0, atol=1e-12)


class TestDpBlock:
    def _block(self, rng, d=2, h=2, **kw):
        return dp.init_dp_block(d, h, kw.pop("norm_kind", "rmsnorm"), rng, **kw)

    def test_residual_identity_when_output_zeroed(self):
        # zero both W_out projections -> the block is exactly identity
        rng = np.random.default_rng(3)
        w = self._block(rng, d=3, h=2)
        w.intra_scan.w_out.data[...] = 0.0
        w.inter_scan.w_out.data[...] = 0.0
        x = rng.standard_normal((3, 6, 4))
        out = dp.dp_block(Tensor(x.copy()), w).data
        np.testing.assert_array_equal(out, x)

    def test_intra_path_is_per_chunk(self):
        # zero the inter unit; changing one chunk must not affect others
        rng = np.random.default_rng(4)
        w = self._block(rng, d=2, h=2)
        w.inter_scan.w_out.data[...] = 0.0
        x = rng.standard_normal((2, 5, 3))
        base = dp.dp_block(Tensor(x.copy()), w).data
        x2 = x.copy()
        x2[:, :, 1] += 1.0
        out = dp.dp_block(Tensor(x2), w).data
        np.testing.assert_allclose(out[:, :, 0], base[:, :, 0], atol=1e-12)
        np.testing.assert_allclose(out[:, :, 2], base[:, :, 2], atol=1e-12)
        assert not np.allclose(out[:, :, 1], base[:, :, 1])

    def test_inter_path_crosses_chunks(self):
        rng = np.random.default_rng(5)
        w = self._block(rng, d=2, h=2)
        x = rng.standard_normal((2, 5, 3))
        base = dp.dp_block(Tensor(x.copy()), w).data
        x2 = x.copy()
        x2[:, :, 1] += 1.0
        out = dp.dp_block(Tensor(x2), w).data
        assert not np.allclose(out[:, :, 0], base[:, :, 0])

    def test_shape_preserved(self):
        rng = np.random.default_rng(6)
        w = self._block(rng, d=4, h=3, norm_kind="layernorm")
        x = Tensor(rng.standard_normal((4, 6, 5)))
        assert dp.dp_block(x, w).shape == (4, 6, 5)


def test_dp_block_gradients():
    results = run_suite("dualpath")
    bad = [f"{r.name}: {r.max_rel_err:.2e}" for r in results if not r.ok]
    assert not bad, f"dual-path gradchecks failed: {bad}"
