"""Scan semantics: discretization values, closed forms, dense oracle, duality."""

import math

import numpy as np
import pytest

import sepscan.ssm as ssm
from sepscan.gradcheck import run_suite
from sepscan.numerics import NumericsError, Tensor

# one-pole discretization at a = -1, delta = 0.1, b = 1:
#   Abar = exp(-0.1)
#   exact Bbar = (exp(-0.1) - 1) / (-1) = 1 - exp(-0.1)
ABAR_ONE_POLE = 0.9048374180359595
BBAR_ZOH_ONE_POLE = 0.09516258196404048


def _const_params(a_vals, delta_val, b_row, c_row, L, exact_zoh):
    """Time-invariant SsmParams with E=1 and the given H-vectors."""
    H = len(a_vals)
    return ssm.SsmParams(
        a=Tensor(np.asarray([a_vals], dtype=np.float64)),
        delta=Tensor(np.full((1, L), delta_val)),
        b=Tensor(np.tile(np.asarray(b_row, dtype=np.float64), (L, 1))),
        c=Tensor(np.tile(np.asarray(c_row, dtype=np.float64), (L, 1))),
        exact_zoh=exact_zoh,
    )


class TestDiscretize:
    def test_zoh_one_pole_frozen_values(self):
        a = Tensor(np.array([[-1.0]]))
        delta = Tensor(np.array([[0.1]]))
        b = Tensor(np.array([[1.0]]))
        abar, bbar = ssm.discretize(a, delta, b, exact_zoh=True)
        assert abs(abar.data[0, 0, 0] - ABAR_ONE_POLE) < 1e-15
        assert abs(bbar.data[0, 0, 0] - BBAR_ZOH_ONE_POLE) < 1e-15

    def test_euler_one_pole(self):
        a = Tensor(np.array([[-1.0]]))
        delta = Tensor(np.array([[0.1]]))
        b = Tensor(np.array([[2.0]]))
        abar, bbar = ssm.discretize(a, delta, b, exact_zoh=False)
        assert abs(abar.data[0, 0, 0] - ABAR_ONE_POLE) < 1e-15
        assert abs(bbar.data[0, 0, 0] - 0.2) < 1e-15

    def test_zoh_approaches_euler_for_small_delta(self):
        a = Tensor(np.array([[-2.0]]))
        delta = Tensor(np.array([[1e-7]]))
        b = Tensor(np.array([[1.0]]))
        _, bz = ssm.discretize(a, delta, b, exact_zoh=True)
        _, be = ssm.discretize(a, delta, b, exact_zoh=False)
        assert abs(bz.data[0, 0, 0] - be.data[0, 0, 0]) < 1e-13


class TestScanClosedForms:
    def test_single_state_geometric_sum(self):
        # H=1 time-invariant: y_t = c * sum_k abar^(t-k) * bbar * x_k
        rng = np.random.default_rng(0)
        L = 24
        x = rng.standard_normal((1, L))
        params = _const_params([-0.7], 0.3, [1.3], [0.9], L, exact_zoh=False)
        y = ssm.scan_sequential(Tensor(x), params).data[0]
        abar = math.exp(-0.7 * 0.3)
        bbar = 0.3 * 1.3
        expect = np.zeros(L)
        h = 0.0
        for k in range(L):
            h = abar * h + bbar * x[0, k]
            expect[k] = 0.9 * h
        np.testing.assert_allclose(y, expect, atol=1e-12)

    def test_impulse_response_matches_kernel(self):
        rng = np.random.default_rng(1)
        H, L = 4, 64
        a = rng.standard_normal((H, H)) * 0.3
        a = a - (np.abs(a).sum(axis=1).max() + 0.3) * np.eye(H)
        sys = ssm.DenseSsm(a=a, b=rng.standard_normal((H, 1)),
                           c=rng.standard_normal((1, H)), delta=0.2)
        kern = ssm.materialize_kernel(sys, L)
        impulse = np.zeros(L)
        impulse[0] = 1.0
        np.testing.assert_allclose(sys.scan(impulse), kern, atol=1e-12)

    def test_dense_scan_vs_kernel_convolve(self):
        rng = np.random.default_rng(2)
        H, L = 4, 16
        a = rng.standard_normal((H, H)) * 0.3
        a = a - (np.abs(a).sum(axis=1).max() + 0.3) * np.eye(H)
        sys = ssm.DenseSsm(a=a, b=rng.standard_normal((H, 1)),
                           c=rng.standard_normal((1, H)), delta=0.15)
        x = rng.standard_normal(L)
        np.testing.assert_allclose(sys.scan(x), ssm.kernel_convolve(x, sys),
                                   atol=1e-11)

    def test_oracle_guards(self):
        sys = ssm.DenseSsm(a=-np.eye(40), b=np.ones((40, 1)),
                           c=np.ones((1, 40)), delta=0.1)
        with pytest.raises(NumericsError):
            ssm.materialize_kernel(sys, 8)
        small = ssm.DenseSsm(a=-np.eye(2), b=np.ones((2, 1)),
                             c=np.ones((1, 2)), delta=0.1)
        with pytest.raises(NumericsError):
            ssm.materialize_kernel(small, ssm.MAX_ORACLE_L + 1)


class TestDuality:
    def test_selective_scan_equals_kernel_for_time_invariant(self):
        # diagonal dense system == E=1 selective scan with constant params
        rng = np.random.default_rng(3)
        for _ in range(10):
            H = int(rng.integers(1, 9))
            L = int(rng.integers(1, 65))
            diag = -np.exp(rng.uniform(-1.5, 1.0, H))
            bvec = rng.standard_normal(H)
            cvec = rng.standard_normal(H)
            delta = float(rng.uniform(0.02, 0.5))
            x = rng.standard_normal(L)

            params = _const_params(diag, delta, bvec, cvec, L, exact_zoh=True)
            y_scan = ssm.scan_sequential(Tensor(x[None, :]), params).data[0]

            sys = ssm.DenseSsm(a=np.diag(diag), b=bvec[:, None],
                               c=cvec[None, :], delta=delta)
            y_kern = ssm.kernel_convolve(x, sys)
            assert np.max(np.abs(y_scan - y_kern)) < 1e-10


class TestParallelScan:
    def test_matches_sequential_small_grid(self):
        rng = np.random.default_rng(4)
        for L in (1, 2, 7, 64):
            for E, H in ((1, 1), (2, 3)):
                a = -np.exp(rng.uniform(-1, 1, (E, H)))
                params = ssm.SsmParams(
                    a=Tensor(a),
                    delta=Tensor(rng.uniform(0.05, 0.5, (E, L))),
                    b=Tensor(rng.standard_normal((L, H))),
                    c=Tensor(rng.standard_normal((L, H))),
                )
                x = Tensor(rng.standard_normal((E, L)))
                y_seq = ssm.scan_sequential(x, params).data
                y_par = ssm.scan_parallel(x, params).data
                assert np.max(np.abs(y_seq - y_par)) < 1e-8, (L, E, H)

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(5)
        B, E, L, H = 3, 2, 12, 4
        a = -np.exp(rng.uniform(-1, 1, (E, H)))
        delta = rng.uniform(0.05, 0.5, (B, E, L))
        b = rng.standard_normal((B, L, H))
        c = rng.standard_normal((B, L, H))
        x = rng.standard_normal((B, E, L))
        batched = ssm.scan_sequential(
            Tensor(x),
            ssm.SsmParams(a=Tensor(a), delta=Tensor(delta),
                          b=Tensor(b), c=Tensor(c))).data
        for i in range(B):
            single = ssm.scan_sequential(
                Tensor(x[i]),
                ssm.SsmParams(a=Tensor(a), delta=Tensor(delta[i]),
                              b=Tensor(b[i]), c=Tensor(c[i]))).data
            np.testing.assert_allclose(batched[i], single, atol=1e-12)


class TestStability:
    def test_state_bounded_on_long_input(self):
        # a < 0 and delta > 0 keep |Abar| < 1; with |x| <= 1 the output
        # admits the geometric bound sum |c| |bbar| / (1 - abar_max)
        rng = np.random.default_rng(6)
        E, H, L = 2, 4, 10_000
        a = -np.exp(rng.uniform(-1, 0.5, (E, H)))
        delta_val = 0.2
        b_row = rng.uniform(-1, 1, H)
        c_row = rng.uniform(-1, 1, H)
        params = ssm.SsmParams(
            a=Tensor(a),
            delta=Tensor(np.full((E, L), delta_val)),
            b=Tensor(np.tile(b_row, (L, 1))),
            c=Tensor(np.tile(c_row, (L, 1))),
        )
        x = np.sign(rng.standard_normal((E, L)))
        y = ssm.scan_sequential(Tensor(x), params).data
        abar_max = np.exp(a * delta_val).max()
        bound = np.sum(np.abs(c_row) * np.abs(delta_val * b_row)) / (1 - abar_max)
        assert np.all(np.isfinite(y))
        assert np.max(np.abs(y)) <= bound + 1e-9


class TestValidation:
    def test_positive_a_rejected(self):
        p = ssm.SsmParams(a=Tensor(np.array([[0.5]])),
                          delta=Tensor(np.full((1, 4), 0.1)),
                          b=Tensor(np.ones((4, 1))),
                          c=Tensor(np.ones((4, 1))))
        with pytest.raises(NumericsError):
            ssm.scan_sequential(Tensor(np.ones((1, 4))), p)

    def test_nonpositive_delta_rejected(self):
        p = ssm.SsmParams(a=Tensor(np.array([[-0.5]])),
                          delta=Tensor(np.zeros((1, 4))),
                          b=Tensor(np.ones((4, 1))),
                          c=Tensor(np.ones((4, 1))))
        with pytest.raises(NumericsError):
            ssm.scan_sequential(Tensor(np.ones((1, 4))), p)

    def test_shape_mismatch_rejected(self):
        p = ssm.SsmParams(a=Tensor(np.array([[-0.5]])),
                          delta=Tensor(np.full((1, 4), 0.1)),
                          b=Tensor(np.ones((5, 1))),
                          c=Tensor(np.ones((4, 1))))
        with pytest.raises(NumericsError):
            ssm.scan_sequential(Tensor(np.ones((1, 4))), p)


class TestSelectiveParameterize:
    def test_shapes_and_delta_positive(self):
        rng = np.random.default_rng(7)
        E, L, H, R = 4, 10, 3, 2
        proj = ssm.SsmProjection(
            w_delta_down=Tensor(rng.standard_normal((R, E)) * 0.3),
            w_delta_up=Tensor(rng.standard_normal((E, R)) * 0.3),
            b_delta=Tensor(rng.standard_normal(E)),
            w_b=Tensor(rng.standard_normal((H, E)) * 0.3),
            w_c=Tensor(rng.standard_normal((H, E)) * 0.3),
        )
        a = Tensor(-np.exp(rng.uniform(-1, 1, (E, H))))
        params = ssm.selective_parameterize(Tensor(rng.standard_normal((E, L))),
                                            proj, a)
        assert params.delta.shape == (E, L)
        assert params.b.shape == (L, H)
        assert params.c.shape == (L, H)
        assert np.all(params.delta.data > 0)


def test_scan_gradients_all_modes():
    results = run_suite("ssm")
    bad = [f"{r.name}: {r.max_rel_err:.2e}" for r in results if not r.ok]
    assert not bad, f"scan gradchecks failed: {bad}"
