"""Selective state-space scans: recurrence kernels, discretization, oracle.

A continuous-time diagonal state-space model

    h'(t) = A h(t) + B x(t),    y(t) = C h(t)

is stepped at input-dependent intervals delta.  Zero-order hold gives

    Abar = exp(delta A)
    Bbar = (delta A)^-1 (exp(delta A) - I) delta B     (exact form)
         = delta B                                     (Euler simplification)

and the discrete recurrence h_t = Abar_t h_{t-1} + Bbar_t x_t, y_t = C_t h_t.
Selectivity means delta, B, and C are functions of the input at each step
while A stays input-independent.

Three evaluation paths compute the same recurrence:

  * scan_sequential: the reference loop, O(E*H) live state;
  * scan_parallel:   associative prefix doubling over (Abar, Bbar x) pairs;
  * kernel_convolve: a dense-matrix convolution oracle, valid only for
    time-invariant parameters, kept deliberately independent so the fast
    paths have something external to agree with.

Both scans differentiate through a fused adjoint that replays the forward
recurrence in fixed-size blocks instead of storing the full hidden-state
trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numerics as nm
from .numerics import NumericsError, Tensor

# block length for the backward-pass state replay; bounds the recompute
# buffer at _BLOCK * E * H regardless of sequence length
_BLOCK = 64

# the dense oracle is a correctness instrument, not a compute path
MAX_ORACLE_H = 32
MAX_ORACLE_L = 1024


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass
class SsmParams:
    """Per-sequence scan parameters.

    a:     [E, H] continuous-time diagonal, strictly negative
    delta: [E, L] or [B, E, L], strictly positive step sizes
    b:     [L, H] or [B, L, H], input projection at each step
    c:     [L, H] or [B, L, H], output projection at each step
    """

    a: Tensor
    delta: Tensor
    b: Tensor
    c: Tensor
    exact_zoh: bool = False

    def validate(self, x: Tensor) -> None:
        if x.ndim not in (2, 3):
            raise NumericsError(f"scan input must be [E, L] or [B, E, L], got {x.shape}")
        if self.delta.shape != x.shape:
            raise NumericsError(
                f"scan: delta {self.delta.shape} does not match input {x.shape}"
            )
        if self.a.ndim != 2:
            raise NumericsError(f"scan: a must be [E, H], got {self.a.shape}")
        E, H = self.a.shape
        L = x.shape[-1]
        if x.shape[-2] != E:
            raise NumericsError(
                f"scan: input has {x.shape[-2]} channels but a has {E}"
            )
        want_bc = x.shape[:-2] + (L, H)
        if self.b.shape != want_bc or self.c.shape != want_bc:
            raise NumericsError(
                f"scan: b {self.b.shape} / c {self.c.shape} do not match {want_bc}"
            )
        if not np.all(np.isfinite(self.a.data)) or np.any(self.a.data >= 0.0):
            raise NumericsError("scan: a must be finite and strictly negative")
        if not np.all(np.isfinite(self.delta.data)) or np.any(self.delta.data <= 0.0):
            raise NumericsError("scan: delta must be finite and strictly positive")


@dataclass
class SsmProjection:
    """Learned maps from a sequence to its (delta, b, c) scan parameters."""

    w_delta_down: Tensor  # [dt_rank, E]
    w_delta_up: Tensor    # [E, dt_rank]
    b_delta: Tensor       # [E]
    w_b: Tensor           # [H, E]
    w_c: Tensor           # [H, E]


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


def discretize(a: Tensor, delta: Tensor, b: Tensor,
               exact_zoh: bool = False) -> tuple[Tensor, Tensor]:
    """Materialize (Abar, Bbar) for inspection and tests; value-level only.

    a: [E, H], delta: [E, L], b: [L, H]  ->  Abar, Bbar both [E, L, H].
    Gradients do not flow through this helper; the scans fuse the same
    arithmetic into their own forward/adjoint.
    """
    if delta.ndim != 2 or a.ndim != 2 or b.ndim != 2:
        raise NumericsError("discretize expects a [E,H], delta [E,L], b [L,H]")
    ad, dd, bd = a.data, delta.data, b.data
    z = dd[:, :, None] * ad[:, None, :]          # [E, L, H]
    abar = np.exp(z)
    if exact_zoh:
        bbar = np.expm1(z) / ad[:, None, :] * bd[None, :, :]
    else:
        bbar = dd[:, :, None] * bd[None, :, :]
    return Tensor(abar), Tensor(bbar)


# ---------------------------------------------------------------------------
# fused scan arithmetic (ndarray level)
# ---------------------------------------------------------------------------


def _scan_forward(xd, dd, ad, bd, cd, exact_zoh):
    """Reference loop over [B, E, L] arrays; only O(B*E*H) live temporaries."""
    B, E, L = xd.shape
    H = ad.shape[1]
    h = np.zeros((B, E, H), dtype=xd.dtype)
    y = np.empty_like(xd)
    for t in range(L):
        dt = dd[:, :, t, None]                   # [B, E, 1]
        z = dt * ad                              # [B, E, H]
        at = np.exp(z)
        if exact_zoh:
            bbar = np.expm1(z) / ad * bd[:, None, t, :]
        else:
            bbar = dt * bd[:, None, t, :]
        h = at * h + bbar * xd[:, :, t, None]
        y[:, :, t] = (h * cd[:, None, t, :]).sum(axis=-1)
    return y


def _scan_backward(xd, dd, ad, bd, cd, exact_zoh, g):
    """Adjoint of the recurrence with blockwise state replay.

    Hidden states are not kept from the forward pass.  A first sweep
    replays the recurrence, storing one checkpoint per _BLOCK steps and
    accumulating the c-gradient (which needs states, not adjoints).  A
    second sweep walks blocks in reverse, rebuilding the states of each
    block from its checkpoint and running the adjoint recurrence

        lambda_t = g_t c_t + Abar_{t+1} lambda_{t+1}
    """
    B, E, L = xd.shape
    H = ad.shape[1]
    dtype = xd.dtype

    gx = np.empty_like(xd)
    gdelta = np.empty_like(dd)
    ga = np.zeros((E, H), dtype=dtype)
    gb = np.empty_like(bd)
    gc = np.empty_like(cd)

    # sweep 1: forward replay; checkpoints + gc
    checkpoints = []
    h = np.zeros((B, E, H), dtype=dtype)
    for t in range(L):
        if t % _BLOCK == 0:
            checkpoints.append(h.copy())
        dt = dd[:, :, t, None]
        z = dt * ad
        if exact_zoh:
            bbar = np.expm1(z) / ad * bd[:, None, t, :]
        else:
            bbar = dt * bd[:, None, t, :]
        h = np.exp(z) * h + bbar * xd[:, :, t, None]
        gc[:, t, :] = (h * g[:, :, t, None]).sum(axis=1)

    # sweep 2: blocks in reverse; lam_carry = Abar_{t+1} lambda_{t+1}
    lam_carry = np.zeros((B, E, H), dtype=dtype)
    n_blocks = len(checkpoints)
    for blk in range(n_blocks - 1, -1, -1):
        t0 = blk * _BLOCK
        t1 = min(t0 + _BLOCK, L)
        n = t1 - t0
        zb = dd[:, :, t0:t1, None] * ad[None, :, None, :]     # [B, E, n, H]
        abar_b = np.exp(zb)
        if exact_zoh:
            p_b = np.expm1(zb) / ad[None, :, None, :]
            bbar_b = p_b * bd[:, None, t0:t1, :]
        else:
            bbar_b = dd[:, :, t0:t1, None] * bd[:, None, t0:t1, :]
        # rebuild states h_{t0-1} .. h_{t1-1} for this block
        hbuf = np.empty((n + 1, B, E, H), dtype=dtype)
        hbuf[0] = checkpoints[blk]
        for i in range(n):
            t = t0 + i
            hbuf[i + 1] = (abar_b[:, :, i] * hbuf[i]
                           + bbar_b[:, :, i] * xd[:, :, t, None])
        for i in range(n - 1, -1, -1):
            t = t0 + i
            lam = g[:, :, t, None] * cd[:, None, t, :] + lam_carry
            at = abar_b[:, :, i]
            dabar = lam * hbuf[i]
            gdelta[:, :, t] = (dabar * at * ad).sum(axis=-1)
            ga += (dabar * at * dd[:, :, t, None]).sum(axis=0)
            dbbar = lam * xd[:, :, t, None]
            if exact_zoh:
                dp = dbbar * bd[:, None, t, :]
                gdelta[:, :, t] += (dp * at).sum(axis=-1)
                ga += (dp * (dd[:, :, t, None] * at - p_b[:, :, i]) / ad).sum(axis=0)
                gb[:, t, :] = (dbbar * p_b[:, :, i]).sum(axis=1)
            else:
                gdelta[:, :, t] += (dbbar * bd[:, None, t, :]).sum(axis=-1)
                gb[:, t, :] = (dbbar * dd[:, :, t, None]).sum(axis=1)
            gx[:, :, t] = (lam * bbar_b[:, :, i]).sum(axis=-1)
            lam_carry = at * lam
    return gx, gdelta, ga, gb, gc


def _scan_parallel_forward(xd, dd, ad, bd, cd, exact_zoh):
    """Prefix-doubling evaluation of the same recurrence.

    The recurrence elements (a_t, u_t) with u_t = Bbar_t x_t compose as
    (a2, u2) o (a1, u1) = (a2 a1, a2 u1 + u2); an inclusive scan under this
    product yields h_t directly.  log2(L) passes, each a full-width array
    op, O(L log L) work against the sequential loop's O(L).
    """
    z = dd[..., None] * ad[None, :, None, :]                  # [B, E, L, H]
    ea = np.exp(z)
    if exact_zoh:
        bbar = np.expm1(z) / ad[None, :, None, :] * bd[:, None, :, :]
    else:
        bbar = dd[..., None] * bd[:, None, :, :]
    eu = bbar * xd[..., None]
    L = xd.shape[-1]
    d = 1
    while d < L:
        prev_a = ea[..., :-d, :]
        prev_u = eu[..., :-d, :]
        nu = eu.copy()
        nu[..., d:, :] += ea[..., d:, :] * prev_u
        na = ea.copy()
        na[..., d:, :] *= prev_a
        ea, eu = na, nu
        d *= 2
    return (eu * cd[:, None, :, :]).sum(axis=-1)


# ---------------------------------------------------------------------------
# scan ops (graph level)
# ---------------------------------------------------------------------------


def _run_scan(x: Tensor, params: SsmParams, forward_fn, op_name: str) -> Tensor:
    params.validate(x)
    batched = x.ndim == 3
    xt, dt, bt, ct = x, params.delta, params.b, params.c
    a = params.a
    exact = params.exact_zoh

    def lift(arr):
        return arr if batched else arr[None]

    y = forward_fn(lift(xt.data), lift(dt.data), a.data, lift(bt.data),
                   lift(ct.data), exact)
    if not batched:
        y = y[0]

    def vjp(g):
        gx, gd, ga, gb, gc = _scan_backward(
            lift(xt.data), lift(dt.data), a.data, lift(bt.data), lift(ct.data),
            exact, lift(g),
        )
        if not batched:
            gx, gd, gb, gc = gx[0], gd[0], gb[0], gc[0]
        return gx, gd, ga, gb, gc

    return nm.primitive(y.copy() if y.base is not None else y,
                        (xt, dt, a, bt, ct), vjp, op_name)


def scan_sequential(x: Tensor, params: SsmParams) -> Tensor:
    """Evaluate the selective recurrence stepwise.  x: [E, L] or [B, E, L]."""
    return _run_scan(x, params, _scan_forward, "scan_sequential")


def scan_parallel(x: Tensor, params: SsmParams) -> Tensor:
    """Evaluate the selective recurrence by associative prefix doubling.

    Exactly the same contract and gradients as scan_sequential; results
    agree to reassociation-level rounding (1e-8 scale in float64).
    """
    return _run_scan(x, params, _scan_parallel_forward, "scan_parallel")


# ---------------------------------------------------------------------------
# selective parameterization
# ---------------------------------------------------------------------------


def selective_parameterize(x: Tensor, proj: SsmProjection, a: Tensor,
                           exact_zoh: bool = False) -> SsmParams:
    """Derive per-step (delta, b, c) from the sequence itself.

    delta = softplus(W_up (W_down x) + bias) through a rank-reduced pair,
    b and c are direct linear readouts of each step.  x: [E, L] or [B, E, L].
    """
    if x.ndim == 2:
        flat = x
        unflatten = None
    elif x.ndim == 3:
        B, E, L = x.shape
        flat = nm.reshape(nm.permute(x, 1, 0, 2), E, B * L)
        unflatten = (B, L)
    else:
        raise NumericsError(f"selective_parameterize: bad input rank {x.ndim}")

    dt = nm.matmul(proj.w_delta_up, nm.matmul(proj.w_delta_down, flat))
    dt = nm.softplus(nm.add_bias(dt, proj.b_delta))          # [E, B*L]
    bproj = nm.matmul(proj.w_b, flat)                        # [H, B*L]
    cproj = nm.matmul(proj.w_c, flat)

    if unflatten is None:
        delta = dt
        b = nm.permute(bproj, 1, 0)
        c = nm.permute(cproj, 1, 0)
    else:
        B, L = unflatten
        E = x.shape[1]
        H = proj.w_b.shape[0]
        delta = nm.permute(nm.reshape(dt, E, B, L), 1, 0, 2)
        b = nm.permute(nm.reshape(bproj, H, B, L), 1, 2, 0)
        c = nm.permute(nm.reshape(cproj, H, B, L), 1, 2, 0)
    return SsmParams(a=a, delta=delta, b=b, c=c, exact_zoh=exact_zoh)


# ---------------------------------------------------------------------------
# dense oracle
# ---------------------------------------------------------------------------


@dataclass
class DenseSsm:
    """A full-matrix, time-invariant system used only as a reference.

    a: [H, H] (must be invertible for the exact hold), b: [H, 1], c: [1, H],
    delta: scalar step size.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    delta: float

    def discretized(self) -> tuple[np.ndarray, np.ndarray]:
        H = self.a.shape[0]
        if self.a.shape != (H, H) or self.b.shape != (H, 1) or self.c.shape != (1, H):
            raise NumericsError(
                f"DenseSsm shapes must be [H,H],[H,1],[1,H]; got "
                f"{self.a.shape}, {self.b.shape}, {self.c.shape}"
            )
        abar = scipy.linalg.expm(self.delta * self.a)
        bbar = np.linalg.solve(self.a, (abar - np.eye(H)) @ self.b)
        return abar, bbar

    def scan(self, x: np.ndarray) -> np.ndarray:
        """Direct dense recurrence h_t = Abar h_{t-1} + Bbar x_t; y_t = C h_t."""
        abar, bbar = self.discretized()
        h = np.zeros((self.a.shape[0], 1))
        y = np.empty_like(x, dtype=np.float64)
        for t in range(x.shape[-1]):
            h = abar @ h + bbar * x[..., t]
            y[..., t] = (self.c @ h)[0, 0]
        return y


def materialize_kernel(sys: DenseSsm, length: int) -> np.ndarray:
    """K_k = C Abar^k Bbar for k = 0..length-1."""
    if sys.a.shape[0] > MAX_ORACLE_H:
        raise NumericsError(
            f"oracle limited to H <= {MAX_ORACLE_H}, got {sys.a.shape[0]}"
        )
    if length > MAX_ORACLE_L:
        raise NumericsError(f"oracle limited to L <= {MAX_ORACLE_L}, got {length}")
    abar, bbar = sys.discretized()
    kern = np.empty(length)
    v = bbar
    for k in range(length):
        kern[k] = (sys.c @ v)[0, 0]
        v = abar @ v
    return kern


def kernel_convolve(x: np.ndarray, sys: DenseSsm) -> np.ndarray:
    """Evaluate the time-invariant system as a causal convolution with K.

    Only valid when (delta, B, C) do not vary over time; that restriction is
    what makes this an oracle for the scans rather than a fourth compute path.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    kern = materialize_kernel(sys, x.shape[0])
    return np.convolve(x, kern)[: x.shape[0]]
