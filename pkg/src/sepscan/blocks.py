"""Bidirectional selective-scan block.

One block sees a sequence h [D, L] (or a batch [B, D, L]) and runs it
through two directional selective-SSM branches that share the input and
gate projections:

    h_in  = W_in h                      expanded to E = 2D channels
    z     = W_gate h
    x_d   = SiLU(conv_d(h_d))           causal depthwise conv, kernel 4
    s_d   = scan(x_d) + d_skip * x_d    selective scan per direction
    y_fwd = SiLU(z) * s_fwd
    y_bwd = flip(SiLU(z)) * s_bwd       gate flipped to track positions
    out   = W_out((y_fwd + flip(y_bwd)) / 2)

The backward branch consumes flip(h_in) so its scan runs anti-causally
over the original sequence; flipping the shared gate keeps each gate
value aligned with the same sequence position in both branches, which
is what makes the block exactly flip-equivariant when the two
directions carry tied weights.  A unidirectional variant drops the
backward branch and the final averaging.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from . import ssm
from .numerics import Tensor

CONV_WIDTH = 4


def dt_rank_for(d: int) -> int:
    """Rank of the two-stage delta projection for model width d."""
    return max(1, math.ceil(d / 16))


# ---------------------------------------------------------------------------
# weight containers
# ---------------------------------------------------------------------------


@dataclass
class DirectionWeights:
    conv_kernel: Tensor        # [E, CONV_WIDTH]
    conv_bias: Tensor          # [E]
    proj: ssm.SsmProjection
    a_log: Tensor              # [E, H]; the scan sees a = -exp(a_log) < 0
    d_skip: Tensor             # [E]


@dataclass
class BiScanWeights:
    w_in: Tensor               # [E, D]
    w_gate: Tensor             # [E, D]
    w_out: Tensor              # [D, E]
    fwd: DirectionWeights
    bwd: DirectionWeights | None = None   # None -> unidirectional
    exact_zoh: bool = False


def named_parameters(obj, prefix: str = "") -> list[tuple[str, Tensor]]:
    """Flatten a weight struct into stable (dotted-name, tensor) pairs."""
    if isinstance(obj, Tensor):
        return [(prefix, obj)]
    out: list[tuple[str, Tensor]] = []
    if dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if value is None or isinstance(value, (bool, int, float, str)):
                continue
            name = f"{prefix}.{f.name}" if prefix else f.name
            out.extend(named_parameters(value, name))
        return out
    if isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            name = f"{prefix}.{i}" if prefix else str(i)
            out.extend(named_parameters(value, name))
        return out
    return out


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def _linear_init(rng, out_dim, in_dim):
    bound = 1.0 / math.sqrt(in_dim)
    return nm.uniform((out_dim, in_dim), -bound, bound, rng, requires_grad=True)


def init_direction(e: int, h: int, dt_rank: int, rng: np.random.Generator,
                   dt_min: float = 1e-3, dt_max: float = 1e-1) -> DirectionWeights:
    conv_bound = 1.0 / math.sqrt(CONV_WIDTH)
    conv_kernel = nm.uniform((e, CONV_WIDTH), -conv_bound, conv_bound, rng,
                             requires_grad=True)
    conv_bias = nm.uniform((e,), -conv_bound, conv_bound, rng, requires_grad=True)
    proj = ssm.SsmProjection(
        w_delta_down=_linear_init(rng, dt_rank, e),
        w_delta_up=_linear_init(rng, e, dt_rank),
        # bias chosen so softplus lands log-uniformly in [dt_min, dt_max]
        b_delta=Tensor(
            np.log(np.expm1(np.exp(
                rng.uniform(np.log(dt_min), np.log(dt_max), size=e)
            ))),
            requires_grad=True,
        ),
        w_b=_linear_init(rng, h, e),
        w_c=_linear_init(rng, h, e),
    )
    # a[e, k] = -(k + 1): slow-to-fast decay ladder shared by every channel
    a_log = Tensor(np.tile(np.log(np.arange(1, h + 1)), (e, 1)), requires_grad=True)
    d_skip = nm.ones((e,), requires_grad=True)
    return DirectionWeights(conv_kernel=conv_kernel, conv_bias=conv_bias,
                            proj=proj, a_log=a_log, d_skip=d_skip)


def init_bi_scan(d: int, h: int, rng: np.random.Generator,
                 bidirectional: bool = True,
                 exact_zoh: bool = False) -> BiScanWeights:
    e = 2 * d
    dtr = dt_rank_for(d)
    return BiScanWeights(
        w_in=_linear_init(rng, e, d),
        w_gate=_linear_init(rng, e, d),
        w_out=_linear_init(rng, d, e),
        fwd=init_direction(e, h, dtr, rng),
        bwd=init_direction(e, h, dtr, rng) if bidirectional else None,
        exact_zoh=exact_zoh,
    )


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------


def linear_channels(w: Tensor, x: Tensor) -> Tensor:
    """Apply a [O, I] map along the channel axis of [I, L] or [B, I, L]."""
    if x.ndim == 2:
        return nm.matmul(w, x)
    B, I, L = x.shape
    flat = nm.reshape(nm.permute(x, 1, 0, 2), I, B * L)
    out = nm.matmul(w, flat)
    return nm.permute(nm.reshape(out, w.shape[0], B, L), 1, 0, 2)


def _direction_ssm(x: Tensor, dw: DirectionWeights, exact_zoh: bool) -> Tensor:
    a = nm.neg(nm.exp(dw.a_log))
    params = ssm.selective_parameterize(x, dw.proj, a, exact_zoh=exact_zoh)
    return nm.add(ssm.scan_sequential(x, params), nm.scale_channels(x, dw.d_skip))


def bi_scan_forward(h: Tensor, w: BiScanWeights,
                    return_branches: bool = False):
    """Run one block over h: [D, L] or [B, D, L]; output matches the input shape.

    With return_branches=True also returns the gated forward-branch and
    (re-flipped) backward-branch sequences, for inspection in tests.
    """
    h_in = linear_channels(w.w_in, h)
    gate = nm.silu(linear_channels(w.w_gate, h))

    x_f = nm.silu(nm.conv1d_depthwise(h_in, w.fwd.conv_kernel, w.fwd.conv_bias))
    s_f = _direction_ssm(x_f, w.fwd, w.exact_zoh)
    y_f = nm.mul(gate, s_f)

    if w.bwd is None:
        out = linear_channels(w.w_out, y_f)
        if return_branches:
            return out, y_f, None
        return out

    h_rev = nm.flip_last_axis(h_in)
    x_b = nm.silu(nm.conv1d_depthwise(h_rev, w.bwd.conv_kernel, w.bwd.conv_bias))
    s_b = _direction_ssm(x_b, w.bwd, w.exact_zoh)
    y_b = nm.mul(nm.flip_last_axis(gate), s_b)
    y_b_aligned = nm.flip_last_axis(y_b)

    out = linear_channels(w.w_out, nm.mean_pair(y_f, y_b_aligned))
    if return_branches:
        return out, y_f, y_b_aligned
    return out
