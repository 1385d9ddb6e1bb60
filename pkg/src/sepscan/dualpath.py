"""Dual-path processing: chunking, normalization, and intra/inter blocks.

A long frame sequence h [D, N] is folded into overlapping chunks
[D, K, S] (50% overlap by default), so that one block can alternate

    h <- h + block_intra(norm(h))   sequences along K, batched over S
    h <- h + block_inter(norm(h))   sequences along S, batched over K

giving every output frame a path to every input frame while each scan
only ever runs over K or S steps.  dechunk inverts chunk exactly: the
overlap-add sum is divided by how many chunks cover each frame, and the
alignment padding is cut off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import blocks
from . import numerics as nm
from .numerics import NumericsError, Tensor


# ---------------------------------------------------------------------------
# chunk / dechunk
# ---------------------------------------------------------------------------


@dataclass
class ChunkedFeature:
    data: Tensor          # [D, K, S]
    original_len: int     # N before alignment padding
    chunk_len: int        # K
    hop: int

    @property
    def padded_len(self) -> int:
        S = self.data.shape[-1]
        return (S - 1) * self.hop + self.chunk_len


def chunk(h: Tensor, chunk_len: int, hop: int | None = None) -> ChunkedFeature:
    """Fold [D, N] into overlapping chunks [D, K, S].

    N is zero-padded up to K plus a whole number of hops, so
    S = ceil(max(N - K, 0) / hop) + 1; a short input becomes one chunk.
    """
    if h.ndim != 2:
        raise NumericsError(f"chunk expects [D, N], got {h.shape}")
    if hop is None:
        if chunk_len % 2:
            raise NumericsError(
                f"chunk_len must be even for 50% overlap, got {chunk_len}")
        hop = chunk_len // 2
    N = h.shape[1]
    if N < chunk_len:
        pad = chunk_len - N
    else:
        pad = (-(N - chunk_len)) % hop
    framed = nm.frame(nm.pad_last(h, pad) if pad else h, chunk_len, hop)
    return ChunkedFeature(data=nm.permute(framed, 0, 2, 1),
                          original_len=N, chunk_len=chunk_len, hop=hop)


def dechunk(cf: ChunkedFeature) -> Tensor:
    """Invert chunk: overlap-add, normalize by coverage, trim padding."""
    D = cf.data.shape[0]
    total = cf.padded_len
    frames = nm.permute(cf.data, 0, 2, 1)                  # [D, S, K]
    summed = nm.overlap_add(frames, cf.hop, total)         # [D, total]
    S = cf.data.shape[-1]
    coverage = np.zeros(total)
    for s in range(S):
        coverage[s * cf.hop : s * cf.hop + cf.chunk_len] += 1.0
    inv = Tensor(np.broadcast_to(1.0 / coverage, (D, total)).copy())
    out = nm.mul(summed, inv)
    if total != cf.original_len:
        out = nm.narrow(out, 1, 0, cf.original_len)
    return out


# ---------------------------------------------------------------------------
# normalization over the channel axis
# ---------------------------------------------------------------------------

NORM_KINDS = ("rmsnorm", "layernorm")


@dataclass
class NormWeights:
    kind: str
    gain: Tensor
    bias: Tensor | None = None


def init_norm(d: int, kind: str) -> NormWeights:
    if kind not in NORM_KINDS:
        raise NumericsError(f"unknown norm kind '{kind}' (have {NORM_KINDS})")
    gain = nm.ones((d,), requires_grad=True)
    bias = nm.zeros((d,), requires_grad=True) if kind == "layernorm" else None
    return NormWeights(kind=kind, gain=gain, bias=bias)


def apply_norm(x: Tensor, w: NormWeights, eps: float = 1e-8) -> Tensor:
    """Normalize over the channel axis (axis 0) at every remaining position."""
    if w.kind == "rmsnorm":
        return nm.rmsnorm(x, w.gain, eps=eps)
    return nm.layernorm(x, w.gain, w.bias, eps=eps)


# ---------------------------------------------------------------------------
# dual-path block
# ---------------------------------------------------------------------------


@dataclass
class DpBlockWeights:
    intra_norm: NormWeights
    intra_scan: blocks.BiScanWeights
    inter_norm: NormWeights
    inter_scan: blocks.BiScanWeights


def init_dp_block(d: int, h: int, norm_kind: str, rng: np.random.Generator,
                  bidirectional: bool = True,
                  exact_zoh: bool = False) -> DpBlockWeights:
    return DpBlockWeights(
        intra_norm=init_norm(d, norm_kind),
        intra_scan=blocks.init_bi_scan(d, h, rng, bidirectional, exact_zoh),
        inter_norm=init_norm(d, norm_kind),
        inter_scan=blocks.init_bi_scan(d, h, rng, bidirectional, exact_zoh),
    )


def dp_block(h: Tensor, w: DpBlockWeights) -> Tensor:
    """One intra-chunk pass and one inter-chunk pass, each with a skip."""
    if h.ndim != 3:
        raise NumericsError(f"dp_block expects [D, K, S], got {h.shape}")
    intra_in = nm.permute(apply_norm(h, w.intra_norm), 2, 0, 1)     # [S, D, K]
    intra_out = blocks.bi_scan_forward(intra_in, w.intra_scan)
    h = nm.add(h, nm.permute(intra_out, 1, 2, 0))                   # [D, K, S]

    inter_in = nm.permute(apply_norm(h, w.inter_norm), 1, 0, 2)     # [K, D, S]
    inter_out = blocks.bi_scan_forward(inter_in, w.inter_scan)
    return nm.add(h, nm.permute(inter_out, 1, 0, 2))


# re-exported here so downstream modules treat this as one surface
named_parameters = blocks.named_parameters
