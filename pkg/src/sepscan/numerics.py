"""Dense-tensor reverse-mode autodiff on numpy storage.

Shape conventions used across the package:

    waveform     [T]
    features     [D, N]       (channels, frames)
    chunked      [D, K, S]    (channels, chunk length, chunk count)
    batched seq  [B, E, L]    (batch, channels, time)

Rules the engine enforces rather than glosses over:

  * no implicit broadcasting, except a scalar (0-d) with a tensor;
  * matmul is strictly 2-D;
  * flip/permute/reshape materialize copies, never aliased views;
  * gradients accumulate additively across fan-out and across repeated
    backward() calls; callers reset explicitly with zero_grad().

The recorded graph is the chain of ``_parents`` links hanging off each
tensor, together with the saved arrays closed over by each ``_vjp``
callback.  ``backward`` linearizes that DAG once (topological order),
visits every node exactly once, and pushes vector-Jacobian products
toward the leaves.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class NumericsError(ValueError):
    """Shape, dtype, connectivity, or finiteness violation inside the engine."""


# ---------------------------------------------------------------------------
# debug switch
# ---------------------------------------------------------------------------

_DEBUG = False


def set_debug(flag: bool) -> None:
    """Toggle per-op finiteness checking (NaN/Inf surfaces as NumericsError)."""
    global _DEBUG
    _DEBUG = bool(flag)


def debug_enabled() -> bool:
    return _DEBUG


_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class Tensor:
    """A dense float array plus the graph edge that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.array(data, dtype=dtype, copy=True)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None
        self._op = "leaf"

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise NumericsError(f"item() requires a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flags = []
        if self.requires_grad:
            flags.append("requires_grad")
        if self._vjp is not None:
            flags.append(f"op={self._op}")
        tail = (", " + ", ".join(flags)) if flags else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{tail})"

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- method aliases for the op suite ------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def conv1d_depthwise(self, kernel: "Tensor", bias: "Tensor") -> "Tensor":
        return conv1d_depthwise(self, kernel, bias)

    def silu(self) -> "Tensor":
        return silu(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def softplus(self) -> "Tensor":
        return softplus(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def relu(self) -> "Tensor":
        return relu(self)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def flip_last_axis(self) -> "Tensor":
        return flip_last_axis(self)

    def permute(self, *dims: int) -> "Tensor":
        return permute(self, *dims)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, *shape)

    def sum(self) -> "Tensor":
        return tsum(self)

    def mean(self) -> "Tensor":
        return tmean(self)

    def add_bias(self, bias: "Tensor") -> "Tensor":
        return add_bias(self, bias)

    def frame(self, size: int, hop: int) -> "Tensor":
        return frame(self, size, hop)

    def overlap_add(self, hop: int, out_len: int) -> "Tensor":
        return overlap_add(self, hop, out_len)

    def pad_last(self, count: int) -> "Tensor":
        return pad_last(self, count)

    def narrow(self, axis: int, start: int, length: int) -> "Tensor":
        return narrow(self, axis, start, length)

    # -- reverse mode -------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad for every reachable tensor.

        self must be a scalar (0-d) tensor connected to a recorded graph.
        """
        if self.data.shape != ():
            raise NumericsError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        if self._vjp is None and not self.requires_grad:
            raise NumericsError(
                "backward on a detached loss: no input in its history had "
                "requires_grad=True"
            )
        order = _topo_order(self)
        pending: dict[int, np.ndarray] = {id(self): np.ones((), dtype=self.dtype)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                have = pending.get(id(parent))
                pending[id(parent)] = pg if have is None else have + pg


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative postorder: leaves first, root last; each node exactly once."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


# ---------------------------------------------------------------------------
# graph recording
# ---------------------------------------------------------------------------


def primitive(
    data: np.ndarray,
    parents: Sequence[Tensor],
    vjp: Callable[[np.ndarray], tuple],
    op: str,
) -> Tensor:
    """Record one executed op: output array, its inputs, and a VJP callback.

    vjp receives the upstream gradient and must return one array (or None)
    per parent, each matching that parent's shape.  Other modules use this
    to define fused primitives (the selective scan) without touching the
    engine internals.
    """
    if _DEBUG and not np.all(np.isfinite(data)):
        raise NumericsError(f"non-finite values produced by op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjp = None
    return out


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value, dtype=dtype)
    if arr.shape != ():
        raise NumericsError(
            "only python scalars may be promoted to tensors implicitly"
        )
    return Tensor(arr, dtype=dtype)


def _binary_operands(a: Tensor, b, op: str) -> tuple[Tensor, Tensor]:
    """Validate the scalar-with-tensor rule; no other broadcasting exists."""
    if not isinstance(a, Tensor):
        a = _wrap(a, b.dtype if isinstance(b, Tensor) else np.float64)
    b = _wrap(b, a.dtype)
    if a.dtype != b.dtype:
        raise NumericsError(f"{op}: dtype mismatch {a.dtype} vs {b.dtype}")
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise NumericsError(
            f"{op}: shape mismatch {a.shape} vs {b.shape} "
            "(only scalar-with-tensor broadcast is allowed)"
        )
    return a, b


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # inverse of the scalar-with-tensor broadcast: collapse back to 0-d
    if shape == () and g.shape != ():
        return np.asarray(g.sum(), dtype=g.dtype)
    return g


# ---------------------------------------------------------------------------
# elementwise suite
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    a, b = _binary_operands(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return primitive(a.data + b.data, (a, b), vjp, "add")


def sub(a: Tensor, b) -> Tensor:
    a, b = _binary_operands(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return primitive(a.data - b.data, (a, b), vjp, "sub")


def mul(a: Tensor, b) -> Tensor:
    a, b = _binary_operands(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return primitive(a.data * b.data, (a, b), vjp, "mul")


def div(a: Tensor, b) -> Tensor:
    a, b = _binary_operands(a, b, "div")

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return primitive(a.data / b.data, (a, b), vjp, "div")


def neg(x: Tensor) -> Tensor:
    return primitive(-x.data, (x,), lambda g: (-g,), "neg")


def mean_pair(a: Tensor, b: Tensor) -> Tensor:
    """(a + b) / 2 elementwise; the merge point of two directional branches."""
    a, b = _binary_operands(a, b, "mean_pair")

    def vjp(g):
        h = 0.5 * g
        return _unbroadcast(h, a.shape), _unbroadcast(h, b.shape)

    return primitive(0.5 * (a.data + b.data), (a, b), vjp, "mean_pair")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # exp saturates to 0/1 well inside +-60; clipping avoids overflow warnings
    z = np.clip(x, -60.0, 60.0)
    return 1.0 / (1.0 + np.exp(-z))


def sigmoid(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)

    def vjp(g):
        return (g * s * (1.0 - s),)

    return primitive(s, (x,), vjp, "sigmoid")


def silu(x: Tensor) -> Tensor:
    s = _stable_sigmoid(x.data)
    out = x.data * s

    def vjp(g):
        return (g * s * (1.0 + x.data * (1.0 - s)),)

    return primitive(out, (x,), vjp, "silu")


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0.0, x.data)

    def vjp(g):
        return (g * _stable_sigmoid(x.data),)

    return primitive(out, (x,), vjp, "softplus")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def vjp(g):
        return (g * (1.0 - t * t),)

    return primitive(t, (x,), vjp, "tanh")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def vjp(g):
        return (g * mask,)

    return primitive(np.where(mask, x.data, 0.0), (x,), vjp, "relu")


def exp(x: Tensor) -> Tensor:
    # IEEE semantics by contract: overflow yields inf silently; debug
    # mode turns the non-finite result into an error instead
    with np.errstate(over="ignore"):
        e = np.exp(x.data)

    def vjp(g):
        return (g * e,)

    return primitive(e, (x,), vjp, "exp")


def log(x: Tensor) -> Tensor:
    def vjp(g):
        return (g / x.data,)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return primitive(out, (x,), vjp, "log")


# ---------------------------------------------------------------------------
# structural ops (all materialize copies)
# ---------------------------------------------------------------------------


def flip_last_axis(x: Tensor) -> Tensor:
    def vjp(g):
        return (np.flip(g, axis=-1).copy(),)

    return primitive(np.flip(x.data, axis=-1).copy(), (x,), vjp, "flip_last_axis")


def permute(x: Tensor, *dims: int) -> Tensor:
    if sorted(dims) != list(range(x.ndim)):
        raise NumericsError(f"permute: {dims} is not a permutation of rank {x.ndim}")
    inverse = tuple(np.argsort(dims))

    def vjp(g):
        return (np.transpose(g, inverse).copy(),)

    return primitive(np.transpose(x.data, dims).copy(), (x,), vjp, "permute")


def reshape(x: Tensor, *shape: int) -> Tensor:
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise NumericsError(f"reshape: cannot view {x.shape} as {tuple(shape)}")
    old = x.shape

    def vjp(g):
        return (g.reshape(old).copy(),)

    return primitive(x.data.reshape(shape).copy(), (x,), vjp, "reshape")


def tsum(x: Tensor) -> Tensor:
    def vjp(g):
        return (np.full(x.shape, float(g), dtype=x.dtype),)

    return primitive(np.asarray(x.data.sum(), dtype=x.dtype), (x,), vjp, "sum")


def tmean(x: Tensor) -> Tensor:
    n = x.size

    def vjp(g):
        return (np.full(x.shape, float(g) / n, dtype=x.dtype),)

    return primitive(np.asarray(x.data.mean(), dtype=x.dtype), (x,), vjp, "mean")


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias along axis -2 of x ([..., C, L] + [C])."""
    if x.ndim < 2:
        raise NumericsError(f"add_bias: input must have a channel axis, got {x.shape}")
    if bias.ndim != 1 or bias.shape[0] != x.shape[-2]:
        raise NumericsError(
            f"add_bias: bias {bias.shape} does not match channel count {x.shape[-2]}"
        )
    col = bias.data[:, None]

    def vjp(g):
        axes = tuple(i for i in range(g.ndim) if i != g.ndim - 2)
        return g, g.sum(axis=axes)

    return primitive(x.data + col, (x, bias), vjp, "add_bias")


def scale_channels(x: Tensor, scale: Tensor) -> Tensor:
    """Multiply by a per-channel factor along axis -2 of x ([..., C, L] * [C])."""
    if x.ndim < 2:
        raise NumericsError(f"scale_channels: input must have a channel axis, got {x.shape}")
    if scale.ndim != 1 or scale.shape[0] != x.shape[-2]:
        raise NumericsError(
            f"scale_channels: scale {scale.shape} does not match channel count {x.shape[-2]}"
        )
    col = scale.data[:, None]

    def vjp(g):
        gx = g * col if x.requires_grad else None
        gs = None
        if scale.requires_grad:
            axes = tuple(i for i in range(g.ndim) if i != g.ndim - 2)
            gs = (g * x.data).sum(axis=axes)
        return gx, gs

    return primitive(x.data * col, (x, scale), vjp, "scale_channels")


def pad_last(x: Tensor, count: int) -> Tensor:
    """Append `count` zeros along the last axis."""
    if count < 0:
        raise NumericsError("pad_last: count must be nonnegative")
    widths = [(0, 0)] * (x.ndim - 1) + [(0, count)]
    L = x.shape[-1]

    def vjp(g):
        return (g[..., :L].copy(),)

    return primitive(np.pad(x.data, widths), (x,), vjp, "pad_last")


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries from `start` along `axis`."""
    axis = axis % x.ndim
    if start < 0 or start + length > x.shape[axis]:
        raise NumericsError(
            f"narrow: [{start}:{start + length}] out of bounds for axis {axis} "
            f"of {x.shape}"
        )
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def vjp(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    return primitive(x.data[index].copy(), (x,), vjp, "narrow")


def frame(x: Tensor, size: int, hop: int) -> Tensor:
    """Slice the last axis into overlapping windows: [..., T] -> [..., S, size].

    Requires (T - size) to be an exact multiple of hop; callers pad first.
    The adjoint is overlap_add, so gradients scatter-add back into place.
    """
    T = x.shape[-1]
    if size <= 0 or hop <= 0:
        raise NumericsError("frame: size and hop must be positive")
    if T < size or (T - size) % hop != 0:
        raise NumericsError(
            f"frame: length {T} does not align with size {size}, hop {hop}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(x.data, size, axis=-1)
    out = windows[..., ::hop, :].copy()

    def vjp(g):
        return (_overlap_add_array(g, hop, T),)

    return primitive(out, (x,), vjp, "frame")


def _overlap_add_array(frames: np.ndarray, hop: int, out_len: int) -> np.ndarray:
    S, size = frames.shape[-2], frames.shape[-1]
    out = np.zeros(frames.shape[:-2] + (out_len,), dtype=frames.dtype)
    for s in range(S):
        lo = s * hop
        out[..., lo : lo + size] += frames[..., s, :]
    return out


def overlap_add(x: Tensor, hop: int, out_len: int) -> Tensor:
    """Sum overlapping windows back onto a line: [..., S, size] -> [..., out_len].

    out_len must equal (S - 1) * hop + size; this op is the exact adjoint
    of frame, so its gradient is a framing of the upstream gradient.
    """
    if x.ndim < 2:
        raise NumericsError(f"overlap_add: expected framed input, got {x.shape}")
    S, size = x.shape[-2], x.shape[-1]
    if out_len != (S - 1) * hop + size:
        raise NumericsError(
            f"overlap_add: {S} frames of {size} at hop {hop} cover "
            f"{(S - 1) * hop + size} samples, not {out_len}"
        )

    def vjp(g):
        windows = np.lib.stride_tricks.sliding_window_view(g, size, axis=-1)
        return (windows[..., ::hop, :].copy(),)

    return primitive(_overlap_add_array(x.data, hop, out_len), (x,), vjp, "overlap_add")


# ---------------------------------------------------------------------------
# matmul and depthwise convolution
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise NumericsError(
            f"matmul: strictly 2-D, got ranks {a.ndim} and {b.ndim}"
        )
    if a.shape[1] != b.shape[0]:
        raise NumericsError(
            f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}"
        )

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return primitive(a.data @ b.data, (a, b), vjp, "matmul")


def conv1d_depthwise(x: Tensor, kernel: Tensor, bias: Tensor | None) -> Tensor:
    """Causal depthwise convolution along the last axis.

    x: [..., E, L], kernel: [E, W], bias: [E] or None.  The input is
    left-padded with W - 1 zeros so position l never sees the future:
    y[..., e, l] = sum_w kernel[e, w] * x[..., e, l - (W - 1) + w] + bias[e].
    """
    if x.ndim < 2:
        raise NumericsError(f"conv1d_depthwise: input must be [..., E, L], got {x.shape}")
    if kernel.ndim != 2:
        raise NumericsError(f"conv1d_depthwise: kernel must be [E, W], got {kernel.shape}")
    E, W = kernel.shape
    if x.shape[-2] != E:
        raise NumericsError(
            f"conv1d_depthwise: channel count mismatch, input has {x.shape[-2]} "
            f"channels but kernel has {E}"
        )
    if bias is not None and bias.shape != (E,):
        raise NumericsError(
            f"conv1d_depthwise: bias {bias.shape} does not match {E} channels"
        )
    L = x.shape[-1]
    pad = [(0, 0)] * (x.ndim - 1) + [(W - 1, 0)]
    xp = np.pad(x.data, pad)
    kcol = kernel.data[..., None]  # [E, W, 1] for broadcasting over L
    out = np.zeros_like(x.data)
    for w in range(W):
        out += kcol[:, w] * xp[..., w : w + L]
    if bias is not None:
        out = out + bias.data[:, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def vjp(g):
        gx = None
        if x.requires_grad:
            gp = np.zeros(xp.shape, dtype=g.dtype)
            for w in range(W):
                gp[..., w : w + L] += kcol[:, w] * g
            gx = gp[..., W - 1 :].copy()
        gk = None
        if kernel.requires_grad:
            gk = np.empty_like(kernel.data)
            lead = tuple(range(g.ndim - 2))
            for w in range(W):
                gk[:, w] = (g * xp[..., w : w + L]).sum(axis=lead + (g.ndim - 1,))
        if bias is None:
            return gx, gk
        gb = None
        if bias.requires_grad:
            axes = tuple(i for i in range(g.ndim) if i != g.ndim - 2)
            gb = g.sum(axis=axes)
        return gx, gk, gb

    return primitive(out, parents, vjp, "conv1d_depthwise")


# ---------------------------------------------------------------------------
# normalization primitives (reduce over the channel axis 0)
# ---------------------------------------------------------------------------


def rmsnorm(x: Tensor, gain: Tensor, eps: float = 1e-8) -> Tensor:
    """Root-mean-square normalization over axis 0, scaled by a per-channel gain.

    x: [D, ...], gain: [D].  y = x / sqrt(mean_D(x^2) + eps) * gain.
    """
    D = x.shape[0]
    if gain.shape != (D,):
        raise NumericsError(f"rmsnorm: gain {gain.shape} does not match D={D}")
    gcol = gain.data.reshape((D,) + (1,) * (x.ndim - 1))
    r = np.sqrt(np.mean(x.data * x.data, axis=0, keepdims=True) + eps)
    xhat = x.data / r
    out = xhat * gcol

    def vjp(g):
        gx = None
        if x.requires_grad:
            u = g * gcol
            dot = np.sum(u * x.data, axis=0, keepdims=True)
            gx = u / r - x.data * dot / (D * r**3)
        gg = None
        if gain.requires_grad:
            gg = (g * xhat).reshape(D, -1).sum(axis=1)
        return gx, gg

    return primitive(out, (x, gain), vjp, "rmsnorm")


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-8) -> Tensor:
    """Mean/variance normalization over axis 0 with per-channel gain and bias."""
    D = x.shape[0]
    if gain.shape != (D,) or bias.shape != (D,):
        raise NumericsError(
            f"layernorm: gain {gain.shape} / bias {bias.shape} do not match D={D}"
        )
    gcol = gain.data.reshape((D,) + (1,) * (x.ndim - 1))
    bcol = bias.data.reshape((D,) + (1,) * (x.ndim - 1))
    mu = np.mean(x.data, axis=0, keepdims=True)
    xc = x.data - mu
    sigma = np.sqrt(np.mean(xc * xc, axis=0, keepdims=True) + eps)
    xhat = xc / sigma
    out = xhat * gcol + bcol

    def vjp(g):
        gx = None
        if x.requires_grad:
            u = g * gcol
            gx = (
                u
                - np.mean(u, axis=0, keepdims=True)
                - xhat * np.mean(u * xhat, axis=0, keepdims=True)
            ) / sigma
        gg = None
        if gain.requires_grad:
            gg = (g * xhat).reshape(D, -1).sum(axis=1)
        gb = None
        if bias.requires_grad:
            gb = g.reshape(D, -1).sum(axis=1)
        return gx, gg, gb

    return primitive(out, (x, gain, bias), vjp, "layernorm")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def zeros(shape, requires_grad: bool = False, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False, dtype=np.float64) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def randn(shape, rng: np.random.Generator, requires_grad: bool = False,
          dtype=np.float64) -> Tensor:
    return Tensor(rng.standard_normal(shape).astype(dtype), requires_grad=requires_grad)


def uniform(shape, low: float, high: float, rng: np.random.Generator,
            requires_grad: bool = False, dtype=np.float64) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape).astype(dtype),
                  requires_grad=requires_grad)
