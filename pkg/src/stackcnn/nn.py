"""Numerical kernels for the shallow CNN: forward/backward pairs, loss, Adam.

Forward functions return ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache. All kernels accept an optional
leading batch axis.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

CE_CLIP = 1e-12


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, block):
        self.block = block
        super().__init__(f"non-finite gradient in parameter block {block!r}")


def xavier_init(fan_in, fan_out, rng, dtype=np.float32):
    """Uniform on [-b, b], b = sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
    # rounding to a narrower dtype can step just past the bound
    lim = np.asarray(bound, dtype=dtype)
    if lim > bound:
        lim = np.nextafter(lim, lim.dtype.type(0))
    return np.clip(w, -lim, lim)


def relu(x):
    return np.maximum(x, 0)


# -- convolution -------------------------------------------------------------

def conv1d_forward(x, w, b):
    """Valid word-wise convolution followed by ReLU.

    x: (..., L, D); w: (width, D, F) with b: (F,) gives (..., L-width+1, F).
    A single filter w: (width, D) with scalar b gives (..., L-width+1).
    """
    single = w.ndim == 2
    if single:
        w = w[:, :, None]
        b = np.reshape(b, (1,))
    width, dim, nf = w.shape
    L = x.shape[-2]
    if not 1 <= width <= L:
        raise ValueError(f"filter width {width} must be in [1, {L}]")
    if x.shape[-1] != dim:
        raise ValueError(f"input width {x.shape[-1]} does not match filter depth {dim}")
    # (..., T, D, width) -> (..., T, width, D) -> (..., T, width*D)
    windows = sliding_window_view(x, width, axis=-2)
    windows = np.swapaxes(windows, -1, -2).reshape(*x.shape[:-2], L - width + 1, width * dim)
    # one 2-D GEMM; batched 3-D matmul is far slower
    z = (windows.reshape(-1, width * dim) @ w.reshape(width * dim, nf)).reshape(*windows.shape[:-1], nf) + b
    out = relu(z)
    cache = (windows, z, w.shape, x.shape, single, w)
    return (out[..., 0] if single else out), cache


def conv1d_backward(dout, cache, input_grad=True):
    """Gradients (dx, dw, db); dx is None when ``input_grad`` is false."""
    windows, z, wshape, xshape, single, w = cache
    if single:
        dout = dout[..., None]
    width, dim, nf = wshape
    dz = dout * (z > 0)
    flat_win = windows.reshape(-1, width * dim)
    flat_dz = dz.reshape(-1, nf)
    dw = (flat_win.T @ flat_dz).reshape(wshape)
    db = flat_dz.sum(axis=0)
    if single:
        dw, db = dw[:, :, 0], db[0]
    if not input_grad:
        return None, dw, db
    # each window row t covers input rows t..t+width-1
    dwin = (flat_dz @ w.reshape(width * dim, nf).T).reshape(*dz.shape[:-1], width, dim)
    dx = np.zeros(xshape, dtype=dz.dtype)
    T = dz.shape[-2]
    for k in range(width):
        dx[..., k : k + T, :] += dwin[..., k, :]
    return dx, dw, db


def max_over_time(fmap):
    """Max over the time axis (-2 for (..., T, F) maps, -1 for a plain vector).

    Returns ``(max, argmax)``; ties resolve to the first position.
    """
    axis = -1 if fmap.ndim == 1 else -2
    if fmap.shape[axis] < 1:
        raise ValueError("max_over_time needs at least one position")
    idx = np.argmax(fmap, axis=axis)
    val = np.take_along_axis(fmap, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
    return val, idx


def max_over_time_backward(dout, idx, length):
    """Route ``dout`` to the argmax positions of a length-``length`` time axis."""
    dout = np.asarray(dout)
    if dout.ndim == 0:
        d = np.zeros(length, dtype=dout.dtype)
        d[int(idx)] = dout
        return d
    d = np.zeros((*dout.shape[:-1], length, dout.shape[-1]), dtype=dout.dtype)
    np.put_along_axis(d, idx[..., None, :], dout[..., None, :], axis=-2)
    return d


# -- dense -------------------------------------------------------------------

def dense_forward(x, W, b, activation="identity"):
    if x.shape[-1] != W.shape[0] or W.shape[1] != b.shape[-1]:
        raise ValueError(f"shape mismatch: input {x.shape}, W {W.shape}, b {b.shape}")
    z = x @ W + b
    if activation == "relu":
        out = relu(z)
    elif activation == "identity":
        out = z
    else:
        raise ValueError(f"unknown activation {activation!r}")
    return out, (x, z, W, activation)


def dense_backward(dout, cache):
    x, z, W, activation = cache
    dz = dout * (z > 0) if activation == "relu" else dout
    x2 = x.reshape(-1, x.shape[-1])
    dz2 = dz.reshape(-1, dz.shape[-1])
    return dz @ W.T, x2.T @ dz2, dz2.sum(axis=0)


# -- output ------------------------------------------------------------------

def softmax(logits):
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax input contains non-finite values")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(pred, gold):
    """-ln(pred[gold]) for a class label in {1, 2, 3}, clipped at 1e-12."""
    return float(-np.log(max(float(pred[gold - 1]), CE_CLIP)))


def softmax_cross_entropy(logits, labels):
    """Mean clipped cross-entropy over a batch and its gradient w.r.t. logits.

    ``labels`` are classes in {1, 2, 3}. Loss accumulates in float64.
    """
    probs = softmax(logits)
    n = probs.shape[0]
    rows = np.arange(n)
    picked = np.maximum(probs[rows, labels - 1].astype(np.float64), CE_CLIP)
    loss = float(-np.log(picked).sum() / n)
    dlogits = probs.copy()
    dlogits[rows, labels - 1] -= 1
    return loss, (dlogits / n).astype(logits.dtype)


# -- dropout -----------------------------------------------------------------

def dropout_apply(x, p, rng, training):
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Returns ``(output, mask)``; the mask already includes the scale.
    """
    if not 0 <= p < 1:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x, None
    keep = rng.random(x.shape) >= p
    mask = keep.astype(x.dtype) / x.dtype.type(1 - p)
    return x * mask, mask


# -- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta2: float = 0.999
    beta1: float = 0.9
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """One Adam update of ``params`` (a dict of arrays) in place.

    Returns ``(params, state)``. Moment buffers are created on first use.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state


def anneal_restart(state, checkpoint):
    """Fresh optimizer state at half the learning rate plus a copy of ``checkpoint``."""
    new_state = AdamState(
        learning_rate=state.learning_rate / 2,
        beta2=state.beta2,
        beta1=state.beta1,
        epsilon=state.epsilon,
    )
    return new_state, {k: v.copy() for k, v in checkpoint.items()}
