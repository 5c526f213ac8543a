"""Differentiable operations on ``Tensor``.

Broadcasting is limited to a 1-D operand matching the last axis of the
other (bias and gain terms); anything else must match shapes exactly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from vulnscan.numcore.tensor import NumericalError, ShapeError, Tensor, make


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_pair(a: Tensor, b: Tensor, name: str) -> bool:
    """True when b broadcasts along a's last axis, False for equal shapes."""
    if a.shape == b.shape:
        return False
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        return True
    raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to_last(g: np.ndarray) -> np.ndarray:
    return g.reshape(-1, g.shape[-1]).sum(axis=0)


def add(a: Tensor, b: Tensor) -> Tensor:
    bias = _check_pair(a, b, "add")

    def backward(g):
        return g, (_reduce_to_last(g) if bias else g)

    return make(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    bias = _check_pair(a, b, "sub")

    def backward(g):
        return g, -(_reduce_to_last(g) if bias else g)

    return make(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    bias = _check_pair(a, b, "mul")

    def backward(g):
        gb = g * a.data
        return g * b.data, (_reduce_to_last(gb) if bias else gb)

    return make(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    return make(a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for [m,k]@[k,n], [k]@[k,n], [...,m,k]@[k,n] and batched [b,m,k]@[b,k,n]."""
    sa, sb = a.shape, b.shape
    ok = (
        (b.ndim == 2 and a.ndim >= 1 and sa[-1] == sb[0])
        or (a.ndim == 3 and b.ndim == 3 and sa[0] == sb[0] and sa[2] == sb[1])
    )
    if not ok:
        raise ShapeError(f"matmul: incompatible shapes {sa} and {sb}")
    out = a.data @ b.data

    def backward(g):
        if b.ndim == 2:
            ga = g @ b.data.T
            if a.ndim == 1:
                gb = np.outer(a.data, g)
            else:
                gb = a.data.reshape(-1, sa[-1]).T @ g.reshape(-1, sb[1])
        else:
            ga = g @ b.data.transpose(0, 2, 1)
            gb = a.data.transpose(0, 2, 1) @ g
        return ga, gb

    return make(out, (a, b), backward, "matmul")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return make(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)
    return make(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    on = a.data > 0
    return make(a.data * on, (a,), lambda g: (g * on,), "relu")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return make(y, (a,), lambda g: (g * y,), "exp")


def log(a: Tensor) -> Tensor:
    return make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy
    if axis is None:
        return make(np.array(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),), "sum")
    axis = axis % a.ndim

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return make(a.data.sum(axis=axis), (a,), backward, "sum")


def mean(a: Tensor) -> Tensor:
    n = a.size
    return make(np.array(a.data.mean()), (a,), lambda g: (np.full(a.shape, g / n),), "mean")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no tensors")
    nd = tensors[0].ndim
    ax = axis % nd
    for t in tensors:
        if t.ndim != nd or t.shape[:ax] + t.shape[ax + 1:] != tensors[0].shape[:ax] + tensors[0].shape[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0, *sizes])

    def backward(g):
        return tuple(
            np.take(g, range(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(tensors))
        )

    return make(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), backward, "concat")


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a [n, d] matrix."""
    return concat([reshape(t, (1, -1)) for t in tensors], axis=0)


def index(a: Tensor, idx) -> Tensor:
    """Basic or integer-array indexing (``a[idx]``)."""
    out = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return make(np.array(out), (a,), backward, "index")


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from None
    return make(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def embedding(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by integer ``ids`` (any shape)."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding: id out of range for table of {table.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return make(table.data[ids], (table,), backward, "embedding")


def _softmax_data(x: np.ndarray) -> np.ndarray:
    if np.isnan(x).any():
        raise NumericalError("softmax: NaN input")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a: Tensor) -> Tensor:
    if a.ndim == 0 or a.shape[-1] < 1:
        raise ShapeError(f"softmax: need a non-empty last axis, got {a.shape}")
    y = _softmax_data(a.data)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make(y, (a,), backward, "softmax")


def log_softmax(a: Tensor) -> Tensor:
    if np.isnan(a.data).any():
        raise NumericalError("log_softmax: NaN input")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return make(out, (a,), backward, "log_softmax")


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-probability of the true class, rows of [b, n_classes]."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs {labels.shape[0]} labels")
    n = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        raise ValueError(f"cross_entropy: label out of range [0, {n})")
    if np.isnan(logits.data).any():
        raise NumericalError("cross_entropy: NaN logits")
    b = labels.shape[0]
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    rows = np.arange(b)
    loss = -logp[rows, labels].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[rows, labels] -= 1.0
        return (grad * (g / b),)

    return make(np.array(loss), (logits,), backward, "cross_entropy")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match last axis of {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gx_hat = g * gain.data
        gx = inv * (gx_hat - gx_hat.mean(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, _reduce_to_last(g * xhat), _reduce_to_last(g)

    return make(out, (x, gain, bias), backward, "layer_norm")


def lstm_scan(xproj: Tensor, w_h: Tensor, h0: Tensor | None = None, c0: Tensor | None = None) -> Tensor:
    """Run an LSTM recurrence over precomputed input projections.

    ``xproj`` is [T, 4H] (or [T, B, 4H]) holding x_t @ W_x + b with gate
    blocks ordered (input, forget, output, candidate). Returns the hidden
    states [T, H] (or [T, B, H]). Fused into one graph node with a
    hand-written backward through time.
    """
    T = xproj.shape[0]
    H = w_h.shape[0]
    if w_h.shape != (H, 4 * H) or xproj.shape[-1] != 4 * H or T < 1:
        raise ShapeError(f"lstm_scan: xproj {xproj.shape} does not fit w_h {w_h.shape}")
    state_shape = xproj.shape[1:-1] + (H,)
    h = np.zeros(state_shape) if h0 is None else h0.data
    c = np.zeros(state_shape) if c0 is None else c0.data
    if h.shape != state_shape or c.shape != state_shape:
        raise ShapeError(f"lstm_scan: initial state must have shape {state_shape}")
    W = w_h.data
    hs = np.empty((T,) + state_shape)
    cs = np.empty((T,) + state_shape)
    gates = np.empty((T,) + state_shape[:-1] + (4 * H,))
    h_prev = np.empty((T,) + state_shape)
    c_prev = np.empty((T,) + state_shape)
    for t in range(T):
        h_prev[t] = h
        c_prev[t] = c
        z = xproj.data[t] + h @ W
        act = np.empty_like(z)
        act[..., : 3 * H] = _sigmoid(z[..., : 3 * H])
        act[..., 3 * H:] = np.tanh(z[..., 3 * H:])
        gates[t] = act
        i, f, o, g = act[..., :H], act[..., H: 2 * H], act[..., 2 * H: 3 * H], act[..., 3 * H:]
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[t] = h
        cs[t] = c

    parents = (xproj, w_h) + tuple(p for p in (h0, c0) if p is not None)

    def backward(gH):
        dz_all = np.empty_like(gates)
        dh_next = np.zeros(state_shape)
        dc_next = np.zeros(state_shape)
        for t in range(T - 1, -1, -1):
            act = gates[t]
            i, f, o, g = act[..., :H], act[..., H: 2 * H], act[..., 2 * H: 3 * H], act[..., 3 * H:]
            tc = np.tanh(cs[t])
            dh = gH[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = dz_all[t]
            dz[..., :H] = dc * g * i * (1.0 - i)
            dz[..., H: 2 * H] = dc * c_prev[t] * f * (1.0 - f)
            dz[..., 2 * H: 3 * H] = dh * tc * o * (1.0 - o)
            dz[..., 3 * H:] = dc * i * (1.0 - g * g)
            dh_next = dz @ W.T
            dc_next = dc * f
        dW = h_prev.reshape(-1, H).T @ dz_all.reshape(-1, 4 * H)
        grads = [dz_all, dW]
        if h0 is not None:
            grads.append(dh_next)
        if c0 is not None:
            grads.append(dc_next)
        return tuple(grads)

    return make(hs, parents, backward, "lstm_scan")


def constant_like_mask(mask: np.ndarray, value: float = -1e30) -> np.ndarray:
    """Additive attention bias: 0 for visible keys, ``value`` for masked ones."""
    return np.where(np.asarray(mask) > 0, 0.0, value)
