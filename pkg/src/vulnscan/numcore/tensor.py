"""Dense float64 tensors with reverse-mode automatic differentiation."""

from __future__ import annotations

import contextlib
import threading

import numpy as np

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Run ops without recording them for backward."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class ShapeError(ValueError):
    pass


class NumericalError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # Operators delegate to the functional ops; imported lazily to avoid a cycle.
    def __add__(self, other):
        from vulnscan.numcore import ops
        return ops.add(self, ops.as_tensor(other))

    def __sub__(self, other):
        from vulnscan.numcore import ops
        return ops.sub(self, ops.as_tensor(other))

    def __mul__(self, other):
        from vulnscan.numcore import ops
        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, ops.as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        from vulnscan.numcore import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from vulnscan.numcore import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from vulnscan.numcore import ops
        return ops.index(self, idx)


def make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    """Wrap an op result, recording it in the graph when any parent needs grad."""
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
        out.op = op
    return out


def accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        g = g.reshape(t.data.shape)
    t.grad = g.copy() if t.grad is None else t.grad + g


def _topological(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Propagate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it.

    Leaf gradients accumulate across calls; clear them with ``zero_grad``.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            accumulate(node, g)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg


def check_finite(t: Tensor, where: str = "") -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NumericalError(f"non-finite values{' in ' + where if where else ''}")
    return t
