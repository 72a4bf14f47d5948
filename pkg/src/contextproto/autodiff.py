"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation returns a new ``Tensor`` holding the forward value plus a
closure that routes upstream gradients to the operands. Shapes are limited
to 0-d scalars, 1-d vectors and 2-d matrices; the only broadcast allowed is
matrix + row-vector, which batched affine layers need. Gradients accumulate
across repeated use of a tensor within one backward pass; callers zero them
between episodes.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, DomainError

Array = np.ndarray


class Tensor:
    """A value node: float64 ndarray plus reverse-mode bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _node(value: Array, parents: tuple[Tensor, ...], push) -> Tensor:
    out = Tensor(value)
    grad_parents = tuple(p for p in parents if p.requires_grad)
    if grad_parents:
        out.requires_grad = True
        out._parents = grad_parents
        out._backward = push
    return out


def _toposort(root: Tensor) -> list[Tensor]:
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from a scalar loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward root must be scalar, got shape {loss.data.shape}")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_toposort(loss)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# operations


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul inner dimensions differ: {ad.shape} x {bd.shape}")

        def push(g: Array) -> None:
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul inner dimensions differ: {ad.shape} x {bd.shape}")

        def push(g: Array) -> None:
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)

    else:
        raise DimensionError(f"matmul supports 2-D x 2-D or 2-D x 1-D, got {ad.shape} x {bd.shape}")
    return _node(ad @ bd, (a, b), push)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.data.shape}")

    def push(g: Array) -> None:
        _accum(a, g.T)

    return _node(a.data.T.copy(), (a,), push)


def add(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.shape == bd.shape:

        def push(g: Array) -> None:
            _accum(a, g)
            _accum(b, g)

    elif ad.ndim == 2 and bd.ndim == 1 and ad.shape[1] == bd.shape[0]:

        def push(g: Array) -> None:
            _accum(a, g)
            _accum(b, g.sum(axis=0))

    else:
        raise DimensionError(f"cannot add shapes {ad.shape} and {bd.shape}")
    return _node(ad + bd, (a, b), push)


def sub(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.shape == bd.shape:

        def push(g: Array) -> None:
            _accum(a, g)
            _accum(b, -g)

    elif ad.ndim == 2 and bd.ndim == 1 and ad.shape[1] == bd.shape[0]:

        def push(g: Array) -> None:
            _accum(a, g)
            _accum(b, -g.sum(axis=0))

    else:
        raise DimensionError(f"cannot subtract shapes {ad.shape} and {bd.shape}")
    return _node(ad - bd, (a, b), push)


def mul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.shape != bd.shape:
        raise DimensionError(f"elementwise mul needs equal shapes, got {ad.shape} and {bd.shape}")

    def push(g: Array) -> None:
        _accum(a, g * bd)
        _accum(b, g * ad)

    return _node(ad * bd, (a, b), push)


def scale(a: Tensor, c: float) -> Tensor:
    def push(g: Array) -> None:
        _accum(a, g * c)

    return _node(a.data * c, (a,), push)


def smul(a: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a learnable scalar (shape () or (1,))."""
    if s.data.size != 1:
        raise DimensionError(f"smul scalar must have one element, got shape {s.data.shape}")
    sv = s.data.item()

    def push(g: Array) -> None:
        _accum(a, g * sv)
        _accum(s, np.full_like(s.data, float((g * a.data).sum())))

    return _node(a.data * sv, (a, s), push)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def push(g: Array) -> None:
        _accum(a, g * (1.0 - out * out))

    return _node(out, (a,), push)


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)

    def push(g: Array) -> None:
        _accum(a, g * out * (1.0 - out))

    return _node(out, (a,), push)


def _sigmoid(x: Array) -> Array:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise DomainError("sqrt of negative value")
    out = np.sqrt(a.data)

    def push(g: Array) -> None:
        _accum(a, g / (2.0 * out))

    return _node(out, (a,), push)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DomainError("concat of empty list")
    datas = [t.data for t in tensors]
    ndim = datas[0].ndim
    if any(d.ndim != ndim for d in datas) or axis not in (0, 1) or axis >= ndim:
        raise DimensionError(f"concat axis {axis} invalid for shapes {[d.shape for d in datas]}")
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def push(g: Array) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _accum(t, g[lo:hi] if axis == 0 else g[:, lo:hi])

    return _node(np.concatenate(datas, axis=axis), tuple(tensors), push)


def column_stack(tensors: list[Tensor]) -> Tensor:
    """Stack 1-d tensors of equal length as the columns of a matrix."""
    if not tensors:
        raise DomainError("column_stack of empty list")
    datas = [t.data for t in tensors]
    n = datas[0].shape[0]
    if any(d.ndim != 1 or d.shape[0] != n for d in datas):
        raise DimensionError(f"column_stack needs equal-length vectors, got {[d.shape for d in datas]}")

    def push(g: Array) -> None:
        for i, t in enumerate(tensors):
            _accum(t, g[:, i])

    return _node(np.stack(datas, axis=1), tuple(tensors), push)


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        shape = a.data.shape

        def push(g: Array) -> None:
            _accum(a, np.full(shape, float(g)))

        return _node(np.float64(a.data.sum()), (a,), push)
    if axis == 1 and a.data.ndim == 2:
        d = a.data.shape[1]

        def push(g: Array) -> None:
            _accum(a, np.repeat(g[:, None], d, axis=1))

        return _node(a.data.sum(axis=1), (a,), push)
    raise DimensionError(f"sum supports axis None or axis 1 on matrices, got axis={axis} for shape {a.data.shape}")


def mean_tensors(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise DomainError("mean of empty list")
    total = tensors[0]
    for t in tensors[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(tensors))


def softmax(v: Tensor) -> Tensor:
    """Stable softmax of a vector (max-subtracted)."""
    if v.data.ndim != 1 or v.data.shape[0] == 0:
        raise DomainError(f"softmax expects a nonempty vector, got shape {v.data.shape}")
    z = v.data - v.data.max()
    e = np.exp(z)
    out = e / e.sum()

    def push(g: Array) -> None:
        _accum(v, out * (g - float(g @ out)))

    return _node(out, (v,), push)


def softmax_rows(x: Array) -> Array:
    """Row-wise stable softmax on a plain array (no gradient)."""
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy of row-softmax(logits) against integer targets.

    Fused with log-softmax so a vanishing probability never produces -inf.
    """
    t = np.asarray(targets, dtype=np.int64)
    ld = logits.data
    if ld.ndim != 2 or t.ndim != 1 or t.shape[0] != ld.shape[0]:
        raise DimensionError(f"cross_entropy expects (n, M) logits and (n,) targets, got {ld.shape} and {t.shape}")
    if t.size and (t.min() < 0 or t.max() >= ld.shape[1]):
        raise DomainError("cross_entropy target index out of range")
    n = ld.shape[0]
    m = ld.max(axis=1, keepdims=True)
    z = ld - m
    e = np.exp(z)
    lse = np.log(e.sum(axis=1)) + m[:, 0]
    loss = (lse - ld[np.arange(n), t]).mean()
    probs = e / e.sum(axis=1, keepdims=True)

    def push(g: Array) -> None:
        gmat = probs.copy()
        gmat[np.arange(n), t] -= 1.0
        _accum(logits, gmat * (float(g) / n))

    return _node(np.float64(loss), (logits,), push)


# ---------------------------------------------------------------------------
# finite-difference checking


def grad_check(f, params: list[Tensor], h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    Relative error per entry is |analytic - numeric| / (|analytic| + 1e-8);
    the numeric side re-runs the forward pass only, independent of the tape.
    """
    if h <= 0:
        raise DomainError("step h must be positive")
    for p in params:
        p.zero_grad()
    backward(f())
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = float(f().data)
            flat[i] = saved - h
            down = float(f().data)
            flat[i] = saved
            numeric = (up - down) / (2.0 * h)
            err = abs(gflat[i] - numeric) / (abs(gflat[i]) + 1e-8)
            if err > worst:
                worst = err
    return worst
