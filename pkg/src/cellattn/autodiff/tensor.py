"""Dense tensors with a reverse-mode tape.

Only the operations the cell attention model uses are provided; there is
no general broadcasting.  Each op checks its shapes and raises
:class:`ShapeError` naming both operands.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

DEFAULT_DTYPE = np.float64


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        arr = np.asarray(data, dtype=dtype)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable ``grad`` buffer."""
        if not self.requires_grad:
            return
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        # interior buffers are reset; only leaves accumulate across calls
        for node in order:
            if node._backward is not None:
                node.grad = np.zeros_like(node.data)
        self.grad += np.asarray(grad, dtype=self.dtype)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data, dtype=data.dtype)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.grad = np.zeros_like(data)
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad += g


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)


# ------------------------------------------------------------------ linear
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a.requires_grad:
            a.grad += g @ b.data.T if b.data.ndim == 2 else np.outer(g, b.data)
        if b.requires_grad:
            b.grad += a.data.T @ g

    return _result(a.data @ b.data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may also be a row vector broadcast over ``a``'s rows."""
    if a.shape == b.shape:
        def bw(g):
            _acc(a, g)
            _acc(b, g)
    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        def bw(g):
            _acc(a, g)
            _acc(b, g.sum(axis=0))
    else:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    return _result(a.data + b.data, (a, b), bw)


def add_n(xs: Sequence[Tensor]) -> Tensor:
    out = xs[0]
    for x in xs[1:]:
        out = add(out, x)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    def bw(g):
        _acc(a, c * g)

    return _result(a.data * c, (a,), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equal shapes, or rows of ``a`` scaled by vector ``b``."""
    if a.shape == b.shape:
        def bw(g):
            _acc(a, g * b.data)
            _acc(b, g * a.data)
        return _result(a.data * b.data, (a, b), bw)
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[0] == b.shape[0]:
        def bw(g):
            _acc(a, g * b.data[:, None])
            _acc(b, (g * a.data).sum(axis=1))
        return _result(a.data * b.data[:, None], (a, b), bw)
    raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")


def concat(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    lead = {x.shape[:-1] for x in xs}
    if len(lead) != 1:
        raise ShapeError(f"concat: leading shapes differ: {[x.shape for x in xs]}")
    widths = [x.shape[-1] for x in xs]
    splits = np.cumsum(widths)[:-1]

    def bw(g):
        for x, part in zip(xs, np.split(g, splits, axis=-1)):
            _acc(x, part)

    return _result(np.concatenate([x.data for x in xs], axis=-1), tuple(xs), bw)


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """Rows (or entries, for 1-D ``x``) selected by an integer index array."""
    index = np.asarray(index, dtype=np.int64)

    def bw(g):
        if x.requires_grad:
            np.add.at(x.grad, index, g)

    return _result(x.data[index], (x,), bw)


def scatter_add(x: Tensor, index: np.ndarray, num_segments: int) -> Tensor:
    """``out[index[i]] += x[i]`` into ``num_segments`` rows."""
    index = np.asarray(index, dtype=np.int64)
    if len(index) != x.shape[0]:
        raise ShapeError(f"scatter_add: index length {len(index)} vs rows {x.shape}")
    out = np.zeros((num_segments,) + x.shape[1:], dtype=x.dtype)
    np.add.at(out, index, x.data)

    def bw(g):
        _acc(x, g[index])

    return _result(out, (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    def bw(g):
        _acc(x, np.broadcast_to(g, x.shape))

    return _result(np.asarray(x.data.sum()), (x,), bw)


def sum_rows(x: Tensor) -> Tensor:
    """Sum over axis 0."""
    def bw(g):
        _acc(x, np.broadcast_to(g, x.shape))

    return _result(x.data.sum(axis=0), (x,), bw)


def reshape(x: Tensor, shape) -> Tensor:
    def bw(g):
        _acc(x, g.reshape(x.shape))

    return _result(x.data.reshape(shape), (x,), bw)


def masked_softmax(scores: Tensor, groups: np.ndarray, num_groups: int) -> Tensor:
    """Softmax of ``scores`` within each group id.

    Groups with no members simply produce no outputs; callers treat their
    aggregated contribution as zero.
    """
    groups = np.asarray(groups, dtype=np.int64)
    if scores.data.ndim != 1 or len(groups) != len(scores.data):
        raise ShapeError(f"masked_softmax: scores {scores.shape} vs groups {groups.shape}")
    s = scores.data
    gmax = np.full(num_groups, -np.inf, dtype=s.dtype)
    np.maximum.at(gmax, groups, s)
    ex = np.exp(s - gmax[groups])
    denom = np.zeros(num_groups, dtype=s.dtype)
    np.add.at(denom, groups, ex)
    alpha = ex / denom[groups]

    def bw(g):
        if scores.requires_grad:
            dot = np.zeros(num_groups, dtype=s.dtype)
            np.add.at(dot, groups, g * alpha)
            scores.grad += alpha * (g - dot[groups])

    return _result(alpha, (scores,), bw)


# ------------------------------------------------------------- activations
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def _pointwise(x: Tensor, f, df) -> Tensor:
    y = f(x.data)

    def bw(g):
        _acc(x, g * df(x.data, y))

    return _result(y, (x,), bw)


def relu(x: Tensor) -> Tensor:
    return _pointwise(x, lambda a: np.maximum(a, 0.0), lambda a, y: (a > 0).astype(a.dtype))


def leaky_relu(x: Tensor, negative_slope: float = 0.01) -> Tensor:
    return _pointwise(
        x,
        lambda a: np.where(a > 0, a, negative_slope * a),
        lambda a, y: np.where(a > 0, 1.0, negative_slope).astype(a.dtype),
    )


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    return _pointwise(
        x,
        lambda a: np.where(a > 0, a, alpha * np.expm1(np.minimum(a, 0.0))),
        lambda a, y: np.where(a > 0, 1.0, y + alpha).astype(a.dtype),
    )


def tanh(x: Tensor) -> Tensor:
    return _pointwise(x, np.tanh, lambda a, y: 1.0 - y * y)


def sigmoid(x: Tensor) -> Tensor:
    def f(a):
        return 0.5 * (1.0 + np.tanh(0.5 * a))

    return _pointwise(x, f, lambda a, y: y * (1.0 - y))


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of GELU."""
    def f(a):
        return 0.5 * a * (1.0 + np.tanh(SQRT_2_OVER_PI * (a + 0.044715 * a**3)))

    def df(a, y):
        t = np.tanh(SQRT_2_OVER_PI * (a + 0.044715 * a**3))
        dt = (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3 * 0.044715 * a * a)
        return 0.5 * (1.0 + t) + 0.5 * a * dt

    return _pointwise(x, f, df)


def identity(x: Tensor) -> Tensor:
    return x


ACTIVATIONS = {
    "relu": relu,
    "lrelu": leaky_relu,
    "leaky_relu": leaky_relu,
    "elu": elu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "gelu": gelu,
    "identity": identity,
}


def activation(name: str, negative_slope: float = 0.01) -> Callable[[Tensor], Tensor]:
    key = name.lower()
    if key not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    if key in ("lrelu", "leaky_relu"):
        return lambda x: leaky_relu(x, negative_slope)
    return ACTIVATIONS[key]


# --------------------------------------------------------- regularisation
def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def bw(g):
        _acc(x, g * keep)

    return _result(x.data * keep, (x,), bw)


class BatchNormState:
    """Running statistics for one batch-norm layer (not learnable)."""

    def __init__(self, width: int, dtype=DEFAULT_DTYPE, momentum: float = 0.1):
        self.running_mean = np.zeros(width, dtype=dtype)
        self.running_var = np.ones(width, dtype=dtype)
        self.momentum = momentum


def batch_norm_1d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    state: BatchNormState,
    train: bool,
    eps: float = 1e-8,
) -> Tensor:
    """Normalise each feature column over the row axis.

    In train mode batch statistics are used and the running estimates are
    updated; in eval mode the running estimates are used.  A batch with a
    single row falls back to the running estimates.
    """
    if x.data.ndim != 2 or weight.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm_1d: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    n = x.shape[0]
    if train and n > 1:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mu
        state.running_var = (1 - m) * state.running_var + m * var * n / (n - 1)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv

        def bw(g):
            _acc(weight, (g * xhat).sum(axis=0))
            _acc(bias, g.sum(axis=0))
            if x.requires_grad:
                gx = g * weight.data
                x.grad += inv / n * (n * gx - gx.sum(axis=0) - xhat * (gx * xhat).sum(axis=0))

        return _result(xhat * weight.data + bias.data, (x, weight, bias), bw)

    inv = 1.0 / np.sqrt(state.running_var + eps)
    xhat = (x.data - state.running_mean) * inv

    def bw_eval(g):
        _acc(weight, (g * xhat).sum(axis=0))
        _acc(bias, g.sum(axis=0))
        _acc(x, g * weight.data * inv)

    return _result(xhat * weight.data + bias.data, (x, weight, bias), bw_eval)


# ------------------------------------------------------------------- loss
def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row softmax."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or len(labels) != logits.shape[0]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    n = len(labels)
    logp = log_softmax_rows(logits.data)
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        if logits.requires_grad:
            p = np.exp(logp)
            p[np.arange(n), labels] -= 1.0
            logits.grad += g * p / n

    return _result(np.asarray(loss, dtype=logits.dtype), (logits,), bw)
