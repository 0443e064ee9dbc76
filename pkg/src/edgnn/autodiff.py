"""Small reverse-mode autodiff engine over dense 2-D float64 arrays.

Every op returns a :class:`Tensor` that remembers its inputs and a closure
propagating the output gradient back to them. :func:`backward` walks that
record in reverse topological order, visiting each node once.

Only the ops edGNN needs are provided. Sparse structure (neighbour sums,
segment sums) enters as constant ``scipy.sparse`` matrices.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward_fn: Callable[[np.ndarray], None] | None = None, name: str = ""):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        elif data.ndim == 1:
            data = data.reshape(1, -1)
        elif data.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = tuple(parents)
        self._backward = backward_fn
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


def _result(data, parents, backward_fn) -> Tensor:
    track = any(p.requires_grad for p in parents)
    return Tensor(data, track, parents if track else (), backward_fn if track else None)


def _accumulate(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g.copy() if t.grad is None else t.grad + g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def back(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)
    return _result(a.data @ b.data, (a, b), back)


def add(*xs: Tensor) -> Tensor:
    xs = [constant(x) for x in xs]
    shape = xs[0].shape
    for x in xs[1:]:
        if x.shape != shape:
            raise ShapeError(f"add: {shape} vs {x.shape}")
    out = xs[0].data.copy()
    for x in xs[1:]:
        out += x.data

    def back(g):
        for x in xs:
            _accumulate(x, g)
    return _result(out, xs, back)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a ``1 x m`` row to every row of ``a``."""
    a, bias = constant(a), constant(bias)
    if bias.shape != (1, a.shape[1]):
        raise ShapeError(f"add_bias: {a.shape} + {bias.shape}")

    def back(g):
        _accumulate(a, g)
        _accumulate(bias, g.sum(axis=0, keepdims=True))
    return _result(a.data + bias.data, (a, bias), back)


def relu(a: Tensor) -> Tensor:
    a = constant(a)
    mask = a.data > 0  # derivative at exactly 0 is 0

    def back(g):
        _accumulate(a, g * mask)
    return _result(np.where(mask, a.data, 0.0), (a,), back)


def concat_cols(xs: Sequence[Tensor]) -> Tensor:
    xs = [constant(x) for x in xs]
    rows = {x.shape[0] for x in xs}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {[x.shape for x in xs]}")
    bounds = np.cumsum([0] + [x.shape[1] for x in xs])

    def back(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            _accumulate(x, g[:, lo:hi])
    return _result(np.hstack([x.data for x in xs]), xs, back)


def concat_rows(xs: Sequence[Tensor]) -> Tensor:
    xs = [constant(x) for x in xs]
    cols = {x.shape[1] for x in xs}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {[x.shape for x in xs]}")
    bounds = np.cumsum([0] + [x.shape[0] for x in xs])

    def back(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            _accumulate(x, g[lo:hi])
    return _result(np.vstack([x.data for x in xs]), xs, back)


def spmm(matrix: sp.spmatrix, x: Tensor) -> Tensor:
    """``matrix @ x`` for a constant sparse matrix."""
    x = constant(x)
    if matrix.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: {matrix.shape} @ {x.shape}")
    matrix = sp.csr_matrix(matrix)

    def back(g):
        _accumulate(x, np.asarray(matrix.T @ g))
    return _result(np.asarray(matrix @ x.data), (x,), back)


def segment_matrix(segments, num_segments: int) -> sp.csr_matrix:
    segments = np.asarray(segments, dtype=np.int64)
    if len(segments) and (segments.min() < 0 or segments.max() >= num_segments):
        raise ShapeError(f"segment ids must lie in [0, {num_segments})")
    n = len(segments)
    m = sp.csr_matrix((np.ones(n), (segments, np.arange(n))), shape=(num_segments, n))
    m.sort_indices()
    return m


def segment_sum(x: Tensor, segments, num_segments: int) -> Tensor:
    """Row ``s`` of the result sums the rows of ``x`` mapped to segment ``s``.
    Empty segments give zero rows."""
    x = constant(x)
    if len(segments) != x.shape[0]:
        raise ShapeError(f"segment_sum: {len(segments)} segment ids for {x.shape[0]} rows")
    return spmm(segment_matrix(segments, num_segments), x)


def take_rows(x: Tensor, idx) -> Tensor:
    x = constant(x)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        _accumulate(x, full)
    return _result(x.data[idx], (x,), back)


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity outside training."""
    a = constant(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    scale = (rng.random(a.shape) >= p) / (1.0 - p)

    def back(g):
        _accumulate(a, g * scale)
    return _result(a.data * scale, (a,), back)


def sum_all(a: Tensor) -> Tensor:
    a = constant(a)

    def back(g):
        _accumulate(a, np.full_like(a.data, g[0, 0]))
    return _result(a.data.sum(), (a,), back)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy of integer ``targets`` under softmax(``logits``)."""
    logits = constant(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n, c = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"softmax_cross_entropy: {n} rows but {targets.shape} targets")
    if n and (targets.min() < 0 or targets.max() >= c):
        raise ValueError(f"targets must lie in [0, {c})")
    logp = log_softmax(logits.data)
    rows = np.arange(n)
    loss = -logp[rows, targets].mean()

    def back(g):
        d = np.exp(logp)
        d[rows, targets] -= 1.0
        _accumulate(logits, d * (g[0, 0] / n))
    return _result(loss, (logits,), back)


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Tensor] = ()) -> list[np.ndarray]:
    """Back-propagate from a scalar ``loss``.

    Gradients accumulate into ``.grad`` of every tracked tensor reached.
    Returns the gradients of ``params`` (zeros for parameters the loss does
    not depend on).
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    params = list(params)
    for p in params:
        p.grad = None
    order = _topological(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


class Adam:
    """Adam with decoupled weight decay.

    Each step first shrinks every parameter by ``lr * weight_decay``, then
    applies the bias-corrected Adam update.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr, self.betas, self.eps, self.weight_decay = lr, tuple(betas), eps, weight_decay
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray] | None = None):
        if grads is None:
            grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise ShapeError(f"{len(grads)} gradients for {len(self.params)} parameters")
        b1, b2 = self.betas
        self.t += 1
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            denom = np.sqrt(v / c2) + self.eps
            with np.errstate(invalid="ignore", divide="ignore"):
                delta = np.where(denom > 0, (m / c1) / np.where(denom > 0, denom, 1.0), 0.0)
            p.data -= self.lr * delta

    def state_dict(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}
