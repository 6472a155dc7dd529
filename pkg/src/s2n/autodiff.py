"""Minimal reverse-mode differentiation over dense float64 arrays.

Just enough operator coverage for set encoders, message-passing layers,
and classification losses. Every op records vector-Jacobian closures on a
tape; :func:`backward` replays them in reverse topological order. All
arithmetic stays in float64 with a fixed reduction order, so gradients are
reproducible bit for bit on a fixed platform.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatchError


class Var:
    """A node in the computation graph: a float64 array plus tape links."""

    __slots__ = ("value", "requires_grad", "_links")

    def __init__(self, value, requires_grad: bool = False, links=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad or any(v.requires_grad for v, _ in links)
        self._links = tuple((v, fn) for v, fn in links if v.requires_grad)

    @property
    def shape(self):
        return self.value.shape


def param(value) -> Var:
    return Var(value, requires_grad=True)


def constant(value) -> Var:
    return Var(value)


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def matmul(a: Var, b: Var) -> Var:
    a, b = _as_var(a), _as_var(b)
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatchError(
            f"matmul {a.value.shape} @ {b.value.shape}"
        )
    return Var(
        a.value @ b.value,
        links=(
            (a, lambda g, b=b: g @ b.value.T),
            (b, lambda g, a=a: a.value.T @ g),
        ),
    )


def add(a: Var, b: Var) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.value + b.value,
        links=(
            (a, lambda g, s=a.value.shape: _unbroadcast(g, s)),
            (b, lambda g, s=b.value.shape: _unbroadcast(g, s)),
        ),
    )


def mul(a: Var, b: Var) -> Var:
    a, b = _as_var(a), _as_var(b)
    return Var(
        a.value * b.value,
        links=(
            (a, lambda g, a=a, b=b: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g, a=a, b=b: _unbroadcast(g * a.value, b.value.shape)),
        ),
    )


def scale(a: Var, c: float) -> Var:
    a = _as_var(a)
    return Var(a.value * c, links=((a, lambda g: g * c),))


def relu(a: Var) -> Var:
    a = _as_var(a)
    mask = a.value > 0.0
    return Var(np.where(mask, a.value, 0.0), links=((a, lambda g: g * mask),))


def transpose(a: Var) -> Var:
    a = _as_var(a)
    return Var(a.value.T, links=((a, lambda g: g.T),))


def take_rows(a: Var, rows: np.ndarray) -> Var:
    a = _as_var(a)

    def vjp(g):
        ga = np.zeros_like(a.value)
        np.add.at(ga, rows, g)
        return ga

    return Var(a.value[rows], links=((a, vjp),))


def concat_cols(a: Var, b: Var) -> Var:
    a, b = _as_var(a), _as_var(b)
    na = a.value.shape[1]
    return Var(
        np.concatenate([a.value, b.value], axis=1),
        links=(
            (a, lambda g: g[:, :na]),
            (b, lambda g: g[:, na:]),
        ),
    )


def _check_offsets(offsets: np.ndarray, total_rows: int, op: str):
    if len(offsets) < 2 or offsets[0] != 0 or offsets[-1] != total_rows:
        raise ShapeMismatchError(f"{op}: offsets must span 0..{total_rows}")
    if np.any(np.diff(offsets) <= 0):
        raise ShapeMismatchError(f"{op}: needs nonempty segments")


def segment_sum(x: Var, offsets: np.ndarray) -> Var:
    """Sum contiguous row segments: output row s is x[offsets[s]:offsets[s+1]].sum."""
    x = _as_var(x)
    _check_offsets(offsets, x.value.shape[0], "segment_sum")
    lengths = np.diff(offsets)
    out = np.add.reduceat(x.value, offsets[:-1], axis=0)
    return Var(out, links=((x, lambda g: np.repeat(g, lengths, axis=0)),))


def segment_max(x: Var, offsets: np.ndarray) -> Var:
    """Columnwise max over contiguous row segments.

    Ties credit the earliest row in the segment, so the subgradient is
    deterministic.
    """
    x = _as_var(x)
    _check_offsets(offsets, x.value.shape[0], "segment_max")
    n_seg = len(offsets) - 1
    cols = x.value.shape[1]
    out = np.empty((n_seg, cols))
    argmax = np.empty((n_seg, cols), dtype=np.int64)
    for s in range(n_seg):
        lo, hi = offsets[s], offsets[s + 1]
        block = x.value[lo:hi]
        idx = block.argmax(axis=0)
        argmax[s] = lo + idx
        out[s] = block[idx, np.arange(cols)]

    def vjp(g):
        gx = np.zeros_like(x.value)
        col_idx = np.broadcast_to(np.arange(cols), argmax.shape)
        np.add.at(gx, (argmax.ravel(), col_idx.ravel()), g.ravel())
        return gx

    return Var(out, links=((x, vjp),))


def masked_rows_matmul(neighbor_rows: list, w: Var, back_rows: list) -> Var:
    """Per-output-row sums of selected ``w`` rows.

    Output row i is ``w[neighbor_rows[i]].sum(axis=0)``; ``back_rows[j]``
    must list the output rows that row j of ``w`` feeds, which the backward
    pass uses to route gradients.
    """
    w = _as_var(w)
    out = np.zeros((len(neighbor_rows), w.value.shape[1]))
    for i, rows in enumerate(neighbor_rows):
        if len(rows):
            out[i] = w.value[rows].sum(axis=0)

    def vjp(g):
        gw = np.zeros_like(w.value)
        for j, rows in enumerate(back_rows):
            if len(rows):
                gw[j] = g[rows].sum(axis=0)
        return gw

    return Var(out, links=((w, vjp),))


def sum_squares(a: Var) -> Var:
    a = _as_var(a)
    return Var(np.sum(a.value * a.value), links=((a, lambda g: 2.0 * g * a.value),))


def softmax_cross_entropy(logits: Var, targets: np.ndarray) -> Var:
    """Mean cross-entropy of row-softmax probabilities against class ids."""
    logits = _as_var(logits)
    z = logits.value
    n = z.shape[0]
    if targets.shape != (n,):
        raise ShapeMismatchError(f"{targets.shape} targets for {n} logit rows")
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    value = np.mean(lse - z[np.arange(n), targets])

    def vjp(g):
        p = np.exp(z - zmax)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), targets] -= 1.0
        return g * p / n

    return Var(value, links=((logits, vjp),))


def sigmoid_bce(logits: Var, targets: np.ndarray) -> Var:
    """Mean elementwise binary cross-entropy on logits against 0/1 targets."""
    logits = _as_var(logits)
    z = logits.value
    if targets.shape != z.shape:
        raise ShapeMismatchError(f"{targets.shape} targets for {z.shape} logits")
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    value = np.mean(softplus - z * targets)

    def vjp(g):
        sig = 1.0 / (1.0 + np.exp(-z))
        return g * (sig - targets) / z.size

    return Var(value, links=((logits, vjp),))


def backward(root: Var, params: list[Var]) -> list[np.ndarray]:
    """Gradients of a scalar ``root`` with respect to each of ``params``."""
    if root.value.shape != ():
        raise ShapeMismatchError("backward needs a scalar root")

    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._links:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(root): np.asarray(1.0)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, vjp in node._links:
            contribution = vjp(g)
            acc = grads.get(id(parent))
            grads[id(parent)] = contribution if acc is None else acc + contribution

    return [grads.get(id(p), np.zeros_like(p.value)) for p in params]
