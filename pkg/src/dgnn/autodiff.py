"""Dense reverse-mode differentiation over 2-D float64 matrices.

Every operation returns a new :class:`DiffMatrix`. A result keeps references
to its parents and a closure mapping the upstream gradient to parent
gradients only when at least one input requires a gradient, so evaluation
with constant parameters builds no graph. Node ids come from a global
counter; parents are always created before children, so sorting reachable
nodes by id gives a valid reverse topological order.
"""

import itertools
import threading
from contextlib import contextmanager

import numpy as np
from scipy.special import expit

_ids = itertools.count()
_local = threading.local()


def _as_2d(value):
    v = np.array(value, dtype=np.float64)
    if v.ndim == 0:
        return v.reshape(1, 1)
    if v.ndim == 1:
        return v.reshape(1, -1)
    if v.ndim != 2:
        raise ValueError(f"DiffMatrix holds 2-D values, got ndim={v.ndim}")
    return v


class OpCount:
    """Multiply-accumulate tally of matrix products inside :func:`count_ops`."""

    def __init__(self):
        self.macs = 0
        self.matmuls = 0


@contextmanager
def count_ops():
    stack = getattr(_local, "counters", None)
    if stack is None:
        stack = _local.counters = []
    counter = OpCount()
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.remove(counter)


@contextmanager
def no_grad():
    """Evaluate without recording parents, as if every input were constant."""
    prev = getattr(_local, "no_grad", False)
    _local.no_grad = True
    try:
        yield
    finally:
        _local.no_grad = prev


def _tally(m, k, n):
    for c in getattr(_local, "counters", ()):
        c.macs += m * k * n
        c.matmuls += 1


class DiffMatrix:
    __array_priority__ = 1000

    def __init__(self, value, requires_grad=False, name=None):
        self.value = _as_2d(value)
        self.requires_grad = bool(requires_grad)
        self.id = next(_ids)
        self.name = name
        self._parents = ()
        self._backward = None

    @classmethod
    def _result(cls, value, parents, backward):
        out = cls.__new__(cls)
        out.value = value
        out.id = next(_ids)
        out.name = None
        out.requires_grad = not getattr(_local, "no_grad", False) and any(
            p.requires_grad for p in parents
        )
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return not self._parents

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"DiffMatrix{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__


def const(value):
    """Wrap ``value`` as a constant; DiffMatrix inputs pass through."""
    if isinstance(value, DiffMatrix):
        return value
    return DiffMatrix(value)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    if shape == (1, 1):
        return np.array([[grad.sum()]])
    if shape[0] == 1:
        return grad.sum(axis=0, keepdims=True)
    if shape[1] == 1:
        return grad.sum(axis=1, keepdims=True)
    raise ValueError(f"cannot reduce gradient {grad.shape} to {shape}")


def _check_broadcast(a, b, op):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    ok = (sb[0] in (1, sa[0]) and sb[1] in (1, sa[1])) or (
        sa[0] in (1, sb[0]) and sa[1] in (1, sb[1])
    )
    if not ok:
        raise ValueError(f"{op}: shape mismatch {sa} vs {sb}")


def matmul(a, b):
    a, b = const(a), const(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    _tally(a.shape[0], a.shape[1], b.shape[1])
    av, bv = a.value, b.value

    def backward(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = av.T @ g if b.requires_grad else None
        return ga, gb

    return DiffMatrix._result(av @ bv, (a, b), backward)


def transpose(a):
    a = const(a)
    return DiffMatrix._result(a.value.T.copy(), (a,), lambda g: (g.T,))


def add(a, b):
    if np.isscalar(b):
        a = const(a)
        return DiffMatrix._result(a.value + b, (a,), lambda g: (g,))
    if np.isscalar(a):
        return add(b, a)
    a, b = const(a), const(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return DiffMatrix._result(
        a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb))
    )


def sub(a, b):
    if np.isscalar(b):
        return add(a, -b)
    if np.isscalar(a):
        return add(scale(b, -1.0), a)
    a, b = const(a), const(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return DiffMatrix._result(
        a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb))
    )


def scale(a, s):
    a = const(a)
    s = float(s)
    return DiffMatrix._result(a.value * s, (a,), lambda g: (g * s,))


def mul(a, b):
    """Elementwise product of equally shaped matrices."""
    a, b = const(a), const(b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return DiffMatrix._result(av * bv, (a, b), lambda g: (g * bv, g * av))


def copy(a):
    a = const(a)
    return DiffMatrix._result(a.value.copy(), (a,), lambda g: (g,))


def hstack(blocks):
    blocks = [const(b) for b in blocks]
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ValueError(f"hstack: row counts differ {sorted(rows)}")
    edges = np.cumsum([0] + [b.shape[1] for b in blocks])

    def backward(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(edges[:-1], edges[1:]))

    return DiffMatrix._result(
        np.hstack([b.value for b in blocks]), tuple(blocks), backward
    )


def total(a):
    """Sum of all entries as a 1x1 matrix."""
    a = const(a)
    shape = a.shape
    return DiffMatrix._result(
        np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),)
    )


def frobenius_sq(a):
    a = const(a)
    av = a.value
    return DiffMatrix._result(
        np.array([[np.sum(av * av)]]), (a,), lambda g: (2.0 * g[0, 0] * av,)
    )


def sigmoid(a):
    a = const(a)
    s = expit(a.value)
    return DiffMatrix._result(s, (a,), lambda g: (g * s * (1.0 - s),))


def softmax_rows(a):
    a = const(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (s * (g - np.sum(g * s, axis=1, keepdims=True)),)

    return DiffMatrix._result(s, (a,), backward)


def cross_entropy(logits, labels, mask):
    """Mean negative log-likelihood of ``labels`` over the rows in ``mask``.

    Takes unnormalized scores; the softmax is folded in through a row-max
    shifted log-sum-exp so large logits cannot overflow.
    """
    logits = const(logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross_entropy: empty mask")
    c = logits.shape[1]
    y = labels[mask]
    if y.min() < 0 or y.max() >= c:
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    z = logits.value[mask]
    z = z - z.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logz
    loss = -logp[np.arange(len(mask)), y].mean()
    shape = logits.shape

    def backward(g):
        p = np.exp(logp)
        p[np.arange(len(mask)), y] -= 1.0
        full = np.zeros(shape)
        np.add.at(full, mask, p * (g[0, 0] / len(mask)))
        return (full,)

    return DiffMatrix._result(np.array([[loss]]), (logits,), backward)


def dropout(a, rate, rng, training=True):
    """Inverted dropout; the identity when ``rate == 0`` or not training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    a = const(a)
    if not training or rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return DiffMatrix._result(a.value * keep, (a,), lambda g: (g * keep,))


class GradientStore:
    """Gradients of one backward pass, keyed by node id.

    Looking up a node that the loss does not depend on returns zeros of the
    node's shape.
    """

    def __init__(self):
        self._grads = {}

    def __contains__(self, node):
        return node.id in self._grads

    def __getitem__(self, node):
        g = self._grads.get(node.id)
        return np.zeros(node.shape) if g is None else g

    def __len__(self):
        return len(self._grads)

    def _accumulate(self, node_id, g):
        if node_id in self._grads:
            self._grads[node_id] = self._grads[node_id] + g
        else:
            self._grads[node_id] = g


def backward(loss, retain_graph=False):
    """Reverse pass from a 1x1 ``loss``; returns leaf gradients.

    Unless ``retain_graph`` is set the recorded graph is released as it is
    consumed, so the same loss cannot be differentiated twice.
    """
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar (1x1) loss, got {loss.shape}")
    store = GradientStore()
    if not loss.requires_grad:
        return store

    nodes = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node.id in nodes or not node.requires_grad:
            continue
        nodes[node.id] = node
        stack.extend(node._parents)

    pending = {loss.id: np.ones((1, 1))}
    for nid in sorted(nodes, reverse=True):
        node = nodes[nid]
        g = pending.pop(nid, None)
        if g is None:
            continue
        if node.is_leaf:
            store._accumulate(nid, g)
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.shape:
                raise AssertionError(f"gradient shape {pg.shape} != value shape {parent.shape}")
            if parent.id in pending:
                pending[parent.id] = pending[parent.id] + pg
            else:
                pending[parent.id] = pg
        if not retain_graph:
            node._parents = ()
            node._backward = None
    return store
