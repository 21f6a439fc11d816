"""Differentiable primitives.

Every function accepts Tensors or array-likes.  When no argument is a Tensor
the plain numpy result is returned and nothing is recorded.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .tensor import ContractError, Tensor, is_tracked, value_of

# Floor used by safe_log; values below it are clamped and counted.
LOG_FLOOR = 1e-12


class Diagnostics:
    """Process-wide counters for numerically guarded evaluations."""

    floored_logs = 0

    @classmethod
    def reset(cls):
        cls.floored_logs = 0

    @classmethod
    def snapshot(cls):
        return {"floored_logs": cls.floored_logs}


class DomainError(ValueError):
    pass


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverses numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}") from exc


def _node(value, parents, fn):
    return Tensor(value, parents, fn)


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    av, bv = value_of(a), value_of(b)
    _check_broadcast(av, bv)
    out = av + bv
    if not is_tracked(a, b):
        return out
    return _node(out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    _check_broadcast(av, bv)
    out = av - bv
    if not is_tracked(a, b):
        return out
    return _node(out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def neg(a):
    av = value_of(a)
    if not is_tracked(a):
        return -av
    return _node(-av, (a,), lambda g: (-g,))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    _check_broadcast(av, bv)
    out = av * bv
    if not is_tracked(a, b):
        return out

    def back(g):
        ga = _unbroadcast(g * bv, av.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(g * av, bv.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _node(out, (a, b), back)


def div(a, b):
    av, bv = value_of(a), value_of(b)
    _check_broadcast(av, bv)
    out = av / bv
    if not is_tracked(a, b):
        return out

    def back(g):
        ga = _unbroadcast(g / bv, av.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(-g * out / bv, bv.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _node(out, (a, b), back)


def matmul(a, b):
    """Matrix product of ``(..., n, k) @ (k, m)``."""
    av, bv = value_of(a), value_of(b)
    if av.shape[-1] != bv.shape[0] or bv.ndim != 2:
        raise ContractError(f"matmul shapes {av.shape} @ {bv.shape}")
    out = av @ bv
    if not is_tracked(a, b):
        return out

    def back(g):
        ga = g @ bv.T if isinstance(a, Tensor) else None
        gb = None
        if isinstance(b, Tensor):
            gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _node(out, (a, b), back)


# ---------------------------------------------------------------- reductions

def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    av = value_of(a)
    out = np.sum(av, axis=axis, keepdims=keepdims)
    if not is_tracked(a):
        return out

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _node(out, (a,), back)


def mean(a, axis=None, keepdims=False):
    av = value_of(a)
    count = av.size if axis is None else np.prod([av.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------- shaping

def reshape(a, shape):
    av = value_of(a)
    out = av.reshape(shape)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (g.reshape(av.shape),))


def broadcast(a, shape):
    av = value_of(a)
    out = np.broadcast_to(av, shape).copy()
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (_unbroadcast(g, av.shape),))


def getitem(a, key):
    av = value_of(a)
    out = av[key]
    if not is_tracked(a):
        return out

    def back(g):
        full = np.zeros_like(av)
        np.add.at(full, key, g)
        return (full,)

    return _node(out, (a,), back)


def concat(items, axis=-1):
    values = [value_of(x) for x in items]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as exc:
        raise ContractError(str(exc)) from exc
    if not is_tracked(*items):
        return out
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, tuple(items), back)


def where(cond, a, b):
    """Select ``a`` where the constant mask ``cond`` holds, else ``b``."""
    cond = np.asarray(cond, dtype=bool)
    av, bv = value_of(a), value_of(b)
    out = np.where(cond, av, bv)
    if not is_tracked(a, b):
        return out

    def back(g):
        ga = _unbroadcast(np.where(cond, g, 0.0), av.shape) if isinstance(a, Tensor) else None
        gb = _unbroadcast(np.where(cond, 0.0, g), bv.shape) if isinstance(b, Tensor) else None
        return ga, gb

    return _node(out, (a, b), back)


# ---------------------------------------------------------------- indexing

class IndexMap:
    """A fixed integer index along the last axis with a cached scatter matrix.

    ``idx[m]`` names the source bin for output slot ``m``; ``size`` is the
    number of bins.  Gathering reads ``x[..., idx]``; the adjoint (and
    :func:`segment_sum`) adds slot ``m`` into bin ``idx[m]``.
    """

    __slots__ = ("idx", "size", "_scatter")

    def __init__(self, idx, size):
        self.idx = np.asarray(idx, dtype=np.int64)
        self.size = int(size)
        if self.idx.ndim != 1:
            raise ContractError("IndexMap wants a 1-d index")
        if self.idx.size and (self.idx.min() < 0 or self.idx.max() >= self.size):
            raise ContractError("index out of range")
        self._scatter = None

    @property
    def scatter_matrix(self):
        if self._scatter is None:
            m = self.idx.size
            self._scatter = sp.csr_matrix(
                (np.ones(m), (self.idx, np.arange(m))), shape=(self.size, m)
            )
        return self._scatter

    def scatter(self, x):
        lead = x.shape[:-1]
        flat = x.reshape(-1, x.shape[-1])
        out = (self.scatter_matrix @ flat.T).T
        return np.ascontiguousarray(out).reshape(lead + (self.size,))

    def take(self, x):
        return x[..., self.idx]


def _as_index(index, size=None):
    if isinstance(index, IndexMap):
        return index
    idx = np.asarray(index, dtype=np.int64)
    return IndexMap(idx, size if size is not None else (idx.max() + 1 if idx.size else 0))


def gather(a, index):
    """``a[..., idx]`` along the last axis."""
    av = value_of(a)
    index = _as_index(index, av.shape[-1])
    if index.size != av.shape[-1]:
        raise ContractError(f"gather index built for {index.size} bins, input has {av.shape[-1]}")
    out = index.take(av)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (index.scatter(g),))


def segment_sum(a, index, size=None):
    """Sum slots of the last axis into ``size`` bins given by ``index``."""
    av = value_of(a)
    index = _as_index(index, size)
    if index.idx.size != av.shape[-1]:
        raise ContractError(f"segment index length {index.idx.size} != {av.shape[-1]}")
    out = index.scatter(av)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (index.take(g),))


# ---------------------------------------------------------------- elementwise

def positive_part(a):
    """``max(x, 0)``; the subgradient at exactly zero is 0."""
    av = value_of(a)
    out = np.maximum(av, 0.0)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (np.where(av > 0.0, g, 0.0),))


def tanh(a):
    av = value_of(a)
    out = np.tanh(av)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    av = value_of(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * av))
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a):
    av = value_of(a)
    out = np.exp(av)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (g * out,))


def safe_log(a, floor=LOG_FLOOR):
    """Natural log with inputs in ``[0, floor)`` clamped to ``floor``.

    Negative inputs are a domain error.  Clamped entries bump
    ``Diagnostics.floored_logs`` and receive zero gradient.
    """
    av = value_of(a)
    if np.any(av < 0.0):
        raise DomainError(f"safe_log of negative value {av.min()!r}")
    low = av < floor
    if low.any():
        Diagnostics.floored_logs += int(low.sum())
    clamped = np.where(low, floor, av)
    out = np.log(clamped)
    if not is_tracked(a):
        return out
    return _node(out, (a,), lambda g: (np.where(low, 0.0, g / clamped),))


def normalize_simplex(a, mask=None):
    """Normalize the last axis to sum 1; all-zero rows map to uniform over ``mask``.

    No gradient flows through the uniform fallback.
    """
    av = value_of(a)
    total = av.sum(axis=-1, keepdims=True)
    positive = total > 0.0
    if mask is None:
        mask = np.ones(av.shape[-1])
    mask = np.asarray(mask, dtype=np.float64)
    uniform = np.broadcast_to(mask / mask.sum(axis=-1, keepdims=True), av.shape)
    safe_total = np.where(positive, total, 1.0)
    out = np.where(positive, av / safe_total, uniform)
    if not is_tracked(a):
        return out

    def back(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (np.where(positive, (g - inner) / safe_total, 0.0),)

    return _node(out, (a,), back)


def softmax(a, mask=None):
    """Softmax over the last axis restricted to ``mask``."""
    av = value_of(a)
    if mask is None:
        mask = np.ones(av.shape[-1])
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), av.shape)
    shifted = np.where(mask, av, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    out = e / e.sum(axis=-1, keepdims=True)
    if not is_tracked(a):
        return out

    def back(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _node(out, (a,), back)


def kl_divergence(p, q):
    """``sum(p * (log p - log q))`` over the last axis with guarded logs."""
    return sum(mul(p, sub(safe_log(p), safe_log(q))), axis=-1)
