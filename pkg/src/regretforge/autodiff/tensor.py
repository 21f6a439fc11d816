"""Tape-based reverse-mode differentiation over dense numpy arrays.

A :class:`Tensor` records the operation that produced it (its parents and a
closure mapping the output gradient to parent gradients).  Plain numpy arrays
act as constants: an operation whose inputs are all constants returns a plain
array and records nothing, so the same numerical code runs both on and off
the tape.
"""

from __future__ import annotations

import itertools

import numpy as np

_ids = itertools.count()


class ContractError(ValueError):
    """Raised when an operation receives inputs violating its contract."""


class Tensor:
    """A node on the tape."""

    __slots__ = ("value", "grad", "parents", "backward_fn", "name", "uid")

    # numpy must defer to our reflected operators (ndarray + Tensor).
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward_fn=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name
        self.uid = next(_ids)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def is_leaf(self):
        return not self.parents

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.value.shape})"

    # arithmetic sugar; the implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops
        return ops.matmul(other, self)

    def __getitem__(self, key):
        from . import ops
        return ops.getitem(self, key)


def value_of(x):
    """Return the raw array behind a Tensor or array-like."""
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=np.float64)


def is_tracked(*xs):
    return any(isinstance(x, Tensor) for x in xs)


def _topological_order(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.uid in seen:
            continue
        seen.add(node.uid)
        stack.append((node, True))
        for parent in node.parents:
            if isinstance(parent, Tensor) and parent.uid not in seen:
                stack.append((parent, False))
    return order


def backward(loss, free_graph=True):
    """Back-propagate from a scalar ``loss``.

    Returns a dict mapping each leaf Tensor reachable from ``loss`` to its
    gradient (also stored on ``leaf.grad``).  Repeated uses of a node sum
    their contributions.  With ``free_graph`` the interior nodes drop their
    parents and closures afterwards so the tape can be garbage collected.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward() needs a Tensor produced on the tape")
    if loss.value.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.value.shape}")

    order = _topological_order(loss)
    grads = {loss.uid: np.ones_like(loss.value)}
    leaves = {}
    for node in reversed(order):
        g = grads.pop(node.uid, None)
        if node.is_leaf:
            if g is None:
                g = np.zeros_like(node.value)
            node.grad = g
            leaves[node] = g
            continue
        if g is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not isinstance(parent, Tensor):
                continue
            if pg.shape != parent.value.shape:
                raise ContractError(
                    f"gradient shape {pg.shape} != value shape {parent.value.shape}"
                )
            if parent.uid in grads:
                grads[parent.uid] = grads[parent.uid] + pg
            else:
                grads[parent.uid] = pg
    if free_graph:
        for node in order:
            if not node.is_leaf:
                node.parents = ()
                node.backward_fn = None
    return leaves
