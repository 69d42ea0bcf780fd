"""Define-by-run reverse-mode differentiation over NumPy arrays.

A ``Graph`` is an ordered tape of executed ops.  Ops (see
:mod:`hgvoc.numcore.ops`) compute forward results eagerly and, when any
input needs a gradient, push a backward closure onto the tape.
``Graph.backward`` seeds the loss gradient with one and replays the tape
in exact reverse execution order, accumulating into ``Tensor.grad``.

Everything runs in the dtype of its inputs: float32 in normal operation,
float64 when a verification pass wants a higher-precision shadow of the
same computation.
"""

from contextlib import contextmanager

import numpy as np


class GraphError(RuntimeError):
    """Misuse of the op tape: non-scalar loss or repeated backward."""


class Tensor:
    """Named numeric array with an optional same-shape gradient buffer.

    Trainable tensors are the unit of learned state: their ``grad`` is
    allocated (zeroed) up front and they are what optimizers and
    checkpoints traffic in.  Activations and constants get a grad buffer
    lazily, only if the backward pass reaches them.
    """

    __slots__ = ("name", "data", "grad", "trainable", "needs_grad")

    def __init__(self, data, name="", trainable=False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.name = name
        self.trainable = trainable
        self.needs_grad = trainable
        self.grad = np.zeros_like(arr) if trainable else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad[...] = 0

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        flag = " trainable" if self.trainable else ""
        return f"Tensor({self.name or '?'} {tuple(self.shape)}{flag})"


def param(name, data):
    """A trainable tensor (float32, zero-initialized gradient)."""
    return Tensor(np.asarray(data, dtype=np.float32), name=name, trainable=True)


def const(data, name=""):
    return Tensor(data, name=name)


class Graph:
    """Ordered record of executed ops, replayed in reverse by backward."""

    def __init__(self):
        self._tape = []
        self._spent = False

    def record(self, fn):
        self._tape.append(fn)

    def backward(self, loss):
        if self._spent:
            raise GraphError("backward already ran on this graph; reset() first")
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            raise GraphError("backward needs a scalar loss tensor")
        self._spent = True
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._tape):
            fn()

    def reset(self):
        self._tape.clear()
        self._spent = False

    def __len__(self):
        return len(self._tape)


def backward(graph, loss):
    """Accumulate d(loss)/d(tensor) into every reachable tensor's grad."""
    graph.backward(loss)


@contextmanager
def frozen(tensors):
    """Temporarily stop gradients flowing into the given tensors."""
    saved = [(t, t.needs_grad) for t in tensors]
    for t in tensors:
        t.needs_grad = False
    try:
        yield
    finally:
        for t, flag in saved:
            t.needs_grad = flag
