"""Minimal reverse-mode tape with hand-written vector-Jacobian products.

Each primitive below computes its value with plain numpy.  When any argument
is a :class:`Var`, the primitive also records a node on that variable's
:class:`Tape` together with a closure that maps the output cotangent to the
input cotangents.  With plain arrays the primitives are ordinary functions,
so model code runs unchanged with or without gradient tracking.

Gradient convention: a real loss ``L`` and a complex input ``z = x + iy``
give the cotangent ``dL/dx + i dL/dy`` (twice the conjugate Wirtinger
derivative).  Under this convention the cotangent of ``y = a * z`` with
respect to ``z`` is ``conj(a) * g``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .numeric import ShapeError

PRIMITIVES: set[str] = set()


class TapeError(RuntimeError):
    """Raised for malformed graphs: foreign nodes, unknown ops, bad loss."""


class Var:
    """A value recorded on a tape."""

    __slots__ = ("value", "tape", "index", "name")
    __array_ufunc__ = None  # make ndarray <op> Var dispatch to Var.__rop__

    def __init__(self, value: np.ndarray, tape: "Tape", index: int, name: str | None = None):
        self.value = value
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Var(index={self.index}, shape={self.shape}, dtype={self.dtype})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)


class _Node:
    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op, parents, vjp):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value, name: str | None = None) -> Var:
        value = np.array(value, dtype=np.result_type(value, np.float64), copy=True)
        return self._push("leaf", value, (), None, name)

    def _push(self, op, value, parents, vjp, name=None) -> Var:
        idx = len(self.nodes)
        for p in parents:
            if isinstance(p, Var) and (p.tape is not self or p.index >= idx):
                raise TapeError(f"op {op!r} consumes a node that does not precede it on this tape")
        self.nodes.append(_Node(op, parents, vjp))
        self.values.append(value)
        return Var(value, self, idx, name)

    def record(self, op: str, value: np.ndarray, parents: Sequence, vjp: Callable) -> Var:
        if op not in PRIMITIVES:
            raise TapeError(f"unregistered operation {op!r}")
        return self._push(op, value, tuple(parents), vjp)

    def backward(self, loss: Var) -> dict[int, np.ndarray]:
        """Cotangents of ``loss`` with respect to every leaf, keyed by node index."""
        if not isinstance(loss, Var) or loss.tape is not self:
            raise TapeError("loss must be a node of this tape")
        if loss.value.size != 1 or np.iscomplexobj(loss.value):
            raise TapeError(f"loss must be a real scalar, got {loss.value.dtype} {loss.value.shape}")
        grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        leaves: dict[int, np.ndarray] = {}
        for idx in range(loss.index, -1, -1):
            g = grads.pop(idx, None)
            if g is None:
                continue
            node = self.nodes[idx]
            if node.vjp is None:
                leaves[idx] = g
                continue
            in_grads = node.vjp(g)
            for parent, pg in zip(node.parents, in_grads):
                if not isinstance(parent, Var) or pg is None:
                    continue
                if parent.index in grads:
                    grads[parent.index] = grads[parent.index] + pg
                else:
                    grads[parent.index] = pg
        return leaves


def backward(tape: Tape, loss: Var) -> dict[int, np.ndarray]:
    return tape.backward(loss)


# ---------------------------------------------------------------------------
# helpers


def value(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(args) -> Tape | None:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _record(op, out, parents, vjp):
    tape = _tape_of(parents)
    if tape is None:
        return out
    return tape.record(op, out, parents, vjp)


def primitive(name: str):
    PRIMITIVES.add(name)
    return name


def unbroadcast(g: np.ndarray, like) -> np.ndarray:
    """Reduce a broadcast cotangent back to the shape (and realness) of ``like``."""
    like = np.asarray(like)
    g = np.asarray(g)
    while g.ndim > like.ndim:
        g = g.sum(axis=0)
    for ax, n in enumerate(like.shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    if not np.iscomplexobj(like) and np.iscomplexobj(g):
        g = g.real
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

_ADD = primitive("add")
_SUB = primitive("sub")
_MUL = primitive("mul")
_DIV = primitive("div")
_NEG = primitive("neg")


def add(a, b):
    av, bv = value(a), value(b)
    return _record(_ADD, av + bv, (a, b), lambda g: (unbroadcast(g, av), unbroadcast(g, bv)))


def sub(a, b):
    av, bv = value(a), value(b)
    return _record(_SUB, av - bv, (a, b), lambda g: (unbroadcast(g, av), unbroadcast(-g, bv)))


def mul(a, b):
    av, bv = value(a), value(b)

    def vjp(g):
        return unbroadcast(g * np.conj(bv), av), unbroadcast(g * np.conj(av), bv)

    return _record(_MUL, av * bv, (a, b), vjp)


def div(a, b):
    av, bv = value(a), value(b)
    out = av / bv

    def vjp(g):
        ga = g / np.conj(bv)
        return unbroadcast(ga, av), unbroadcast(-ga * np.conj(out), bv)

    return _record(_DIV, out, (a, b), vjp)


def neg(a):
    return _record(_NEG, -value(a), (a,), lambda g: (-g,))


# ---------------------------------------------------------------------------
# complex/real conversions

_REAL = primitive("real")
_IMAG = primitive("imag")
_TO_COMPLEX = primitive("to_complex")
_CONJ = primitive("conj")
_EXP_I = primitive("exp_i")
_ABS2 = primitive("abs2")


def real(z):
    zv = value(z)
    return _record(_REAL, np.real(zv).copy(), (z,), lambda g: (unbroadcast(g + 0j, zv),))


def imag(z):
    zv = value(z)
    return _record(_IMAG, np.imag(zv).copy(), (z,), lambda g: (unbroadcast(1j * g, zv),))


def to_complex(x):
    xv = value(x)
    return _record(_TO_COMPLEX, np.asarray(xv, dtype=np.complex128), (x,),
                   lambda g: (unbroadcast(g, xv),))


def conj(z):
    zv = value(z)
    return _record(_CONJ, np.conj(zv), (z,), lambda g: (np.conj(g),))


def exp_i(x, scale: float = 1.0):
    """``exp(i * scale * x)`` for real ``x``."""
    xv = value(x)
    out = np.exp(1j * scale * xv)

    def vjp(g):
        # dL/dx = Re(conj(i*scale*out) * g)
        return (np.real(np.conj(1j * scale * out) * g),)

    return _record(_EXP_I, out, (x,), vjp)


def abs2(z):
    """Squared modulus; real output."""
    zv = value(z)
    return _record(_ABS2, (zv * np.conj(zv)).real, (z,), lambda g: (unbroadcast(2.0 * g * zv, zv),))


# ---------------------------------------------------------------------------
# real nonlinearities (holomorphic extensions are not needed)

_SIN = primitive("sin")
_COS = primitive("cos")
_TANH = primitive("tanh")
_SIGMOID = primitive("sigmoid")
_SOFTPLUS = primitive("softplus")
_SQRT = primitive("sqrt")
_MAXIMUM = primitive("maximum")


def sin(x):
    xv = value(x)
    return _record(_SIN, np.sin(xv), (x,), lambda g: (g * np.cos(xv),))


def cos(x):
    xv = value(x)
    return _record(_COS, np.cos(xv), (x,), lambda g: (-g * np.sin(xv),))


def tanh(x):
    xv = value(x)
    out = np.tanh(xv)
    return _record(_TANH, out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x):
    xv = value(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * xv))
    return _record(_SIGMOID, out, (x,), lambda g: (g * out * (1.0 - out),))


def softplus(x):
    xv = value(x)
    out = np.logaddexp(0.0, xv)
    return _record(_SOFTPLUS, out, (x,), lambda g: (g * 0.5 * (1.0 + np.tanh(0.5 * xv)),))


def sqrt(x):
    xv = value(x)
    out = np.sqrt(xv)
    return _record(_SQRT, out, (x,), lambda g: (g * 0.5 / out,))


def maximum(x, floor: float):
    """Elementwise ``max(x, floor)`` against a constant floor."""
    xv = value(x)
    keep = xv >= floor
    return _record(_MAXIMUM, np.where(keep, xv, floor), (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# linear algebra, reductions, shape plumbing

_MATMUL = primitive("matmul")
_SUM = primitive("sum")
_RESHAPE = primitive("reshape")
_TRANSPOSE = primitive("transpose")
_GETITEM = primitive("getitem")
_FLIP = primitive("flip")
_CONCAT = primitive("concat")
_BROADCAST = primitive("broadcast_to")


def matmul(a, b):
    av, bv = value(a), value(b)
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"cannot multiply shapes {av.shape} and {bv.shape}")

    def vjp(g):
        ga = g @ np.conj(np.swapaxes(bv, -1, -2))
        gb = np.conj(np.swapaxes(av, -1, -2)) @ g
        return unbroadcast(ga, av), unbroadcast(gb, bv)

    return _record(_MATMUL, av @ bv, (a, b), vjp)


def sum(x, axis=None, keepdims: bool = False):  # noqa: A001 - mirrors numpy
    xv = value(x)
    out = np.sum(xv, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, xv.shape).copy(),)

    return _record(_SUM, out, (x,), vjp)


def mean(x, axis=None, keepdims: bool = False):
    xv = value(x)
    count = xv.size if axis is None else np.prod([xv.shape[a] for a in np.atleast_1d(axis)])
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(x, shape):
    xv = value(x)
    return _record(_RESHAPE, xv.reshape(shape), (x,), lambda g: (g.reshape(xv.shape),))


def transpose(x, axes):
    xv = value(x)
    inv = np.argsort(axes)
    return _record(_TRANSPOSE, np.transpose(xv, axes), (x,), lambda g: (np.transpose(g, inv),))


def getitem(x, idx):
    xv = value(x)

    def vjp(g):
        out = np.zeros(xv.shape, dtype=np.result_type(xv, g))
        np.add.at(out, idx, g)
        return (out,)

    return _record(_GETITEM, xv[idx], (x,), vjp)


def flip(x, axis: int):
    return _record(_FLIP, np.flip(value(x), axis), (x,), lambda g: (np.flip(g, axis),))


def concat(xs, axis: int):
    vals = [value(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    splits = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def vjp(g):
        return tuple(unbroadcast(p, v) for p, v in zip(np.split(g, splits, axis=axis), vals))

    return _record(_CONCAT, out, tuple(xs), vjp)


def broadcast_to(x, shape):
    xv = value(x)
    return _record(_BROADCAST, np.broadcast_to(xv, shape).copy(), (x,),
                   lambda g: (unbroadcast(g, xv),))


# ---------------------------------------------------------------------------
# losses and normalisers

_LOG_SOFTMAX = primitive("log_softmax")
_SOFTMAX = primitive("softmax")
_CROSS_ENTROPY = primitive("cross_entropy")


def softmax(x, axis: int = -1):
    xv = value(x)
    e = np.exp(xv - xv.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _record(_SOFTMAX, out, (x,), vjp)


def log_softmax(x, axis: int = -1):
    xv = value(x)
    shifted = xv - xv.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def vjp(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return _record(_LOG_SOFTMAX, out, (x,), vjp)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under row-wise softmax."""
    lv = value(logits)
    labels = np.asarray(labels)
    if labels.ndim != 1 or lv.ndim != 2 or labels.shape[0] != lv.shape[0]:
        raise ShapeError(f"logits {lv.shape} and labels {labels.shape} disagree")
    if labels.size and (labels.min() < 0 or labels.max() >= lv.shape[1]):
        raise ValueError(f"label out of range for {lv.shape[1]} classes")
    shifted = lv - lv.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(lv.shape[0])
    out = np.asarray(-logp[rows, labels].mean())

    def vjp(g):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (g * p / lv.shape[0],)

    return _record(_CROSS_ENTROPY, out, (logits,), vjp)
