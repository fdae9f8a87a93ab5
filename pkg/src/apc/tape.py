"""Minimal reverse-mode autodiff over float64 numpy arrays.

A ``Tape`` records every tracked intermediate of one forward pass as a
``Var`` in creation order (a Wengert list).  ``Tape.gradients`` replays the
list backwards exactly once; a second call raises.  Ops accept a mix of
``Var`` and plain ndarray arguments -- if no argument is a ``Var`` they fall
through to plain numpy, so the same network code serves both the fast
rollout path and the differentiable training path with bitwise-identical
arithmetic.
"""

from __future__ import annotations

import numpy as np


class TapeError(RuntimeError):
    """Reused, stale, or mis-seeded tape."""


class Tape:
    def __init__(self):
        self._nodes = []
        self._consumed = False
        # set by dense_forward/recurrent_step so the module-level backward()
        # knows which output to seed and which leaf to report
        self.output_var = None
        self.param_leaf = None

    def _add(self, var):
        self._nodes.append(var)

    def gradients(self, output, seed, leaves):
        """Seed ``output`` with ``seed`` and return one gradient per leaf."""
        if self._consumed:
            raise TapeError("tape already consumed by a backward pass")
        if output.tape is not self:
            raise TapeError("output does not belong to this tape")
        self._consumed = True
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != output.data.shape:
            raise TapeError(
                f"seed gradient shape {seed.shape} != output shape {output.data.shape}"
            )
        output.grad = seed.copy()
        for var in reversed(self._nodes):
            if var.grad is not None and var._bwd is not None:
                var._bwd(var.grad)
        return [
            leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
            for leaf in leaves
        ]


class Var:
    """One tracked node: an ndarray value plus its backward closure."""

    __slots__ = ("data", "grad", "tape", "_bwd")

    def __init__(self, data, tape, bwd=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.tape = tape
        self._bwd = bwd
        tape._add(self)


def leaf(tape, data):
    """Differentiation root (e.g. a flat parameter vector)."""
    return Var(np.array(data, dtype=np.float64), tape)


def _accum(x, g):
    if isinstance(x, Var):
        x.grad = np.array(g) if x.grad is None else x.grad + g


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _d(x):
    return x.data if isinstance(x, Var) else x


def affine(x, W, b):
    """x @ W.T + b with x of shape (n_in,) or (batch, n_in)."""
    t = _tape_of(x, W, b)
    xd, Wd, bd = _d(x), _d(W), _d(b)
    y = xd @ Wd.T + bd
    if t is None:
        return y

    def bwd(g):
        _accum(x, g @ Wd)
        if isinstance(W, Var):
            _accum(W, g.T @ xd if xd.ndim == 2 else np.outer(g, xd))
        if isinstance(b, Var):
            _accum(b, g.sum(axis=0) if g.ndim == 2 else g)

    return Var(y, t, bwd)


def add(a, b):
    t = ta = _tape_of(a, b)
    y = _d(a) + _d(b)
    if t is None:
        return y

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return Var(y, ta, bwd)


def sub(a, b):
    t = _tape_of(a, b)
    y = _d(a) - _d(b)
    if t is None:
        return y

    def bwd(g):
        _accum(a, g)
        _accum(b, -g)

    return Var(y, t, bwd)


def mul(a, b):
    """Elementwise product; operands must share a shape."""
    t = _tape_of(a, b)
    ad, bd = _d(a), _d(b)
    y = ad * bd
    if t is None:
        return y

    def bwd(g):
        _accum(a, g * bd)
        _accum(b, g * ad)

    return Var(y, t, bwd)


def scale(x, c):
    t = _tape_of(x)
    y = _d(x) * float(c)
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * float(c))

    return Var(y, t, bwd)


def relu(x):
    t = _tape_of(x)
    xd = _d(x)
    y = np.maximum(xd, 0.0)
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * (xd > 0.0))

    return Var(y, t, bwd)


def elu(x):
    # alpha = 1
    t = _tape_of(x)
    xd = _d(x)
    y = np.where(xd > 0.0, xd, np.expm1(np.minimum(xd, 0.0)))
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * np.where(xd > 0.0, 1.0, y + 1.0))

    return Var(y, t, bwd)


def tanh(x):
    t = _tape_of(x)
    y = np.tanh(_d(x))
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * (1.0 - y * y))

    return Var(y, t, bwd)


def sigmoid(x):
    t = _tape_of(x)
    xd = _d(x)
    y = np.empty_like(xd)
    pos = xd >= 0.0
    y[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    y[~pos] = ex / (1.0 + ex)
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * y * (1.0 - y))

    return Var(y, t, bwd)


def square(x):
    t = _tape_of(x)
    xd = _d(x)
    y = xd * xd
    if t is None:
        return y

    def bwd(g):
        _accum(x, g * 2.0 * xd)

    return Var(y, t, bwd)


def concat(parts, axis=-1):
    t = _tape_of(*parts)
    datas = [_d(p) for p in parts]
    y = np.concatenate(datas, axis=axis)
    if t is None:
        return y
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            _accum(p, g[tuple(idx)])

    return Var(y, t, bwd)


def narrow(x, start, size, axis=-1):
    """Contiguous slice along one axis."""
    t = _tape_of(x)
    xd = _d(x)
    ax = axis if axis >= 0 else xd.ndim + axis
    idx = [slice(None)] * xd.ndim
    idx[ax] = slice(start, start + size)
    idx = tuple(idx)
    y = xd[idx]
    if t is None:
        return y.copy()

    def bwd(g):
        if isinstance(x, Var):
            full = np.zeros_like(xd)
            full[idx] = g
            _accum(x, full)

    return Var(y.copy(), t, bwd)


def slice_params(theta, offset, shape):
    """View ``shape`` worth of entries of a flat vector, reshaped.

    The gradient scatters back into the flat vector, which is what lets a
    generated parameter vector carry gradients through to its generator.
    """
    t = _tape_of(theta)
    td = _d(theta)
    n = int(np.prod(shape))
    y = td[offset : offset + n].reshape(shape)
    if t is None:
        return y

    def bwd(g):
        full = np.zeros_like(td)
        full[offset : offset + n] = g.ravel()
        _accum(theta, full)

    return Var(y.copy(), t, bwd)


def sum_all(x):
    t = _tape_of(x)
    xd = _d(x)
    y = xd.sum()
    if t is None:
        return y

    def bwd(g):
        _accum(x, np.full_like(xd, float(g)))

    return Var(y, t, bwd)


def mean_all(x):
    n = _d(x).size
    return scale(sum_all(x), 1.0 / n)


def log_softmax_pick(logits, indices):
    """Row-wise log softmax(logits)[index].

    ``logits`` is (k,) with a scalar index, or (t, k) with (t,) indices.
    """
    t = _tape_of(logits)
    ld = _d(logits)
    if ld.ndim == 1:
        m = ld.max()
        lse = m + np.log(np.exp(ld - m).sum())
        p = np.exp(ld - lse)
        y = ld[int(indices)] - lse
        if t is None:
            return y

        def bwd1(g):
            gl = -p * float(g)
            gl[int(indices)] += float(g)
            _accum(logits, gl)

        return Var(y, t, bwd1)

    idx = np.asarray(indices, dtype=np.intp)
    m = ld.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(ld - m).sum(axis=1, keepdims=True))
    p = np.exp(ld - lse)
    rows = np.arange(ld.shape[0])
    y = ld[rows, idx] - lse[:, 0]
    if t is None:
        return y

    def bwd(g):
        gl = -p * g[:, None]
        gl[rows, idx] += g
        _accum(logits, gl)

    return Var(y, t, bwd)


def backward(tape, loss_gradient):
    """Gradient of the recorded forward pass w.r.t. its parameter leaf.

    Spec-level entry point for tapes produced by ``dense_forward`` and
    ``recurrent_step``; seeds the recorded output with ``loss_gradient``.
    """
    if tape.output_var is None or tape.param_leaf is None:
        raise TapeError("tape does not record a (params, output) pair")
    return tape.gradients(tape.output_var, loss_gradient, [tape.param_leaf])[0]
