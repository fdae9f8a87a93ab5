"""Network specs, flat parameter vectors, and forward passes (dense + LSTM).

Every network in the stack is described by a ``NetworkSpec`` and stored as a
single flat float64 vector whose layout is given by the spec's manifest.
Forward code is written once against the ops in :mod:`apc.tape`, so it runs
identically on plain arrays (rollouts) and on tape ``Var`` graphs (training).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import tape as T

ACTIVATIONS = ("relu", "elu", "linear", "tanh")
_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}
_ACT_FN = {"relu": T.relu, "elu": T.elu, "linear": lambda x: x, "tanh": T.tanh}

CHECKPOINT_MAGIC = b"APCP1"


class ConfigurationError(ValueError):
    """Fatal shape/spec mismatch."""


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths (input first), one activation per weight layer, and an
    optional single LSTM layer index."""

    layer_widths: tuple
    activations: tuple
    recurrent_layer: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_widths) < 2:
            raise ConfigurationError("need at least input and output widths")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigurationError("layer widths must be >= 1")
        if len(self.activations) != self.n_layers:
            raise ConfigurationError(
                f"{len(self.activations)} activations for {self.n_layers} weight layers"
            )
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {a!r}")
        if self.recurrent_layer is not None:
            r = self.recurrent_layer
            if not 0 <= r < self.n_layers:
                raise ConfigurationError(f"recurrent layer {r} out of range")
            if self.activations[r] != "linear":
                # the LSTM cell supplies its own gate nonlinearities
                raise ConfigurationError("recurrent layer must use 'linear' activation")

    @property
    def n_layers(self):
        return len(self.layer_widths) - 1

    @property
    def input_width(self):
        return self.layer_widths[0]

    @property
    def output_width(self):
        return self.layer_widths[-1]

    @property
    def hidden_width(self):
        if self.recurrent_layer is None:
            raise ConfigurationError("spec has no recurrent layer")
        return self.layer_widths[self.recurrent_layer + 1]

    def manifest(self):
        return _manifest(self)

    @property
    def param_count(self):
        slots = _manifest(self)
        last = slots[-1]
        return last.offset + int(np.prod(last.shape))


@dataclass(frozen=True)
class LayerSlot:
    name: str
    offset: int
    shape: tuple


@lru_cache(maxsize=None)
def _manifest(spec: NetworkSpec):
    slots = []
    off = 0
    for l in range(spec.n_layers):
        n_in = spec.layer_widths[l]
        n_out = spec.layer_widths[l + 1]
        if l == spec.recurrent_layer:
            # stacked gate order: input, forget, cell, output
            w_shape = (4 * n_out, n_in + n_out)
            b_shape = (4 * n_out,)
        else:
            w_shape = (n_out, n_in)
            b_shape = (n_out,)
        slots.append(LayerSlot(f"W{l}", off, w_shape))
        off += int(np.prod(w_shape))
        slots.append(LayerSlot(f"b{l}", off, b_shape))
        off += n_out * (4 if l == spec.recurrent_layer else 1)
    return tuple(slots)


class ParamVector:
    """Flat parameter array tied to the spec that gives it shape."""

    def __init__(self, spec: NetworkSpec, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != spec.param_count:
            raise ConfigurationError(
                f"expected {spec.param_count} parameters for {spec}, got {values.shape}"
            )
        self.spec = spec
        self.values = values

    def __len__(self):
        return self.values.shape[0]

    def copy(self):
        return ParamVector(self.spec, self.values.copy())

    def unpack(self):
        """name -> reshaped view into the flat vector."""
        out = {}
        for slot in self.spec.manifest():
            n = int(np.prod(slot.shape))
            out[slot.name] = self.values[slot.offset : slot.offset + n].reshape(slot.shape)
        return out

    @classmethod
    def pack(cls, spec: NetworkSpec, arrays):
        values = np.empty(spec.param_count, dtype=np.float64)
        for slot in spec.manifest():
            n = int(np.prod(slot.shape))
            arr = np.asarray(arrays[slot.name], dtype=np.float64)
            if arr.shape != slot.shape:
                raise ConfigurationError(f"{slot.name}: expected {slot.shape}, got {arr.shape}")
            values[slot.offset : slot.offset + n] = arr.ravel()
        return cls(spec, values)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(serialize_params(self))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            blob = fh.read()
        pv, rest = deserialize_params(blob)
        if rest:
            raise ConfigurationError("trailing bytes after parameter payload")
        return pv


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> ParamVector:
    """Fan-in-scaled init: He for relu/elu layers, 1/sqrt(fan_in) otherwise.
    LSTM gate biases start at zero except the forget gate (1.0)."""
    arrays = {}
    for l in range(spec.n_layers):
        n_in = spec.layer_widths[l]
        n_out = spec.layer_widths[l + 1]
        if l == spec.recurrent_layer:
            std = np.sqrt(1.0 / (n_in + n_out))
            arrays[f"W{l}"] = rng.normal(0.0, std, (4 * n_out, n_in + n_out))
            b = np.zeros(4 * n_out)
            b[n_out : 2 * n_out] = 1.0
            arrays[f"b{l}"] = b
        else:
            act = spec.activations[l]
            std = np.sqrt((2.0 if act in ("relu", "elu") else 1.0) / n_in)
            arrays[f"W{l}"] = rng.normal(0.0, std, (n_out, n_in))
            arrays[f"b{l}"] = np.zeros(n_out)
    return ParamVector.pack(spec, arrays)


def zero_hidden(spec: NetworkSpec, batch=None):
    h = spec.hidden_width
    shape = (h,) if batch is None else (batch, h)
    return (np.zeros(shape), np.zeros(shape))


def _layer_params(theta, spec, l):
    w_slot, b_slot = spec.manifest()[2 * l], spec.manifest()[2 * l + 1]
    if isinstance(theta, T.Var):
        W = T.slice_params(theta, w_slot.offset, w_slot.shape)
        b = T.slice_params(theta, b_slot.offset, b_slot.shape)
    else:
        nw = int(np.prod(w_slot.shape))
        W = theta[w_slot.offset : w_slot.offset + nw].reshape(w_slot.shape)
        b = theta[b_slot.offset : b_slot.offset + int(np.prod(b_slot.shape))]
    return W, b


def lstm_cell(x, h, c, W, b):
    """One gated update; returns (h', c')."""
    n_out = _shape_of(h)[-1]
    z = T.affine(T.concat([x, h], axis=-1), W, b)
    zi = T.narrow(z, 0, n_out)
    zf = T.narrow(z, n_out, n_out)
    zg = T.narrow(z, 2 * n_out, n_out)
    zo = T.narrow(z, 3 * n_out, n_out)
    c2 = T.add(T.mul(T.sigmoid(zf), c), T.mul(T.sigmoid(zi), T.tanh(zg)))
    h2 = T.mul(T.sigmoid(zo), T.tanh(c2))
    return h2, c2


def _shape_of(x):
    return x.data.shape if isinstance(x, T.Var) else np.shape(x)


def net_forward(theta, spec: NetworkSpec, x, hidden=None):
    """Run the whole network; ``theta`` may be a flat ndarray or a Var.

    Returns (output, hidden') where hidden' is None for pure-dense specs.
    """
    in_w = _shape_of(x)[-1]
    if in_w != spec.input_width:
        raise ConfigurationError(f"input width {in_w} != spec input {spec.input_width}")
    n_params = _shape_of(theta)[-1] if not isinstance(theta, T.Var) else theta.data.shape[0]
    if n_params != spec.param_count:
        raise ConfigurationError(f"{n_params} params != spec count {spec.param_count}")
    hidden_out = None
    for l in range(spec.n_layers):
        W, b = _layer_params(theta, spec, l)
        if l == spec.recurrent_layer:
            if hidden is None:
                raise ConfigurationError("recurrent spec requires a hidden state pair")
            h, c = hidden
            if _shape_of(h)[-1] != spec.hidden_width:
                raise ConfigurationError("hidden width mismatch")
            h2, c2 = lstm_cell(x, h, c, W, b)
            hidden_out = (h2, c2)
            x = h2
        else:
            x = _ACT_FN[spec.activations[l]](T.affine(x, W, b))
    return x, hidden_out


def dense_forward(params: ParamVector, spec: NetworkSpec, x, tp: T.Tape = None):
    """Forward pass recording a tape; returns (output ndarray, tape)."""
    if spec.recurrent_layer is not None:
        raise ConfigurationError("use recurrent_step for recurrent specs")
    _check_params(params, spec)
    if tp is None:
        tp = T.Tape()
    theta = T.leaf(tp, params.values)
    y, _ = net_forward(theta, spec, np.asarray(x, dtype=np.float64))
    tp.output_var = y
    tp.param_leaf = theta
    return y.data.copy(), tp


def recurrent_step(params: ParamVector, spec: NetworkSpec, x, hidden, tp: T.Tape = None):
    """One recurrent forward step; returns (output, (h', c'), tape)."""
    if spec.recurrent_layer is None:
        raise ConfigurationError("spec has no recurrent layer")
    _check_params(params, spec)
    if tp is None:
        tp = T.Tape()
    theta = T.leaf(tp, params.values)
    y, hidden2 = net_forward(theta, spec, np.asarray(x, dtype=np.float64), hidden)
    tp.output_var = y
    tp.param_leaf = theta
    return y.data.copy(), (hidden2[0].data.copy(), hidden2[1].data.copy()), tp


def net_apply(params: ParamVector, spec: NetworkSpec, x, hidden=None):
    """Plain-numpy forward (no tape); returns (output, hidden')."""
    _check_params(params, spec)
    y, hidden2 = net_forward(params.values, spec, np.asarray(x, dtype=np.float64), hidden)
    return y, hidden2


def _check_params(params, spec):
    if not isinstance(params, ParamVector) or params.spec != spec:
        raise ConfigurationError("params do not match spec")


# --- checkpoint encoding (magic, manifest ints, float64 payload) ---

def serialize_spec_ints(spec: NetworkSpec):
    ints = [spec.n_layers]
    ints.extend(spec.layer_widths)
    ints.extend(_ACT_CODE[a] for a in spec.activations)
    ints.append(-1 if spec.recurrent_layer is None else spec.recurrent_layer)
    return ints


def deserialize_spec_ints(ints):
    n_layers = ints[0]
    widths = ints[1 : n_layers + 2]
    acts = [ACTIVATIONS[c] for c in ints[n_layers + 2 : 2 * n_layers + 2]]
    rec = ints[2 * n_layers + 2]
    spec = NetworkSpec(tuple(widths), tuple(acts), None if rec < 0 else rec)
    return spec, 2 * n_layers + 3


def serialize_params(pv: ParamVector) -> bytes:
    ints = serialize_spec_ints(pv.spec)
    out = bytearray(CHECKPOINT_MAGIC)
    out += struct.pack("<i", len(ints))
    out += struct.pack(f"<{len(ints)}i", *ints)
    out += pv.values.astype("<f8").tobytes()
    return bytes(out)


def deserialize_params(blob: bytes):
    if blob[:5] != CHECKPOINT_MAGIC:
        raise ConfigurationError("bad magic: not a parameter checkpoint")
    off = 5
    (n_ints,) = struct.unpack_from("<i", blob, off)
    off += 4
    ints = list(struct.unpack_from(f"<{n_ints}i", blob, off))
    off += 4 * n_ints
    spec, used = deserialize_spec_ints(ints)
    if used != n_ints:
        raise ConfigurationError("manifest length mismatch")
    n = spec.param_count
    values = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(np.float64)
    off += 8 * n
    return ParamVector(spec, values), blob[off:]
