"""Option hypernetwork: map an option embedding to a full policy parameter
vector, with one independent output head per generated policy layer.

The eight canonical options are one-hot vectors (four corners per room type)
zero-padded to the hypernet input width; the spare slots leave room for
interpolated options later.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape as T
from .gridworld import CORNERS
from .nets import ConfigurationError, NetworkSpec, ParamVector, net_forward

EMBED_WIDTH = 16
TRUNK_WIDTHS = (128, 128)
POLICY_SPEC = NetworkSpec((9, 64, 64, 4), ("relu", "relu", "linear"))
N_OPTIONS = 8


@dataclass(frozen=True)
class OptionEmbedding:
    option_index: int
    room_type: str
    corner: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


def canonical_options(embed_width: int = EMBED_WIDTH):
    """A_1..A_8: R1 corners then R2 corners, one-hot over the first 8 slots."""
    options = []
    for idx in range(N_OPTIONS):
        values = np.zeros(embed_width)
        values[idx] = 1.0
        room = "R1" if idx < 4 else "R2"
        options.append(OptionEmbedding(idx, room, CORNERS[idx % 4], values))
    return tuple(options)


def _policy_layer_sizes(policy_spec: NetworkSpec):
    sizes = []
    for l in range(policy_spec.n_layers):
        n_in, n_out = policy_spec.layer_widths[l], policy_spec.layer_widths[l + 1]
        sizes.append(n_in * n_out + n_out)
    return sizes


@dataclass(eq=False)
class HypernetModel:
    """Dense trunk plus one linear head per policy layer, all parameters flat.

    Layout: trunk W0,b0,W1,b1,... then per head W,b in policy-layer order;
    concatenated head outputs are exactly the policy's flat parameter vector.
    """

    embed_width: int
    trunk_widths: tuple
    policy_spec: NetworkSpec
    params: np.ndarray

    @property
    def trunk_spec(self):
        return NetworkSpec(
            (self.embed_width, *self.trunk_widths), ("relu",) * len(self.trunk_widths)
        )

    @property
    def head_sizes(self):
        return _policy_layer_sizes(self.policy_spec)

    @property
    def param_count(self):
        feat = self.trunk_widths[-1]
        n = self.trunk_spec.param_count
        for size in self.head_sizes:
            n += size * feat + size
        return n

    def head_slots(self):
        """(offset, (n_generated, feat)) per head, after the trunk block."""
        feat = self.trunk_widths[-1]
        off = self.trunk_spec.param_count
        slots = []
        for size in self.head_sizes:
            slots.append((off, (size, feat)))
            off += size * feat + size
        return slots

    @classmethod
    def build(cls, embed_width, trunk_widths, policy_spec, rng, params=None):
        model = cls(embed_width, tuple(trunk_widths), policy_spec, np.empty(0))
        if params is None:
            params = _principled_init(model, rng)
        if params.shape != (model.param_count,):
            raise ConfigurationError(
                f"hypernet expects {model.param_count} params, got {params.shape}"
            )
        model.params = np.asarray(params, dtype=np.float64)
        return model

    def copy(self):
        return HypernetModel(self.embed_width, self.trunk_widths, self.policy_spec, self.params.copy())


def init_hypernet(rng: np.random.Generator) -> HypernetModel:
    return HypernetModel.build(EMBED_WIDTH, TRUNK_WIDTHS, POLICY_SPEC, rng)


def _principled_init(model: HypernetModel, rng: np.random.Generator) -> np.ndarray:
    """Fan-in init for the trunk; each head scaled so generated weight entries
    hit the 2/fan_in variance a directly-initialised policy layer would have.

    The head scale divides out the measured second moment of the trunk
    features over the canonical embeddings (bias-generating rows start at 0).
    """
    trunk_spec = model.trunk_spec
    from .nets import init_params

    trunk = init_params(trunk_spec, rng).values

    feats = []
    for opt in canonical_options(model.embed_width):
        f, _ = net_forward(trunk, trunk_spec, opt.values)
        feats.append(f)
    m2 = float(np.mean(np.square(feats)))
    if m2 <= 0.0:
        m2 = 1.0

    feat_w = model.trunk_widths[-1]
    parts = [trunk]
    for l, size in enumerate(model.head_sizes):
        n_in = model.policy_spec.layer_widths[l]
        n_out = model.policy_spec.layer_widths[l + 1]
        target_var = 2.0 / n_in
        head_std = np.sqrt(target_var / (feat_w * m2))
        W = np.zeros((size, feat_w))
        W[: n_in * n_out] = rng.normal(0.0, head_std, (n_in * n_out, feat_w))
        parts.append(W.ravel())
        parts.append(np.zeros(size))
    return np.concatenate(parts)


def hypernet_forward(model: HypernetModel, embedding, params=None):
    """Generated flat policy parameters; a Var when ``params`` is a Var."""
    theta_h = model.params if params is None else params
    emb = np.asarray(embedding, dtype=np.float64)
    if emb.shape != (model.embed_width,):
        raise ConfigurationError(
            f"embedding width {emb.shape} != hypernet input ({model.embed_width},)"
        )
    feat, _ = net_forward(
        theta_h if isinstance(theta_h, T.Var) else np.asarray(theta_h), model.trunk_spec, emb
    )
    outs = []
    for off, (size, feat_w) in zip_slots(model):
        if isinstance(theta_h, T.Var) or isinstance(feat, T.Var):
            W = T.slice_params(theta_h, off, (size, feat_w))
            b = T.slice_params(theta_h, off + size * feat_w, (size,))
        else:
            W = theta_h[off : off + size * feat_w].reshape((size, feat_w))
            b = theta_h[off + size * feat_w : off + size * feat_w + size]
        outs.append(T.affine(feat, W, b))
    return T.concat(outs, axis=-1)


def zip_slots(model: HypernetModel):
    return model.head_slots()


def generate_policy_params(model: HypernetModel, option: OptionEmbedding) -> ParamVector:
    theta = hypernet_forward(model, option.values)
    return ParamVector(model.policy_spec, theta)


def policy_logits(theta, local_onehot):
    """Four action logits from a generated policy.

    ``theta`` may be a ParamVector, flat ndarray, or Var; ``local_onehot`` is
    the one-hot 3x3 local cell (width 9) or a batch of them.
    """
    if isinstance(theta, ParamVector):
        theta = theta.values
    logits, _ = net_forward(theta, POLICY_SPEC, local_onehot)
    return logits


def local_onehot(local_cell) -> np.ndarray:
    lr, lc = local_cell
    v = np.zeros(9)
    v[3 * lr + lc] = 1.0
    return v
