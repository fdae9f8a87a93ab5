import math

import numpy as np
import pytest

from apc.nets import (
    ConfigurationError,
    NetworkSpec,
    ParamVector,
    dense_forward,
    deserialize_params,
    init_params,
    net_apply,
    recurrent_step,
    serialize_params,
    zero_hidden,
)
from apc.tape import backward


def test_identity_one_layer_net():
    spec = NetworkSpec((2, 2), ("linear",))
    params = ParamVector.pack(spec, {"W0": np.eye(2), "b0": np.zeros(2)})
    y, _ = dense_forward(params, spec, np.array([3.0, -1.0]))
    assert np.allclose(y, [3.0, -1.0])


def test_zero_net_relu_output_is_zero():
    spec = NetworkSpec((3, 4, 2), ("relu", "relu"))
    params = ParamVector(spec, np.zeros(spec.param_count))
    y, _ = dense_forward(params, spec, np.array([1.0, -2.0, 0.5]))
    assert np.all(y == 0.0)


def test_hand_computed_dense_net():
    # [2,2,1], relu then linear, checked by hand matrix arithmetic
    spec = NetworkSpec((2, 2, 1), ("relu", "linear"))
    params = ParamVector.pack(
        spec,
        {
            "W0": np.array([[1.0, 2.0], [-1.0, 0.5]]),
            "b0": np.array([0.5, -1.0]),
            "W1": np.array([[2.0, -3.0]]),
            "b1": np.array([0.25]),
        },
    )
    y, _ = dense_forward(params, spec, np.array([2.0, 1.0]))
    # pre = [4.5, -2.5] -> relu [4.5, 0] -> 2*4.5 + 0.25
    assert y[0] == pytest.approx(9.25)


def test_dense_forward_dimension_mismatch():
    spec = NetworkSpec((3, 2), ("linear",))
    params = init_params(spec, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        dense_forward(params, spec, np.zeros(4))


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(2)
    for spec in (
        NetworkSpec((3, 5, 2), ("relu", "linear")),
        NetworkSpec((4, 6, 6, 3), ("elu", "linear", "tanh"), recurrent_layer=1),
    ):
        pv = init_params(spec, rng)
        again = ParamVector.pack(spec, pv.unpack())
        assert np.array_equal(pv.values, again.values)


def test_recurrent_zero_weights_zero_hidden():
    spec = NetworkSpec((3, 2, 2), ("relu", "linear"), recurrent_layer=1)
    params = ParamVector(spec, np.zeros(spec.param_count))
    y, (h, c), _ = recurrent_step(params, spec, np.array([0.3, -0.7, 2.0]), zero_hidden(spec))
    assert np.all(y == 0.0)
    assert np.all(h == 0.0) and np.all(c == 0.0)


def test_recurrence_feeds_back():
    rng = np.random.default_rng(4)
    spec = NetworkSpec((2, 3, 2), ("relu", "linear"), recurrent_layer=1)
    params = init_params(spec, rng)
    # warm up the cell with one nonzero input, then feed zeros twice:
    # any difference between the zero-input steps flows through the hidden state
    _, hidden1, _ = recurrent_step(params, spec, np.array([1.0, -0.5]), zero_hidden(spec))
    y2, hidden2, _ = recurrent_step(params, spec, np.zeros(2), hidden1)
    y3, _, _ = recurrent_step(params, spec, np.zeros(2), hidden2)
    assert np.any(hidden1[0] != 0.0)
    assert not np.allclose(y2, y3)


def test_single_unit_lstm_gate_arithmetic():
    # scalar gate equations evaluated by hand with math.exp
    spec = NetworkSpec((1, 1), ("linear",), recurrent_layer=0)
    W = np.array([[0.5, 0.25], [-0.5, 1.0], [1.0, -1.0], [0.25, 0.75]])
    b = np.array([0.1, -0.2, 0.3, -0.1])
    params = ParamVector.pack(spec, {"W0": W, "b0": b})
    x, h0, c0 = 0.5, 0.2, -0.3
    y, (h1, c1), _ = recurrent_step(params, spec, np.array([x]), (np.array([h0]), np.array([c0])))

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    zi = 0.5 * x + 0.25 * h0 + 0.1
    zf = -0.5 * x + 1.0 * h0 - 0.2
    zg = 1.0 * x - 1.0 * h0 + 0.3
    zo = 0.25 * x + 0.75 * h0 - 0.1
    c_expect = sig(zf) * c0 + sig(zi) * math.tanh(zg)
    h_expect = sig(zo) * math.tanh(c_expect)
    assert c1[0] == pytest.approx(c_expect, rel=1e-12)
    assert h1[0] == pytest.approx(h_expect, rel=1e-12)
    assert y[0] == pytest.approx(h_expect, rel=1e-12)


def test_recurrent_hidden_width_checked():
    spec = NetworkSpec((2, 3, 1), ("relu", "linear"), recurrent_layer=1)
    params = init_params(spec, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        recurrent_step(params, spec, np.zeros(2), (np.zeros(4), np.zeros(4)))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        NetworkSpec((3,), ())
    with pytest.raises(ConfigurationError):
        NetworkSpec((3, 2), ("relu", "relu"))
    with pytest.raises(ConfigurationError):
        NetworkSpec((3, 0), ("relu",))
    with pytest.raises(ConfigurationError):
        NetworkSpec((3, 2), ("swish",))
    with pytest.raises(ConfigurationError):
        NetworkSpec((3, 2, 2), ("relu", "relu"), recurrent_layer=1)  # lstm must be linear


def test_backward_via_public_tape_api():
    spec = NetworkSpec((2, 2), ("linear",))
    params = ParamVector.pack(spec, {"W0": np.array([[1.0, 0.0], [0.0, 2.0]]), "b0": np.zeros(2)})
    y, tp = dense_forward(params, spec, np.array([3.0, 4.0]))
    grad = backward(tp, np.array([1.0, 1.0]))
    # d(y0+y1)/dW = [[3,4],[3,4]] row-stacked, then biases [1,1]
    assert np.allclose(grad, [3.0, 4.0, 3.0, 4.0, 1.0, 1.0])


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    spec = NetworkSpec((4, 6, 6, 3), ("relu", "linear", "elu"), recurrent_layer=1)
    pv = init_params(spec, rng)
    path = tmp_path / "params.apcp"
    pv.save(path)
    loaded = ParamVector.load(path)
    assert loaded.spec == spec
    assert np.array_equal(loaded.values, pv.values)
    assert path.read_bytes()[:5] == b"APCP1"


def test_checkpoint_rejects_bad_magic():
    spec = NetworkSpec((2, 2), ("linear",))
    blob = serialize_params(init_params(spec, np.random.default_rng(0)))
    with pytest.raises(ConfigurationError):
        deserialize_params(b"XXXXX" + blob[5:])


def test_net_apply_matches_dense_forward():
    rng = np.random.default_rng(12)
    spec = NetworkSpec((3, 5, 2), ("relu", "tanh"))
    params = init_params(spec, rng)
    x = rng.normal(0.0, 1.0, 3)
    y1, _ = net_apply(params, spec, x)
    y2, _ = dense_forward(params, spec, x)
    assert np.array_equal(y1, y2)
