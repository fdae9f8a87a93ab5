"""Central-difference gradient oracle and the registered gradient checks."""

from __future__ import annotations

import numpy as np

from .nets import ParamVector


def finite_diff_grad(loss_fn, params, eps: float = 1e-4) -> np.ndarray:
    """(loss(p + eps*e_i) - loss(p - eps*e_i)) / (2*eps) per coordinate."""
    values = params.values if isinstance(params, ParamVector) else np.asarray(params)
    values = np.array(values, dtype=np.float64)
    grad = np.zeros_like(values)
    for i in range(values.shape[0]):
        orig = values[i]
        values[i] = orig + eps
        up = float(loss_fn(values))
        values[i] = orig - eps
        dn = float(loss_fn(values))
        values[i] = orig
        grad[i] = (up - dn) / (2.0 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    num = np.linalg.norm(a - b)
    den = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(num / den)


def run_all_gradient_checks(seed: int = 0, eps: float = 1e-4, tol: float = 1e-4):
    """Reverse-mode vs. finite differences on the three training losses,
    each on an instance with <= 200 parameters.

    Returns a list of (name, n_params, rel_err, ok).
    """
    # imported here so the numeric core stays dependency-free
    from . import tape as T
    from .hypernet import HypernetModel, hypernet_forward
    from .nets import NetworkSpec, init_params, net_forward, zero_hidden

    results = []
    rng = np.random.default_rng(seed)

    # (a) REINFORCE surrogate through the hypernet -> generated-policy chain
    policy_spec = NetworkSpec((3, 4, 2), ("relu", "linear"))
    hnet = HypernetModel.build(embed_width=2, trunk_widths=(4,), policy_spec=policy_spec, rng=rng)
    states = np.eye(3)[[0, 2, 1]]
    actions = [1, 0, 1]
    advantages = np.array([0.7, -0.4, 1.2])
    embedding = np.array([1.0, 0.0])

    def reinforce_loss_var(values_var):
        theta = hypernet_forward(hnet, embedding, params=values_var)
        logits, _ = net_forward(theta, policy_spec, states)
        lps = T.log_softmax_pick(logits, np.array(actions))
        pg = T.sum_all(T.mul(lps, -advantages))
        l2 = T.scale(T.sum_all(T.square(logits)), 5e-3)
        return T.add(pg, l2)

    def reinforce_loss_plain(values):
        theta = hypernet_forward(hnet, embedding, params=values)
        logits, _ = net_forward(theta, policy_spec, states)
        lps = T.log_softmax_pick(logits, np.array(actions))
        return float((lps * -advantages).sum() + 5e-3 * (logits ** 2).sum())

    results.append(
        _check("reinforce-through-hypernet", hnet.params.copy(), reinforce_loss_var, reinforce_loss_plain, eps, tol)
    )

    # (b) recurrent transition-model MSE (tiny analogue of the world model)
    ws = NetworkSpec((2, 3, 4), ("relu", "linear"), recurrent_layer=1)
    wparams = init_params(ws, rng)
    xs = rng.normal(0.0, 1.0, (3, 2))
    targets = rng.normal(0.0, 1.0, (3, 4))

    def wm_loss_var(values_var):
        hidden = zero_hidden(ws)
        err = None
        for t in range(xs.shape[0]):
            y, hidden = net_forward(values_var, ws, xs[t], hidden)
            sq = T.sum_all(T.square(T.sub(y, targets[t])))
            err = sq if err is None else T.add(err, sq)
        return T.scale(err, 1.0 / targets.size)

    def wm_loss_plain(values):
        hidden = zero_hidden(ws)
        total = 0.0
        for t in range(xs.shape[0]):
            y, hidden = net_forward(values, ws, xs[t], hidden)
            total += ((y - targets[t]) ** 2).sum()
        return total / targets.size

    results.append(_check("transition-mse", wparams.values.copy(), wm_loss_var, wm_loss_plain, eps, tol))

    # (c) baseline value-regression MSE
    bs = NetworkSpec((4, 6, 1), ("relu", "linear"))
    bparams = init_params(bs, rng)
    bx = rng.normal(0.0, 1.0, (5, 4))
    bt = rng.normal(0.0, 1.0, (5, 1))

    def b_loss_var(values_var):
        y, _ = net_forward(values_var, bs, bx)
        return T.mean_all(T.square(T.sub(y, bt)))

    def b_loss_plain(values):
        y, _ = net_forward(values, bs, bx)
        return float(((y - bt) ** 2).mean())

    results.append(_check("baseline-mse", bparams.values.copy(), b_loss_var, b_loss_plain, eps, tol))
    return results


def _check(name, values, loss_var_fn, loss_plain_fn, eps, tol):
    from . import tape as T

    tp = T.Tape()
    lf = T.leaf(tp, values)
    loss = loss_var_fn(lf)
    (analytic,) = tp.gradients(loss, 1.0, [lf])
    numeric = finite_diff_grad(loss_plain_fn, values, eps)
    err = relative_error(analytic, numeric)
    return (name, values.shape[0], err, err <= tol)
