import numpy as np
import pytest

from cpinn.jet import Jet
from cpinn.network import (
    MlpNetwork,
    finite_diff_oracle,
    finite_diff_param_grad,
    forward,
    init,
    jet,
    load_checkpoint,
    param_count,
    param_gradient,
    save_checkpoint,
    value_and_grad,
)


def random_net(seed, d=2, W=None, L=None, scale=0.5, skip=True):
    rng = np.random.default_rng(seed)
    W = W or int(rng.integers(2, 9))
    L = L or int(rng.integers(2, 4))
    net = init(W, L, d, seed=seed, skip=skip)
    return net.with_params(net.params + scale * rng.standard_normal(net.n_params))


def test_param_count():
    assert param_count(2, 20, 4) == 80 + 3 * 420 + 21 == 1361
    assert init(20, 4, 2, seed=0).n_params == 1361


def test_init_determinism():
    a, b = init(8, 3, 2, seed=7), init(8, 3, 2, seed=7)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, init(8, 3, 2, seed=8).params)


def test_init_bounds_and_zero_bias():
    net = init(10, 3, 2, seed=1)
    for Wm, b in net.layers():
        fan_out, fan_in = Wm.shape
        assert np.all(np.abs(Wm) <= np.sqrt(6 / (fan_in + fan_out)))
        assert np.all(b == 0)


def test_init_rejects_bad_shape():
    with pytest.raises(ValueError):
        init(4, 1, 2, seed=0)
    with pytest.raises(ValueError):
        init(0, 3, 2, seed=0)


def test_zero_weights_gives_output_bias():
    net = MlpNetwork(2, 5, 3, np.zeros(param_count(2, 5, 3)))
    net.layers()[-1][1][0] = 0.75
    assert np.allclose(forward(net, np.random.rand(7, 2), np.random.rand(7)), 0.75)
    j = jet(net, np.random.rand(7, 2), np.random.rand(7))
    assert np.allclose(j.grad_x, 0) and np.allclose(j.dt, 0) and np.allclose(j.hess_x, 0)


def test_zero_network_jet():
    net = MlpNetwork(2, 4, 2, np.zeros(param_count(2, 4, 2)))
    j = jet(net, np.random.rand(3, 2), np.random.rand(3))
    for v in (j.value, j.grad_x, j.dt, j.laplacian, j.hess_x):
        assert np.all(v == 0)


def test_hand_computed_two_neuron_net():
    # d=1, W=1, L=2, no skip: y = w3 * relu3(w2 * tanh(w1 . (x, t) + b1) + b2) + b3
    net = MlpNetwork(1, 1, 2, np.zeros(param_count(1, 1, 2)), skip=False)
    (W1, b1), (W2, b2), (W3, b3) = net.layers()
    W1[:] = [[0.5, -0.25]]
    b1[:] = 0.1
    W2[:] = [[2.0]]
    b2[:] = 0.3
    W3[:] = [[1.5]]
    b3[:] = -0.2
    x, t = 0.4, 0.8
    z = np.tanh(0.5 * x - 0.25 * t + 0.1)
    expect = 1.5 * max(2 * z + 0.3, 0) ** 3 - 0.2
    assert forward(net, np.array([[x]]), np.array([t]))[0] == pytest.approx(expect, rel=1e-14)


def test_continuity():
    net = random_net(3)
    x, t = np.array([[0.3, 0.6]]), np.array([0.2])
    base = forward(net, x, t)
    for eps in (1e-3, 1e-6, 1e-9):
        assert abs(forward(net, x + eps, t) - base) < 1e3 * eps


def test_jet_vs_finite_differences_100_pairs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(100):
        net = random_net(i, d=int(rng.integers(1, 4)))
        x, t = rng.random((1, net.d)), rng.random(1)
        j, fd = jet(net, x, t), finite_diff_oracle(net, x, t, 1e-4)
        for name in ("grad_x", "dt", "hess_x", "laplacian"):
            a, b = getattr(j, name), getattr(fd, name)
            scale = max(np.max(np.abs(b)), 1e-2)
            worst = max(worst, np.max(np.abs(a - b)) / scale)
    assert worst < 1e-4


def test_laplacian_is_hessian_trace():
    net = random_net(11, d=3)
    j = jet(net, np.random.rand(25, 3), np.random.rand(25))
    assert np.allclose(j.laplacian, np.trace(j.hess_x, axis1=1, axis2=2), atol=1e-12, rtol=1e-12)
    assert np.allclose(j.hess_x, np.swapaxes(j.hess_x, 1, 2), atol=1e-12)
    lap_only = jet(net, np.random.rand(25, 3), np.random.rand(25), full_hessian=False)
    assert lap_only.hess_x is None


def _mixed_loss(target):
    def loss_fn(j: Jet):
        n = j.value.size
        r = j.laplacian - j.dt + target + 0.3 * j.value**2 + j.grad_x[:, 0] + 0.2 * j.hess_x[:, 0, -1]
        c = 2 * r / n
        hess = np.zeros_like(j.hess_x)
        hess[:, 0, -1] = 0.2 * c
        grad = np.zeros_like(j.grad_x)
        grad[:, 0] = c
        return float(np.mean(r**2)), Jet(0.6 * j.value * c, grad, -c, c, hess)

    return loss_fn


@pytest.mark.parametrize("seed", range(6))
def test_param_gradient_vs_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    d = 2 if seed % 2 else 1
    net = random_net(seed, d=d, skip=bool(seed % 3))
    assert net.n_params <= 500
    x, t = rng.random((6, d)), rng.random(6)
    loss_fn = _mixed_loss(rng.standard_normal(6))
    g = param_gradient(net, x, t, loss_fn, "hessian")
    fd = finite_diff_param_grad(net, lambda m: loss_fn(m.jet(x, t))[0], 1e-6)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_value_only_gradient_hand_chain_rule():
    net = MlpNetwork(2, 3, 2, np.zeros(param_count(2, 3, 2)))
    x0, t0 = np.array([[0.2, 0.4]]), np.array([0.5])

    def loss_fn(j):
        return float(j.value[0] ** 2), Jet(2 * j.value, None, None, None, None)

    net.layers()[-1][1][0] = 0.5
    loss, g = value_and_grad(net, x0, t0, loss_fn, "value")
    assert loss == pytest.approx(0.25)
    expect = np.zeros(net.n_params)
    expect[-1] = 1.0  # d(b^2)/db at b = 0.5; every other path is multiplied by a zero weight
    assert np.allclose(g, expect)


def test_constant_and_scaled_losses():
    net = random_net(4)
    x, t = np.random.rand(5, 2), np.random.rand(5)
    const = lambda j: (3.0, Jet(np.zeros(5), None, None, None, None))
    assert np.all(param_gradient(net, x, t, const, "value") == 0)
    base = _mixed_loss(np.ones(5))

    def scaled(j):
        val, cot = base(j)
        return 2.5 * val, cot.scale(2.5)

    assert np.allclose(param_gradient(net, x, t, scaled, "hessian"), 2.5 * param_gradient(net, x, t, base, "hessian"))


def test_nonfinite_loss_rejected():
    net = random_net(5)
    bad = lambda j: (float("nan"), Jet(np.zeros(1), None, None, None, None))
    with pytest.raises(FloatingPointError):
        value_and_grad(net, np.zeros((1, 2)), np.zeros(1), bad, "value")


def test_finite_for_bounded_params():
    rng = np.random.default_rng(9)
    net = init(8, 3, 2, seed=0)
    net = net.with_params(rng.uniform(-10, 10, net.n_params))
    j = jet(net, rng.random((50, 2)), rng.random(50))
    assert all(np.all(np.isfinite(v)) for v in (j.value, j.grad_x, j.dt, j.hess_x))


def test_determinism():
    net = random_net(6)
    x, t = np.random.rand(30, 2), np.random.rand(30)
    a, b = jet(net, x, t), jet(net, x, t)
    assert np.array_equal(a.hess_x, b.hess_x) and np.array_equal(a.value, b.value)


def test_checkpoint_roundtrip(tmp_path):
    net = init(6, 3, 2, seed=42, skip=False)
    path = tmp_path / "net.bin"
    save_checkpoint(net, path)
    raw = path.read_bytes()
    assert np.frombuffer(raw[:40], dtype="<i8").tolist() == [2, 6, 3, 0, 42]
    back = load_checkpoint(path)
    assert (back.d, back.W, back.L, back.skip, back.seed) == (2, 6, 3, False, 42)
    assert np.array_equal(back.params, net.params)
