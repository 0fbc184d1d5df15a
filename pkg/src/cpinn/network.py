"""Fully connected network with exact input derivatives and reverse-mode parameter gradients.

Architecture: ``tanh`` input layer, ``L-1`` hidden ReLU^3 layers (optionally
with identity skips), linear scalar output.  Input derivatives are carried
forward exactly: alongside the activations we propagate first-order tangents
in each input direction and second-order tangents for a list of coordinate
pairs.  Parameter gradients are obtained by reverse accumulation through this
augmented forward pass.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .jet import Jet

_HEADER = struct.Struct("<5q")


def _tanh(z):
    a = np.tanh(z)
    s = 1.0 - a * a
    return a, s, -2.0 * a * s, s * (6.0 * a * a - 2.0)


def _relu3(z):
    m = np.maximum(z, 0.0)
    m2 = m * m
    return m2 * m, 3.0 * m2, 6.0 * m, 6.0 * (z > 0)


def _matmul(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    # one BLAS call over all stacked slots
    return (X.reshape(-1, X.shape[-1]) @ M).reshape(X.shape[:-1] + (M.shape[1],))


def param_count(d: int, W: int, L: int) -> int:
    return (d + 2) * W + (L - 1) * (W + 1) * W + (W + 1)


@dataclass
class MlpNetwork:
    """Parameters live in one flat vector; ``layers()`` returns views into it."""

    d: int
    W: int
    L: int
    params: np.ndarray
    skip: bool = True
    seed: int = 0
    _shapes: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.d < 1 or self.W < 1 or self.L < 2:
            raise ValueError(f"invalid shape d={self.d}, W={self.W}, L={self.L}")
        self._shapes = [(self.W, self.d + 1)] + [(self.W, self.W)] * (self.L - 1) + [(1, self.W)]
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {self.params.shape}")

    @property
    def n_params(self) -> int:
        return param_count(self.d, self.W, self.L)

    def layers(self, flat: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        flat = self.params if flat is None else flat
        out, pos = [], 0
        for rows, cols in self._shapes:
            Wm = flat[pos : pos + rows * cols].reshape(rows, cols)
            pos += rows * cols
            b = flat[pos : pos + rows]
            pos += rows
            out.append((Wm, b))
        return out

    def with_params(self, params: np.ndarray) -> "MlpNetwork":
        return MlpNetwork(self.d, self.W, self.L, np.array(params, dtype=float), self.skip, self.seed)

    def copy(self) -> "MlpNetwork":
        return self.with_params(self.params.copy())

    def __call__(self, x, t) -> np.ndarray:
        return forward(self, x, t)

    def jet(self, x, t, full_hessian: bool = True) -> Jet:
        return jet(self, x, t, full_hessian)


def init(W: int, L: int, d: int, seed: int, skip: bool = True) -> MlpNetwork:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    if W < 1 or L < 2 or d < 1:
        raise ValueError(f"invalid shape W={W}, L={L}, d={d}")
    rng = np.random.default_rng(seed)
    net = MlpNetwork(d, W, L, np.zeros(param_count(d, W, L)), skip, seed)
    for Wm, _ in net.layers():
        fan_out, fan_in = Wm.shape
        a = math.sqrt(6.0 / (fan_in + fan_out))
        Wm[...] = rng.uniform(-a, a, size=Wm.shape)
    return net


def _inputs(x, t, d):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != d:
        raise ValueError(f"expected {d} spatial coordinates, got {x.shape[1]}")
    t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
    return np.column_stack([x, t])


def _second_order_slots(d: int, mode: str) -> list[list[tuple[int, int]]]:
    """Each second-order slot tracks ``sum_{(a, c) in terms} d_a d_c``."""
    if mode == "value":
        return []
    if mode == "laplacian":
        return [[(a, a) for a in range(d)]]
    if mode == "hessian":
        return [[(a, b)] for a in range(d) for b in range(a, d)]
    raise ValueError(f"unknown derivative mode {mode!r}")


class _Tape:
    """Augmented forward pass.

    Every layer state is stacked as ``(1 + D + P, n, width)``: slot 0 holds
    values, slots ``1..D`` first-order tangents along each input coordinate
    (time last), the remaining slots second-order tangents.  In ``laplacian``
    mode a single second-order slot carries the trace directly.
    """

    def __init__(self, net: MlpNetwork, y: np.ndarray, mode: str):
        self.net = net
        self.mode = mode
        n, D = y.shape
        self.D = D if mode != "value" else 0
        self.slots = _second_order_slots(net.d, mode)
        S = 1 + self.D + len(self.slots)
        X = np.zeros((S, n, D))
        X[0] = y
        for k in range(self.D):
            X[1 + k, :, k] = 1.0
        self.inputs = [X]
        self.zs = []
        self.derivs = []
        self.quads = []
        Dn = self.D
        for i, (Wm, b) in enumerate(net.layers()[:-1]):
            Z = _matmul(X, Wm.T)
            Z[0] += b
            s0, s1, s2, s3 = (_tanh if i == 0 else _relu3)(Z[0])
            A = np.empty_like(Z)
            A[0] = s0
            np.multiply(Z[1:], s1, out=A[1:])
            quads = [self._quad(Z, terms) for terms in self.slots]
            for p, q in enumerate(quads):
                A[1 + Dn + p] += s2 * q
            if i > 0 and net.skip:
                A += X
            self.zs.append(Z)
            self.derivs.append((s1, s2, s3))
            self.quads.append(quads)
            X = A
            self.inputs.append(X)
        Wo, bo = net.layers()[-1]
        out = _matmul(X, Wo.T)[..., 0]
        out[0] += bo[0]
        self.out = out

    @staticmethod
    def _quad(Z, terms):
        a, c = terms[0]
        out = Z[1 + a] * Z[1 + c]
        for a, c in terms[1:]:
            out += Z[1 + a] * Z[1 + c]
        return out

    def to_jet(self) -> Jet:
        d, n = self.net.d, self.out.shape[1]
        o = self.out
        if self.mode == "value":
            z = np.zeros(n)
            return Jet(o[0], np.zeros((n, d)), z, z.copy(), None)
        grad = o[1 : 1 + d].T.copy()
        dt = o[1 + d].copy()
        if self.mode == "laplacian":
            return Jet(o[0].copy(), grad, dt, o[1 + self.D].copy(), None)
        hess = np.empty((n, d, d))
        for p, ((a, c),) in enumerate(self.slots):
            hess[:, a, c] = hess[:, c, a] = o[1 + self.D + p]
        return Jet(o[0].copy(), grad, dt, np.trace(hess, axis1=1, axis2=2), hess)

    def seed_cotangent(self, cot: Jet) -> np.ndarray:
        d = self.net.d
        bar = np.zeros_like(self.out)
        bar[0] = cot.value
        if self.mode == "value":
            return bar
        bar[1 : 1 + d] = np.asarray(cot.grad_x).T if cot.grad_x is not None else 0.0
        bar[1 + d] = cot.dt if cot.dt is not None else 0.0
        if self.mode == "laplacian":
            if cot.hess_x is not None:
                raise ValueError("Hessian cotangents need mode 'hessian'")
            if cot.laplacian is not None:
                bar[1 + self.D] = cot.laplacian
            return bar
        for p, ((a, c),) in enumerate(self.slots):
            v = np.zeros(self.out.shape[1])
            if cot.laplacian is not None and a == c:
                v = v + cot.laplacian
            if cot.hess_x is not None:
                v = v + (cot.hess_x[:, a, c] if a == c else cot.hess_x[:, a, c] + cot.hess_x[:, c, a])
            bar[1 + self.D + p] = v
        return bar

    def backward(self, out_bar: np.ndarray) -> np.ndarray:
        net = self.net
        layers = net.layers()
        grads = [(np.zeros_like(Wm), np.zeros_like(b)) for Wm, b in layers]
        Wo, _ = layers[-1]
        X = self.inputs[-1]
        grads[-1][0][0] = out_bar.ravel() @ X.reshape(-1, X.shape[-1])
        grads[-1][1][0] = out_bar[0].sum()
        X_bar = out_bar[..., None] * Wo[0]
        Dn = self.D
        for i in range(len(layers) - 2, -1, -1):
            Wm, _ = layers[i]
            Z = self.zs[i]
            s1, s2, s3 = self.derivs[i]
            Z_bar = X_bar * s1
            if Dn:
                Z_bar[0] += s2 * np.einsum("kij,kij->ij", X_bar[1 : 1 + Dn], Z[1 : 1 + Dn])
            for p, terms in enumerate(self.slots):
                Hb = X_bar[1 + Dn + p]
                Hs2 = Hb * s2
                Z_bar[0] += Hb * (s3 * self.quads[i][p]) + Hs2 * Z[1 + Dn + p]
                for a, c in terms:
                    Z_bar[1 + a] += Hs2 * Z[1 + c]
                    Z_bar[1 + c] += Hs2 * Z[1 + a]
            X_prev = self.inputs[i]
            grads[i][0][...] = Z_bar.reshape(-1, Z_bar.shape[-1]).T @ X_prev.reshape(-1, X_prev.shape[-1])
            grads[i][1][...] = Z_bar[0].sum(axis=0)
            if i > 0:
                prev_bar = _matmul(Z_bar, Wm)
                if net.skip:
                    prev_bar += X_bar
                X_bar = prev_bar
        return np.concatenate([np.concatenate([g.ravel(), gb]) for g, gb in grads])


def forward(net: MlpNetwork, x, t) -> np.ndarray:
    return _Tape(net, _inputs(x, t, net.d), "value").out[0].copy()


def jet(net: MlpNetwork, x, t, full_hessian: bool = True) -> Jet:
    """Value, spatial gradient, time derivative, Laplacian and (optionally) the spatial Hessian."""
    mode = "hessian" if full_hessian else "laplacian"
    return _Tape(net, _inputs(x, t, net.d), mode).to_jet()


LossOnJet = Callable[[Jet], "tuple[float, Jet]"]


def value_and_grad(net: MlpNetwork, x, t, loss_fn: LossOnJet, order: str = "laplacian") -> tuple[float, np.ndarray]:
    """Evaluate ``loss_fn`` on the network jet at the sites and return ``(loss, d loss / d params)``.

    ``loss_fn(jet)`` returns the scalar loss and a :class:`Jet` of cotangents
    (partial derivatives of the loss with respect to each jet entry; unused
    entries may be ``None``).  ``order`` selects which derivatives are
    propagated: ``value``, ``laplacian`` or ``hessian``.
    """
    tape = _Tape(net, _inputs(x, t, net.d), order)
    loss, cot = loss_fn(tape.to_jet())
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    return float(loss), tape.backward(tape.seed_cotangent(cot))


def param_gradient(net: MlpNetwork, x, t, loss_fn: LossOnJet, order: str = "laplacian") -> np.ndarray:
    return value_and_grad(net, x, t, loss_fn, order)[1]


def finite_diff_oracle(net: MlpNetwork, x, t, h: float = 1e-4) -> Jet:
    """Central-difference jet; for validation only."""
    y = _inputs(x, t, net.d)
    d, n = net.d, y.shape[0]

    def f(z):
        return forward(net, z[:, :d], z[:, d])

    f0 = f(y)
    grad = np.empty((n, d))
    hess = np.empty((n, d, d))
    E = np.eye(d + 1) * h
    for a in range(d):
        grad[:, a] = (f(y + E[a]) - f(y - E[a])) / (2 * h)
        hess[:, a, a] = (f(y + E[a]) - 2 * f0 + f(y - E[a])) / h**2
        for c in range(a + 1, d):
            v = (f(y + E[a] + E[c]) - f(y + E[a] - E[c]) - f(y - E[a] + E[c]) + f(y - E[a] - E[c])) / (4 * h * h)
            hess[:, a, c] = hess[:, c, a] = v
    dt = (f(y + E[d]) - f(y - E[d])) / (2 * h)
    return Jet(f0, grad, dt, np.trace(hess, axis1=1, axis2=2), hess)


def finite_diff_param_grad(net: MlpNetwork, loss: Callable[[MlpNetwork], float], h: float = 1e-6) -> np.ndarray:
    """Central differences of ``loss(net)`` over every parameter; for validation only."""
    p0 = net.params.copy()
    g = np.empty_like(p0)
    for i in range(p0.size):
        p = p0.copy()
        p[i] += h
        up = loss(net.with_params(p))
        p[i] -= 2 * h
        g[i] = (up - loss(net.with_params(p))) / (2 * h)
    return g


def save_checkpoint(net: MlpNetwork, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(net.d, net.W, net.L, int(net.skip), net.seed))
        fh.write(net.params.astype("<f8").tobytes())


def load_checkpoint(path) -> MlpNetwork:
    with open(path, "rb") as fh:
        d, W, L, skip, seed = _HEADER.unpack(fh.read(_HEADER.size))
        params = np.frombuffer(fh.read(), dtype="<f8").copy()
    return MlpNetwork(d, W, L, params, bool(skip), seed)
