import math

import numpy as np
import pytest

from cpinn.experiments import manufactured
from cpinn.experiments.training import TrainConfig, TrainingDiverged, relative_l2_error, train
from cpinn.experiments.problems import FunctionModel, SumModel
from cpinn.jet import Jet
from cpinn.loss import lattice_data, pinn_loss

U1 = manufactured("u1")
SMALL = TrainConfig(N=4, W=6, L=2, iterations=30, record_every=10)


def test_deterministic():
    _, a = train(U1, SMALL.replace(loss="cpinn"), probe_res=10)
    _, b = train(U1, SMALL.replace(loss="cpinn"), probe_res=10)
    assert a.final_loss == b.final_loss and a.history == b.history


def test_zero_iterations_echo_initial_loss():
    net, rep = train(U1, SMALL.replace(iterations=0), probe_res=10)
    assert rep.final_loss == rep.initial_loss
    assert rep.initial_loss == pytest.approx(pinn_loss(net, lattice_data(U1, 4)).total, rel=1e-14)
    assert rep.history == [(0, rep.initial_loss)]


@pytest.mark.parametrize("kind", ["pinn", "cpinn"])
def test_loss_decreases(kind):
    _, rep = train(U1, SMALL.replace(loss=kind, iterations=200, step_size=2e-3), probe_res=10)
    assert rep.final_loss < 0.5 * rep.initial_loss
    assert [i for i, _ in rep.history][:3] == [0, 10, 20]


def test_divergence_aborts():
    with pytest.raises(TrainingDiverged):
        train(U1, SMALL.replace(step_size=5.0, momentum=0.99, iterations=500, divergence=1e3), probe_res=10)


def test_config_validation():
    for bad in (dict(loss="mse"), dict(N=1), dict(step_size=0.0), dict(iterations=-1), dict(momentum=1.0), dict(gamma=0.5)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_relative_error_of_offset():
    # u1 + c with c small relative to ||u1||: the error is c / ||u1||
    def one(x, t):
        n = x.shape[0]
        return Jet(np.ones(n), np.zeros((n, 2)), np.zeros(n), np.zeros(n), np.zeros((n, 2, 2)))

    norm = math.sqrt((1 / 30) ** 2 * (1 - math.exp(-2)) / 2)
    c = 0.01 * norm
    model = SumModel(U1.exact, FunctionModel(one), c)
    assert relative_l2_error(model, U1, probe_res=60) == pytest.approx(1.0, rel=2e-3)
    assert relative_l2_error(U1.exact, U1) == 0.0
