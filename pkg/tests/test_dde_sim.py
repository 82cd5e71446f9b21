import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaysync.dde_sim import (
    HistorySpec,
    Trajectory,
    convergence_order,
    exact_linear_delay,
    fit_decay,
    history_norm,
    integrate,
    method_of_steps_pieces,
    simulate,
    steps_per_delay,
    sync_error,
    write_sync_csv,
    write_trajectory_csv,
)
from delaysync.errors import InvalidInputError
from delaysync.graph import gen_directed_ring, gen_er, gen_regular
from delaysync.sl_model import SLParams, sl_equilibrium_model
from delaysync.spectrum import LocalModel

SL = sl_equilibrium_model(SLParams(-1.0, math.pi))


def _traj(states, t=None):
    states = np.asarray(states, dtype=float)
    t = np.arange(len(states), dtype=float) if t is None else t
    return Trajectory(t, states, 0.0, 1.0, 0.01, None, "test")


def test_sync_error_trivial():
    s = np.zeros((2, 3, 2))
    s[1, 2] = [3.0, 4.0]
    e = sync_error(_traj(s))
    assert e[0] == 0 and e[1] == pytest.approx(5.0)


def test_fit_synthetic_exponential():
    t = np.linspace(0, 100, 1001)
    f = fit_decay(t, 3.0 * np.exp(-0.1 * t), window=(10, 100))
    assert f.eta == pytest.approx(0.1, abs=1e-9)
    assert f.t_tr == pytest.approx(10.0, abs=1e-9)
    assert f.eta * f.t_tr == pytest.approx(1.0)
    assert f.intercept == pytest.approx(math.log(3.0), abs=1e-9)
    assert not f.low_confidence


def test_fit_default_window_and_floor():
    t = np.linspace(0, 100, 1001)
    e = np.maximum(np.exp(-0.5 * t), 1e-12)
    f = fit_decay(t, e, tau=5.0, floor=1e-11)
    assert f.fit_window[0] == 10.0 and f.fit_window[1] < 51
    assert f.eta == pytest.approx(0.5, abs=1e-9)


def test_fit_errors():
    t = np.linspace(0, 10, 101)
    with pytest.raises(InvalidInputError):
        fit_decay(t, np.zeros_like(t), window=(0, 10))
    with pytest.raises(InvalidInputError):
        fit_decay(t, np.ones_like(t), window=(0, 1))
    with pytest.raises(InvalidInputError):
        fit_decay(t, np.ones_like(t))
    rng = np.random.default_rng(0)
    assert fit_decay(t, np.exp(rng.normal(size=t.size)), window=(0, 10)).low_confidence


def test_method_of_steps_oracle():
    assert exact_linear_delay(1.0) == 0
    assert exact_linear_delay(2.0) == Fraction(-1, 2)
    assert exact_linear_delay(3.0) == Fraction(-1, 6)
    p = method_of_steps_pieces(2)
    assert p[0] == [1, -1]
    # continuity at the breakpoints
    for k in range(1, 6):
        pieces = method_of_steps_pieces(k + 1)
        a = sum(c * k ** i for i, c in enumerate(pieces[k - 1]))
        b = sum(c * k ** i for i, c in enumerate(pieces[k]))
        assert a == b


def test_integrator_exact_on_cubic_pieces():
    t, x, _ = integrate(lambda x, xd: -xd, lambda s: np.ones(1), 1.0, 1.0 / 8, 3.0)
    assert x[-1, 0] == pytest.approx(-1 / 6, abs=1e-13)


def test_convergence_order():
    order, errs = convergence_order()
    assert order >= 3.5
    assert errs[0] > errs[1] > errs[2]


def test_steps_per_delay():
    assert steps_per_delay(100.0, 100 / 512) == 512
    with pytest.raises(InvalidInputError):
        steps_per_delay(1.0, 0.3)


def test_simulate_preconditions():
    net = gen_directed_ring(4)
    h = HistorySpec.random_constant(4, 2, 1)
    with pytest.raises(InvalidInputError):
        simulate(net, SL, 0.2, 10.0, 10 / 32, 50.0, h)
    with pytest.raises(InvalidInputError):
        simulate(net, SL, 0.2, 10.0, 10 / 64, 5.0, h)
    with pytest.raises(InvalidInputError):
        simulate(net, SL, 0.2, 10.0, 10 / 64, 50.0, HistorySpec.random_constant(3, 2, 1))
    with pytest.raises(InvalidInputError):
        HistorySpec()
    with pytest.raises(InvalidInputError):
        HistorySpec(values=[[np.nan, 0.0]])


def test_history_spec():
    h = HistorySpec.random_constant(5, 2, 3)
    assert h.values.shape == (5, 2) and h.seed == 3 and h.desynchronized()
    assert np.array_equal(h.values, HistorySpec.random_constant(5, 2, 3).values)
    assert not HistorySpec(values=np.ones((3, 2))).desynchronized()
    g = HistorySpec(func=lambda t: np.full((2, 1), t))
    assert g(-0.5)[0, 0] == -0.5


def test_uncoupled_identical_histories():
    net = gen_er(6, 0.5, 2)
    h = HistorySpec(values=np.tile([0.3, -0.2], (6, 1)))
    tr = simulate(net, SL, 0.0, 5.0, 5 / 64, 40.0, h)
    assert np.max(sync_error(tr)) <= 1e-12


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.6))
def test_diagonal_invariance(seed, kappa):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1, 1, 2)
    net = gen_directed_ring(4)
    tr = simulate(net, SL, kappa, 2.0, 2 / 64, 20.0, HistorySpec(values=np.tile(v, (4, 1))))
    assert np.max(sync_error(tr)) <= 1e-10


def test_determinism():
    net = gen_directed_ring(4)
    h = HistorySpec.random_constant(4, 2, 7)
    a = simulate(net, SL, 0.3, 10.0, 10 / 64, 100.0, h)
    b = simulate(net, SL, 0.3, 10.0, 10 / 64, 100.0, h)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.t, b.t)


def test_nonlinear_coupling_matches_linear():
    net = gen_regular("star", 4)
    lin = LocalModel(J=SL.J, H=SL.H, f_rhs=SL.f_rhs, h_rhs=lambda d: d, h_linear=False, name="edgewise")
    h = HistorySpec.random_constant(4, 2, 5)
    a = simulate(net, SL, 0.2, 3.0, 3 / 64, 30.0, h)
    b = simulate(net, lin, 0.2, 3.0, 3 / 64, 30.0, h)
    assert np.allclose(a.states, b.states, atol=1e-12)


def test_blowup_marker():
    net = gen_directed_ring(4)
    grow = LocalModel.linear([[0.5]], [[1.0]])
    tr = simulate(net, grow, 0.1, 1.0, 1 / 64, 200.0, HistorySpec.random_constant(4, 1, 1))
    assert tr.blowup and tr.blowup_time is not None and tr.t[-1] == pytest.approx(tr.blowup_time)
    assert tr.t[-1] < 200.0


def test_output_thinning():
    net = gen_directed_ring(4)
    h = HistorySpec.random_constant(4, 2, 1)
    full = simulate(net, SL, 0.3, 1.0, 1 / 64, 10.0, h)
    thin = simulate(net, SL, 0.3, 1.0, 1 / 64, 10.0, h, max_values=1000)
    assert len(thin.t) * 8 <= 1100
    assert thin.t[-1] == full.t[-1] and np.array_equal(thin.states[-1], full.states[-1])


def test_history_norm():
    t = np.arange(0.0, 10.0, 1.0)
    v = np.array([5, 1, 1, 1, 2, 1, 1, 1, 1, 1], dtype=float)
    tt, s = history_norm(t, v, 2.0)
    assert tt[0] == 2.0 and list(s) == [5, 1, 2, 2, 2, 1, 1, 1]
    with pytest.raises(InvalidInputError):
        history_norm(t, v, 20.0)


def test_csv_schemas(tmp_path):
    net = gen_directed_ring(4)
    tr = simulate(net, SL, 0.3, 1.0, 1 / 64, 2.0, HistorySpec.random_constant(4, 2, 1))
    write_trajectory_csv(tmp_path / "t.csv", tr, stride=16)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "node", "component", "value"]
    assert len(rows) - 1 == len(range(0, len(tr.t), 16)) * 8
    assert float(rows[-1][3]) == tr.states[128, 3, 1]
    write_sync_csv(tmp_path / "s.csv", tr.t, sync_error(tr), stride=2)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["t", "error"] and len(rows) == 1 + len(range(0, len(tr.t), 2))
    with pytest.raises(InvalidInputError):
        write_sync_csv(tmp_path / "x.csv", tr.t, sync_error(tr), stride=0)


def _two_node_t_tr(kappa, t_end):
    tr = simulate(gen_regular("path", 2), SL, kappa, 20.0, 20 / 256, t_end, HistorySpec.random_constant(2, 2, 0))
    tt, env = history_norm(tr.t, sync_error(tr), 20.0)
    return fit_decay(tt, env, window=(40.0, t_end), floor=1e-11).t_tr


def test_transient_two_nodes():
    assert _two_node_t_tr(0.25, 3000.0) == pytest.approx(-20 / math.log(0.5), rel=0.10)
    assert _two_node_t_tr(0.45, 6000.0) == pytest.approx(-20 / math.log(0.9), rel=0.15)


def test_decay_rate_matches_spectrum_ring4():
    tr = simulate(gen_directed_ring(4), SL, 0.25, 100.0, 100 / 256, 4000.0, HistorySpec.random_constant(4, 2, 1))
    tt, env = history_norm(tr.t, sync_error(tr), 100.0)
    f = fit_decay(tt, env, tau=100.0, floor=1e-11)
    assert f.eta == pytest.approx(-math.log(0.25 / 0.5) / 100.0, rel=0.10)


def test_step_halving_stable_run():
    net = gen_directed_ring(4)
    h = HistorySpec.random_constant(4, 2, 1)
    a = sync_error(simulate(net, SL, 0.25, 100.0, 100 / 256, 1000.0, h))[-1]
    b = sync_error(simulate(net, SL, 0.25, 100.0, 100 / 512, 1000.0, h))[-1]
    assert abs(a - b) < 0.05 * b
