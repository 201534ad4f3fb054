import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from viscofrac.fem import Discretization, bar_mesh, rectangle_mesh
from viscofrac.material import MaterialParams
from viscofrac.solvers import (ConvergenceError, NewmarkParams, NewtonConfig, PointLoad,
                               Simulation, SolverError, StepLoads, irreversibility_clamp,
                               newmark_accel, newmark_velocity, newton_solve, staggered_step)


# -- Newmark ---------------------------------------------------------------

def test_newmark_constants():
    nm = NewmarkParams(1e-4, 0.25)
    assert nm.a1 == pytest.approx(4e8)
    assert nm.a2 == pytest.approx(4e4)
    assert nm.a3 == pytest.approx(1.0)
    assert newmark_accel(np.ones(3), np.ones(3), np.zeros(3), np.zeros(3), nm).tolist() == [0, 0, 0]
    with pytest.raises(ValueError):
        NewmarkParams(0.0)


def test_newmark_reproduces_constant_acceleration():
    # integrate ü = g with the scheme; the average-acceleration rule is exact here
    g, dt = -9.81, 0.01
    nm = NewmarkParams(dt)
    u, v, a = np.array([2.0]), np.array([3.0]), np.array([g])
    for n in range(1, 11):
        u_prev = u
        u = u + (g + nm.a2 * v + nm.a3 * a) / nm.a1
        a_next = newmark_accel(u, u_prev, v, a, nm)
        v = newmark_velocity(v, a, a_next, nm)
        a = a_next
        t = n * dt
        assert u[0] == pytest.approx(2.0 + 3.0 * t + 0.5 * g * t * t, rel=1e-10)
        assert v[0] == pytest.approx(3.0 + g * t, rel=1e-10)
        assert a[0] == pytest.approx(g, rel=1e-10)


# -- Newton ----------------------------------------------------------------

def test_newton_linear_problem(rng):
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=4)
    seen = []
    x, its = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(4),
                          on_iteration=lambda i, n: seen.append(n))
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-12)
    # the first correction is exact; the second only confirms it
    assert its == 2 and seen[1] <= 1e-12 * seen[0]


def test_newton_scalar_square_root():
    x, its = newton_solve(lambda x: x * x - 4.0, lambda x: np.array([[2.0 * x]]), 3.0,
                          NewtonConfig(1e-12, 25))
    assert x == pytest.approx(2.0, abs=1e-12)
    assert its <= 6


def test_newton_residual_small_at_solution(rng):
    f = lambda x: np.array([x[0] ** 3 + x[1] - 1.0, x[1] ** 3 - x[0] + 1.0])
    J = lambda x: np.array([[3 * x[0] ** 2, 1.0], [-1.0, 3 * x[1] ** 2]])
    cfg = NewtonConfig(1e-10, 30)
    x, _ = newton_solve(f, J, np.array([0.5, 0.5]), cfg)
    assert np.linalg.norm(f(x)) <= np.linalg.norm(J(x)) * cfg.tol


def test_newton_failures():
    with pytest.raises(ConvergenceError):
        newton_solve(lambda x: x * x + 1.0, lambda x: np.array([[2.0 * x]]), 0.5, NewtonConfig(1e-12, 8))
    with pytest.raises(ConvergenceError):
        newton_solve(lambda x: np.ones(2), lambda x: np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        NewtonConfig(tol=0.0)


# -- clamp -----------------------------------------------------------------

def test_clamp_examples():
    assert irreversibility_clamp(0.3, 0.5) == 0.5
    assert irreversibility_clamp(0.6, 0.5) == 0.6
    assert irreversibility_clamp(1.2, 0.5) == 1.0


@given(st.lists(st.floats(-1, 2), min_size=1, max_size=20), st.floats(0, 1))
def test_clamp_never_decreases(pred, base):
    out = irreversibility_clamp(np.array(pred), np.full(len(pred), base))
    assert np.all(out >= base) and np.all(out <= 1.0)


# -- stepper ---------------------------------------------------------------

def rod_params(**kw):
    base = dict(E_Y=1.0e3, nu=0.3, p=1.0e2, alpha=0.5, rho=1.0, plane="uniaxial", gc=1.0,
                gamma=0.1, c_lambda=10.0, theta0=1.0)
    base.update(kw)
    return MaterialParams(**base)


def fixed_left(model, dofs=None):
    dofs = np.array([0]) if dofs is None else dofs
    return lambda t: StepLoads(dofs, np.zeros(len(dofs)))


@pytest.mark.parametrize("mesh,plane", [(bar_mesh(1.0, 5), "uniaxial"),
                                        (rectangle_mesh(1.0, 0.2, 4, 2, "quad4"), "stress")])
def test_quiescent_state_is_a_fixed_point(mesh, plane):
    sim = Simulation(Discretization(mesh), rod_params(plane=plane), 1e-3, damage=True,
                     diagnostics=True)
    dofs = mesh.node_set("left") * mesh.dim
    for _ in range(100):
        info = sim.staggered_step(fixed_left(sim.model, dofs))
        assert np.linalg.norm(sim.state.u) <= 1e-12
    assert np.all(sim.state.phi == 0.0)
    assert np.all(sim.psi_m == 0.0) and np.all(sim.r_term == 0.0)
    assert info.t == pytest.approx(0.1)


def _nh_1d(E, p):
    C = 1.0 + 2.0 * E
    lnJ = 0.5 * math.log(C)
    psi = 0.5 * p.mu * (C - 1.0) - p.mu * lnJ + 0.5 * p.lam * lnJ ** 2
    return psi, p.mu * (1.0 - 1.0 / C) + p.lam * lnJ / C


def test_single_element_matches_independent_coupled_solve():
    p = rod_params(A_choice="A2")
    L, area, P, dt = 1.0, 0.5, 30.0, 0.1
    sim = Simulation(Discretization(bar_mesh(L, 1), area), p, dt, quasi_static=True, damage=True,
                     motion_newton=NewtonConfig(1e-13, 30), damage_newton=NewtonConfig(1e-13, 30))
    loads = lambda t: StepLoads(np.array([0]), np.zeros(1), point_loads=[PointLoad(1, P)])
    staggered_step(sim, loads)
    staggered_step(sim, loads)

    a = p.alpha
    mem = p.p * dt ** (-a)

    def tip_equilibrium(G, tail):
        def f(u):
            F = 1.0 + u / L
            E = 0.5 * (F * F - 1.0)
            return area * F * G * (_nh_1d(E, p)[1] + mem * (E + tail)) - P
        u = optimize.brentq(f, 0.0, 0.5 * L, xtol=1e-15, rtol=1e-15)
        return u, 0.5 * ((1 + u / L) ** 2 - 1.0)

    # step 1: no strain energy yet, so no damage
    u1, E1 = tip_equilibrium(1.0, 0.0)
    # step 2: uniform damage driven by ψ_h(E1) + ψ̃ₘ(E1) from a two-sample history
    psi_m = p.p * E1 ** 2 * dt ** (-a) / (2 * math.gamma(1 - a)) * 2.0 / (2.0 - a)
    drive_psi = _nh_1d(E1, p)[0] + psi_m
    inv_lam = p.c_lambda / (1.0 + p.delta_tilde)
    react = dt * p.gc_value * inv_lam / (p.gamma * p.theta0)
    drive = dt * inv_lam / p.theta0
    phi = optimize.brentq(lambda q: (1 + react) * q - 2 * drive * (1 - q) * drive_psi, 0.0, 1.0,
                          xtol=1e-15)
    u2, _ = tip_equilibrium((1 - phi) ** 2, -a * E1)

    np.testing.assert_allclose(sim.state.phi, [phi, phi], rtol=1e-6)
    assert sim.state.u[1] == pytest.approx(u2, rel=1e-6)
    assert phi > 1e-3 and u2 > u1


def load_unload(model, peak, t_turn):
    def loads(t):
        v = peak * (t / t_turn if t <= t_turn else max(2.0 - t / t_turn, 0.0))
        return StepLoads(np.array([0, model.n_nodes - 1]), np.array([0.0, v]))
    return loads


@pytest.mark.parametrize("clamp", [True, False])
def test_clamp_controls_healing(clamp):
    model = Discretization(bar_mesh(1.0, 4), 1.0)
    sim = Simulation(model, rod_params(), 0.05, quasi_static=True, damage=True, clamp=clamp)
    loads = load_unload(model, 0.08, 1.0)
    drops, peak = [], 0.0
    for _ in range(40):
        before = sim.state.phi.copy()
        staggered_step(sim, loads)
        drops.append(np.min(sim.state.phi - before))
        peak = max(peak, sim.state.phi.max())
    assert peak > 0.02
    if clamp:
        assert min(drops) >= 0.0
    else:
        assert min(drops) < 0.0
    assert np.all((sim.state.phi >= 0) & (sim.state.phi <= 1))


def test_free_vibration_peaks_decay():
    model = Discretization(bar_mesh(1.0, 10), 1.0)
    sim = Simulation(model, rod_params(p=50.0), 2e-3)
    sim.state.v = np.linspace(0.0, 0.5, model.n_nodes)
    tip = []
    for _ in range(600):
        staggered_step(sim, fixed_left(model))
        tip.append(sim.state.u[-1])
    tip = np.array(tip)
    peaks = [tip[i] for i in range(1, len(tip) - 1) if tip[i - 1] < tip[i] >= tip[i + 1] and tip[i] > 0]
    assert len(peaks) >= 3
    assert all(b <= a for a, b in zip(peaks, peaks[1:]))
    assert peaks[-1] < 0.9 * peaks[0]


def test_motion_newton_converges_quadratically():
    mesh = rectangle_mesh(1.0, 0.5, 2, 1, "quad4")
    model = Discretization(mesh)
    p = MaterialParams(E_Y=1.0, nu=0.3, p=1e-6, alpha=0.5, plane="strain")
    sim = Simulation(model, p, 1.0, quasi_static=True, motion_newton=NewtonConfig(1e-14, 30))
    f = np.zeros(model.n_dofs)
    f[mesh.node_set("right") * 2] = 0.15
    fixed = np.concatenate([mesh.node_set("left") * 2, [mesh.node_set("left_anchor")[0] * 2 + 1]])
    sim.staggered_step(lambda t: StepLoads(fixed, np.zeros(len(fixed)), f_ext=f))
    e = np.array(sim.motion_increments)
    assert len(e) >= 4
    k = np.flatnonzero(e > 1e-9)[-1]
    # observed order from the last three increments above round-off
    order = math.log(e[k] / e[k - 1]) / math.log(e[k - 1] / e[k - 2])
    assert order > 1.8
    assert e[k + 1] <= e[k] ** 2 * 10 * e[k - 1] / e[k - 2] ** 2 + 1e-14


def test_inversion_exhausts_halvings():
    model = Discretization(bar_mesh(1.0, 2), 1.0)
    sim = Simulation(model, rod_params(), 0.1, quasi_static=True, max_halvings=3)
    crush = lambda t: StepLoads(np.array([0, 2]), np.array([0.0, -1.5]))
    with pytest.raises(SolverError):
        sim.staggered_step(crush)
    assert sim.halvings == 3
    assert sim.state.t == 0.0 and np.all(sim.state.u == 0.0)
    assert sim.dt == pytest.approx(0.1 / 8)


def test_rejected_step_is_retried_with_half_step():
    model = Discretization(bar_mesh(1.0, 2), 1.0)
    sim = Simulation(model, rod_params(), 0.1)
    calls = []

    def flaky(t):
        calls.append(t)
        if len(calls) == 2:
            raise FloatingPointError("simulated overflow")
        return StepLoads(np.array([0]), np.zeros(1), point_loads=[PointLoad(2, 1.0)])

    sim.staggered_step(flaky)
    sim.staggered_step(flaky)
    assert calls[1] == pytest.approx(0.2) and calls[2] == pytest.approx(0.15)
    assert sim.state.t == pytest.approx(0.15)
    assert sim.bank.dt == pytest.approx(0.05) and sim.bank.length == 4


def test_initial_damage_honoured():
    model = Discretization(bar_mesh(1.0, 3))
    sim = Simulation(model, rod_params(), 0.1, phi0=0.25)
    assert np.all(sim.state.phi == 0.25)
    assert np.all(Simulation(model, rod_params(), 0.1).state.phi == 0.0)
