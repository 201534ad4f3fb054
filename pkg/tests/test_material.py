import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscofrac import tensors as T
from viscofrac.fractional import StrainHistory, kernel_dyads, memory_potential, r_term
from viscofrac.material import (InversionError, MaterialError, MaterialParams, PointContext,
                                PointState, assemble_A, check_memory_tensor, dA_contract,
                                degradation, gc_from_toughness, hyperelastic_stress,
                                inverse_lambda, lame, memory_energy_batch, neo_hookean_energy,
                                neo_hookean_stress, plane_stress_lambda, r_term_batch,
                                second_piola, stress_batch, tangent_batch, tangent_stiffness)

G2_FIT = dict(degradation="G2", deg_a=3.8, deg_b=1.5, deg_c=1.15)


def params(**kw):
    base = dict(E_Y=1.0e6, nu=0.3, p=2.0e5, alpha=0.5, rho=1.0, plane="strain")
    base.update(kw)
    return MaterialParams(**base)


def random_history(rng, n=12, nv=3, scale=0.02, dt=1e-3):
    samples = np.cumsum(rng.normal(scale=scale / np.sqrt(n), size=(n + 1, nv)), axis=0)
    samples[0] = 0.0
    return StrainHistory(dt, nv, samples)


def random_state(rng, nv=3, phi=None, grad=True):
    h = random_history(rng, nv=nv)
    g = rng.normal(scale=10.0, size=2) if (grad and nv == 3) else None
    return PointState(h.current, h, float(rng.uniform(0, 0.6) if phi is None else phi), g)


# -- hyperelasticity --------------------------------------------------------

def test_neo_hookean_energy_examples():
    assert neo_hookean_energy(np.array([1.0, 1.0, 0.0]), 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    psi = neo_hookean_energy(np.array([1.21, 1.0, 0.0]), 1.0, 1.0)
    assert psi == pytest.approx(0.01423, abs=5e-6)
    exact = 0.5 * 0.21 - math.log(1.1) + 0.5 * math.log(1.1) ** 2
    assert psi == pytest.approx(exact, rel=1e-14)


def test_neo_hookean_stress_examples():
    np.testing.assert_allclose(neo_hookean_stress(np.array([1.0, 1.0, 0.0]), 1.0, 1.0), 0.0,
                               atol=1e-15)
    S = neo_hookean_stress(np.array([1.21, 1.0, 0.0]), 1.0, 1.0)
    assert S[0] == pytest.approx(1 - 1 / 1.21 + math.log(1.1) / 1.21, rel=1e-14)


def test_neo_hookean_stress_is_twice_energy_gradient(rng):
    for _ in range(20):
        M = rng.normal(scale=0.3, size=(2, 2)) + np.eye(2)
        C = T.matrix_to_voigt(M.T @ M)
        S = neo_hookean_stress(C, 0.7, 1.3)
        h = 1e-6
        grad = np.empty(3)
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            grad[k] = (neo_hookean_energy(C + d, 0.7, 1.3) - neo_hookean_energy(C - d, 0.7, 1.3)) / (2 * h)
        # off-diagonal Voigt slot stands for both C12 and C21
        np.testing.assert_allclose(S, [2 * grad[0], 2 * grad[1], grad[2]], rtol=1e-6)


def test_inverted_configuration_rejected():
    with pytest.raises(InversionError):
        neo_hookean_stress(np.array([1.0, 1.0, 1.5]), 1.0, 1.0)


def test_linear_spring_only_in_1d():
    p = params(plane="uniaxial", hyperelastic="linear")
    np.testing.assert_allclose(hyperelastic_stress(np.array([0.01]), p), [1e4])
    with pytest.raises(MaterialError):
        params(hyperelastic="linear")


def test_plane_stress_reduction():
    mu, lam = lame(2.0, 0.25)
    p = params(E_Y=2.0, nu=0.25, plane="stress")
    assert p.lam == pytest.approx(plane_stress_lambda(mu, lam))
    # small-strain uniaxial stress response recovers Young's modulus
    D = tangent_stiffness(PointState(np.zeros(3), StrainHistory(1.0, 3)), p.with_(p=1e-12))
    E_app = D[0, 0] - D[0, 1] ** 2 / D[1, 1]
    assert E_app == pytest.approx(2.0, rel=1e-9)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.0), dict(p=-1.0), dict(gamma=0.0),
                                dict(plane="3d"), dict(A_choice="A3"), dict(degradation="G3")])
def test_invalid_parameters(kw):
    with pytest.raises(MaterialError):
        params(**kw)


# -- degradation and damage viscosity -------------------------------------

@pytest.mark.parametrize("kind", [{}, G2_FIT])
def test_degradation_contract(kind):
    p = params(**kind)
    phi = np.linspace(0, 1, 2001)
    G = degradation(phi, p)[0]
    assert G[0] == pytest.approx(1.0, abs=1e-15)
    assert G[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.all(G[:-1] > 0)


def g2_end_slopes(p, eps_values):
    out = []
    for eps in eps_values:
        x, h = 1.0 - eps, eps * 1e-3
        out.append(abs(degradation(x + h, p)[0] - degradation(x - h, p)[0]) / (2 * h))
    return np.array(out)


def test_g2_value_and_flat_end():
    p = params(**G2_FIT)
    assert degradation(0.5, p)[0] == pytest.approx(0.668, abs=5e-4)
    assert degradation(1.0, p)[1] == 0.0
    eps = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    slopes = g2_end_slopes(p, eps)
    assert np.all(np.diff(slopes) < 0)
    # the slope vanishes like ε^(d-1)
    np.testing.assert_allclose(slopes / slopes[0], (eps / eps[0]) ** (p.deg_d - 1), rtol=0.02)


@pytest.mark.parametrize("kind", [{}, G2_FIT])
def test_degradation_derivatives(kind):
    p = params(**kind)
    phi = np.linspace(0.05, 0.95, 19)
    G, dG, ddG = degradation(phi, p)
    h = 1e-6
    fd1 = (degradation(phi + h, p)[0] - degradation(phi - h, p)[0]) / (2 * h)
    fd2 = (degradation(phi + h, p)[1] - degradation(phi - h, p)[1]) / (2 * h)
    np.testing.assert_allclose(dG, fd1, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(ddG, fd2, rtol=1e-5, atol=1e-6)


def test_degradation_rejects_out_of_range():
    with pytest.raises(MaterialError):
        degradation(1.1, params())


def test_gc_from_toughness():
    assert gc_from_toughness(0.89e6, 0.45, 0.8e8) == pytest.approx(7.896e3, rel=1e-3)
    assert gc_from_toughness(2.0, 0.0, 4.0) == 1.0
    assert params(f_t=0.89e6, nu=0.45, E_Y=0.8e8).gc_value == pytest.approx(7.8957e3, rel=1e-4)


def test_inverse_lambda():
    p = params(c_lambda=1.0, zeta=1.0, delta_tilde=1e-4)
    assert inverse_lambda(0.0, p) == pytest.approx(0.99990, abs=1e-5)
    assert inverse_lambda(1.0, p) == pytest.approx(1.0 / 1e-4)


# -- memory tensor ---------------------------------------------------------

def test_A1_at_identity_is_isotropic():
    p = params()
    A = assemble_A(np.array([1.0, 1.0, 0.0]), p)
    lb, mb = p.lam_bar, p.mu_bar
    np.testing.assert_allclose(A, [[lb + 2 * mb, lb, 0], [lb, lb + 2 * mb, 0], [0, 0, mb]],
                               rtol=1e-14)


def test_A2_and_scalar():
    A = assemble_A(np.array([1.1, 0.9, 0.05]), params(A_choice="A2"))
    expected = np.zeros((3, 3))
    expected[0, 0] = 2.0e5
    np.testing.assert_array_equal(A, expected)
    np.testing.assert_array_equal(assemble_A(np.array([1.2]), params(A_choice="scalar",
                                                                     plane="uniaxial")), [[2.0e5]])


def test_A1_loses_definiteness_under_large_dilation():
    p = params(nu=0.45)
    check_memory_tensor(np.array([0.05, 0.05, 0.0]), p)
    with pytest.raises(MaterialError):
        check_memory_tensor(np.array([20.0, 20.0, 0.0]), p)


def test_dA_contract_matches_analytic_derivative(rng):
    p = params()
    w = np.array([1.0, 1.0, 2.0])
    for _ in range(10):
        E = rng.normal(scale=0.05, size=3)
        C = T.right_cauchy_green(E)
        Ci = T.sym_inv(C)
        ds = rng.normal(size=(4, 3))
        cs = rng.uniform(0.1, 1.0, size=4)
        W = sum(c * np.outer(w * d, w * d) for c, d in zip(cs, ds))
        # X = -4 λ̄ C⁻¹ M C⁻¹ - 2 λ̄ (Σ c d:d) C⁻¹ with M = Σ c (C⁻¹:d) d
        Cim = T.voigt_to_matrix(Ci)
        M = sum(c * T.ddot(Ci, d) * T.voigt_to_matrix(d) for c, d in zip(cs, ds))
        w2 = sum(c * T.ddot(d, d) for c, d in zip(cs, ds))
        X = -4 * p.lam_bar * Cim @ M @ Cim - 2 * p.lam_bar * w2 * Cim
        np.testing.assert_allclose(dA_contract(E[None], W[None], p)[0], T.matrix_to_voigt(X),
                                   rtol=1e-9, atol=1e-9 * np.abs(X).max())


# -- total stress ----------------------------------------------------------

def test_undeformed_undamaged_zero_history():
    h = StrainHistory(1e-3, 3, np.zeros((5, 3)))
    np.testing.assert_array_equal(second_piola(PointState(np.zeros(3), h), params()), 0.0)


def test_fully_damaged_point_carries_no_stress(rng):
    st_ = random_state(rng, phi=1.0, grad=False)
    for mode in ("partial", "complete"):
        np.testing.assert_allclose(second_piola(st_, params(), mode), 0.0, atol=1e-20)


def test_lone_sample_reduces_to_neo_hookean():
    E = np.array([0.01, -0.004, 0.002])
    h = StrainHistory(1e-3, 3, E[None])
    p = params()
    for mode in ("partial", "complete"):
        np.testing.assert_allclose(second_piola(PointState(E, h), p, mode),
                                   hyperelastic_stress(E, p), rtol=1e-14)


def test_memory_stress_matches_g1_derivative(rng):
    # undamaged, A2: S = S_h + A:D^αE with D^α from the G1 sum
    from viscofrac.fractional import caputo_g1
    p = params(A_choice="A2")
    st_ = random_state(rng, phi=0.0, grad=False)
    expected = hyperelastic_stress(st_.E, p) + T.contract4(assemble_A(np.array([1.0, 1.0, 0.0]), p),
                                                           caputo_g1(st_.history, p.alpha))
    np.testing.assert_allclose(second_piola(st_, p), expected, rtol=1e-12)


@pytest.mark.parametrize("choice", ["A2", "scalar"])
def test_partial_equals_complete_for_constant_tensor(rng, choice):
    p = params(A_choice=choice)
    st_ = random_state(rng)
    np.testing.assert_array_equal(second_piola(st_, p, "partial"), second_piola(st_, p, "complete"))


def test_complete_differs_for_A1(rng):
    st_ = random_state(rng, grad=False)
    p = params()
    assert not np.allclose(second_piola(st_, p, "partial"), second_piola(st_, p, "complete"),
                           rtol=1e-10, atol=0)


def test_complex_and_real_stress_agree(rng):
    st_ = random_state(rng)
    p = params(b_tilde=3.0)
    E = st_.E[None]
    from viscofrac.material import _point_context
    _, ctx = _point_context(st_, p)
    Sr = stress_batch(E, ctx, p)
    Sc = stress_batch(E.astype(complex), ctx, p)
    np.testing.assert_allclose(Sc.real, Sr, rtol=1e-13)
    assert np.all(Sc.imag == 0)


def test_memory_energy_and_r_match_single_point_routes(rng):
    p = params()
    for _ in range(5):
        h = random_history(rng)
        A = assemble_A(T.right_cauchy_green(h.current), p)
        past = h.samples[None, :-1]
        assert memory_energy_batch(h.current[None], past, h.dt, p)[0] == pytest.approx(
            memory_potential(h, A, p.alpha), rel=1e-12)
        assert r_term_batch(h.current[None], past, h.dt, p, 0.8)[0] == pytest.approx(
            r_term(h, p.alpha, 0.8, A), rel=1e-12)


# -- tangent ---------------------------------------------------------------

def test_complex_step_scalar_sanity():
    h = 1e-150
    assert np.imag((2.0 + 1j * h) ** 3) / h == 12.0


def test_tangent_at_identity_is_classical():
    p = params(p=1e-30)
    D = tangent_stiffness(PointState(np.zeros(3), StrainHistory(1.0, 3)), p)
    mu, lam = p.mu, p.lam
    ref = np.array([[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])
    np.testing.assert_allclose(D, ref, rtol=1e-10, atol=1e-10 * ref.max())


def central_difference(st_, p, mode, h=1e-6):
    w = np.array([1.0, 1.0, 2.0])[:len(st_.E)]
    cols = []
    for q in range(len(st_.E)):
        out = []
        for s in (1, -1):
            E = st_.E.copy()
            E[q] += s * h / w[q]
            samples = st_.history.samples.copy()
            samples[-1] = E
            hist = StrainHistory(st_.history.dt, len(E), samples)
            out.append(second_piola(PointState(E, hist, st_.phi, st_.grad_phi), p, mode))
        cols.append((out[0] - out[1]) / (2 * h))
    return np.array(cols).T


@pytest.mark.parametrize("mode", ["partial", "complete"])
@pytest.mark.parametrize("plane", ["strain", "stress"])
def test_tangent_matches_finite_differences(rng, mode, plane):
    p = params(plane=plane, b_tilde=5.0)
    for _ in range(5):
        st_ = random_state(rng)
        D = tangent_stiffness(st_, p, mode, symmetrize=False)
        fd = central_difference(st_, p, mode)
        np.testing.assert_allclose(D, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


def test_tangent_1d(rng):
    p = params(plane="uniaxial")
    st_ = random_state(rng, nv=1, grad=False)
    D = tangent_stiffness(st_, p)
    np.testing.assert_allclose(D, central_difference(st_, p, "partial"), rtol=1e-6)


def test_tangent_insensitive_to_step(rng):
    p = params()
    st_ = random_state(rng)
    ref = tangent_stiffness(st_, p, h=1e-150)
    for h in (1e-100, 1e-200, 1e-300):
        np.testing.assert_allclose(tangent_stiffness(st_, p, h=h), ref, rtol=1e-12)


@given(st.floats(0.0, 0.99), st.integers(0, 2 ** 31))
def test_neo_hookean_tangent_symmetric(phi, seed):
    rng = np.random.default_rng(seed)
    st_ = random_state(rng, phi=phi, grad=False)
    D = tangent_stiffness(st_, params(p=1e-12), symmetrize=False)
    np.testing.assert_allclose(D, D.T, rtol=1e-8, atol=1e-8 * np.abs(D).max())


def test_point_state_validation():
    h = StrainHistory(1e-3, 3, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        second_piola(PointState(np.ones(3) * 0.01, h), params())
    with pytest.raises(MaterialError):
        second_piola(PointState(np.zeros(3), h, phi=1.5), params())
