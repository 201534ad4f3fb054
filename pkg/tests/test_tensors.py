import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from viscofrac import tensors as T

finite = st.floats(-0.5, 0.5, allow_nan=False)
grads = arrays(float, (2, 2), elements=finite)
voigt2 = arrays(float, (3,), elements=st.floats(-10, 10, allow_nan=False))


def test_green_lagrange_zero():
    assert np.all(T.green_lagrange(np.zeros((2, 2))) == 0.0)


def test_green_lagrange_uniaxial():
    E = T.green_lagrange(np.diag([0.1, 0.0]))
    np.testing.assert_allclose(E, [0.105, 0.0, 0.0], atol=1e-15)


def test_right_cauchy_green_1d():
    np.testing.assert_allclose(T.right_cauchy_green(np.array([0.105])), [1.21])
    np.testing.assert_allclose(T.right_cauchy_green(np.zeros(3)), [1.0, 1.0, 0.0])


def test_fbar_layouts():
    np.testing.assert_array_equal(T.build_Fbar(np.eye(2)),
                                  [[1, 0, 0, 0], [0, 0, 0, 1], [0, 1, 1, 0]])
    np.testing.assert_array_equal(T.build_Fbar(np.diag([2.0, 3.0])),
                                  [[2, 0, 0, 0], [0, 0, 0, 3], [0, 2, 3, 0]])


def test_sbar_layouts():
    np.testing.assert_array_equal(T.build_Sbar(np.array([1.0, 2.0, 3.0])),
                                  [[1, 3, 0, 0], [3, 2, 0, 0], [0, 0, 1, 3], [0, 0, 3, 2]])
    np.testing.assert_array_equal(T.build_Sbar(np.array([1.0, 1.0, 0.0])), np.eye(4))


def test_builders_reject_wrong_shapes():
    with pytest.raises(ValueError):
        T.build_Fbar(np.eye(3))
    with pytest.raises(ValueError):
        T.build_Sbar(np.ones(2))


@given(grads)
def test_green_lagrange_matches_full_matrix_formula(g):
    F = np.eye(2) + g
    full = 0.5 * (F.T @ F - np.eye(2))
    np.testing.assert_allclose(T.voigt_to_matrix(T.green_lagrange(g)), full, atol=1e-14)


@given(grads, arrays(float, (2, 2), elements=st.floats(-1e-3, 1e-3, allow_nan=False)))
def test_fbar_is_the_strain_variation(g, dg):
    # δE = F̄ · δ(∇u) with gradients ordered [u1,1, u1,2, u2,1, u2,2]
    F = np.eye(2) + g
    dE = T.green_lagrange(g + dg) - T.green_lagrange(g)
    lin = T.build_Fbar(F) @ dg.reshape(-1)
    dE_eng = dE * np.array([1.0, 1.0, 2.0])
    np.testing.assert_allclose(dE_eng, lin, atol=5e-6)


@given(voigt2)
def test_voigt_round_trip(v):
    np.testing.assert_array_equal(T.matrix_to_voigt(T.voigt_to_matrix(v)), v)


@given(voigt2)
def test_sbar_symmetric(s):
    Sb = T.build_Sbar(s)
    np.testing.assert_array_equal(Sb, Sb.T)


@given(st.floats(-1.0, 1.0), st.floats(1e-7, 1e-4))
def test_infinitesimal_rotation_is_second_order(sign, eps):
    w = eps * (1.0 if sign >= 0 else -1.0)
    g = np.array([[0.0, -w], [w, 0.0]])
    E = T.green_lagrange(g)
    assert np.max(np.abs(E)) <= w * w


def test_complex_inputs_match_real(rng):
    g = rng.normal(scale=0.1, size=(5, 2, 2))
    Er = T.green_lagrange(g)
    Ec = T.green_lagrange(g.astype(complex))
    np.testing.assert_array_equal(Ec.real, Er)
    C = T.right_cauchy_green(Er)
    np.testing.assert_allclose(T.sym_inv(C.astype(complex)).real, T.sym_inv(C), rtol=1e-14)


def test_sym_inv_and_det(rng):
    M = rng.normal(size=(20, 2, 2))
    C = M @ np.swapaxes(M, 1, 2) + np.eye(2)
    v = T.matrix_to_voigt(C)
    np.testing.assert_allclose(T.voigt_to_matrix(T.sym_inv(v)), np.linalg.inv(C), rtol=1e-12)
    np.testing.assert_allclose(T.sym_det(v), np.linalg.det(C), rtol=1e-12)


def test_contractions_match_full_tensors(rng):
    # random fourth-order tensor with minor and major symmetries
    A = rng.normal(size=(3, 3))
    A = A + A.T
    pairs = T.VOIGT_PAIRS[2]
    idx = {(i, j): k for k, (i, j) in enumerate(pairs)}
    idx.update({(j, i): k for (i, j), k in list(idx.items())})
    A4 = np.array([[[[A[idx[i, j], idx[k, l]] for l in range(2)] for k in range(2)]
                    for j in range(2)] for i in range(2)])
    E = rng.normal(size=3)
    Em = T.voigt_to_matrix(E)
    np.testing.assert_allclose(T.voigt_to_matrix(T.contract4(A, E)),
                               np.einsum("ijkl,kl->ij", A4, Em), rtol=1e-12)
    np.testing.assert_allclose(T.quadratic4(A, E), np.einsum("ij,ijkl,kl", Em, A4, Em),
                               rtol=1e-12)
    np.testing.assert_allclose(T.ddot(E, E), np.sum(Em * Em), rtol=1e-12)


def test_unsupported_dimensions():
    with pytest.raises(ValueError):
        T.voigt_size(3)
    with pytest.raises(ValueError):
        T.voigt_dim(6)
