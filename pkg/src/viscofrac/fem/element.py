"""Element-level operators written with explicit B̂, F̄, S̄ matrices.

These follow the matrix layouts of the weak form literally and work on one
element at a time.  The vectorised :class:`~viscofrac.fem.model.Discretization`
is the production path; these functions document the layouts and serve as
a reference for it.
"""
from __future__ import annotations

import numpy as np

from .. import tensors as T
from .elements import element_type


def shape_matrices(kind: str, X: np.ndarray, xi) -> tuple:
    """Shape-function matrices at reference point ``xi``.

    Returns ``(N, B, Nhat, Bhat, detJ)`` with N (nen,), B (d, nen) global
    derivatives, N̂ (d, d·nen) and B̂ (d², d·nen), dofs interleaved per node.
    For 2D the rows of B̂ are [N,x 0; N,y 0; 0 N,x; 0 N,y].
    """
    et = element_type(kind)
    X = np.asarray(X, dtype=float).reshape(et.n_nodes, et.dim)
    p = np.atleast_2d(np.asarray(xi, dtype=float))
    N = et.shape(p)[0]
    dN = et.dshape(p)[0]                      # (nen, d) wrt reference coords
    J = X.T @ dN                              # dX/dxi
    detJ = np.linalg.det(J)
    if detJ <= 0:
        raise ValueError("singular or inverted isoparametric map")
    B = np.linalg.solve(J.T, dN.T)            # (d, nen) global derivatives
    d, nen = et.dim, et.n_nodes
    Nhat = np.zeros((d, d * nen))
    Bhat = np.zeros((d * d, d * nen))
    for a in range(nen):
        for i in range(d):
            Nhat[i, d * a + i] = N[a]
            for J_ in range(d):
                Bhat[i * d + J_, d * a + i] = B[J_, a]
    return N, B, Nhat, Bhat, detJ


def element_strains(kind: str, X: np.ndarray, u: np.ndarray):
    """Deformation gradients and Voigt strains at the element quadrature points."""
    et = element_type(kind)
    Fs, Es = [], []
    for xi in et.points:
        _, _, _, Bhat, _ = shape_matrices(kind, X, xi)
        grad = (Bhat @ u).reshape(et.dim, et.dim)
        Fs.append(np.eye(et.dim) + grad)
        Es.append(T.green_lagrange(grad))
    return np.array(Fs), np.array(Es)


def _Fbar(F):
    return F.reshape(1, 1) if F.shape == (1, 1) else T.build_Fbar(F)


def _Sbar(S):
    return S.reshape(1, 1) if S.shape == (1,) else T.build_Sbar(S)


def element_internal_force(kind: str, X, u, S_qp, thickness: float = 1.0) -> np.ndarray:
    """∫ B̂ᵀ F̄ᵀ s dΩ."""
    et = element_type(kind)
    F_qp, _ = element_strains(kind, X, u)
    f = np.zeros(et.dim * et.n_nodes)
    for g, xi in enumerate(et.points):
        _, _, _, Bhat, detJ = shape_matrices(kind, X, xi)
        f += et.weights[g] * detJ * thickness * Bhat.T @ _Fbar(F_qp[g]).T @ S_qp[g]
    return f


def element_mass(kind: str, X, thickness: float = 1.0) -> np.ndarray:
    """∫ N̂ᵀ N̂ dΩ."""
    et = element_type(kind)
    M = np.zeros((et.dim * et.n_nodes,) * 2)
    for g, xi in enumerate(et.points):
        _, _, Nhat, _, detJ = shape_matrices(kind, X, xi)
        M += et.weights[g] * detJ * thickness * Nhat.T @ Nhat
    return M


def motion_residual(kind: str, X, u, S_qp, rho: float, accel=None, body=None,
                    f_ext=None, thickness: float = 1.0) -> np.ndarray:
    """Element residual M a + (1/ρ)∫B̂ᵀF̄ᵀs dΩ - ∫N̂ᵀ b dΩ - (1/ρ) f_ext.

    ``accel`` is the nodal Newmark acceleration a_{n+1} (None for
    quasi-static), ``body`` a uniform body force per unit mass and
    ``f_ext`` the consistent nodal boundary load.
    """
    et = element_type(kind)
    M = element_mass(kind, X, thickness)
    r = element_internal_force(kind, X, u, S_qp, thickness) / rho
    if accel is not None:
        r = r + M @ accel
    if body is not None:
        r = r - M @ np.tile(np.asarray(body, dtype=float), et.n_nodes)
    if f_ext is not None:
        r = r - np.asarray(f_ext) / rho
    return r


def motion_jacobian(kind: str, X, u, S_qp, D_qp, rho: float, a1: float = 0.0,
                    thickness: float = 1.0) -> np.ndarray:
    """a₁M + (1/ρ)∫B̂ᵀS̄B̂ dΩ + (1/ρ)∫B̂ᵀF̄ᵀ𝐃F̄B̂ dΩ."""
    et = element_type(kind)
    F_qp, _ = element_strains(kind, X, u)
    K = a1 * element_mass(kind, X, thickness)
    for g, xi in enumerate(et.points):
        _, _, _, Bhat, detJ = shape_matrices(kind, X, xi)
        w = et.weights[g] * detJ * thickness / rho
        Fb = _Fbar(F_qp[g])
        K += w * (Bhat.T @ _Sbar(S_qp[g]) @ Bhat + Bhat.T @ Fb.T @ D_qp[g] @ Fb @ Bhat)
    return K


def _qp_coef(coef: dict, key: str, g: int) -> float:
    v = np.asarray(coef.get(key, 0.0), dtype=float)
    return float(v) if v.ndim == 0 else float(v[g])


def damage_residual(kind: str, X, phi, phi_n, Cinv_qp, driving_qp, coef: dict, dG,
                    thickness: float = 1.0) -> np.ndarray:
    """Element residual of the backward-Euler damage update.

    Per quadrature point: N [(1 + react) φ - φₙ + src + drive G'(φ) ψ]
    + diff ∇N · C⁻¹∇φ, with ψ = ψ_h + ψ̃ₘ and C⁻¹, ψ frozen at tₙ.
    ``coef`` holds scalars or per-qp arrays under the keys of
    :meth:`Discretization.damage_system`.
    """
    et = element_type(kind)
    phi = np.asarray(phi, dtype=float)
    phi_n = np.asarray(phi_n, dtype=float)
    r = np.zeros(et.n_nodes)
    for g, xi in enumerate(et.points):
        N, B, _, _, detJ = shape_matrices(kind, X, xi)
        w = et.weights[g] * detJ * thickness
        q, qn = N @ phi, N @ phi_n
        Ci = T.voigt_to_matrix(np.asarray(Cinv_qp[g])).reshape(et.dim, et.dim)
        local = ((1.0 + _qp_coef(coef, "react", g)) * q - qn + _qp_coef(coef, "src", g)
                 + _qp_coef(coef, "drive", g) * float(dG(q)) * float(driving_qp[g]))
        r += w * (N * local + _qp_coef(coef, "diff", g) * B.T @ Ci @ (B @ phi))
    return r


def damage_jacobian(kind: str, X, phi, Cinv_qp, driving_qp, coef: dict, ddG,
                    thickness: float = 1.0) -> np.ndarray:
    """Element Jacobian: N⊗N (1 + react + drive G'' ψ) + diff ∇N · C⁻¹ ∇N."""
    et = element_type(kind)
    phi = np.asarray(phi, dtype=float)
    K = np.zeros((et.n_nodes, et.n_nodes))
    for g, xi in enumerate(et.points):
        N, B, _, _, detJ = shape_matrices(kind, X, xi)
        w = et.weights[g] * detJ * thickness
        Ci = T.voigt_to_matrix(np.asarray(Cinv_qp[g])).reshape(et.dim, et.dim)
        m = 1.0 + _qp_coef(coef, "react", g) + \
            _qp_coef(coef, "drive", g) * float(ddG(N @ phi)) * float(driving_qp[g])
        K += w * (m * np.outer(N, N) + _qp_coef(coef, "diff", g) * B.T @ Ci @ B)
    return K
