"""Vectorised total-Lagrangian discretisation of the motion and damage equations.

Displacement dofs are interleaved per node (``u_x, u_y`` of node 0, then
node 1, ...).  All element quantities are evaluated for every element and
quadrature point at once and scattered into a fixed CSR pattern.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import tensors as T
from ..material import InversionError
from .elements import EDGE_LINES, element_type
from .mesh import Mesh


class _Pattern:
    """CSR sparsity pattern of a block of element matrices."""

    def __init__(self, edofs: np.ndarray, n: int):
        ne, k = edofs.shape
        rows = np.repeat(edofs, k, axis=1).ravel()
        cols = np.tile(edofs, (1, k)).ravel()
        key = rows * n + cols
        uniq, self.scatter = np.unique(key, return_inverse=True)
        self.n = n
        self.rows = uniq // n
        self.cols = uniq % n
        base = sp.csr_matrix((np.arange(1, len(uniq) + 1, dtype=float), (self.rows, self.cols)),
                             shape=(n, n))
        self.indptr = base.indptr
        self.indices = base.indices
        # position of each unique entry inside the CSR data array
        self.order = (base.data.astype(np.int64) - 1)
        self.inverse_order = np.empty_like(self.order)
        self.inverse_order[self.order] = np.arange(len(self.order))

    def assemble(self, ke: np.ndarray) -> sp.csr_matrix:
        vals = np.bincount(self.scatter, weights=ke.ravel(), minlength=len(self.rows))
        data = vals[self.order]
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


class Discretization:
    """Quadrature-point geometry and assembly for one mesh.

    ``thickness`` scales 2D integrals (out-of-plane thickness) and 1D
    integrals (cross-section area).
    """

    def __init__(self, mesh: Mesh, thickness: float = 1.0):
        self.mesh = mesh
        self.etype = element_type(mesh.kind)
        self.dim = mesh.dim
        self.nv = T.voigt_size(self.dim)
        self.thickness = float(thickness)
        et = self.etype
        conn = mesh.elements
        X = mesh.nodes[conn]                                  # (ne, nen, d)
        N = et.shape(et.points)                               # (ng, nen)
        dN_ref = et.dshape(et.points)                         # (ng, nen, d)
        J = np.einsum("ead,gak->egdk", X, dN_ref)             # dX_d/dxi_k
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            raise ValueError("mesh has elements with non-positive Jacobian")
        Jinv = np.linalg.inv(J)
        self.N = np.broadcast_to(N, (len(conn),) + N.shape).copy()          # (ne, ng, nen)
        self.dN = np.einsum("gak,egkd->egad", dN_ref, Jinv)                  # (ne, ng, nen, d)
        self.wdV = detJ * et.weights[None, :] * self.thickness               # (ne, ng)
        self.ne, self.ng, self.nen = self.N.shape
        self.n_qp = self.ne * self.ng
        self.n_nodes = mesh.n_nodes
        self.n_dofs = self.n_nodes * self.dim
        self.edofs = (conn[:, :, None] * self.dim + np.arange(self.dim)).reshape(self.ne, -1)
        self.vec_pattern = _Pattern(self.edofs, self.n_dofs)
        self.scal_pattern = _Pattern(conn, self.n_nodes)
        self.mass = self._vector_mass()
        self.scalar_mass = self.scal_pattern.assemble(
            np.einsum("eg,ega,egb->eab", self.wdV, self.N, self.N))
        self.volume = float(self.wdV.sum())

    # ------------------------------------------------------------------
    # Field interpolation
    # ------------------------------------------------------------------
    def qp_coordinates(self) -> np.ndarray:
        X = self.mesh.nodes[self.mesh.elements]
        return np.einsum("ega,ead->egd", self.N, X).reshape(-1, self.dim)

    def displacement_gradient(self, u: np.ndarray) -> np.ndarray:
        ue = u.reshape(self.n_nodes, self.dim)[self.mesh.elements]         # (ne, nen, d)
        return np.einsum("eai,egaj->egij", ue, self.dN)

    def kinematics(self, u: np.ndarray):
        """Deformation gradient F (ne, ng, d, d) and Green-Lagrange E (P, nv)."""
        H = self.displacement_gradient(u)
        F = H + np.eye(self.dim)
        detF = np.linalg.det(F)
        if np.any(detF <= 0):
            raise InversionError("element inversion (det F <= 0)")
        E = T.green_lagrange(H).reshape(self.n_qp, self.nv)
        return F, E

    def scalar_at_qp(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("ega,ea->eg", self.N, phi[self.mesh.elements]).reshape(-1)

    def scalar_grad_at_qp(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("egad,ea->egd", self.dN, phi[self.mesh.elements]).reshape(-1, self.dim)

    # ------------------------------------------------------------------
    # Motion equation
    # ------------------------------------------------------------------
    def _vector_mass(self) -> sp.csr_matrix:
        m = np.einsum("eg,ega,egb->eab", self.wdV, self.N, self.N)
        d = self.dim
        ke = np.zeros((self.ne, self.nen * d, self.nen * d))
        for i in range(d):
            ke[:, i::d, i::d] = m
        return self.vec_pattern.assemble(ke)

    def internal_force(self, F: np.ndarray, S: np.ndarray) -> np.ndarray:
        """∫ B̂ᵀ F̄ᵀ s dΩ, evaluated as ∫ ∇N · (F S)ᵀ dΩ."""
        Sm = T.voigt_to_matrix(S.reshape(self.ne, self.ng, self.nv))
        P = F @ Sm                                                           # first Piola
        fe = np.einsum("eg,egij,egaj->eai", self.wdV, P, self.dN).reshape(self.ne, -1)
        out = np.zeros(self.n_dofs)
        np.add.at(out, self.edofs, fe)
        return out

    def strain_operator(self, F: np.ndarray) -> np.ndarray:
        """F̄B̂ at every qp: maps element dofs to Voigt δE (engineering shear)."""
        d = self.dim
        dN = self.dN
        if d == 1:
            return (F[..., 0, 0][..., None] * dN[..., 0])[:, :, None, :]
        BL = np.zeros((self.ne, self.ng, 3, self.nen, 2))
        for i in range(2):
            BL[:, :, 0, :, i] = F[:, :, i, 0, None] * dN[..., 0]
            BL[:, :, 1, :, i] = F[:, :, i, 1, None] * dN[..., 1]
            BL[:, :, 2, :, i] = F[:, :, i, 0, None] * dN[..., 1] + F[:, :, i, 1, None] * dN[..., 0]
        return BL.reshape(self.ne, self.ng, 3, self.nen * 2)

    def stiffness(self, F: np.ndarray, S: np.ndarray, D: np.ndarray) -> sp.csr_matrix:
        """∫ B̂ᵀS̄B̂ dΩ + ∫ B̂ᵀF̄ᵀ 𝐃 F̄B̂ dΩ."""
        BL = self.strain_operator(F)
        Dq = D.reshape(self.ne, self.ng, self.nv, self.nv)
        ke = np.einsum("eg,egpa,egpq,egqb->eab", self.wdV, BL, Dq, BL)
        Sm = T.voigt_to_matrix(S.reshape(self.ne, self.ng, self.nv))
        kg = np.einsum("eg,egaI,egIJ,egbJ->eab", self.wdV, self.dN, Sm, self.dN)
        d = self.dim
        for i in range(d):
            ke[:, i::d, i::d] += kg
        return self.vec_pattern.assemble(ke)

    # ------------------------------------------------------------------
    # Loads
    # ------------------------------------------------------------------
    def edge_weights(self, set_name: str) -> np.ndarray:
        """Nodal weights w_a = ∫ N_a dΓ (times thickness) over the named boundary."""
        w = np.zeros(self.n_nodes)
        if self.dim == 1:
            w[self.mesh.node_set(set_name)] = self.thickness
            return w
        edges = self.mesh.boundary_edges(set_name)
        line = EDGE_LINES[edges.shape[1]]
        Nl = line.shape(line.points)
        dNl = line.dshape(line.points)[:, :, 0]
        for edge in edges:
            X = self.mesh.nodes[edge]
            tang = dNl @ X
            jac = np.linalg.norm(tang, axis=1)
            np.add.at(w, edge, (line.weights * jac) @ Nl * self.thickness)
        return w

    def body_force_vector(self, b: np.ndarray) -> np.ndarray:
        """∫ N̂ᵀ b dΩ for a uniform acceleration-like body force b."""
        nodal = np.einsum("eg,ega->ea", self.wdV, self.N)
        out = np.zeros((self.n_nodes, self.dim))
        np.add.at(out, self.mesh.elements, nodal[:, :, None] * np.asarray(b)[None, None, :])
        return out.ravel()

    # ------------------------------------------------------------------
    # Damage equation
    # ------------------------------------------------------------------
    def damage_system(self, phi: np.ndarray, phi_n: np.ndarray, Cinv: np.ndarray,
                      driving: np.ndarray, coef: dict, dG, ddG, with_jacobian: bool = True):
        """Residual and Jacobian of the backward-Euler damage update.

        ``Cinv`` (P, nv) and ``driving`` = ψ_h + ψ̃ₘ (P,) are frozen at tₙ.
        ``coef`` holds per-qp arrays ``react`` = Δt g_c/(γ λ̃ θ),
        ``diff`` = Δt g_c γ/(λ̃ θ), ``src`` (the delayed gradient term) and
        ``drive`` = Δt/(λ̃ θ).  ``dG``/``ddG`` map qp damage to G', G''.
        """
        ne, ng, nen = self.ne, self.ng, self.nen
        conn = self.mesh.elements
        phi_q = self.scalar_at_qp(phi)
        phin_q = self.scalar_at_qp(phi_n)
        grad = self.scalar_grad_at_qp(phi).reshape(ne, ng, self.dim)
        Cm = T.voigt_to_matrix(Cinv).reshape(ne, ng, self.dim, self.dim)
        wdV = self.wdV
        react = coef["react"].reshape(ne, ng)
        diff = coef["diff"].reshape(ne, ng)
        drive = coef["drive"].reshape(ne, ng)
        src = coef["src"].reshape(ne, ng)
        psi = driving.reshape(ne, ng)
        g1 = dG(phi_q).reshape(ne, ng)
        local = ((1.0 + react) * phi_q.reshape(ne, ng) - phin_q.reshape(ne, ng)
                 + src + drive * g1 * psi)
        flux = np.einsum("egij,egj->egi", Cm, grad) * diff[..., None]
        re = (np.einsum("eg,eg,ega->ea", wdV, local, self.N)
              + np.einsum("eg,egaI,egI->ea", wdV, self.dN, flux))
        R = np.bincount(conn.ravel(), weights=re.ravel(), minlength=self.n_nodes)
        if not with_jacobian:
            return R, None
        g2 = ddG(phi_q).reshape(ne, ng)
        mcoef = wdV * (1.0 + react + drive * g2 * psi)
        ke = (np.einsum("eg,ega,egb->eab", mcoef, self.N, self.N)
              + np.einsum("eg,egaI,egIJ,egbJ->eab", wdV * diff, self.dN, Cm, self.dN))
        return R, self.scal_pattern.assemble(ke)


def apply_dirichlet(K: sp.spmatrix, r: np.ndarray, dofs: np.ndarray, values: np.ndarray):
    """Eliminate prescribed dofs from K x = r, keeping the system size.

    Returns (K', r') whose solution carries ``values`` at ``dofs``.
    """
    K = sp.csr_matrix(K, dtype=float, copy=True)
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    x0 = np.zeros(K.shape[0])
    x0[dofs] = values
    r = np.asarray(r, dtype=float) - K @ x0
    mask = np.zeros(K.shape[0], dtype=bool)
    mask[dofs] = True
    keep = sp.diags((~mask).astype(float))
    K = keep @ K @ keep + sp.diags(mask.astype(float))
    r[dofs] = values
    return K.tocsr(), r
