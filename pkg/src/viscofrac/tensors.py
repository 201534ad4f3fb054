"""Small symmetric-tensor algebra in Voigt form.

Conventions
-----------
Symmetric second-order tensors are stored as Voigt vectors along the last
array axis: ``[T11]`` in 1D and ``[T11, T22, T12]`` in 2D.  Stored shear
entries are true tensor components (no factor 2).  Fourth-order tensors are
stored as Voigt matrices ``A[p, q] = A_{ijkl}`` with the same index map, so a
double contraction ``A : E`` reads ``A @ (SHEAR_WEIGHTS * E)``.

Every function works on leading batch axes and over real or complex dtypes,
which the complex-step tangent relies on.
"""
from __future__ import annotations

import numpy as np

# Voigt index pairs and multiplicities (number of tensor entries per slot).
VOIGT_PAIRS = {1: [(0, 0)], 2: [(0, 0), (1, 1), (0, 1)]}
SHEAR_WEIGHTS = {1: np.array([1.0]), 2: np.array([1.0, 1.0, 2.0])}


def voigt_size(dim: int) -> int:
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    return 1 if dim == 1 else 3


def voigt_dim(nv: int) -> int:
    if nv == 1:
        return 1
    if nv == 3:
        return 2
    raise ValueError(f"unsupported Voigt length {nv}")


def weights_for(v: np.ndarray) -> np.ndarray:
    return SHEAR_WEIGHTS[voigt_dim(np.shape(v)[-1])]


def identity(dim: int) -> np.ndarray:
    return np.array([1.0]) if dim == 1 else np.array([1.0, 1.0, 0.0])


def voigt_to_matrix(v: np.ndarray) -> np.ndarray:
    """Unpack Voigt vectors into full symmetric ``dim x dim`` matrices."""
    v = np.asarray(v)
    dim = voigt_dim(v.shape[-1])
    out = np.zeros(v.shape[:-1] + (dim, dim), dtype=v.dtype)
    for k, (i, j) in enumerate(VOIGT_PAIRS[dim]):
        out[..., i, j] = v[..., k]
        out[..., j, i] = v[..., k]
    return out


def matrix_to_voigt(m: np.ndarray) -> np.ndarray:
    """Pack (symmetric) matrices into Voigt vectors, averaging off-diagonals."""
    m = np.asarray(m)
    dim = m.shape[-1]
    if dim == 1:
        return m[..., 0, :1].copy()
    return np.stack([m[..., 0, 0], m[..., 1, 1], 0.5 * (m[..., 0, 1] + m[..., 1, 0])], axis=-1)


def green_lagrange(grad_u: np.ndarray) -> np.ndarray:
    """E = (grad_u^T grad_u + grad_u^T + grad_u) / 2 in Voigt form."""
    g = np.asarray(grad_u)
    gt = np.swapaxes(g, -1, -2)
    return matrix_to_voigt(0.5 * (gt @ g + gt + g))


def deformation_gradient(grad_u: np.ndarray) -> np.ndarray:
    g = np.asarray(grad_u)
    return g + np.eye(g.shape[-1])


def right_cauchy_green(E: np.ndarray) -> np.ndarray:
    """C = 2E + I (in-plane part; the out-of-plane stretch is unity)."""
    E = np.asarray(E)
    return 2.0 * E + identity(voigt_dim(E.shape[-1]))


def strain_from_cauchy_green(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C)
    return 0.5 * (C - identity(voigt_dim(C.shape[-1])))


def sym_det(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T)
    if T.shape[-1] == 1:
        return T[..., 0]
    return T[..., 0] * T[..., 1] - T[..., 2] ** 2


def sym_trace(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T)
    if T.shape[-1] == 1:
        return T[..., 0]
    return T[..., 0] + T[..., 1]


def sym_inv(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T)
    if T.shape[-1] == 1:
        return 1.0 / T
    det = sym_det(T)[..., None]
    return np.stack([T[..., 1], T[..., 0], -T[..., 2]], axis=-1) / det


def sym_matvec(T: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply a symmetric tensor (Voigt) to a vector."""
    if T.shape[-1] == 1:
        return T * x
    return np.stack([T[..., 0] * x[..., 0] + T[..., 2] * x[..., 1],
                     T[..., 2] * x[..., 0] + T[..., 1] * x[..., 1]], axis=-1)


def sym_outer(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Symmetrised dyad (a⊗b + b⊗a)/2 of vectors in Voigt form."""
    if b is None:
        b = a
    if a.shape[-1] == 1:
        return a * b
    return np.stack([a[..., 0] * b[..., 0], a[..., 1] * b[..., 1],
                     0.5 * (a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0])], axis=-1)


def sym_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix product A·B of two symmetric tensors (full matrix result)."""
    return voigt_to_matrix(A) @ voigt_to_matrix(B)


def ddot(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Double contraction A:B of two symmetric tensors in Voigt form."""
    return np.sum(weights_for(A) * A * B, axis=-1)


def contract4(A4: np.ndarray, E: np.ndarray) -> np.ndarray:
    """A : E for a Voigt fourth-order tensor and a Voigt second-order tensor."""
    w = weights_for(E)
    return np.einsum("...pq,...q->...p", A4, w * E)


def quadratic4(A4: np.ndarray, E: np.ndarray) -> np.ndarray:
    """E : A : E."""
    w = weights_for(E)
    we = w * E
    return np.einsum("...p,...pq,...q->...", we, A4, we)


def outer4(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Voigt matrix of the dyad a⊗b of two symmetric tensors."""
    return a[..., :, None] * b[..., None, :]


def sym_identity4(dim: int) -> np.ndarray:
    """Voigt matrix of the symmetric fourth-order identity."""
    return np.eye(1) if dim == 1 else np.diag([1.0, 1.0, 0.5])


def build_Fbar(F: np.ndarray) -> np.ndarray:
    """3x4 matrix mapping interleaved displacement gradients to δE (engineering shear)."""
    F = np.asarray(F)
    if F.shape[-2:] != (2, 2):
        raise ValueError("build_Fbar needs a 2x2 deformation gradient")
    out = np.zeros(F.shape[:-2] + (3, 4), dtype=F.dtype)
    out[..., 0, 0] = F[..., 0, 0]
    out[..., 0, 2] = F[..., 1, 0]
    out[..., 1, 1] = F[..., 0, 1]
    out[..., 1, 3] = F[..., 1, 1]
    out[..., 2, 0] = F[..., 0, 1]
    out[..., 2, 1] = F[..., 0, 0]
    out[..., 2, 2] = F[..., 1, 1]
    out[..., 2, 3] = F[..., 1, 0]
    return out


def build_Sbar(S: np.ndarray) -> np.ndarray:
    """4x4 block-diagonal repetition of the 2x2 stress matrix."""
    S = np.asarray(S)
    if S.shape[-1] != 3:
        raise ValueError("build_Sbar needs a 2D Voigt stress")
    block = voigt_to_matrix(S)
    out = np.zeros(S.shape[:-1] + (4, 4), dtype=S.dtype)
    out[..., 0:2, 0:2] = block
    out[..., 2:4, 2:4] = block
    return out
