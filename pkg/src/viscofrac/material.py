"""Point-level constitutive model.

Compressible Neo-Hookean hyperelasticity, a fractional (spring-pot) memory
stress ``A(C) : D^α E``, phase-field damage through a degradation function,
and the consistent tangent by complex-step differentiation.

All stress routines are vectorised over a leading axis of points and accept
complex strains, so the tangent can push an imaginary perturbation through
the full evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensors as T
from .fractional import g1_coefficients, g1_tail, kernel_dyads, StrainHistory

COMPLEX_STEP = 1e-150


class MaterialError(ValueError):
    """Invalid material data or a physically inadmissible state."""


class InversionError(ArithmeticError):
    """det C ≤ 0 at some point (element inversion)."""


def lame(E_Y: float, nu: float) -> tuple[float, float]:
    """Return (mu, lambda) from Young's modulus and Poisson's ratio."""
    mu = E_Y / (2.0 * (1.0 + nu))
    lam = E_Y * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def plane_stress_lambda(mu: float, lam: float) -> float:
    return 2.0 * lam * mu / (lam + 2.0 * mu)


def gc_from_toughness(f_t: float, nu: float, E_Y: float) -> float:
    """Griffith energy g_c = f_t² (1 - ν²) / E_Y."""
    if E_Y <= 0:
        raise MaterialError("Young's modulus must be positive")
    return f_t ** 2 * (1.0 - nu ** 2) / E_Y


@dataclass
class MaterialParams:
    """Constitutive constants.

    ``plane`` selects the kinematic convention: ``"strain"`` and
    ``"stress"`` for 2D (unit out-of-plane stretch, the latter with reduced
    λ and λ̄), ``"uniaxial"`` for 1D bars (unit lateral stretches).
    ``hyperelastic="linear"`` swaps the Neo-Hookean law for a linear spring
    S = E_Y E (1D only).
    """

    E_Y: float
    nu: float
    p: float
    alpha: float
    rho: float = 1.0
    b_tilde: float = 0.0
    c_lambda: float = 0.0
    zeta: float = 1.0
    delta_tilde: float = 1e-4
    gc: float | None = None
    f_t: float | None = None
    gamma: float = 1e-3
    theta0: float = 293.15
    degradation: str = "G1"
    deg_a: float = 0.0
    deg_b: float = 0.0
    deg_c: float = 0.0
    deg_d: float = 1.05
    plane: str = "strain"
    hyperelastic: str = "neo_hookean"
    A_choice: str = "A1"
    mu_override: float | None = field(default=None, repr=False)
    lam_override: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise MaterialError("alpha must lie in (0, 1)")
        if self.p <= 0:
            raise MaterialError("fractional modulus p must be positive")
        if self.gamma <= 0:
            raise MaterialError("layer width gamma must be positive")
        if self.delta_tilde <= 0:
            raise MaterialError("delta_tilde must be positive")
        if self.plane not in ("strain", "stress", "uniaxial"):
            raise MaterialError(f"unknown plane convention {self.plane!r}")
        if self.hyperelastic not in ("neo_hookean", "linear"):
            raise MaterialError(f"unknown hyperelastic law {self.hyperelastic!r}")
        if self.hyperelastic == "linear" and self.plane != "uniaxial":
            raise MaterialError("the linear spring law is only available in 1D")
        if self.A_choice not in ("A1", "A2", "scalar"):
            raise MaterialError(f"unknown memory tensor {self.A_choice!r}")
        if self.degradation not in ("G1", "G2"):
            raise MaterialError(f"unknown degradation {self.degradation!r}")
        if self.gc is None and self.f_t is None:
            self.gc = 1.0
        if self.gc_value <= 0:
            raise MaterialError("g_c must be positive")

    @property
    def dim(self) -> int:
        return 1 if self.plane == "uniaxial" else 2

    @property
    def mu(self) -> float:
        return self.mu_override if self.mu_override is not None else lame(self.E_Y, self.nu)[0]

    @property
    def lam(self) -> float:
        """λ used by the hyperelastic law (plane-stress reduced if needed)."""
        lam = self.lam_override if self.lam_override is not None else lame(self.E_Y, self.nu)[1]
        return plane_stress_lambda(self.mu, lam) if self.plane == "stress" else lam

    @property
    def mu_bar(self) -> float:
        return lame(self.p, self.nu)[0]

    @property
    def lam_bar(self) -> float:
        mu_b, lam_b = lame(self.p, self.nu)
        return plane_stress_lambda(mu_b, lam_b) if self.plane == "stress" else lam_b

    @property
    def gc_value(self) -> float:
        if self.gc is not None:
            return self.gc
        return gc_from_toughness(self.f_t, self.nu, self.E_Y)

    def with_(self, **changes) -> "MaterialParams":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# Hyperelasticity
# ---------------------------------------------------------------------------

def _log_J(C: np.ndarray) -> np.ndarray:
    det = T.sym_det(C)
    if np.any(np.real(det) <= 0.0):
        raise InversionError("det C <= 0")
    return 0.5 * np.log(det)


def neo_hookean_energy(C, mu: float, lam: float) -> np.ndarray:
    """ψ_h = μ/2 (tr C - 3) - μ ln J + λ/2 (ln J)², unit out-of-plane stretches."""
    C = np.asarray(C)
    lnJ = _log_J(C)
    trace3 = T.sym_trace(C) + (3 - T.voigt_dim(C.shape[-1]))
    return 0.5 * mu * (trace3 - 3.0) - mu * lnJ + 0.5 * lam * lnJ ** 2


def neo_hookean_stress(C, mu: float, lam: float) -> np.ndarray:
    """S_h = μ (I - C⁻¹) + λ ln J C⁻¹."""
    C = np.asarray(C)
    lnJ = _log_J(C)
    Ci = T.sym_inv(C)
    I = T.identity(T.voigt_dim(C.shape[-1]))
    return mu * (I - Ci) + lam * lnJ[..., None] * Ci


def hyperelastic_energy(E, params: MaterialParams) -> np.ndarray:
    E = np.asarray(E)
    if params.hyperelastic == "linear":
        return 0.5 * params.E_Y * E[..., 0] ** 2
    return neo_hookean_energy(T.right_cauchy_green(E), params.mu, params.lam)


def hyperelastic_stress(E, params: MaterialParams) -> np.ndarray:
    E = np.asarray(E)
    if params.hyperelastic == "linear":
        return params.E_Y * E
    return neo_hookean_stress(T.right_cauchy_green(E), params.mu, params.lam)


# ---------------------------------------------------------------------------
# Degradation and damage viscosity
# ---------------------------------------------------------------------------

def degradation(phi, params: MaterialParams):
    """Return (G, G', G'') of the configured degradation function.

    G1 = (1-φ)²; G2 = (1-φ)³ + a φ^d (1-φ)^d / (1 + b (φ-c)²).  For G2 the
    second derivative is singular at φ ∈ {0, 1} when d < 2; the product
    φ(1-φ) is floored at 1e-12 there so Newton iterations stay finite.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -1e-9) or np.any(phi > 1.0 + 1e-9):
        raise MaterialError("damage outside [0, 1]")
    phi = np.clip(phi, 0.0, 1.0)
    s = 1.0 - phi
    if params.degradation == "G1":
        return s ** 2, -2.0 * s, np.full_like(phi, 2.0)
    a, b, c, d = params.deg_a, params.deg_b, params.deg_c, params.deg_d
    x = phi * s
    u = x ** d
    du = d * x ** (d - 1.0) * (1.0 - 2.0 * phi)
    xs = np.maximum(x, 1e-12)
    ddu = d * (d - 1.0) * xs ** (d - 2.0) * (1.0 - 2.0 * phi) ** 2 - 2.0 * d * xs ** (d - 1.0)
    D = 1.0 + b * (phi - c) ** 2
    dD = 2.0 * b * (phi - c)
    ddD = 2.0 * b
    G = s ** 3 + a * u / D
    dG = -3.0 * s ** 2 + a * (du * D - u * dD) / D ** 2
    ddG = 6.0 * s + a * (ddu / D - 2.0 * du * dD / D ** 2 - u * ddD / D ** 2
                         + 2.0 * u * dD ** 2 / D ** 3)
    return G, dG, ddG


def inverse_lambda(phi, params: MaterialParams):
    """1/λ̃ = c_λ / (1 + δ̃ - φ)^ζ."""
    return params.c_lambda / (1.0 + params.delta_tilde - np.asarray(phi)) ** params.zeta


# ---------------------------------------------------------------------------
# Memory tensor
# ---------------------------------------------------------------------------

def assemble_A(C, params: MaterialParams) -> np.ndarray:
    """Voigt matrix of the memory tensor at C (batched over leading axes).

    A1 = λ̄ C⁻¹⊗C⁻¹ + 2(μ̄ - λ̄ ln J) 𝕀; A2 has the single entry p at (1,1);
    ``scalar`` is p 𝕀.
    """
    C = np.asarray(C)
    nv = C.shape[-1]
    dim = T.voigt_dim(nv)
    batch = C.shape[:-1]
    I4 = T.sym_identity4(dim)
    if params.A_choice == "A2":
        A = np.zeros(batch + (nv, nv), dtype=C.dtype)
        A[..., 0, 0] = params.p
        return A
    if params.A_choice == "scalar":
        return np.broadcast_to(params.p * I4, batch + (nv, nv)).astype(C.dtype)
    lnJ = _log_J(C)
    Ci = T.sym_inv(C)
    coef = 2.0 * (params.mu_bar - params.lam_bar * lnJ)
    return params.lam_bar * T.outer4(Ci, Ci) + coef[..., None, None] * I4


def check_memory_tensor(E, params: MaterialParams) -> None:
    """Raise if A1 loses positive definiteness at any of the given strains."""
    if params.A_choice != "A1":
        return
    lnJ = _log_J(T.right_cauchy_green(np.asarray(E)))
    if params.lam_bar < 0 or np.any(params.mu_bar - params.lam_bar * lnJ <= 0):
        raise MaterialError("memory tensor A1 is not positive definite at this strain")


def dA_contract(E, W, params: MaterialParams, h: float = COMPLEX_STEP) -> np.ndarray:
    """Stress-like tensor X with X_ij = ∂A_klmn/∂E_ij W_klmn.

    W is a Voigt "dyad sum" as produced by
    :func:`viscofrac.fractional.kernel_dyads`, so that ``sum(A * W)`` is a
    scalar potential; X is its derivative with W held fixed.  The derivative
    of A is taken by complex step, one strain component at a time.
    """
    E = np.asarray(E, dtype=float)
    nv = E.shape[-1]
    if params.A_choice != "A1":
        return np.zeros_like(E)
    w = T.SHEAR_WEIGHTS[T.voigt_dim(nv)]
    X = np.zeros(E.shape, dtype=np.result_type(W, float))
    for r in range(nv):
        Ec = E.astype(complex)
        Ec[..., r] += 1j * h
        dA = np.imag(assemble_A(T.right_cauchy_green(Ec), params)) / h
        X[..., r] = np.sum(dA * W, axis=(-2, -1)) / w[r]
    return X


# ---------------------------------------------------------------------------
# Total stress
# ---------------------------------------------------------------------------

@dataclass
class PointContext:
    """Per-step data frozen during a Newton solve, for P points.

    ``past`` holds the accepted samples E_0..E_n (shape (P, n+1, nv)); the
    strain being solved for sits at t = (n+1) Δt.  ``tail`` is the matching
    G1 history sum.
    """

    G: np.ndarray
    E_prev: np.ndarray
    dt: float
    tail: np.ndarray
    past: np.ndarray | None = None
    grad_phi: np.ndarray | None = None

    @classmethod
    def from_history(cls, past: np.ndarray, dt: float, alpha: float, G, grad_phi=None,
                     coeffs: np.ndarray | None = None, keep_past: bool = True) -> "PointContext":
        past = np.asarray(past, dtype=float)
        n = past.shape[1] - 1
        if coeffs is None or len(coeffs) < n + 2:
            coeffs = g1_coefficients(alpha, n + 2).coeffs
        P = past.shape[0]
        return cls(G=np.broadcast_to(np.asarray(G, dtype=float), (P,)).copy(),
                   E_prev=past[:, -1].copy(), dt=dt, tail=g1_tail(past, coeffs),
                   past=past if keep_past else None, grad_phi=grad_phi)


def stress_batch(E, ctx: PointContext, params: MaterialParams, mode: str = "partial") -> np.ndarray:
    """Second Piola-Kirchhoff stress at P points (real or complex E)."""
    E = np.asarray(E)
    C = T.right_cauchy_green(E)
    G = ctx.G[:, None]
    S_h = hyperelastic_stress(E, params)
    A = assemble_A(C, params)
    frac = ctx.dt ** (-params.alpha) * (E + ctx.tail)
    S = G * (S_h + T.contract4(A, frac))
    if params.b_tilde != 0.0:
        S = S + params.theta0 * params.b_tilde * (E - ctx.E_prev) / ctx.dt
    if ctx.grad_phi is not None and params.dim == 2:
        v = T.sym_matvec(T.sym_inv(C), ctx.grad_phi)
        S = S - params.gc_value * params.gamma * T.sym_outer(v)
    if mode == "complete":
        S = S + G * memory_extra_stress(E, ctx, params)
    elif mode != "partial":
        raise ValueError(f"unknown stress mode {mode!r}")
    return S


def memory_extra_stress(E, ctx: PointContext, params: MaterialParams) -> np.ndarray:
    """Terms of the stress that stem from the strain dependence of A."""
    if params.A_choice != "A1":
        return np.zeros(np.shape(E))
    if ctx.past is None:
        raise ValueError("complete stress needs the stored history")
    if np.iscomplexobj(E):
        raise TypeError("the A-derivative terms are evaluated for real strains only")
    W = kernel_dyads(ctx.past, E, ctx.dt, params.alpha, "memory")
    return dA_contract(E, W, params)


def tangent_batch(E, ctx: PointContext, params: MaterialParams, mode: str = "partial",
                  h: float = COMPLEX_STEP, symmetrize: bool = False) -> np.ndarray:
    """Voigt tangent 𝐃 = ∂S/∂E (engineering shear columns) at P points.

    Columns come from complex-step perturbations of each strain component.
    In complete mode the A-derivative terms, which already contain a
    complex-step derivative, are differentiated by central differences.
    The memory and phase-gradient terms make the exact tangent slightly
    non-symmetric; ``symmetrize`` returns its symmetric part instead.
    """
    E = np.asarray(E, dtype=float)
    nv = E.shape[-1]
    w = T.SHEAR_WEIGHTS[T.voigt_dim(nv)]
    D = np.empty(E.shape + (nv,))
    for q in range(nv):
        Ec = E.astype(complex)
        Ec[..., q] += 1j * h / w[q]
        D[..., :, q] = np.imag(stress_batch(Ec, ctx, params, "partial")) / h
    if mode == "complete" and params.A_choice == "A1":
        G = ctx.G[:, None]
        for q in range(nv):
            step = 1e-6 * max(1e-3, float(np.max(np.abs(E))))
            Ep = E.copy()
            Em = E.copy()
            Ep[..., q] += step / w[q]
            Em[..., q] -= step / w[q]
            D[..., :, q] += G * (memory_extra_stress(Ep, ctx, params)
                                 - memory_extra_stress(Em, ctx, params)) / (2.0 * step)
    if symmetrize:
        D = 0.5 * (D + np.swapaxes(D, -1, -2))
    return D


def memory_energy_batch(E, past: np.ndarray, dt: float, params: MaterialParams) -> np.ndarray:
    """Volumetric memory energy at P points with A evaluated at the current E."""
    E = np.asarray(E, dtype=float)
    check_memory_tensor(E, params)
    W = kernel_dyads(past, E, dt, params.alpha, "memory")
    A = assemble_A(T.right_cauchy_green(E), params)
    return np.sum(A * W, axis=(-2, -1))


def r_term_batch(E, past: np.ndarray, dt: float, params: MaterialParams, G) -> np.ndarray:
    """Entropy-production density R at P points (volumetric, ρ = 1)."""
    E = np.asarray(E, dtype=float)
    W = kernel_dyads(past, E, dt, params.alpha, "r")
    A = assemble_A(T.right_cauchy_green(E), params)
    pref = params.alpha * np.asarray(G) / math.gamma(1.0 - params.alpha)
    return pref * np.sum(A * W, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Single-point interface
# ---------------------------------------------------------------------------

@dataclass
class PointState:
    """State of one material point.

    The last sample of ``history`` must equal ``E``.  ``Edot`` defaults to
    the backward difference of the last two samples.
    """

    E: np.ndarray
    history: StrainHistory
    phi: float = 0.0
    grad_phi: np.ndarray | None = None
    Edot: np.ndarray | None = None


def _point_context(state: PointState, params: MaterialParams) -> tuple[np.ndarray, PointContext]:
    E = np.atleast_1d(np.asarray(state.E, dtype=float))
    samples = state.history.samples
    if not np.allclose(samples[-1], E, rtol=1e-14, atol=1e-300):
        raise ValueError("history is not synchronised with the current strain")
    if not 0.0 <= state.phi <= 1.0:
        raise MaterialError("damage outside [0, 1]")
    past = samples[None, :-1]
    G = degradation(state.phi, params)[0]
    grad_phi = None if state.grad_phi is None else np.asarray(state.grad_phi, dtype=float)[None]
    if past.shape[1] == 0:
        # a lone sample has no elapsed history: the memory derivative is zero
        ctx = PointContext(G=np.array([G], dtype=float), E_prev=E[None].copy(),
                           dt=state.history.dt, tail=-E[None], past=past, grad_phi=grad_phi)
    else:
        ctx = PointContext.from_history(past, state.history.dt, params.alpha, G, grad_phi)
    if state.Edot is not None:
        ctx.E_prev = E[None] - np.asarray(state.Edot)[None] * state.history.dt
    return E[None], ctx


def second_piola(state: PointState, params: MaterialParams, mode: str = "partial") -> np.ndarray:
    """Total second Piola-Kirchhoff stress at one point."""
    E, ctx = _point_context(state, params)
    return stress_batch(E, ctx, params, mode)[0]


def tangent_stiffness(state: PointState, params: MaterialParams, mode: str = "partial",
                      h: float = COMPLEX_STEP, symmetrize: bool = True) -> np.ndarray:
    """Voigt tangent 𝐃 = ∂S/∂E at one point (symmetric part by default)."""
    E, ctx = _point_context(state, params)
    return tangent_batch(E, ctx, params, mode, h, symmetrize)[0]
