"""Fractional-derivative kernels over uniformly sampled strain histories.

Two discretisations live here:

* the Grünwald-type G1 convolution used for the memory stress ``A : D^α E``;
* a singular-kernel quadrature for the memory potential and for the
  entropy-production term R, which only need the quadratic form
  ``N(E_t, E_τ) = (E_t - E_τ) : A : (E_t - E_τ) / 2``.

Histories are sampled at ``τ_j = j Δt`` with ``E_0 = 0``.  Arrays follow the
Voigt convention of :mod:`viscofrac.tensors`; a leading axis indexes
quadrature points when working in batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensors import SHEAR_WEIGHTS, voigt_dim


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class G1Coefficients:
    alpha: float
    coeffs: np.ndarray  # coeffs[m] = A_{m+1}

    def __len__(self) -> int:
        return len(self.coeffs)


def g1_coefficients(alpha: float, n: int) -> G1Coefficients:
    """Coefficients A_1..A_n from A_{m+1} = (m - 1 - α)/m · A_m, A_1 = 1."""
    _check_alpha(alpha)
    if n < 1:
        raise ValueError("need at least one coefficient")
    # extended precision keeps the accumulated rounding of the running
    # product well below 1e-12 for n up to ~1e5
    m = np.arange(1, n, dtype=np.longdouble)
    ratios = (m - 1 - np.longdouble(alpha)) / m
    coeffs = np.empty(n)
    coeffs[0] = 1.0
    coeffs[1:] = np.cumprod(ratios)
    coeffs.setflags(write=False)
    return G1Coefficients(alpha, coeffs)


def _stirling_tail(x: np.ndarray) -> np.ndarray:
    """Bernoulli correction terms of the Stirling series for ln Γ(x)."""
    x2 = x * x
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x


def g1_coefficients_closed_form(alpha: float, n: int) -> np.ndarray:
    """Gamma-ratio form A_{m+1} = Γ(m-α) / (Γ(-α) Γ(m+1)).

    Small m use the Gamma function directly.  For large m the log-ratio
    ln Γ(m-α) - ln Γ(m+1) is expanded with the Stirling series written in
    log1p form, which avoids the cancellation of two ~m·ln(m) terms.
    """
    _check_alpha(alpha)
    out = np.empty(n)
    cut = min(n, 30)
    g = math.gamma(-alpha)
    for k in range(cut):
        out[k] = math.gamma(k - alpha) / (g * math.gamma(k + 1))
    if n > cut:
        m = np.arange(cut, n, dtype=float)
        log_ratio = (-(1.0 + alpha) * np.log(m)
                     + (m - alpha - 0.5) * np.log1p(-alpha / m)
                     - (m + 0.5) * np.log1p(1.0 / m)
                     + 1.0 + alpha
                     + _stirling_tail(m - alpha) - _stirling_tail(m + 1.0))
        out[cut:] = np.exp(log_ratio) / g
    return out


class StrainHistory:
    """Append-only, uniformly sampled strain history of one point.

    ``samples[0]`` is the strain-free initial state; the last sample is the
    strain at the current evaluation time ``t = (len - 1) Δt``.
    """

    def __init__(self, dt: float, nv: int = 1, samples=None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.nv = nv
        self._data = [np.zeros(nv)]
        if samples is not None:
            arr = np.atleast_2d(np.asarray(samples, dtype=float))
            if arr.shape[1] != nv:
                arr = arr.reshape(-1, nv)
            self._data = [row.copy() for row in arr]

    @classmethod
    def from_function(cls, f, t_end: float, n_steps: int, nv: int = 1) -> "StrainHistory":
        dt = t_end / n_steps
        t = dt * np.arange(n_steps + 1)
        vals = np.array([np.broadcast_to(f(ti), (nv,)) for ti in t], dtype=float)
        return cls(dt, nv, vals)

    def append(self, E) -> None:
        self._data.append(np.broadcast_to(np.asarray(E, dtype=float), (self.nv,)).copy())

    @property
    def samples(self) -> np.ndarray:
        return np.array(self._data)

    @property
    def time(self) -> float:
        return self.dt * (len(self._data) - 1)

    @property
    def current(self) -> np.ndarray:
        return self._data[-1]

    def __len__(self) -> int:
        return len(self._data)


def caputo_g1(history: StrainHistory, alpha: float) -> np.ndarray:
    """G1 approximation Δt^{-α} Σ_{m=0}^{N-1} A_{m+1} E(t - mΔt)."""
    _check_alpha(alpha)
    if len(history) < 1:
        raise ValueError("empty history")
    samples = history.samples
    n = len(samples) - 1
    if n == 0:
        return np.zeros(history.nv)
    A = g1_coefficients(alpha, n).coeffs
    # samples[n - m] for m = 0..n-1 (E_0 is excluded and zero anyway)
    return history.dt ** (-alpha) * (A @ samples[n:0:-1])


def g1_tail(past: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """History part Σ_{m≥1} A_{m+1} E_{n+1-m} for a provisional current strain.

    ``past`` has shape (P, n+1, nv) holding E_0..E_n; the current strain
    E_{n+1} enters with A_1 = 1 and is added by the caller.
    """
    n = past.shape[1] - 1
    if n == 0:
        return np.zeros((past.shape[0], past.shape[2]))
    return np.einsum("k,pkv->pv", coeffs[1:n + 1], past[:, n:0:-1, :])


# ---------------------------------------------------------------------------
# Singular-kernel quadrature
# ---------------------------------------------------------------------------

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)
_EXACT_INTERVALS = 16


def _interval_weights(n: int, dt: float, beta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Product-integration weights of the kernel x^{-β}, x = t - τ, t = n Δt.

    On each interval [τ_j, τ_{j+1}] (j = 0..n-2) the history is linear, so
    the dyad integral needs ∫ ℓ_a ℓ_b x^{-β} dτ for the two hat functions
    ℓ_0 (equal to 1 at τ_j) and ℓ_1.  Returns (L00, L01, L11).  Intervals
    close to t use exact moments; farther ones use 4-point Gauss-Legendre,
    where the kernel is smooth and exact moments would cancel badly.
    """
    j = np.arange(n - 1)
    near = (n - j - 1) * dt
    far = near + dt
    L00 = np.empty(n - 1)
    L01 = np.empty(n - 1)
    L11 = np.empty(n - 1)
    close = (n - j - 1) < _EXACT_INTERVALS
    if np.any(close):
        a, b = near[close], far[close]

        def moment(k):
            e = k + 1.0 - beta
            return (b ** e - a ** e) / e

        m0, m1, m2 = moment(0), moment(1), moment(2)
        # ℓ_0 = (x - a)/Δt, ℓ_1 = (b - x)/Δt
        L00[close] = (m2 - 2 * a * m1 + a * a * m0) / dt ** 2
        L11[close] = (b * b * m0 - 2 * b * m1 + m2) / dt ** 2
        L01[close] = (-(m2) + (a + b) * m1 - a * b * m0) / dt ** 2
    if not np.all(close):
        a = near[~close][:, None]
        y = 0.5 * (_GAUSS_X + 1.0)[None, :]            # position in [0, 1]
        x = a + y * dt
        k = x ** (-beta) * (0.5 * dt * _GAUSS_W)[None, :]
        L00[~close] = (k * y * y).sum(axis=1)
        L11[~close] = (k * (1 - y) ** 2).sum(axis=1)
        L01[~close] = (k * y * (1 - y)).sum(axis=1)
    return L00, L01, L11


def kernel_dyads(past: np.ndarray, current: np.ndarray, dt: float, alpha: float,
                 which: str = "memory") -> np.ndarray:
    """Weighted sum of strain-difference dyads for the memory quadratures.

    Returns W with shape (P, nv, nv) such that ``sum(A * W)`` equals the
    memory potential (``which="memory"``), or R divided by
    :func:`r_prefactor` (``which="r"``), for any Voigt tensor A.

    ``past`` holds E_0..E_{n-1} with shape (P, n, nv) and ``current`` the
    strain at t = n Δt with shape (P, nv).  The history is taken piecewise
    linear; the kernel is integrated exactly against it.  Shear slots carry
    their multiplicity so that the Voigt contraction is exact.
    """
    _check_alpha(alpha)
    P, n, nv = past.shape
    w = SHEAR_WEIGHTS[voigt_dim(nv)]
    dtype = np.result_type(past, current)
    if n == 0:
        return np.zeros((P, nv, nv), dtype=dtype)
    t = n * dt
    if which == "memory":
        scale = 1.0 / (2.0 * math.gamma(1.0 - alpha))
        c0 = t ** (-alpha)
        cl = alpha * dt ** (-alpha) / (2.0 - alpha)
        beta, factor = 1.0 + alpha, alpha
    elif which == "r":
        scale = 1.0 / 2.0
        c0 = t ** (-1.0 - alpha)
        cl = (1.0 + alpha) * dt ** (-1.0 - alpha) / (1.0 - alpha)
        beta, factor = 2.0 + alpha, 1.0 + alpha
    else:
        raise ValueError(f"unknown kernel {which!r}")
    D = w * (current[:, None, :] - past)              # differences at the nodes
    node = np.zeros(n)
    node[0] += c0
    node[-1] += cl
    W = None
    if n > 1:
        L00, L01, L11 = _interval_weights(n, dt, beta)
        node[:-1] += factor * L00
        node[1:] += factor * L11
        cross = np.einsum("k,pki,pkj->pij", factor * L01, D[:, :-1], D[:, 1:])
        W = cross + np.swapaxes(cross, 1, 2)
    diag = np.einsum("k,pki,pkj->pij", node, D, D)
    W = diag if W is None else W + diag
    return scale * W


def _check_spd(A: np.ndarray) -> None:
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=1e-10, atol=0.0):
        raise ValueError("memory tensor is not symmetric")
    eig = np.linalg.eigvalsh(A)
    scale = max(np.max(np.abs(eig)), np.finfo(float).tiny)
    if np.any(eig < -1e-12 * scale):
        raise ValueError("memory tensor is not positive semi-definite")


def _resolve_A(A, current: np.ndarray) -> np.ndarray:
    if callable(A):
        A = A(current)
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    return A


def memory_potential(history: StrainHistory, A, alpha: float) -> float:
    """Volumetric memory energy κ[ΔE_0:A:ΔE_0/t^α + α∫ΔE_τ:A:ΔE_τ/(t-τ)^{1+α}dτ].

    ``A`` is a Voigt matrix (or a scalar in 1D) or a callable mapping the
    current strain to one.  κ = 1/(2Γ(1-α)).
    """
    samples = history.samples
    if len(samples) < 2:
        return 0.0
    current = samples[-1]
    A = _resolve_A(A, current)
    _check_spd(A)
    W = kernel_dyads(samples[None, :-1], current[None], history.dt, alpha, "memory")[0]
    return float(np.sum(A * W))


def r_term(history: StrainHistory, alpha: float, G_m: float, A, rho: float = 1.0) -> float:
    """Entropy-production density R ≥ 0 of the memory element.

    R = α G_m/(ρ Γ(1-α)) [N(E_t,E_0)/t^{1+α} + (1+α)∫N(E_t,E_τ)/(t-τ)^{2+α} dτ].
    """
    samples = history.samples
    if len(samples) < 2:
        return 0.0
    current = samples[-1]
    A = _resolve_A(A, current)
    _check_spd(A)
    W = kernel_dyads(samples[None, :-1], current[None], history.dt, alpha, "r")[0]
    return float(r_prefactor(alpha, G_m, rho) * np.sum(A * W))


def r_prefactor(alpha: float, G_m, rho: float = 1.0):
    return alpha * G_m / (rho * math.gamma(1.0 - alpha))


# ---------------------------------------------------------------------------
# Batched history storage
# ---------------------------------------------------------------------------

@dataclass
class HistoryBank:
    """Dense strain histories for many quadrature points sharing one Δt."""

    n_points: int
    nv: int
    dt: float
    capacity: int = 64
    data: np.ndarray = field(init=False, repr=False)
    length: int = field(init=False, default=1)

    def __post_init__(self):
        self.data = np.zeros((self.n_points, max(self.capacity, 2), self.nv))

    def _grow(self, needed: int) -> None:
        cap = self.data.shape[1]
        if needed <= cap:
            return
        new = np.zeros((self.n_points, max(needed, 2 * cap), self.nv))
        new[:, :self.length] = self.data[:, :self.length]
        self.data = new

    @property
    def past(self) -> np.ndarray:
        """Samples E_0..E_n recorded so far, shape (P, n+1, nv)."""
        return self.data[:, :self.length]

    @property
    def last(self) -> np.ndarray:
        return self.data[:, self.length - 1]

    @property
    def time(self) -> float:
        return self.dt * (self.length - 1)

    def append(self, E: np.ndarray) -> None:
        self._grow(self.length + 1)
        self.data[:, self.length] = E
        self.length += 1

    def refine(self) -> None:
        """Halve Δt, inserting linearly interpolated midpoints."""
        old = self.past.copy()
        n = old.shape[1]
        self.dt *= 0.5
        self._grow(2 * n - 1)
        self.length = 2 * n - 1
        self.data[:, 0:self.length:2] = old
        self.data[:, 1:self.length:2] = 0.5 * (old[:, :-1] + old[:, 1:])

    def copy(self) -> "HistoryBank":
        other = HistoryBank(self.n_points, self.nv, self.dt, self.data.shape[1])
        other.data = self.data.copy()
        other.length = self.length
        return other
