"""Time integration: Newmark for motion, backward Euler for damage, and the
staggered (damage-then-motion) step with Newton-Raphson solves.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import tensors as T
from .fem.model import Discretization
from .fractional import HistoryBank, g1_coefficients
from .material import (InversionError, MaterialError, MaterialParams, PointContext,
                       degradation, hyperelastic_energy, inverse_lambda, memory_energy_batch,
                       r_term_batch, stress_batch, tangent_batch)

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """A Newton solve did not converge."""


class SolverError(RuntimeError):
    """A step failed even after the allowed number of time-step halvings."""


# ---------------------------------------------------------------------------
# Newmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewmarkParams:
    dt: float
    beta_tilde: float = 0.25

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.beta_tilde <= 0:
            raise ValueError("beta_tilde must be positive")

    @property
    def a1(self) -> float:
        return 1.0 / (self.beta_tilde * self.dt ** 2)

    @property
    def a2(self) -> float:
        return 1.0 / (self.beta_tilde * self.dt)

    @property
    def a3(self) -> float:
        return (1.0 - 2.0 * self.beta_tilde) / (2.0 * self.beta_tilde)


def newmark_accel(u_next, u_n, v_n, a_n, params: NewmarkParams):
    """a_{n+1} = a₁(u_{n+1} - u_n) - a₂ v_n - a₃ a_n."""
    return params.a1 * (u_next - u_n) - params.a2 * v_n - params.a3 * a_n


def newmark_velocity(v_n, a_n, a_next, params: NewmarkParams):
    """Average-acceleration companion v_{n+1} = v_n + Δt/2 (a_n + a_{n+1})."""
    return v_n + 0.5 * params.dt * (a_n + a_next)


# ---------------------------------------------------------------------------
# Newton-Raphson
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-8
    max_iter: int = 25

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _linear_solve(J, r):
    if sp.issparse(J):
        if J.shape[0] <= 400:
            return np.linalg.solve(J.toarray(), r)
        return spla.spsolve(J.tocsc(), r)
    return np.linalg.solve(np.atleast_2d(J), np.atleast_1d(r))


def newton_solve(residual_fn: Callable, jacobian_fn: Callable, x0,
                 config: NewtonConfig = NewtonConfig(), on_iteration: Callable | None = None):
    """Plain Newton iteration stopping when ‖x_{i+1} - x_i‖ ≤ tol.

    ``jacobian_fn`` is always called right after ``residual_fn`` at the
    same iterate, so it may reuse work cached by the residual.
    ``on_iteration(i, increment_norm)`` is called after every update.
    Returns ``(x, iterations)``.
    """
    x = np.array(x0, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    for it in range(1, config.max_iter + 1):
        arg = x[0] if scalar else x
        r = np.atleast_1d(residual_fn(arg))
        J = jacobian_fn(arg)
        try:
            dx = -_linear_solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}") from exc
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError("non-finite Newton increment")
        x = x + dx
        norm = float(np.linalg.norm(dx))
        if on_iteration is not None:
            on_iteration(it, norm)
        if norm <= config.tol:
            return (x[0] if scalar else x), it
    raise ConvergenceError(f"no convergence in {config.max_iter} iterations")


def irreversibility_clamp(phi_predicted, phi_baseline):
    """Nodewise max(φ*, φₙ), clipped into [0, 1]."""
    return np.clip(np.maximum(phi_predicted, phi_baseline), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Staggered stepper
# ---------------------------------------------------------------------------

@dataclass
class SystemState:
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    phi_baseline: np.ndarray
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.u.copy(), self.v.copy(), self.a.copy(), self.phi.copy(),
                           self.phi_baseline.copy(), self.t)


@dataclass
class PointLoad:
    """Concentrated load on a 1D node.

    ``measure="nominal"`` is a dead load.  ``measure="pk2"`` prescribes the
    second Piola-Kirchhoff traction, so the nominal load scales with the
    stretch of the adjacent element.
    """

    node: int
    value: float
    direction: int = 0
    measure: str = "nominal"


@dataclass
class StepLoads:
    """Loads and prescribed displacements at one time instant."""

    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    f_ext: np.ndarray | None = None
    point_loads: list[PointLoad] = field(default_factory=list)
    body: np.ndarray | None = None


@dataclass
class StepInfo:
    t: float
    dt: float
    motion_iterations: int
    damage_iterations: int
    halvings: int


class Simulation:
    """Staggered damage/motion integrator on one discretisation."""

    def __init__(self, model: Discretization, params: MaterialParams, dt: float, *,
                 beta_tilde: float = 0.25, mode: str = "partial", quasi_static: bool = False,
                 damage: bool = False, clamp: bool = True,
                 motion_newton: NewtonConfig = NewtonConfig(1e-8, 25),
                 damage_newton: NewtonConfig = NewtonConfig(1e-3, 25),
                 max_halvings: int = 5, diagnostics: bool = False, phi0=None):
        if params.dim != model.dim:
            raise MaterialError("material plane convention does not match the mesh dimension")
        self.model = model
        self.params = params
        self.dt = float(dt)
        self.beta_tilde = beta_tilde
        self.mode = mode
        self.quasi_static = quasi_static
        self.damage = damage
        self.clamp = clamp
        self.motion_newton = motion_newton
        self.damage_newton = damage_newton
        self.max_halvings = max_halvings
        self.diagnostics = diagnostics
        nd, nn = model.n_dofs, model.n_nodes
        phi = np.zeros(nn) if phi0 is None else np.broadcast_to(np.asarray(phi0, float), (nn,)).copy()
        if np.any(phi < 0) or np.any(phi > 1):
            raise MaterialError("initial damage outside [0, 1]")
        self.state = SystemState(np.zeros(nd), np.zeros(nd), np.zeros(nd), phi, phi.copy(), 0.0)
        self.bank = HistoryBank(model.n_qp, model.nv, self.dt, capacity=256)
        self._coeffs = g1_coefficients(params.alpha, 1024).coeffs
        self.F, self.E = model.kinematics(self.state.u)
        self.S = np.zeros_like(self.E)
        self.psi_m = np.zeros(model.n_qp)
        self.r_term = np.zeros(model.n_qp)
        self.halvings = 0
        self.motion_increments: list[float] = []

    # ------------------------------------------------------------------
    def _coefficients(self, n: int) -> np.ndarray:
        if len(self._coeffs) < n:
            self._coeffs = g1_coefficients(self.params.alpha, 2 * n).coeffs
        return self._coeffs

    def degradation_at_qp(self, phi: np.ndarray):
        q = np.clip(self.model.scalar_at_qp(phi), 0.0, 1.0)
        return degradation(q, self.params)

    def memory_energy(self) -> np.ndarray:
        """ψ̃ₘ at every qp for the last accepted state."""
        past = self.bank.past
        if past.shape[1] < 2:
            return np.zeros(self.model.n_qp)
        return memory_energy_batch(past[:, -1], past[:, :-1], self.bank.dt, self.params)

    # ------------------------------------------------------------------
    # Damage
    # ------------------------------------------------------------------
    def _solve_damage(self, dt: float) -> tuple[np.ndarray, int]:
        pm, model, st = self.params, self.model, self.state
        E_n = self.E
        Cinv = T.sym_inv(T.right_cauchy_green(E_n))
        driving = hyperelastic_energy(E_n, pm) + self.memory_energy()
        phin_q = model.scalar_at_qp(st.phi)
        gradn = model.scalar_grad_at_qp(st.phi)
        inv_lam = inverse_lambda(np.clip(phin_q, 0.0, 1.0), pm)
        gc, gam, th = pm.gc_value, pm.gamma, pm.theta0
        quad = np.einsum("pi,pi->p", gradn, T.sym_matvec(Cinv, gradn))
        coef = {
            "react": dt * gc * inv_lam / (gam * th),
            "diff": dt * gc * gam * inv_lam / th,
            "drive": dt * inv_lam / th,
            "src": dt * gc * gam * pm.zeta * pm.c_lambda * quad
                   / (th * (1.0 + pm.delta_tilde - np.clip(phin_q, 0.0, 1.0)) ** (pm.zeta + 1.0)),
        }

        def dG(q):
            return degradation(np.clip(q, 0.0, 1.0), pm)[1]

        def ddG(q):
            return degradation(np.clip(q, 0.0, 1.0), pm)[2]

        cache = {}

        def residual(phi):
            R, cache["J"] = model.damage_system(phi, st.phi, Cinv, driving, coef, dG, ddG)
            return R

        return newton_solve(residual, lambda phi: cache["J"], st.phi.copy(), self.damage_newton)

    # ------------------------------------------------------------------
    # Motion
    # ------------------------------------------------------------------
    def _solve_motion(self, dt: float, loads: StepLoads, phi: np.ndarray):
        pm, model, st = self.params, self.model, self.state
        G = self.degradation_at_qp(phi)[0]
        grad_phi = model.scalar_grad_at_qp(phi) if self.damage else None
        n = self.bank.length - 1
        coeffs = self._coefficients(n + 2)
        ctx = PointContext.from_history(self.bank.past, dt, pm.alpha, G, grad_phi, coeffs,
                                        keep_past=self.mode == "complete")
        nm = NewmarkParams(dt, self.beta_tilde)
        rho = pm.rho
        M = model.mass
        f_ext = np.zeros(model.n_dofs) if loads.f_ext is None else np.asarray(loads.f_ext, float)
        body = None if loads.body is None else model.body_force_vector(loads.body)
        fixed = np.asarray(loads.fixed_dofs, dtype=np.int64)
        free = np.setdiff1d(np.arange(model.n_dofs), fixed)
        u = st.u.copy()
        u[fixed] = loads.fixed_values
        u_fixed = u[fixed].copy()
        cache = {}

        def full(x):
            v = np.empty(model.n_dofs)
            v[free] = x
            v[fixed] = u_fixed
            return v

        def residual(x):
            v = full(x)
            F, E = model.kinematics(v)
            S = stress_batch(E, ctx, pm, self.mode)
            r = (model.internal_force(F, S) - f_ext) / rho
            if body is not None:
                r -= body
            if loads.point_loads:
                r_pl, K_pl = self._point_load_terms(loads.point_loads, F)
                r -= r_pl / rho
                cache["K_pl"] = K_pl
            if not self.quasi_static:
                r += M @ newmark_accel(v, st.u, st.v, st.a, nm)
            cache.update(F=F, E=E, S=S)
            return r[free]

        def jacobian(x):
            F, E, S = cache["F"], cache["E"], cache["S"]
            K = model.stiffness(F, S, tangent_batch(E, ctx, pm, self.mode)) / rho
            if loads.point_loads:
                K = K - cache["K_pl"] / rho
            if not self.quasi_static:
                K = K + nm.a1 * M
            return K.tocsr()[free][:, free]

        self.motion_increments = []
        x, its = newton_solve(residual, jacobian, u[free], self.motion_newton,
                              lambda i, n: self.motion_increments.append(n))
        return full(x), ctx, its

    def _point_load_terms(self, loads: list[PointLoad], F: np.ndarray):
        model = self.model
        r = np.zeros(model.n_dofs)
        rows, cols, vals = [], [], []
        conn = model.mesh.elements
        for pl in loads:
            dof = pl.node * model.dim + pl.direction
            if pl.measure == "nominal":
                r[dof] += pl.value
                continue
            if pl.measure != "pk2" or model.dim != 1:
                raise ValueError("second Piola loads are only supported on 1D bars")
            e = int(np.flatnonzero((conn == pl.node).any(axis=1))[0])
            r[dof] += pl.value * F[e, :, 0, 0].mean()
            dN = model.dN[e, :, :, 0].mean(axis=0)
            for a, node in enumerate(conn[e]):
                rows.append(dof)
                cols.append(node)
                vals.append(pl.value * dN[a])
        K = sp.csr_matrix((vals, (rows, cols)), shape=(model.n_dofs, model.n_dofs))
        return r, K

    # ------------------------------------------------------------------
    # Staggered step with rejection
    # ------------------------------------------------------------------
    def _attempt(self, dt: float, loads: StepLoads) -> StepInfo:
        st = self.state
        damage_its = 0
        phi = st.phi
        if self.damage:
            phi_star, damage_its = self._solve_damage(dt)
            phi = irreversibility_clamp(phi_star, st.phi) if self.clamp else np.clip(phi_star, 0, 1)
        u, ctx, motion_its = self._solve_motion(dt, loads, phi)
        F, E = self.model.kinematics(u)
        S = stress_batch(E, ctx, self.params, self.mode)
        nm = NewmarkParams(dt, self.beta_tilde)
        if self.quasi_static:
            a = np.zeros_like(u)
            v = (u - st.u) / dt
        else:
            a = newmark_accel(u, st.u, st.v, st.a, nm)
            v = newmark_velocity(st.v, st.a, a, nm)
        if self.diagnostics:
            past = self.bank.past
            self.psi_m = memory_energy_batch(E, past, dt, self.params)
            G = self.degradation_at_qp(phi)[0]
            self.r_term = r_term_batch(E, past, dt, self.params, G)
        self.state = SystemState(u, v, a, phi, st.phi.copy(), st.t + dt)
        self.F, self.E, self.S = F, E, S
        self.bank.append(E)
        return StepInfo(self.state.t, dt, motion_its, damage_its, self.halvings)

    def staggered_step(self, loads_at: Callable[[float], StepLoads]) -> StepInfo:
        """Advance one step of the current Δt, halving Δt on failure.

        ``loads_at(t)`` returns the loads at time t.  A halving refines the
        stored histories by linear interpolation so the uniform sampling the
        G1 scheme relies on is kept; the smaller Δt is kept afterwards.
        """
        while True:
            dt = self.bank.dt
            saved = self.state.copy()
            try:
                with np.errstate(invalid="raise", divide="raise", over="raise"):
                    return self._attempt(dt, loads_at(self.state.t + dt))
            except (ConvergenceError, InversionError, FloatingPointError, np.linalg.LinAlgError) as exc:
                self.state = saved
                if self.halvings >= self.max_halvings:
                    raise SolverError(f"step at t={saved.t + dt:.6g} failed: {exc}") from exc
                log.info("rejecting step at t=%.6g (%s); halving dt", saved.t + dt, exc)
                self.halvings += 1
                self.bank.refine()
                self.dt = self.bank.dt


def staggered_step(sim: Simulation, loads_at: Callable[[float], StepLoads]) -> SystemState:
    """Advance ``sim`` by one staggered step and return the new state."""
    sim.staggered_step(loads_at)
    return sim.state
