"""Building and running scenarios: mesh, boundary conditions, loading
programs and probe recording."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from ..fem.mesh import Mesh, bar_mesh, dogbone_mesh, i_shape_mesh, read_mesh, rectangle_mesh
from ..fem.model import Discretization
from ..solvers import NewtonConfig, PointLoad, Simulation, SolverError, StepLoads
from .config import ConfigError, LoadingConfig, ScenarioConfig
from .output import TimeSeries, export_csv, export_vtk, msd

log = logging.getLogger(__name__)

_GENERATORS = {"bar": bar_mesh, "rectangle": rectangle_mesh, "i_shape": i_shape_mesh,
               "dogbone": dogbone_mesh}
_COMPONENTS = {"x": (0,), "y": (1,), "xy": (0, 1)}


def build_mesh(cfg: ScenarioConfig) -> Mesh:
    g = cfg.geometry
    opts = dict(g.options)
    if g.kind == "file":
        if "path" not in opts:
            raise ConfigError("geometry.options.path is required for file meshes")
        return read_mesh(opts["path"])
    if "element" in opts:
        opts["kind"] = opts.pop("element")
    try:
        return _GENERATORS[g.kind](**opts)
    except TypeError as exc:
        raise ConfigError(f"geometry.options: {exc}") from exc


class LoadingProgram:
    """Time-dependent load or displacement magnitude with optional reversal."""

    def __init__(self, cfg: LoadingConfig):
        self.cfg = cfg
        self.turnaround = cfg.turnaround_time

    def value(self, t: float) -> float:
        c = self.cfg
        if c.type == "none":
            return 0.0
        if c.type == "step_force":
            return c.value if t > 0 else 0.0
        if self.turnaround is None or t <= self.turnaround:
            return c.value * t
        return max(c.value * (2.0 * self.turnaround - t), 0.0) if c.stop_on_unload \
            else c.value * (2.0 * self.turnaround - t)

    def observe(self, t: float, probe_strain: float) -> None:
        trig = self.cfg.turnaround_strain
        if trig is not None and self.turnaround is None and probe_strain >= trig:
            self.turnaround = t

    def finished(self, t: float, probe_stress: float) -> bool:
        c = self.cfg
        if not c.stop_on_unload or self.turnaround is None or t <= self.turnaround:
            return False
        if c.value * (2.0 * self.turnaround - t) <= 1e-9 * abs(c.value) * self.turnaround:
            return True
        return c.type == "displacement_ramp" and probe_stress <= 0.0


@dataclass
class Probe:
    node: int
    qp: int
    component: int


@dataclass
class RunResult:
    series: TimeSeries
    simulation: Simulation
    mesh: Mesh
    probe: Probe
    files: list = field(default_factory=list)


def _fixed_dofs(mesh: Mesh, specs) -> np.ndarray:
    dofs = []
    for spec in specs:
        name, comp = spec.split(":", 1)
        if comp not in _COMPONENTS:
            raise ConfigError(f"fixed component must be x, y or xy, got {comp!r}")
        for c in _COMPONENTS[comp]:
            if c >= mesh.dim:
                raise ConfigError(f"component {comp!r} does not exist in {mesh.dim}D")
            dofs.append(mesh.node_set(name) * mesh.dim + c)
    return np.unique(np.concatenate(dofs)) if dofs else np.zeros(0, dtype=np.int64)


def _find_probe(cfg: ScenarioConfig, mesh: Mesh, model: Discretization) -> Probe:
    comp = cfg.loading.direction
    qps = model.qp_coordinates()
    if cfg.output.probe is not None:
        point = np.asarray(cfg.output.probe, dtype=float)
    elif mesh.dim == 1:
        # last integration point of the last element, at the loaded end
        return Probe(int(mesh.node_set(cfg.loading.load_set)[0]), model.n_qp - 1, comp)
    elif "probe" in mesh.node_sets:
        point = mesh.nodes[mesh.node_set("probe")[0]]
    else:
        point = np.array([mesh.nodes[:, 0].max(), mesh.nodes[:, 1].mean()])
    qp = int(np.argmin(np.linalg.norm(qps - point, axis=1)))
    return Probe(mesh.nearest_node(point), qp, comp)


class _LoadBuilder:
    def __init__(self, cfg: ScenarioConfig, mesh: Mesh, model: Discretization):
        ld = cfg.loading
        self.ld = ld
        self.dim = mesh.dim
        self.fixed = _fixed_dofs(mesh, ld.fixed)
        self.load_nodes = mesh.node_set(ld.load_set) if ld.type != "none" else np.zeros(0, int)
        self.load_dofs = self.load_nodes * mesh.dim + ld.direction
        if ld.direction >= mesh.dim:
            raise ConfigError("loading.direction exceeds the mesh dimension")
        self.f_unit = None
        if ld.type in ("step_force", "force_ramp") and mesh.dim == 2:
            if ld.measure not in ("traction", "force"):
                raise ConfigError("2D force loads use measure 'traction' (Pa) or 'force' (N)")
            w = model.edge_weights(ld.load_set)
            if ld.measure == "force":
                w = w / w.sum()
            self.f_unit = np.zeros(model.n_dofs)
            self.f_unit[ld.direction::mesh.dim] = w
        if ld.type in ("step_force", "force_ramp") and mesh.dim == 1:
            if ld.measure not in ("nominal", "pk2", "force"):
                raise ConfigError("1D force loads use measure 'nominal', 'force' or 'pk2'")
        if ld.type == "displacement_ramp":
            overlap = np.intersect1d(self.fixed, self.load_dofs)
            self.fixed = np.setdiff1d(self.fixed, overlap)

    def __call__(self, value: float) -> StepLoads:
        ld = self.ld
        if ld.type == "displacement_ramp":
            dofs = np.concatenate([self.fixed, self.load_dofs])
            vals = np.concatenate([np.zeros(len(self.fixed)), np.full(len(self.load_dofs), value)])
            return StepLoads(dofs, vals)
        loads = StepLoads(self.fixed, np.zeros(len(self.fixed)))
        if ld.type == "none":
            return loads
        if self.f_unit is not None:
            loads.f_ext = self.f_unit * value
        else:
            measure = "pk2" if ld.measure == "pk2" else "nominal"
            share = value / len(self.load_nodes)
            loads.point_loads = [PointLoad(int(n), share, ld.direction, measure) for n in self.load_nodes]
        return loads


def build_simulation(cfg: ScenarioConfig, mesh: Mesh | None = None) -> tuple[Simulation, Mesh]:
    mesh = mesh if mesh is not None else build_mesh(cfg)
    params = cfg.material_params()
    if params.dim != mesh.dim:
        raise ConfigError(f"material plane {params.plane!r} does not fit a {mesh.dim}D mesh")
    model = Discretization(mesh, cfg.geometry.thickness)
    s = cfg.solver
    sim = Simulation(model, params, cfg.time.dt, beta_tilde=cfg.time.beta_tilde,
                     mode=s.stress_mode, quasi_static=s.quasi_static, damage=s.damage,
                     clamp=s.clamp, motion_newton=NewtonConfig(s.motion_tol, s.motion_max_iter),
                     damage_newton=NewtonConfig(s.damage_tol, s.damage_max_iter),
                     max_halvings=s.max_halvings, diagnostics=s.diagnostics,
                     phi0=cfg.initial_damage)
    return sim, mesh


def _cell_invariants(model: Discretization, S: np.ndarray) -> dict:
    Sq = S.reshape(model.ne, model.ng, model.nv).mean(axis=1)
    if model.dim == 1:
        return {"S11": Sq[:, 0]}
    s11, s22, s12 = Sq[:, 0], Sq[:, 1], Sq[:, 2]
    return {"S11": s11, "trace_S": s11 + s22,
            "equivalent_S": np.sqrt(s11 ** 2 - s11 * s22 + s22 ** 2 + 3.0 * s12 ** 2)}


def run_scenario(cfg: ScenarioConfig, on_step: Callable[[Simulation], None] | None = None,
                 output_dir=None, stop: Callable[[TimeSeries], bool] | None = None) -> RunResult:
    """Run the staggered time loop and record probe channels every step.

    ``on_step(sim)`` is called after every accepted step and ``stop(series)``
    may end the run early.  Files are written to ``output_dir`` (or
    ``cfg.output.directory``) when given.
    """
    sim, mesh = build_simulation(cfg)
    model = sim.model
    probe = _find_probe(cfg, mesh, model)
    program = LoadingProgram(cfg.loading)
    builder = _LoadBuilder(cfg, mesh, model)
    load_dofs = builder.load_dofs
    series = TimeSeries()
    out_dir = output_dir or cfg.output.directory
    files: list = []
    diag = cfg.solver.diagnostics

    def loads_at(t):
        return builder(program.value(t))

    def snapshot(step):
        if out_dir and cfg.output.vtk:
            u = sim.state.u.reshape(mesh.n_nodes, mesh.dim)
            files.append(export_vtk(mesh, {"u": u, "phi": sim.state.phi}, step,
                                    Path(out_dir) / "vtk", cfg.name,
                                    _cell_invariants(model, sim.S)))

    snapshot(0)
    step = 0
    t_end = cfg.time.t_end
    while sim.state.t < t_end - 1e-9 * sim.dt:
        try:
            info = sim.staggered_step(loads_at)
        except SolverError as exc:
            exc.series = series
            raise
        step += 1
        t = sim.state.t
        strain = float(sim.E[probe.qp, probe.component])
        stress = float(sim.S[probe.qp, probe.component])
        reaction = float(model.internal_force(sim.F, sim.S)[load_dofs].sum()) if len(load_dofs) else 0.0
        values = dict(
            displacement=float(sim.state.u[probe.node * mesh.dim + probe.component]),
            strain=strain, stress=stress, load=program.value(t), reaction=reaction,
            phi_probe=float(model.scalar_at_qp(sim.state.phi)[probe.qp]),
            phi_max=float(sim.state.phi.max()), dt=info.dt)
        if diag:
            values["psi_m_min"] = float(sim.psi_m.min())
            values["r_min"] = float(sim.r_term.min())
        series.append(t, **values)
        if on_step is not None:
            on_step(sim)
        if step % cfg.output.cadence == 0:
            snapshot(step)
        program.observe(t, strain)
        if program.finished(t, stress) or (stop is not None and stop(series)):
            break
    if out_dir:
        files.append(export_csv(series, Path(out_dir) / f"{cfg.name}.csv"))
    return RunResult(series, sim, mesh, probe, files)


def compare_stress_modes(cfg: ScenarioConfig) -> dict:
    """Run with partial and with complete stress; MSD of the probe stress
    normalised by the complete run, and final probe strain in percent."""
    runs = {}
    for mode in ("partial", "complete"):
        c = replace(cfg, solver=replace(cfg.solver, stress_mode=mode),
                    output=replace(cfg.output, directory=None, vtk=False))
        runs[mode] = run_scenario(c).series
    Sc, Sp = runs["complete"]["stress"], runs["partial"]["stress"]
    return {"msd": msd(Sc, Sp, "by_a"),
            "strain_pct": 100.0 * float(runs["complete"]["strain"][-1]),
            "strain_pct_partial": 100.0 * float(runs["partial"]["strain"][-1]),
            "partial": runs["partial"], "complete": runs["complete"]}


__all__ = ["LoadingProgram", "Probe", "RunResult", "build_mesh", "build_simulation",
           "run_scenario", "compare_stress_modes"]
