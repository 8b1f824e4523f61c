"""
Command implementations behind the qh subcommands.

Every command reads a validated RunConfig, writes its report files into the
output directory and returns the summary dictionary it saved.
"""
import math
import os
import numpy as np
from tqdm import tqdm
from typing import Dict, Any, List, Tuple

import Util_Config as config
import Model as model
from Central_Config import CCQuery, Ordering, equilateral_cc, equilateral_side, f_root, equilateral_configuration
from Collinear_Solver import solve_collinear_all, solve_collinear_ordering, simultaneous_gap
from Collision_Flow import (central_configurations_of_V, find_equilibria, linearize_at_equilibrium,
                            manifold_dimensions, integrate_on_C, state_on_C, transversality_necessary)
from Configuration import Configuration, PhaseState
from Mass_System import MassSystem
from Homothetic import (is_homothetic_admissible, heteroclinic_orbit, energy_curve_v2, homothety_defect)
from Integrator import Event, integrate, mcgehee_renormalizer
from McGehee import (McGeheeState, StateLayout, to_mcgehee, from_mcgehee, mcgehee_rhs, mcgehee_monitors,
                     on_collision_manifold)
from Run_Config import RunConfig
from Util_Errors import ConfigError, MismatchError, AdmissibilityError, InvalidParamsError, ToleranceError
from Util_IO import _save_json, _save_csv

DEFAULT_SPAN = 10.0


def _envelope(command: str, cfg: RunConfig) -> Dict[str, Any]:
    return {
        "schema": config.SCHEMA_VERSION,
        "command": command,
        "masses": list(cfg.masses),
        "params": cfg.pp.to_dict(),
        "inertia_I0": cfg.inertia_I0,
    }


def _axes(dim: int) -> List[str]:
    return ["x", "y", "z"][:dim]


def _body_columns(prefix: str, n: int, dim: int) -> List[str]:
    return [f"{prefix}{axis}{i}" for i in range(1, n + 1) for axis in _axes(dim)]


def _path(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, name)


# --- cc-collinear ---

def cmd_cc_collinear(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    q = cfg.query()
    n = q.ms.n
    print(f"🔄 Solving {math.factorial(n) // 2} collinear ordering classes for n = {n}...")
    results = solve_collinear_all(q)
    summary = _envelope("cc-collinear", cfg)
    summary["count"] = len(results)
    summary["grad_tol"] = q.grad_tol
    summary["max_residual"] = max(r.residual for r in results)
    summary["results"] = [r.to_dict() for r in results]
    _save_json(summary, _path(out_dir, "cc_collinear.json"))
    print(f"✅ {len(results)} collinear central configurations")
    return summary


# --- cc-planar3 ---

def cmd_cc_planar3(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    q = cfg.query()
    plus, minus = equilateral_cc(q)
    side = equilateral_side(q.ms, q.inertia_I0)
    root = f_root(plus.sigma, q.pp.b, q.ms.total_mass, q.pp.alpha, q.pp.beta)
    summary = _envelope("cc-planar3", cfg)
    summary["side"] = side
    summary["f_root"] = root.root
    summary["f_root_relative_error"] = abs(root.root - side) / side
    summary["certificate"] = root.certificate.to_dict()
    summary["results"] = [plus.to_dict(), minus.to_dict()]
    _save_json(summary, _path(out_dir, "cc_planar3.json"))
    print(f"✅ Equilateral side {side:.17g}, f-root {root.root:.17g}")
    return summary


# --- simultaneous ---

def cmd_simultaneous(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    ms, pp = cfg.ms, cfg.pp
    pp.require_both_terms()
    tol = cfg.tol("simultaneous_tol", config.SIMULTANEOUS_TOL)
    if ms.n > config.MAX_COLLINEAR_BODIES:
        raise ConfigError(f"simultaneous supports n <= {config.MAX_COLLINEAR_BODIES}, got n = {ms.n}")

    records = []
    for ordering in Ordering.all_canonical(ms.n):
        gap = simultaneous_gap(ms, pp, ordering)
        records.append({"ordering": list(ordering.perm), "gap": gap, "simultaneous": gap <= tol})
    summary = _envelope("simultaneous", cfg)
    summary["tolerance"] = tol
    summary["results"] = records

    if cfg.grid:
        if ms.n != 3:
            raise ConfigError("grid sweeps need n = 3")
        ordering = cfg.get_ordering()
        m2_values = cfg.grid_axis("m2")
        m3_values = cfg.grid_axis("m3")
        m1 = ms.masses[0]
        rows = []
        cells = [(m2, m3) for m2 in m2_values for m3 in m3_values]
        with tqdm(total=len(cells), desc="Simultaneous gap grid", unit="cell",
                  disable=not config.SHOW_PROGRESS) as pbar:
            for m2, m3 in cells:
                gap = simultaneous_gap(MassSystem.from_list([m1, m2, m3]), pp, ordering)
                rows.append((m1, m2, m3, gap))
                pbar.update(1)
                pbar.set_postfix({"min gap": f"{min(r[3] for r in rows):.2e}"})
        _save_csv(["m1", "m2", "m3", "gap"], rows, _path(out_dir, "simultaneous_grid.csv"))
        summary["grid"] = {"ordering": list(ordering.perm), "rows": len(rows),
                           "min_gap": min(r[3] for r in rows)}

    _save_json(summary, _path(out_dir, "simultaneous.json"))
    print(f"✅ {sum(r['simultaneous'] for r in records)} of {len(records)} orderings are simultaneous")
    return summary


# --- simulate ---

def _state_from_row(row: Dict[str, float], cfg: RunConfig) -> Tuple[Any, float, float]:
    """Cartesian PhaseState or McGeheeState read back from a trajectory CSV row, plus its (tau, t)."""
    n = len(cfg.masses)
    if "rho" in row:
        dim = 2 if "s_y1" in row else 1
        s = np.array([row[c] for c in _body_columns("s_", n, dim)]).reshape(n, dim)
        u = np.array([row[c] for c in _body_columns("u_", n, dim)]).reshape(n, dim)
        return McGeheeState(row["rho"], s, row["v"], u), row.get("tau", 0.0), row.get("t", 0.0)
    dim = 2 if "y1" in row else 1
    try:
        r = np.array([row[c] for c in _body_columns("", n, dim)]).reshape(n, dim)
        p = np.array([row[c] for c in _body_columns("p", n, dim)]).reshape(n, dim)
    except KeyError as e:
        raise ConfigError(f"initial_state: csv row is missing column {e}")
    return PhaseState(Configuration(r), p), 0.0, row.get("t", 0.0)


def load_initial_state(cfg: RunConfig) -> Tuple[Any, float, float]:
    kind = cfg.initial_kind()
    if kind == "cartesian":
        return cfg.cartesian_state(), 0.0, 0.0
    if kind == "mcgehee":
        return cfg.mcgehee_state(), 0.0, 0.0
    row, _ = cfg.csv_row()
    return _state_from_row(row, cfg)


def _check_energy(cfg: RunConfig, ps: PhaseState) -> float:
    energy = model.hamiltonian(ps, cfg.ms, cfg.pp)
    if cfg.energy_h is not None:
        tol = cfg.tol("energy_tol", 1e-9) * max(1.0, abs(cfg.energy_h))
        if abs(energy - cfg.energy_h) > tol:
            raise ConfigError(f"energy_h mismatch: config says h = {cfg.energy_h:.17g} but the initial state has "
                              f"H = {energy:.17g}")
    return energy


def cmd_simulate(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    ms, pp = cfg.ms, cfg.pp
    state, tau0, t0 = load_initial_state(cfg)
    st = None
    if isinstance(state, McGeheeState):
        st = state.validate(ms)
        ps = from_mcgehee(st, ms, pp)
    else:
        ps = state
    ps.validate(ms)
    energy = _check_energy(cfg, ps)
    span = cfg.span or DEFAULT_SPAN
    rel_tol = cfg.tol("rel_tol", config.DEFAULT_RTOL)
    abs_tol = cfg.tol("abs_tol", config.DEFAULT_ATOL)
    n, dim = ms.n, ps.config.dim
    summary = _envelope("simulate", cfg)
    summary["mode"] = cfg.mode
    summary["initial_energy"] = energy

    if cfg.mode == "cartesian":
        print(f"🔄 Integrating Cartesian dynamics over t in [{t0:g}, {t0 + span:g}]...")
        trajectory = integrate(model.cartesian_rhs(ms, pp, dim), ps.flat, (t0, t0 + span),
                               rel_tol=rel_tol, abs_tol=abs_tol, monitors=model.cartesian_monitors(ms, pp, dim))
        header = ["t"] + _body_columns("", n, dim) + _body_columns("p", n, dim) + ["energy", "angular_momentum"]
        rows = [
            [t] + list(y) + [e, j]
            for t, y, e, j in zip(trajectory.times, trajectory.states,
                                  trajectory.conserved_residuals["energy"],
                                  trajectory.conserved_residuals["angular_momentum"])
        ]
        summary["energy_drift"] = trajectory.drift("energy")
        summary["angular_momentum_drift"] = trajectory.drift("angular_momentum")
    else:
        pp.require_manev()
        if st is None:
            st = to_mcgehee(ps, ms, pp)
        layout = StateLayout(n, dim, with_time=True)
        rho_floor = cfg.tol("rho_floor", config.DEFAULT_RHO_FLOOR)
        events = [Event("collapse", lambda tau, y: y[0] - rho_floor, terminal=True, direction=-1)]
        print(f"🔄 Integrating McGehee dynamics over tau in [{tau0:g}, {tau0 + span:g}]...")
        trajectory = integrate(mcgehee_rhs(ms, pp, dim, with_time=True), layout.pack(st, t0), (tau0, tau0 + span),
                               rel_tol=rel_tol, abs_tol=abs_tol, events=events,
                               renormalizer=mcgehee_renormalizer(layout, ms),
                               monitors=mcgehee_monitors(ms, pp, energy, layout))
        header = (["tau", "t", "rho", "v"] + _body_columns("s_", n, dim) + _body_columns("u_", n, dim)
                  + ["energy_residual"])
        rows = [
            [tau, y[-1], y[0], y[1]] + list(y[layout.s_slice]) + list(y[layout.u_slice]) + [e]
            for tau, y, e in zip(trajectory.times, trajectory.states, trajectory.conserved_residuals["energy"])
        ]
        summary["max_energy_residual"] = trajectory.max_abs("energy")
        summary["max_sphere_residual"] = trajectory.max_abs("sphere")
        summary["max_orthogonality_residual"] = trajectory.max_abs("orthogonality")
        summary["rho_min"] = float(np.min(trajectory.states[:, 0]))
        summary["rho_max"] = float(np.max(trajectory.states[:, 0]))

    summary["termination"] = trajectory.termination
    summary["steps"] = len(trajectory.times) - 1
    summary["end"] = trajectory.final_time
    summary["columns"] = header
    _save_csv(header, rows, _path(out_dir, "simulate.csv"))
    _save_json(summary, _path(out_dir, "simulate.json"))
    print(f"✅ Simulation finished ({trajectory.termination})")
    return summary


# --- collision-flow ---

def _perturbed_start(cfg: RunConfig, reports) -> McGeheeState:
    ms, pp = cfg.ms, cfg.pp
    choice = cfg.start.get("equilibrium", 0)
    v_sign = -1 if cfg.start.get("v_sign", 1) in ("-", -1) else 1
    candidates = [r for r in reports if r.v_sign == v_sign]
    if isinstance(choice, str):
        matches = [r for r in candidates if r.label == choice]
        if not matches:
            raise ConfigError(f"start.equilibrium: no equilibrium labelled {choice!r}")
        rep = matches[0]
    else:
        if isinstance(choice, bool) or not isinstance(choice, int) or not 0 <= choice < len(candidates):
            raise ConfigError(f"start.equilibrium must be a label or an index in 0..{len(candidates) - 1}, "
                              f"got {choice!r}")
        rep = candidates[choice]
    eps = float(cfg.start.get("perturbation", 1e-3))
    s0 = rep.s0.embedded(2) if rep.s0.dim < 2 else rep.s0
    basis = model.tangent_basis(s0, ms)
    rng = np.random.default_rng(cfg.seed)
    s = s0.positions.reshape(-1) + eps * basis @ rng.standard_normal(basis.shape[1])
    s = s / math.sqrt(np.sum(ms.metric(2) * s * s))
    u_dir = ms.metric(2) * (model.tangent_basis(s.reshape(ms.n, 2), ms) @ rng.standard_normal(basis.shape[1]))
    return state_on_C(s.reshape(ms.n, 2), eps * u_dir.reshape(ms.n, 2), ms, pp, v_sign)


def cmd_collision_flow(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    ms, pp = cfg.ms, cfg.pp
    pp.require_manev()
    reports = find_equilibria(ms, pp, central_configurations_of_V(ms, pp), ambient="planar")
    if cfg.initial_state:
        state, _, _ = load_initial_state(cfg)
        if not isinstance(state, McGeheeState) or not on_collision_manifold(state, ms, pp):
            raise ConfigError("initial_state for collision-flow must be a McGehee state on C (rho = 0)")
        st0 = state
    else:
        st0 = _perturbed_start(cfg, reports)

    print("🔄 Integrating the flow on the collision manifold...")
    orbit = integrate_on_C(st0, ms, pp, tau_max=cfg.span or config.TAU_BUDGET,
                           rel_tol=cfg.tol("rel_tol", config.COLLISION_RTOL),
                           abs_tol=cfg.tol("abs_tol", config.DEFAULT_ATOL), equilibria=reports)
    layout = orbit.layout
    n, dim = ms.n, layout.dim
    header = ["tau", "v"] + _body_columns("s_", n, dim) + _body_columns("u_", n, dim) + ["c_residual"]
    traj = orbit.trajectory
    rows = [
        [tau, y[1]] + list(y[layout.s_slice]) + list(y[layout.u_slice]) + [2.0 * e]
        for tau, y, e in zip(traj.times, traj.states, traj.conserved_residuals["energy"])
    ]
    summary = _envelope("collision-flow", cfg)
    summary.update(orbit.summary())
    summary["columns"] = header
    summary["equilibria"] = [r.to_dict() for r in reports]
    _save_csv(header, rows, _path(out_dir, "collision_flow.csv"))
    _save_json(summary, _path(out_dir, "collision_flow.json"))
    print(f"✅ Collision-manifold orbit finished ({orbit.termination})")
    return summary


# --- eigen ---

def _eigen_record(rep, ms, pp) -> Dict[str, Any]:
    record = rep.to_dict()
    lin = linearize_at_equilibrium(rep, ms, pp)
    record["linearization"] = lin.to_dict()
    try:
        dims = manifold_dimensions(rep)
        record["manifold_dimensions"] = {"unstable": dims[0], "stable": dims[1], "energy_surface": dims[2],
                                         "verified": True}
    except MismatchError as e:
        record["manifold_dimensions"] = {"formula": list(rep.formula_dims),
                                         "counted": [rep.dim_unstable, rep.dim_stable],
                                         "energy_surface": rep.dim_energy, "verified": False, "reason": str(e)}
    return record


def cmd_eigen(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    ms, pp = cfg.ms, cfg.pp
    pp.require_manev()
    if not pp.b > 2.0:
        raise InvalidParamsError(f"eigen needs b > 2, got b={pp.b}")
    ccs = central_configurations_of_V(ms, pp)
    records = [_eigen_record(rep, ms, pp) for rep in find_equilibria(ms, pp, ccs)]
    collinear = [cc for cc in ccs if cc.kind == "collinear"]
    planar_view = [_eigen_record(rep, ms, pp) for rep in find_equilibria(ms, pp, collinear, ambient="planar")]
    summary = _envelope("eigen", cfg)
    summary["equilibria"] = records
    summary["collinear_in_planar_ambient"] = planar_view
    summary["max_spectrum_deviation"] = max(r["linearization"]["max_deviation"] for r in records + planar_view)
    _save_json(summary, _path(out_dir, "eigen.json"))
    print(f"✅ {len(records)} equilibria analysed")
    return summary


# --- homothetic ---

def _homothetic_shape(cfg: RunConfig) -> Configuration:
    ms, pp = cfg.ms, cfg.pp
    shape = cfg.shape or ("equilateral" if ms.n == 3 else "collinear")
    if shape == "equilateral":
        return equilateral_configuration(ms, 1.0)
    if shape == "collinear":
        return solve_collinear_ordering(cfg.get_ordering(), CCQuery(ms, pp, 1.0)).config
    raise ConfigError(f"shape must be 'equilateral' or 'collinear', got {shape!r}")


def cmd_homothetic(cfg: RunConfig, out_dir: str) -> Dict[str, Any]:
    ms, pp = cfg.ms, cfg.pp
    pp.require_manev()
    h = cfg.require_energy()
    s0 = _homothetic_shape(cfg)
    if not is_homothetic_admissible(s0, ms, pp, cfg.tol("simultaneous_tol", config.SIMULTANEOUS_TOL)):
        raise AdmissibilityError("the chosen shape is not a simultaneous central configuration")
    _, V = model.potential_terms(s0.positions, ms, pp)
    summary = _envelope("homothetic", cfg)
    summary["h"] = h
    summary["s0"] = s0.positions.tolist()
    summary["two_V"] = 2.0 * V

    if h < 0.0:
        print(f"🔄 Building the heteroclinic orbit for h = {h:g}...")
        orbit = heteroclinic_orbit(s0, ms, pp, h, rho_floor=cfg.tol("rho_floor", config.DEFAULT_RHO_FLOOR))
        rows = [[tau, rho, v, k] for (tau, rho, v), k in zip(orbit.samples, orbit.trajectory.conserved_residuals["K"])]
        _save_csv(["tau", "rho", "v", "K"], rows, _path(out_dir, "homothetic.csv"))
        summary["connection"] = True
        summary.update(orbit.summary())
    else:
        rhos = np.logspace(-8, 8, 401)
        v2 = np.array([energy_curve_v2(r, s0, ms, pp, h) for r in rhos])
        summary["connection"] = False
        summary["min_v2"] = float(np.min(v2))
        summary["min_v2_at_least_two_V"] = bool(np.min(v2) >= 2.0 * V)

    if ms.n == 3 and s0.dim == 2:
        try:
            summary["transversality_necessary"] = transversality_necessary(s0, ms, pp)
        except ToleranceError as e:
            summary["transversality_necessary"] = f"degenerate: {e}"

    if cfg.converse:
        shape = solve_collinear_ordering(cfg.get_ordering(), CCQuery(ms, pp, 1.0)).config
        probe = homothety_defect(shape, ms, pp, h=h if h < 0.0 else -1.0)
        summary["converse"] = {"ordering": list(cfg.get_ordering().perm),
                               "admissible": is_homothetic_admissible(shape, ms, pp),
                               **probe.summary()}

    _save_json(summary, _path(out_dir, "homothetic.json"))
    print("✅ Homothetic analysis finished")
    return summary


COMMANDS = {
    "cc-collinear": cmd_cc_collinear,
    "cc-planar3": cmd_cc_planar3,
    "simultaneous": cmd_simultaneous,
    "simulate": cmd_simulate,
    "collision-flow": cmd_collision_flow,
    "eigen": cmd_eigen,
    "homothetic": cmd_homothetic,
}
