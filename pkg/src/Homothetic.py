"""
Homothetic motion on the invariant plane P = {s = s0, u = 0} of a
simultaneous central configuration s0 (Manev-type, a = 1).

On P the energy relation reads v^2 / 2 = rho^(b-1) W(s0) + rho^b h + K with
K = V(s0). For h < 0 the orbit leaves the ejection equilibrium
(rho, v) = (0, +sqrt(2V)), turns at rho_max and falls into the collision
equilibrium (0, -sqrt(2V)).
"""
import math
import numpy as np
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import Util_Config as config
import Model as model
from Central_Config import cc_residual, simultaneous_residual, rescale_to_inertia
from Configuration import Configuration, PhaseState
from Integrator import Event, Trajectory, integrate, mcgehee_renormalizer
from Mass_System import MassSystem, PotentialParams
from McGehee import McGeheeState, StateLayout, from_mcgehee, mcgehee_rhs, mcgehee_monitors
from Util_Debug import DebugLog
from Util_Errors import AdmissibilityError, EnergySignError, NoConvergenceError, InvalidParamsError


def _unit(s0: Configuration, ms: MassSystem) -> Configuration:
    return rescale_to_inertia(s0, ms, 1.0)


def _terms(s0: Configuration, ms: MassSystem, pp: PotentialParams) -> Tuple[float, float]:
    return model.potential_terms(_unit(s0, ms).positions, ms, pp)


def is_homothetic_admissible(s0: Configuration, ms: MassSystem, pp: PotentialParams,
                             tol: float = config.SIMULTANEOUS_TOL) -> bool:
    """True iff s0 is a simultaneous central configuration within tol."""
    s_unit = _unit(s0, ms)
    if pp.alpha == 0.0 or pp.beta == 0.0:
        return cc_residual(s_unit, ms, pp)[1] <= tol
    _, _, res_W, res_V = simultaneous_residual(s_unit, ms, pp)
    return max(res_W, res_V) <= tol


def _require_admissible(s0, ms, pp):
    pp.require_manev()
    if not is_homothetic_admissible(s0, ms, pp):
        raise AdmissibilityError("s0 is not a simultaneous central configuration; P is not invariant")


def plane_field(rho: float, v: float, s0: Configuration, ms: MassSystem, pp: PotentialParams,
                h: float) -> Tuple[float, float]:
    """(rho', v') = (rho v, (b-1) rho^(b-1) W(s0) + b rho^b h)."""
    _require_admissible(s0, ms, pp)
    W, _ = _terms(s0, ms, pp)
    b = pp.b
    return rho * v, (b - 1.0) * rho ** (b - 1.0) * W + b * rho ** b * h


def plane_field_unreduced(rho: float, v: float, s0: Configuration, ms: MassSystem,
                          pp: PotentialParams) -> Tuple[float, float]:
    """(rho', v') before substituting the energy relation: v' = (b/2) v^2 - rho^(b-1) W - b V."""
    W, V = _terms(s0, ms, pp)
    b = pp.b
    return rho * v, 0.5 * b * v ** 2 - rho ** (b - 1.0) * W - b * V


def energy_curve_v2(rho: float, s0: Configuration, ms: MassSystem, pp: PotentialParams, h: float) -> float:
    """v^2 on the homothetic orbit: 2 (rho^(b-1) W(s0) + rho^b h + V(s0))."""
    if not pp.b > 1.0:
        raise InvalidParamsError(f"the energy curve needs b > 1, got b={pp.b}")
    W, V = _terms(s0, ms, pp)
    return 2.0 * (rho ** (pp.b - 1.0) * W + rho ** pp.b * h + V)


def rho_max(s0: Configuration, ms: MassSystem, pp: PotentialParams, h: float) -> float:
    """The unique rho > 0 with v^2 = 0, by geometric expansion from rho = 1 and bisection."""
    if not h < 0.0:
        raise EnergySignError(f"rho_max exists only for h < 0, got h={h}")
    W, V = _terms(s0, ms, pp)
    b = pp.b

    def curve(r):
        return 2.0 * (r ** (b - 1.0) * W + r ** b * h + V)

    lo, hi = 0.0, 1.0
    while curve(hi) >= 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-15 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if curve(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class PlaneOrbit:
    s0: Configuration
    h: float
    samples: np.ndarray
    rho_max: float
    rho_max_bisection: float
    K: float
    k_drift: float
    tau_turn: float
    termination: str
    trajectory: Trajectory

    @property
    def v_start(self) -> float:
        return float(self.samples[0, 2])

    @property
    def v_end(self) -> float:
        return float(self.samples[-1, 2])

    def v_at(self, tau: float) -> float:
        return float(self.trajectory.interpolate(tau)[1])

    def summary(self) -> Dict[str, Any]:
        return {
            "termination": self.termination,
            "h": self.h,
            "K": self.K,
            "K_drift": self.k_drift,
            "rho_max": self.rho_max,
            "rho_max_bisection": self.rho_max_bisection,
            "rho_max_relative_error": abs(self.rho_max - self.rho_max_bisection) / self.rho_max_bisection,
            "tau_turn": self.tau_turn,
            "tau_end": float(self.samples[-1, 0]),
            "v_start": self.v_start,
            "v_end": self.v_end,
            "endpoint_speed": math.sqrt(2.0 * self.K),
        }


def heteroclinic_orbit(s0: Configuration, ms: MassSystem, pp: PotentialParams, h: float,
                       rho_floor: float = config.DEFAULT_RHO_FLOOR,
                       rel_tol: float = config.PLANE_RTOL, abs_tol: float = config.PLANE_ATOL,
                       tau_max: float = config.TAU_BUDGET) -> PlaneOrbit:
    """Ejection-collision orbit from rho_floor back down to rho_floor, integrated in (ln rho, v)."""
    _require_admissible(s0, ms, pp)
    if not h < 0.0:
        raise EnergySignError(f"heteroclinic orbits need h < 0, got h={h}")
    if not pp.b > 1.0:
        raise InvalidParamsError(f"heteroclinic orbits need b > 1, got b={pp.b}")
    W, V = _terms(s0, ms, pp)
    b = pp.b
    floor = math.log(rho_floor)

    def field(tau, y):
        log_rho, v = y
        return np.array([v, (b - 1.0) * math.exp((b - 1.0) * log_rho) * W + b * math.exp(b * log_rho) * h])

    def k_value(tau, y):
        rho = math.exp(y[0])
        return 0.5 * y[1] ** 2 - rho ** (b - 1.0) * W - rho ** b * h

    events = [
        Event("turning", lambda tau, y: y[1], terminal=False, direction=-1),
        Event("collapse", lambda tau, y: y[0] - floor, terminal=True, direction=-1),
    ]
    v0 = math.sqrt(energy_curve_v2(rho_floor, s0, ms, pp, h))
    trajectory = integrate(field, np.array([floor, v0]), (0.0, tau_max), rel_tol=rel_tol, abs_tol=abs_tol,
                           events=events, monitors={"K": k_value})
    if trajectory.termination != "event:collapse":
        raise NoConvergenceError(f"orbit did not fall back to rho = {rho_floor:g} within tau = {tau_max:g}")
    turning = trajectory.hits("turning")
    if not turning:
        raise NoConvergenceError("orbit never reached its turning point")

    samples = np.column_stack([trajectory.times, np.exp(trajectory.states[:, 0]), trajectory.states[:, 1]])
    k_series = trajectory.conserved_residuals["K"]
    orbit = PlaneOrbit(
        s0=_unit(s0, ms),
        h=h,
        samples=samples,
        rho_max=math.exp(turning[0].y[0]),
        rho_max_bisection=rho_max(s0, ms, pp, h),
        K=V,
        k_drift=float(np.max(np.abs(k_series - V))),
        tau_turn=turning[0].t,
        termination=trajectory.termination,
        trajectory=trajectory,
    )
    DebugLog.add_message(f"heteroclinic orbit: rho_max={orbit.rho_max:.12g}, K drift {orbit.k_drift:.2e}")
    return orbit


def orbit_phase_states(orbit: PlaneOrbit, ms: MassSystem, pp: PotentialParams) -> List[PhaseState]:
    """Cartesian states along the orbit: r = rho s0, p = rho^(-b/2) v M s0."""
    zero = np.zeros_like(orbit.s0.positions)
    return [from_mcgehee(McGeheeState(rho, orbit.s0.positions, v, zero), ms, pp) for _, rho, v in orbit.samples]


@dataclass
class HomothetyProbe:
    max_defect: float
    defect_series: np.ndarray
    trajectory: Trajectory
    layout: StateLayout

    def summary(self) -> Dict[str, Any]:
        return {"max_defect": self.max_defect, "termination": self.trajectory.termination,
                "tau_end": self.trajectory.final_time}


def homothety_defect(s0: Configuration, ms: MassSystem, pp: PotentialParams, rho0: float = 0.5,
                     h: float = -1.0, tau_max: float = 20.0,
                     rel_tol: float = config.DEFAULT_RTOL, abs_tol: float = config.DEFAULT_ATOL,
                     rho_floor: float = config.DEFAULT_RHO_FLOOR) -> HomothetyProbe:
    """Run the full McGehee field from (rho0, s0, u = 0) and track max |s(tau) - s0|_M."""
    pp.require_manev()
    s_unit = _unit(s0, ms)
    v2 = energy_curve_v2(rho0, s_unit, ms, pp, h)
    if v2 < 0.0:
        raise EnergySignError(f"no real v at rho0={rho0} on the level h={h} (v^2 = {v2:.3e})")
    layout = StateLayout(ms.n, s_unit.dim)
    st0 = McGeheeState(rho0, s_unit.positions, math.sqrt(v2), np.zeros_like(s_unit.positions))
    base = s_unit.positions.reshape(-1)
    metric = ms.metric(s_unit.dim)

    def defect(tau, y):
        diff = y[layout.s_slice] - base
        return float(np.sqrt(np.sum(metric * diff * diff)))

    monitors = mcgehee_monitors(ms, pp, h, layout)
    monitors["defect"] = defect
    events = [Event("collapse", lambda tau, y: y[0] - rho_floor, terminal=True, direction=-1)]
    trajectory = integrate(mcgehee_rhs(ms, pp, s_unit.dim), layout.pack(st0), (0.0, tau_max),
                           rel_tol=rel_tol, abs_tol=abs_tol, events=events,
                           renormalizer=mcgehee_renormalizer(layout, ms), monitors=monitors)
    series = trajectory.conserved_residuals["defect"]
    return HomothetyProbe(float(np.max(series)), series, trajectory, layout)
