"""
The flow on the total collision manifold C (rho = 0).

    v' = (b/2) v^2 + u^T M^-1 u - b V(s)
    s' = M^-1 u
    u' = (b/2 - 1) u v - (u^T M^-1 u) M s + b V(s) M s + grad V(s)

Equilibria sit at u = 0, v = +-sqrt(2 V(s0)) with s0 a central configuration
of V. For b > 2 the flow is gradient-like with respect to -v.
"""
import numpy as np
import scipy.linalg
import scipy.optimize
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import Util_Config as config
import Model as model
from Central_Config import (CCQuery, CCResult, PLANAR, COLLINEAR, restricted_spectrum, restricted_hessian_on_tangent,
                            check_central, rescale_to_inertia, is_simultaneous, cc_index, cc_residual,
                            equilateral_configuration, attach_spectrum)
from Collinear_Solver import solve_collinear_all
from Configuration import Configuration
from Integrator import Event, Trajectory, integrate, mcgehee_renormalizer
from Mass_System import MassSystem, PotentialParams
from McGehee import McGeheeState, StateLayout, collision_relation, mcgehee_monitors
from Util_Debug import DebugLog
from Util_Errors import (OffManifoldError, InvalidParamsError, DegenerateError, MismatchError,
                         NotCentralError, AdmissibilityError, ConfigError)


def _relation_scale(V: float) -> float:
    return max(1.0, 2.0 * V)


def _require_gradient_like(pp: PotentialParams):
    if not pp.b > 2.0:
        raise InvalidParamsError(f"eigenvalue and dimension reports need b > 2, got b={pp.b}")


def state_on_C(s, u, ms: MassSystem, pp: PotentialParams, v_sign: int = 1) -> McGeheeState:
    """Point of C over (s, u) with v = +-sqrt(2V(s) - u^T M^-1 u)."""
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    u = np.asarray(u, dtype=float).reshape(s.shape)
    _, V = model.potential_terms(s, ms, pp)
    slack = 2.0 * V - float(np.sum(u ** 2 / ms.m[:, None]))
    if slack < 0.0:
        raise OffManifoldError(f"u is too large for C at this s (2V - u^T M^-1 u = {slack:.3e})")
    return McGeheeState(rho=0.0, s=s, v=np.sign(v_sign) * np.sqrt(slack), u=u)


def _check_on_C(s, v, u, ms, pp, tol):
    st = McGeheeState(0.0, s, v, u)
    relation = collision_relation(st, ms, pp)
    _, V = model.potential_terms(st.s, ms, pp)
    if abs(relation) > tol * _relation_scale(V):
        raise OffManifoldError(f"state is off C: u^T M^-1 u + v^2 - 2V(s) = {relation:.3e}")
    return st


def field_on_C(s, v: float, u, ms: MassSystem, pp: PotentialParams,
               tol: float = config.MANIFOLD_TOL) -> Tuple[np.ndarray, float, np.ndarray]:
    """(s', v', u') on C."""
    pp.require_manev()
    st = _check_on_C(s, v, u, ms, pp, tol)
    b = pp.b
    _, V = model.potential_terms(st.s, ms, pp)
    Ms = ms.m[:, None] * st.s
    uMu = st.kinetic_u(ms)
    d_v = 0.5 * b * st.v ** 2 + uMu - b * V
    d_s = st.u / ms.m[:, None]
    d_u = (0.5 * b - 1.0) * st.v * st.u - uMu * Ms + b * V * Ms + model.grad_V(st.s, ms, pp)
    return d_s, d_v, d_u


def collision_rhs(ms: MassSystem, pp: PotentialParams, dim: int = 2):
    """Flat field on StateLayout(n, dim) with rho pinned at zero."""
    pp.require_manev()
    layout = StateLayout(ms.n, dim)

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        st, _ = layout.unpack(y)
        d_s, d_v, d_u = field_on_C(st.s, st.v, st.u, ms, pp, tol=np.inf)
        return np.concatenate([[0.0, d_v], d_s.reshape(-1), d_u.reshape(-1)])

    return rhs


def gradient_like_rate(st: McGeheeState, ms: MassSystem, pp: PotentialParams,
                       tol: float = config.MANIFOLD_TOL) -> float:
    """v' on C written as (1 - b/2) u^T M^-1 u; never positive for b >= 2."""
    if st.rho > tol:
        raise OffManifoldError(f"state is off C: rho = {st.rho:.3e}")
    _check_on_C(st.s, st.v, st.u, ms, pp, tol)
    return (1.0 - 0.5 * pp.b) * st.kinetic_u(ms)


def eigen_closed_form(lambdas: Sequence[float], v: float, b: float) -> List[Tuple[complex, complex]]:
    """Roots of mu^2 - (b/2 - 1) v mu - lambda = 0, minus root first."""
    pairs = []
    for lam in lambdas:
        root = np.emath.sqrt((b - 2.0) ** 2 * v ** 2 + 16.0 * lam)
        pairs.append((0.25 * ((b - 2.0) * v - root), 0.25 * ((b - 2.0) * v + root)))
    return pairs


# --- Equilibria ---

def central_configurations_of_V(ms: MassSystem, pp: PotentialParams, include_planar: bool = True) -> List[CCResult]:
    """Unit-inertia CCs of V alone: every collinear class, plus the equilateral triangle when n = 3."""
    pp_V = pp.only_b_term()
    ccs = solve_collinear_all(CCQuery(ms, pp_V, 1.0))
    if include_planar and ms.n == 3:
        cfg = equilateral_configuration(ms, 1.0)
        sigma, residual = cc_residual(cfg, ms, pp_V)
        ccs.append(attach_spectrum(CCResult(cfg, sigma, residual, "planar-equilateral", orientation=1), ms, pp_V))
    return ccs


@dataclass
class EquilibriumReport:
    s0: Configuration
    v_sign: int
    v_value: float
    b: float
    ambient: str
    lam: np.ndarray
    mu: List[Tuple[complex, complex]]
    index: int
    residual: float
    dim_unstable: Optional[int] = None
    dim_stable: Optional[int] = None
    zero_modes: Optional[int] = None
    dim_energy: int = 0
    formula_dims: Optional[Tuple[int, int]] = None
    formula_agrees: Optional[bool] = None
    label: str = ""

    @property
    def n(self) -> int:
        return self.s0.n

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "ambient": self.ambient,
            "v_sign": "+" if self.v_sign > 0 else "-",
            "v_value": self.v_value,
            "s0": self.s0.positions.tolist(),
            "residual": self.residual,
            "index": self.index,
            "lambda": [float(x) for x in self.lam],
            "mu": [[complex(m1), complex(m2)] for m1, m2 in self.mu],
            "dim_unstable": self.dim_unstable,
            "dim_stable": self.dim_stable,
            "zero_modes": self.zero_modes,
            "dim_energy": self.dim_energy,
            "formula_dims": list(self.formula_dims) if self.formula_dims else None,
            "formula_agrees": self.formula_agrees,
        }


def energy_surface_dimension(n: int, ambient: str) -> int:
    return 4 * n - 5 if ambient == PLANAR else 2 * n - 3


def formula_dimensions(n: int, index: int, v_sign: int, ambient: str) -> Tuple[int, int]:
    """(dim W^u, dim W^s) as stated for v > 0, swapped for v < 0."""
    if ambient == PLANAR:
        dims = (2 * n - 2 - index, 2 * n - 4 + index)
    else:
        dims = (n - 1, n - 2)
    return dims if v_sign > 0 else (dims[1], dims[0])


def _count_signs(values: Sequence[complex], scale: float) -> Tuple[int, int, int]:
    tol = config.ZERO_MODE_RATIO * scale
    real = np.real(np.asarray(values, dtype=complex))
    return int(np.sum(real > tol)), int(np.sum(real < -tol)), int(np.sum(np.abs(real) <= tol))


def _expected_spectrum(rep: EquilibriumReport) -> np.ndarray:
    values = [complex(rep.v_value), 0j]
    for m1, m2 in rep.mu:
        values.extend([complex(m1), complex(m2)])
    return np.array(values)


def _spectrum_scale(values: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(values)))) if len(values) else 1.0


def _ambient_for(cc: CCResult) -> str:
    return COLLINEAR if cc.kind == "collinear" else PLANAR


def _normalized(cfg: Configuration, ms: MassSystem, ambient: str) -> Configuration:
    cfg = rescale_to_inertia(cfg, ms, 1.0)
    if ambient == PLANAR and cfg.dim < 2:
        cfg = cfg.embedded(2)
    if ambient == COLLINEAR and cfg.dim > 1:
        cfg = Configuration(cfg.positions[:, :1])
    return cfg


def find_equilibria(ms: MassSystem, pp: PotentialParams, ccs_of_V: Sequence[CCResult],
                    ambient: Optional[str] = None,
                    tol: float = config.SPECTRUM_MATCH_TOL) -> List[EquilibriumReport]:
    """Two equilibria (v = +-sqrt(2V(s0))) per central configuration of V."""
    pp.require_manev()
    pp_V = pp.only_b_term()
    reports = []
    for cc in ccs_of_V:
        amb = ambient or _ambient_for(cc)
        s0 = _normalized(cc.config, ms, amb)
        _, V = model.potential_terms(s0.positions, ms, pp_V)
        balance = pp.b * V * ms.m[:, None] * s0.positions + model.grad_V(s0.positions, ms, pp_V)
        residual = float(np.max(np.abs(balance)))
        if residual > tol * max(1.0, pp.b * V):
            raise NotCentralError(f"b V(s0) M s0 + grad V(s0) = {residual:.3e} is not zero; s0 is not a CC of V")
        spectrum = restricted_spectrum(s0, ms, pp_V, amb)
        label = str(cc.ordering) if cc.ordering is not None else cc.kind
        for v_sign in (+1, -1):
            v_value = v_sign * np.sqrt(2.0 * V)
            rep = EquilibriumReport(s0=s0, v_sign=v_sign, v_value=float(v_value), b=pp.b, ambient=amb,
                                    lam=spectrum.eigenvalues, mu=eigen_closed_form(spectrum.eigenvalues, v_value, pp.b),
                                    index=spectrum.index, residual=residual,
                                    dim_energy=energy_surface_dimension(ms.n, amb), label=label)
            if pp.b > 2.0:
                values = _expected_spectrum(rep)
                positive, negative, zeros = _count_signs(values, _spectrum_scale(values))
                rep.dim_unstable, rep.dim_stable = positive, negative
                rep.zero_modes = zeros
                rep.formula_dims = formula_dimensions(ms.n, spectrum.index, v_sign, amb)
                rep.formula_agrees = rep.formula_dims == (rep.dim_unstable, rep.dim_stable)
            reports.append(rep)
    DebugLog.add_message(f"found {len(reports)} equilibria on C from {len(ccs_of_V)} CCs of V")
    return reports


# --- Linearization ---

@dataclass
class LinearizationReport:
    matrix: np.ndarray
    spectrum: np.ndarray
    closed_form: np.ndarray
    max_deviation: float
    positive: int
    negative: int
    zero_modes: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": int(self.matrix.shape[0]),
            "spectrum": [complex(x) for x in self.spectrum],
            "closed_form": [complex(x) for x in self.closed_form],
            "max_deviation": self.max_deviation,
            "positive": self.positive,
            "negative": self.negative,
            "zero_modes": self.zero_modes,
        }


def linearization_matrix(A: np.ndarray, v: float, b: float) -> np.ndarray:
    """diag(v, 0) beside [[0, I], [A, (b/2 - 1) v I]] for the chart (rho, v, x, y)."""
    k = A.shape[0]
    matrix = np.zeros((2 + 2 * k, 2 + 2 * k))
    matrix[0, 0] = v
    matrix[2:2 + k, 2 + k:] = np.eye(k)
    matrix[2 + k:, 2:2 + k] = A
    matrix[2 + k:, 2 + k:] = (0.5 * b - 1.0) * v * np.eye(k)
    return matrix


def linearize_at_equilibrium(rep: EquilibriumReport, ms: MassSystem, pp: PotentialParams,
                             ambient: Optional[str] = None,
                             tol: float = config.SPECTRUM_MATCH_TOL) -> LinearizationReport:
    _require_gradient_like(pp)
    pp_V = pp.only_b_term()
    amb = ambient or rep.ambient
    s0 = _normalized(rep.s0, ms, amb)
    A, _ = restricted_hessian_on_tangent(s0, ms, pp_V, amb)
    lam = scipy.linalg.eigh(A, eigvals_only=True) if A.size else np.zeros(0)

    _, V = model.potential_terms(s0.positions, ms, pp_V)
    zero_tol = config.ZERO_MODE_RATIO * max(float(np.max(np.abs(lam))) if lam.size else 0.0, pp.b * V)
    zero_count = int(np.sum(np.abs(lam) <= zero_tol))
    expected_zero = 1 if amb == PLANAR else 0
    if zero_count != expected_zero:
        raise DegenerateError(f"A has {zero_count} near-zero eigenvalues in the {amb} ambient (expected {expected_zero})")

    matrix = linearization_matrix(A, rep.v_value, pp.b)
    spectrum = scipy.linalg.eigvals(matrix)
    values = [complex(rep.v_value), 0j]
    for m1, m2 in eigen_closed_form(lam, rep.v_value, pp.b):
        values.extend([complex(m1), complex(m2)])
    closed_form = np.array(values)

    cost = np.abs(spectrum[:, None] - closed_form[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    deviation = float(np.max(cost[rows, cols]))
    if deviation > tol * _spectrum_scale(closed_form):
        raise MismatchError(f"linearized spectrum deviates from the closed form by {deviation:.3e}",
                            expected=closed_form, counted=spectrum)
    positive, negative, zeros = _count_signs(spectrum, _spectrum_scale(spectrum))
    return LinearizationReport(matrix, spectrum, closed_form[cols[np.argsort(rows)]], deviation, positive, negative, zeros)


def finite_difference_blocks(rep: EquilibriumReport, ms: MassSystem, pp: PotentialParams,
                             step: float = 1e-6) -> Tuple[np.ndarray, np.ndarray]:
    """(A, D) from central differences of the C field in the tangent chart at the equilibrium.

    A is the response of y' to x and D the response of y' to y, where s = s0 + B x
    and u = M B y; D should equal (b/2 - 1) v I.
    """
    pp_V = pp.only_b_term()
    s0 = _normalized(rep.s0, ms, rep.ambient)
    _, basis = restricted_hessian_on_tangent(s0, ms, pp_V, rep.ambient)
    k = basis.shape[1]
    metric = ms.metric(s0.dim)
    base = s0.positions.reshape(-1)

    def y_prime(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        s = (base + basis @ x).reshape(s0.positions.shape)
        u = (metric * (basis @ y)).reshape(s0.positions.shape)
        _, _, d_u = field_on_C(s, rep.v_value, u, ms, pp, tol=np.inf)
        return basis.T @ d_u.reshape(-1)

    A = np.zeros((k, k))
    D = np.zeros((k, k))
    zero = np.zeros(k)
    for j in range(k):
        e = np.zeros(k)
        e[j] = step
        A[:, j] = (y_prime(e, zero) - y_prime(-e, zero)) / (2.0 * step)
        D[:, j] = (y_prime(zero, e) - y_prime(zero, -e)) / (2.0 * step)
    return A, D


def manifold_dimensions(rep: EquilibriumReport, ambient: Optional[str] = None) -> Tuple[int, int, int]:
    """(dim W^u, dim W^s, dim E_h) from the stated formulas, cross-checked against the spectrum signs."""
    if not rep.b > 2.0:
        raise InvalidParamsError(f"dimension reports need b > 2, got b={rep.b}")
    amb = ambient or rep.ambient
    if amb != rep.ambient:
        raise ConfigError(f"report was computed in the {rep.ambient} ambient, not {amb}")
    dims = formula_dimensions(rep.n, rep.index, rep.v_sign, amb)
    dim_energy = energy_surface_dimension(rep.n, amb)
    values = _expected_spectrum(rep)
    positive, negative, zeros = _count_signs(values, _spectrum_scale(values))
    if (positive, negative) != dims:
        raise MismatchError(f"spectrum has {positive} unstable and {negative} stable directions, "
                            f"formula gives {dims} (index {rep.index})", expected=dims, counted=(positive, negative))
    if positive + negative + zeros - 1 != dim_energy:
        raise MismatchError(f"dimension accounting {positive} + {negative} + {zeros} - 1 != {dim_energy}",
                            expected=dim_energy, counted=positive + negative + zeros - 1)
    return dims[0], dims[1], dim_energy


def transversality_necessary(s0: Configuration, ms: MassSystem, pp: PotentialParams) -> bool:
    """True iff V restricted to the sphere has a non-degenerate minimum (modulo rotation) at s0."""
    pp_V = pp.only_b_term()
    amb = PLANAR
    s_planar = _normalized(s0, ms, amb)
    if pp.alpha > 0.0 and not is_simultaneous(s_planar, ms, pp):
        raise AdmissibilityError("s0 is not a simultaneous central configuration")
    sigma, residual = check_central(s_planar, ms, pp_V)
    res = CCResult(config=s_planar, sigma=sigma, residual=residual, kind="planar")
    return cc_index(res, ms, pp_V, amb) == 0


# --- Orbits on C ---

@dataclass
class LimitEquilibrium:
    label: str
    v_sign: int
    shape_distance: float


@dataclass
class CollisionOrbit:
    trajectory: Trajectory
    layout: StateLayout
    v_series: np.ndarray
    v_monotone: bool
    v_decrease: float
    limit: Optional[LimitEquilibrium] = None

    @property
    def termination(self) -> str:
        return self.trajectory.termination

    def summary(self) -> Dict[str, Any]:
        data = {
            "termination": self.termination,
            "tau_end": self.trajectory.final_time,
            "v_start": float(self.v_series[0]),
            "v_end": float(self.v_series[-1]),
            "v_monotone": self.v_monotone,
            "v_decrease": self.v_decrease,
            "max_relation_residual": self.trajectory.max_abs("energy"),
        }
        if self.limit is not None:
            data["limit"] = {"label": self.limit.label, "v_sign": "+" if self.limit.v_sign > 0 else "-",
                             "shape_distance": self.limit.shape_distance}
        return data


def _mutual_distances(pos: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(pos.shape[0], k=1)
    return np.linalg.norm(pos[i] - pos[j], axis=1)


def nearest_equilibrium(st: McGeheeState, equilibria: Sequence[EquilibriumReport]) -> Optional[LimitEquilibrium]:
    """Closest equilibrium with matching v sign, comparing mutual distances (rotation and reflection free)."""
    sign = 1 if st.v >= 0.0 else -1
    best = None
    here = _mutual_distances(st.s)
    for rep in equilibria:
        if rep.v_sign != sign:
            continue
        distance = float(np.max(np.abs(_mutual_distances(rep.s0.positions) - here)))
        if best is None or distance < best.shape_distance:
            best = LimitEquilibrium(rep.label, sign, distance)
    return best


def integrate_on_C(st0: McGeheeState, ms: MassSystem, pp: PotentialParams,
                   tau_max: float = config.TAU_BUDGET, rel_tol: float = config.COLLISION_RTOL,
                   abs_tol: float = config.DEFAULT_ATOL,
                   equilibria: Sequence[EquilibriumReport] = (),
                   stop_at_equilibrium: bool = True) -> CollisionOrbit:
    """Integrate the flow on C until an equilibrium is approached, two bodies near-collide or tau_max passes."""
    pp.require_manev()
    _check_on_C(st0.s, st0.v, st0.u, ms, pp, config.MANIFOLD_TOL)
    layout = StateLayout(ms.n, st0.dim)
    rhs = collision_rhs(ms, pp, st0.dim)

    def equilibrium_gap(tau, y):
        st, _ = layout.unpack(y)
        d_s, d_v, d_u = field_on_C(st.s, st.v, st.u, ms, pp, tol=np.inf)
        field_norm = float(np.sqrt(d_v ** 2 + np.sum(d_s ** 2) + np.sum(d_u ** 2)))
        return max(float(np.linalg.norm(st.u)), field_norm) - config.EQUILIBRIUM_TOL

    def binary_gap(tau, y):
        st, _ = layout.unpack(y)
        return float(np.min(_mutual_distances(st.s))) - config.BINARY_APPROACH

    events = [Event("binary-approach", binary_gap, terminal=True, direction=-1)]
    if stop_at_equilibrium:
        events.append(Event("equilibrium", equilibrium_gap, terminal=True, direction=-1))

    monitors = mcgehee_monitors(ms, pp, 0.0, layout)
    monitors["v"] = lambda tau, y: float(y[1])
    trajectory = integrate(rhs, layout.pack(st0), (0.0, tau_max), rel_tol=rel_tol, abs_tol=abs_tol,
                           events=events, renormalizer=mcgehee_renormalizer(layout, ms), monitors=monitors)

    v_series = trajectory.conserved_residuals["v"]
    steps = np.diff(v_series)
    slack = config.MANIFOLD_TOL * max(1.0, float(np.max(np.abs(v_series))))
    v_monotone = bool(np.all(steps <= slack)) if pp.b >= 2.0 else False
    final, _ = layout.unpack(trajectory.final_state)
    limit = nearest_equilibrium(final, equilibria) if trajectory.termination == "event:equilibrium" else None
    return CollisionOrbit(trajectory, layout, v_series, v_monotone, float(v_series[0] - v_series[-1]), limit)
