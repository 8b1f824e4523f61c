"""
McGehee coordinates for Manev-type problems (a = 1).

    rho = (r^T M r)^(1/2),  s = r / rho,  v = rho^(b/2) p^T s,
    u = rho^(b/2) (p - (p^T s) M s),   d tau = rho^(-1-b/2) dt

The total collision rho = 0 becomes the invariant manifold
C = {rho = 0, u^T M^-1 u + v^2 = 2 V(s)}.
"""
import numpy as np
from dataclasses import dataclass
from typing import Callable, NamedTuple, Tuple, Union

import Util_Config as config
import Model as model
from Configuration import Configuration, PhaseState
from Mass_System import MassSystem, PotentialParams
from Util_Errors import ZeroSizeError, ConstraintError


@dataclass(frozen=True)
class EnergyLevel:
    h: float

    def __float__(self) -> float:
        return float(self.h)


@dataclass(frozen=True, eq=False)
class McGeheeState:
    rho: float
    s: np.ndarray
    v: float
    u: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        u = np.array(self.u, dtype=float).reshape(s.shape)
        s.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "v", float(self.v))
        if self.rho < 0.0:
            raise ConstraintError(f"rho must be >= 0, got {self.rho}")

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def dim(self) -> int:
        return self.s.shape[1]

    def sphere_residual(self, ms: MassSystem) -> float:
        return float(np.sum(ms.m[:, None] * self.s ** 2)) - 1.0

    def orthogonality_residual(self) -> float:
        return float(np.sum(self.u * self.s))

    def validate(self, ms: MassSystem, tol: float = config.CONSTRAINT_TOL) -> "McGeheeState":
        if self.n != ms.n:
            raise ConstraintError(f"state has {self.n} bodies but the mass system has {ms.n}")
        if abs(self.sphere_residual(ms)) > tol:
            raise ConstraintError(f"s^T M s = 1 violated by {self.sphere_residual(ms):.3e}")
        if abs(self.orthogonality_residual()) > tol:
            raise ConstraintError(f"u^T s = 0 violated by {self.orthogonality_residual():.3e}")
        return self

    def kinetic_u(self, ms: MassSystem) -> float:
        """u^T M^-1 u."""
        return float(np.sum(self.u ** 2 / ms.m[:, None]))

    def to_dict(self):
        return {"rho": self.rho, "s": self.s.tolist(), "v": self.v, "u": self.u.tolist()}


class McGeheeDerivative(NamedTuple):
    rho: float
    s: np.ndarray
    v: float
    u: np.ndarray


@dataclass(frozen=True)
class StateLayout:
    """Flat packing [rho, v, s..., u..., (t)] used by the integrator."""
    n: int
    dim: int
    with_time: bool = False

    @property
    def size(self) -> int:
        return 2 + 2 * self.n * self.dim + (1 if self.with_time else 0)

    @property
    def s_slice(self) -> slice:
        return slice(2, 2 + self.n * self.dim)

    @property
    def u_slice(self) -> slice:
        k = self.n * self.dim
        return slice(2 + k, 2 + 2 * k)

    def pack(self, st: McGeheeState, t: float = 0.0) -> np.ndarray:
        parts = [np.array([st.rho, st.v]), st.s.reshape(-1), st.u.reshape(-1)]
        if self.with_time:
            parts.append(np.array([t]))
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray) -> Tuple[McGeheeState, float]:
        st = McGeheeState(
            rho=max(float(y[0]), 0.0),
            s=y[self.s_slice].reshape(self.n, self.dim),
            v=float(y[1]),
            u=y[self.u_slice].reshape(self.n, self.dim),
        )
        return st, float(y[-1]) if self.with_time else 0.0


def to_mcgehee(ps: PhaseState, ms: MassSystem, pp: PotentialParams) -> McGeheeState:
    pp.require_manev()
    r = ps.config.positions
    p = ps.momenta
    rho = np.sqrt(model.moment_of_inertia(r, ms))
    if rho == 0.0:
        raise ZeroSizeError("total collision state (rho = 0) has no McGehee image")
    s = r / rho
    radial = float(np.sum(p * s))
    scale = rho ** (pp.b / 2.0)
    u = scale * (p - radial * ms.m[:, None] * s)
    return McGeheeState(rho=rho, s=s, v=scale * radial, u=u)


def from_mcgehee(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> PhaseState:
    if st.rho == 0.0:
        raise ZeroSizeError("states on the collision manifold (rho = 0) have no Cartesian preimage")
    r = st.rho * st.s
    p = st.rho ** (-pp.b / 2.0) * (st.u + st.v * ms.m[:, None] * st.s)
    return PhaseState(Configuration(r), p)


def vector_field(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> McGeheeDerivative:
    pp.require_manev()
    b = pp.b
    Ms = ms.m[:, None] * st.s
    W, V = model.potential_terms(st.s, ms, pp)
    gW = model.grad_W(st.s, ms, pp)
    gV = model.grad_V(st.s, ms, pp)
    uMu = st.kinetic_u(ms)
    weak = st.rho ** (b - 1.0)

    d_rho = st.rho * st.v
    d_v = 0.5 * b * st.v ** 2 + uMu - weak * W - b * V
    d_s = st.u / ms.m[:, None]
    d_u = ((0.5 * b - 1.0) * st.v * st.u - uMu * Ms
           + weak * (W * Ms + gW) + b * V * Ms + gV)
    return McGeheeDerivative(d_rho, d_s, d_v, d_u)


def mcgehee_rhs(ms: MassSystem, pp: PotentialParams, dim: int = 2,
                with_time: bool = False) -> Callable[[float, np.ndarray], np.ndarray]:
    """Flat field in tau for StateLayout(n, dim, with_time); t' = rho^(1 + b/2) when with_time."""
    pp.require_manev()
    layout = StateLayout(ms.n, dim, with_time)

    def field(tau: float, y: np.ndarray) -> np.ndarray:
        st, _ = layout.unpack(y)
        d = vector_field(st, ms, pp)
        parts = [np.array([d.rho, d.v]), d.s.reshape(-1), d.u.reshape(-1)]
        if with_time:
            parts.append(np.array([st.rho ** (1.0 + 0.5 * pp.b)]))
        return np.concatenate(parts)

    return field


def _level(h: Union[EnergyLevel, float]) -> float:
    return float(h.h) if isinstance(h, EnergyLevel) else float(h)


def energy_residual(st: McGeheeState, h: Union[EnergyLevel, float], ms: MassSystem, pp: PotentialParams) -> float:
    """1/2 (u^T M^-1 u + v^2) - rho^(b-1) W(s) - V(s) - h rho^b, zero on E_h."""
    W, V = model.potential_terms(st.s, ms, pp)
    return (0.5 * (st.kinetic_u(ms) + st.v ** 2)
            - st.rho ** (pp.b - 1.0) * W - V - _level(h) * st.rho ** pp.b)


def energy_level(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> EnergyLevel:
    """The h for which st lies on E_h (needs rho > 0)."""
    if st.rho == 0.0:
        raise ZeroSizeError("every energy level contains the collision manifold; h is undefined at rho = 0")
    return EnergyLevel(energy_residual(st, 0.0, ms, pp) / st.rho ** pp.b)


def collision_relation(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> float:
    """u^T M^-1 u + v^2 - 2 V(s)."""
    _, V = model.potential_terms(st.s, ms, pp)
    return st.kinetic_u(ms) + st.v ** 2 - 2.0 * V


def on_collision_manifold(st: McGeheeState, ms: MassSystem, pp: PotentialParams,
                          tol: float = config.MANIFOLD_TOL) -> bool:
    """True iff rho <= tol and |u^T M^-1 u + v^2 - 2V(s)| <= tol (both bounds inclusive)."""
    if st.rho > tol:
        return False
    return abs(collision_relation(st, ms, pp)) <= tol


def mcgehee_monitors(ms: MassSystem, pp: PotentialParams, h: float, layout: StateLayout):
    def energy(tau, y):
        return energy_residual(layout.unpack(y)[0], h, ms, pp)

    def sphere(tau, y):
        return layout.unpack(y)[0].sphere_residual(ms)

    def orthogonality(tau, y):
        return layout.unpack(y)[0].orthogonality_residual()

    return {"energy": energy, "sphere": sphere, "orthogonality": orthogonality}
