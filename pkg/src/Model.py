"""
Potentials, derivatives and first integrals of the quasihomogeneous n-body problem.

U(r) = alpha * sum_{i<j} m_i m_j / |r_i - r_j|^a + beta * sum_{i<j} m_i m_j / |r_i - r_j|^b

All functions are dimension agnostic: positions come as an (n, dim) array or a
Configuration, with dim 1 for collinear and dim 2 for planar problems.
Momenta follow p = M r_dot, so T = 1/2 p^T M^-1 p.
"""
import numpy as np
import scipy.linalg
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import Util_Config as config
from Configuration import Configuration, PhaseState
from Mass_System import MassSystem, PotentialParams
from Util_Errors import CollisionError, NotOnSphereError, ConstraintError

PositionsLike = Union[Configuration, np.ndarray]


def _positions(cfg: PositionsLike) -> np.ndarray:
    if isinstance(cfg, Configuration):
        return cfg.positions
    pos = np.asarray(cfg, dtype=float)
    return pos.reshape(-1, 1) if pos.ndim == 1 else pos


@lru_cache(maxsize=32)
def _pairs(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def collision_guard(cfg: PositionsLike, ms: MassSystem) -> float:
    """Smallest admissible pairwise distance, 1e-10 * sqrt(I / m_total) by default."""
    pos = _positions(cfg)
    centered = pos - ms.m @ pos / ms.total_mass
    inertia = float(np.sum(ms.m[:, None] * centered ** 2))
    return config.COLLISION_GUARD_FACTOR * np.sqrt(inertia / ms.total_mass)


def _pair_data(cfg: PositionsLike, ms: MassSystem):
    pos = _positions(cfg)
    i, j = _pairs(pos.shape[0])
    diff = pos[i] - pos[j]
    dist = np.linalg.norm(diff, axis=1)
    guard = collision_guard(pos, ms)
    if np.min(dist) <= guard:
        k = int(np.argmin(dist))
        raise CollisionError(
            f"bodies {i[k] + 1} and {j[k] + 1} are closer than the collision guard "
            f"({dist[k]:.3e} <= {guard:.3e})"
        )
    mm = ms.m[i] * ms.m[j]
    return pos, i, j, diff, dist, mm


def _term_value(dist, mm, exponent: float, coefficient: float) -> float:
    if coefficient == 0.0:
        return 0.0
    return coefficient * float(np.sum(mm * dist ** (-exponent)))


def _term_grad(pos, i, j, diff, dist, mm, exponent: float, coefficient: float) -> np.ndarray:
    grad = np.zeros_like(pos)
    if coefficient == 0.0 or exponent == 0.0:
        return grad
    pair = (-exponent * coefficient * mm * dist ** (-exponent - 2.0))[:, None] * diff
    np.add.at(grad, i, pair)
    np.add.at(grad, j, -pair)
    return grad


def _term_hess(pos, i, j, diff, dist, mm, exponent: float, coefficient: float) -> np.ndarray:
    n, dim = pos.shape
    hess = np.zeros((n, dim, n, dim))
    if coefficient == 0.0 or exponent == 0.0:
        return hess.reshape(n * dim, n * dim)
    eye = np.eye(dim)
    scale = exponent * coefficient * mm * dist ** (-exponent - 2.0)
    outer = diff[:, :, None] * diff[:, None, :] / (dist ** 2)[:, None, None]
    blocks = scale[:, None, None] * ((exponent + 2.0) * outer - eye)
    for k in range(len(i)):
        a, b = i[k], j[k]
        hess[a, :, a, :] += blocks[k]
        hess[b, :, b, :] += blocks[k]
        hess[a, :, b, :] -= blocks[k]
        hess[b, :, a, :] -= blocks[k]
    return hess.reshape(n * dim, n * dim)


# --- Potentials ---

def potential_W(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> float:
    _, _, _, _, dist, mm = _pair_data(cfg, ms)
    return _term_value(dist, mm, pp.a, pp.alpha)


def potential_V(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> float:
    _, _, _, _, dist, mm = _pair_data(cfg, ms)
    return _term_value(dist, mm, pp.b, pp.beta)


def potential_U(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> float:
    _, _, _, _, dist, mm = _pair_data(cfg, ms)
    return _term_value(dist, mm, pp.a, pp.alpha) + _term_value(dist, mm, pp.b, pp.beta)


def potential_terms(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> Tuple[float, float]:
    """(W, V) from a single pass over the pairs."""
    _, _, _, _, dist, mm = _pair_data(cfg, ms)
    return _term_value(dist, mm, pp.a, pp.alpha), _term_value(dist, mm, pp.b, pp.beta)


# --- First derivatives ---

def grad_W(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    pos, i, j, diff, dist, mm = _pair_data(cfg, ms)
    return _term_grad(pos, i, j, diff, dist, mm, pp.a, pp.alpha)


def grad_V(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    pos, i, j, diff, dist, mm = _pair_data(cfg, ms)
    return _term_grad(pos, i, j, diff, dist, mm, pp.b, pp.beta)


def grad_U_vector(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    """Full derivative of U as an (n, dim) array of covectors dU/dr_i."""
    pos, i, j, diff, dist, mm = _pair_data(cfg, ms)
    return (_term_grad(pos, i, j, diff, dist, mm, pp.a, pp.alpha)
            + _term_grad(pos, i, j, diff, dist, mm, pp.b, pp.beta))


def grad_U(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams, direction) -> float:
    """DU(r)(v) for a tangent vector v with the same shape as the positions."""
    grad = grad_U_vector(cfg, ms, pp)
    return float(np.sum(grad * np.asarray(direction, dtype=float).reshape(grad.shape)))


# --- Second derivatives ---

def hess_matrix(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams, term: str = "U") -> np.ndarray:
    """D^2 of U (or of the single term 'W' or 'V') as an (n*dim, n*dim) matrix."""
    pos, i, j, diff, dist, mm = _pair_data(cfg, ms)
    hess = np.zeros((pos.size, pos.size))
    if term in ("U", "W"):
        hess += _term_hess(pos, i, j, diff, dist, mm, pp.a, pp.alpha)
    if term in ("U", "V"):
        hess += _term_hess(pos, i, j, diff, dist, mm, pp.b, pp.beta)
    return hess


def hess_U(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams, v, w) -> float:
    hess = hess_matrix(cfg, ms, pp)
    return float(np.ravel(v) @ hess @ np.ravel(w))


def restricted_hess_matrix(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams,
                           inertia: Optional[float] = None) -> np.ndarray:
    """D^2 U + (aW + bV) / I0 * M, the second derivative of U restricted to the inertia sphere."""
    pos = _positions(cfg)
    if inertia is None:
        inertia = moment_of_inertia(pos, ms)
    W, V = potential_terms(pos, ms, pp)
    shift = (pp.a * W + pp.b * V) / inertia
    return hess_matrix(pos, ms, pp) + shift * np.diag(ms.metric(pos.shape[1]))


def _check_on_sphere(pos: np.ndarray, ms: MassSystem, inertia: float):
    current = moment_of_inertia(pos, ms)
    if abs(current - inertia) > config.SPHERE_TOL * max(1.0, inertia):
        raise NotOnSphereError(f"configuration has I = {current:.17g}, expected I0 = {inertia:.17g}")


def hess_U_restricted(cfg: PositionsLike, ms: MassSystem, pp: PotentialParams, v, w,
                      inertia: float = config.DEFAULT_INERTIA) -> float:
    pos = _positions(cfg)
    _check_on_sphere(pos, ms, inertia)
    v = np.ravel(v)
    w = np.ravel(w)
    metric = ms.metric(pos.shape[1])
    q = pos.reshape(-1)
    for name, vec in (("v", v), ("w", w)):
        if abs(np.sum(metric * vec * q)) > config.CONSTRAINT_TOL * max(1.0, np.linalg.norm(vec)) * np.sqrt(inertia):
            raise ConstraintError(f"direction {name} is not tangent to the inertia sphere")
    return float(v @ restricted_hess_matrix(pos, ms, pp, inertia) @ w)


# --- Inertia and mass metric ---

def mass_inner(r, r_tilde, ms: MassSystem) -> float:
    r = _positions(r)
    r_tilde = _positions(r_tilde)
    return float(np.sum(ms.m[:, None] * r * r_tilde))


def moment_of_inertia(cfg: PositionsLike, ms: MassSystem) -> float:
    pos = _positions(cfg)
    return mass_inner(pos, pos, ms)


def inertia_from_distances(cfg: PositionsLike, ms: MassSystem) -> float:
    pos = _positions(cfg)
    i, j = _pairs(pos.shape[0])
    dist2 = np.sum((pos[i] - pos[j]) ** 2, axis=1)
    return float(np.sum(ms.m[i] * ms.m[j] * dist2) / ms.total_mass)


def tangent_basis(cfg: PositionsLike, ms: MassSystem) -> np.ndarray:
    """M-orthonormal basis (columns) of the inertia-sphere tangent space with zero centre of mass.

    Columns B satisfy B^T M B = I, sum_i m_i B_i = 0 and <B, r>_M = 0, giving
    dimension n*dim - dim - 1.
    """
    pos = _positions(cfg)
    n, dim = pos.shape
    sqrt_m = np.sqrt(ms.metric(dim))
    rows = []
    for k in range(dim):
        t = np.zeros((n, dim))
        t[:, k] = np.sqrt(ms.m)
        rows.append(t.reshape(-1))
    rows.append(sqrt_m * pos.reshape(-1))
    null = scipy.linalg.null_space(np.array(rows))
    return null / sqrt_m[:, None]


# --- Phase space ---

def kinetic(ps: PhaseState, ms: MassSystem) -> float:
    return 0.5 * float(np.sum(ps.momenta ** 2 / ms.m[:, None]))


def hamiltonian(ps: PhaseState, ms: MassSystem, pp: PotentialParams) -> float:
    return kinetic(ps, ms) - potential_U(ps.config, ms, pp)


def angular_momentum(ps: PhaseState, ms: MassSystem) -> float:
    """Planar angular momentum sum_i r_i x p_i (zero for collinear states)."""
    pos = ps.config.positions
    if pos.shape[1] == 1:
        return 0.0
    return float(np.sum(pos[:, 0] * ps.momenta[:, 1] - pos[:, 1] * ps.momenta[:, 0]))


def relative_equilibrium(cfg: Configuration, ms: MassSystem, pp: PotentialParams) -> PhaseState:
    """Rigid counterclockwise rotation of a planar central configuration, omega^2 = -2 sigma."""
    pos = _positions(cfg)
    if pos.shape[1] != 2:
        raise ConstraintError(f"relative equilibria need a planar configuration, got dim = {pos.shape[1]}")
    W, V = potential_terms(pos, ms, pp)
    omega = np.sqrt((pp.a * W + pp.b * V) / moment_of_inertia(pos, ms))
    return PhaseState(Configuration(pos), omega * ms.m[:, None] * np.column_stack([-pos[:, 1], pos[:, 0]]))


def cartesian_rhs(ms: MassSystem, pp: PotentialParams, dim: int = 2) -> Callable[[float, np.ndarray], np.ndarray]:
    """Hamiltonian field on y = [r, p]: r_dot = M^-1 p, p_dot = grad U(r)."""
    inv_metric = 1.0 / ms.metric(dim)
    size = ms.n * dim

    def field(t: float, y: np.ndarray) -> np.ndarray:
        r = y[:size].reshape(ms.n, dim)
        p = y[size:]
        return np.concatenate([inv_metric * p, grad_U_vector(r, ms, pp).reshape(-1)])

    return field


def cartesian_monitors(ms: MassSystem, pp: PotentialParams, dim: int = 2):
    """Conserved-quantity monitors for trajectories of cartesian_rhs."""
    def energy(t, y):
        return hamiltonian(PhaseState.from_flat(y, dim), ms, pp)

    def momentum(t, y):
        return angular_momentum(PhaseState.from_flat(y, dim), ms)

    return {"energy": energy, "angular_momentum": momentum}
