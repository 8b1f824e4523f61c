"""
Central configurations: residuals, orderings, equilateral configurations,
the f-root certificate and the restricted-Hessian index.

A configuration r is central when grad U(r) = sigma grad I(r); Euler's theorem
fixes sigma = -(aW + bV) / (2I). It is simultaneous when W and V are each
central with sigma1 = -aW / (2I) and sigma2 = -bV / (2I).
"""
import itertools
import math
import numpy as np
import scipy.linalg
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple

import Util_Config as config
import Model as model
from Configuration import Configuration
from Mass_System import MassSystem, PotentialParams
from Util_Debug import DebugLog
from Util_Errors import (ConfigError, InvalidParamsError, ManevOnlyError, BracketError,
                         ToleranceError, NotCentralError)

PLANAR = "planar"
COLLINEAR = "collinear"


@dataclass(frozen=True)
class CCQuery:
    ms: MassSystem
    pp: PotentialParams
    inertia_I0: float = config.DEFAULT_INERTIA
    grad_tol: float = config.DEFAULT_GRAD_TOL
    max_iter: int = config.DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.inertia_I0 > 0.0:
            raise ConfigError(f"inertia_I0 must be > 0, got {self.inertia_I0}")
        if not self.grad_tol > 0.0:
            raise ConfigError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class Ordering:
    """Left-to-right order of bodies on the line, 1-based."""
    perm: Tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(k) for k in self.perm)
        object.__setattr__(self, "perm", perm)
        if sorted(perm) != list(range(1, len(perm) + 1)):
            raise ConfigError(f"ordering must be a permutation of 1..{len(perm)}, got {perm}")

    @property
    def n(self) -> int:
        return len(self.perm)

    def reversed(self) -> "Ordering":
        return Ordering(tuple(reversed(self.perm)))

    def canonical(self) -> "Ordering":
        return Ordering(min(self.perm, tuple(reversed(self.perm))))

    @property
    def is_canonical(self) -> bool:
        return self.perm <= tuple(reversed(self.perm))

    @property
    def indices(self) -> np.ndarray:
        return np.array(self.perm) - 1

    @classmethod
    def all_canonical(cls, n: int) -> List["Ordering"]:
        """One representative per reflection class, n!/2 in total, in lexicographic order."""
        if n < 2:
            raise ConfigError(f"orderings need n >= 2, got {n}")
        return [cls(p) for p in itertools.permutations(range(1, n + 1)) if p <= p[::-1]]

    @classmethod
    def of_configuration(cls, cfg: Configuration) -> "Ordering":
        """Ordering read off the x coordinate of a collinear configuration."""
        return cls(tuple(int(k) + 1 for k in np.argsort(cfg.positions[:, 0], kind="stable")))

    def __str__(self) -> str:
        return "-".join(str(k) for k in self.perm)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    index: int
    zero_modes: int
    zero_tol: float
    ambient: str


@dataclass
class CCResult:
    config: Configuration
    sigma: float
    residual: float
    kind: str
    ordering: Optional[Ordering] = None
    orientation: Optional[int] = None
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    index: Optional[int] = None
    hess_eigs: List[float] = field(default_factory=list)
    iterations: int = 0
    tolerance: Optional[float] = None  # acceptance bound on residual, see acceptance_tolerance

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "kind": self.kind,
            "positions": self.config.positions.tolist(),
            "sigma": self.sigma,
            "residual": self.residual,
            "index": self.index,
            "hess_eigs": [float(x) for x in self.hess_eigs],
        }
        if self.ordering is not None:
            data["ordering"] = list(self.ordering.perm)
        if self.orientation is not None:
            data["orientation"] = "plus" if self.orientation > 0 else "minus"
        if self.sigma1 is not None:
            data["sigma1"] = self.sigma1
            data["sigma2"] = self.sigma2
        if self.iterations:
            data["iterations"] = self.iterations
        if self.tolerance is not None:
            data["tolerance"] = self.tolerance
        return data


# --- Residuals ---

def _sup_norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def _cc_defect(pos: np.ndarray, ms: MassSystem, pp: PotentialParams, sigma: float) -> np.ndarray:
    """Entries of grad U - sigma grad I, each summed exactly over its pair terms with math.fsum."""
    n, dim = pos.shape
    defect = np.empty_like(pos)
    for k in range(n):
        others = np.arange(n) != k
        diff = pos[k] - pos[others]
        dist = np.linalg.norm(diff, axis=1)
        mm = ms.m[k] * ms.m[others]
        terms = [(-2.0 * sigma * ms.m[k] * pos[k])[None, :]]
        for exponent, coefficient in ((pp.a, pp.alpha), (pp.b, pp.beta)):
            if coefficient != 0.0 and exponent != 0.0:
                terms.append((-exponent * coefficient * mm * dist ** (-exponent - 2.0))[:, None] * diff)
        stacked = np.vstack(terms)
        defect[k] = [math.fsum(stacked[:, d]) for d in range(dim)]
    return defect


def cc_residual(cfg: Configuration, ms: MassSystem, pp: PotentialParams) -> Tuple[float, float]:
    """(sigma, sup-norm of grad U - sigma grad I)."""
    pos = cfg.positions
    W, V = model.potential_terms(pos, ms, pp)
    inertia = model.moment_of_inertia(pos, ms)
    sigma = -(pp.a * W + pp.b * V) / (2.0 * inertia)
    return sigma, _sup_norm(_cc_defect(pos, ms, pp, sigma))


def acceptance_tolerance(grad_tol: float, cfg: Configuration, ms: MassSystem, pp: PotentialParams) -> float:
    """grad_tol * max(1, |grad U|_inf), the residual bound a solved collinear CC must meet."""
    return grad_tol * max(1.0, _sup_norm(model.grad_U_vector(cfg.positions, ms, pp)))


def simultaneous_residual(cfg: Configuration, ms: MassSystem, pp: PotentialParams) -> Tuple[float, float, float, float]:
    """(sigma1, sigma2, res_W, res_V) for the W and V parts separately."""
    pp.require_both_terms()
    pos = cfg.positions
    W, V = model.potential_terms(pos, ms, pp)
    inertia = model.moment_of_inertia(pos, ms)
    sigma1 = -pp.a * W / (2.0 * inertia)
    sigma2 = -pp.b * V / (2.0 * inertia)
    grad_I = 2.0 * ms.m[:, None] * pos
    res_W = _sup_norm(model.grad_W(pos, ms, pp) - sigma1 * grad_I)
    res_V = _sup_norm(model.grad_V(pos, ms, pp) - sigma2 * grad_I)
    return sigma1, sigma2, res_W, res_V


def is_simultaneous(cfg: Configuration, ms: MassSystem, pp: PotentialParams,
                    tol: float = config.SIMULTANEOUS_TOL) -> bool:
    _, _, res_W, res_V = simultaneous_residual(cfg, ms, pp)
    return max(res_W, res_V) <= tol


def rescale_to_inertia(cfg: Configuration, ms: MassSystem, inertia: float) -> Configuration:
    centered = Configuration.centered(cfg.positions, ms)
    return centered.scaled(math.sqrt(inertia / model.moment_of_inertia(centered, ms)))


# --- Spectrum of the restricted Hessian ---

def _ambient_positions(cfg: Configuration, ambient: str) -> np.ndarray:
    if ambient == PLANAR:
        return cfg.embedded(2).positions if cfg.dim < 2 else cfg.positions
    if ambient == COLLINEAR:
        pos = cfg.positions
        if pos.shape[1] > 1 and np.max(np.abs(pos[:, 1:])) > config.CONSTRAINT_TOL * max(1.0, np.max(np.abs(pos))):
            raise ConfigError("collinear ambient needs a configuration on the first axis")
        return pos[:, :1]
    raise ConfigError(f"ambient must be '{PLANAR}' or '{COLLINEAR}', got {ambient!r}")


def classify_spectrum(eigenvalues: np.ndarray, zero_tol: float) -> Tuple[int, int]:
    """(index, zero_modes): counts of eigenvalues below -zero_tol and within zero_tol."""
    eigenvalues = np.asarray(eigenvalues)
    return int(np.sum(eigenvalues < -zero_tol)), int(np.sum(np.abs(eigenvalues) <= zero_tol))


def restricted_hessian_on_tangent(cfg: Configuration, ms: MassSystem, pp: PotentialParams,
                                  ambient: str = PLANAR) -> Tuple[np.ndarray, np.ndarray]:
    """(A, B): A = B^T H_r B in an M-orthonormal tangent basis B of the inertia sphere."""
    pos = _ambient_positions(cfg, ambient)
    inertia = model.moment_of_inertia(pos, ms)
    basis = model.tangent_basis(pos, ms)
    hess = model.restricted_hess_matrix(pos, ms, pp, inertia)
    A = basis.T @ hess @ basis
    return 0.5 * (A + A.T), basis


def restricted_spectrum(cfg: Configuration, ms: MassSystem, pp: PotentialParams,
                        ambient: str = PLANAR) -> SpectrumReport:
    A, _ = restricted_hessian_on_tangent(cfg, ms, pp, ambient)
    pos = _ambient_positions(cfg, ambient)
    W, V = model.potential_terms(pos, ms, pp)
    scale = (pp.a * W + pp.b * V) / model.moment_of_inertia(pos, ms)
    eigenvalues = scipy.linalg.eigh(A, eigvals_only=True) if A.size else np.zeros(0)
    top = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    zero_tol = config.ZERO_MODE_RATIO * max(top, scale)
    index, zero_modes = classify_spectrum(eigenvalues, zero_tol)
    return SpectrumReport(np.sort(eigenvalues), index, zero_modes, zero_tol, ambient)


def check_central(cfg: Configuration, ms: MassSystem, pp: PotentialParams, tol: float = config.SPECTRUM_MATCH_TOL):
    sigma, residual = cc_residual(cfg, ms, pp)
    scale = max(1.0, _sup_norm(model.grad_U_vector(cfg.positions, ms, pp)))
    if residual > tol * scale:
        raise NotCentralError(f"configuration is not central (residual {residual:.3e})")
    return sigma, residual


def cc_index(res: CCResult, ms: MassSystem, pp: PotentialParams, ambient: str = PLANAR) -> int:
    """Number of negative eigenvalues of the restricted Hessian, not counting the rotational zero mode."""
    check_central(res.config, ms, pp)
    report = restricted_spectrum(res.config, ms, pp, ambient)
    expected_zero = 1 if ambient == PLANAR else 0
    if report.zero_modes != expected_zero:
        raise ToleranceError(
            f"degenerate central configuration: {report.zero_modes} near-zero eigenvalues in the "
            f"{ambient} ambient (expected {expected_zero}, zero_tol {report.zero_tol:.3e})"
        )
    return report.index


def attach_spectrum(res: CCResult, ms: MassSystem, pp: PotentialParams) -> CCResult:
    report = restricted_spectrum(res.config, ms, pp, PLANAR)
    res.hess_eigs = [float(x) for x in report.eigenvalues]
    if report.zero_modes == 1:
        res.index = report.index
    else:
        DebugLog.add_message(f"{res.kind} CC has {report.zero_modes} zero modes, index left unset")
    return res


# --- Equilateral configurations ---

def equilateral_side(ms: MassSystem, inertia: float = config.DEFAULT_INERTIA) -> float:
    """Side length r* = sqrt(I0 m_total / sum_{i<j} m_i m_j)."""
    return math.sqrt(inertia * ms.total_mass / ms.pair_mass_sum())


def equilateral_configuration(ms: MassSystem, inertia: float = config.DEFAULT_INERTIA,
                              orientation: int = 1) -> Configuration:
    """Equilateral triangle of side r* on the inertia sphere, bodies 1, 2, 3 counterclockwise for orientation +1."""
    if ms.n != 3:
        raise ConfigError(f"equilateral configurations need n = 3, got {ms.n}")
    side = equilateral_side(ms, inertia)
    angles = np.pi / 2 + np.array([0.0, 2.0, 4.0]) * np.pi / 3
    triangle = side / math.sqrt(3.0) * np.column_stack([np.cos(angles), np.sin(angles)])
    cfg = rescale_to_inertia(Configuration(triangle), ms, inertia)
    return cfg if orientation > 0 else cfg.reflected()


def equilateral_cc(q: CCQuery) -> Tuple[CCResult, CCResult]:
    """The two equilateral CCs: plus has bodies 1, 2, 3 counterclockwise, minus clockwise."""
    ms, pp = q.ms, q.pp
    if ms.n != 3:
        raise ConfigError(f"equilateral configurations need n = 3, got {ms.n}")
    if pp.a != 1.0:
        raise ManevOnlyError(f"equilateral configurations are computed for a = 1, got a={pp.a}")
    pp.require_both_terms()

    plus_cfg = equilateral_configuration(ms, q.inertia_I0)

    results = []
    for orientation, cfg in ((+1, plus_cfg), (-1, plus_cfg.reflected())):
        sigma, residual = cc_residual(cfg, ms, pp)
        sigma1, sigma2, _, _ = simultaneous_residual(cfg, ms, pp)
        res = CCResult(config=cfg, sigma=sigma, residual=residual, kind="planar-equilateral",
                       orientation=orientation, sigma1=sigma1, sigma2=sigma2)
        results.append(attach_spectrum(res, ms, pp))
    return results[0], results[1]


def orientation_of(cfg: Configuration) -> int:
    """+1 when bodies 1, 2, 3 run counterclockwise."""
    p = cfg.embedded(2).positions if cfg.dim < 2 else cfg.positions
    cross = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    return 1 if cross > 0 else -1


# --- The f-root ---

@dataclass
class RootCertificate:
    sign_changes: int
    grid_min: float
    grid_max: float
    grid_points: int
    f_at_zero: float

    @property
    def unique(self) -> bool:
        return self.sign_changes == 1 and self.f_at_zero > 0.0

    def to_dict(self):
        return {"sign_changes": self.sign_changes, "grid_min": self.grid_min, "grid_max": self.grid_max,
                "grid_points": self.grid_points, "f_at_zero": self.f_at_zero, "unique": self.unique}


@dataclass
class FRoot:
    root: float
    certificate: RootCertificate


def f_value(r, sigma: float, b: float, mtotal: float, alpha: float = 1.0, beta: float = 1.0):
    """f(r) = 2 sigma r^(b+2) + alpha m r^(b-1) + beta m b."""
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.asarray(r, dtype=float)
        return 2.0 * sigma * r ** (b + 2.0) + alpha * mtotal * r ** (b - 1.0) + beta * mtotal * b


def f_root(sigma: float, b: float, mtotal: float, alpha: float = 1.0, beta: float = 1.0) -> FRoot:
    """Unique positive root of f, by bracket expansion from r = 1 and bisection to 1e-14 relative."""
    if not b > 1.0:
        raise InvalidParamsError(f"f-root needs b > 1, got {b}")
    if not mtotal > 0.0:
        raise InvalidParamsError(f"f-root needs a positive total mass, got {mtotal}")
    if alpha < 0.0 or not beta > 0.0:
        raise InvalidParamsError(f"f-root needs alpha >= 0 and beta > 0, got alpha={alpha}, beta={beta}")

    def f(r):
        return float(f_value(r, sigma, b, mtotal, alpha, beta))

    lo, hi = 1.0, 1.0
    if f(1.0) > 0.0:
        for _ in range(config.F_ROOT_MAX_EXPANSIONS):
            hi *= 2.0
            if f(hi) < 0.0:
                break
        else:
            raise BracketError(f"no sign change of f up to r = {hi:.3e}; sigma must be negative (got {sigma})")
        lo = hi / 2.0
    else:
        while f(lo) <= 0.0:
            lo /= 2.0
            if lo < 1e-300:
                raise BracketError("f has no positive value near r = 0")
        hi = 2.0 * lo

    while hi - lo > config.F_ROOT_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)

    half_span = config.F_ROOT_SCAN_DECADES / 2.0
    grid = root * np.logspace(-half_span, half_span, config.F_ROOT_SCAN_POINTS)
    values = f_value(grid, sigma, b, mtotal, alpha, beta)
    signs = np.sign(values[np.isfinite(values) & (values != 0.0)])
    certificate = RootCertificate(
        sign_changes=int(np.sum(signs[1:] != signs[:-1])),
        grid_min=float(grid[0]),
        grid_max=float(grid[-1]),
        grid_points=int(grid.size),
        f_at_zero=beta * mtotal * b,
    )
    DebugLog.add_message(f"f-root {root:.17g} with {certificate.sign_changes} sign change(s) on the scan grid")
    return FRoot(root, certificate)


def equilateral_sigma(side: float, b: float, mtotal: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    """sigma making the equilateral triangle of the given side central (a = 1)."""
    return -mtotal * (alpha * side ** -3.0 + b * beta * side ** (-b - 2.0)) / 2.0
