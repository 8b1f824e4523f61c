"""
Collinear central configurations, one per ordering class.

Each ordering starts from equal gaps, is centred and scaled onto the inertia
sphere, and U is minimized on the ordering component with Newton steps in an
M-orthonormal tangent basis. Steps that break the ordering, hit the collision
guard or fail the Armijo test are backtracked; non-descent Newton directions
fall back to a scaled gradient step.
"""
import math
import queue
import threading
import numpy as np
import scipy.linalg
from tqdm import tqdm
from typing import Dict, List, Optional, Tuple

import Util_Config as config
import Model as model
from Central_Config import (CCQuery, CCResult, Ordering, cc_residual, acceptance_tolerance, attach_spectrum,
                            simultaneous_residual)
from Configuration import Configuration
from Mass_System import MassSystem, PotentialParams
from Util_Debug import DebugLog
from Util_Errors import (QHError, CollisionError, ConfigError, DegenerateTermError, NoConvergenceError,
                         MismatchError)


def positions_from_gaps(gaps: np.ndarray, ordering: Ordering, ms: MassSystem, inertia: float) -> np.ndarray:
    """Line positions with the given positive gaps, centred and scaled to the inertia sphere."""
    gaps = np.asarray(gaps, dtype=float)
    if gaps.shape != (ordering.n - 1,) or np.any(gaps <= 0.0):
        raise ConfigError(f"gaps must be {ordering.n - 1} positive numbers, got {gaps}")
    x = np.zeros(ordering.n)
    x[ordering.indices] = np.concatenate([[0.0], np.cumsum(gaps)])
    return _to_sphere(x.reshape(-1, 1), ms, inertia)


def gaps_of(cfg: Configuration, ordering: Ordering) -> np.ndarray:
    return np.diff(cfg.positions[ordering.indices, 0])


def gap_ratios(cfg: Configuration, ordering: Ordering) -> np.ndarray:
    """Gaps divided by the first gap, a scale-free shape descriptor."""
    gaps = gaps_of(cfg, ordering)
    return gaps / gaps[0]


def _to_sphere(x: np.ndarray, ms: MassSystem, inertia: float) -> np.ndarray:
    x = x - ms.m @ x / ms.total_mass
    return x * math.sqrt(inertia / model.moment_of_inertia(x, ms))


def _in_order(x: np.ndarray, ordering: Ordering) -> bool:
    return bool(np.all(np.diff(x[ordering.indices, 0]) > 0.0))


def _safe_potential(x: np.ndarray, ms: MassSystem, pp: PotentialParams) -> Optional[float]:
    try:
        return model.potential_U(x, ms, pp)
    except CollisionError:
        return None


def _residual_of(x: np.ndarray, ms: MassSystem, pp: PotentialParams,
                 grad_tol: float) -> Tuple[float, float, float]:
    """(sigma, residual, acceptance tolerance) at x."""
    cfg = Configuration(x)
    sigma, residual = cc_residual(cfg, ms, pp)
    return sigma, residual, acceptance_tolerance(grad_tol, cfg, ms, pp)


def _newton_direction(x: np.ndarray, ms: MassSystem, pp: PotentialParams):
    basis = model.tangent_basis(x, ms)
    g = basis.T @ model.grad_U_vector(x, ms, pp).reshape(-1)
    A = basis.T @ model.restricted_hess_matrix(x, ms, pp) @ basis
    A = 0.5 * (A + A.T)
    eigs = scipy.linalg.eigh(A, eigvals_only=True)
    newton = True
    if eigs[0] > 0.0:
        delta = -scipy.linalg.solve(A, g, assume_a="pos")
        if not np.all(np.isfinite(delta)) or g @ delta >= 0.0:
            newton = False
    else:
        newton = False
    if not newton:
        delta = -g / max(float(np.max(np.abs(eigs))), 1e-12)
    return basis, g, delta, newton


def _retract(x: np.ndarray, step: np.ndarray, ms: MassSystem, inertia: float) -> np.ndarray:
    return _to_sphere(x + step.reshape(x.shape), ms, inertia)


def _check_terms(pp: PotentialParams):
    if pp.beta == 0.0 and (pp.alpha == 0.0 or pp.a == 0.0):
        raise DegenerateTermError("potential is constant; every configuration is critical")


def solve_collinear_ordering(ordering: Ordering, q: CCQuery) -> CCResult:
    ms, pp = q.ms, q.pp
    if ordering.n != ms.n:
        raise ConfigError(f"ordering has {ordering.n} bodies but the mass system has {ms.n}")
    _check_terms(pp)

    x = positions_from_gaps(np.ones(ms.n - 1), ordering, ms, q.inertia_I0)
    sigma, residual, tolerance = _residual_of(x, ms, pp, q.grad_tol)
    iterations = 0

    if ms.n > 2:
        for iterations in range(1, q.max_iter + 1):
            if residual <= tolerance:
                break
            basis, g, delta, newton = _newton_direction(x, ms, pp)
            u_now = model.potential_U(x, ms, pp)
            slope = float(g @ delta)
            t = 1.0
            accepted = False
            while t >= config.MIN_LINE_STEP:
                trial = _retract(x, t * (basis @ delta), ms, q.inertia_I0)
                if _in_order(trial, ordering):
                    u_trial = _safe_potential(trial, ms, pp)
                    if u_trial is not None:
                        if u_trial <= u_now + config.ARMIJO_C * t * slope:
                            accepted = True
                        else:
                            _, trial_residual, _ = _residual_of(trial, ms, pp, q.grad_tol)
                            accepted = trial_residual < residual and newton
                        if accepted:
                            break
                t *= 0.5
            if not accepted:
                raise NoConvergenceError(
                    f"line search failed for ordering {ordering} (residual {residual:.3e})",
                    residual=residual, ordering=ordering.perm)
            x = trial
            sigma, residual, tolerance = _residual_of(x, ms, pp, q.grad_tol)
            DebugLog.add_message(
                f"ordering {ordering} iter {iterations}: residual {residual:.3e} "
                f"({'newton' if newton else 'gradient'}, t={t:.3g})")
        else:
            if residual > tolerance:
                raise NoConvergenceError(
                    f"no convergence for ordering {ordering} after {q.max_iter} iterations "
                    f"(residual {residual:.3e})", residual=residual, ordering=ordering.perm)

        # polish: full Newton steps kept only while they lower the residual
        for _ in range(config.POLISH_STEPS):
            basis, g, delta, newton = _newton_direction(x, ms, pp)
            if not newton:
                break
            trial = _retract(x, basis @ delta, ms, q.inertia_I0)
            if not _in_order(trial, ordering) or _safe_potential(trial, ms, pp) is None:
                break
            t_sigma, t_residual, t_tolerance = _residual_of(trial, ms, pp, q.grad_tol)
            if t_residual >= residual or t_residual > t_tolerance:
                break
            x, sigma, residual, tolerance = trial, t_sigma, t_residual, t_tolerance

    result = CCResult(config=Configuration(x), sigma=sigma, residual=residual, kind="collinear",
                      ordering=ordering, iterations=iterations, tolerance=tolerance)
    if pp.alpha > 0.0 and pp.beta > 0.0:
        result.sigma1, result.sigma2, _, _ = simultaneous_residual(result.config, ms, pp)
    return attach_spectrum(result, ms, pp)


def solve_collinear_all(q: CCQuery, workers: int = config.MAX_THREADS) -> List[CCResult]:
    """One collinear CC per canonical ordering, n!/2 in total, sorted by ordering."""
    n = q.ms.n
    if n > config.MAX_COLLINEAR_BODIES:
        raise ConfigError(f"collinear enumeration is capped at n <= {config.MAX_COLLINEAR_BODIES}, got n = {n}")
    orderings = Ordering.all_canonical(n)

    work_queue: "queue.Queue[Ordering]" = queue.Queue()
    for ordering in orderings:
        work_queue.put(ordering)
    results: Dict[Tuple[int, ...], CCResult] = {}
    failures: Dict[Tuple[int, ...], QHError] = {}
    lock = threading.Lock()

    with tqdm(total=len(orderings), desc=f"Collinear CCs (n={n})", unit="class",
              disable=not config.SHOW_PROGRESS) as pbar:

        def worker():
            while True:
                try:
                    ordering = work_queue.get_nowait()
                except queue.Empty:
                    return
                try:
                    result = solve_collinear_ordering(ordering, q)
                    with lock:
                        results[ordering.perm] = result
                except QHError as e:
                    with lock:
                        failures[ordering.perm] = e
                finally:
                    with lock:
                        pbar.update(1)
                        pbar.set_postfix({"solved": len(results), "failed": len(failures)})
                    work_queue.task_done()

        threads = [threading.Thread(target=worker, daemon=True) for _ in range(max(1, min(workers, len(orderings))))]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

    if failures:
        perm = min(failures)
        error = failures[perm]
        if isinstance(error, NoConvergenceError):
            error.ordering = perm
        error.args = (f"ordering {'-'.join(map(str, perm))}: {error}",)
        raise error

    ordered = [results[o.perm] for o in orderings]
    expected = math.factorial(n) // 2
    if len(ordered) != expected:
        raise MismatchError(f"expected {expected} collinear classes, found {len(ordered)}", expected, len(ordered))
    return ordered


def euler_collinear_homogeneous(ms: MassSystem, exponent: float, ordering: Ordering,
                                inertia: float = config.DEFAULT_INERTIA) -> Configuration:
    """Collinear CC of the single homogeneous potential sum m_i m_j / r^exponent."""
    q = CCQuery(ms, PotentialParams.homogeneous(exponent), inertia)
    return solve_collinear_ordering(ordering, q).config


def simultaneous_gap(ms: MassSystem, pp: PotentialParams, ordering: Ordering) -> float:
    """Mass-metric distance between the unit-inertia collinear CCs of the b-term and the a-term."""
    pp.require_both_terms()
    if pp.a == 0.0:
        raise DegenerateTermError("a = 0 makes W constant; the simultaneous gap is undefined")
    s_V = solve_collinear_ordering(ordering, CCQuery(ms, pp.only_b_term())).config
    s_W = solve_collinear_ordering(ordering, CCQuery(ms, pp.only_a_term())).config
    return math.sqrt(model.moment_of_inertia(s_V.positions - s_W.positions, ms))
