"""
Adaptive Dormand-Prince 5(4) integration with dense output, event
localization and per-step renormalization.

Fields are callables field(t, y) -> dy/dt on flat numpy state vectors. A field
that raises a toolkit error (for example the collision guard) or returns
non-finite values makes the step fail; the step is retried with a smaller h
and a FieldError is raised once h underflows.
"""
import numpy as np
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import Util_Config as config
from Mass_System import MassSystem
from McGehee import McGeheeState, StateLayout
from Util_Debug import DebugLog
from Util_Errors import QHError, FieldError, StiffnessError, ConfigError, DegenerateStateError

Field = Callable[[float, np.ndarray], np.ndarray]

# Butcher table (Dormand & Prince 1980)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# B - B_hat, the local error estimate weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Dense output coefficients: y(t + theta h) = y + h K^T P [theta, theta^2, theta^3, theta^4]
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ERROR_EXPONENT = 0.17
ERROR_MEMORY = 0.04
MIN_FACTOR = config.MIN_FACTOR
MAX_BISECTIONS = 200


@dataclass
class Event:
    """Zero crossing of function(t, y). direction +1 fires on increase, -1 on decrease, 0 on both."""
    name: str
    function: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: int = 0


@dataclass
class EventHit:
    name: str
    t: float
    y: np.ndarray


@dataclass
class DenseSegment:
    t0: float
    h: float
    y0: np.ndarray
    Q: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        theta = (t - self.t0) / self.h
        powers = np.array([theta, theta ** 2, theta ** 3, theta ** 4])
        return self.y0 + self.h * (self.Q @ powers)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    conserved_residuals: Dict[str, np.ndarray]
    termination: str
    events: List[EventHit] = dataclass_field(default_factory=list)
    segments: List[DenseSegment] = dataclass_field(default_factory=list)
    message: str = ""

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def hits(self, name: str) -> List[EventHit]:
        return [hit for hit in self.events if hit.name == name]

    def drift(self, name: str) -> float:
        series = self.conserved_residuals[name]
        return float(np.max(np.abs(series - series[0]))) if len(series) else 0.0

    def max_abs(self, name: str) -> float:
        series = self.conserved_residuals[name]
        return float(np.max(np.abs(series))) if len(series) else 0.0

    def interpolate(self, t: float) -> np.ndarray:
        """State at time t from the dense output of the accepted steps."""
        if not self.segments or t < self.times[0] or t > self.times[-1]:
            raise ConfigError(f"t = {t} is outside the integrated span [{self.times[0]}, {self.times[-1]}]")
        starts = np.array([seg.t0 for seg in self.segments])
        k = int(np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1))
        return self.segments[k](t)


class _FieldFailure(Exception):
    def __init__(self, cause: str):
        super().__init__(cause)
        self.cause = cause


def _evaluate(field: Field, t: float, y: np.ndarray) -> np.ndarray:
    try:
        dy = np.asarray(field(t, y), dtype=float)
    except (QHError, ArithmeticError, ValueError) as e:
        raise _FieldFailure(f"{type(e).__name__}: {e}") from e
    if dy.shape != y.shape or not np.all(np.isfinite(dy)):
        raise _FieldFailure("field returned non-finite values")
    return dy


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x ** 2))) if x.size else 0.0


def _initial_step(field: Field, t0: float, y0: np.ndarray, f0: np.ndarray,
                  rel_tol: float, abs_tol: float, span: float) -> float:
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        f1 = _evaluate(field, t0 + h0, y0 + h0 * f0)
    except _FieldFailure:
        return h0 * 1e-3
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def _step(field: Field, t: float, y: np.ndarray, f: np.ndarray, h: float):
    K = np.empty((7, y.size))
    K[0] = f
    for s in range(1, 7):
        dy = h * (np.asarray(A[s]) @ K[:s])
        K[s] = _evaluate(field, t + C[s] * h, y + dy)
    y_new = y + h * (B @ K)
    error = h * (E @ K)
    return y_new, K, error


def _locate(event: Event, segment: DenseSegment, g_old: float, g_new: float) -> float:
    """Bisect on the dense output until the bracket is below the event tolerance."""
    lo, hi = segment.t0, segment.t0 + segment.h
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= config.EVENT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = event.function(mid, segment(mid))
        if g_mid != 0.0 and np.sign(g_mid) == np.sign(g_old):
            lo = mid
        else:
            hi = mid
    return hi


def _crossed(event: Event, g_old: float, g_new: float) -> bool:
    if g_old == 0.0:
        return False
    if g_old < 0.0 <= g_new:
        return event.direction >= 0
    if g_old > 0.0 >= g_new:
        return event.direction <= 0
    return False


def integrate(field: Field, y0: Sequence[float], span: Tuple[float, float],
              rel_tol: float = config.DEFAULT_RTOL, abs_tol: float = config.DEFAULT_ATOL,
              events: Sequence[Event] = (), renormalizer: Optional[Callable[[np.ndarray], np.ndarray]] = None,
              monitors: Optional[Dict[str, Callable[[float, np.ndarray], float]]] = None,
              max_step: float = np.inf, max_steps: int = config.MAX_STEPS,
              first_step: Optional[float] = None) -> Trajectory:
    t0, t_end = float(span[0]), float(span[1])
    if not t_end > t0:
        raise ConfigError(f"integration span must be increasing, got {span}")
    if not (rel_tol > 0.0 and abs_tol > 0.0):
        raise ConfigError(f"tolerances must be positive, got rel_tol={rel_tol}, abs_tol={abs_tol}")

    monitors = monitors or {}
    y = np.array(y0, dtype=float)
    if renormalizer is not None:
        y = renormalizer(y)
    times: List[float] = [t0]
    states: List[np.ndarray] = [y.copy()]
    series: Dict[str, List[float]] = {name: [fn(t0, y)] for name, fn in monitors.items()}
    hits: List[EventHit] = []
    segments: List[DenseSegment] = []

    def build(termination: str, message: str = "") -> Trajectory:
        return Trajectory(
            times=np.array(times),
            states=np.array(states),
            conserved_residuals={name: np.array(values) for name, values in series.items()},
            termination=termination,
            events=hits,
            segments=segments,
            message=message,
        )

    try:
        f = _evaluate(field, t0, y)
    except _FieldFailure as e:
        raise FieldError(f"field evaluation failed at the initial state: {e.cause}", build("error", e.cause))

    g_values = [ev.function(t0, y) for ev in events]
    t = t0
    h = first_step if first_step is not None else _initial_step(field, t0, y, f, rel_tol, abs_tol, t_end - t0)
    h = min(h, max_step)
    error_old = 1e-4
    rejected = False
    steps = 0
    rejections = 0

    while t < t_end:
        if steps >= max_steps:
            raise StiffnessError(f"step budget of {max_steps} exhausted at t = {t:.6g}", build("error", "step budget"))
        min_step = config.MIN_STEP_RATIO * max(1.0, abs(t))
        h = min(h, t_end - t, max_step)
        final = t + h >= t_end

        try:
            y_new, K, error = _step(field, t, y, f, h)
        except _FieldFailure as e:
            DebugLog.add_message(f"field failed at t={t:.6g} with h={h:.3e}: {e.cause}")
            h *= 0.25
            rejected = True
            rejections += 1
            if h < min_step:
                raise FieldError(f"field evaluation failed near t = {t:.17g}: {e.cause}", build("error", e.cause))
            continue

        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        error_norm = _rms(error / scale)

        if error_norm > 1.0 or not np.isfinite(error_norm):
            factor = MIN_FACTOR if not np.isfinite(error_norm) else max(MIN_FACTOR, config.SAFETY * error_norm ** -0.2)
            h *= factor
            rejected = True
            rejections += 1
            if h < min_step:
                raise StiffnessError(f"step size underflow at t = {t:.17g} (h = {h:.3e})", build("error", "step underflow"))
            continue

        steps += 1
        t_new = t_end if final else t + h
        segment = DenseSegment(t, t_new - t, y.copy(), K.T @ P)
        segments.append(segment)

        # events, earliest terminal one wins
        terminal_hit: Optional[Tuple[float, Event]] = None
        new_g = []
        for k, ev in enumerate(events):
            g_new = ev.function(t_new, y_new)
            new_g.append(g_new)
            if _crossed(ev, g_values[k], g_new):
                t_hit = _locate(ev, segment, g_values[k], g_new)
                if ev.terminal:
                    if terminal_hit is None or t_hit < terminal_hit[0]:
                        terminal_hit = (t_hit, ev)
                else:
                    hits.append(EventHit(ev.name, t_hit, segment(t_hit)))
        hits.sort(key=lambda hit: hit.t)

        if terminal_hit is not None:
            t_hit, ev = terminal_hit
            y_hit = segment(t_hit)
            if renormalizer is not None:
                y_hit = renormalizer(y_hit)
            # drop non-terminal hits past the stop time
            hits[:] = [hit for hit in hits if hit.t <= t_hit]
            hits.append(EventHit(ev.name, t_hit, y_hit))
            times.append(t_hit)
            states.append(y_hit)
            for name, fn in monitors.items():
                series[name].append(fn(t_hit, y_hit))
            DebugLog.add_message(f"event '{ev.name}' at t={t_hit:.12g} after {steps} steps")
            return build(f"event:{ev.name}")

        if renormalizer is not None:
            y_new = renormalizer(y_new)
            try:
                f_new = _evaluate(field, t_new, y_new)
            except _FieldFailure as e:
                raise FieldError(f"field evaluation failed at t = {t_new:.17g}: {e.cause}", build("error", e.cause))
        else:
            f_new = K[6]

        times.append(t_new)
        states.append(y_new.copy())
        for name, fn in monitors.items():
            series[name].append(fn(t_new, y_new))
        g_values = new_g

        if error_norm == 0.0:
            factor = config.MAX_FACTOR
        else:
            factor = config.SAFETY * error_norm ** -ERROR_EXPONENT * error_old ** ERROR_MEMORY
            factor = min(config.MAX_FACTOR, max(MIN_FACTOR, factor))
        if rejected:
            factor = min(1.0, factor)
        error_old = max(error_norm, 1e-4)
        rejected = False
        t, y, f = t_new, y_new, f_new
        h = h * factor

    DebugLog.add_message(f"integration reached t={t_end:.6g} after {steps} steps ({rejections} rejected)")
    return build("time-budget")


# --- Renormalizers ---

def vector_renormalizer(ms_metric: np.ndarray, s_slice: slice, u_slice: slice):
    """Renormalizer restoring s^T M s = 1 and u^T s = 0 on the given slices of a flat state."""
    def renormalize(y: np.ndarray) -> np.ndarray:
        out = np.array(y, dtype=float)
        s = out[s_slice]
        norm2 = float(np.sum(ms_metric * s * s))
        if not norm2 > 0.0:
            raise DegenerateStateError(f"cannot renormalize a state with s^T M s = {norm2}")
        s = s / np.sqrt(norm2)
        u = out[u_slice]
        u = u - float(u @ s) * (ms_metric * s)
        out[s_slice] = s
        out[u_slice] = u
        return out

    return renormalize


def renormalize_mcgehee(st: McGeheeState, ms: MassSystem) -> McGeheeState:
    """Project back onto s^T M s = 1, u^T s = 0. Idempotent."""
    norm2 = float(np.sum(ms.m[:, None] * st.s ** 2))
    if not norm2 > 0.0:
        raise DegenerateStateError(f"cannot renormalize a state with s^T M s = {norm2}")
    s = st.s / np.sqrt(norm2)
    u = st.u - float(np.sum(st.u * s)) * ms.m[:, None] * s
    return McGeheeState(rho=st.rho, s=s, v=st.v, u=u)


def mcgehee_renormalizer(layout: StateLayout, ms: MassSystem) -> Callable[[np.ndarray], np.ndarray]:
    return vector_renormalizer(ms.metric(layout.dim), layout.s_slice, layout.u_slice)
