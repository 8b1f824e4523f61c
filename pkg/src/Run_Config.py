"""
Run configuration for the command line, read from a versioned JSON file.

Example:
    {
        "schema": 1,
        "masses": [1, 1, 1],
        "a": 1, "b": 3, "alpha": 1, "beta": 1,
        "inertia_I0": 1,
        "energy_h": -1,
        "initial_state": {"kind": "cartesian", "positions": [[...]], "momenta": [[...]]},
        "tolerances": {"grad_tol": 1e-12, "rel_tol": 1e-10, "abs_tol": 1e-12},
        "span": 10
    }
"""
import os
import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple

import Util_Config as config
from Central_Config import CCQuery, Ordering
from Configuration import Configuration, PhaseState
from Mass_System import MassSystem, PotentialParams
from McGehee import McGeheeState
from Util_Errors import ConfigError
from Util_IO import load_json, load_csv_rows

KNOWN_KEYS = {
    "schema", "masses", "a", "b", "alpha", "beta", "inertia_I0", "energy_h", "initial_state",
    "tolerances", "output", "span", "ordering", "grid", "shape", "start", "seed", "mode", "converse",
}
TOLERANCE_KEYS = {"grad_tol", "max_iter", "rel_tol", "abs_tol", "simultaneous_tol", "energy_tol", "rho_floor"}


def _number(data: Dict[str, Any], key: str, default: Optional[float]) -> Optional[float]:
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _integer(data: Dict[str, Any], key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    return value


def _mapping(data: Dict[str, Any], key: str) -> Optional[Dict[str, Any]]:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a JSON object, got {value!r}")
    return value


def _mass(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"masses: every entry must be a number, got {value!r}")
    return float(value)


def _grid_axis(value: Any, name: str) -> Tuple[float, float, int]:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"grid.{name} must be [low, high, count], got {value!r}")
    low, high, count = value
    for bound in (low, high):
        if isinstance(bound, bool) or not isinstance(bound, (int, float)):
            raise ConfigError(f"grid.{name}: bounds must be numbers, got {value!r}")
    if isinstance(count, bool) or not isinstance(count, int):
        raise ConfigError(f"grid.{name}: count must be an integer, got {value!r}")
    if not (0.0 < low <= high) or count < 1:
        raise ConfigError(f"grid.{name} needs 0 < low <= high and count >= 1, got {value!r}")
    return float(low), float(high), count


@dataclass
class RunConfig:
    masses: List[float]
    a: float = 1.0
    b: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    inertia_I0: float = config.DEFAULT_INERTIA
    energy_h: Optional[float] = None
    initial_state: Optional[Dict[str, Any]] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    out_dir: str = config.DEFAULT_OUT_DIR
    span: Optional[float] = None
    ordering: Optional[List[int]] = None
    grid: Optional[Dict[str, Any]] = None
    shape: Optional[str] = None
    start: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    mode: str = "cartesian"
    converse: bool = False
    base_dir: str = "."

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            data = load_json(path)
        except ValueError as e:
            raise ConfigError(f"config file is not valid JSON: {e}")
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: str = ".") -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema") != config.SCHEMA_VERSION:
            raise ConfigError(f"schema: expected {config.SCHEMA_VERSION}, got {data.get('schema')!r}")
        unknown = sorted(set(data) - KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        masses = data.get("masses")
        if not isinstance(masses, list) or not masses:
            raise ConfigError("masses: expected a non-empty list of positive numbers")
        tolerances = data.get("tolerances", {}) or {}
        if not isinstance(tolerances, dict) or set(tolerances) - TOLERANCE_KEYS:
            raise ConfigError(f"tolerances: allowed keys are {', '.join(sorted(TOLERANCE_KEYS))}")
        for key, value in tolerances.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"tolerances.{key} must be a positive number, got {value!r}")
        output = _mapping(data, "output") or {}
        ordering = data.get("ordering")
        if ordering is not None and (not isinstance(ordering, list)
                                     or any(isinstance(k, bool) or not isinstance(k, int) for k in ordering)):
            raise ConfigError(f"ordering must be a list of body numbers, got {ordering!r}")
        shape = data.get("shape")
        if shape is not None and not isinstance(shape, str):
            raise ConfigError(f"shape must be a string, got {shape!r}")
        converse = data.get("converse", False)
        if not isinstance(converse, bool):
            raise ConfigError(f"converse must be true or false, got {converse!r}")
        cfg = cls(
            masses=[_mass(m) for m in masses],
            a=_number(data, "a", 1.0),
            b=_number(data, "b", 2.0),
            alpha=_number(data, "alpha", 1.0),
            beta=_number(data, "beta", 1.0),
            inertia_I0=_number(data, "inertia_I0", config.DEFAULT_INERTIA),
            energy_h=_number(data, "energy_h", None),
            initial_state=data.get("initial_state"),
            tolerances={k: float(v) for k, v in tolerances.items()},
            out_dir=output.get("dir", config.DEFAULT_OUT_DIR),
            span=_number(data, "span", None),
            ordering=ordering,
            grid=_mapping(data, "grid"),
            shape=shape,
            start=_mapping(data, "start") or {},
            seed=_integer(data, "seed", 0),
            mode=str(data.get("mode", "cartesian")),
            converse=converse,
            base_dir=base_dir,
        )
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        MassSystem.from_list(self.masses)
        PotentialParams(self.a, self.b, self.alpha, self.beta)
        if not self.inertia_I0 > 0.0:
            raise ConfigError(f"inertia_I0 must be > 0, got {self.inertia_I0}")
        if self.span is not None and not self.span > 0.0:
            raise ConfigError(f"span must be > 0, got {self.span}")
        if self.ordering is not None:
            order = Ordering(tuple(self.ordering))
            if order.n != len(self.masses):
                raise ConfigError(f"ordering has {order.n} entries but there are {len(self.masses)} masses")
        if self.mode not in ("cartesian", "mcgehee"):
            raise ConfigError(f"mode must be 'cartesian' or 'mcgehee', got {self.mode!r}")
        if self.grid is not None:
            unknown = sorted(set(self.grid) - {"m2", "m3"})
            if unknown:
                raise ConfigError(f"unknown grid keys: {', '.join(unknown)}")
            for name in ("m2", "m3"):
                _grid_axis(self.grid.get(name), name)
        perturbation = self.start.get("perturbation", 1e-3)
        if isinstance(perturbation, bool) or not isinstance(perturbation, (int, float)) or not perturbation > 0:
            raise ConfigError(f"start.perturbation must be a positive number, got {perturbation!r}")
        return self

    @property
    def ms(self) -> MassSystem:
        return MassSystem.from_list(self.masses)

    @property
    def pp(self) -> PotentialParams:
        return PotentialParams(self.a, self.b, self.alpha, self.beta)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def query(self) -> CCQuery:
        return CCQuery(self.ms, self.pp, self.inertia_I0, self.tol("grad_tol", config.DEFAULT_GRAD_TOL),
                       int(self.tol("max_iter", config.DEFAULT_MAX_ITER)))

    def get_ordering(self) -> Ordering:
        if self.ordering is None:
            return Ordering(tuple(range(1, len(self.masses) + 1)))
        return Ordering(tuple(self.ordering))

    def grid_axis(self, name: str) -> np.ndarray:
        """Mass values of one sweep axis, grid.<name> = [low, high, count]."""
        low, high, count = _grid_axis((self.grid or {}).get(name), name)
        return np.linspace(low, high, count)

    def require_energy(self) -> float:
        if self.energy_h is None:
            raise ConfigError("energy_h is required for this command")
        return self.energy_h

    # --- Initial states ---

    def initial_kind(self) -> str:
        if not self.initial_state:
            raise ConfigError("initial_state is required for this command")
        kind = self.initial_state.get("kind")
        if kind not in ("cartesian", "mcgehee", "csv"):
            raise ConfigError(f"initial_state.kind must be 'cartesian', 'mcgehee' or 'csv', got {kind!r}")
        return kind

    def cartesian_state(self) -> PhaseState:
        state = self.initial_state
        try:
            positions = np.array(state["positions"], dtype=float)
            momenta = np.array(state["momenta"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"initial_state: cartesian states need 'positions' and 'momenta' ({e})")
        if positions.ndim != 2 or positions.shape[0] != len(self.masses):
            raise ConfigError(f"initial_state.positions must be an (n, dim) list with n = {len(self.masses)}")
        return PhaseState(Configuration(positions), momenta)

    def mcgehee_state(self) -> McGeheeState:
        state = self.initial_state
        try:
            s = np.array(state["s"], dtype=float)
            st = McGeheeState(float(state["rho"]), s, float(state["v"]), np.array(state["u"], dtype=float))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"initial_state: McGehee states need 'rho', 's', 'v' and 'u' ({e})")
        if st.n != len(self.masses):
            raise ConfigError(f"initial_state.s must have n = {len(self.masses)} rows")
        return st

    def csv_row(self) -> Tuple[Dict[str, float], str]:
        """Row of a previous trajectory CSV (the last one unless 'row' is given)."""
        path = self.initial_state.get("path")
        if not path:
            raise ConfigError("initial_state: csv states need a 'path'")
        if not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"initial_state.path not found: {path}")
        rows = load_csv_rows(path)
        if not rows:
            raise ConfigError(f"initial_state.path has no rows: {path}")
        index = int(self.initial_state.get("row", -1))
        try:
            return rows[index], path
        except IndexError:
            raise ConfigError(f"initial_state.row {index} is out of range ({len(rows)} rows)")
