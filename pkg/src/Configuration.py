import numpy as np
from dataclasses import dataclass
from typing import Sequence

import Util_Config as config
from Mass_System import MassSystem
from Util_Errors import ConstraintError, CollisionError


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Configuration:
    """Positions of n bodies on a line (dim 1) or in the plane (dim 2), stored as an (n, dim) array."""
    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos.reshape(-1, 1)
        if pos.ndim != 2 or pos.shape[1] not in (1, 2, 3):
            raise ConstraintError(f"positions must have shape (n, dim) with dim in 1..3, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ConstraintError("positions must be finite")
        object.__setattr__(self, "positions", _frozen(pos))

    @classmethod
    def from_flat(cls, vector: Sequence[float], dim: int) -> "Configuration":
        return cls(np.asarray(vector, dtype=float).reshape(-1, dim))

    @classmethod
    def centered(cls, positions, ms: MassSystem) -> "Configuration":
        """Shift positions so the centre of mass sits at the origin."""
        pos = np.array(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos.reshape(-1, 1)
        com = ms.m @ pos / ms.total_mass
        return cls(pos - com)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.positions.reshape(-1)

    def center_of_mass(self, ms: MassSystem) -> np.ndarray:
        return ms.m @ self.positions / ms.total_mass

    def min_distance(self) -> float:
        i, j = np.triu_indices(self.n, k=1)
        return float(np.min(np.linalg.norm(self.positions[i] - self.positions[j], axis=1)))

    def embedded(self, dim: int) -> "Configuration":
        """Pad with zero coordinates up to dim (a line config viewed in the plane)."""
        if dim < self.dim:
            raise ConstraintError(f"cannot embed a dim-{self.dim} configuration into dim {dim}")
        pad = np.zeros((self.n, dim - self.dim))
        return Configuration(np.hstack([self.positions, pad]))

    def rotated(self, theta: float) -> "Configuration":
        pos = self.embedded(2).positions
        c, s = np.cos(theta), np.sin(theta)
        return Configuration(pos @ np.array([[c, s], [-s, c]]))

    def scaled(self, factor: float) -> "Configuration":
        return Configuration(self.positions * factor)

    def reflected(self) -> "Configuration":
        """Mirror image: negates x on the line and y in the plane or higher dimensions."""
        pos = np.array(self.positions)
        if self.dim == 1:
            pos[:, 0] = -pos[:, 0]
        else:
            pos[:, 1] = -pos[:, 1]
        return Configuration(pos)

    def validate(self, ms: MassSystem) -> "Configuration":
        if self.n != ms.n:
            raise ConstraintError(f"configuration has {self.n} bodies but the mass system has {ms.n}")
        scale = ms.total_mass * max(1.0, float(np.max(np.abs(self.positions))))
        com = ms.m @ self.positions
        if np.max(np.abs(com)) > config.COM_TOL * scale:
            raise ConstraintError(f"centre of mass must be at the origin (sum m_i r_i = {com.tolist()})")
        if self.min_distance() <= 0.0:
            raise CollisionError("configuration lies in the collision set (two bodies coincide)")
        return self

    def to_dict(self):
        return {"positions": self.positions.tolist()}


@dataclass(frozen=True, eq=False)
class PhaseState:
    config: Configuration
    momenta: np.ndarray

    def __post_init__(self):
        p = np.array(self.momenta, dtype=float)
        if p.ndim == 1:
            p = p.reshape(self.config.positions.shape)
        if p.shape != self.config.positions.shape:
            raise ConstraintError(f"momenta shape {p.shape} does not match positions {self.config.positions.shape}")
        if not np.all(np.isfinite(p)):
            raise ConstraintError("momenta must be finite")
        object.__setattr__(self, "momenta", _frozen(p))

    @classmethod
    def from_velocities(cls, cfg: Configuration, velocities, ms: MassSystem) -> "PhaseState":
        vel = np.asarray(velocities, dtype=float).reshape(cfg.positions.shape)
        return cls(cfg, ms.m[:, None] * vel)

    @classmethod
    def from_flat(cls, vector: Sequence[float], dim: int) -> "PhaseState":
        y = np.asarray(vector, dtype=float)
        half = y.size // 2
        return cls(Configuration.from_flat(y[:half], dim), y[half:].reshape(-1, dim))

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.config.flat, self.momenta.reshape(-1)])

    def velocities(self, ms: MassSystem) -> np.ndarray:
        return self.momenta / ms.m[:, None]

    def validate(self, ms: MassSystem) -> "PhaseState":
        self.config.validate(ms)
        total = self.momenta.sum(axis=0)
        scale = max(1.0, float(np.max(np.abs(self.momenta))) * ms.n)
        if np.max(np.abs(total)) > config.COM_TOL * scale:
            raise ConstraintError(f"total linear momentum must vanish (sum p_i = {total.tolist()})")
        return self

    def to_dict(self):
        return {"positions": self.config.positions.tolist(), "momenta": self.momenta.tolist()}
