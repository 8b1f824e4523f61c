"""
Mass system and potential parameters.

A MassSystem carries the body masses and the diagonal mass metric they
induce. PotentialParams describes U = alpha * sum m_i m_j / r^a
+ beta * sum m_i m_j / r^b with 0 <= a < b.
"""
import math
import numpy as np
from dataclasses import dataclass, replace
from typing import Sequence

from Util_Errors import InvalidMassError, InvalidParamsError, ManevOnlyError, DegenerateTermError


@dataclass(frozen=True)
class MassSystem:
    masses: tuple

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "masses", masses)
        if len(masses) < 2:
            raise InvalidMassError(f"MassSystem needs n >= 2 bodies, got {len(masses)}")
        for i, m in enumerate(masses):
            if not math.isfinite(m) or m <= 0.0:
                raise InvalidMassError(f"every mass must be strictly positive (mass {i + 1} = {m})")

    @classmethod
    def from_list(cls, masses: Sequence[float]) -> "MassSystem":
        return cls(tuple(masses))

    @classmethod
    def equal(cls, n: int, mass: float = 1.0) -> "MassSystem":
        return cls(tuple([mass] * n))

    @property
    def n(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=float)

    def metric(self, dim: int) -> np.ndarray:
        """Diagonal of the mass matrix M acting on flattened (n, dim) vectors."""
        return np.repeat(self.m, dim)

    def pair_mass_sum(self) -> float:
        m = self.masses
        return math.fsum(m[i] * m[j] for i in range(self.n) for j in range(i + 1, self.n))

    def to_dict(self):
        return {"masses": list(self.masses)}


@dataclass(frozen=True)
class PotentialParams:
    a: float = 1.0
    b: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "alpha", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParamsError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.a < 0.0:
            raise InvalidParamsError(f"exponent a must satisfy a >= 0, got {self.a}")
        if not self.b > self.a:
            raise InvalidParamsError(f"exponents must satisfy a < b, got a={self.a}, b={self.b}")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise InvalidParamsError(f"coefficients must be >= 0, got alpha={self.alpha}, beta={self.beta}")
        if self.alpha == 0.0 and self.beta == 0.0:
            raise InvalidParamsError("alpha and beta cannot both be zero")

    @classmethod
    def homogeneous(cls, exponent: float, coefficient: float = 1.0) -> "PotentialParams":
        """Single homogeneous potential of degree -exponent, carried in the b slot."""
        if not exponent > 0.0:
            raise InvalidParamsError(f"homogeneous exponent must be > 0, got {exponent}")
        return cls(a=0.0, b=exponent, alpha=0.0, beta=coefficient)

    def require_manev(self) -> "PotentialParams":
        if self.a != 1.0:
            raise ManevOnlyError(f"operation requires a Manev-type potential (a = 1), got a={self.a}")
        if not self.beta > 0.0:
            raise ManevOnlyError(f"operation requires beta > 0, got beta={self.beta}")
        return self

    def require_both_terms(self) -> "PotentialParams":
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise DegenerateTermError(f"both terms are needed: alpha={self.alpha}, beta={self.beta}")
        return self

    def only_b_term(self) -> "PotentialParams":
        if not self.beta > 0.0:
            raise DegenerateTermError("the b-term is switched off (beta = 0)")
        return replace(self, alpha=0.0)

    def only_a_term(self) -> "PotentialParams":
        """The a-term alone, moved into the b slot so it stays a valid parameter set."""
        if not self.alpha > 0.0:
            raise DegenerateTermError("the a-term is switched off (alpha = 0)")
        if self.a == 0.0:
            raise DegenerateTermError("the a-term is constant for a = 0")
        return PotentialParams.homogeneous(self.a, self.alpha)

    @property
    def is_homogeneous(self) -> bool:
        return self.alpha == 0.0 or self.beta == 0.0 or self.a == 0.0

    def to_dict(self):
        return {"a": self.a, "b": self.b, "alpha": self.alpha, "beta": self.beta}
