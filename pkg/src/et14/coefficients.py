"""Weights multiplying H_r X_{r+1} in the scalar potential.

The invariant generators satisfy ``dX_{r+5}/dlambda = 2 d_r X_{r+1}`` and
``G_i(V_r^k) = -d_r X_{r+1} delta_ik`` with ``d = (8, 1, 1, 1)``, so the
weight vector that makes ``h' = sum_r d_r H_r X_{r+1}`` Galilean-consistent
is :data:`GALILEAN`.  :data:`PRINTED` is the alternative sign/magnitude
pattern ``(8, -1, -2/3, -1/2)`` kept for comparison: with it the
state-level identities fail (see the test suite).

Every construction that depends on the weights (potential assembly, the
derivative identities, Y/Z substitutions, the PDE system and its solved
forms, the compatibility families, the independence determinant) takes a
:class:`PCoefficients` argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class PCoefficients:
    P0: Fraction
    P1: Fraction
    P2: Fraction
    P3: Fraction
    name: str = "custom"

    def __post_init__(self):
        for k in ("P0", "P1", "P2", "P3"):
            object.__setattr__(self, k, Fraction(getattr(self, k)))

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (float(self.P0), float(self.P1), float(self.P2), float(self.P3))

    @property
    def exact(self) -> tuple[Fraction, ...]:
        return (self.P0, self.P1, self.P2, self.P3)

    def __getitem__(self, r: int) -> float:
        return self.values[r]

    def ratio(self, r: int, base: int) -> float:
        """``-P_r / P_base``: the coefficient of X_{r+1} X_{base+5} in Y/Z."""
        return float(-self.exact[r] / self.exact[base])

    def to_json(self) -> dict:
        return {"name": self.name, "values": [str(v) for v in self.exact]}

    @classmethod
    def from_name(cls, name: str) -> "PCoefficients":
        try:
            return PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown weight preset {name!r}; choose from {sorted(PRESETS)}") from None


GALILEAN = PCoefficients(8, 1, 1, 1, name="galilean")
PRINTED = PCoefficients(8, -1, Fraction(-2, 3), Fraction(-1, 2), name="printed")
PRESETS = {"galilean": GALILEAN, "printed": PRINTED}
