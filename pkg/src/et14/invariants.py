"""Scalar invariants X1..X8, generator vectors V0..V3, eta and Y/Z variables.

All formulas are written once, over :class:`~et14.state.StateFields`, and
run unchanged on floats or on jets; derivative checks simply evaluate them
on seeded jets.  The scalar multiplier lambda plays the role of the capital
Lambda appearing in X5..X8 (confirmed by ``dX5/dlambda = 16 X1``).

Shorthand in the formulas below: ``l = lambda_i``, ``L = lambda_ij``,
``m = lambda_ill``, ``p = lambda_ppll``, ``q1 = tr L``, ``t2 = tr L^2``,
``t3 = tr L^3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import GALILEAN, PCoefficients
from .errors import SingularX1
from .jet import Jet, value
from .state import MultiplierState, StateFields

X_NAMES = tuple(f"X{h}" for h in range(1, 9))
ETA_NAMES = tuple(f"eta{h}" for h in range(1, 9))
AUX_NAMES = ("mm", "mLm", "mL2m", "mL3m", "lm", "lLm", "ll", "lLl", "lL2l")

DEFAULT_EPS1 = 1e-6


def _dot(a, b):
    return a @ b


def contractions(f: StateFields) -> dict:
    """Trace scalars and vector contractions used by the invariants."""
    l, L, m = f.l, f.L, f.m
    L2 = L @ L
    L3 = L2 @ L
    Lm, L2m, Ll = L @ m, L2 @ m, L @ l
    c = {
        "Q1": L[0, 0] + L[1, 1] + L[2, 2],
        "Q2": L2[0, 0] + L2[1, 1] + L2[2, 2],
        "Q3": L3[0, 0] + L3[1, 1] + L3[2, 2],
        "mm": _dot(m, m),
        "mLm": _dot(m, Lm),
        "mL2m": _dot(m, L2m),
        "mL3m": _dot(m, L3 @ m),
        "lm": _dot(l, m),
        "lLm": _dot(l, Lm),
        "ll": _dot(l, l),
        "lLl": _dot(l, Ll),
        "lL2l": _dot(l, L2 @ l),
        "lL2m": _dot(l, L2m),
        "lL3m": _dot(l, L3 @ m),
    }
    c["_mats"] = (L2, L3, Lm, L2m, Ll, L2 @ l, L3 @ m)
    return c


def x_invariants(f: StateFields, c: dict | None = None) -> list:
    """X1..X8 as a list (floats or jets)."""
    c = contractions(f) if c is None else c
    lam, p = f.lam, f.p
    q1, t2, t3 = c["Q1"], c["Q2"], c["Q3"]
    mm, mLm, mL2m = c["mm"], c["mLm"], c["mL2m"]
    lm, lLm, ll, lLl, lL2l = c["lm"], c["lLm"], c["ll"], c["lLl"], c["lL2l"]
    lL2m, lL3m = c["lL2m"], c["lL3m"]
    cub = -37 / 375 * q1 ** 3 + 2 / 5 * q1 * t2 - t3 / 3

    X1 = p
    X2 = 2 * mm - 16 / 5 * p * q1
    X3 = 8 * p * (11 / 50 * q1 ** 2 - t2 / 2) + 2 * mLm - 6 / 5 * q1 * mm
    X4 = 2 * mL2m - t2 * mm - 8 / 5 * q1 * mLm + 17 / 25 * q1 ** 2 * mm + 8 * p * cub
    X5 = -2 / 5 * q1 ** 2 + 16 * p * lam - 4 * lm + 2 * t2
    X6 = (4 * lam * mm + 8 * p * (-4 / 5 * lam * q1 + ll / 2) + 8 / 5 * q1 * lm
          - 4 / 5 * q1 * t2 + 8 / 75 * q1 ** 3 - 4 * lLm + 4 / 3 * t3)
    X7 = (8 / 15 * t3 * q1 - 14 / 25 * q1 ** 2 * t2 + 46 / 375 * q1 ** 4 + 4 * lam * mLm
          + 2 * t2 * lm - lm * lm - 12 / 5 * lam * q1 * mm + ll * mm - 4 * lL2m
          - 8 * p * (lam * t2 - lLl / 2 - 11 / 25 * lam * q1 ** 2 + 3 / 10 * q1 * ll)
          + 12 / 5 * q1 * lLm - 22 / 25 * q1 ** 2 * lm)
    X8 = (-34 / 25 * q1 ** 2 * lLm + 2 * t2 * lLm + 16 / 5 * q1 * lL2m + 148 / 375 * q1 ** 3 * lm
          - 8 / 5 * q1 * t2 * lm + 4 / 3 * t3 * lm - 4 * lL3m
          + 2 * p * (2 * lL2l - t2 * ll - 8 / 5 * q1 * lLl + 17 / 25 * q1 ** 2 * ll)
          + lLl * mm - 4 / 5 * q1 * ll * mm - 2 * lm * lLm + 4 / 5 * q1 * lm * lm + ll * mLm
          + 4 * lam * mL2m - 2 * lam * t2 * mm - 16 / 5 * lam * q1 * mLm + 34 / 25 * lam * q1 ** 2 * mm
          + 16 * lam * p * cub
          + 4 / 75 * q1 ** 2 * t3 - 8 / 125 * q1 ** 3 * t2 + 4 / 15 * 37 / 625 * q1 ** 5)
    return [X1, X2, X3, X4, X5, X6, X7, X8]


def generator_vectors(f: StateFields, c: dict | None = None) -> list:
    """V0..V3 as a list of length-3 arrays (float or object dtype)."""
    c = contractions(f) if c is None else c
    l, m, p = f.l, f.m, f.p
    q1, t2, t3 = c["Q1"], c["Q2"], c["Q3"]
    mm, mLm, lm, lLm = c["mm"], c["mLm"], c["lm"], c["lLm"]
    L2, L3, Lm, L2m, Ll, L2l, L3m = c["_mats"]

    V0 = -2 * m
    V1 = -2 * Lm + 4 * p * l + 4 / 5 * q1 * m
    V2 = (-2 * L2m + 6 / 5 * q1 * Lm + 4 * p * Ll - 11 / 25 * q1 ** 2 * m - lm * m + mm * l
          + t2 * m - 12 / 5 * p * q1 * l)
    V3 = (2 * p * (2 * L2l - t2 * l - 8 / 5 * q1 * Ll + 17 / 25 * q1 ** 2 * l)
          + mm * Ll - 4 / 5 * q1 * mm * l - 17 / 25 * q1 ** 2 * Lm - lm * Lm + t2 * Lm
          + 4 / 5 * q1 * lm * m + 8 / 5 * q1 * L2m + 74 / 375 * q1 ** 3 * m - 4 / 5 * q1 * t2 * m
          + mLm * l - lLm * m + 2 / 3 * t3 * m - 2 * L3m)
    return [V0, V1, V2, V3]


# -- eta and Y/Z variables ------------------------------------------------


def eta_from_X(X) -> list:
    """eta1..eta8 from X1..X8 (needs X1 != 0)."""
    X1 = X[0]
    r2, r3, r4 = X[1] / X1, X[2] / X1, X[3] / X1
    e5 = (X[4] + r3 / 2 - 3 / 64 * r2 * r2) / X1
    e6 = (X[5] + r4 / 2 - r2 * r3 / 16 + r2 ** 3 / 512) / X1
    e7 = (X[6] - r2 * r4 / 16 + r3 * r2 * r2 / 512) / X1
    e8 = (X[7] + r4 * r2 * r2 / 512) / X1
    return [X1, r2, r3, r4, e5, e6, e7, e8]


def X_from_eta(eta) -> list:
    """Inverse of :func:`eta_from_X`."""
    e1, e2, e3, e4, e5, e6, e7, e8 = eta
    return [
        e1, e1 * e2, e1 * e3, e1 * e4,
        e1 * e5 - e3 / 2 + 3 / 64 * e2 * e2,
        e1 * e6 - e4 / 2 + e2 * e3 / 16 - e2 ** 3 / 512,
        e1 * e7 + e2 * e4 / 16 - e3 * e2 * e2 / 512,
        e1 * e8 - e4 * e2 * e2 / 512,
    ]


def Y_from_X(X, weights: PCoefficients = GALILEAN) -> list:
    """Y5..Y8: Y5 = X5, Y_{s+5} = X1 X_{s+5} - (P_s/P0) X_{s+1} X5."""
    out = [X[4]]
    for s in (1, 2, 3):
        out.append(X[0] * X[s + 4] + weights.ratio(s, 0) * X[s] * X[4])
    return out


def Z_from_X(X, weights: PCoefficients = GALILEAN) -> list:
    """Z5, Z7, Z8: Z_{t+5} = X2 X_{t+5} - (P_t/P1) X_{t+1} X6 for t = 0, 2, 3."""
    return [X[1] * X[t + 4] + weights.ratio(t, 1) * X[t] * X[5] for t in (0, 2, 3)]


def Y_from_eta(eta, weights: PCoefficients = GALILEAN, y6_power: int = 3) -> list:
    """Y5..Y8 written directly as polynomials in eta.

    With ``c_s = -P_s/P0`` these are::

        Y5 = e1 e5 - e3/2 + 3/64 e2^2
        Y6 = e1 [e1 e6 - e4/2 + c1 e1 e2 e5 + (1/16 - c1/2) e2 e3 + (3 c1/64 - 1/512) e2^3]
        Y7 = e1 [e1 e7 + e2 e4/16 + c2 e1 e3 e5 - c2/2 e3^2 + (3 c2/64 - 1/512) e3 e2^2]
        Y8 = e1 [e1 e8 + c3 e1 e4 e5 - c3/2 e3 e4 + (3 c3/64 - 1/512) e4 e2^2]

    ``y6_power`` replaces the ``e2^3`` in Y6 by another power; 2 reproduces
    a known misprint of this formula and exists only to demonstrate that
    it breaks agreement with :func:`Y_from_X`.
    """
    e1, e2, e3, e4, e5, e6, e7, e8 = eta
    c1, c2, c3 = (weights.ratio(s, 0) for s in (1, 2, 3))
    Y5 = e1 * e5 - e3 / 2 + 3 / 64 * e2 * e2
    Y6 = e1 * (e1 * e6 - e4 / 2 + c1 * e1 * e2 * e5 + (1 / 16 - c1 / 2) * e2 * e3
               + (3 * c1 / 64 - 1 / 512) * e2 ** y6_power)
    Y7 = e1 * (e1 * e7 + e2 * e4 / 16 + c2 * e1 * e3 * e5 - c2 / 2 * e3 * e3
               + (3 * c2 / 64 - 1 / 512) * e3 * e2 * e2)
    Y8 = e1 * (e1 * e8 + c3 * e1 * e4 * e5 - c3 / 2 * e3 * e4
               + (3 * c3 / 64 - 1 / 512) * e4 * e2 * e2)
    return [Y5, Y6, Y7, Y8]


# -- bundles -------------------------------------------------------------


@dataclass(frozen=True)
class InvariantBundle:
    X: tuple
    Q1: float
    Q2: float
    Q3: float
    aux: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if len(name) == 2 and name[0] == "X" and name[1] in "12345678":
            return self.X[int(name[1]) - 1]
        raise AttributeError(name)

    def as_array(self) -> np.ndarray:
        """X1..X8, Q1..Q3 and the auxiliary contractions, in a fixed order."""
        return np.array(list(self.X) + [self.Q1, self.Q2, self.Q3] + [self.aux[k] for k in AUX_NAMES])

    @staticmethod
    def field_names() -> list[str]:
        return list(X_NAMES) + ["Q1", "Q2", "Q3"] + list(AUX_NAMES)

    def to_json(self) -> dict:
        return dict(zip(self.field_names(), map(float, self.as_array())))


@dataclass(frozen=True)
class GeneratorVectors:
    V: np.ndarray  # (4, 3)

    @property
    def V0(self):
        return self.V[0]

    @property
    def V1(self):
        return self.V[1]

    @property
    def V2(self):
        return self.V[2]

    @property
    def V3(self):
        return self.V[3]

    def to_json(self) -> dict:
        return {f"V{r}": self.V[r].tolist() for r in range(4)}


@dataclass(frozen=True)
class EtaBundle:
    eta: tuple

    def __getattr__(self, name):
        if name.startswith("eta") and name[3:] in ("1", "2", "3", "4", "5", "6", "7", "8"):
            return self.eta[int(name[3:]) - 1]
        raise AttributeError(name)

    def to_json(self) -> dict:
        return {n: float(v) for n, v in zip(ETA_NAMES, self.eta)}


@dataclass(frozen=True)
class YZBundle:
    Y5: float
    Y6: float
    Y7: float
    Y8: float
    Z5: float
    Z7: float
    Z8: float

    @property
    def Y(self) -> tuple:
        return (self.Y5, self.Y6, self.Y7, self.Y8)

    @property
    def Z(self) -> tuple:
        return (self.Z5, self.Z7, self.Z8)

    def to_json(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("Y5", "Y6", "Y7", "Y8", "Z5", "Z7", "Z8")}


def compute_X(state: MultiplierState) -> InvariantBundle:
    f = state.fields()
    c = contractions(f)
    X = tuple(float(x) for x in x_invariants(f, c))
    aux = {k: float(c[k]) for k in AUX_NAMES}
    return InvariantBundle(X, float(c["Q1"]), float(c["Q2"]), float(c["Q3"]), aux)


def compute_V(state: MultiplierState) -> GeneratorVectors:
    V = np.array([np.asarray(v, dtype=float) for v in generator_vectors(state.fields())])
    return GeneratorVectors(V)


def compute_eta(state: MultiplierState, eps1: float = DEFAULT_EPS1) -> EtaBundle:
    if abs(state.lam_ppll) < eps1:
        raise SingularX1(f"|lambda_ppll| = {abs(state.lam_ppll):.3g} < eps1 = {eps1:.3g}")
    return EtaBundle(tuple(float(e) for e in eta_from_X(compute_X(state).X)))


def compute_YZ(bundle: InvariantBundle, weights: PCoefficients = GALILEAN) -> YZBundle:
    Y = Y_from_X(bundle.X, weights)
    Z = Z_from_X(bundle.X, weights)
    return YZBundle(*map(float, Y), *map(float, Z))


def compute_Y_from_eta(eta: EtaBundle, weights: PCoefficients = GALILEAN,
                       y6_power: int = 3) -> tuple:
    return tuple(float(y) for y in Y_from_eta(eta.eta, weights, y6_power))


# -- derivative identities ------------------------------------------------


@dataclass(frozen=True)
class IdentityResidual:
    name: str
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def abs_error(self) -> float:
        return float(np.abs(np.asarray(self.lhs) - np.asarray(self.rhs)).max())

    @property
    def scale(self) -> float:
        return float(max(np.abs(self.lhs).max(), np.abs(self.rhs).max()))

    @property
    def rel_error(self) -> float:
        err = self.abs_error
        return 0.0 if err == 0.0 else err / max(self.scale, 1e-300)

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": np.atleast_1d(self.lhs).tolist(),
                "rhs": np.atleast_1d(self.rhs).tolist(), "abs": self.abs_error, "rel": self.rel_error}


def lambda_derivatives(state: MultiplierState):
    """X1..X8 as jets seeded on (lambda, lambda_1, lambda_2, lambda_3) only."""
    f = state.fields()
    seeds = Jet.seed([f.lam, *f.l], 1)
    l = np.empty(3, dtype=object)
    l[:] = seeds[1:]
    jf = StateFields(seeds[0], l, f.L, f.m, f.p)
    out = []
    for x in x_invariants(jf):
        out.append(x if isinstance(x, Jet) else Jet.constant(x, 4, 1))
    return out


def check_derivative_identities(state: MultiplierState,
                                weights: PCoefficients = GALILEAN) -> list[IdentityResidual]:
    """The 16 identities for d/dlambda_k and d/dlambda of X1..X8.

    Rows: dX_h/dlambda_k = 0 (h <= 4), dX_{r+5}/dlambda_k = 2 V_r,
    dX_h/dlambda = 0 (h <= 4), dX_{r+5}/dlambda = 2 P_r X_{r+1}.
    The left sides are exact forward derivatives of the X formulas.
    """
    jets = lambda_derivatives(state)
    X = [j.val for j in jets]
    V = compute_V(state).V
    out = []
    for h in range(4):
        out.append(IdentityResidual(f"dX{h + 1}/dlambda_k", jets[h].grad[1:], np.zeros(3)))
    for r in range(4):
        out.append(IdentityResidual(f"dX{r + 5}/dlambda_k", jets[r + 4].grad[1:], 2 * V[r]))
    for h in range(4):
        out.append(IdentityResidual(f"dX{h + 1}/dlambda", np.array([jets[h].grad[0]]), np.zeros(1)))
    for r in range(4):
        rhs = 2 * weights[r] * X[r]
        out.append(IdentityResidual(f"dX{r + 5}/dlambda", np.array([jets[r + 4].grad[0]]), np.array([rhs])))
    return out


def s1_scalars(state: MultiplierState) -> dict:
    """The rotation-invariant scalar set used by the frame reduction."""
    b = compute_X(state)
    return {"Q1": b.Q1, "Q2": b.Q2, "Q3": b.Q3, "mm": b.aux["mm"], "mLm": b.aux["mLm"],
            "mL2m": b.aux["mL2m"], "X5": b.X[4], "X6": b.X[5], "X7": b.X[6], "X8": b.X[7],
            "p": state.lam_ppll, "mL3m": b.aux["mL3m"]}


def values(xs) -> list[float]:
    return [value(x) for x in xs]
