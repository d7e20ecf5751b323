"""Canonical frame, reconstruction of the multipliers from the scalar set S1,
and the two linear-independence tests.

Frame conventions (``x' = R x``, ``L' = R L R^T``):

* GENERIC: ``lambda_ill = (a, 0, 0)`` with ``a > 0``, ``lambda_13 = 0``,
  ``lambda_12 > 0``;
* AXIAL: ``lambda_ill = (a, 0, 0)``, ``lambda_12 = lambda_13 = 0`` and the
  lower 2x2 block diagonal (``lambda_22 >= lambda_33``);
* DEGENERATE: ``lambda_ill = 0`` and ``lambda_ij`` diagonal, eigenvalues in
  descending order.

The sign of ``lambda_23`` in the GENERIC case is not fixed by S1; the
reconstruction takes the non-negative root.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .coefficients import GALILEAN, PCoefficients
from .errors import InconsistentScalars, NoConvergence, SingularJacobian
from .invariants import compute_V, compute_X, s1_scalars
from .state import MultiplierState, matrix_to_sym

EPS2_REL = 1e-8
RADICAND_TOL = 1e-9
INDEPENDENCE_REL = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50


class Case(str, enum.Enum):
    GENERIC = "GENERIC"
    AXIAL = "AXIAL"
    DEGENERATE = "DEGENERATE"


def state_scale(state: MultiplierState) -> float:
    return max(float(np.abs(state.lam_ij).max()), float(np.abs(state.lam_ill).max()), 1e-300)


def _proper(R: np.ndarray) -> np.ndarray:
    if np.linalg.det(R) < 0:
        R = R.copy()
        R[2] = -R[2]
    return R


def _complement(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors completing ``u`` to a right-handed orthonormal basis."""
    k = int(np.argmin(np.abs(u)))
    t = np.zeros(3)
    t[k] = 1.0
    v = t - (t @ u) * u
    v /= np.linalg.norm(v)
    return v, np.cross(u, v)


@dataclass
class CanonicalFrame:
    rotation: np.ndarray
    canonical_state: MultiplierState
    case_tag: Case

    def to_json(self) -> dict:
        return {"rotation": self.rotation.tolist(), "canonical_state": self.canonical_state.to_json(),
                "case_tag": self.case_tag.value}


def canonicalize(state: MultiplierState, eps2_rel: float = EPS2_REL) -> CanonicalFrame:
    """Proper rotation to the canonical frame of the applicable case."""
    eps2 = eps2_rel * state_scale(state)
    m, L = state.lam_ill, state.matrix
    a = float(np.linalg.norm(m))
    if a <= eps2:
        w, vecs = np.linalg.eigh(L)
        R = _proper(vecs[:, ::-1].T)
        return CanonicalFrame(R, state.rotated(R), Case.DEGENERATE)
    u = m / a
    v, w = _complement(u)
    R = np.array([u, v, w])
    Lp = R @ L @ R.T
    r = float(np.hypot(Lp[0, 1], Lp[0, 2]))
    if r > eps2:
        c, s = Lp[0, 1] / r, Lp[0, 2] / r
        e2 = c * v + s * w
        R = np.array([u, e2, np.cross(u, e2)])
        case = Case.GENERIC
    else:
        ev, vecs = np.linalg.eigh(Lp[1:, 1:])
        sub = vecs[:, ::-1]  # descending
        e2 = sub[0, 0] * v + sub[1, 0] * w
        R = np.array([u, e2, np.cross(u, e2)])
        case = Case.AXIAL
    return CanonicalFrame(R, state.rotated(R), case)


# -- the scalar set ---------------------------------------------------------------------


@dataclass(frozen=True)
class S1Set:
    lam_ll: float
    trL2: float
    trL3: float
    mm: float
    mLm: float
    mL2m: float
    X5: float
    X6: float
    X7: float
    X8: float
    lam_ppll: float
    mL3m: float  # auxiliary; GENERIC reconstruction re-derives it

    FIELDS = ("lam_ll", "trL2", "trL3", "mm", "mLm", "mL2m", "X5", "X6", "X7", "X8", "lam_ppll", "mL3m")

    @classmethod
    def from_state(cls, state: MultiplierState) -> "S1Set":
        d = s1_scalars(state)
        return cls(d["Q1"], d["Q2"], d["Q3"], d["mm"], d["mLm"], d["mL2m"],
                   d["X5"], d["X6"], d["X7"], d["X8"], d["p"], d["mL3m"])

    def as_array(self, include_aux: bool = False) -> np.ndarray:
        names = self.FIELDS if include_aux else self.FIELDS[:-1]
        return np.array([getattr(self, n) for n in names])

    @property
    def targets(self) -> np.ndarray:
        return np.array([self.X5, self.X6, self.X7, self.X8])

    def to_json(self) -> dict:
        return {n: getattr(self, n) for n in self.FIELDS}

    @classmethod
    def from_json(cls, data) -> "S1Set":
        return cls(**{n: float(data[n]) for n in cls.FIELDS})


def extract_s1(state: MultiplierState) -> S1Set:
    return S1Set.from_state(state)


def hamilton_cayley_mL3m(s1: S1Set) -> float:
    """m L^3 m from the other S1 scalars via L^3 = Q1 L^2 - e2 L + det I."""
    q1, q2, q3 = s1.lam_ll, s1.trL2, s1.trL3
    e2 = 0.5 * (q1 * q1 - q2)
    det = (q1 ** 3 - 3 * q1 * q2 + 2 * q3) / 6.0
    return q1 * s1.mL2m - e2 * s1.mLm + det * s1.mm


def _sqrt(x: float, scale: float, what: str) -> float:
    if x < -RADICAND_TOL * max(scale, 1e-300):
        raise InconsistentScalars(f"negative radicand for {what}: {x:.3g}")
    return float(np.sqrt(max(x, 0.0)))


@dataclass
class TensorReconstruction:
    L: np.ndarray
    m: np.ndarray
    case_tag: Case
    branch: str  # sign choice recorded for the ambiguous component

    def to_json(self) -> dict:
        return {"lam_ij": matrix_to_sym(self.L).tolist(), "lam_ill": self.m.tolist(),
                "case_tag": self.case_tag.value, "branch": self.branch}


def reconstruct_tensors(s1: S1Set, case_tag: Case) -> TensorReconstruction:
    """lambda_ij and lambda_ill in the canonical frame from S1.

    S1 is blind to reflections, so in the GENERIC case the result is the
    canonical state up to e3 -> -e3: lambda_23 >= 0 is always chosen.
    """
    q1, q2, q3 = s1.lam_ll, s1.trL2, s1.trL3
    scale2 = max(abs(q2), q1 * q1, 1e-300)
    if case_tag is Case.DEGENERATE:
        e2 = 0.5 * (q1 * q1 - q2)
        e3 = (q1 ** 3 - 3 * q1 * q2 + 2 * q3) / 6.0
        roots = np.roots([1.0, -q1, e2, -e3])
        if np.abs(roots.imag).max() > 1e-6 * max(1.0, np.abs(roots).max()):
            raise InconsistentScalars("characteristic cubic has complex roots")
        ev = np.sort(roots.real)[::-1]
        return TensorReconstruction(np.diag(ev), np.zeros(3), case_tag, "descending")
    a = _sqrt(s1.mm, s1.mm, "lambda_1ll")
    if a == 0.0:
        raise InconsistentScalars("lambda_all lambda_all = 0 outside the DEGENERATE case")
    a2 = a * a
    l11 = s1.mLm / a2
    if case_tag is Case.AXIAL:
        s = q1 - l11
        q = q2 - l11 * l11
        disc = _sqrt(2 * q - s * s, scale2, "lambda_22 - lambda_33")
        L = np.diag([l11, 0.5 * (s + disc), 0.5 * (s - disc)])
        return TensorReconstruction(L, np.array([a, 0.0, 0.0]), case_tag, "descending")
    l12 = _sqrt(s1.mL2m / a2 - l11 * l11, scale2, "lambda_12")
    if l12 == 0.0:
        raise InconsistentScalars("lambda_12 = 0 in the GENERIC case")
    L3_11 = hamilton_cayley_mL3m(s1) / a2
    l22 = (L3_11 - l11 * (l11 * l11 + l12 * l12)) / (l12 * l12) - l11
    l33 = q1 - l11 - l22
    l23 = _sqrt(0.5 * (q2 - l11 ** 2 - l22 ** 2 - l33 ** 2 - 2 * l12 ** 2), scale2, "lambda_23")
    L = np.array([[l11, l12, 0.0], [l12, l22, l23], [0.0, l23, l33]])
    return TensorReconstruction(L, np.array([a, 0.0, 0.0]), case_tag, "lambda_23 >= 0")


# -- (lambda, lambda_k) from X5..X8 ------------------------------------------------------


def lambda_jacobian(state: MultiplierState, weights: PCoefficients = GALILEAN) -> np.ndarray:
    """d(X5..X8)/d(lambda, lambda_k): rows 2 (P_r X_{r+1}, V_r^k)."""
    X = compute_X(state).X
    V = compute_V(state).V
    return 2.0 * np.array([[weights[r] * X[r], *V[r]] for r in range(4)])


@dataclass
class NewtonResult:
    lam: float
    lam_i: np.ndarray
    iterations: int
    residual: float

    def to_json(self) -> dict:
        return {"lam": self.lam, "lam_i": self.lam_i.tolist(), "iterations": self.iterations,
                "residual": self.residual}


def _singular(J: np.ndarray, rel: float) -> bool:
    norms = np.linalg.norm(J, axis=1).prod()
    return norms == 0.0 or abs(np.linalg.det(J)) <= rel * norms


def reconstruct_lambda_vector(targets, L, m, lam_ppll: float, initial_guess=None,
                              weights: PCoefficients = GALILEAN, tol: float = NEWTON_TOL,
                              max_iter: int = NEWTON_MAX_ITER, singular_rel: float = 1e-14) -> NewtonResult:
    """Newton iteration for X5..X8(lambda, lambda_k; L, m, lambda_ppll) = targets.

    Converged when the step norm is at most ``tol`` times ``max(1, |x|)``.
    """
    targets = np.asarray(targets, dtype=float)
    x = np.zeros(4) if initial_guess is None else np.array(initial_guess, dtype=float)
    Ls = matrix_to_sym(np.asarray(L, dtype=float))
    m = np.asarray(m, dtype=float)

    def at(x):
        return MultiplierState(x[0], x[1:], Ls, m, lam_ppll)

    for it in range(max_iter + 1):
        s = at(x)
        F = compute_X(s).X[4:] - targets
        J = lambda_jacobian(s, weights)
        if _singular(J, singular_rel):
            raise SingularJacobian(f"X5..X8 Jacobian singular at iteration {it}")
        step = np.linalg.solve(J, -F)
        x = x + step
        if np.linalg.norm(step) <= tol * max(1.0, np.linalg.norm(x)):
            res = float(np.abs(compute_X(at(x)).X[4:] - targets).max())
            return NewtonResult(float(x[0]), x[1:].copy(), it, res)
    raise NoConvergence(f"Newton did not converge in {max_iter} iterations")


# -- independence hypotheses -------------------------------------------------------------


@dataclass
class IndependenceReport:
    cond1: bool
    cond2: bool
    det1: float
    det2: float

    def to_json(self) -> dict:
        return {"cond1": self.cond1, "cond2": self.cond2, "det1": self.det1, "det2": self.det2}


def condition2_matrix(state: MultiplierState, weights: PCoefficients = GALILEAN) -> np.ndarray:
    """Rows (P_r X_{r+1}, V_r^k), r = 0..3."""
    return 0.5 * lambda_jacobian(state, weights)


def independence_conditions(state: MultiplierState, weights: PCoefficients = GALILEAN,
                            rel: float = INDEPENDENCE_REL) -> IndependenceReport:
    m, L = state.lam_ill, state.matrix
    M1 = np.array([m, L @ m, L @ L @ m])
    M2 = condition2_matrix(state, weights)
    d1, d2 = float(np.linalg.det(M1)), float(np.linalg.det(M2))
    ok1 = not _singular(M1, rel)
    ok2 = not _singular(M2, rel)
    return IndependenceReport(ok1, ok2, d1, d2)


# -- full round trip --------------------------------------------------------------------


@dataclass
class RoundTrip:
    frame: CanonicalFrame
    s1: S1Set
    tensors: TensorReconstruction
    newton: NewtonResult | None
    reconstructed: MultiplierState | None
    s1_rel: float
    bundle_rel: float | None
    error: str | None = None

    def to_json(self) -> dict:
        return {"case_tag": self.frame.case_tag.value, "s1_rel": self.s1_rel, "bundle_rel": self.bundle_rel,
                "iterations": None if self.newton is None else self.newton.iterations, "error": self.error}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def round_trip(state: MultiplierState, weights: PCoefficients = GALILEAN, initial_guess=None) -> RoundTrip:
    """canonicalize -> S1 -> tensors -> Newton for (lambda, lambda_k); compare invariants.

    ``s1_rel`` compares S1 of the reconstruction; ``bundle_rel`` compares
    the full invariant bundle (X1..X8, traces and every contraction).
    """
    frame = canonicalize(state)
    s1 = extract_s1(state)
    tens = reconstruct_tensors(s1, frame.case_tag)
    try:
        nr = reconstruct_lambda_vector(s1.targets, tens.L, tens.m, s1.lam_ppll, initial_guess, weights)
    except (SingularJacobian, NoConvergence) as exc:
        partial = MultiplierState(0.0, np.zeros(3), matrix_to_sym(tens.L), tens.m, s1.lam_ppll)
        s1_rel = _rel(S1Set.from_state(partial).as_array()[:6], s1.as_array()[:6])
        return RoundTrip(frame, s1, tens, None, None, s1_rel, None, str(exc))
    rec = MultiplierState(nr.lam, nr.lam_i, matrix_to_sym(tens.L), tens.m, s1.lam_ppll)
    s1_rel = _rel(S1Set.from_state(rec).as_array(), s1.as_array())
    bundle_rel = _rel(compute_X(rec).as_array(), compute_X(state).as_array())
    return RoundTrip(frame, s1, tens, nr, rec, s1_rel, bundle_rel)
