"""Hessian of h', block structure at the comparison state, and convexity verdicts.

The Hessian is taken in the 14 storage coordinates, so for any perturbation
``delta`` the quadratic form ``delta @ H @ delta`` is the second directional
derivative of h' along ``delta``.  At the comparison state the form splits
into three blocks:

* Q1 over (dlambda, dlambda_ll, dlambda_ppll) with matrix ``a``;
* Q2 over the pairs (dlambda_all / lambda_ppll, dlambda_a), the same 2x2
  matrix ``b`` for each axis a;
* Q3 = c * D:D for a traceless symmetric perturbation D of lambda_ij
  (full 9-component contraction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .closure import ClosureSpec, Form, build_compat_family_K, potential_jets, potential_terms, KSTAR_VARS, THETA_VARS
from .errors import FormMismatch, LimitNotConverged, NearSingular, NotIndefinite, NotStateC
from .functions import JetFunction, random_polynomial
from .invariants import ETA_NAMES
from .jet import Jet
from .state import DeltaState, MultiplierState, is_state_C, state_C

MINOR_NAMES = ("a11", "det_a2", "det_a3", "b11", "det_b", "c")
RICHARDSON_SEQUENCE = (1e-2, 1e-3, 1e-4)
RICHARDSON_TOL = 1e-4
ROUNDOFF_FLOOR = 1e-12
REFERENCE_P = 1.0  # unit-scale point fixing the comparison floor of the limit


def _e(k: int) -> np.ndarray:
    v = np.zeros(14)
    v[k] = 1.0
    return v


def block_basis(lam_ppll: float) -> dict[str, list[np.ndarray]]:
    """Perturbation directions spanning the three blocks at the comparison state."""
    iso = np.zeros(14)
    iso[4:7] = 1.0 / 3.0  # dlambda_ij = dlambda_ll / 3 * delta_ij
    A = [_e(0), iso, _e(13)]
    B = []
    for a in range(3):
        B += [lam_ppll * _e(10 + a), _e(1 + a)]
    d1 = _e(4) - _e(5)
    d2 = _e(4) + _e(5) - 2 * _e(6)
    C = [d1, d2, _e(7), _e(8), _e(9)]
    return {"A": A, "B": B, "C": C}


DEV_NORMS = (2.0, 6.0, 2.0, 2.0, 2.0)  # D:D for the deviatoric basis above


@dataclass
class BlockDecomposition:
    a: np.ndarray
    b: np.ndarray          # 2x2, averaged over the three axes
    c: float               # averaged over the five deviatoric directions
    b_axes: np.ndarray     # (3, 2, 2)
    c_dirs: np.ndarray     # (5,)
    cross_rel: float       # largest off-pattern entry / largest entry
    isotropy_rel: float    # spread of b over axes and of c over directions

    def to_json(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist(), "c": self.c,
                "cross_rel": self.cross_rel, "isotropy_rel": self.isotropy_rel}


def decompose_blocks(H: np.ndarray, lam_ppll: float) -> BlockDecomposition:
    basis = block_basis(lam_ppll)
    T = np.column_stack(basis["A"] + basis["B"] + basis["C"])
    M = T.T @ H @ T
    allowed = np.zeros((14, 14), dtype=bool)
    allowed[:3, :3] = True
    for a in range(3):
        i = 3 + 2 * a
        allowed[i:i + 2, i:i + 2] = True
    for j in range(5):
        allowed[9 + j, 9 + j] = True
    big = max(np.abs(M).max(), 1e-300)
    cross_rel = float(np.abs(np.where(allowed, 0.0, M)).max() / big)
    a = M[:3, :3]
    b_axes = np.array([M[3 + 2 * k:5 + 2 * k, 3 + 2 * k:5 + 2 * k] for k in range(3)])
    c_dirs = np.array([M[9 + j, 9 + j] / DEV_NORMS[j] for j in range(5)])
    b = b_axes.mean(axis=0)
    spread = max(np.abs(b_axes - b).max(), np.abs(c_dirs - c_dirs.mean()).max())
    return BlockDecomposition(a, b, float(c_dirs.mean()), b_axes, c_dirs, cross_rel, float(spread / big))


@dataclass
class HessianReport:
    H: np.ndarray
    symmetry_rel: float
    eigenvalues: np.ndarray
    verdict: str
    blocks: BlockDecomposition | None = None

    def to_json(self) -> dict:
        return {"H": self.H.tolist(), "symmetry_rel": self.symmetry_rel,
                "eigenvalues": self.eigenvalues.tolist(), "verdict": self.verdict,
                "blocks": None if self.blocks is None else self.blocks.to_json()}


def eigen_verdict(eigs: np.ndarray, rtol: float = 1e-12) -> str:
    scale = max(np.abs(eigs).max(), 1e-300)
    if eigs.min() > rtol * scale:
        return "positive-definite"
    if eigs.min() < -rtol * scale:
        return "indefinite"
    return "degenerate"


def hessian(state: MultiplierState, spec: ClosureSpec) -> HessianReport:
    """Exact 14x14 Hessian of h' (nested forward differentiation)."""
    if spec.form is Form.ETA_FORM and abs(state.lam_ppll) < spec.eps1:
        raise NearSingular("eta-form Hessian requested too close to lambda_ppll = 0")
    H = potential_jets(state, spec, order=2).h.hess
    big = max(np.abs(H).max(), 1e-300)
    sym = float(np.abs(H - H.T).max() / big)
    Hs = 0.5 * (H + H.T)
    eigs = np.linalg.eigvalsh(Hs)
    blocks = decompose_blocks(Hs, state.lam_ppll) if is_state_C(state) else None
    return HessianReport(Hs, sym, eigs, eigen_verdict(eigs), blocks)


def second_directional_derivative(state: MultiplierState, spec: ClosureSpec, delta) -> float:
    """d^2/dt^2 h'(state + t delta) at t = 0, from a single-direction jet."""
    d = np.asarray(delta.to_vector() if isinstance(delta, MultiplierState) else delta, dtype=float)
    pj = potential_terms(state.to_jets(2, seeds=d.reshape(14, 1)), spec)
    h = pj.h
    return float(h.hess[0, 0]) if isinstance(h, Jet) else 0.0


# -- coefficients at the comparison state ---------------------------------------


def eta_star(lam: float, lam_ll, lam_ppll):
    """eta1..eta8 at the comparison state (works on floats or jets)."""
    ll = lam_ll
    return [lam_ppll, -16 / 5 * ll, 32 / 75 * ll * ll, -64 / 3375 * ll ** 3,
            16 * lam, -32 / 5 * lam * ll, 64 / 75 * lam * ll * ll, -128 / 3375 * lam * ll ** 3]


def h_of_eta(spec: ClosureSpec) -> JetFunction:
    """h' of an eta-form closure written as a function of eta alone.

    X1/p = 1 and X_{r+1}/p = eta_{r+1}, so h' = P0 K0 + sum_{r>=1} P_r K_r eta_{r+1}.
    """
    if spec.form is not Form.ETA_FORM:
        raise FormMismatch("h_of_eta needs an eta-form closure")
    w = spec.weights
    if any(set(fn.vars) - set(ETA_NAMES) for fn in spec.functions):
        raise FormMismatch("closure depends on more than eta1..eta8")

    def h(env):
        K = [fn(env) for fn in spec.functions]
        return w[0] * K[0] + w[1] * K[1] * env["eta2"] + w[2] * K[2] * env["eta3"] + w[3] * K[3] * env["eta4"]

    return JetFunction(ETA_NAMES, h, label="h(eta)")


@dataclass
class ConvexityCoefficients:
    a: np.ndarray
    b11: float
    b12: float
    b22: float
    c: float
    variant: str = "corrected"
    f: np.ndarray | None = None  # dh'/deta_j at eta*

    @property
    def b(self) -> np.ndarray:
        return np.array([[self.b11, self.b12], [self.b12, self.b22]])

    def minors(self) -> np.ndarray:
        a = self.a
        return np.array([a[0, 0], np.linalg.det(a[:2, :2]), np.linalg.det(a),
                         self.b11, self.b11 * self.b22 - self.b12 ** 2, self.c])

    def to_json(self) -> dict:
        return {"a": self.a.tolist(), "b11": self.b11, "b12": self.b12, "b22": self.b22,
                "c": self.c, "variant": self.variant}

    @classmethod
    def from_blocks(cls, blocks: BlockDecomposition) -> "ConvexityCoefficients":
        return cls(blocks.a, blocks.b[0, 0], blocks.b[0, 1], blocks.b[1, 1], blocks.c, variant="hessian")


def b_c_coefficients(f: Sequence[float], lam: float, ll: float, p: float, variant: str = "corrected"):
    """b11, b12, b22, c from first derivatives f[j] = dh'/deta_{j+1} at eta*."""
    f1, f2, f3, f4, f5, f6, f7, f8 = f
    if variant == "corrected":
        b11 = (2 / 3 * ll * f5 - 2 / 45 * ll ** 2 * f6 - 16 / 675 * ll ** 3 * f7 + 8 / 3375 * ll ** 4 * f8
               + 2 * p * (2 * f2 - 8 / 15 * ll * f3 + 8 / 225 * ll ** 2 * f4 + 4 * lam * f6
                          - 16 / 15 * lam * ll * f7 + 16 / 225 * lam * ll ** 2 * f8))
        b22 = 8 * f6 - 32 / 15 * ll * f7 + 32 / 225 * ll ** 2 * f8
    elif variant == "printed":
        b11 = (2 / 3 * ll * f5 - 2 / 45 * ll ** 2 * f6 - 2 * 47 / 3375 * ll ** 3 * f7 + 8 / 5625 * ll ** 3 * f8
               + 2 * p * (2 * f2 - 8 / 15 * ll * f3 + 8 / 225 * ll ** 2 * f4 + 4 * lam * f6
                          - 12 / 5 * lam * ll * f7 + 16 / 225 * lam * ll ** 2 * f8))
        b22 = 8 * f6 + 112 / 15 * ll * f7 + 32 / 225 * ll ** 2 * f8
    else:
        raise ValueError(f"unknown coefficient variant {variant!r}")
    b12 = -4 * f5 + 4 / 15 * ll * f6 + 32 / 225 * ll ** 2 * f7 - 16 / 1125 * ll ** 3 * f8
    c = -8 * f3 + 16 / 15 * ll * f4 - 16 * lam * f7 + 32 / 15 * lam * ll * f8
    return b11, b12, b22, c


def coefficients_at_C(stateC: MultiplierState, spec: ClosureSpec, variant: str = "corrected",
                      tol: float = 1e-12) -> ConvexityCoefficients:
    """a_ij, b11, b12, b22, c from derivatives of h'(eta) at eta*.

    ``a`` is the Hessian of h'(eta*(lambda, lambda_ll, lambda_ppll)) in those
    three variables; b and c use the closed-form coefficient expressions.
    ``variant="printed"`` swaps in an alternative b11/b22 pair that does not
    match the exact Hessian (kept for comparison).
    """
    if not is_state_C(stateC, tol):
        raise NotStateC("state does not have the comparison-state pattern")
    lam, ll, p = stateC.lam, stateC.lam_ll, stateC.lam_ppll
    if abs(p) < spec.eps1:
        raise NearSingular("coefficients need lambda_ppll != 0")
    h = h_of_eta(spec)
    es = np.array(eta_star(lam, ll, p))
    f = h.gradient(es)
    seeds = Jet.seed([lam, ll, p], 2)
    a = h(dict(zip(ETA_NAMES, eta_star(*seeds))))
    a = a.hess if isinstance(a, Jet) else np.zeros((3, 3))
    b11, b12, b22, c = b_c_coefficients(f, lam, ll, p, variant)
    return ConvexityCoefficients(np.array(a), b11, b12, b22, c, variant, f)


# -- verdicts ---------------------------------------------------------------------------


@dataclass
class Verdict:
    minors: np.ndarray
    passes: list
    verdict: str
    failing: int | None
    eigen_verdict: str
    counterexample: DeltaState | None = None
    counterexample_Q: float | None = None
    limit_sequence: list = field(default_factory=list)

    @property
    def positive(self) -> bool:
        return self.verdict == "positive-definite"

    def to_json(self) -> dict:
        return {"minors": [float(m) for m in self.minors], "minor_names": list(MINOR_NAMES),
                "passes": list(self.passes), "verdict": self.verdict,
                "failing_minor": None if self.failing is None else MINOR_NAMES[self.failing],
                "eigen_verdict": self.eigen_verdict,
                "counterexample": None if self.counterexample is None else self.counterexample.to_json(),
                "counterexample_Q": self.counterexample_Q,
                "limit_sequence": list(self.limit_sequence)}


def _block_eigs(coeffs: ConvexityCoefficients) -> np.ndarray:
    return np.concatenate([np.linalg.eigvalsh(0.5 * (coeffs.a + coeffs.a.T)),
                           np.linalg.eigvalsh(coeffs.b), [coeffs.c]])


def verdict_from_minors(minors: np.ndarray, eigs: np.ndarray | None = None, zero_tol=0.0) -> Verdict:
    minors = np.asarray(minors, dtype=float)
    zero_tol = np.broadcast_to(np.asarray(zero_tol, dtype=float), minors.shape)
    passes = [bool(m > z) for m, z in zip(minors, zero_tol)]
    failing = next((k for k, ok in enumerate(passes) if not ok), None)
    ev = eigen_verdict(eigs) if eigs is not None else "unknown"
    if failing is None:
        verdict = "positive-definite"
    elif eigs is not None:
        verdict = ev if ev != "positive-definite" else "degenerate"
    else:
        verdict = "indefinite" if (minors < -zero_tol).any() else "degenerate"
    return Verdict(minors, passes, verdict, failing, ev)


def convexity_verdict(coeffs: ConvexityCoefficients) -> Verdict:
    """Sylvester-minor test of the three blocks (a11, |a|_2, |a|_3, b11, |b|, c)."""
    return verdict_from_minors(coeffs.minors(), _block_eigs(coeffs))


def richardson_limit(values: Sequence[np.ndarray], sequence: Sequence[float] = RICHARDSON_SEQUENCE,
                     tol: float = RICHARDSON_TOL, floor=None,
                     atol: float = ROUNDOFF_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """One-sided limit p -> 0+ from values at a geometric sequence.

    First-order Richardson extrapolants from consecutive pairs must agree
    within ``tol`` relative to the larger of the extrapolants, the sampled
    values and ``floor`` (componentwise).  The floor gives limits that are
    exactly zero, such as quantities vanishing like p or p^2, a unit to be
    compared in; ``atol`` absorbs roundoff in identically vanishing minors.
    Returns the last extrapolant and the comparison scale.
    """
    vals = [np.asarray(v, dtype=float) for v in values]
    if len(vals) != len(sequence) or len(vals) < 3:
        raise ValueError("need values at every point of a sequence of length >= 3")
    data_scale = np.max(np.abs(vals), axis=0)
    if floor is not None:
        data_scale = np.maximum(data_scale, np.abs(np.asarray(floor, dtype=float)))
    extrap = []
    for k in range(len(vals) - 1):
        r = sequence[k] / sequence[k + 1]
        extrap.append((r * vals[k + 1] - vals[k]) / (r - 1))
    for k in range(len(extrap) - 1):
        diff = np.abs(extrap[k + 1] - extrap[k])
        scale = np.maximum(np.maximum(np.abs(extrap[k + 1]), np.abs(extrap[k])), data_scale)
        bound = tol * scale + atol
        if (diff > bound).any():
            j = int(np.argmax(diff - bound))
            raise LimitNotConverged(
                f"extrapolants of component {j} disagree: {extrap[k][j]:.6g} vs {extrap[k + 1][j]:.6g}")
    return extrap[-1], data_scale


def limit_verdict(coeff_fn: Callable[[float], ConvexityCoefficients],
                  sequence: Sequence[float] = RICHARDSON_SEQUENCE, tol: float = RICHARDSON_TOL,
                  reference: float | None = REFERENCE_P) -> Verdict:
    """Verdict on the minors extrapolated to lambda_ppll -> 0+.

    The minors at ``lambda_ppll = reference`` set the comparison floor (see
    :func:`richardson_limit`); a limit within ``tol`` of that scale counts
    as zero, i.e. degenerate.
    """
    coeffs = [coeff_fn(p) for p in sequence]
    minors = [c.minors() for c in coeffs]
    floor = None if reference is None else coeff_fn(reference).minors()
    lim, scale = richardson_limit(minors, sequence, tol, floor)
    v = verdict_from_minors(lim, zero_tol=tol * scale + ROUNDOFF_FLOOR)
    v.limit_sequence = [{"lambda_ppll": p, "minors": m.tolist()} for p, m in zip(sequence, minors)]
    return v


def counterexample_direction(H: np.ndarray, rtol: float = 1e-12) -> tuple[DeltaState, float]:
    """Unit direction of the most negative eigenvalue and its quadratic-form value."""
    H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
    eigs, vecs = np.linalg.eigh(H)
    scale = max(np.abs(eigs).max(), 1e-300)
    if eigs[0] >= -rtol * scale:
        raise NotIndefinite(f"smallest eigenvalue {eigs[0]:.3g} is not negative")
    v = vecs[:, 0]
    v = v if v[np.argmax(np.abs(v))] > 0 else -v
    return DeltaState.from_vector(v), float(v @ H @ v)


@dataclass
class FailureReproduction:
    state: MultiplierState
    report: HessianReport
    verdict: Verdict
    direct_Q: float | None

    @property
    def reproduced(self) -> bool:
        return (self.verdict.verdict == "indefinite" and self.direct_Q is not None
                and self.direct_Q < 0 and self.verdict.counterexample_Q is not None
                and self.verdict.counterexample_Q < 0)

    def to_json(self) -> dict:
        return {"state": self.state.to_json(), "verdict": self.verdict.to_json(),
                "direct_Q": self.direct_Q, "reproduced": self.reproduced,
                "cross_rel": None if self.report.blocks is None else self.report.blocks.cross_rel}


def reproduce_failure(spec: ClosureSpec, lam: float = 0.3, lam_ll: float = 0.8,
                      lam_ppll: float = 1e-2) -> FailureReproduction:
    """Convexity test of a closure at a comparison state, with a verified witness."""
    s = state_C(lam, lam_ll, lam_ppll)
    rep = hessian(s, spec)
    coeffs = ConvexityCoefficients.from_blocks(rep.blocks)
    v = verdict_from_minors(coeffs.minors(), rep.eigenvalues)
    direct = None
    if rep.verdict == "indefinite":
        v.verdict = "indefinite"
        delta, q = counterexample_direction(rep.H)
        v.counterexample, v.counterexample_Q = delta, q
        direct = second_directional_derivative(s, spec, delta)
    return FailureReproduction(s, rep, v, direct)


# -- search over eta-form families ------------------------------------------------------


def random_K_family(rng: np.random.Generator, degree: int = 2, n_terms: int = 6, weights=None):
    kw = {} if weights is None else {"weights": weights}
    theta = random_polynomial(THETA_VARS, rng, degree=degree, n_terms=n_terms)
    Kstar = [random_polynomial(KSTAR_VARS, rng, degree=degree, n_terms=n_terms) for _ in range(3)]
    return build_compat_family_K(theta, Kstar, **kw)


def scan_K(count: int = 50, degree: int = 2, seed: int = 0, lam: float = 0.3, lam_ll: float = 0.8,
           n_terms: int = 6) -> list[dict]:
    """Limit verdicts (lambda_ppll -> 0+) for random K-families; one row per family."""
    rows = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        spec = random_K_family(rng, degree, n_terms)
        row = {"index": k, "lambda": lam, "lambda_ll": lam_ll}
        try:
            v = limit_verdict(lambda p: coefficients_at_C(state_C(lam, lam_ll, p), spec))
            row.update(verdict=v.verdict, failing_minor=None if v.failing is None else MINOR_NAMES[v.failing],
                       minors=[float(m) for m in v.minors])
        except LimitNotConverged as exc:
            row.update(verdict="limit-not-converged", failing_minor=None, minors=None, error=str(exc))
        rows.append(row)
    return rows
