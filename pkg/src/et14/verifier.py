"""Residuals of the identities a closure must satisfy.

Every residual comes with a *scale*: the largest absolute summand entering
the identity at that state.  ``rel = |residual| / scale`` is what sweeps
compare against tolerances, so thresholds are independent of the size of
the invariants involved.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .closure import (HSTAR_VARS, PSI_VARS, ClosureSpec, Form, PotentialJets, assemble_potentials,
                      build_compat_family_X, potential_jets)
from .coefficients import GALILEAN, PCoefficients
from .errors import SingularDenominator
from .functions import ScalarFunction, random_polynomial
from .invariants import X_NAMES, contractions, generator_vectors, x_invariants
from .jet import Jet
from .state import MultiplierState, StateFields, storage_grad_to_tensor

TINY = 1e-300


@dataclass(frozen=True)
class Residual:
    """Residual components and the matching summand scales."""

    values: np.ndarray
    scale: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def max_rel(self) -> float:
        v = np.abs(np.asarray(self.values, dtype=float)).ravel()
        s = np.broadcast_to(np.asarray(self.scale, dtype=float), np.shape(self.values)).ravel()
        rel = np.where(v == 0.0, 0.0, v / np.maximum(s, TINY))
        return float(rel.max())

    @property
    def max_scale(self) -> float:
        return float(np.max(self.scale))


# -- the Galilean operator --------------------------------------------------


def galilean_from_gradient(grad: np.ndarray, state: MultiplierState) -> Residual:
    """Apply the Galilean bracket to a storage-coordinate gradient.

    G_i = f_lam l_i + 2 L_ij f_{l_j} + m_i tr(F) + 2 F_ij m_j + 4 p f_{m_i},
    where F is the tensor-slot gradient with respect to lambda_ij.
    """
    f = state.fields()
    # the lambda_ppll slot does not enter the bracket
    g_lam, g_l, G, g_m = grad[0], grad[1:4], storage_grad_to_tensor(grad[4:10]), grad[10:13]
    trG = np.trace(G)
    terms = [g_lam * f.l, 2 * f.L @ g_l, f.m * trG, 2 * G @ f.m, 4 * f.p * g_m]
    scale = np.max([np.abs(g_lam * f.l), 2 * np.abs(f.L) @ np.abs(g_l), np.abs(f.m) * np.abs(np.diag(G)).sum(),
                    2 * np.abs(G) @ np.abs(f.m), np.abs(4 * f.p * g_m)], axis=0)
    return Residual(np.sum(terms, axis=0), scale)


def galilean_operator(fn: Callable[[StateFields], object], state: MultiplierState,
                      i: int | None = None) -> Residual | float:
    """Galilean bracket of a scalar field ``fn`` (written over :class:`StateFields`).

    Returns the full 3-vector residual, or component ``i`` as a float.
    """
    out = fn(state.to_jets(1))
    grad = out.grad if isinstance(out, Jet) else np.zeros(14)
    res = galilean_from_gradient(grad, state)
    return res if i is None else float(res.values[i])


def _galilean_h(pj: PotentialJets, state: MultiplierState) -> Residual:
    res = galilean_from_gradient(pj.h.grad, state)
    scale = np.max([galilean_from_gradient(t.grad, state).scale for t in pj.h_terms], axis=0)
    return Residual(res.values, np.maximum(res.scale, scale))


def _galilean_phi(pj: PotentialJets, state: MultiplierState) -> Residual:
    vals = np.zeros((3, 3))
    scale = np.zeros((3, 3))
    for k in range(3):
        r = galilean_from_gradient(pj.phi[k].grad, state)
        term_scales = [galilean_from_gradient(t[k].grad, state).scale for t in pj.phi_terms]
        vals[:, k] = r.values
        scale[:, k] = np.max([r.scale] + term_scales, axis=0)
        vals[k, k] += pj.h.val
        scale[k, k] = max(scale[k, k], abs(pj.h.val), *(abs(t.val) for t in pj.h_terms))
    return Residual(vals, scale)


def _compatibility(pj: PotentialJets) -> Residual:
    vals = np.array([pj.phi[k].grad[0] - pj.h.grad[1 + k] for k in range(3)])
    scale = np.array([
        max([abs(t[k].grad[0]) for t in pj.phi_terms] + [abs(t.grad[1 + k]) for t in pj.h_terms]
            + [abs(pj.phi[k].grad[0]), abs(pj.h.grad[1 + k])])
        for k in range(3)])
    return Residual(vals, scale)


def galilean_residual_h(state: MultiplierState, spec: ClosureSpec) -> Residual:
    return _galilean_h(potential_jets(state, spec, order=1), state)


def galilean_residual_phi(state: MultiplierState, spec: ClosureSpec) -> Residual:
    """3x3 matrix: entry (i, k) is the bracket of phi'_k plus h' delta_ik."""
    return _galilean_phi(potential_jets(state, spec, order=1), state)


def compatibility_residual(state: MultiplierState, spec: ClosureSpec) -> Residual:
    """d phi'_k / d lambda - d h' / d lambda_k."""
    return _compatibility(potential_jets(state, spec, order=1))


def closure_residuals(state: MultiplierState, spec: ClosureSpec) -> dict[str, Residual]:
    """Both Galilean residuals and the compatibility residual from one jet evaluation."""
    pj = potential_jets(state, spec, order=1)
    return {"galilean_h": _galilean_h(pj, state), "galilean_phi": _galilean_phi(pj, state),
            "compatibility": _compatibility(pj)}


def generator_identities(state: MultiplierState, weights: PCoefficients = GALILEAN) -> dict[str, Residual]:
    """Per-invariant Galilean identities.

    ``X{h}``: G_i X_h = 0.  ``V{r}``: G_i V_r^k + d_r X_{r+1} delta_ik = 0,
    where the V_r brackets use their own derivatives (V_r does not depend
    on lambda).
    """
    jf = state.to_jets(1)
    c = contractions(jf)
    X = x_invariants(jf, c)
    V = generator_vectors(jf, c)
    out = {}
    for h in range(8):
        grad = X[h].grad if isinstance(X[h], Jet) else np.zeros(14)
        out[f"X{h + 1}"] = galilean_from_gradient(grad, state)
    for r in range(4):
        vals = np.zeros((3, 3))
        scale = np.zeros((3, 3))
        xr = X[r].val if isinstance(X[r], Jet) else float(X[r])
        for k in range(3):
            vk = V[r][k]
            res = galilean_from_gradient(vk.grad if isinstance(vk, Jet) else np.zeros(14), state)
            vals[:, k] = res.values
            scale[:, k] = res.scale
            vals[k, k] += weights[r] * xr
            scale[k, k] = max(scale[k, k], abs(weights[r] * xr))
        out[f"V{r}"] = Residual(vals, scale)
    return out


def fd_gradient_residual(state: MultiplierState, spec: ClosureSpec, step: float = 1e-6) -> Residual:
    """Forward-mode gradient of h' against central differences in all 14 coordinates."""
    g = potential_jets(state, spec, order=1).h.grad
    z = state.to_vector()
    fd = np.zeros(14)
    for k in range(14):
        zp, zm = z.copy(), z.copy()
        zp[k] += step
        zm[k] -= step
        hp = assemble_potentials(MultiplierState.from_vector(zp), spec).h_prime
        hm = assemble_potentials(MultiplierState.from_vector(zm), spec).h_prime
        fd[k] = (hp - hm) / (2 * step)
    scale = np.full(14, max(np.abs(g).max(), np.abs(fd).max(), TINY))
    return Residual(g - fd, scale)


# -- PDE system in X-space --------------------------------------------------


def _x_gradients(Hfuncs: Sequence[ScalarFunction], point: Sequence[float]) -> np.ndarray:
    """dH_r/dX_h as a (4, 8) array at an X-space point."""
    env = dict(zip(X_NAMES, map(float, point)))
    out = np.zeros((4, 8))
    for r, fn in enumerate(Hfuncs):
        pt = np.array([env[v] for v in fn.vars])
        g = fn.derivatives(pt, 1)[1]
        for j, v in enumerate(fn.vars):
            out[r, X_NAMES.index(v)] = g[j]
    return out


def _D(point, weights):
    return np.array([2 * weights[r] * point[r] for r in range(4)])


def pde_system_residual(Hfuncs: Sequence[ScalarFunction], point: Sequence[float],
                        weights: PCoefficients = GALILEAN) -> Residual:
    """The four first-order relations in X-space, one per s = 0..3.

    sum_t D_t dH_s/dX_{t+5} - sum_r D_r dH_r/dX_{s+5} = 0, D_r = 2 P_r X_{r+1}.
    """
    G = _x_gradients(Hfuncs, point)
    D = _D(point, weights)
    vals = np.zeros(4)
    scale = np.zeros(4)
    for s in range(4):
        left = D * G[s, 4:8]
        right = D * G[:, s + 4]
        vals[s] = left.sum() - right.sum()
        scale[s] = max(np.abs(left).max(), np.abs(right).max())
    return Residual(vals, scale)


def _solved_rhs(G, D, base, s):
    """dH_base/dX_{s+5} solved from relation s (requires D_base != 0)."""
    val = G[s, base + 4]
    terms = [val]
    for t in range(4):
        if t in (base, s):
            continue
        ratio = D[t] / D[base]
        terms += [ratio * G[s, t + 4], -ratio * G[t, s + 4]]
    return sum(terms), max(abs(x) for x in terms)


@dataclass(frozen=True)
class DerivedFormsReport:
    base: int                 # 0: divide by X1, 1: divide by X2
    solved: Residual          # solved-form relations evaluated on the actual H
    substituted: Residual     # remaining relation after substituting the solved forms

    @property
    def max_rel(self) -> float:
        return max(self.solved.max_rel, self.substituted.max_rel)


def derived_forms_check(Hfuncs: Sequence[ScalarFunction], point: Sequence[float], base: int = 0,
                        weights: PCoefficients = GALILEAN, eps: float = 1e-12) -> DerivedFormsReport:
    """Solved forms of the PDE system and the identity they imply.

    ``base = 0`` solves relations 1..3 for dH0/dX_{6,7,8} (needs X1 != 0);
    ``base = 1`` solves relations 0, 2, 3 for dH1/dX_{5,7,8} (needs X2 != 0).
    Substituting the solved derivatives into the remaining relation
    ``base`` must leave an identity for *any* H.
    """
    point = np.asarray(point, dtype=float)
    D = _D(point, weights)
    if abs(D[base]) <= eps * max(1.0, np.abs(point).max()):
        raise SingularDenominator(f"X{base + 1} vanishes at this point")
    G = _x_gradients(Hfuncs, point)
    others = [s for s in range(4) if s != base]
    solved_vals, solved_scale, sub = [], [], {}
    for s in others:
        rhs, sc = _solved_rhs(G, D, base, s)
        solved_vals.append(G[base, s + 4] - rhs)
        solved_scale.append(max(sc, abs(G[base, s + 4])))
        sub[s] = rhs
    # relation `base` with dH_base/dX_{t+5} replaced by the solved expressions
    Gs = G.copy()
    for s, rhs in sub.items():
        Gs[base, s + 4] = rhs
    left = D * Gs[base, 4:8]
    right = D * Gs[:, base + 4]
    substituted = Residual(np.array([left.sum() - right.sum()]),
                           np.array([max(np.abs(left).max(), np.abs(right).max())]))
    return DerivedFormsReport(base, Residual(np.array(solved_vals), np.array(solved_scale)), substituted)


# -- five-moment subsystem ---------------------------------------------------


@dataclass(frozen=True)
class SubsystemReport:
    h_residual: Residual        # 3-vector
    phi_residual: Residual      # 3x3
    compatibility: Residual     # 3-vector

    @property
    def max_rel(self) -> float:
        return max(self.h_residual.max_rel, self.phi_residual.max_rel, self.compatibility.max_rel)

    @property
    def max_abs(self) -> float:
        return max(self.h_residual.max_abs, self.phi_residual.max_abs, self.compatibility.max_abs)


def subsystem_potentials(state5, spec: ClosureSpec, order: int = 1):
    """h' and phi'^k of a five-moment closure as jets over (lambda, lambda_1..3, lambda_ll)."""
    lam, l, q1 = float(state5[0]), np.asarray(state5[1], dtype=float), float(state5[2])
    seeds = Jet.seed([lam, *l, q1], order)
    lj = seeds[1:4]
    w = lj[0] * lj[0] + lj[1] * lj[1] + lj[2] * lj[2] - 4 / 3 * seeds[0] * seeds[4]
    H0 = spec.functions[0]({"lam_ll": seeds[4], "w": w, "lam": seeds[0]})
    if not isinstance(H0, Jet):
        H0 = Jet.constant(H0, 5, order)
    h = -2 / 3 * seeds[4] * H0
    phi = [H0 * lj[k] for k in range(3)]
    return h, phi, H0


def subsystem_residual(state5, spec: ClosureSpec) -> SubsystemReport:
    """Reduced Galilean conditions and the compatibility condition.

    G_i f = df/dlambda lambda_i + 2/3 lambda_ll df/dlambda_i, applied to h'
    and to each phi'^k (plus h' delta_ik); compatibility is
    dphi'_k/dlambda - dh'/dlambda_k.
    """
    if spec.form is not Form.SUBSYSTEM_5:
        raise ValueError("subsystem_residual needs a five-moment closure")
    l, q1 = np.asarray(state5[1], dtype=float), float(state5[2])
    h, phi, _ = subsystem_potentials(state5, spec)

    def bracket(g):
        t1 = g[0] * l
        t2 = 2 / 3 * q1 * g[1:4]
        return t1 + t2, np.maximum(np.abs(t1), np.abs(t2))

    hv, hs = bracket(h.grad)
    pv = np.zeros((3, 3))
    ps = np.zeros((3, 3))
    for k in range(3):
        v, s = bracket(phi[k].grad)
        pv[:, k] = v
        ps[:, k] = s
        pv[k, k] += h.val
        ps[k, k] = max(ps[k, k], abs(h.val))
    cv = np.array([phi[k].grad[0] - h.grad[1 + k] for k in range(3)])
    cs = np.array([max(abs(phi[k].grad[0]), abs(h.grad[1 + k])) for k in range(3)])
    return SubsystemReport(Residual(hv, hs), Residual(pv, ps), Residual(cv, cs))


# -- the three non-commutativity facts -----------------------------------------


@dataclass
class DemoFact:
    name: str
    description: str
    witness: dict
    value: list
    passed: bool

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "witness": self.witness,
                "value": [float(v) for v in self.value], "pass": bool(self.passed)}


def restricted_state(lam: float, lam_i, lam_ij) -> MultiplierState:
    """State with lambda_ill = 0 and lambda_ppll = 0."""
    return MultiplierState(lam, lam_i, lam_ij, np.zeros(3), 0.0)


def noncommutativity_demo(seed: int = 0, n_states: int = 50, spec: ClosureSpec | None = None,
                          tol: float = 1e-12, floor: float = 0.1) -> list[DemoFact]:
    """Numeric evidence that the 14 -> 5 reduction and the classical limit do not commute.

    (a) the X-form h' vanishes identically at lambda_ill = 0, lambda_ppll = 0;
    (b) the restricted eta5 = 16 lambda has Galilean bracket 16 lambda_i there;
    (c) w = lambda_a lambda_a - 4/3 lambda lambda_ll has a nonzero bracket there.
    """
    rng = np.random.default_rng(seed)
    if spec is None:
        spec = build_compat_family_X(random_polynomial(PSI_VARS, rng),
                                     [random_polynomial(HSTAR_VARS, rng) for _ in range(3)])
    facts = []

    # (a)
    worst = 0.0
    worst_state = None
    for _ in range(n_states):
        s = restricted_state(rng.uniform(-1, 1), rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 6))
        h = abs(assemble_potentials(s, spec).h_prime)
        if worst_state is None or h > worst:
            worst, worst_state = h, s
    facts.append(DemoFact("restricted_h_vanishes",
                          "X-form h' at lambda_ill = 0, lambda_ppll = 0",
                          worst_state.to_json(), [worst], bool(worst <= tol)))

    # (b)
    s = restricted_state(1.0, [1.0, 0.0, 0.0], [0.3, -0.2, 0.5, 0.1, -0.4, 0.25])
    res = galilean_operator(lambda f: 16 * f.lam, s)
    expected = 16 * s.lam_i
    dev = float(np.abs(res.values - expected).max())
    facts.append(DemoFact("restricted_eta5_bracket",
                          "Galilean bracket of 16*lambda at lambda_ill = 0, lambda_ppll = 0 equals 16*lambda_i",
                          s.to_json(), res.values.tolist(), bool(dev <= tol and np.abs(res.values).max() > 0)))

    # (c)
    s = restricted_state(0.7, [0.4, -0.9, 0.3], [0.8, -0.5, 0.1, 0.6, -0.3, 0.45])
    res = galilean_operator(lambda f: f.l @ f.l - 4 / 3 * f.lam * (f.L[0, 0] + f.L[1, 1] + f.L[2, 2]), s)
    norm = float(np.linalg.norm(res.values))
    facts.append(DemoFact("restricted_w_bracket",
                          "Galilean bracket of lambda_a lambda_a - 4/3 lambda lambda_ll is nonzero",
                          s.to_json(), res.values.tolist(), bool(norm > floor)))
    return facts


# -- sweep reports -----------------------------------------------------------------


@dataclass
class ResidualReport:
    name: str
    label: str = ""
    rows: list = field(default_factory=list)

    def add(self, index: int, digest: str, res: Residual, extra: dict | None = None) -> None:
        row = {"index": index, "state": digest, "max_abs": res.max_abs, "max_rel": res.max_rel,
               "scale": res.max_scale}
        if extra:
            row.update(extra)
        self.rows.append(row)

    @property
    def max_abs(self) -> float:
        return max((r["max_abs"] for r in self.rows), default=0.0)

    @property
    def max_rel(self) -> float:
        return max((r["max_rel"] for r in self.rows), default=0.0)

    def fraction_above(self, floor: float) -> float:
        if not self.rows:
            return 0.0
        return sum(r["max_rel"] >= floor for r in self.rows) / len(self.rows)

    def summary(self, tol: float, negative: bool = False) -> dict:
        if negative:
            frac = self.fraction_above(tol)
            return {"name": self.name, "paper_ref": self.label, "max_rel": self.max_rel,
                    "min_rel": min((r["max_rel"] for r in self.rows), default=0.0),
                    "fraction_above_floor": frac, "pass": bool(self.rows) and frac >= 0.95}
        return {"name": self.name, "paper_ref": self.label, "max_rel": self.max_rel,
                "pass": bool(self.rows) and self.max_rel <= tol}

    def jsonl(self) -> Iterable[str]:
        for r in self.rows:
            yield json.dumps({"check": self.name, **r}, sort_keys=True)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "index", "state", "max_abs", "max_rel", "scale"])
        for r in self.rows:
            w.writerow([self.name, r["index"], r["state"], repr(r["max_abs"]), repr(r["max_rel"]), repr(r["scale"])])
        return buf.getvalue()


def sweep(name: str, label: str, states: Sequence[MultiplierState],
          fn: Callable[[MultiplierState], Residual]) -> ResidualReport:
    rep = ResidualReport(name, label)
    for k, s in enumerate(states):
        rep.add(k, s.digest(), fn(s))
    return rep
