"""Closure potentials h', phi'^k, the compatibility-solving families, and moments.

Three forms are supported:

``x``     h' = sum_r P_r H_r X_{r+1},        phi'^k = sum_r H_r V_r^k,
          with H_r functions of X1..X8.
``eta``   h' = sum_r P_r K_r X_{r+1} / p,    phi'^k = sum_r K_r V_r^k / p,
          with K_r functions of eta1..eta8 (requires p = lambda_ppll != 0).
``sub5``  h' = -2/3 lambda_ll H0,            phi'^k = H0 lambda_k,
          with H0 a function of lambda_ll and w = lambda_a lambda_a - 4/3 lambda lambda_ll.

Besides their native arguments, closure functions may also name the trace
scalars Q1..Q3 (and ``lam`` for ``sub5``).  Such dependence is illegal for a
Galilean-invariant closure; it is accepted so that tampered closures can be
built and shown to fail.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .coefficients import GALILEAN, PCoefficients
from .errors import ArityMismatch, FormMismatch, SingularX1
from .functions import JetFunction, Polynomial, ScalarFunction
from .invariants import (ETA_NAMES, X_NAMES, X_from_eta, Y_from_X, Y_from_eta, Z_from_X,
                         contractions, eta_from_X, generator_vectors, x_invariants)
from .jet import Jet, value
from .state import MultiplierState, StateFields, storage_grad_to_tensor


class Form(str, enum.Enum):
    X_FORM = "x"
    ETA_FORM = "eta"
    SUBSYSTEM_5 = "sub5"


Q_NAMES = ("Q1", "Q2", "Q3")
SUB5_NAMES = ("lam_ll", "w")
ALLOWED_VARS = {
    Form.X_FORM: set(X_NAMES) | set(Q_NAMES),
    Form.ETA_FORM: set(ETA_NAMES) | set(Q_NAMES),
    Form.SUBSYSTEM_5: set(SUB5_NAMES) | {"lam"},
}
N_FUNCTIONS = {Form.X_FORM: 4, Form.ETA_FORM: 4, Form.SUBSYSTEM_5: 1}

PSI_VARS = ("X1", "X2", "X3", "X4", "X5", "Y6", "Y7", "Y8")
HSTAR_VARS = ("X1", "X2", "X3", "X4", "Y6", "Y7", "Y8")
PHI_VARS = ("X1", "X2", "X3", "X4", "Z5", "X6", "Z7", "Z8")
HSTARSTAR_VARS = ("X1", "X2", "X3", "X4", "Z5", "Z7", "Z8")
THETA_VARS = ("eta1", "eta2", "eta3", "eta4", "Y5", "Y6", "Y7", "Y8")
KSTAR_VARS = ("eta1", "eta2", "eta3", "eta4", "Y6", "Y7", "Y8")


@dataclass(frozen=True)
class ClosureSpec:
    """A closure: its form, its scalar functions and the h' weight vector."""

    form: Form
    functions: tuple
    weights: PCoefficients = GALILEAN
    eps1: float = 1e-6
    label: str = ""
    source: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "form", Form(self.form))
        object.__setattr__(self, "functions", tuple(self.functions))
        need = N_FUNCTIONS[self.form]
        if len(self.functions) != need:
            raise FormMismatch(f"form {self.form.value!r} needs {need} functions, got {len(self.functions)}")
        allowed = ALLOWED_VARS[self.form]
        for k, fn in enumerate(self.functions):
            bad = set(fn.vars) - allowed
            if bad:
                raise FormMismatch(f"function {k} of form {self.form.value!r} uses unknown arguments {sorted(bad)}")

    def to_json(self) -> dict:
        if self.source is not None:
            out = dict(self.source)
        else:
            fns = []
            for fn in self.functions:
                if not isinstance(fn, Polynomial):
                    raise TypeError("only polynomial closures serialize without a family source")
                fns.append(fn.to_json())
            out = {"form": self.form.value, "functions": fns}
        out["weights"] = self.weights.name if self.weights.name != "custom" else [str(v) for v in self.weights.exact]
        if self.label:
            out["label"] = self.label
        return out


@dataclass(frozen=True)
class PotentialValue:
    h_prime: float
    phi_prime: np.ndarray


@dataclass
class PotentialJets:
    """h' and phi'^k with their additive terms (floats or jets)."""

    h: object
    phi: list
    h_terms: list
    phi_terms: list  # each entry a length-3 sequence


# -- field environments -----------------------------------------------------


def form_environment(f: StateFields, form: Form, eps1: float = 1e-6) -> tuple[dict, list, list]:
    """Named arguments for the closure functions, plus X1..X8 and V0..V3."""
    c = contractions(f)
    X = x_invariants(f, c)
    V = generator_vectors(f, c)
    env = {"Q1": c["Q1"], "Q2": c["Q2"], "Q3": c["Q3"]}
    if form is Form.X_FORM:
        env.update(zip(X_NAMES, X))
    elif form is Form.ETA_FORM:
        if abs(value(f.p)) < eps1:
            raise SingularX1(f"|lambda_ppll| = {abs(value(f.p)):.3g} below eps1 = {eps1:.3g}")
        env.update(zip(ETA_NAMES, eta_from_X(X)))
    else:
        env["lam_ll"] = c["Q1"]
        env["w"] = c["ll"] - 4 / 3 * f.lam * c["Q1"]
        env["lam"] = f.lam
    return env, X, V


def potential_terms(f: StateFields, spec: ClosureSpec) -> PotentialJets:
    env, X, V = form_environment(f, spec.form, spec.eps1)
    w = spec.weights
    if spec.form is Form.SUBSYSTEM_5:
        H0 = spec.functions[0](env)
        h_terms = [-2 / 3 * env["lam_ll"] * H0]
        phi_terms = [[H0 * f.l[k] for k in range(3)]]
    else:
        Hs = [fn(env) for fn in spec.functions]
        if spec.form is Form.X_FORM:
            h_terms = [w[r] * Hs[r] * X[r] for r in range(4)]
            phi_terms = [[Hs[r] * V[r][k] for k in range(3)] for r in range(4)]
        else:
            inv_p = 1.0 / f.p
            h_terms = [w[r] * Hs[r] * X[r] * inv_p for r in range(4)]
            phi_terms = [[Hs[r] * V[r][k] * inv_p for k in range(3)] for r in range(4)]
    h = _sum(h_terms)
    phi = [_sum([t[k] for t in phi_terms]) for k in range(3)]
    return PotentialJets(h, phi, h_terms, phi_terms)


def _sum(items):
    total = items[0]
    for it in items[1:]:
        total = total + it
    return total


def potential_jets(state: MultiplierState, spec: ClosureSpec, order: int = 1) -> PotentialJets:
    """Potentials as jets over the 14 storage coordinates."""
    jets = potential_terms(state.to_jets(order), spec)
    n = 14

    def lift(x):
        return x if isinstance(x, Jet) else Jet.constant(float(x), n, order)

    jets.h = lift(jets.h)
    jets.phi = [lift(x) for x in jets.phi]
    jets.h_terms = [lift(x) for x in jets.h_terms]
    jets.phi_terms = [[lift(x) for x in t] for t in jets.phi_terms]
    return jets


def assemble_potentials(state: MultiplierState, spec: ClosureSpec) -> PotentialValue:
    pj = potential_terms(state.fields(), spec)
    return PotentialValue(float(pj.h), np.array([float(x) for x in pj.phi]))


# -- compatibility-solving families ---------------------------------------


def _check_vars(fn, allowed, role):
    if fn is None:
        return
    if not isinstance(fn, ScalarFunction):
        raise ArityMismatch(f"{role} must be a ScalarFunction")
    bad = set(fn.vars) - set(allowed)
    if bad:
        raise ArityMismatch(f"{role} may depend on {allowed}, not on {sorted(bad)}")


def _partial(fn, name):
    """d fn / d name as a scalar function (zero if fn is absent or independent of name)."""
    if fn is None or name not in fn.vars:
        return None
    return fn.partial(name)


def _ev(fn, env, zero=0.0):
    return zero if fn is None else fn(env)


def _fix_list(items, n, role):
    items = list(items) if items is not None else [None] * n
    if len(items) != n:
        raise ArityMismatch(f"{role} needs {n} functions, got {len(items)}")
    return items


def build_compat_family_X(psi: ScalarFunction | None = None, Hstar: Sequence | None = None,
                          phi: ScalarFunction | None = None, Hstarstar: Sequence | None = None,
                          weights: PCoefficients = GALILEAN, label: str = "",
                          source: dict | None = None) -> ClosureSpec:
    """X-form closure whose H_r solve the compatibility condition.

    ``Hstar`` holds H*_1..H*_3; ``Hstarstar`` holds H**_0, H**_2, H**_3.
    With ``c_s = -P_s/P0`` and ``e_t = -P_t/P1``::

        A_s = dpsi/dY_{s+5} + H*_s          (s = 1, 2, 3)
        B_t = dphi/dZ_{t+5} + H**_t         (t = 0, 2, 3)
        H0  = sum_s c_s X_{s+1} A_s + dpsi/dX5 + X2 B_0
        H1  = X1 A_1 + sum_{t != 1} e_t X_{t+1} B_t + dphi/dX6
        H2  = X1 A_2 + X2 B_2,   H3 = X1 A_3 + X2 B_3

    all evaluated at the Y/Z substitution points.  psi, phi are
    differentiated in their own arguments before substitution.
    """
    Hstar = _fix_list(Hstar, 3, "Hstar")
    Hstarstar = _fix_list(Hstarstar, 3, "Hstarstar")
    _check_vars(psi, PSI_VARS, "psi")
    _check_vars(phi, PHI_VARS, "phi")
    for h in Hstar:
        _check_vars(h, HSTAR_VARS, "Hstar")
    for h in Hstarstar:
        _check_vars(h, HSTARSTAR_VARS, "Hstarstar")

    dpsi_Y = [_partial(psi, n) for n in ("Y6", "Y7", "Y8")]
    dpsi_X5 = _partial(psi, "X5")
    dphi_Z = [_partial(phi, n) for n in ("Z5", "Z7", "Z8")]
    dphi_X6 = _partial(phi, "X6")
    c = [weights.ratio(s, 0) for s in range(4)]
    e = [weights.ratio(t, 1) for t in range(4)]

    def parts(env):
        X = [env[n] for n in X_NAMES]
        Y = Y_from_X(X, weights)
        Z = Z_from_X(X, weights)
        args = dict(zip(X_NAMES[:6], X[:6]))
        args.update(Y6=Y[1], Y7=Y[2], Y8=Y[3], Z5=Z[0], Z7=Z[1], Z8=Z[2])
        A = [_ev(dpsi_Y[i], args) + _ev(Hstar[i], args) for i in range(3)]          # s = 1..3
        B = [_ev(dphi_Z[i], args) + _ev(Hstarstar[i], args) for i in range(3)]     # t = 0, 2, 3
        return X, args, A, B

    def H0(env):
        X, args, A, B = parts(env)
        return (c[1] * X[1] * A[0] + c[2] * X[2] * A[1] + c[3] * X[3] * A[2]
                + _ev(dpsi_X5, args) + X[1] * B[0])

    def H1(env):
        X, args, A, B = parts(env)
        return (X[0] * A[0] + e[0] * X[0] * B[0] + e[2] * X[2] * B[1] + e[3] * X[3] * B[2]
                + _ev(dphi_X6, args))

    def H2(env):
        X, args, A, B = parts(env)
        return X[0] * A[1] + X[1] * B[1]

    def H3(env):
        X, args, A, B = parts(env)
        return X[0] * A[2] + X[1] * B[2]

    fns = tuple(JetFunction(X_NAMES, fn, label=f"H{r}") for r, fn in enumerate((H0, H1, H2, H3)))
    if source is None and all(isinstance(g, (Polynomial, type(None))) for g in [psi, phi, *Hstar, *Hstarstar]):
        source = {"form": "x", "family": {
            "psi": None if psi is None else psi.to_json(),
            "Hstar": [None if h is None else h.to_json() for h in Hstar],
            "phi": None if phi is None else phi.to_json(),
            "Hstarstar": [None if h is None else h.to_json() for h in Hstarstar],
        }}
    return ClosureSpec(Form.X_FORM, fns, weights=weights, label=label, source=source)


def build_compat_family_K(theta: ScalarFunction | None = None, Kstar: Sequence | None = None,
                          weights: PCoefficients = GALILEAN, eps1: float = 1e-6, label: str = "",
                          source: dict | None = None) -> ClosureSpec:
    """Eta-form closure solving the compatibility condition (X1 != 0 branch).

    With ``c_s = -P_s/P0`` and ``A_s = dtheta/dY_{s+5} + K*_s``::

        K0 = sum_s c_s eta1 eta_{s+1} A_s + dtheta/dY5,   K_s = eta1 A_s

    evaluated at Y5..Y8 written in the eta variables.
    """
    Kstar = _fix_list(Kstar, 3, "Kstar")
    _check_vars(theta, THETA_VARS, "theta")
    for k in Kstar:
        _check_vars(k, KSTAR_VARS, "Kstar")
    dth_Y = [_partial(theta, n) for n in ("Y6", "Y7", "Y8")]
    dth_Y5 = _partial(theta, "Y5")
    c = [weights.ratio(s, 0) for s in range(4)]

    def parts(env):
        eta = [env[n] for n in ETA_NAMES]
        Y = Y_from_eta(eta, weights)
        args = dict(zip(ETA_NAMES[:4], eta[:4]))
        args.update(zip(("Y5", "Y6", "Y7", "Y8"), Y))
        A = [_ev(dth_Y[i], args) + _ev(Kstar[i], args) for i in range(3)]
        return eta, args, A

    def K0(env):
        eta, args, A = parts(env)
        return (c[1] * eta[0] * eta[1] * A[0] + c[2] * eta[0] * eta[2] * A[1]
                + c[3] * eta[0] * eta[3] * A[2] + _ev(dth_Y5, args))

    def make_Ks(s):
        def Ks(env):
            eta, args, A = parts(env)
            return eta[0] * A[s - 1]
        return Ks

    fns = (JetFunction(ETA_NAMES, K0, label="K0"),) + tuple(
        JetFunction(ETA_NAMES, make_Ks(s), label=f"K{s}") for s in (1, 2, 3))
    if source is None and all(isinstance(g, (Polynomial, type(None))) for g in [theta, *Kstar]):
        source = {"form": "eta", "family": {
            "theta": None if theta is None else theta.to_json(),
            "Kstar": [None if k is None else k.to_json() for k in Kstar],
        }}
    return ClosureSpec(Form.ETA_FORM, fns, weights=weights, eps1=eps1, label=label, source=source)


def eta_form_of(spec: ClosureSpec) -> ClosureSpec:
    """The eta-form closure equal to an X-form one: K_r(eta) = eta1 H_r(X(eta))."""
    if spec.form is not Form.X_FORM:
        raise FormMismatch("eta_form_of expects an X-form closure")

    def make(fn):
        def K(env):
            eta = [env[n] for n in ETA_NAMES]
            X = X_from_eta(eta)
            return eta[0] * fn(dict(zip(X_NAMES, X)))
        return JetFunction(ETA_NAMES, K)

    if any(set(fn.vars) & set(Q_NAMES) for fn in spec.functions):
        raise FormMismatch("closures depending on Q1..Q3 have no eta-form counterpart")
    return ClosureSpec(Form.ETA_FORM, tuple(make(fn) for fn in spec.functions),
                       weights=spec.weights, eps1=spec.eps1, label=spec.label)


def constant_spec(form: Form, consts: Sequence[float], weights: PCoefficients = GALILEAN) -> ClosureSpec:
    vars = {Form.X_FORM: X_NAMES, Form.ETA_FORM: ETA_NAMES, Form.SUBSYSTEM_5: SUB5_NAMES}[Form(form)]
    return ClosureSpec(form, tuple(Polynomial.constant(vars, c) for c in consts), weights=weights)


# -- serialization ----------------------------------------------------------


def _poly_or_none(data):
    return None if data is None else Polynomial.from_json(data)


def spec_from_json(data: Mapping) -> ClosureSpec:
    """Parse a closure file: raw functions or a family description."""
    weights = data.get("weights", "galilean")
    if isinstance(weights, str):
        weights = PCoefficients.from_name(weights)
    else:
        weights = PCoefficients(*weights)
    form = Form(data["form"])
    label = data.get("label", "")
    fam = data.get("family")
    src = {k: v for k, v in data.items() if k not in ("weights", "label")}
    if fam is not None:
        if form is Form.X_FORM:
            return build_compat_family_X(
                _poly_or_none(fam.get("psi")), [_poly_or_none(h) for h in fam.get("Hstar", [None] * 3)],
                _poly_or_none(fam.get("phi")), [_poly_or_none(h) for h in fam.get("Hstarstar", [None] * 3)],
                weights=weights, label=label, source=src)
        if form is Form.ETA_FORM:
            return build_compat_family_K(
                _poly_or_none(fam.get("theta")), [_poly_or_none(k) for k in fam.get("Kstar", [None] * 3)],
                weights=weights, label=label, source=src)
        raise FormMismatch("families exist only for the x and eta forms")
    fns = tuple(Polynomial.from_json(f) for f in data["functions"])
    return ClosureSpec(form, fns, weights=weights, label=label)


# -- moments ---------------------------------------------------------------


@dataclass(frozen=True)
class MomentSet:
    """Densities (gradients of h') and fluxes (gradients of phi'_k), tensor slots."""

    F: float
    F_i: np.ndarray
    F_ij: np.ndarray
    F_ill: np.ndarray
    F_iill: float
    F_k: np.ndarray        # (3,)          d phi'_k / d lambda
    G_ki: np.ndarray       # (3, 3)
    G_kij: np.ndarray      # (3, 3, 3)
    G_kill: np.ndarray     # (3, 3)
    G_kiill: np.ndarray    # (3,)

    def to_json(self) -> dict:
        return {k: np.asarray(getattr(self, k)).tolist() for k in
                ("F", "F_i", "F_ij", "F_ill", "F_iill", "F_k", "G_ki", "G_kij", "G_kill", "G_kiill")}


def _split_gradient(g):
    return g[0], g[1:4], storage_grad_to_tensor(g[4:10]), g[10:13], g[13]


def compute_moments(state: MultiplierState, spec: ClosureSpec) -> MomentSet:
    pj = potential_jets(state, spec, order=1)
    F, F_i, F_ij, F_ill, F_iill = _split_gradient(pj.h.grad)
    parts = [_split_gradient(p.grad) for p in pj.phi]
    return MomentSet(
        float(F), np.array(F_i), F_ij, np.array(F_ill), float(F_iill),
        np.array([q[0] for q in parts]), np.array([q[1] for q in parts]),
        np.array([q[2] for q in parts]), np.array([q[3] for q in parts]),
        np.array([q[4] for q in parts]),
    )
