"""Differentiable scalar functions of named arguments.

Every closure function (H_r, K_r, psi, phi, ...) is a :class:`ScalarFunction`:
it knows its argument names and can return its value, gradient and Hessian
at a float point.  Calling it on :class:`~et14.jet.Jet` arguments applies the
chain rule, so derivatives stay exact through arbitrary nesting.

:class:`Polynomial` is the canonical concrete form (sparse, rational
coefficients, exact symbolic differentiation).  :class:`JetFunction` wraps a
Python callable written in jet-compatible arithmetic; the family builders in
:mod:`et14.closure` use it for their composite H_r.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ArityMismatch
from .jet import Jet, jet_order


class ScalarFunction:
    """Base class.  Subclasses implement :meth:`derivatives`."""

    vars: tuple[str, ...]

    def derivatives(self, point: np.ndarray, order: int = 2):
        """Return ``(value, grad, hess)`` at ``point``; lower orders may be ``None``."""
        raise NotImplementedError

    def __call__(self, *args):
        if len(args) == 1 and isinstance(args[0], Mapping):
            env = args[0]
            try:
                args = tuple(env[v] for v in self.vars)
            except KeyError as exc:
                raise ArityMismatch(f"argument {exc.args[0]!r} not supplied") from None
        if len(args) != len(self.vars):
            raise ArityMismatch(f"expected {len(self.vars)} arguments, got {len(args)}")
        order = jet_order(args)
        point = np.array([a.val if isinstance(a, Jet) else float(a) for a in args])
        if order == 0:
            return self.derivatives(point, 0)[0]
        n = next(a.n for a in args if isinstance(a, Jet))
        jets = [a if isinstance(a, Jet) else Jet.constant(a, n, order) for a in args]
        val, grad, hess = self.derivatives(point, order)
        return Jet.compose(val, grad, hess, jets)

    def partial(self, name: str) -> "ScalarFunction":
        """Exact partial derivative as another scalar function (if supported)."""
        raise NotImplementedError(f"{type(self).__name__} does not provide symbolic partials")

    def value(self, point) -> float:
        return self.derivatives(np.asarray(point, dtype=float), 0)[0]

    def gradient(self, point) -> np.ndarray:
        return self.derivatives(np.asarray(point, dtype=float), 1)[1]

    def hessian(self, point) -> np.ndarray:
        return self.derivatives(np.asarray(point, dtype=float), 2)[2]


class Polynomial(ScalarFunction):
    """Sparse multivariate polynomial with exact rational coefficients."""

    def __init__(self, vars: Sequence[str], terms: Mapping[tuple[int, ...], Fraction | int | float]):
        self.vars = tuple(vars)
        n = len(self.vars)
        clean: dict[tuple[int, ...], Fraction] = {}
        for exp, coef in terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n or min(exp, default=0) < 0:
                raise ArityMismatch(f"exponent {exp} does not fit variables {self.vars}")
            c = Fraction(coef)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
        self.terms = {e: c for e, c in sorted(clean.items()) if c}
        if self.terms:
            self._exps = np.array(list(self.terms), dtype=np.int64).reshape(-1, n)
        else:
            self._exps = np.zeros((0, n), dtype=np.int64)
        self._coefs = np.array([float(c) for c in self.terms.values()])

    # -- construction helpers -------------------------------------------

    @classmethod
    def constant(cls, vars: Sequence[str], c) -> "Polynomial":
        return cls(vars, {(0,) * len(vars): c})

    @classmethod
    def variable(cls, vars: Sequence[str], name: str, coef=1) -> "Polynomial":
        exp = [0] * len(vars)
        exp[list(vars).index(name)] = 1
        return cls(vars, {tuple(exp): coef})

    @classmethod
    def zero(cls, vars: Sequence[str]) -> "Polynomial":
        return cls(vars, {})

    @property
    def degree(self) -> int:
        return int(self._exps.sum(axis=1).max()) if self.terms else 0

    def is_zero(self) -> bool:
        return not self.terms

    def depends_on(self, name: str) -> bool:
        j = self.vars.index(name)
        return bool((self._exps[:, j] > 0).any())

    def diff(self, name: str) -> "Polynomial":
        """Exact partial derivative with respect to ``name``."""
        if name not in self.vars:
            return Polynomial.zero(self.vars)
        j = self.vars.index(name)
        out = {}
        for exp, c in self.terms.items():
            if exp[j]:
                e = list(exp)
                e[j] -= 1
                out[tuple(e)] = c * exp[j]
        return Polynomial(self.vars, out)

    partial = diff

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if other.vars != self.vars:
            raise ArityMismatch("cannot add polynomials over different variables")
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Polynomial(self.vars, terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.vars == other.vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.vars, tuple(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for exp, c in self.terms.items():
            mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in zip(self.vars, exp) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(parts) + ")"

    # -- evaluation -----------------------------------------------------

    def derivatives(self, point: np.ndarray, order: int = 2):
        n = len(self.vars)
        E, c = self._exps, self._coefs
        if not len(c):
            return 0.0, np.zeros(n) if order >= 1 else None, np.zeros((n, n)) if order >= 2 else None
        # powers[t, j, k] = x_j ** (E[t, j] - k) for k = 0, 1, 2 (clipped at 0)
        x = point[None, :]
        p0 = x ** E
        val = float(c @ p0.prod(axis=1))
        if order == 0:
            return val, None, None
        p1 = x ** np.maximum(E - 1, 0)
        grad = np.empty(n)
        for j in range(n):
            m = p0.copy()
            m[:, j] = E[:, j] * p1[:, j]
            grad[j] = c @ m.prod(axis=1)
        if order == 1:
            return val, grad, None
        p2 = x ** np.maximum(E - 2, 0)
        hess = np.empty((n, n))
        for j in range(n):
            for k in range(j, n):
                m = p0.copy()
                if j == k:
                    m[:, j] = E[:, j] * (E[:, j] - 1) * p2[:, j]
                else:
                    m[:, j] = E[:, j] * p1[:, j]
                    m[:, k] = E[:, k] * p1[:, k]
                hess[j, k] = hess[k, j] = c @ m.prod(axis=1)
        return val, grad, hess

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        terms = []
        for exp, c in self.terms.items():
            coef = int(c) if c.denominator == 1 else float(c)
            terms.append({"exp": list(exp), "coef": coef})
        return {"vars": list(self.vars), "terms": terms}

    @classmethod
    def from_json(cls, data: Mapping) -> "Polynomial":
        vars = data["vars"]
        terms: dict = {}
        for t in data["terms"]:
            coef = t["coef"]
            c = Fraction(coef) if isinstance(coef, str) else Fraction(coef)
            key = tuple(t["exp"])
            terms[key] = terms.get(key, Fraction(0)) + c
        return cls(vars, terms)


class JetFunction(ScalarFunction):
    """Scalar function given by a jet-compatible callable over named arguments.

    ``fn`` receives a mapping from argument name to float or jet and must
    use only arithmetic that :class:`Jet` supports.
    """

    def __init__(self, vars: Sequence[str], fn: Callable[[Mapping], object], label: str = ""):
        self.vars = tuple(vars)
        self.fn = fn
        self.label = label

    def derivatives(self, point: np.ndarray, order: int = 2):
        if order == 0:
            return float(self.fn(dict(zip(self.vars, point)))), None, None
        seeds = Jet.seed(point, order)
        out = self.fn(dict(zip(self.vars, seeds)))
        n = len(self.vars)
        if not isinstance(out, Jet):
            out = Jet.constant(float(out), n, order)
        return out.val, out.grad, out.hess

    def __repr__(self) -> str:
        return f"JetFunction({self.label or 'anonymous'}, vars={self.vars})"


def monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples in ``n`` variables with total degree <= ``degree``."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            e = [0] * n
            for j in combo:
                e[j] += 1
            out.append(tuple(e))
    return out


def random_polynomial(vars: Sequence[str], rng: np.random.Generator, degree: int = 3,
                      n_terms: int = 8, coef_range: float = 1.0) -> Polynomial:
    """Sparse random polynomial; coefficients uniform in ``[-coef_range, coef_range]``.

    Coefficients are the exact binary fractions of the sampled doubles, so
    the polynomial serializes and replays bit-for-bit.
    """
    pool = monomials(len(vars), degree)
    k = min(n_terms, len(pool))
    idx = rng.choice(len(pool), size=k, replace=False)
    terms = {pool[i]: Fraction(float(rng.uniform(-coef_range, coef_range))) for i in sorted(idx)}
    return Polynomial(vars, terms)


def function_from_json(data: Mapping) -> Polynomial:
    return Polynomial.from_json(data)
