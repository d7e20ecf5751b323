"""Brute-force index-loop transcription of the invariant and generator formulas.

Every contraction is an explicit sum over indices with plain Python loops
over lists; no matrix products and nothing shared with the library's
evaluator.  Used only as a reference in tests.
"""

from fractions import Fraction as F

R3 = range(3)


def _unpack(z):
    z = [float(v) for v in z]
    lam = z[0]
    l = z[1:4]
    a = z[4:10]
    pairs = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
    L = [[0.0] * 3 for _ in R3]
    for k, (i, j) in enumerate(pairs):
        L[i][j] = a[k]
        L[j][i] = a[k]
    m = z[10:13]
    p = z[13]
    return lam, l, L, m, p


def _pow(L, n):
    """lambda_ab^n by explicit index sums."""
    out = [[1.0 if i == j else 0.0 for j in R3] for i in R3]
    for _ in range(n):
        out = [[sum(out[i][c] * L[c][j] for c in R3) for j in R3] for i in R3]
    return out


def _tr(A):
    return sum(A[i][i] for i in R3)


def _q(u, A, v):
    """u_a A_ab v_b."""
    return sum(u[a] * A[a][b] * v[b] for a in R3 for b in R3)


def _v(u, v):
    return sum(u[a] * v[a] for a in R3)


def _Av(A, v):
    return [sum(A[k][h] * v[h] for h in R3) for k in R3]


def oracle_X(z):
    lam, l, L, m, p = _unpack(z)
    Lam = lam
    L2, L3 = _pow(L, 2), _pow(L, 3)
    ll = _tr(L)
    trL2, trL3 = _tr(L2), _tr(L3)
    f = lambda a, b: float(F(a, b))
    cub = -f(37, 375) * ll ** 3 + f(2, 5) * ll * trL2 - f(1, 3) * trL3

    X1 = p
    X2 = 2 * _v(m, m) - f(16, 5) * p * ll
    X3 = 8 * p * (f(11, 50) * ll ** 2 - f(1, 2) * trL2) + 2 * _q(m, L, m) - f(6, 5) * ll * _v(m, m)
    X4 = (2 * _q(m, L2, m) - trL2 * _v(m, m) - f(8, 5) * ll * _q(m, L, m)
          + f(17, 25) * ll ** 2 * _v(m, m) + 8 * p * cub)
    X5 = -f(2, 5) * ll ** 2 + 16 * p * Lam - 4 * _v(l, m) + 2 * trL2
    X6 = (4 * Lam * _v(m, m) + 8 * p * (-f(4, 5) * Lam * ll + f(1, 2) * _v(l, l))
          + f(8, 5) * ll * _v(m, l) - f(4, 5) * ll * trL2 + f(8, 75) * ll ** 3
          - 4 * _q(l, L, m) + f(4, 3) * trL3)
    X7 = (f(8, 15) * trL3 * ll - f(14, 25) * ll ** 2 * trL2 + f(46, 375) * ll ** 4
          + 4 * Lam * _q(m, L, m)
          + 2 * trL2 * _v(l, m) - _v(l, m) ** 2 - f(12, 5) * Lam * ll * _v(m, m)
          + _v(l, l) * _v(m, m) - 4 * _q(m, L2, l)
          - 8 * p * (Lam * trL2 - f(1, 2) * _q(l, L, l) - f(11, 25) * Lam * ll ** 2
                     + f(3, 10) * ll * _v(l, l))
          + f(12, 5) * ll * _q(l, L, m) - f(22, 25) * ll ** 2 * _v(l, m))
    X8 = (-f(34, 25) * ll ** 2 * _q(l, L, m) + 2 * trL2 * _q(l, L, m) + f(16, 5) * ll * _q(l, L2, m)
          + f(148, 375) * ll ** 3 * _v(l, m) - f(8, 5) * ll * trL2 * _v(l, m)
          + f(4, 3) * trL3 * _v(l, m) - 4 * _q(l, L3, m)
          + 2 * p * (2 * _q(l, L2, l) - trL2 * _v(l, l) - f(8, 5) * ll * _q(l, L, l)
                     + f(17, 25) * ll ** 2 * _v(l, l))
          + _q(l, L, l) * _v(m, m) - f(4, 5) * ll * _v(l, l) * _v(m, m)
          - 2 * _v(l, m) * _q(l, L, m)
          + f(4, 5) * ll * _v(l, m) ** 2 + _v(l, l) * _q(m, L, m)
          + 4 * Lam * _q(m, L2, m) - 2 * Lam * trL2 * _v(m, m) - f(16, 5) * Lam * ll * _q(m, L, m)
          + f(34, 25) * Lam * ll ** 2 * _v(m, m) + 16 * Lam * p * cub
          + f(4, 75) * ll ** 2 * trL3 - f(8, 125) * ll ** 3 * trL2 + f(4, 15) * f(37, 625) * ll ** 5)
    return [X1, X2, X3, X4, X5, X6, X7, X8]


def oracle_V(z):
    lam, l, L, m, p = _unpack(z)
    L2, L3 = _pow(L, 2), _pow(L, 3)
    ll = _tr(L)
    trL2, trL3 = _tr(L2), _tr(L3)
    f = lambda a, b: float(F(a, b))
    Lm, L2m, L3m = _Av(L, m), _Av(L2, m), _Av(L3, m)
    Ll, L2l = _Av(L, l), _Av(L2, l)
    mm, lm = _v(m, m), _v(l, m)
    V0 = [-2 * m[k] for k in R3]
    V1 = [-2 * Lm[k] + 4 * p * l[k] + f(4, 5) * ll * m[k] for k in R3]
    V2 = [-2 * L2m[k] + f(6, 5) * ll * Lm[k] + 4 * Ll[k] * p - f(11, 25) * ll ** 2 * m[k]
          - m[k] * lm + l[k] * mm + trL2 * m[k] - f(12, 5) * p * ll * l[k] for k in R3]
    V3 = [2 * p * (2 * L2l[k] - trL2 * l[k] - f(8, 5) * ll * Ll[k] + f(17, 25) * ll ** 2 * l[k])
          + Ll[k] * mm - f(4, 5) * ll * mm * l[k] - f(17, 25) * ll ** 2 * Lm[k]
          - lm * Lm[k] + trL2 * Lm[k] + f(4, 5) * ll * lm * m[k]
          + f(8, 5) * ll * L2m[k] + f(74, 375) * ll ** 3 * m[k] - f(4, 5) * ll * trL2 * m[k]
          + _q(m, L, m) * l[k] - _q(l, L, m) * m[k] + f(2, 3) * trL3 * m[k] - 2 * L3m[k]
          for k in R3]
    return [V0, V1, V2, V3]


def oracle_contractions(z):
    lam, l, L, m, p = _unpack(z)
    L2, L3 = _pow(L, 2), _pow(L, 3)
    return {
        "Q1": _tr(L), "Q2": _tr(L2), "Q3": _tr(L3),
        "mm": _v(m, m), "mLm": _q(m, L, m), "mL2m": _q(m, L2, m), "mL3m": _q(m, L3, m),
        "lm": _v(l, m), "lLm": _q(l, L, m), "ll": _v(l, l), "lLl": _q(l, L, l), "lL2l": _q(l, L2, l),
    }


def fd_gradient(fun, z, h=1e-6):
    """Central finite-difference gradient of a scalar function of a flat vector."""
    z = [float(v) for v in z]
    out = []
    for k in range(len(z)):
        zp = list(z)
        zm = list(z)
        zp[k] += h
        zm[k] -= h
        out.append((fun(zp) - fun(zm)) / (2 * h))
    return out
