import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from et14.jet import Jet, jet_order, value

finite = st.floats(-3, 3, allow_nan=False)


def poly(x, y):
    return x * x * y - 3 * y / (1 + x * x) + (x - y) ** 3


def poly_grad(x, y):
    d = 1 + x * x
    return np.array([2 * x * y + 6 * x * y / d ** 2 + 3 * (x - y) ** 2,
                     x * x - 3 / d - 3 * (x - y) ** 2])


def test_seed_gives_unit_gradients():
    a, b = Jet.seed([1.0, 2.0], order=2)
    assert np.array_equal(a.grad, [1, 0]) and np.array_equal(b.grad, [0, 1])
    assert a.order == 2 and a.n == 2


@given(finite, finite)
@settings(max_examples=50, deadline=None)
def test_gradient_matches_closed_form(x, y):
    a, b = Jet.seed([x, y], order=1)
    out = poly(a, b)
    assert out.val == pytest.approx(poly(x, y), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(out.grad, poly_grad(x, y), rtol=1e-10, atol=1e-10)


@given(finite, finite)
@settings(max_examples=30, deadline=None)
def test_hessian_matches_differenced_gradient(x, y):
    a, b = Jet.seed([x, y], order=2)
    H = poly(a, b).hess
    h = 1e-6
    fd = np.column_stack([(poly_grad(x + h, y) - poly_grad(x - h, y)) / (2 * h),
                          (poly_grad(x, y + h) - poly_grad(x, y - h)) / (2 * h)])
    np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(H, H.T, atol=1e-12)


def test_integer_powers_and_reciprocal():
    (x,) = Jet.seed([1.5], order=2)
    for k in (0, 1, 2, 5):
        out = x ** k
        assert out.val == pytest.approx(1.5 ** k)
        assert out.grad[0] == pytest.approx(k * 1.5 ** (k - 1))
        assert out.hess[0, 0] == pytest.approx(k * (k - 1) * 1.5 ** (k - 2))
    r = x.reciprocal()
    assert (r.val, r.grad[0], r.hess[0, 0]) == pytest.approx((1 / 1.5, -1 / 1.5 ** 2, 2 / 1.5 ** 3))
    with pytest.raises(ValueError):
        x ** -2
    with pytest.raises(ZeroDivisionError):
        Jet.seed([0.0])[0].reciprocal()


def test_compose_chain_rule():
    x, y = Jet.seed([0.3, -0.7], order=2)
    u, v = x * y, x + y
    # f(u, v) = u v^2 at (u, v)
    uv, vv = u.val, v.val
    f = Jet.compose(uv * vv ** 2, np.array([vv ** 2, 2 * uv * vv]),
                    np.array([[0, 2 * vv], [2 * vv, 2 * uv]]), [u, v])
    direct = u * v * v
    np.testing.assert_allclose(f.grad, direct.grad, atol=1e-14)
    np.testing.assert_allclose(f.hess, direct.hess, atol=1e-14)


def test_jets_inside_object_arrays():
    seeds = Jet.seed([1.0, 2.0, 3.0])
    v = np.empty(3, dtype=object)
    v[:] = seeds
    M = np.diag([2.0, 3.0, 4.0])
    out = v @ M @ v
    assert out.val == pytest.approx(2 + 12 + 36)
    np.testing.assert_allclose(out.grad, [4, 12, 24])


def test_helpers():
    assert value(2) == 2.0 and value(Jet.seed([3.0])[0]) == 3.0
    assert jet_order([1.0, 2.0]) == 0
    assert jet_order([1.0, Jet.seed([1.0], 2)[0]]) == 2
