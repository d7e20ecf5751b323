import numpy as np
import pytest

from et14.convexity import (MINOR_NAMES, ConvexityCoefficients, b_c_coefficients, block_basis,
                            coefficients_at_C, convexity_verdict, counterexample_direction,
                            eigen_verdict, hessian, limit_verdict,
                            reproduce_failure, richardson_limit, scan_K,
                            second_directional_derivative, verdict_from_minors)
from et14.errors import LimitNotConverged, NearSingular, NotIndefinite, NotStateC
from et14.state import MultiplierState, state_C
from et14.closure import potential_jets

from conftest import bundled_spec, x_family

C_STATES = [(0.3, 0.8, 0.5), (-0.4, 1.1, -0.7), (0.9, -0.6, 0.2)]


def test_hessian_matches_differenced_gradient(states):
    spec = x_family(40)
    s = states[4]
    H = hessian(s, spec).H
    z = s.to_vector()
    h = 1e-6
    for k in (0, 5, 11, 13):
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        gp = potential_jets(MultiplierState.from_vector(zp), spec).h.grad
        gm = potential_jets(MultiplierState.from_vector(zm), spec).h.grad
        np.testing.assert_allclose(H[k], (gp - gm) / (2 * h), rtol=1e-5, atol=1e-6 * np.abs(H).max())


def test_second_directional_derivative(states):
    spec = x_family(41)
    s = states[5]
    H = hessian(s, spec).H
    d = np.random.default_rng(0).standard_normal(14)
    assert second_directional_derivative(s, spec, d) == pytest.approx(d @ H @ d, rel=1e-10)


def test_block_basis_shapes():
    b = block_basis(0.5)
    assert [len(b[k]) for k in "ABC"] == [3, 6, 5]
    T = np.column_stack(b["A"] + b["B"] + b["C"])
    assert np.linalg.matrix_rank(T) == 14


@pytest.mark.parametrize("name", ["family_eta_1.json", "family_eta_2.json", "family_x_mixed.json"])
def test_blocks_decouple_at_state_C(name):
    spec = bundled_spec(name)
    for lam, ll, p in C_STATES:
        rep = hessian(state_C(lam, ll, p), spec)
        assert rep.symmetry_rel <= 1e-12
        assert rep.blocks.cross_rel <= 1e-10
        assert rep.blocks.isotropy_rel <= 1e-10


@pytest.mark.parametrize("name", ["family_eta_1.json", "family_eta_2.json"])
def test_coefficients_match_hessian(name):
    spec = bundled_spec(name)
    for lam, ll, p in C_STATES:
        s = state_C(lam, ll, p)
        blocks = hessian(s, spec).blocks
        co = coefficients_at_C(s, spec)
        big = np.abs(hessian(s, spec).H).max()
        np.testing.assert_allclose(co.a, blocks.a, atol=1e-9 * big)
        np.testing.assert_allclose(co.b, blocks.b, atol=1e-9 * big)
        assert co.c == pytest.approx(blocks.c, abs=1e-9 * big)


def test_printed_coefficients_differ_from_hessian():
    spec = bundled_spec("family_eta_1.json")
    s = state_C(0.3, 0.8, 0.5)
    blocks = hessian(s, spec).blocks
    pr = coefficients_at_C(s, spec, variant="printed")
    assert pr.b12 == pytest.approx(blocks.b[0, 1], rel=1e-9)
    assert pr.c == pytest.approx(blocks.c, rel=1e-9)
    assert max(abs(pr.b11 - blocks.b[0, 0]), abs(pr.b22 - blocks.b[1, 1])) > 1e-3 * np.abs(blocks.b).max()
    with pytest.raises(ValueError):
        b_c_coefficients(np.ones(8), 0.1, 0.2, 0.3, variant="other")


def test_coefficients_guard_their_domain():
    spec = bundled_spec("family_eta_1.json")
    with pytest.raises(NotStateC):
        coefficients_at_C(MultiplierState.from_vector(np.linspace(0.1, 1.4, 14)), spec)
    with pytest.raises(NearSingular):
        coefficients_at_C(state_C(0.3, 0.8, 0.0), spec)
    with pytest.raises(NearSingular):
        hessian(state_C(0.3, 0.8, 0.0), spec)


def test_eigen_and_minor_verdicts():
    assert eigen_verdict(np.array([1.0, 2.0])) == "positive-definite"
    assert eigen_verdict(np.array([-1.0, 2.0])) == "indefinite"
    assert eigen_verdict(np.array([0.0, 2.0])) == "degenerate"
    v = verdict_from_minors(np.ones(6))
    assert v.positive and v.failing is None
    v = verdict_from_minors(np.array([1, 1, -1, 1, 1, 1.0]))
    assert v.verdict == "indefinite" and MINOR_NAMES[v.failing] == "det_a3"
    v = verdict_from_minors(np.array([1, 1, 1, 0.0, 1, 1]))
    assert v.verdict == "degenerate" and v.failing == 3


def test_convexity_verdict_of_diagonal_blocks():
    co = ConvexityCoefficients(np.diag([1.0, 2.0, 3.0]), 1.0, 0.5, 1.0, 2.0)
    assert convexity_verdict(co).positive
    co = ConvexityCoefficients(np.diag([1.0, 2.0, 3.0]), 1.0, 2.0, 1.0, 2.0)
    v = convexity_verdict(co)
    assert v.verdict == "indefinite" and MINOR_NAMES[v.failing] == "det_b"


def test_richardson_limit():
    seq = (1e-2, 1e-3, 1e-4)
    vals = [np.array([2 + 3 * p, -1 + p + p * p]) for p in seq]
    lim, _ = richardson_limit(vals, seq)
    np.testing.assert_allclose(lim, [2, -1], atol=1e-6)
    # a quantity vanishing like p^2 needs a floor to be compared in
    zero = [np.array([p * p]) for p in seq]
    lim, _ = richardson_limit(zero, seq, floor=np.array([1.0]))
    assert abs(lim[0]) < 1e-6
    with pytest.raises(LimitNotConverged):
        richardson_limit([np.array([1 / p]) for p in seq], seq)
    with pytest.raises(ValueError):
        richardson_limit(vals[:2], seq[:2])


def test_limit_verdict_of_smooth_family():
    fn = lambda p: ConvexityCoefficients(np.diag([1 + p, 2.0, 3.0]), 1.0, p, 1.0, 2.0 - p)
    v = limit_verdict(fn)
    assert v.positive and len(v.limit_sequence) == 3


def test_counterexample_direction():
    H = np.diag(np.r_[2.0, -1.0, np.full(12, 3.0)])
    d, q = counterexample_direction(H)
    assert q == pytest.approx(-1.0) and d.to_vector()[1] == pytest.approx(1.0)
    with pytest.raises(NotIndefinite):
        counterexample_direction(np.eye(14))


@pytest.mark.parametrize("name", ["family_x_psi.json", "family_x_phi.json", "family_x_mixed.json"])
def test_x_form_convexity_fails(name):
    rep = reproduce_failure(bundled_spec(name))
    assert rep.reproduced
    assert rep.direct_Q == pytest.approx(rep.verdict.counterexample_Q, rel=1e-8)
    assert rep.to_json()["reproduced"] is True


def test_scan_K_never_positive():
    rows = scan_K(count=5, seed=1)
    assert len(rows) == 5
    assert all(r["verdict"] in ("degenerate", "indefinite") for r in rows)
    assert all(r["failing_minor"] == "a11" for r in rows)
    assert rows == scan_K(count=5, seed=1)
