import json

import numpy as np
import pytest

from et14.closure import (Form, X_NAMES, ClosureSpec, assemble_potentials, build_compat_family_X,
                          compute_moments, constant_spec, eta_form_of, potential_jets, spec_from_json)
from et14.coefficients import PRINTED
from et14.errors import ArityMismatch, FormMismatch, SingularX1
from et14.functions import Polynomial, random_polynomial
from et14.state import MultiplierState
from et14.verifier import compatibility_residual, galilean_residual_h, galilean_residual_phi

from conftest import bundled_spec, k_family, x_family


def arbitrary_x(seed):
    rng = np.random.default_rng(seed)
    return ClosureSpec(Form.X_FORM, [random_polynomial(X_NAMES, rng, 2, 6) for _ in range(4)])


def test_spec_validation():
    p = Polynomial.constant(X_NAMES, 1)
    with pytest.raises(FormMismatch):
        ClosureSpec(Form.X_FORM, [p, p, p])
    with pytest.raises(FormMismatch):
        ClosureSpec(Form.X_FORM, [p, p, p, Polynomial.constant(("eta1",), 1)])
    with pytest.raises(ArityMismatch):
        build_compat_family_X(psi=Polynomial.constant(("X6",), 1))
    with pytest.raises(ArityMismatch):
        build_compat_family_X(Hstar=[None, None])


def test_any_x_form_closure_is_galilean(states):
    spec = arbitrary_x(5)
    for s in states[:10]:
        assert galilean_residual_h(s, spec).max_rel <= 1e-11
        assert galilean_residual_phi(s, spec).max_rel <= 1e-11


def test_arbitrary_closure_is_not_compatible(states):
    spec = arbitrary_x(6)
    assert min(compatibility_residual(s, spec).max_rel for s in states[:10]) > 1e-3


@pytest.mark.parametrize("psi,phi", [(True, False), (False, True), (True, True)])
def test_x_families_are_compatible(states, psi, phi):
    spec = x_family(21, psi=psi, phi=phi)
    for s in states[:10]:
        assert compatibility_residual(s, spec).max_rel <= 1e-10
        assert galilean_residual_phi(s, spec).max_rel <= 1e-10


def test_k_family_is_compatible_and_galilean(eta_states):
    spec = k_family(22)
    for s in eta_states[:10]:
        assert compatibility_residual(s, spec).max_rel <= 1e-10
        assert galilean_residual_h(s, spec).max_rel <= 1e-10
        assert galilean_residual_phi(s, spec).max_rel <= 1e-10


def test_eta_form_reproduces_x_form(eta_states):
    spec = x_family(23)
    eta = eta_form_of(spec)
    for s in eta_states[:10]:
        a, b = assemble_potentials(s, spec), assemble_potentials(s, eta)
        assert b.h_prime == pytest.approx(a.h_prime, rel=1e-9, abs=1e-12)
        np.testing.assert_allclose(b.phi_prime, a.phi_prime, rtol=1e-9, atol=1e-12)


def test_eta_form_needs_nonzero_p():
    s = MultiplierState.from_vector(np.r_[np.full(13, 0.3), 0.0])
    with pytest.raises(SingularX1):
        assemble_potentials(s, k_family(1))


def test_printed_weights_break_the_flux_condition(states):
    spec = constant_spec(Form.X_FORM, [1.0, 1.0, 1.0, 1.0], weights=PRINTED)
    assert galilean_residual_phi(states[0], spec).max_rel > 1e-3
    assert galilean_residual_h(states[0], spec).max_rel <= 1e-12


def test_tampered_closure_fails_galilean(states):
    spec = bundled_spec("tampered_q1.json")
    assert galilean_residual_h(states[0], spec).max_rel > 1e-3


def test_json_round_trip_preserves_potentials(states):
    for spec in (x_family(3), k_family(4)):
        again = spec_from_json(json.loads(json.dumps(spec.to_json())))
        s = states[1].replace(lam_ppll=0.7)
        a, b = assemble_potentials(s, spec), assemble_potentials(s, again)
        assert a.h_prime == b.h_prime
        np.testing.assert_array_equal(a.phi_prime, b.phi_prime)


def test_moments_are_gradients(states):
    spec = x_family(8)
    s = states[2]
    mom = compute_moments(s, spec)
    z = s.to_vector()
    hstep = 1e-6
    h = lambda w: assemble_potentials(MultiplierState.from_vector(w), spec)
    zp, zm = z.copy(), z.copy()
    zp[0] += hstep
    zm[0] -= hstep
    assert mom.F == pytest.approx((h(zp).h_prime - h(zm).h_prime) / (2 * hstep), rel=1e-6)
    np.testing.assert_allclose(mom.F_k, (h(zp).phi_prime - h(zm).phi_prime) / (2 * hstep), rtol=1e-6)
    # the compatibility condition: momentum density equals mass flux
    np.testing.assert_allclose(mom.F_k, mom.F_i, rtol=1e-10)
    assert np.allclose(mom.F_ij, mom.F_ij.T) and mom.G_kij.shape == (3, 3, 3)


def test_potential_jets_hessian_is_symmetric(states):
    H = potential_jets(states[3], x_family(9), order=2).h.hess
    np.testing.assert_allclose(H, H.T, atol=1e-12 * np.abs(H).max())


def test_bundled_closures_load():
    for name in ("family_x_psi.json", "family_x_phi.json", "family_x_mixed.json",
                 "family_eta_1.json", "family_eta_2.json", "subsystem_5.json"):
        spec = bundled_spec(name)
        assert spec.form in (Form.X_FORM, Form.ETA_FORM, Form.SUBSYSTEM_5)
