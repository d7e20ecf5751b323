import json

import numpy as np
import pytest

from et14.closure import X_NAMES, ClosureSpec, Form
from et14.errors import SingularDenominator
from et14.functions import Polynomial, random_polynomial
from et14.verifier import (ResidualReport, Residual, derived_forms_check, fd_gradient_residual,
                           galilean_operator, noncommutativity_demo, pde_system_residual,
                           subsystem_residual, sweep, compatibility_residual)

from conftest import bundled_spec, x_family


def x_points(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 8))
    pts[:, :2] = np.sign(pts[:, :2]) * (0.1 + np.abs(pts[:, :2]))
    return pts


def test_residual_relative_error():
    r = Residual(np.array([0.0, 1e-3, 2.0]), np.array([0.0, 1.0, 4.0]))
    assert r.max_rel == 0.5 and r.max_abs == 2.0 and r.max_scale == 4.0


def test_family_solves_pde_system():
    H = x_family(30).functions
    for pt in x_points(20, 1):
        assert pde_system_residual(H, pt).max_rel <= 1e-10


def test_random_H_violates_pde_system():
    rng = np.random.default_rng(2)
    H = [random_polynomial(X_NAMES, rng, 2, 6) for _ in range(4)]
    assert min(pde_system_residual(H, pt).max_rel for pt in x_points(10, 3)) > 1e-3


@pytest.mark.parametrize("base", [0, 1])
def test_derived_forms(base):
    H = x_family(31).functions
    for pt in x_points(20, 4):
        assert derived_forms_check(H, pt, base=base).max_rel <= 1e-10
    # substituting the solved forms leaves an identity even for arbitrary H
    rng = np.random.default_rng(5)
    Hr = [random_polynomial(X_NAMES, rng, 2, 6) for _ in range(4)]
    rep = derived_forms_check(Hr, x_points(1, 6)[0], base=base)
    assert rep.substituted.max_rel <= 1e-12 and rep.solved.max_rel > 1e-3


def test_derived_forms_need_pivot():
    pt = x_points(1, 7)[0]
    pt[0] = 0.0
    with pytest.raises(SingularDenominator):
        derived_forms_check(x_family(1).functions, pt, base=0)


def test_fd_gradient_agrees(states):
    spec = x_family(32)
    for s in states[:5]:
        assert fd_gradient_residual(s, spec).max_rel <= 1e-5


def test_galilean_operator_on_lambda():
    from et14.state import MultiplierState
    s = MultiplierState.from_vector(np.linspace(-0.5, 0.8, 14))
    res = galilean_operator(lambda f: f.lam, s)
    np.testing.assert_allclose(res.values, s.lam_i)
    assert galilean_operator(lambda f: f.lam, s, i=1) == pytest.approx(s.lam_i[1])


def test_subsystem_closure():
    spec = bundled_spec("subsystem_5.json")
    rng = np.random.default_rng(8)
    for _ in range(20):
        st = (rng.uniform(-1, 1), rng.uniform(-1, 1, 3), rng.uniform(-1, 1))
        assert subsystem_residual(st, spec).max_rel <= 1e-10
    # dependence on lambda alone is not Galilean
    bad = ClosureSpec(Form.SUBSYSTEM_5, [Polynomial(("lam_ll", "w", "lam"), {(0, 0, 1): 1})])
    assert subsystem_residual((0.3, [0.5, -0.2, 0.1], 0.7), bad).max_rel > 1e-3
    with pytest.raises(ValueError):
        subsystem_residual((0.3, [0.5, -0.2, 0.1], 0.7), x_family(1))


def test_noncommutativity_facts():
    facts = {f.name: f for f in noncommutativity_demo(seed=0, n_states=20)}
    assert all(f.passed for f in facts.values())
    assert facts["restricted_h_vanishes"].value[0] <= 1e-12
    assert facts["restricted_eta5_bracket"].value == pytest.approx([16.0, 0.0, 0.0], abs=1e-12)
    assert np.linalg.norm(facts["restricted_w_bracket"].value) > 0.1
    json.dumps([f.to_json() for f in facts.values()])


def test_sweep_report(states):
    spec = x_family(33)
    rep = sweep("compatibility", "compat", states[:5], lambda s: compatibility_residual(s, spec))
    assert len(rep.rows) == 5 and rep.summary(1e-9)["pass"]
    neg = ResidualReport("neg", rows=[{"max_rel": 0.5}, {"max_rel": 0.0}])
    assert neg.fraction_above(1e-3) == 0.5 and not neg.summary(1e-3, negative=True)["pass"]
    lines = list(rep.jsonl())
    assert json.loads(lines[0])["check"] == "compatibility"
    assert rep.csv().count("\n") == 6
