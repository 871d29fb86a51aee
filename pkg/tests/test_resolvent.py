import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hresolvent.constants import DomainError, K_d, kappa_d
from hresolvent.fields import SpectralParam, builtin_family, gauss_poly, Polynomial
from hresolvent.hardy import HypothesisError
from hresolvent.potentials import Potential
from hresolvent.resolvent import (AS_WRITTEN, CapabilityError, Evaluator,
                                  check_gradumeno, check_identity_am_final,
                                  check_multiplier_identities, default_deltas, est1_chain,
                                  identity_suite, koranyi_probe, lambda_grid, make_instance,
                                  parabola_check, resolvent_suite, verify_thm1,
                                  verify_thm16, verify_thm_pp)


@pytest.fixture(scope="module")
def member():
    return builtin_family(2, 0, 12)[11]


@pytest.fixture(scope="module")
def ev(member, q2):
    return Evaluator(member, None, q2)


def by_name(verdicts):
    return {v.inequality: v for v in verdicts}


def test_lambda_grid_and_deltas():
    lams = lambda_grid(2)
    assert len(lams) == 12 and len(set(lams)) == 12
    assert default_deltas(2)[1:] == (1.0, 5.0)
    # a point sits on the delta_* cone boundary
    assert any(SpectralParam.from_complex(l).on_cone_boundary(default_deltas(2)[0])
               for l in lams)


def test_instance_consistency(rng):
    for u in builtin_family(2, 0, 8):
        inst = make_instance(u, 1 - 2j)
        assert inst.consistency_residual(rng.standard_normal((50, 5))) < 1e-10
    V = Potential.gaussian(0.3)
    inst = make_instance(u, 2 + 1j, V)
    assert inst.consistency_residual(rng.standard_normal((50, 5))) < 1e-10


def test_capability_errors():
    with pytest.raises(CapabilityError):
        make_instance(lambda p: p[:, 0], 1.0)
    u = builtin_family(2, 0, 1)[0]
    with pytest.raises(ValueError):
        make_instance(u, 1.0, Potential.power(0.1j, 2))
    with pytest.raises(CapabilityError):
        check_multiplier_identities(make_instance(u, 1.0), phi3="|z|^4")
    with pytest.raises(CapabilityError):
        check_multiplier_identities(make_instance(u, 1.0), phi1="|z|")


def test_free_verdicts_pass(member, ev):
    for lam in lambda_grid(2):
        inst = make_instance(member, lam)
        for delta in default_deltas(2):
            for v in verify_thm1(inst, delta, ev=ev):
                assert v.passed, v.to_dict()


def test_cone_conventions(member, ev):
    # inside the cone with lam1 > 0: est2, with K_d(delta)
    v = by_name(verify_thm1(make_instance(member, 2 + 1j), 1.0, ev=ev))
    assert set(v) == {"est2", "katoyajima", "GL-weak"}
    assert v["est2"].constant == pytest.approx(K_d(2, 1.0))
    assert v["katoyajima"].constant == pytest.approx(kappa_d(2).kappa_d)
    # outside: est1
    v = by_name(verify_thm1(make_instance(member, 1 + 5j), 1.0, ev=ev))
    assert "est1" in v and "est2" not in v and v["est1"].cone == "outside"
    assert v["est1"].constant == pytest.approx(2.0)
    # |lam2| <= delta |lam1| with lam1 < 0 falls back to est1
    v = verify_thm1(make_instance(member, -2 + 1j), 1.0, ev=ev)
    est1 = by_name(v)["est1"]
    assert "proof-region" in est1.tags and "est2" not in by_name(v)
    # on the boundary both are checked
    names = [x.inequality for x in verify_thm1(make_instance(member, 1 + 1j), 1.0, ev=ev)]
    assert "est1" in names and "est2" in names


def test_thm1_errors(member, ev):
    with pytest.raises(DomainError):
        verify_thm1(make_instance(member, 1.0), 0.0, ev=ev)
    with pytest.raises(ValueError):
        verify_thm1(make_instance(member, 1.0, Potential.power(0.1, 2)), 1.0, ev=ev)


def test_verdict_scaling(q2):
    u = builtin_family(2, 0, 6)[5]
    inst = make_instance(u, 1 + 2j)
    base = verify_thm1(inst, 1.0, q=q2)
    big = verify_thm1(inst.scaled(3.5), 1.0, q=q2)
    for a, b in zip(base, big):
        assert b.lhs == pytest.approx(3.5 * a.lhs, rel=1e-10)
        assert b.rhs == pytest.approx(3.5 * a.rhs, rel=1e-10)


def test_chain_and_parabola(member, ev):
    inst = make_instance(member, 1 + 0.2j)
    for v in est1_chain(inst, 1.0, ev=ev):
        assert v.passed
    p = parabola_check(inst, 1.0, ev=ev)
    assert p["nonpositive"] and p["implies_root_bound"]
    assert p["grad_minus"] <= p["root_bound"]
    with pytest.raises(DomainError):
        parabola_check(make_instance(member, -1 + 0.1j), 1.0, ev=ev)
    probe = koranyi_probe(inst, 1.0, ev=ev)
    assert probe["asserted"] is False and probe["rhs"] > 0


def test_gradient_of_gauge_transform(member):
    for lam in (1 + 1j, 4 - 0.5j, -3 + 2j):
        assert check_gradumeno(make_instance(member, lam)) < 1e-10


def test_first_two_identities(member, ev):
    for lam in lambda_grid(2):
        res = check_multiplier_identities(make_instance(member, lam), ev=ev)
        assert res["fond1"].passed and res["fond2"].passed


def test_written_third_identity_misses_commutator(q2):
    # u = exp(-|z|^2 - t^2) is z-radial; the dropped term is
    # Re int 4 conj(u_t)(x.Yu - y.Xu) * 2 = -16 int |z|^2 |u_t|^2
    u = builtin_family(2, 0, 1)[0]
    res = check_multiplier_identities(make_instance(u, 2.0), q=q2)
    oracle = q2.integrate(
        lambda p, r: -16 * r * r * (2 * p[:, -1]) ** 2 * np.exp(-2 * r * r - 2 * p[:, -1] ** 2),
        (1.0, 1.0))
    w = res["fond3"]
    assert (w.lhs - w.rhs) == pytest.approx(-oracle.real, rel=1e-9)
    assert not w.passed and res["fond3-H"].passed
    assert not res["combination"].passed and res["combination-H"].passed
    assert not res["comp1"].passed and res["comp1-H"].passed


def test_lam2_sign_in_third_identity(q2):
    # the skew term Im int grad(phi3).conj(u) grad u needs a genuinely
    # complex u; only the sign used by the combination closes the identity
    u = builtin_family(2, 0, 33)[32]
    ev = Evaluator(u, None, q2)
    inst = make_instance(u, 1 + 3j)
    res = check_multiplier_identities(inst, ev=ev)
    h, w = res["fond3-H"], res["fond3"]
    comm = ev.moments(inst.lam)[0]["comm"]
    skew2 = h.lhs - w.lhs - comm
    assert abs(skew2) > 1e-3 * h.scale
    assert h.passed
    # printed sign, commutator restored: still off by twice the skew term
    assert abs(w.lhs + comm - h.rhs) == pytest.approx(abs(skew2), rel=1e-9)


def test_am_final(member, ev):
    inst = make_instance(member, 2 + 1j)
    assert check_identity_am_final(inst, ev=ev, commutator=True).passed
    assert not check_identity_am_final(inst, ev=ev).passed
    with pytest.raises(DomainError):
        check_identity_am_final(make_instance(member, -1 + 1j), ev=ev)
    with pytest.raises(DomainError):
        check_identity_am_final(make_instance(member, 2j), ev=ev)
    # lam = 0 is allowed
    assert check_identity_am_final(make_instance(member, 0j), ev=ev, commutator=True).passed


def test_identity_suite_names(member, ev):
    names = [r.identity for r in identity_suite(make_instance(member, 2 + 1j), ev=ev)]
    for n in ("fond1", "fond2", "fond3", "fond3-H", "combination-H", "comp1-H", "am-final-H"):
        assert n in names
    assert "am-final" not in [r.identity for r in
                              identity_suite(make_instance(member, 2j), ev=ev)]


def test_perturbed_verdicts(q2):
    u = builtin_family(2, 0, 3)[2]
    V = Potential.power(0.1, 2)
    ev = Evaluator(u, V, q2)
    for lam in (1 + 0.1j, 1 + 5j, -1 + 0j):
        inst = make_instance(u, lam, V)
        for v in verify_thm_pp(inst, 1.0, 0.1, ev=ev) + verify_thm16(inst, 1.0, 0.0, 0.0, ev=ev):
            assert v.passed
    # lam1 < 0 is outside the cone for the perturbed estimates
    names = {v.inequality for v in verify_thm_pp(make_instance(u, -1 + 0j, V), 1.0, 0.1, ev=ev)}
    assert names == {"est3b", "katoyajima2"}
    with pytest.raises(DomainError):
        verify_thm16(make_instance(u, 1.0, V), 1.0, 1.0, 0.0, ev=ev)
    neg = Potential.power(-0.05, 2)
    with pytest.raises(HypothesisError):
        verify_thm_pp(make_instance(u, 1.0, neg), 1.0, 0.05, q=q2)


def test_perturbed_key_identity(q2):
    u = builtin_family(2, 0, 3)[2]
    V = Potential.gaussian(0.2)
    inst = make_instance(u, 1 + 0.5j, V)
    assert check_identity_am_final(inst, q=q2, commutator=True).passed


@settings(max_examples=10)
@given(st.floats(0.1, 6), st.floats(-6, 6))
def test_verdicts_property(l1, l2):
    from hresolvent.quadrature import Quadrature
    u = builtin_family(2, 0, 6)[4]
    inst = make_instance(u, complex(l1, l2))
    for v in verify_thm1(inst, 1.0, q=Quadrature.from_preset(2, "fast")):
        assert v.passed


def test_small_suite_report(q2):
    rep = resolvent_suite(2, builtin_family(2, 0, 2), lams=(1 + 0j, 1 + 5j, 2 - 1j), q=q2)
    assert rep.verdicts_passed
    assert rep.corrected_identities_passed
    assert not rep.identities_passed
    table = rep.identity_table()
    assert all(table[n]["failed"] == 0 for n in table if n not in AS_WRITTEN)
    assert rep.max_identity_residual(["fond1", "fond2"]) < 1e-5
    json.dumps(rep.to_dict())
