import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hresolvent.constants import DomainError, kappa_d
from hresolvent.fields import builtin_family
from hresolvent.potentials import (Potential, Term, acceptance_potentials, analytic_bounds,
                                   bound_weighted, check_thm_V1, check_thm_V2,
                                   quotient_sup, radial_repulsivity_profile,
                                   thm_V1_decision, thm_V1_threshold, useful_chain)

# sup of u (1 - 2u) e^{-u} over u >= 0, attained at u = (5 - sqrt 17)/4
U = (5 - math.sqrt(17)) / 4
G = U * (1 - 2 * U) * math.exp(-U)


@pytest.mark.parametrize("name,expected", [
    ("zero", (0.0, 0.0, 0.0, 0.0)),
    ("power+", (0.1, 0.0, 0.0, 0.0)),
    ("power-", (0.05, math.sqrt(0.05), math.sqrt(0.05), 0.0)),
    ("gaussian", (0.1 / math.e, 0.0, math.sqrt(0.1 * G), 0.0)),
])
def test_analytic_bounds_reference_set(name, expected):
    b = analytic_bounds(acceptance_potentials()[name], 2)
    for key, want in zip(("b", "b1", "b2", "b3"), expected):
        assert b[key] == pytest.approx(want, abs=1e-14)


def test_gaussian_b2_value():
    assert analytic_bounds(Potential.gaussian(0.1), 2)["b2"] == pytest.approx(0.0994, abs=1e-4)
    assert analytic_bounds(Potential.gaussian(0.1), 2)["b"] == pytest.approx(0.0368, abs=1e-4)


def test_bounds_dominate_family_quotients(q2):
    fam = builtin_family(2, 0, 16)
    for V in list(acceptance_potentials().values()) + [Potential.power(0.2 + 0.1j, 2),
                                                         Potential.koranyi_power(-0.1, 2)]:
        pb = bound_weighted(V, 2, fam, q2)
        assert pb.sound(), V.name


def test_radial_derivative_exact_vs_stencil(rng):
    pts = rng.standard_normal((30, 5))
    for V in (Potential.power(0.3, 1.5), Potential.koranyi_power(0.2, 2),
              Potential.gaussian(-0.4, 0.7)):
        fn = Potential(fn=V, name="callable")
        np.testing.assert_allclose(V.radial_real(pts), fn.radial_real(pts, h=1e-5),
                                   rtol=1e-6, atol=1e-7)


def test_uncertifiable_terms_report_none():
    pb = bound_weighted(Potential.power(0.1, 1.5), 2, builtin_family(2, 0, 3))
    assert not pb.b.certified and pb.to_dict()["b"]["upper"] is None
    callable_V = Potential(fn=lambda p: np.ones(len(p)), name="one")
    assert bound_weighted(callable_V, 2, builtin_family(2, 0, 2)).method == "quotient-sup"
    with pytest.raises(DomainError):
        analytic_bounds(Potential.zero(), 1)


def test_json_round_trip():
    spec = {"form": "sum", "terms": [
        {"form": "power", "coefficient": [0.1, 0.0], "exponent": 2.0},
        {"form": "gaussian", "coefficient": [0.0, 0.2], "rate": 1.5}]}
    V = Potential.from_json(json.dumps(spec))
    assert V.to_dict() == spec
    pts = np.array([[0.5, 0.0, 0.0, 0.5, 1.0]])
    r2 = 0.5
    assert V(pts)[0] == pytest.approx(0.1 / r2 + 0.2j * math.exp(-1.5 * r2))
    with pytest.raises(ValueError):
        Potential.from_dict({"form": "yukawa"})
    with pytest.raises(ValueError):
        Term("gaussian", 1.0, a=-1.0)


def test_V1_flips_at_threshold():
    thr = thm_V1_threshold(2)
    assert thr == pytest.approx(1 / kappa_d(2).kappa_d, abs=1e-12)
    assert thr == pytest.approx(1 / 5.21337, abs=1e-6)
    assert thm_V1_decision(2, thr - 1e-9) and not thm_V1_decision(2, thr + 1e-9)
    below = bound_weighted(Potential.power(thr - 1e-9, 2), 2)
    above = bound_weighted(Potential.power(thr + 1e-9, 2), 2)
    assert check_thm_V1(below).hypothesis_met
    assert not check_thm_V1(above).hypothesis_met


@given(st.integers(2, 6), st.floats(0, 1))
def test_V1_threshold_is_exact_switch(d, frac):
    thr = thm_V1_threshold(d)
    assert thm_V1_decision(d, frac * thr) == (frac < 1)


def test_V2_report_fields():
    V = Potential.power(-0.02, 2) + Potential.gaussian(0.05j)
    rep = check_thm_V2(bound_weighted(V, 2))
    det = rep.to_dict()["details"]
    assert rep.certified and rep.hypothesis_met
    assert det["root_condition_met"] and not det["window"]["empty"]
    assert det["b3_root"] < det["b3_bound"]
    assert det["bound_exceeds_V1_threshold"]


def test_V2_degenerate_b3_and_large_b1():
    rep = check_thm_V2(bound_weighted(Potential.power(0.05, 2), 2))
    assert rep.details["window"]["upper"] == math.inf
    big = check_thm_V2(bound_weighted(Potential.power(-1.5, 2), 2))
    assert not big.hypothesis_met and "reason" in big.details


def test_repulsivity_profile():
    prof = radial_repulsivity_profile(Potential.power(0.1, 2), 2)
    assert prof["repulsive"] and prof["max_positive_part"] == 0.0
    g = radial_repulsivity_profile(Potential.gaussian(0.1), 2, n_r=400)
    assert not g["repulsive"]
    # d_r(r e^{-r^2}) changes sign at r = 1/sqrt 2
    lo, hi = g["sign_change_range"]
    assert lo == pytest.approx(1 / math.sqrt(2), abs=1e-4)
    assert hi == pytest.approx(1 / math.sqrt(2), abs=1e-4)


def test_useful_chain(q2):
    V = Potential.power(0.1j, 2)
    b3 = analytic_bounds(V, 2)["b3"]
    for psi in builtin_family(2, 0, 5):
        res = useful_chain(V, psi, b3, q2)
        assert res["premise"] and res["holds"]


def test_quotient_sup_names_members(q2):
    fam = builtin_family(2, 0, 4)
    res = quotient_sup(Potential.gaussian(-0.3), fam, q2)
    assert res["members"]["b1"] in {f.name for f in fam}
    assert res["values"]["b3"] == 0.0
