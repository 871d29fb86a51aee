import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hresolvent.constants import DomainError
from hresolvent.fields import builtin_family, gauss_poly, Polynomial
from hresolvent.hardy import (HypothesisError, SPECS, VectorField, get_spec, hardy_suite,
                              homogeneous_dimension, profile_field,
                              profile_quotient_exact, quotient, radial_field,
                              sharpness_probe, verify_general, weight_comparison)
from hresolvent.quadrature import Quadrature


def test_constants_per_spec():
    for d in (2, 3, 4):
        assert SPECS["GL"].constant(d) == pytest.approx(1 / d ** 2)
        assert SPECS["horizontal"].constant(d) == pytest.approx(1 / (d - 1) ** 2)
        assert SPECS["weighted-horizontal"].constant(d) == pytest.approx((2 / (2 * d - 1)) ** 2)
        assert homogeneous_dimension(d) == 2 * d + 2
        # GL has the better constant on a smaller weight
        assert SPECS["GL"].constant(d) < SPECS["horizontal"].constant(d)
    with pytest.raises(DomainError):
        SPECS["horizontal"].constant(1)
    with pytest.raises(ValueError):
        get_spec("nope")


def test_quotient_below_constant_small_family(q2, family2):
    res = hardy_suite(2, family2, q2)
    assert len(res) == 3 * len(family2)
    assert all(r.passed for r in res)
    rec = res[0].to_record()
    assert set(rec) >= {"spec", "member-id", "lhs", "rhs", "constant", "margin", "quad_error"}


def test_suite_matches_single_quotients(q2):
    fam = builtin_family(2, 0, 4)
    for r in hardy_suite(2, fam, q2):
        f = next(f for f in fam if f.name == r.member)
        single = quotient(r.spec, f, q2)
        assert r.value == pytest.approx(single.value, rel=1e-12)


def test_suite_skips_specs_below_their_dimension():
    q = Quadrature.from_preset(1, "fast")
    res = hardy_suite(1, builtin_family(1, 0, 3), q)
    assert {r.spec for r in res} == {"GL", "weighted-horizontal"}
    with pytest.raises(DomainError):
        quotient("horizontal", builtin_family(1, 0, 1)[0], q)


@given(st.floats(0.1, 10), st.floats(-3, 3))
def test_quotient_scale_invariant(c, phase):
    q = Quadrature.from_preset(2, "fast")
    f = builtin_family(2, 0, 6)[5]
    g = f * (c * np.exp(1j * phase))
    assert quotient("GL", g, q).value == pytest.approx(quotient("GL", f, q).value, rel=1e-10)


@pytest.mark.parametrize("spec", ["horizontal", "weighted-horizontal"])
@pytest.mark.parametrize("m,b", [(0.5, 0.01), (0.1, 0.2), (1.0, 1.0)])
def test_profile_quotient_matches_closed_form(q2, spec, m, b):
    from hresolvent.hardy import _probe_quadrature, profile_exponent
    s = get_spec(spec)
    f = profile_field(2, profile_exponent(s, 2, m), b)
    res = quotient(s, f, _probe_quadrature(q2, s, 2, m))
    assert res.value == pytest.approx(profile_quotient_exact(s, 2, m, b), rel=1e-8)


def test_sharpness_probe_horizontal(q2):
    probe = sharpness_probe("horizontal", 2, q=q2)
    assert probe.best >= 0.8
    assert probe.best <= probe.constant
    vals = [e["quotient"] for e in probe.sweep]
    # the sweep runs m downwards, so quotients rise towards the constant
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert probe.to_dict()["gap"] > 0


def test_probe_with_larger_radius_never_worse(q2):
    small = sharpness_probe("weighted-horizontal", 2, q=q2, ms=(0.2,), radii=(1.0,))
    both = sharpness_probe("weighted-horizontal", 2, q=q2, ms=(0.2,), radii=(1.0, 2.0))
    assert both.best >= small.best


def test_single_gaussian_has_gap(q2):
    f = gauss_poly(Polynomial.one(2), 1.0, 1.0)
    for name in SPECS:
        r = quotient(name, f, q2)
        assert r.value < r.constant - 10 * r.error


def test_general_engine_reproduces_horizontal(q2):
    d = 2
    f = builtin_family(d, 0, 6)[5]
    v = verify_general(radial_field(d, 2.0), f, q=q2)
    assert v.passed
    base = quotient("horizontal", f, q2)
    # div h = (2d-2)/|z|^2, |h|^2 = |z|^-2, so both sides rescale the quotient's
    assert v.lhs / (2 * d - 2) == pytest.approx(base.lhs, rel=1e-9)
    assert v.rhs / (4 / (2 * d - 2)) == pytest.approx(base.rhs_integral, rel=1e-9)


def test_general_engine_reproduces_weighted(q2):
    d = 2
    f = builtin_family(d, 0, 6)[2]
    v = verify_general(radial_field(d, 1.0), f, q=q2)
    base = quotient("weighted-horizontal", f, q2)
    assert v.passed
    assert v.lhs / (2 * d - 1) == pytest.approx(base.lhs, rel=1e-9)
    assert v.rhs / (4 / (2 * d - 1)) == pytest.approx(base.rhs_integral, rel=1e-9)


def test_general_engine_other_exponent(q2):
    f = builtin_family(2, 0, 3)[0]
    assert verify_general(radial_field(2, 2.0), f, p=3.0, q=q2).passed
    with pytest.raises(DomainError):
        verify_general(radial_field(2, 2.0), f, p=5.0, q=q2)


def test_general_engine_rejects_bad_divergence(q2):
    # div_H of z/|z|^k is (2d - k)/|z|^k, negative for k > 2d
    with pytest.raises(HypothesisError):
        verify_general(radial_field(2, 5.0), builtin_family(2, 0, 1)[0], q=q2)

    def flat(pts):
        n = pts.shape[1]
        return np.zeros((len(pts), n)), np.zeros((len(pts), n, n))

    with pytest.raises(HypothesisError):
        verify_general(VectorField(2, flat), builtin_family(2, 0, 1)[0], q=q2)


def test_weight_comparison_nonnegative(rng):
    pts = rng.standard_normal((2000, 5)) * 2
    assert np.all(weight_comparison(pts) >= 0)
