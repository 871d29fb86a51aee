import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hresolvent.fields import gauss_poly, koranyi_field, Polynomial, z_squared
from hresolvent.hgroup import (GridField, HPoint, SingularAxisError, StencilError,
                               apply_field, group_inverse, group_multiply,
                               horizontal_gradient, koranyi_hgrad_formula,
                               koranyi_hgrad_norm_formula, koranyi_norm,
                               koranyi_sublap_formula, radial_derivative, stencil_hgrad,
                               stencil_sublap, sublaplacian)

coords = arrays(np.float64, 5, elements=st.floats(-3, 3))


def dilate(p, s):
    out = np.array(p, dtype=float)
    out[..., :-1] *= s
    out[..., -1] *= s * s
    return out


@given(coords, coords, coords)
def test_group_law_associative(a, b, c):
    left = group_multiply(group_multiply(a, b), c)
    right = group_multiply(a, group_multiply(b, c))
    np.testing.assert_allclose(left, right, atol=1e-9)


@given(coords)
def test_inverse(a):
    np.testing.assert_allclose(group_multiply(a, group_inverse(a)), np.zeros(5), atol=1e-12)


@given(coords, st.floats(0.1, 5))
def test_koranyi_norm_homogeneous(a, s):
    assert koranyi_norm(dilate(a, s)) == pytest.approx(s * koranyi_norm(a), rel=1e-12, abs=1e-300)


def test_hpoint_round_trip():
    p = HPoint([1.0, 2.0], [3.0, 4.0], 5.0)
    assert p.d == 2
    assert HPoint.from_coords(p.coords).coords.tolist() == [1, 2, 3, 4, 5]
    assert p.z[1] == 2 + 4j
    with pytest.raises(ValueError):
        HPoint([1.0], [1.0, 2.0], 0.0)


def test_group_multiply_hpoints():
    p = HPoint([1.0], [0.0], 0.0)
    q = HPoint([0.0], [1.0], 0.0)
    # 2 Im(z conj z') = 2 Im(1 * -i) = -2
    assert group_multiply(p, q).t == -2.0


def test_fields_left_invariant(rng):
    f = gauss_poly(Polynomial.coordinate(2, 0) + Polynomial.coordinate(2, 4), 0.7, 0.4)
    g = rng.standard_normal(5) * 0.5
    pts = rng.standard_normal((20, 5))

    def shifted(x):
        return f(group_multiply(np.broadcast_to(g, x.shape), x))

    lhs = stencil_hgrad(shifted, pts, 1e-4)
    rhs = horizontal_gradient(f, group_multiply(np.broadcast_to(g, pts.shape), pts))
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_commutator_is_minus_four_t(rng):
    # [X_1, Y_1] = -4 T
    f = gauss_poly(Polynomial.coordinate(2, 4) * Polynomial.coordinate(2, 0), 0.5, 0.5)
    pts = rng.standard_normal((10, 5))
    hh = f.hhess(pts)
    t = apply_field("T", f, pts)
    np.testing.assert_allclose(hh[:, 0, 2] - hh[:, 2, 0], -4 * t, atol=1e-12)


def test_sublaplacian_is_minus_sum_of_squares(rng):
    f = gauss_poly(Polynomial.one(2) + Polynomial.coordinate(2, 4), 1.0, 0.5)
    pts = rng.standard_normal((10, 5))
    np.testing.assert_allclose(f.sublap(pts), -np.trace(f.hhess(pts), axis1=1, axis2=2),
                               atol=1e-12)


def test_sublaplacian_of_z_squared_is_constant(rng):
    p = z_squared(3)
    assert p.sublap().terms == [(-12.0, (0,) * 7)]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_koranyi_oracles_match_exact_partials(d, rng):
    pts = rng.standard_normal((1000, 2 * d + 1))
    N = koranyi_field(d)
    g = N.hgrad(pts)
    np.testing.assert_allclose(g, koranyi_hgrad_formula(pts), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), koranyi_hgrad_norm_formula(pts),
                               rtol=1e-10)
    np.testing.assert_allclose(N.sublap(pts), koranyi_sublap_formula(pts), rtol=1e-10)


def test_stencil_second_order(rng):
    f = gauss_poly(Polynomial.coordinate(2, 1) * Polynomial.coordinate(2, 4) + 1.0, 0.8, 0.6)
    pts = rng.standard_normal((50, 5))
    exact_g, exact_l = f.hgrad(pts), f.sublap(pts)
    errs_g, errs_l = [], []
    for h in (0.04, 0.02, 0.01):
        errs_g.append(np.max(np.abs(stencil_hgrad(f, pts, h) - exact_g)))
        errs_l.append(np.max(np.abs(stencil_sublap(f, pts, h) - exact_l)))
    for errs in (errs_g, errs_l):
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.8)


def test_apply_field_exact_and_stencil_agree(rng):
    f = gauss_poly(Polynomial.coordinate(2, 2) + Polynomial.coordinate(2, 4), 1.0, 1.0)
    p = rng.standard_normal(5)
    for op in ("X1", "X2", "Y1", "Y2", "T"):
        assert apply_field(op, f, p) == pytest.approx(apply_field(op, f, p, h=1e-4), abs=1e-7)
    with pytest.raises(ValueError):
        apply_field("X3", f, p)
    with pytest.raises(ValueError):
        apply_field("Z1", f, p)


def test_plain_callable_uses_stencil(rng):
    f = gauss_poly(Polynomial.one(1), 1.0, 1.0)
    pts = rng.standard_normal((5, 3))
    np.testing.assert_allclose(sublaplacian(lambda x: f(x), pts), f.sublap(pts), atol=1e-4)


def test_grid_field_matches_exact():
    f = gauss_poly(Polynomial.one(1) + Polynomial.coordinate(1, 2), 0.5, 0.5)
    h = 0.01
    axes = [np.arange(-5, 6) * h + c for c in (0.3, -0.2, 0.1)]
    g = GridField.sample(f, axes)
    p = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(horizontal_gradient(g, p), f.hgrad(p)[0], atol=1e-4)
    assert sublaplacian(g, p) == pytest.approx(f.sublap(p)[0], abs=1e-3)
    edge = np.array([axes[0][0], -0.2, 0.1])
    with pytest.raises(StencilError):
        apply_field("X1", g, edge)
    with pytest.raises(StencilError):
        apply_field("X1", g, np.array([0.3051, -0.2, 0.1]))


def test_radial_derivative_axis_error():
    f = gauss_poly(Polynomial.one(1), 1.0, 1.0)
    with pytest.raises(SingularAxisError):
        radial_derivative(f, np.array([0.0, 0.0, 1.0]))
    # for a z-radial Gaussian the radial derivative is -2 a r e^{...}
    p = np.array([0.6, 0.8, 0.0])
    assert radial_derivative(f, p) == pytest.approx(-2 * np.exp(-1.0))
