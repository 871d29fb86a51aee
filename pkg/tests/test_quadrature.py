import math

import numpy as np
import pytest

from hresolvent.fields import Polynomial, gauss_poly
from hresolvent.quadrature import (Quadrature, QuadratureAccuracyError, preset,
                                   weighted_l2_norm)


def gaussian_mass(d, a, b):
    return (math.pi / a) ** d * math.sqrt(math.pi / b)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("a,b", [(1.0, 1.0), (0.5, 2.0)])
def test_gaussian_integral(d, a, b):
    q = Quadrature.from_preset(d, "fast")
    est = q.integrate(lambda p, r: np.exp(-a * r * r - b * p[:, -1] ** 2), (a / 2, b / 2))
    assert est.real == pytest.approx(gaussian_mass(d, a, b), rel=1e-9)
    assert est.error < 1e-8


def test_qmc_scheme_for_high_dimension():
    q = Quadrature.from_preset(4, "fast")
    assert q.spec.scheme == "qmc"
    est = q.integrate(lambda p, r: np.exp(-r * r - p[:, -1] ** 2), (0.5, 0.5))
    assert est.real == pytest.approx(gaussian_mass(4, 1, 1), rel=1e-6)


def test_moment_with_singular_weight():
    # int |z|^-2 e^{-|z|^2 - t^2} over H^2 = pi^2 sqrt(pi) (Gamma(1)/Gamma(2)) = pi^2.5
    q = Quadrature.from_preset(2, "fast")
    est = q.integrate(lambda p, r: np.exp(-r * r - p[:, -1] ** 2) / r ** 2, (0.5, 0.5))
    assert est.real == pytest.approx(math.pi ** 2.5, rel=1e-9)


def test_koranyi_plane_handles_koranyi_weight():
    # int N^-2 e^{-|z|^2 - t^2} vs a dense product reference
    q = Quadrature.from_preset(2, "standard")

    def fn(p, r):
        return np.exp(-r * r - p[:, -1] ** 2) / np.sqrt(r ** 4 + p[:, -1] ** 2)

    k = q.integrate(fn, (0.5, 0.5), koranyi=True)
    ref = Quadrature.from_preset(2, "thorough").integrate(fn, (0.5, 0.5), koranyi=True)
    assert abs(k.real - ref.real) <= 3 * k.error + 1e-6 * ref.real


def test_weighted_norm_and_accuracy_error():
    f = gauss_poly(Polynomial.one(2), 1.0, 1.0)
    n = weighted_l2_norm(f, "1", Quadrature.from_preset(2, "fast"))
    assert n.real == pytest.approx(math.sqrt(gaussian_mass(2, 2, 2)), rel=1e-10)
    tiny = Quadrature(2, preset("fast", 2, n_r=3, n_t=3))
    # degree 12 is beyond what 3 nodes per axis integrate exactly
    x, t = Polynomial.coordinate(2, 0), Polynomial.coordinate(2, 4)
    g = gauss_poly(x * x * x * x * x * x * t * t * t * t * t * t, 1.0, 1.0)
    with pytest.raises(QuadratureAccuracyError):
        weighted_l2_norm(g, "1", tiny, rtol=1e-6)
    with pytest.raises(ValueError):
        weighted_l2_norm(f, "bogus")


def test_presets():
    with pytest.raises(ValueError):
        preset("nope")
    s = preset("standard", 2)
    assert s.coarse().n_r < s.n_r
