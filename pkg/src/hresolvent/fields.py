"""Closed-form test fields with exact partials, and the spectral parameter.

A :class:`Field` evaluates its value together with exact Euclidean first and
second partials (a :class:`~hresolvent.hgroup.Jet`).  Sums and products of
fields propagate jets by the Leibniz rule, so every field built here carries
exact horizontal gradients and sublaplacians.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .hgroup import (Jet, as_points, dim_of, hgrad_from_jet, hhess_from_jet,
                     sublap_from_jet)


class Field:
    """Scalar field on H^d with exact partial derivatives.

    ``jet_fn(pts, order)`` returns a Jet with ``grad`` when order >= 1 and
    ``hess`` when order >= 2.  ``decay`` is the Gaussian rate pair (a, b) of
    exp(-a|z|^2 - b t^2) decay, or None for fields without decay.
    """

    def __init__(self, d: int, jet_fn: Callable, name: str = "field",
                 decay: Optional[tuple] = None, real: bool = False,
                 meta: Optional[dict] = None):
        self.d = d
        self._jet = jet_fn
        self.name = name
        self.decay = decay
        self.real = real
        self.meta = dict(meta or {})

    def jet(self, pts, order: int = 0) -> Jet:
        return self._jet(as_points(pts), order)

    def __call__(self, pts):
        return self.jet(pts, 0).val

    def hgrad(self, pts):
        pts = as_points(pts)
        return hgrad_from_jet(self.jet(pts, 1), pts)

    def hhess(self, pts):
        pts = as_points(pts)
        return hhess_from_jet(self.jet(pts, 2), pts)

    def sublap(self, pts):
        pts = as_points(pts)
        return sublap_from_jet(self.jet(pts, 2), pts)

    def __repr__(self):
        return f"Field({self.name!r}, d={self.d})"

    # algebra ---------------------------------------------------------------

    def __add__(self, other):
        if np.isscalar(other):
            other = constant(self.d, other)
        return _combine(self, other, _add_jets, f"({self.name} + {other.name})")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if np.isscalar(other):
            c = other

            def jet_fn(pts, order):
                j = self._jet(pts, order)
                return Jet(c * j.val, None if j.grad is None else c * j.grad,
                           None if j.hess is None else c * j.hess)

            real = self.real and np.isrealobj(c)
            return Field(self.d, jet_fn, f"{c}*{self.name}", self.decay, real,
                         self.meta)
        return _combine(self, other, _mul_jets, f"{self.name}*{other.name}")

    __rmul__ = __mul__


def _combine(a: Field, b: Field, op, name: str) -> Field:
    if a.d != b.d:
        raise ValueError("dimension mismatch")

    def jet_fn(pts, order):
        return op(a._jet(pts, order), b._jet(pts, order))

    decay = None
    if a.decay is not None and b.decay is not None:
        if op is _mul_jets:
            decay = (a.decay[0] + b.decay[0], a.decay[1] + b.decay[1])
        else:
            decay = (min(a.decay[0], b.decay[0]), min(a.decay[1], b.decay[1]))
    elif op is _mul_jets:
        decay = a.decay if a.decay is not None else b.decay
    return Field(a.d, jet_fn, name, decay, a.real and b.real)


def _add_jets(a: Jet, b: Jet) -> Jet:
    return Jet(a.val + b.val,
               None if a.grad is None else a.grad + b.grad,
               None if a.hess is None else a.hess + b.hess)


def _mul_jets(a: Jet, b: Jet) -> Jet:
    val = a.val * b.val
    grad = hess = None
    if a.grad is not None:
        grad = a.grad * b.val[:, None] + b.grad * a.val[:, None]
    if a.hess is not None:
        outer = a.grad[:, :, None] * b.grad[:, None, :]
        hess = (a.hess * b.val[:, None, None] + b.hess * a.val[:, None, None]
                + outer + np.swapaxes(outer, 1, 2))
    return Jet(val, grad, hess)


# --------------------------------------------------------------------------
# elementary fields
# --------------------------------------------------------------------------

def constant(d: int, c) -> Field:
    n = 2 * d + 1

    def jet_fn(pts, order):
        N = pts.shape[0]
        val = np.full(N, c, dtype=np.result_type(c, float))
        return Jet(val,
                   np.zeros((N, n)) if order >= 1 else None,
                   np.zeros((N, n, n)) if order >= 2 else None)

    return Field(d, jet_fn, repr(c), None, np.isrealobj(c))


@dataclass
class Polynomial:
    """Sparse polynomial in (x, y, t): list of (coefficient, exponent tuple)."""

    d: int
    terms: list = dc_field(default_factory=list)

    @classmethod
    def monomial(cls, d, exps, coef=1.0):
        e = tuple(int(v) for v in exps)
        if len(e) != 2 * d + 1:
            raise ValueError("exponent tuple has wrong length")
        return cls(d, [(coef, e)])

    @classmethod
    def coordinate(cls, d, k, coef=1.0):
        e = [0] * (2 * d + 1)
        e[k] = 1
        return cls.monomial(d, e, coef)

    @classmethod
    def one(cls, d, coef=1.0):
        return cls.monomial(d, [0] * (2 * d + 1), coef)

    def __add__(self, other):
        if np.isscalar(other):
            other = Polynomial.one(self.d, other)
        return Polynomial(self.d, _collect(self.terms + other.terms))

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.d, [(c * other, e) for c, e in self.terms])
        terms = [(c1 * c2, tuple(a + b for a, b in zip(e1, e2)))
                 for c1, e1 in self.terms for c2, e2 in other.terms]
        return Polynomial(self.d, _collect(terms))

    __rmul__ = __mul__

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def diff(self, k: int) -> "Polynomial":
        terms = []
        for c, e in self.terms:
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                terms.append((c * e[k], tuple(e2)))
        return Polynomial(self.d, _collect(terms))

    def hfield(self, kind: str, j: int) -> "Polynomial":
        """X_j P = dP/dx_j + 2 y_j dP/dt,  Y_j P = dP/dy_j - 2 x_j dP/dt (j zero-based)."""
        d = self.d
        pt = self.diff(2 * d)
        if kind == "X":
            return self.diff(j) + Polynomial.coordinate(d, d + j, 2.0) * pt
        return self.diff(d + j) + Polynomial.coordinate(d, j, -2.0) * pt

    def sublap(self) -> "Polynomial":
        """-sum_j (X_j^2 + Y_j^2) P."""
        out = Polynomial(self.d, [])
        for j in range(self.d):
            for kind in ("X", "Y"):
                out = out + self.hfield(kind, j).hfield(kind, j)
        return out * -1.0

    def jet(self, pts, order):
        n = pts.shape[1]
        N = pts.shape[0]
        top = max((max(e) for _, e in self.terms), default=0)
        powers = [[np.ones(N)] for _ in range(n)]
        for k in range(n):
            for _ in range(top):
                powers[k].append(powers[k][-1] * pts[:, k])

        def pw(k, e):
            return powers[k][e] if e >= 0 else np.zeros(N)

        dtype = np.result_type(*[c for c, _ in self.terms], float)
        val = np.zeros(N, dtype=dtype)
        grad = np.zeros((N, n), dtype=dtype) if order >= 1 else None
        hess = np.zeros((N, n, n), dtype=dtype) if order >= 2 else None
        for c, e in self.terms:
            factors = [pw(k, e[k]) for k in range(n)]
            val += c * np.prod(factors, axis=0)
            if order >= 1:
                for k in range(n):
                    if e[k] == 0:
                        continue
                    f = list(factors)
                    f[k] = e[k] * pw(k, e[k] - 1)
                    grad[:, k] += c * np.prod(f, axis=0)
                    if order >= 2:
                        for l in range(k, n):
                            g = list(f)
                            if l == k:
                                if e[k] < 2:
                                    continue
                                g[k] = e[k] * (e[k] - 1) * pw(k, e[k] - 2)
                            else:
                                if e[l] == 0:
                                    continue
                                g[l] = e[l] * pw(l, e[l] - 1)
                            term = c * np.prod(g, axis=0)
                            hess[:, k, l] += term
                            if l != k:
                                hess[:, l, k] += term
        return Jet(val, grad, hess)


def _collect(terms):
    acc = {}
    for c, e in terms:
        acc[e] = acc.get(e, 0.0) + c
    return [(c, e) for e, c in acc.items() if c != 0]


def gauss_poly(poly: Polynomial, a: float = 1.0, b: float = 1.0,
               name: Optional[str] = None) -> Field:
    """P(x, y, t) exp(-a|z|^2 - b t^2) with exact partials."""
    d = poly.d
    n = 2 * d + 1
    rates = np.full(n, a, dtype=float)
    rates[-1] = b

    def jet_fn(pts, order):
        p = poly.jet(pts, order)
        q = np.exp(-np.sum(rates * pts * pts, axis=1))
        gjet = Jet(q)
        if order >= 1:
            lin = -2.0 * rates * pts
            gjet.grad = lin * q[:, None]
            if order >= 2:
                h = lin[:, :, None] * lin[:, None, :]
                idx = np.arange(n)
                h[:, idx, idx] -= 2.0 * rates
                gjet.hess = h * q[:, None, None]
        return _mul_jets(p, gjet)

    real = all(np.isrealobj(c) for c, _ in poly.terms)
    decay = (a, b) if a > 0 and b > 0 else None
    return Field(d, jet_fn, name or f"gauss_poly(a={a},b={b})", decay, real)


def polynomial_field(poly: Polynomial, name: str = "poly") -> Field:
    def jet_fn(pts, order):
        return poly.jet(pts, order)

    real = all(np.isrealobj(c) for c, _ in poly.terms)
    return Field(poly.d, jet_fn, name, None, real)


def coordinate_field(d: int, k: int, name: Optional[str] = None) -> Field:
    return polynomial_field(Polynomial.coordinate(d, k), name or f"coord{k}")


def z_squared(d: int) -> Polynomial:
    p = Polynomial(d)
    for k in range(2 * d):
        e = [0] * (2 * d + 1)
        e[k] = 2
        p = p + Polynomial.monomial(d, e)
    return p


def radial_field(d: int, phi: Callable, name: str = "radial") -> Field:
    """phi(|z|) given ``phi(r) -> (value, first, second derivative)``."""
    n = 2 * d + 1

    def jet_fn(pts, order):
        zc = pts[:, :2 * d]
        r = np.sqrt(np.sum(zc * zc, axis=1))
        v, d1, d2 = phi(r)
        out = Jet(v)
        if order >= 1:
            w = zc / r[:, None]
            g = np.zeros((pts.shape[0], n), dtype=np.result_type(d1, float))
            g[:, :2 * d] = d1[:, None] * w
            out.grad = g
            if order >= 2:
                ww = w[:, :, None] * w[:, None, :]
                h = np.zeros((pts.shape[0], n, n), dtype=g.dtype)
                eye = np.eye(2 * d)
                h[:, :2 * d, :2 * d] = (d2[:, None, None] * ww
                                        + (d1 / r)[:, None, None] * (eye - ww))
                out.hess = h
        return out

    return Field(d, jet_fn, name, None, True)


def z_power(d: int, alpha: float, coef=1.0) -> Field:
    """coef * |z|^alpha."""

    def phi(r):
        return (coef * r ** alpha, coef * alpha * r ** (alpha - 1),
                coef * alpha * (alpha - 1) * r ** (alpha - 2))

    f = radial_field(d, phi, f"{coef}*|z|^{alpha}")
    f.real = np.isrealobj(coef)
    return f


def radial_phase(d: int, theta: float) -> Field:
    """exp(i theta |z|)."""

    def phi(r):
        e = np.exp(1j * theta * r)
        return e, 1j * theta * e, -(theta ** 2) * e

    f = radial_field(d, phi, f"exp({theta}i|z|)")
    f.real = theta == 0
    return f


def radial_gaussian(d: int, a: float, coef=1.0) -> Field:
    """coef * exp(-a|z|^2)."""

    def phi(r):
        e = coef * np.exp(-a * r * r)
        return e, -2 * a * r * e, (4 * a * a * r * r - 2 * a) * e

    f = radial_field(d, phi, f"{coef}*exp(-{a}|z|^2)")
    f.real = np.isrealobj(coef)
    return f


def power_profile(d: int, s: float, a: float = 0.5) -> Field:
    """|z|^s exp(-a|z|^2), the near-homogeneous profile used by probes."""

    def phi(r):
        e = r ** s * np.exp(-a * r * r)
        d1 = (s / r - 2 * a * r) * e
        d2 = ((s / r - 2 * a * r) ** 2 + (-s / (r * r) - 2 * a)) * e
        return e, d1, d2

    return radial_field(d, phi, f"|z|^{s}exp(-{a}|z|^2)")


def koranyi_field(d: int, power: float = 1.0) -> Field:
    """N^power, N = (|z|^4 + t^2)^(1/4), from exact Euclidean partials of
    s = |z|^4 + t^2."""
    n = 2 * d + 1
    q = power / 4.0

    def jet_fn(pts, order):
        zc, t = pts[:, :2 * d], pts[:, -1]
        r2 = np.sum(zc * zc, axis=1)
        s = r2 * r2 + t * t
        out = Jet(s ** q)
        if order >= 1:
            ds = np.zeros((pts.shape[0], n))
            ds[:, :2 * d] = 4.0 * r2[:, None] * zc
            ds[:, -1] = 2.0 * t
            c1 = q * s ** (q - 1)
            out.grad = c1[:, None] * ds
            if order >= 2:
                dds = np.zeros((pts.shape[0], n, n))
                dds[:, :2 * d, :2 * d] = (4.0 * r2[:, None, None] * np.eye(2 * d)
                                          + 8.0 * zc[:, :, None] * zc[:, None, :])
                dds[:, -1, -1] = 2.0
                c2 = q * (q - 1) * s ** (q - 2)
                out.hess = (c1[:, None, None] * dds
                            + c2[:, None, None] * ds[:, :, None] * ds[:, None, :])
        return out

    return Field(d, jet_fn, f"koranyi^{power}", None, True)


def normalized_gaussian(d: int) -> Field:
    """pi^{-(2d+1)/2} exp(-|z|^2 - t^2), unit integral."""
    c = np.pi ** (-(2 * d + 1) / 2)
    return gauss_poly(Polynomial.one(d, c), 1.0, 1.0, "normalized_gaussian")


# --------------------------------------------------------------------------
# spectral parameter and gauge transform
# --------------------------------------------------------------------------

def sgn(w: float) -> float:
    """Sign with sgn(0) = 1."""
    return 1.0 if w == 0 else float(np.sign(w))


@dataclass(frozen=True)
class SpectralParam:
    lam1: float
    lam2: float

    @classmethod
    def from_complex(cls, lam: complex) -> "SpectralParam":
        lam = complex(lam)
        return cls(lam.real, lam.imag)

    @property
    def value(self) -> complex:
        return complex(self.lam1, self.lam2)

    @property
    def sign2(self) -> float:
        return sgn(self.lam2)

    @property
    def theta(self) -> float:
        """Gauge frequency sgn(lam2) sqrt(|lam1|)."""
        return self.sign2 * np.sqrt(abs(self.lam1))

    def in_cone(self, delta: float, absolute: bool = False) -> bool:
        """|lam2| <= delta lam1 (or delta |lam1| when ``absolute``)."""
        l1 = abs(self.lam1) if absolute else self.lam1
        return abs(self.lam2) <= delta * l1

    def on_cone_boundary(self, delta: float, absolute: bool = False,
                         rtol: float = 1e-12) -> bool:
        l1 = abs(self.lam1) if absolute else self.lam1
        scale = max(abs(self.lam2), abs(delta * l1), 1e-300)
        return abs(abs(self.lam2) - delta * l1) <= rtol * scale


def gauge_transform(u: Field, s: SpectralParam, sign: int = -1) -> Field:
    """u^{+-} = exp(+-i sgn(lam2) sqrt|lam1| |z|) u."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    theta = sign * s.theta
    if theta == 0:
        return u
    out = radial_phase(u.d, theta) * u
    out.decay = u.decay
    out.name = f"{u.name}^{'+' if sign > 0 else '-'}"
    return out


# --------------------------------------------------------------------------
# built-in family
# --------------------------------------------------------------------------

def _x(d, j):
    return Polynomial.coordinate(d, j)


def _y(d, j):
    return Polynomial.coordinate(d, d + j)


def _t(d):
    return Polynomial.coordinate(d, 2 * d)


def builtin_family(d: int, seed: int = 0, size: int = 24) -> list:
    """Deterministic family of Gaussian-polynomial test fields.

    Members are exp(-a|z|^2 - b t^2) times low-degree polynomials, complex
    combinations, and variants vanishing on the axis (factor |z|^2 or
    x_1 + i y_1).  The first member is the pure Gaussian with a = b = 1.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    one = Polynomial.one(d)
    x1, y1, t = _x(d, 0), _y(d, 0), _t(d)
    xl, yl = _x(d, d - 1), _y(d, d - 1)
    zz = z_squared(d)
    holo = x1 + y1 * 1j
    templates = [
        ("1", one),
        ("x1", x1),
        ("y1", y1),
        ("t", t),
        ("x1+iy1", holo),
        ("|z|^2", zz),
        ("1+t", one + t),
        ("t*x1", t * x1),
        ("(x1+iy1)t", holo * t),
        ("x1^2-y_d", x1 * x1 + yl * (-1.0)),
        ("1+x1*y_d", one + x1 * yl),
        ("|z|^2*t", zz * t),
        ("x_d+it", xl + t * 1j),
        ("(x1+iy1)^2", holo * holo),
        ("1+t^2", one + t * t),
    ]
    rates = [(1.0, 1.0), (0.5, 1.0), (1.0, 0.5), (1.5, 0.75), (0.75, 1.5),
             (0.6, 0.6), (1.2, 1.0)]
    members = []
    seen = set()

    def add(name, poly, a, b):
        key = (name, a, b)
        if key in seen:
            return
        seen.add(key)
        f = gauss_poly(poly, a, b, f"{name}|a={a},b={b}")
        f.meta.update(poly=name, a=a, b=b, degree=poly.degree)
        members.append(f)

    add("1", one, 1.0, 1.0)
    for (name, poly), (a, b) in zip(templates, itertools.cycle(rates)):
        add(name, poly, a, b)
    # axis-vanishing variants
    for name, poly in templates[:6]:
        add(f"|z|^2*({name})", zz * poly, 1.0, 1.0)
        add(f"(x1+iy1)*({name})", holo * poly, 0.8, 1.2)
    # complex random combinations of templates
    k = 0
    while len(members) < size:
        i, j = rng.choice(len(templates), size=2, replace=False)
        c = complex(*np.round(rng.normal(size=2), 3))
        a, b = rates[int(rng.integers(len(rates)))]
        name = f"{templates[i][0]}+({c})*{templates[j][0]}#{k}"
        add(name, templates[i][1] + templates[j][1] * c, a, b)
        k += 1
    return members[:size]
