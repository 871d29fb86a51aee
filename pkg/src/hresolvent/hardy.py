"""Hardy inequalities on H^d checked through Rayleigh quotients."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .constants import DomainError
from .fields import Field, gauss_poly, koranyi_field, Polynomial, power_profile
from .hgroup import as_points, hgrad_from_jet, sigma_matrix
from .quadrature import Quadrature
from .verdict import InequalityVerdict, ratio_error


class HypothesisError(ValueError):
    """An inequality was requested outside its hypotheses."""


def _koranyi4(pts, r):
    return r ** 4 + pts[:, -1] ** 2


@dataclass(frozen=True)
class HardySpec:
    """A Hardy inequality  int w_l |f|^2 <= C(d) int w_r |grad_H f|^2."""

    name: str
    min_dim: int
    left: Callable
    right: Callable
    koranyi: bool = False

    def constant(self, d: int) -> float:
        self.check_dim(d)
        if self.name == "GL":
            Q = 2 * d + 2
            return (2.0 / (Q - 2)) ** 2
        if self.name == "horizontal":
            return 1.0 / (d - 1) ** 2
        if self.name == "weighted-horizontal":
            return (2.0 / (2 * d - 1)) ** 2
        raise ValueError(self.name)

    def check_dim(self, d: int):
        if d < self.min_dim:
            raise DomainError(f"{self.name} Hardy inequality needs d >= {self.min_dim}")


def homogeneous_dimension(d: int) -> int:
    return 2 * d + 2


SPECS = {
    "GL": HardySpec("GL", 1, lambda p, r: r * r / _koranyi4(p, r),
                    lambda p, r: np.ones_like(r), koranyi=True),
    "horizontal": HardySpec("horizontal", 2, lambda p, r: r ** -2.0,
                            lambda p, r: np.ones_like(r)),
    "weighted-horizontal": HardySpec("weighted-horizontal", 1, lambda p, r: 1.0 / r,
                                     lambda p, r: r),
}


def get_spec(spec) -> HardySpec:
    if isinstance(spec, HardySpec):
        return spec
    try:
        return SPECS[spec]
    except KeyError:
        raise ValueError(f"unknown Hardy spec {spec!r}; choose from {sorted(SPECS)}") from None


@dataclass
class QuotientResult:
    spec: str
    member: str
    value: float
    error: float
    lhs: float
    rhs_integral: float
    constant: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.constant + 3 * self.error)

    def to_record(self) -> dict:
        """JSON verdict record; lhs/rhs are the two sides of the inequality."""
        rhs = self.constant * self.rhs_integral
        return {"spec": self.spec, "member-id": self.member, "lhs": self.lhs,
                "rhs": rhs, "constant": self.constant, "margin": rhs - self.lhs,
                "quotient": self.value, "quad_error": self.error,
                "passed": self.passed}


def _sides(spec: HardySpec, f: Field, q: Quadrature):
    def integrand(pts, r):
        jet = f.jet(pts, 1)
        g = hgrad_from_jet(jet, pts)
        return np.stack([spec.left(pts, r) * np.abs(jet.val) ** 2,
                         spec.right(pts, r) * np.sum(np.abs(g) ** 2, axis=1)], axis=1)

    if spec.koranyi and not f.meta.get("singular"):
        # smooth denominator: the product rule is more accurate
        num = q.integrate_many(integrand, f.decay, koranyi=True)
        den = q.integrate_many(integrand, f.decay)
        return (num[0][0].real, num[1][0].real), (den[0][1].real, den[1][1].real)
    fine, coarse = q.integrate_many(integrand, f.decay, koranyi=spec.koranyi)
    return (fine[0].real, coarse[0].real), (fine[1].real, coarse[1].real)


def quotient(spec, f: Field, q: Optional[Quadrature] = None) -> QuotientResult:
    """Rayleigh quotient of ``f`` for a Hardy spec, with error estimate."""
    spec = get_spec(spec)
    C = spec.constant(f.d)
    q = q or Quadrature(f.d)
    (nf, nc), (df, dc) = _sides(spec, f, q)
    return QuotientResult(spec.name, f.name, nf / df, ratio_error(nf, nc, df, dc),
                          nf, df, C)


def _suite_sides(specs, f: Field, q: Quadrature):
    """All specs' sides for one member from a single product-rule pass."""
    def integrand(pts, r):
        jet = f.jet(pts, 1)
        u2 = np.abs(jet.val) ** 2
        g2 = np.sum(np.abs(hgrad_from_jet(jet, pts)) ** 2, axis=1)
        cols = []
        for s in specs:
            cols += [s.left(pts, r) * u2, s.right(pts, r) * g2]
        return np.stack(cols, axis=1)

    fine, coarse = q.integrate_many(integrand, f.decay)
    out = {}
    for k, s in enumerate(specs):
        out[s.name] = [(fine[2 * k].real, coarse[2 * k].real),
                       (fine[2 * k + 1].real, coarse[2 * k + 1].real)]
    plane = [s for s in specs if s.koranyi]
    if plane:
        def left(pts, r):
            u2 = np.abs(f(pts)) ** 2
            return np.stack([s.left(pts, r) * u2 for s in plane], axis=1)

        fine, coarse = q.integrate_many(left, f.decay, koranyi=True)
        for k, s in enumerate(plane):
            out[s.name][0] = (fine[k].real, coarse[k].real)
    return out


def hardy_suite(d: int, family, q: Optional[Quadrature] = None, specs=None) -> list:
    """Quotients of every family member for every applicable spec."""
    q = q or Quadrature(d)
    specs = [get_spec(s) for s in (specs or SPECS)]
    specs = [s for s in specs if d >= s.min_dim]
    out = []
    for f in family:
        if f.meta.get("singular"):
            out.extend(quotient(s, f, q) for s in specs)
            continue
        sides = _suite_sides(specs, f, q)
        for s in specs:
            (nf, nc), (df, dc) = sides[s.name]
            out.append(QuotientResult(s.name, f.name, nf / df,
                                      ratio_error(nf, nc, df, dc), nf, df,
                                      s.constant(d)))
    return out


# --------------------------------------------------------------------------
# general divergence-field inequality
# --------------------------------------------------------------------------

class VectorField:
    """Vector field on R^{2d+1} with exact Jacobian.

    ``jet(pts) -> (values (N, n), jac (N, n, n))`` with
    ``jac[:, k, i] = d h_k / d coord_i``.
    """

    def __init__(self, d: int, jet_fn: Callable, name: str = "h"):
        self.d = d
        self._jet = jet_fn
        self.name = name

    def jet(self, pts):
        return self._jet(as_points(pts))


def radial_field(d: int, k: float) -> VectorField:
    """h = (x, y, 0) / |z|^k; div_H h = (2d - k) / |z|^k."""
    n = 2 * d + 1

    def jet_fn(pts):
        z = pts[:, :2 * d]
        r = np.sqrt(np.sum(z * z, axis=1))
        vals = np.zeros((len(pts), n))
        vals[:, :2 * d] = z * r[:, None] ** -k
        jac = np.zeros((len(pts), n, n))
        eye = np.eye(2 * d)
        jac[:, :2 * d, :2 * d] = (eye[None] * r[:, None, None] ** -k
                                  - k * z[:, :, None] * z[:, None, :]
                                  * r[:, None, None] ** (-k - 2))
        return vals, jac

    return VectorField(d, jet_fn, f"z/|z|^{k}")


def _div_and_sigma(h: VectorField, pts):
    vals, jac = h.jet(pts)
    s = sigma_matrix(pts)
    a = np.einsum("nki,nkj->nij", s, s)
    div = np.einsum("nik,nki->n", a, jac)
    sh = np.einsum("nij,nj->ni", s, vals)
    return div, np.sqrt(np.sum(sh * sh, axis=1))


def verify_general(h: VectorField, f: Field, p: float = 2.0,
                   q: Optional[Quadrature] = None) -> InequalityVerdict:
    """int |u|^p |div_H h| <= p^p int |sigma h|^p |div_H h|^{1-p} |grad_H u|^p."""
    if not 1 < p <= 4:
        raise DomainError("exponent p must lie in (1, 4]")
    q = q or Quadrature(f.d)

    def integrand(pts, r):
        div, sh = _div_and_sigma(h, pts)
        bad = np.nonzero(div <= 0)[0]
        if len(bad):
            raise HypothesisError(f"div_H h <= 0 at {pts[bad[0]].tolist()}")
        jet = f.jet(pts, 1)
        g = np.sqrt(np.sum(np.abs(hgrad_from_jet(jet, pts)) ** 2, axis=1))
        return np.stack([np.abs(jet.val) ** p * div,
                         sh ** p * div ** (1 - p) * g ** p], axis=1)

    decay = None if f.decay is None else (p * f.decay[0] / 2, p * f.decay[1] / 2)
    fine, coarse = q.integrate_many(integrand, decay)
    lhs, rhs = fine[0].real, p ** p * fine[1].real
    err = abs(lhs - coarse[0].real) + p ** p * abs(fine[1].real - coarse[1].real)
    return InequalityVerdict("hardy-general", lhs, rhs, p ** p, err, member=f.name,
                             tags=[h.name, f"p={p}"])


# --------------------------------------------------------------------------
# sharpness probe
# --------------------------------------------------------------------------

def profile_field(d: int, s: float, b: float, a: float = 0.5, koranyi: bool = False) -> Field:
    """|z|^s exp(-a|z|^2 - b t^2), or N^s exp(-a|z|^2 - b t^2) when ``koranyi``."""
    if koranyi:
        f = koranyi_field(d, s) * gauss_poly(Polynomial.one(d), a, b)
    else:
        f = power_profile(d, s, a) * gauss_poly(Polynomial.one(d), 0.0, b)
    f.decay = (a, b)
    f.meta = {**(f.meta or {}), "singular": koranyi}
    f.name = f"profile({'N' if koranyi else '|z|'}^{s:g},a={a:g},b={b:g})"
    return f


def profile_exponent(spec: HardySpec, d: int, m: float) -> float:
    """Profile power at distance m from the critical one."""
    if spec.name == "horizontal":
        return -(d - 1) + m
    if spec.name == "weighted-horizontal":
        return -(2 * d - 1) / 2 + m
    if spec.name == "GL":
        return -d + m
    raise ValueError(spec.name)


def profile_quotient_exact(spec, d: int, m: float, b: float) -> Optional[float]:
    """Closed-form quotient of the profile with a = 1/2 (None for GL)."""
    spec = get_spec(spec)
    if spec.name == "horizontal":
        return 1.0 / ((d - 1) ** 2 + m + 4 * b * m * (m + 1))
    if spec.name == "weighted-horizontal":
        return 1.0 / ((d - 0.5) ** 2 + m + 4 * b * m * (m + 1))
    return None


def _probe_quadrature(q: Quadrature, spec: HardySpec, d: int, m: float) -> Quadrature:
    # the |z|-profile integrands are u^(m-1) e^{-u} times a polynomial in
    # u = |z|^2, so Gauss-Laguerre with this exponent is exact
    if spec.name == "GL":
        # both sides behave like rho^(m-1) in the Koranyi plane
        return Quadrature(d, replace(q.spec, alpha=m - 1))
    return Quadrature(d, replace(q.spec, radial="laguerre", alpha=m - 1, n_v=1, n_phi=1,
                                 scheme="polar"))


@dataclass
class ProbeResult:
    spec: str
    d: int
    constant: float
    best: float
    best_params: dict
    sweep: list

    @property
    def gap(self) -> float:
        return self.constant - self.best

    def to_dict(self):
        return {"spec": self.spec, "d": self.d, "constant": self.constant,
                "best": self.best, "best_params": self.best_params, "gap": self.gap,
                "sweep": self.sweep}


def sharpness_probe(spec, d: int, family=None, q: Optional[Quadrature] = None,
                    ms=(0.8, 0.4, 0.2, 0.1, 0.05, 0.02), bs=(0.01,),
                    radii=(1.0,)) -> ProbeResult:
    """Largest quotient over near-critical profiles and an optional family.

    Profiles are |z|^s (N^s for GL) times exp(-|z|^2/(2R^2) - b t^2/R^4),
    with s approaching the critical power as m -> 0.
    """
    spec = get_spec(spec)
    C = spec.constant(d)
    q = q or Quadrature(d)
    sweep = []
    for R in radii:
        for b in bs:
            for m in ms:
                s = profile_exponent(spec, d, m)
                f = profile_field(d, s, b / R ** 4, 0.5 / R ** 2, koranyi=spec.name == "GL")
                res = quotient(spec, f, _probe_quadrature(q, spec, d, m))
                sweep.append({"m": m, "b": b, "R": R, "s": s, "quotient": res.value,
                              "error": res.error,
                              "exact": profile_quotient_exact(spec, d, m, b)})
    for f in family or ():
        res = quotient(spec, f, q)
        sweep.append({"member": f.name, "quotient": res.value, "error": res.error})
    best = max(sweep, key=lambda e: e["quotient"])
    params = {k: v for k, v in best.items() if k not in ("quotient", "error", "exact")}
    return ProbeResult(spec.name, d, C, best["quotient"], params, sweep)


def weight_comparison(pts) -> np.ndarray:
    """|z|^{-2} - |z|^2 / N^4 at each point (nonnegative)."""
    pts = as_points(pts)
    d = (pts.shape[1] - 1) // 2
    r2 = np.sum(pts[:, :2 * d] ** 2, axis=1)
    return 1.0 / r2 - r2 / (r2 * r2 + pts[:, -1] ** 2)
