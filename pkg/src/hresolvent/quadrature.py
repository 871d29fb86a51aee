"""Quadrature over R^{2d+1} adapted to horizontal polar coordinates.

Points are written z = r * omega with omega on the complex unit sphere
S^{2d-1}, omega_j = sqrt(v_j) e^{i phi_j}.  The vector v = (|omega_j|^2)
is uniformly distributed on the simplex, so the sphere measure factors into
a simplex rule in v and a trapezoid rule in each phase.  Angular parts of
polynomial-times-radial integrands are then integrated exactly, and all
the horizontal weights |z|^{+-1}, |z|^{-2} become smooth factors in r.

The "qmc" scheme swaps the angular product for a scrambled Sobol sample of
the sphere; it is cheaper in d >= 3 at the price of a statistical error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import (gammaln, roots_genlaguerre, roots_hermite, roots_jacobi,
                           roots_legendre)
from scipy.stats import qmc

from .hgroup import EPS_AXIS


class QuadratureAccuracyError(RuntimeError):
    """Two refinement levels disagree by more than the tolerance."""

    def __init__(self, message, fine=None, coarse=None):
        super().__init__(message)
        self.fine = fine
        self.coarse = coarse


@dataclass(frozen=True)
class QuadSpec:
    scheme: str = "polar"          # polar | qmc
    n_r: int = 20
    n_t: int = 20
    n_v: int = 4
    n_phi: int = 12
    n_sphere: int = 2048           # qmc only
    radial: str = "hermite"        # hermite | legendre | laguerre
    alpha: float = 0.0             # laguerre exponent in u = rate * r^2; jacobi in rho on the koranyi plane
    tail: float = 30.0             # exp(-tail) cut, legendre truncation only
    eps_axis: float = EPS_AXIS
    seed: int = 0
    plane: str = "product"         # product | koranyi

    def coarse(self) -> "QuadSpec":
        def c(n):
            # strictly fewer nodes, or the error estimate reads zero
            return max(1, min(n - 1, int(math.ceil(0.75 * n))))
        return replace(self, n_r=c(self.n_r), n_t=c(self.n_t),
                       n_sphere=max(64, self.n_sphere // 2), seed=self.seed + 1)


PRESETS = {
    "fast": dict(n_r=14, n_t=14, n_v=3, n_phi=11, n_sphere=512),
    "standard": dict(n_r=20, n_t=20, n_v=4, n_phi=12, n_sphere=2048),
    "thorough": dict(n_r=32, n_t=32, n_v=5, n_phi=14, n_sphere=8192),
}


def preset(name: str, d: int = 2, **overrides) -> QuadSpec:
    """Named quadrature preset; d >= 4 switches to the qmc sphere."""
    if name not in PRESETS:
        raise ValueError(f"unknown quadrature preset {name!r}")
    kw = dict(PRESETS[name])
    if d == 3:
        kw["n_phi"] = min(kw["n_phi"], 8)
        kw["n_v"] = min(kw["n_v"], 3)
    if d >= 4:
        kw["scheme"] = "qmc"
    kw.update(overrides)
    return QuadSpec(**kw)


@dataclass
class Rule:
    """Nodes and weights; ``r`` is |z| at each node."""

    points: np.ndarray
    weights: np.ndarray
    r: np.ndarray
    R: float
    T: float

    def __len__(self):
        return len(self.weights)

    def chunks(self, size: int = 65536):
        for i in range(0, len(self.weights), size):
            yield slice(i, i + size)


# --------------------------------------------------------------------------
# one-dimensional pieces
# --------------------------------------------------------------------------

def _legendre(n, a, b):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _simplex_rule(d, n):
    """Conical product rule for the uniform probability measure on
    {v >= 0, sum v = 1} in R^d, as an (M, d) array plus weights."""
    if d == 1:
        return np.ones((1, 1)), np.ones(1)
    # v_1 = s_1, v_2 = (1-s_1) s_2, ..., density (1-s_k)^{d-1-k}
    axes = []
    for k in range(d - 1):
        x, w = roots_jacobi(n, d - 2 - k, 0)
        s = 0.5 * (x + 1)
        axes.append((s, w / w.sum()))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    V = np.empty((S.shape[0], d))
    rest = np.ones(S.shape[0])
    for k in range(d - 1):
        V[:, k] = rest * S[:, k]
        rest = rest * (1 - S[:, k])
    V[:, -1] = rest
    return V, W


def sphere_area(m: int) -> float:
    """Area of the unit sphere S^{m-1} in R^m."""
    return float(np.exp(math.log(2.0) + 0.5 * m * math.log(math.pi) - gammaln(0.5 * m)))


@lru_cache(maxsize=32)
def sphere_rule(d: int, n_v: int, n_phi: int):
    """Product rule on S^{2d-1}; returns (omega as (M, 2d) real array
    ordered (x, y), weights summing to the sphere area)."""
    V, Wv = _simplex_rule(d, n_v)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    grids = np.meshgrid(*([phis] * d), indexing="ij")
    P = np.stack([g.ravel() for g in grids], axis=1)
    M = V.shape[0] * P.shape[0]
    amp = np.sqrt(np.repeat(V, P.shape[0], axis=0))
    ph = np.tile(P, (V.shape[0], 1))
    omega = np.concatenate([amp * np.cos(ph), amp * np.sin(ph)], axis=1)
    w = np.repeat(Wv, P.shape[0]) / P.shape[0] * sphere_area(2 * d)
    assert omega.shape[0] == M
    omega.setflags(write=False)
    w.setflags(write=False)
    return omega, w


@lru_cache(maxsize=32)
def sphere_qmc(d: int, n: int, seed: int):
    """Scrambled Sobol points pushed to S^{2d-1} through the Gaussian map."""
    from scipy.stats import norm
    m = int(round(math.log2(max(n, 2))))
    sob = qmc.Sobol(2 * d, scramble=True, seed=seed).random_base2(m)
    g = norm.ppf(np.clip(sob, 1e-12, 1 - 1e-12))
    omega = g / np.linalg.norm(g, axis=1, keepdims=True)
    w = np.full(len(omega), sphere_area(2 * d) / len(omega))
    omega.setflags(write=False)
    w.setflags(write=False)
    return omega, w


def truncation(decay, tail: float = 30.0):
    """Radii R, T with exp(-2a R^2) = exp(-2b T^2) = exp(-tail)."""
    a, b = decay if decay is not None else (1.0, 1.0)
    return math.sqrt(tail / (2 * a)), math.sqrt(tail / (2 * b))


# --------------------------------------------------------------------------
# rule assembly
# --------------------------------------------------------------------------

@lru_cache(maxsize=16)
def half_hermite(n: int):
    """Gauss rule for int_0^inf g(x) exp(-x^2) dx.

    Recurrence coefficients come from the discretized Stieltjes procedure
    on a fine Gauss-Legendre rule over [0, 12] (the tail beyond is below
    exp(-144)); nodes and weights then follow from the Jacobi matrix.
    """
    x, w = _legendre(max(400, 8 * n), 0.0, 12.0)
    w = w * np.exp(-x * x)
    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 1.0
    for k in range(n):
        nrm = w @ (p * p)
        alpha[k] = (w @ (x * p * p)) / nrm
        beta[k] = nrm if k == 0 else nrm / norm_prev
        p_next = (x - alpha[k]) * p - (beta[k] if k > 0 else 0.0) * p_prev
        p_prev, p, norm_prev = p, p_next, nrm
    J = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = beta[0] * vecs[0] ** 2
    return nodes, weights


def _radial(spec: QuadSpec, d: int, R: float, rate: float):
    """Nodes and weights for int_0^inf g(r) r^{2d-1} dr.

    ``rate`` is the Gaussian rate c of the expected integrand decay
    exp(-c r^2); the hermite and laguerre rules absorb it into the weight.
    """
    if spec.radial == "hermite":
        x, w = half_hermite(spec.n_r)
        r = x / math.sqrt(rate)
        return r, w * np.exp(x * x) / math.sqrt(rate) * r ** (2 * d - 1)
    if spec.radial == "legendre":
        r, w = _legendre(spec.n_r, 0.0, R)
        return r, w * r ** (2 * d - 1)
    if spec.radial == "laguerre":
        # u = rate r^2 turns the integral into (1/2) rate^{-d} int g u^{d-1} du
        u, w = roots_genlaguerre(spec.n_r, spec.alpha)
        r = np.sqrt(u / rate)
        lw = (np.log(w) + u - spec.alpha * np.log(u) + (d - 1) * np.log(u)
              - d * math.log(rate) - math.log(2.0))
        return r, np.exp(lw)
    raise ValueError(f"unknown radial rule {spec.radial!r}")


def _vertical(spec: QuadSpec, T: float, rate: float):
    if spec.radial == "legendre":
        return _legendre(spec.n_t, -T, T)
    x, w = roots_hermite(spec.n_t)
    return x / math.sqrt(rate), w * np.exp(x * x) / math.sqrt(rate)


def _koranyi_plane(spec: QuadSpec, d: int, decay):
    """Rule for int g(r, t) r^{2d-1} dr dt in the coordinates
    r^2 = rho cos(psi), t = rho sin(psi), where the Koranyi gauge is
    sqrt(rho).  Integrands singular at the origin like powers of the gauge
    become smooth in rho."""
    a, b = decay
    # psi = (pi/2) x^3 clusters nodes near psi = 0, where the decay in rho
    # switches from Gaussian to exponential
    x, wx = roots_legendre(spec.n_t)
    psi = 0.5 * np.pi * x ** 3
    wpsi = 1.5 * np.pi * x * x * wx
    if spec.alpha:
        # Gauss-Jacobi absorbs a rho^alpha singularity at the origin
        x, wx = roots_jacobi(spec.n_r, 0.0, spec.alpha)
        wx = wx / (1 + x) ** spec.alpha
    else:
        x, wx = roots_legendre(spec.n_r)
    c, s = np.cos(psi), np.sin(psi)
    # rho_max solves 2a rho c + 2b rho^2 s^2 = tail
    A, B = 2 * b * s * s, 2 * a * c
    disc = np.sqrt(B * B + 4 * A * spec.tail)
    rho_max = np.where(A > 1e-14, 2 * spec.tail / (B + disc), spec.tail / np.maximum(B, 1e-300))
    rho = 0.5 * rho_max[:, None] * (x[None, :] + 1)
    w = 0.5 * rho_max[:, None] * wx[None, :] * wpsi[:, None]
    r = np.sqrt(rho * c[:, None])
    t = rho * s[:, None]
    w = w * (rho * c[:, None]) ** (d - 1) * rho / 2
    return r.ravel(), t.ravel(), w.ravel()


@lru_cache(maxsize=4)
def _build(spec: QuadSpec, d: int, decay: tuple) -> Rule:
    if spec.plane == "koranyi":
        return _build_koranyi(spec, d, decay)
    if spec.scheme == "polar":
        omega, ws = sphere_rule(d, spec.n_v, spec.n_phi)
    elif spec.scheme == "qmc":
        omega, ws = sphere_qmc(d, spec.n_sphere, spec.seed)
    else:
        raise ValueError(f"unknown quadrature scheme {spec.scheme!r}")
    a, b = decay
    R, T = truncation(decay, spec.tail)
    r, wr = _radial(spec, d, R, 2 * a)
    keep = r >= spec.eps_axis
    r, wr = r[keep], wr[keep]
    t, wt = _vertical(spec, T, 2 * b)
    nr, nt, ns = len(r), len(t), len(ws)
    pts = np.empty((nr * nt * ns, 2 * d + 1))
    z = r[:, None, None, None] * omega[None, None, :, :]
    pts[:, :2 * d] = np.broadcast_to(z, (nr, nt, ns, 2 * d)).reshape(-1, 2 * d)
    pts[:, -1] = np.broadcast_to(t[None, :, None], (nr, nt, ns)).ravel()
    w = (wr[:, None, None] * wt[None, :, None] * ws[None, None, :]).ravel()
    rr = np.broadcast_to(r[:, None, None], (nr, nt, ns)).ravel().copy()
    for arr in (pts, w, rr):
        arr.setflags(write=False)
    return Rule(pts, w, rr, R, T)


def _build_koranyi(spec: QuadSpec, d: int, decay: tuple) -> Rule:
    if spec.scheme == "polar":
        omega, ws = sphere_rule(d, spec.n_v, spec.n_phi)
    else:
        omega, ws = sphere_qmc(d, spec.n_sphere, spec.seed)
    r, t, wrt = _koranyi_plane(spec, d, decay)
    keep = r >= spec.eps_axis
    r, t, wrt = r[keep], t[keep], wrt[keep]
    m, ns = len(r), len(ws)
    pts = np.empty((m * ns, 2 * d + 1))
    pts[:, :2 * d] = (r[:, None, None] * omega[None, :, :]).reshape(-1, 2 * d)
    pts[:, -1] = np.repeat(t, ns)
    w = (wrt[:, None] * ws[None, :]).ravel()
    rr = np.repeat(r, ns)
    for arr in (pts, w, rr):
        arr.setflags(write=False)
    R, T = truncation(decay, spec.tail)
    return Rule(pts, w, rr, R, T)


@dataclass(frozen=True)
class Estimate:
    """A quadrature value with its two-level error estimate."""

    value: complex
    error: float
    coarse: complex

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def __float__(self):
        return self.real


@dataclass
class Quadrature:
    """Two-level quadrature for fields on H^d.

    The error estimate of every integral is the difference between the
    fine rule and a coarse rule with three quarters of the nodes per axis.
    """

    d: int
    spec: QuadSpec = None
    chunk: int = 65536

    def __post_init__(self):
        if self.spec is None:
            self.spec = preset("standard", self.d)

    @classmethod
    def from_preset(cls, d: int, name: str = "standard", **overrides):
        return cls(d, preset(name, d, **overrides))

    def rules(self, decay=None, koranyi: bool = False):
        """(fine, coarse) rules for integrands decaying like the square of
        a field with Gaussian rates ``decay = (a, b)``.  ``koranyi`` selects
        the plane rule suited to weights singular at the origin."""
        key = (1.0, 1.0) if decay is None else (round(float(decay[0]), 12),
                                                round(float(decay[1]), 12))
        spec = replace(self.spec, plane="koranyi") if koranyi else self.spec
        return (_build(spec, self.d, key), _build(spec.coarse(), self.d, key))

    def integrate_many(self, fn: Callable, decay=None, koranyi: bool = False):
        """Integrate ``fn(pts, r) -> (N, k)`` array; returns (fine, coarse)
        vectors of length k."""
        out = []
        for rule in self.rules(decay, koranyi):
            acc = None
            for sl in rule.chunks(self.chunk):
                vals = np.asarray(fn(rule.points[sl], rule.r[sl]))
                if vals.ndim == 1:
                    vals = vals[:, None]
                part = rule.weights[sl] @ vals
                acc = part if acc is None else acc + part
            out.append(acc)
        return out[0], out[1]

    def integrate(self, fn: Callable, decay=None, koranyi: bool = False) -> Estimate:
        fine, coarse = self.integrate_many(fn, decay, koranyi)
        fine, coarse = fine[0], coarse[0]
        return Estimate(fine, float(abs(fine - coarse)), coarse)


# --------------------------------------------------------------------------
# weighted norms
# --------------------------------------------------------------------------

WEIGHTS = {
    "1": lambda pts, r: np.ones_like(r),
    "|z|": lambda pts, r: r,
    "|z|^-1": lambda pts, r: 1.0 / r,
    "|z|^-2": lambda pts, r: r ** -2.0,
    "N": lambda pts, r: (r ** 4 + pts[:, -1] ** 2) ** 0.25,
    "N^-1": lambda pts, r: (r ** 4 + pts[:, -1] ** 2) ** -0.25,
}


def weight_fn(w):
    if callable(w):
        return w
    try:
        return WEIGHTS[w]
    except KeyError:
        raise ValueError(f"unknown weight {w!r}; choose from {sorted(WEIGHTS)}") from None


def weighted_l2_norm(f, w="1", q: Optional[Quadrature] = None, rtol: float = 1e-6,
                     check: bool = True) -> Estimate:
    """(int w^2 |f|^2)^{1/2} with a two-level error estimate.

    ``w`` is a weight name from :data:`WEIGHTS` or ``w(pts, r)``.
    """
    q = q or Quadrature(f.d)
    wf = weight_fn(w)

    def integrand(pts, r):
        return (wf(pts, r) * np.abs(f(pts))) ** 2

    est = q.integrate(integrand, f.decay, koranyi=w in ("N", "N^-1"))
    fine, coarse = math.sqrt(max(est.real, 0.0)), math.sqrt(max(np.real(est.coarse), 0.0))
    err = abs(fine - coarse)
    if check and err > rtol * max(fine, 1e-300):
        raise QuadratureAccuracyError(
            f"norm not converged: fine={fine!r}, coarse={coarse!r}", fine, coarse)
    return Estimate(fine, err, coarse)
