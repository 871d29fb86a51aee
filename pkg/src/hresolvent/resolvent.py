"""Resolvent estimates for -L u - V u + lam u = f in manufactured mode.

A solution u is chosen first and f is derived from its exact sublaplacian,
so every estimate can be tested without a linear solve.  Integrals are taken
on a fine and a coarse rule; their difference is the reported error.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from .fields import (Field, Polynomial, SpectralParam, builtin_family, gauge_transform,
                     polynomial_field, radial_field, sgn, z_squared)
from .hardy import HypothesisError
from .hgroup import (as_points, hgrad_from_jet, hhess_from_jet, horizontal_gradient,
                     sublap_from_jet, sublaplacian)
from .quadrature import Quadrature
from .verdict import InequalityVerdict

IDENTITY_RTOL = 1e-5


class CapabilityError(TypeError):
    """A required exact evaluator or whitelisted multiplier is missing."""


def lambda_grid(d: int = 2) -> tuple:
    """Twelve spectral parameters covering both cones, the axes and the
    cone boundaries for delta in {delta*, 1, 5}."""
    ds = C.delta_star(d)
    return (1 + 0j, 4 + 0j, 1j, -2j, 1 + 1j, 2 - 2j, complex(1, ds), 0.5 + 2j,
            -1 + 0j, -2 + 1j, 1 + 5j, 3 + 0.5j)


def default_deltas(d: int = 2) -> tuple:
    return (C.delta_star(d), 1.0, 5.0)


@lru_cache(maxsize=None)
def _K(d, delta):
    return C.K_d(d, delta)


@lru_cache(maxsize=None)
def _kappa(d):
    return C.kappa_d(d, check=False).kappa_d


@lru_cache(maxsize=None)
def _Kb(d, delta, b):
    return C.K_db(d, delta, b)


@lru_cache(maxsize=None)
def _kappab(d, b):
    return C.kappa_db(d, b)


@lru_cache(maxsize=None)
def _M(d, delta, b2):
    return C.M_db2(d, delta, b2).value


@lru_cache(maxsize=None)
def _mu(d, b1, b2):
    return C.mu(d, b1, b2)


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------

@dataclass
class ResolventInstance:
    """u solves -L u - V u + lam u = f with f derived from u."""

    u: Field
    s: SpectralParam
    V: Optional[object] = None

    @property
    def d(self) -> int:
        return self.u.d

    @property
    def lam(self) -> complex:
        return self.s.value

    def f(self, pts) -> np.ndarray:
        pts = as_points(pts)
        jet = self.u.jet(pts, 2)
        out = -sublap_from_jet(jet, pts) + self.lam * jet.val
        if self.V is not None:
            out = out - self.V(pts).real * jet.val
        return out

    def consistency_residual(self, pts) -> float:
        """max |f - (-L u - V u + lam u)| with L u recomputed independently."""
        pts = as_points(pts)
        uv = self.u(pts)
        ref = -sublaplacian(self.u, pts) + self.lam * uv
        if self.V is not None:
            ref = ref - self.V(pts).real * uv
        return float(np.max(np.abs(self.f(pts) - ref)))

    def scaled(self, c) -> "ResolventInstance":
        u = self.u * c
        u.decay = self.u.decay
        return ResolventInstance(u, self.s, self.V)


def make_instance(u: Field, s, V=None) -> ResolventInstance:
    if not hasattr(u, "jet"):
        raise CapabilityError("u needs an exact jet evaluator for its sublaplacian")
    if not isinstance(s, SpectralParam):
        s = SpectralParam.from_complex(s)
    if V is not None:
        terms = getattr(V, "terms", ())
        if any(complex(t.coef).imag != 0 for t in terms):
            raise ValueError("the potential must be real-valued")
        if not hasattr(V, "radial_real"):
            raise CapabilityError("V needs d_r(|z| V)")
    return ResolventInstance(u, s, V)


# --------------------------------------------------------------------------
# sampled quantities
# --------------------------------------------------------------------------

@dataclass
class _Level:
    w: np.ndarray
    r: np.ndarray
    z: np.ndarray
    U: np.ndarray
    G: np.ndarray
    LU: np.ndarray
    T: np.ndarray
    N2: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    pts: np.ndarray


def _sample(rule, u: Field, V, chunk: int = 32768) -> _Level:
    pts = rule.points
    d = u.d
    U, G, LU, T = [], [], [], []
    for i in range(0, len(pts), chunk):
        p = pts[i:i + chunk]
        jet = u.jet(p, 2)
        U.append(np.asarray(jet.val, dtype=complex))
        G.append(np.asarray(hgrad_from_jet(jet, p), dtype=complex))
        LU.append(np.asarray(sublap_from_jet(jet, p), dtype=complex))
        T.append(np.asarray(jet.grad[:, -1], dtype=complex))
    z = pts[:, :2 * d]
    r = rule.r
    if V is not None:
        Vv, dV = V(pts).real, V.radial_real(pts)
    else:
        Vv = dV = np.zeros(len(pts))
    return _Level(rule.weights, r, z, np.concatenate(U), np.concatenate(G),
                  np.concatenate(LU), np.concatenate(T), np.sqrt(r ** 4 + pts[:, -1] ** 2), Vv, dV, pts)


class Multiplier:
    """A whitelisted real multiplier with exact derivatives at points."""

    def __init__(self, name: str, field: Field, poly: Optional[Polynomial] = None):
        self.name = name
        self.field = field
        self.poly = poly

    def data(self, pts):
        jet = self.field.jet(pts, 2)
        out = {"val": np.real(jet.val), "grad": np.real(hgrad_from_jet(jet, pts)),
               "lap": np.real(sublap_from_jet(jet, pts)), "hess": None, "lap2": None}
        if self.poly is not None:
            # second-order data is only needed for the third multiplier
            out["hess"] = np.real(hhess_from_jet(jet, pts))
            l2 = self.poly.sublap().sublap()
            out["lap2"] = np.real(l2.jet(pts, 0).val) if l2.terms else np.zeros(len(pts))
        return out


def _radial_z(d: int) -> Field:
    return radial_field(d, lambda r: (r, np.ones_like(r), np.zeros_like(r)), "|z|")


def _multiplier(name: str, d: int) -> Multiplier:
    """Base multipliers; lam-dependent factors are applied by the caller."""
    if name == "|z|^2":
        p = z_squared(d)
        return Multiplier(name, polynomial_field(p, name), p)
    if name == "1":
        p = Polynomial.one(d)
        return Multiplier(name, polynomial_field(p, name), p)
    if name == "|z|":
        return Multiplier(name, _radial_z(d))
    raise CapabilityError(f"multiplier {name!r} is not whitelisted")


PHI1 = ("-L(phi3)/(4d)", "-(|lam2|/sqrt(lam1))|z|", "1")
PHI2 = ("1", "sgn(lam2) grad(phi3).z/|z|")
PHI3 = ("|z|^2",)


def _resolve_phi(kind: str, name: str, d: int, s: SpectralParam):
    """(base multiplier name, scalar factor) for a whitelisted choice."""
    if kind == 3:
        if name not in PHI3:
            raise CapabilityError(f"phi3 must be one of {PHI3}")
        return "|z|^2", 1.0
    if kind == 1:
        if name == "1":
            return "1", 1.0
        if name == "-L(phi3)/(4d)":
            # L |z|^2 = -4d, derived symbolically
            lap = z_squared(d).sublap()
            return "1", -float(sum(c for c, _ in lap.terms)) / (4 * d)
        if name == "-(|lam2|/sqrt(lam1))|z|":
            if s.lam1 <= 0:
                raise C.DomainError("this multiplier needs lam1 > 0")
            return "|z|", -abs(s.lam2) / math.sqrt(s.lam1)
        raise CapabilityError(f"phi1 must be one of {PHI1}")
    if name == "1":
        return "1", 1.0
    if name == "sgn(lam2) grad(phi3).z/|z|":
        # grad_H |z|^2 . z/|z| = 2|z|
        return "|z|", 2.0 * s.sign2
    raise CapabilityError(f"phi2 must be one of {PHI2}")


class Evaluator:
    """Samples of one solution (and potential) reused across lam and delta."""

    def __init__(self, u: Field, V=None, q: Optional[Quadrature] = None):
        self.u = u
        self.V = V
        self.d = u.d
        self.q = q or Quadrature(u.d)
        fine, coarse = self.q.rules(u.decay)
        self.levels = [_sample(fine, u, V), _sample(coarse, u, V)]
        self._klevels = None
        self._mult = {}
        self._moments = {}

    @property
    def klevels(self):
        if self._klevels is None:
            kf, kc = self.q.rules(self.u.decay, koranyi=True)
            self._klevels = [_sample(kf, self.u, self.V), _sample(kc, self.u, self.V)]
        return self._klevels

    def multiplier(self, name, level: int):
        key = (name, level)
        if key not in self._mult:
            self._mult[key] = _multiplier(name, self.d).data(self.levels[level].pts)
        return self._mult[key]

    def moments(self, lam: complex) -> list:
        """Integrals used by the estimates and identities, per level."""
        lam = complex(lam)
        if lam not in self._moments:
            self._moments[lam] = [self._level_moments(L, lam) for L in self.levels]
        return self._moments[lam]

    def kmoments(self, lam: complex) -> list:
        lam = complex(lam)
        out = []
        for L in self.klevels:
            F = -L.LU - L.V * L.U + lam * L.U
            out.append({"uN2": L.w @ (np.abs(L.U) ** 2 / L.N2),
                        "Nf2": L.w @ (L.N2 * np.abs(F) ** 2)})
        return out

    def _level_moments(self, L: _Level, lam: complex) -> dict:
        s = SpectralParam.from_complex(lam)
        d = self.d
        theta = s.theta
        U, G, r, w = L.U, L.G, L.r, L.w
        F = -L.LU - L.V * U + lam * U
        Feff = F + L.V * U
        zr = L.z / r[:, None]
        Ub = np.conj(U)
        Gm = G - 1j * theta * zr * U[:, None]
        radial = np.sum(zr * G, axis=1)
        u2 = np.abs(U) ** 2
        m = {
            "u2": w @ u2, "ru2": w @ (r * u2), "ur1": w @ (u2 / r), "ur2": w @ (u2 / r ** 2),
            "grad2": w @ np.sum(np.abs(G) ** 2, axis=1),
            "rgrad2": w @ (r * np.sum(np.abs(G) ** 2, axis=1)),
            "zf2": w @ (r * r * np.abs(F) ** 2),
            "gm2": w @ np.sum(np.abs(Gm) ** 2, axis=1),
            "rgm2": w @ (r * np.sum(np.abs(Gm) ** 2, axis=1)),
            "fu": w @ (F * Ub), "rfu": w @ (r * F * Ub),
            "feffu": w @ (Feff * Ub), "rfeffu": w @ (r * Feff * Ub),
            "ufabs": w @ (np.abs(U) * np.abs(F)),
            "u_radial": w @ (Ub * radial),
            "u_zgrad": w @ (Ub * np.sum(L.z * G, axis=1)),
            "feff_zgrad": w @ (Feff * np.sum(L.z * np.conj(G), axis=1)),
            "am_fu": w @ (F * Ub), "am_rfu": w @ (r * F * Ub),
            "am_grad": w @ (r * F * np.sum(zr * np.conj(Gm), axis=1)),
            "rVu2": w @ (r * L.V * u2), "dVu2": w @ (L.dV * u2),
            "comm": _commutator(L, 2.0 * L.z),
        }
        return m


def _commutator(L: _Level, grad_phi) -> float:
    """Re int 4 conj(T u) sum_k (X_k phi Y_k u - Y_k phi X_k u).

    Moving X_i past X_j when integrating by parts leaves this term behind,
    since [X_k, Y_k] = -4T.  It vanishes only when T u = 0.
    """
    d = (L.G.shape[1]) // 2
    X, Y = L.G[:, :d], L.G[:, d:]
    rot = np.sum(grad_phi[:, :d] * Y - grad_phi[:, d:] * X, axis=1)
    return float(np.real(L.w @ (4 * np.conj(L.T) * rot)))


def _pair(ms, key, fn=lambda x: x):
    return fn(ms[0][key]), fn(ms[1][key])


def _norm(ms, key):
    return _pair(ms, key, lambda x: math.sqrt(max(float(np.real(x)), 0.0)))


def _verdict(name, lhs, rhs, const, **kw) -> InequalityVerdict:
    """lhs, rhs are (fine, coarse) pairs; the verdict is lhs <= const * rhs."""
    err = abs(lhs[0] - lhs[1]) + const * abs(rhs[0] - rhs[1])
    return InequalityVerdict(name, lhs[0], const * rhs[0], const, err, **kw)


def _evaluator(inst: ResolventInstance, q, ev) -> Evaluator:
    if ev is not None:
        return ev
    return Evaluator(inst.u, inst.V, q)


def _tags(inst, delta, cone):
    return dict(delta=delta, cone=cone, member=inst.u.name,
                lam=(inst.s.lam1, inst.s.lam2))


# --------------------------------------------------------------------------
# theorem verdicts
# --------------------------------------------------------------------------

def verify_thm1(inst: ResolventInstance, delta: float, q: Optional[Quadrature] = None,
                ev: Optional[Evaluator] = None) -> list:
    """Free-case verdicts: est1 or est2 by cone (|lam1| convention), and
    always the uniform weighted bound and its Koranyi-weighted weakening."""
    d = inst.d
    if d < 2:
        raise C.DomainError("the resolvent estimates need d >= 2")
    if inst.V is not None:
        raise ValueError("verify_thm1 is for the free equation; use verify_thm16")
    if delta <= 0:
        raise C.DomainError("delta must be positive")
    ev = _evaluator(inst, q, ev)
    ms = ev.moments(inst.lam)
    s = inst.s
    inside = s.in_cone(delta, absolute=True)
    boundary = s.on_cone_boundary(delta, absolute=True)
    out = []
    grad, zf = _norm(ms, "grad2"), _norm(ms, "zf2")
    if not inside or boundary:
        out.append(_verdict("est1", grad, zf, (1 + 1 / delta) / (d - 1),
                            **_tags(inst, delta, "boundary" if boundary else "outside")))
    elif s.lam1 < 0:
        # the |lam1|-cone claims est2 here, but the argument only covers
        # lam1 >= 0; est1 still holds since |lam2| > delta*lam1
        v = _verdict("est1", grad, zf, (1 + 1 / delta) / (d - 1),
                     **_tags(inst, delta, "inside"))
        v.tags.append("proof-region")
        out.append(v)
    if inside and s.lam1 >= 0:
        out.append(_verdict("est2", _norm(ms, "gm2"), zf, _K(d, delta),
                            **_tags(inst, delta, "boundary" if boundary else "inside")))
    out.append(_verdict("katoyajima", _norm(ms, "ur2"), zf, _kappa(d),
                        **_tags(inst, delta, None)))
    km = ev.kmoments(inst.lam)
    out.append(_verdict("GL-weak", _norm(km, "uN2"), _norm(km, "Nf2"), _kappa(d),
                        **_tags(inst, delta, None)))
    return out


def _check_potential(inst, positive: bool):
    if inst.V is None:
        return
    if positive:
        rng = np.random.default_rng(0)
        cloud = rng.standard_normal((2000, 2 * inst.d + 1)) * 2.0
        if np.min(inst.V(cloud).real) < 0:
            raise HypothesisError("positive-potential estimates need V >= 0")


def _perturbed(inst, delta, q, ev, c_out, c_in, c_unif, names, b_tag):
    d = inst.d
    if d < 2:
        raise C.DomainError("the resolvent estimates need d >= 2")
    ev = _evaluator(inst, q, ev)
    ms = ev.moments(inst.lam)
    s = inst.s
    # no absolute value on lam1 here: lam1 < 0 lies outside the cone
    inside = s.in_cone(delta)
    boundary = s.on_cone_boundary(delta) and s.lam1 >= 0
    grad, zf = _norm(ms, "grad2"), _norm(ms, "zf2")
    out = []
    if not inside or boundary:
        out.append(_verdict(names[0], grad, zf, c_out,
                            **_tags(inst, delta, "boundary" if boundary else "outside")))
    if inside:
        out.append(_verdict(names[1], _norm(ms, "gm2"), zf, c_in(),
                            **_tags(inst, delta, "boundary" if boundary else "inside")))
    out.append(_verdict(names[2], _norm(ms, "ur2"), zf, c_unif, **_tags(inst, delta, None)))
    for v in out:
        v.tags.append(b_tag)
    return out


def verify_thm_pp(inst: ResolventInstance, delta: float, b: float,
                  q: Optional[Quadrature] = None, ev: Optional[Evaluator] = None) -> list:
    """Positive-potential verdicts with K_{d,b}(delta) and kappa_{d,b}."""
    if not 0 <= b < 1:
        raise C.DomainError("b must lie in [0, 1)")
    _check_potential(inst, positive=True)
    d = inst.d
    return _perturbed(inst, delta, q, ev, (1 + 1 / delta) / (d - 1),
                      lambda: _Kb(d, delta, b), _kappab(d, b),
                      ("est3b", "est4b", "katoyajima2"), f"b={b:.6g}")


def verify_thm16(inst: ResolventInstance, delta: float, b1: float, b2: float,
                 q: Optional[Quadrature] = None, ev: Optional[Evaluator] = None) -> list:
    """Real-potential verdicts with M_{d,b2}(delta) and mu_{d,b1,b2}."""
    if not (0 <= b1 < 1 and 0 <= b2 < 1):
        raise C.DomainError("b1 and b2 must lie in [0, 1)")
    d = inst.d
    return _perturbed(inst, delta, q, ev, (1 + 1 / delta) / ((d - 1) * (1 - b1 * b1)),
                      lambda: _M(d, delta, b2), _mu(d, b1, b2),
                      ("est3", "est4", "katoyajima2"), f"b1={b1:.6g},b2={b2:.6g}")


# --------------------------------------------------------------------------
# proof-chain checks
# --------------------------------------------------------------------------

def est1_chain(inst: ResolventInstance, delta: float, q=None, ev=None) -> list:
    """|delta Re int u*f -+ Im int u*f| <= (delta+1) ||zf|| ||u/|z|||
    <= ((delta+1)/(d-1)) ||zf|| ||grad_H u||."""
    d = inst.d
    ev = _evaluator(inst, q, ev)
    ms = ev.moments(inst.lam)
    sg = inst.s.sign2
    a = _pair(ms, "fu", lambda x: abs(delta * x.real - sg * x.imag))
    zf, ur, grad = _norm(ms, "zf2"), _norm(ms, "ur2"), _norm(ms, "grad2")
    mid = (zf[0] * ur[0], zf[1] * ur[1])
    top = (zf[0] * grad[0], zf[1] * grad[1])
    tags = _tags(inst, delta, None)
    return [_verdict("est1-chain-cs", a, mid, delta + 1, **tags),
            _verdict("est1-chain-hardy", (mid[0] * (delta + 1), mid[1] * (delta + 1)), top,
                     (delta + 1) / (d - 1), **tags)]


def parabola_check(inst: ResolventInstance, delta: float, q=None, ev=None,
                   gamma: Optional[float] = None) -> dict:
    """Evaluate the quadratic form in ||grad_H u^-|| with measured norms and
    confirm that nonpositivity implies the root bound."""
    d = inst.d
    if inst.s.lam1 < 0 or not inst.s.in_cone(delta, absolute=True):
        raise C.DomainError("the parabola argument applies inside the cone with lam1 >= 0")
    ev = _evaluator(inst, q, ev)
    ms = ev.moments(inst.lam)
    g = C.gamma_delta(d, delta) if gamma is None else gamma
    sd = math.sqrt(delta)
    A = (8 * d - 6 + g * sd) / (2 * (d - 1))
    B = sd / (2 * g)
    X, Z = _norm(ms, "gm2")[0], _norm(ms, "zf2")[0]
    Xc, Zc = _norm(ms, "gm2")[1], _norm(ms, "zf2")[1]
    Q = X * X - A * Z * X - B * Z * Z
    Qc = Xc * Xc - A * Zc * Xc - B * Zc * Zc
    root = (A / 2 + math.sqrt(A * A / 4 + B)) * Z
    return {"gamma": g, "quadratic": Q, "quad_error": abs(Q - Qc), "grad_minus": X,
            "zf": Z, "root_bound": root, "nonpositive": bool(Q <= 3 * abs(Q - Qc)),
            "implies_root_bound": bool(Q > 0 or X <= root * (1 + 1e-12))}


def koranyi_probe(inst: ResolventInstance, delta: float, q=None, ev=None) -> dict:
    """Exploratory: ||grad_H u^-|| against K_d(delta) ||N f||.  No verdict."""
    d = inst.d
    ev = _evaluator(inst, q, ev)
    lhs = _norm(ev.moments(inst.lam), "gm2")[0]
    rhs = _K(d, delta) * _norm(ev.kmoments(inst.lam), "Nf2")[0]
    return {"member": inst.u.name, "lam": [inst.s.lam1, inst.s.lam2], "delta": delta,
            "lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "asserted": False}


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------

@dataclass
class IdentityResidual:
    identity: str
    lhs: float
    rhs: float
    quad_error: float
    tol: float = IDENTITY_RTOL
    member: Optional[str] = None
    lam: Optional[tuple] = None
    tags: list = field(default_factory=list)
    # largest single term; sides can cancel to zero when the terms do not
    term_scale: float = 0.0

    @property
    def absolute(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def scale(self) -> float:
        return max(abs(self.lhs), abs(self.rhs), self.term_scale)

    @property
    def relative(self) -> float:
        return self.absolute / self.scale if self.scale > 0 else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.absolute <= self.tol * self.scale + 3 * self.quad_error + 1e-14)

    def to_dict(self):
        out = asdict(self)
        out.update(absolute=self.absolute, relative=self.relative, passed=self.passed)
        if self.lam is not None:
            out["lam"] = list(self.lam)
        return out


def _identity(name, inst, lhs, rhs, tags=(), terms=()):
    """lhs, rhs: (fine, coarse) pairs of real numbers; terms: fine-level
    values of the individual integrals."""
    err = abs(lhs[0] - lhs[1]) + abs(rhs[0] - rhs[1])
    return IdentityResidual(name, float(lhs[0]), float(rhs[0]), err, member=inst.u.name,
                            lam=(inst.s.lam1, inst.s.lam2), tags=list(tags),
                            term_scale=max((abs(complex(t)) for t in terms), default=0.0))


def check_identity_am_final(inst: ResolventInstance, q=None, ev=None,
                            commutator: bool = False) -> IdentityResidual:
    """The key identity behind the in-cone estimate (with the potential
    terms when V is present).

    As printed, the identity drops the vertical commutator term and only
    holds when T u = 0; ``commutator=True`` adds it back.
    """
    s = inst.s
    d = inst.d
    if s.lam1 < 0:
        raise C.DomainError("the key identity needs lam1 >= 0")
    if s.lam1 == 0 and s.lam2 != 0:
        raise C.DomainError("lam1 = 0 with lam2 != 0: the identity divides by sqrt(lam1); "
                            "use the outside-cone estimate")
    c = abs(s.lam2) / math.sqrt(s.lam1) if s.lam2 else 0.0
    ev = _evaluator(inst, q, ev)
    lhs, rhs = [], []
    for m in ev.moments(inst.lam):
        terms = [m["gm2"], c * m["rgm2"], (d - 0.5) * c * m["ur1"],
                 (2 * d - 1) * m["am_fu"], c * m["am_rfu"], 2 * m["am_grad"]]
        L = m["gm2"] + c * m["rgm2"] - (d - 0.5) * c * m["ur1"]
        if inst.V is not None:
            L = L + c * m["rVu2"] - m["dVu2"]
            terms += [c * m["rVu2"], m["dVu2"]]
        if commutator:
            L = L + m["comm"]
            terms.append(m["comm"])
        R = -((2 * d - 1) * m["am_fu"] + c * m["am_rfu"] + 2 * m["am_grad"]).real
        lhs.append(float(np.real(L)))
        rhs.append(float(R))
        if len(lhs) == 1:
            fine_terms = terms
    name = "am-finalV" if inst.V is not None else "am-final"
    return _identity(name + ("-H" if commutator else ""), inst, lhs, rhs, terms=fine_terms)


def check_gradumeno(inst: ResolventInstance, n: int = 100, seed: int = 0) -> float:
    """Pointwise |grad u^-|^2 = |grad u|^2 + lam1|u|^2 - Im(2 sgn sqrt(lam1) z/|z|.u* grad u);
    returns the max relative deviation over random points."""
    s = inst.s
    d = inst.d
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 2 * d + 1))
    um = gauge_transform(inst.u, s, -1)
    gm = np.sum(np.abs(horizontal_gradient(um, pts)) ** 2, axis=1)
    u = inst.u(pts)
    g = horizontal_gradient(inst.u, pts)
    r = np.sqrt(np.sum(pts[:, :2 * d] ** 2, axis=1))
    zr = pts[:, :2 * d] / r[:, None]
    th = s.theta
    rhs = (np.sum(np.abs(g) ** 2, axis=1) + abs(s.lam1) * np.abs(u) ** 2
           - np.imag(2 * th * np.sum(zr * g, axis=1) * np.conj(u)))
    return float(np.max(np.abs(gm - rhs) / np.maximum(np.abs(gm), 1e-300)))


def _phi_integrals(ev, name, level) -> dict:
    """lam-independent integrals of one multiplier against the samples.

    Every integrand in the multiplier identities is linear in lam through
    Feff = -L u + lam u, so these suffice for all lam.
    """
    key = ("int", name, level)
    if key in ev._mult:
        return ev._mult[key]
    L = ev.levels[level]
    c = ev.multiplier(name, level)
    U, G, LU, w = L.U, L.G, L.LU, L.w
    Ub = np.conj(U)
    u2 = np.abs(U) ** 2
    out = {"val_u2": w @ (c["val"] * u2),
           "val_g2": w @ (c["val"] * np.sum(np.abs(G) ** 2, axis=1)),
           "val_LU": w @ (c["val"] * LU * Ub),
           "lap_u2": w @ (c["lap"] * u2),
           "lap_LU": w @ (c["lap"] * LU * Ub),
           "grad_G_Ub": w @ (np.sum(c["grad"] * G, axis=1) * Ub),
           "grad_Gb_U": w @ (np.sum(c["grad"] * np.conj(G), axis=1) * U),
           "grad_Gb_LU": w @ (np.sum(c["grad"] * np.conj(G), axis=1) * LU),
           "comm": _commutator(L, c["grad"])}
    if c.get("hess") is not None:
        out["hess"] = float(np.real(w @ np.einsum("ni,nij,nj->n", np.conj(G), c["hess"], G)))
        out["lap2_u2"] = w @ (c["lap2"] * u2)
    ev._mult[key] = out
    return out


def check_multiplier_identities(inst: ResolventInstance, phi1: str = "1", phi2: str = "1",
                                phi3: str = "|z|^2", q=None, ev=None) -> dict:
    """Residuals of the three multiplier identities, their combination, and
    the reduced identity for phi3 = |z|^2.

    The identities are reported as written ("fond3", "combination",
    "comp1") and with the vertical commutator term restored ("-H").  The
    written third identity also carries the lam2 term with the opposite
    sign to the one its own combination uses; the "-H" form and the
    combination use the sign that follows from the weak formulation.
    """
    d = inst.d
    s = inst.s
    lam = inst.lam
    l1, l2 = s.lam1, s.lam2
    ev = _evaluator(inst, q, ev)
    p1 = _resolve_phi(1, phi1, d, s)
    p2 = _resolve_phi(2, phi2, d, s)
    p3 = _resolve_phi(3, phi3, d, s)
    keys = ("fond1", "fond2", "fond3", "fond3-H", "combination", "combination-H")
    parts = {k: ([], []) for k in keys}
    mags = {}
    for lvl in range(len(ev.levels)):
        f1, f2, f3 = p1[1], p2[1], p3[1]
        a = _phi_integrals(ev, p1[0], lvl)
        b = _phi_integrals(ev, p2[0], lvl)
        c = _phi_integrals(ev, p3[0], lvl)
        # int Feff * X = -int L u * X + lam int u * X
        t_1 = [f1 * 0.5 * a["lap_u2"], f1 * a["val_g2"], f1 * l1 * a["val_u2"]]
        l_1 = -t_1[0] - t_1[1] + t_1[2]
        r_1 = f1 * np.real(-a["val_LU"] + lam * a["val_u2"])
        t_2 = [f2 * np.imag(b["grad_G_Ub"]), f2 * l2 * b["val_u2"]]
        l_2 = -t_2[0] + t_2[1]
        r_2 = f2 * np.imag(-b["val_LU"] + lam * b["val_u2"])
        t_3 = [f3 * 0.25 * c["lap2_u2"], f3 * c["hess"]]
        core = t_3[1] - t_3[0]
        skew = f3 * l2 * np.imag(c["grad_Gb_U"])
        comm = f3 * c["comm"]
        t_r3 = [f3 * 0.5 * np.real(-c["lap_LU"] + lam * c["lap_u2"]),
                f3 * np.real(-c["grad_Gb_LU"] + lam * c["grad_Gb_U"])]
        r_3 = t_r3[0] - t_r3[1]
        rows = {"fond1": (l_1, r_1), "fond2": (l_2, r_2), "fond3": (core - skew, r_3),
                "fond3-H": (core + skew + comm, r_3)}
        if l1 >= 0:
            sq = math.sqrt(l1)
            base = l_1 + sq * l_2 + core + skew
            rhs = r_1 + sq * r_2 + r_3
            rows["combination"] = (base, rhs)
            rows["combination-H"] = (base + comm, rhs)
        for k, (lv, rv) in rows.items():
            parts[k][0].append(float(np.real(lv)))
            parts[k][1].append(float(np.real(rv)))
        if lvl == 0:
            # the right sides are built from int L u * X and lam int u * X
            m1 = t_1 + [f1 * a["val_LU"], f1 * lam * a["val_u2"]]
            m2 = t_2 + [f2 * b["val_LU"], f2 * lam * b["val_u2"]]
            m3 = t_3 + t_r3 + [skew, f3 * c["lap_LU"], f3 * c["grad_Gb_LU"],
                               f3 * lam * c["grad_Gb_U"]]
            mags = {"fond1": m1, "fond2": m2, "fond3": m3, "fond3-H": m3 + [comm],
                    "combination": m1 + m2 + m3, "combination-H": m1 + m2 + m3 + [comm]}
    tags = [f"phi1={phi1}", f"phi2={phi2}", f"phi3={phi3}"]
    out = {k: _identity(k, inst, *v, tags=tags, terms=mags[k])
           for k, v in parts.items() if v[0]}
    if l1 >= 0:
        out["comp1"] = _comp1(inst, ev)
        out["comp1-H"] = _comp1(inst, ev, commutator=True)
    return out


def _comp1(inst, ev, commutator: bool = False) -> IdentityResidual:
    d = inst.d
    s = inst.s
    l1, l2 = s.lam1, s.lam2
    sq = math.sqrt(l1)
    sg = s.sign2
    lhs, rhs = [], []
    for m in ev.moments(inst.lam):
        terms = [m["grad2"], l1 * m["u2"], 2 * sq * np.imag(m["u_radial"]),
                 2 * sq * abs(l2) * m["ru2"], 2 * l2 * np.imag(m["u_zgrad"]),
                 (1 - 2 * d) * m["feffu"].real, 2 * sq * m["rfeffu"].imag,
                 2 * m["feff_zgrad"].real]
        L = (m["grad2"] + l1 * m["u2"] - 2 * sg * sq * np.imag(m["u_radial"])
             + 2 * sq * abs(l2) * m["ru2"] - 2 * l2 * np.imag(m["u_zgrad"]))
        if commutator:
            L = L + m["comm"]
            terms.append(m["comm"])
        R = ((1 - 2 * d) * m["feffu"].real + 2 * sg * sq * m["rfeffu"].imag
             - 2 * m["feff_zgrad"].real)
        lhs.append(float(np.real(L)))
        rhs.append(float(R))
        if len(lhs) == 1:
            fine_terms = terms
    return _identity("comp1" + ("-H" if commutator else ""), inst, lhs, rhs,
                     terms=fine_terms)


def identity_suite(inst: ResolventInstance, q=None, ev=None) -> list:
    """All identities applicable to the instance."""
    ev = _evaluator(inst, q, ev)
    s = inst.s
    out = list(check_multiplier_identities(inst, "1", "1", "|z|^2", ev=ev).values())
    if s.lam1 >= 0:
        comb = check_multiplier_identities(inst, "-L(phi3)/(4d)",
                                           "sgn(lam2) grad(phi3).z/|z|", "|z|^2", ev=ev)
        out += [comb["combination"], comb["combination-H"]]
        if s.lam1 > 0:
            out.append(check_multiplier_identities(
                inst, "-(|lam2|/sqrt(lam1))|z|", "1", "|z|^2", ev=ev)["fond1"])
        if not (s.lam1 == 0 and s.lam2 != 0):
            out.append(check_identity_am_final(inst, ev=ev))
            out.append(check_identity_am_final(inst, ev=ev, commutator=True))
    return out


# --------------------------------------------------------------------------
# batch suites
# --------------------------------------------------------------------------

# identities as written, which omit the vertical commutator term
AS_WRITTEN = frozenset({"fond3", "combination", "comp1", "am-final", "am-finalV"})


@dataclass
class SuiteReport:
    verdicts: list
    identities: list
    chains: list
    parabolas: list
    probes: list
    meta: dict

    @property
    def verdicts_passed(self) -> bool:
        return all(v.passed for v in self.verdicts + self.chains)

    @property
    def identities_passed(self) -> bool:
        return all(r.passed for r in self.identities)

    @property
    def passed(self) -> bool:
        return (self.verdicts_passed and self.identities_passed
                and all(p["nonpositive"] and p["implies_root_bound"] for p in self.parabolas))

    def max_identity_residual(self, names=None) -> float:
        return max((r.relative for r in self.identities
                    if names is None or r.identity in names), default=0.0)

    def identity_table(self) -> dict:
        """Per identity name: count, failures, max relative residual."""
        out = {}
        for r in self.identities:
            e = out.setdefault(r.identity, {"count": 0, "failed": 0, "max_relative": 0.0})
            e["count"] += 1
            e["failed"] += not r.passed
            e["max_relative"] = max(e["max_relative"], r.relative)
        return out

    @property
    def corrected_identities_passed(self) -> bool:
        """All identities, with the commutator-corrected form standing in
        for each written one that drops it."""
        return all(r.passed for r in self.identities if r.identity not in AS_WRITTEN)

    def to_dict(self) -> dict:
        return {"meta": self.meta, "passed": self.passed,
                "corrected_identities_passed": self.corrected_identities_passed,
                "identity_table": self.identity_table(),
                "verdicts": [v.to_dict() for v in self.verdicts],
                "chains": [v.to_dict() for v in self.chains],
                "identities": [r.to_dict() for r in self.identities],
                "parabolas": self.parabolas, "koranyi_probe": self.probes}


def resolvent_suite(d: int = 2, family: Optional[Sequence[Field]] = None,
                    n_members: int = 20, lams=None, deltas=None,
                    q: Optional[Quadrature] = None, seed: int = 0, V=None,
                    b: Optional[float] = None, b1: Optional[float] = None,
                    b2: Optional[float] = None, identities: bool = True) -> SuiteReport:
    """Every (member, lam, delta) verdict, plus identities and chain checks.

    Without V the free-case estimates are checked; with V, the
    positive-potential estimates when ``b`` is given and the real-potential
    estimates when ``b1`` and ``b2`` are given.
    """
    q = q or Quadrature.from_preset(d, "standard")
    family = list(family) if family is not None else builtin_family(d, seed, n_members)
    lams = tuple(lams) if lams else lambda_grid(d)
    deltas = tuple(deltas) if deltas else default_deltas(d)
    verdicts, ids, chains, parabolas, probes = [], [], [], [], []
    for u in family:
        ev = Evaluator(u, V, q)
        for lam in lams:
            inst = make_instance(u, lam, V)
            for delta in deltas:
                if V is None:
                    verdicts += verify_thm1(inst, delta, ev=ev)
                    if inst.s.lam1 >= 0 and inst.s.in_cone(delta, absolute=True):
                        parabolas.append({"member": u.name, "lam": [inst.s.lam1, inst.s.lam2],
                                          "delta": delta, **parabola_check(inst, delta, ev=ev)})
                        probes.append(koranyi_probe(inst, delta, ev=ev))
                else:
                    if b is not None:
                        verdicts += verify_thm_pp(inst, delta, b, ev=ev)
                    if b1 is not None and b2 is not None:
                        verdicts += verify_thm16(inst, delta, b1, b2, ev=ev)
                chains += est1_chain(inst, delta, ev=ev)
            if identities:
                ids += identity_suite(inst, ev=ev)
    meta = {"d": d, "members": [u.name for u in family],
            "lams": [[complex(l).real, complex(l).imag] for l in lams],
            "deltas": list(deltas), "quadrature": asdict(q.spec),
            "potential": V.to_dict() if V is not None and hasattr(V, "to_dict") else None,
            "b": b, "b1": b1, "b2": b2}
    return SuiteReport(verdicts, ids, chains, parabolas, probes, meta)
