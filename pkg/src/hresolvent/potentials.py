"""Subordination and repulsivity bounds for concrete potentials, and the
eigenvalue-absence decisions built on them.

Bounds are named after the quantities they control, for all test functions
psi:

* ``b``:  int |z|^2 |V|^2 |psi|^2          <= b^2  int |grad_H psi|^2
* ``b1``: int (Re V)_- |psi|^2             <= b1^2 int |grad_H psi|^2
* ``b2``: int [d_r(|z| Re V)]_+ |psi|^2    <= b2^2 int |grad_H psi|^2
* ``b3``: int |z|^2 |Im V|^2 |psi|^2       <= b3^2 int |grad_H psi|^2

Analytic mode majorizes each weight pointwise by K/|z|^2 (horizontal Hardy,
constant 1/(d-1)^2) or K|z|^2/N^4 (Koranyi Hardy, constant 1/d^2).  The
quotient-sup mode only gives empirical lower bounds over a family.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import constants as C
from .fields import Field, builtin_family
from .hgroup import as_points, hgrad_from_jet, radial_derivative
from .quadrature import Quadrature

FORMS = ("power", "koranyi-power", "gaussian")
BOUNDS = ("b", "b1", "b2", "b3")

# maxima of u(1-2u)e^{-u} on [0, 1/2] and of u(2u-1)e^{-u} on [1/2, inf)
_U_PLUS = (5 - math.sqrt(17)) / 4
_U_MINUS = (5 + math.sqrt(17)) / 4
_G_PLUS = _U_PLUS * (1 - 2 * _U_PLUS) * math.exp(-_U_PLUS)
_G_MINUS = _U_MINUS * (2 * _U_MINUS - 1) * math.exp(-_U_MINUS)


@dataclass(frozen=True)
class Term:
    """c |z|^-alpha, c N^-alpha, or c exp(-a |z|^2)."""

    form: str
    coef: complex
    alpha: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown potential form {self.form!r}")
        if self.form == "gaussian" and self.a <= 0:
            raise ValueError("gaussian rate must be positive")

    def _base(self, r, t):
        if self.form == "power":
            return r ** -self.alpha
        if self.form == "koranyi-power":
            return (r ** 4 + t * t) ** (-self.alpha / 4)
        return np.exp(-self.a * r * r)

    def radial_base(self, r, t):
        """d_r(|z| * base), with d_r = (z/|z|) . grad_H."""
        if self.form == "power":
            return (1 - self.alpha) * r ** -self.alpha
        if self.form == "koranyi-power":
            n4 = r ** 4 + t * t
            # d_r N = |z|^3 / N^3
            return n4 ** (-self.alpha / 4) * (1 - self.alpha * r ** 4 / n4)
        return np.exp(-self.a * r * r) * (1 - 2 * self.a * r * r)

    def to_dict(self):
        c = complex(self.coef)
        out = {"form": self.form, "coefficient": [c.real, c.imag]}
        if self.form == "gaussian":
            out["rate"] = self.a
        else:
            out["exponent"] = self.alpha
        return out


class Potential:
    """A complex potential V(z, t).

    Either a sum of recognized terms (analytic bounds available) or an
    arbitrary callable ``fn(pts) -> values`` (quotient-sup mode only).
    """

    def __init__(self, terms=(), fn: Optional[Callable] = None, name: str = "V",
                 regularity_assumed: bool = True):
        self.terms = tuple(terms)
        self.fn = fn
        self.name = name
        # local Sobolev regularity is a hypothesis recorded, not checked
        self.regularity_assumed = regularity_assumed

    @property
    def analytic(self) -> bool:
        return self.fn is None

    @classmethod
    def zero(cls):
        return cls((), name="0")

    @classmethod
    def power(cls, c, alpha):
        return cls([Term("power", complex(c), alpha)], name=f"{c}*|z|^-{alpha}")

    @classmethod
    def koranyi_power(cls, c, alpha):
        return cls([Term("koranyi-power", complex(c), alpha)], name=f"{c}*N^-{alpha}")

    @classmethod
    def gaussian(cls, c, a=1.0):
        return cls([Term("gaussian", complex(c), a=a)], name=f"{c}*exp(-{a}|z|^2)")

    def __add__(self, other: "Potential") -> "Potential":
        if not (self.analytic and other.analytic):
            f1, f2 = self, other
            return Potential(fn=lambda p: f1(p) + f2(p), name=f"{self.name}+{other.name}")
        return Potential(self.terms + other.terms, name=f"{self.name}+{other.name}")

    def _rt(self, pts):
        pts = as_points(pts)
        d = (pts.shape[1] - 1) // 2
        return np.sqrt(np.sum(pts[:, :2 * d] ** 2, axis=1)), pts[:, -1]

    def __call__(self, pts):
        if self.fn is not None:
            return np.asarray(self.fn(as_points(pts)), dtype=complex)
        r, t = self._rt(pts)
        out = np.zeros(len(r), dtype=complex)
        for term in self.terms:
            out += term.coef * term._base(r, t)
        return out

    def radial_real(self, pts, h: Optional[float] = None):
        """d_r(|z| Re V), exact for recognized terms, stencil otherwise."""
        pts = as_points(pts)
        if self.fn is None:
            r, t = self._rt(pts)
            out = np.zeros(len(r))
            for term in self.terms:
                out += term.coef.real * term.radial_base(r, t)
            return out
        d = (pts.shape[1] - 1) // 2

        def rz(p):
            p = as_points(p)
            return np.sqrt(np.sum(p[:, :2 * d] ** 2, axis=1)) * self(p).real

        return radial_derivative(rz, pts, h=h)

    def to_dict(self):
        if self.fn is not None:
            return {"form": "callable", "name": self.name}
        if len(self.terms) == 1:
            return self.terms[0].to_dict()
        return {"form": "sum", "terms": [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, spec: dict) -> "Potential":
        """Parse the JSON potential grammar."""
        form = spec.get("form")
        if form == "sum":
            out = cls.zero()
            for sub in spec["terms"]:
                out = out + cls.from_dict(sub)
            return out
        if form == "zero":
            return cls.zero()
        coef = spec.get("coefficient", 1.0)
        if isinstance(coef, (list, tuple)):
            coef = complex(coef[0], coef[1])
        if form in ("power", "koranyi-power"):
            term = Term(form, complex(coef), float(spec["exponent"]))
        elif form == "gaussian":
            term = Term(form, complex(coef), a=float(spec.get("rate", 1.0)))
        else:
            raise ValueError(f"unknown potential form {form!r}")
        return cls([term], name=json.dumps(spec, sort_keys=True))

    @classmethod
    def from_json(cls, text: str) -> "Potential":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# analytic bounds
# --------------------------------------------------------------------------

def _hardy_bound(d, K_z=0.0, K_n=0.0):
    """Square of a bound for int w |psi|^2 when w <= K_z/|z|^2 + K_n |z|^2/N^4."""
    return K_z / (d - 1) ** 2 + K_n / d ** 2


def _term_bounds(term: Term, d: int) -> dict:
    """Squared bounds (b^2, b1^2, b2^2, b3^2) for one term; inf if uncertifiable."""
    inf = math.inf
    c = complex(term.coef)
    re, im, mod = c.real, c.imag, abs(c)
    out = {}
    if term.form == "power":
        two = term.alpha == 2
        out["b"] = _hardy_bound(d, mod ** 2) if two else (0.0 if mod == 0 else inf)
        out["b3"] = _hardy_bound(d, im ** 2) if two else (0.0 if im == 0 else inf)
        out["b1"] = 0.0 if re >= 0 else (_hardy_bound(d, -re) if two else inf)
        slope = re * (1 - term.alpha)
        out["b2"] = 0.0 if slope <= 0 else (_hardy_bound(d, slope) if two else inf)
    elif term.form == "koranyi-power":
        two = term.alpha == 2
        # |z|^2 N^-4 is the Koranyi Hardy weight itself
        out["b"] = _hardy_bound(d, K_n=mod ** 2) if two else (0.0 if mod == 0 else inf)
        out["b3"] = _hardy_bound(d, K_n=im ** 2) if two else (0.0 if im == 0 else inf)
        # N^-2 <= |z|^-2
        out["b1"] = 0.0 if re >= 0 else (_hardy_bound(d, -re) if two else inf)
        if re == 0:
            out["b2"] = 0.0
        elif re < 0 and term.alpha <= 1:
            out["b2"] = 0.0
        elif two:
            # |1 - 2 |z|^4/N^4| <= 1 and N^-2 <= |z|^-2
            out["b2"] = _hardy_bound(d, abs(re))
        else:
            out["b2"] = inf
    else:
        a = term.a
        # sup_s s^2 e^{-2as} = 1/(a e)^2
        out["b"] = _hardy_bound(d, mod ** 2 / (a * math.e) ** 2)
        out["b3"] = _hardy_bound(d, im ** 2 / (a * math.e) ** 2)
        # sup_s s e^{-as} = 1/(a e)
        out["b1"] = 0.0 if re >= 0 else _hardy_bound(d, -re / (a * math.e))
        if re == 0:
            out["b2"] = 0.0
        else:
            g = _G_PLUS if re > 0 else _G_MINUS
            out["b2"] = _hardy_bound(d, abs(re) * g / a)
    return out


def analytic_bounds(V: Potential, d: int) -> dict:
    """Certified upper bounds (b, b1, b2, b3); inf where no certificate exists.

    Sums are handled by the triangle inequality: b and b3 add, while the
    squares of b1 and b2 add since the negative/positive parts are subadditive.
    """
    if d < 2:
        raise C.DomainError("horizontal Hardy majorization needs d >= 2")
    if not V.analytic:
        return {k: math.inf for k in BOUNDS}
    out = {"b": 0.0, "b1": 0.0, "b2": 0.0, "b3": 0.0}
    for term in V.terms:
        tb = _term_bounds(term, d)
        out["b"] += math.sqrt(tb["b"])
        out["b3"] += math.sqrt(tb["b3"])
        out["b1"] += tb["b1"]
        out["b2"] += tb["b2"]
    out["b1"] = math.sqrt(out["b1"])
    out["b2"] = math.sqrt(out["b2"])
    return out


# --------------------------------------------------------------------------
# empirical bounds
# --------------------------------------------------------------------------

def _weights(V: Potential, pts, r):
    v = V(pts)
    return {"b": r * r * np.abs(v) ** 2,
            "b1": np.maximum(-v.real, 0.0),
            "b2": np.maximum(V.radial_real(pts), 0.0),
            "b3": r * r * v.imag ** 2}


def quotient_sup(V: Potential, family, q: Quadrature) -> dict:
    """max over the family of (int w |psi|^2 / int |grad_H psi|^2)^(1/2)."""
    best = {k: 0.0 for k in BOUNDS}
    arg = {k: None for k in BOUNDS}
    for f in family:
        def integrand(pts, r):
            jet = f.jet(pts, 1)
            g = np.sum(np.abs(hgrad_from_jet(jet, pts)) ** 2, axis=1)
            m = np.abs(jet.val) ** 2
            w = _weights(V, pts, r)
            return np.stack([w[k] * m for k in BOUNDS] + [g], axis=1)

        fine, _ = q.integrate_many(integrand, f.decay)
        vals = np.real(fine)
        for i, k in enumerate(BOUNDS):
            val = math.sqrt(max(vals[i], 0.0) / vals[-1])
            if val > best[k]:
                best[k], arg[k] = val, f.name
    return {"values": best, "members": arg}


@dataclass
class BoundPair:
    upper: float
    lower: float

    @property
    def certified(self) -> bool:
        return math.isfinite(self.upper)

    def to_dict(self):
        return {"upper": self.upper if self.certified else None, "lower": self.lower,
                "certified": self.certified}


@dataclass
class PotentialBounds:
    """Certified upper / empirical lower pairs for b, b1, b2, b3."""

    d: int
    b: BoundPair
    b1: BoundPair
    b2: BoundPair
    b3: BoundPair
    method: str
    potential: dict = field(default_factory=dict)
    regularity_assumed: bool = True

    def pair(self, name) -> BoundPair:
        return getattr(self, name)

    def sound(self, tol: float = 1e-9) -> bool:
        return all(self.pair(k).lower <= self.pair(k).upper * (1 + tol) + tol for k in BOUNDS)

    def to_dict(self):
        return {"d": self.d, "method": self.method, "potential": self.potential,
                "regularity_assumed": self.regularity_assumed,
                **{k: self.pair(k).to_dict() for k in BOUNDS}}


def bound_weighted(V: Potential, d: int, family=None, q: Optional[Quadrature] = None,
                   mode: str = "analytic") -> PotentialBounds:
    """Bounds for V; the lower halves come from the family quotient supremum."""
    if mode not in ("analytic", "quotient-sup"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "analytic" and not V.analytic:
        mode = "quotient-sup"
    upper = analytic_bounds(V, d) if mode == "analytic" else {k: math.inf for k in BOUNDS}
    if family is None and q is None and V.analytic and not V.terms:
        lower = {k: 0.0 for k in BOUNDS}
    else:
        q = q or Quadrature.from_preset(d, "fast")
        family = builtin_family(d) if family is None else family
        lower = quotient_sup(V, family, q)["values"]
    return PotentialBounds(d, *(BoundPair(upper[k], lower[k]) for k in BOUNDS), mode,
                           V.to_dict(), V.regularity_assumed)


# --------------------------------------------------------------------------
# decisions
# --------------------------------------------------------------------------

def thm_V1_threshold(d: int) -> float:
    return 1.0 / ((d - 1) * C.kappa_d(d, check=False).kappa_d)


def thm_V1_decision(d: int, b: float) -> bool:
    return b < thm_V1_threshold(d)


@dataclass
class DecisionReport:
    theorem: str
    d: int
    hypothesis_met: bool
    certified: bool
    details: dict

    def to_dict(self):
        return asdict(self)


def check_thm_V1(bounds: PotentialBounds) -> DecisionReport:
    """Point-spectrum absence through b < 1/((d-1) kappa_d)."""
    d = bounds.d
    thr = thm_V1_threshold(d)
    certified = bounds.b.certified
    b = bounds.b.upper if certified else bounds.b.lower
    return DecisionReport("V1", d, b < thr, certified, {
        "b": b, "threshold": thr, "margin": thr - b,
        "subordination_constant": b / (d - 1),
        "note": None if certified else "empirical b only; decision is non-certifying",
    })


def check_thm_V2(bounds: PotentialBounds) -> DecisionReport:
    """Point-spectrum absence for complex V through (b1, b2, b3).

    ``hypothesis_met`` uses the bound as printed.  The largest root of the
    quadratic that produces it is reported alongside, together with the
    admissible window for the cone opening.
    """
    d = bounds.d
    certified = all(bounds.pair(k).certified for k in ("b1", "b2", "b3"))
    val = {k: (bounds.pair(k).upper if certified else bounds.pair(k).lower)
           for k in ("b1", "b2", "b3")}
    b1, b2, b3 = val["b1"], val["b2"], val["b3"]
    details = dict(val)
    if not (b1 < 1 and b2 < 1):
        details.update(reason="b1 or b2 not below 1")
        return DecisionReport("V2", d, False, certified, details)
    printed = C.b3_bound(d, b1, b2)
    root = C.b3_root(d, b1, b2)
    try:
        w = C.delta_tilde_window(d, b1, b2, b3)
        window = {"lower": w.lower, "upper": w.upper, "empty": w.empty}
    except C.DegenerateInputError:
        window = {"lower": 0.0, "upper": math.inf, "empty": False}
    thr = thm_V1_threshold(d)
    details.update(
        b3_bound=printed, b3_root=root, margin=printed - b3,
        root_condition_met=b3 < root,
        window=window,
        well_defined=b1 * b1 + b2 * b2 + b3 / (d - 1) < 1,
        V1_threshold=thr,
        bound_exceeds_V1_threshold=printed > thr,
        root_exceeds_V1_threshold=root > thr,
    )
    return DecisionReport("V2", d, b3 < printed, certified, details)


# --------------------------------------------------------------------------
# repulsivity and the Hardy chain for Im V
# --------------------------------------------------------------------------

def radial_repulsivity_profile(V: Potential, d: int, n_rays: int = 16, n_r: int = 64,
                               t_levels=(-2.0, -0.5, 0.0, 0.5, 2.0), r_max: float = 4.0,
                               eps_axis: float = 1e-8, seed: int = 0) -> dict:
    """Sample d_r(|z| Re V) along horizontal rays at several heights."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_rays, 2 * d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rs = np.linspace(0.0, r_max, n_r + 1)[1:]
    rs = rs[rs >= eps_axis]
    pts = np.zeros((len(t_levels), n_rays, len(rs), 2 * d + 1))
    pts[..., :2 * d] = dirs[None, :, None, :] * rs[None, None, :, None]
    pts[..., -1] = np.asarray(t_levels)[:, None, None]
    vals = V.radial_real(pts.reshape(-1, 2 * d + 1)).reshape(pts.shape[:3])
    pos = np.maximum(vals, 0.0)
    # linear interpolation of each sign change along each ray
    v0, v1 = vals[..., :-1], vals[..., 1:]
    hit = v0 * v1 < 0
    cross = rs[:-1] + (rs[1:] - rs[:-1]) * v0 / np.where(hit, v0 - v1, 1.0)
    changes = cross[hit]
    return {"r": rs.tolist(), "t_levels": list(t_levels),
            "max_positive_part": float(pos.max()),
            "max_positive_part_by_r": pos.max(axis=(0, 1)).tolist(),
            "repulsive": bool(np.all(vals <= 1e-12)),
            "sign_change_range": [float(changes.min()), float(changes.max())] if changes.size else [],
            "values": vals}


def useful_chain(V: Potential, psi: Field, b3: float, q: Quadrature) -> dict:
    """Arithmetic check of int |Im V||psi|^2 <= (b3/(d-1)) int |grad_H psi|^2
    for one psi, given the weighted bound holds for it."""
    d = psi.d

    def integrand(pts, r):
        jet = psi.jet(pts, 1)
        m = np.abs(jet.val) ** 2
        iv = np.abs(V(pts).imag)
        g = np.sum(np.abs(hgrad_from_jet(jet, pts)) ** 2, axis=1)
        return np.stack([iv * m, r * r * iv * iv * m, m / (r * r), g], axis=1)

    fine, coarse = q.integrate_many(integrand, psi.decay)
    lhs, weighted, hardy_lhs, grad = np.real(fine)
    err = float(np.max(np.abs(np.real(fine) - np.real(coarse))))
    premise = weighted <= b3 * b3 * grad + 3 * err
    cs = math.sqrt(weighted * hardy_lhs)
    return {"premise": bool(premise), "lhs": lhs, "cauchy_schwarz": cs,
            "rhs": b3 / (d - 1) * grad, "quad_error": err,
            "holds": bool(lhs <= cs + 3 * err and (not premise or lhs <= b3 / (d - 1) * grad + 3 * err))}


def acceptance_potentials() -> dict:
    """The four reference potentials of the perturbed suite."""
    return {"zero": Potential.zero(),
            "power+": Potential.power(0.1, 2),
            "power-": Potential.power(-0.05, 2),
            "gaussian": Potential.gaussian(0.1, 1.0)}
