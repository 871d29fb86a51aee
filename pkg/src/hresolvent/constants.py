"""Explicit constants of the uniform resolvent estimates.

Every constant is computed from its defining equation and, where two or
more characterisations exist, cross-checked against the others.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

XTOL = 1e-15
CONSISTENCY_TOL = 1e-9


class ConsistencyError(ArithmeticError):
    """Independent characterisations of a constant disagree."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values or {}


class DomainError(ValueError):
    """Parameter outside the admissible range."""


class DegenerateInputError(ValueError):
    """Input for which the requested object is trivial or undefined."""


def _check_d(d):
    if int(d) != d or d < 2:
        raise DomainError(f"d must be an integer >= 2, got {d!r}")


def _check_unit(name, b):
    if not 0 <= b < 1:
        raise DomainError(f"{name} must lie in [0, 1), got {b!r}")


def _root(fn, lo, hi, grow=2.0, max_grow=200):
    """Bracketed root with rightward bracket expansion."""
    flo = fn(lo)
    for _ in range(max_grow):
        if np.sign(fn(hi)) != np.sign(flo):
            break
        hi *= grow
    else:
        raise ArithmeticError("no sign change found")
    return brentq(fn, lo, hi, xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


# --------------------------------------------------------------------------
# free constants
# --------------------------------------------------------------------------

def cubic(d, delta, g):
    return math.sqrt(delta) * g ** 3 + (4 * d - 3) * g ** 2 - (d - 1) ** 2


def gamma_delta(d: int, delta: float) -> float:
    """Unique positive root of sqrt(delta) g^3 + (4d-3) g^2 - (d-1)^2."""
    _check_d(d)
    if delta < 0:
        raise DomainError("delta must be >= 0")
    hi = (d - 1) / math.sqrt(4 * d - 3)
    if delta == 0:
        return hi
    return _root(lambda g: cubic(d, delta, g), 0.0, hi)


def kd_objective(d, delta, gamma, b=0.0):
    """The bracket minimised over gamma in K_d (b = 0) and K_{d,b}."""
    beta = 1.0 - b * b
    A = 8 * d - 6 + gamma * math.sqrt(delta)
    c = 4 * (d - 1) * beta
    return A / c + math.sqrt((A / c) ** 2 + math.sqrt(delta) / (2 * gamma * beta))


def _refine(fn, a, b, c):
    """Golden-section on a strict bracket a < b < c, bounded Brent when the
    bracket is not strict (flat stretches of the scan)."""
    fa, fb, fc = fn(a), fn(b), fn(c)
    if fb < fa and fb < fc:
        res = minimize_scalar(fn, bracket=(a, b, c), method="golden",
                              options={"xtol": 1e-12})
    else:
        res = minimize_scalar(fn, bounds=(a, c), method="bounded",
                              options={"xatol": 1e-12})
    if fb <= res.fun:
        return b, fb
    return float(res.x), float(res.fun)


def _golden_min(fn, lo=1e-8, hi=1e8, n=161):
    """Log-grid bracket scan followed by golden-section refinement."""
    grid = np.geomspace(lo, hi, n)
    vals = np.array([fn(g) for g in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == n - 1:
        return float(grid[i]), float(vals[i])
    x, v = _refine(lambda s: fn(math.exp(s)), math.log(grid[i - 1]),
                   math.log(grid[i]), math.log(grid[i + 1]))
    return math.exp(x), v


def Kd_impdef_residual(d, delta, K):
    return math.sqrt(delta * (d - 1)) * K ** -1.5 + (4 * d - 3) / K - (d - 1)


@dataclass
class KdValue:
    value: float
    via_min: float
    argmin: float
    impdef_residual: float


def K_d(d: int, delta: float, check: bool = True) -> float:
    """K_d(delta) = (d-1) / gamma_delta^2, cross-checked (see K_d_detail)."""
    return K_d_detail(d, delta, check).value


def K_d_detail(d: int, delta: float, check: bool = True) -> KdValue:
    _check_d(d)
    if delta <= 0:
        raise DomainError("delta must be > 0")
    K = (d - 1) / gamma_delta(d, delta) ** 2
    gmin, vmin = _golden_min(lambda g: kd_objective(d, delta, g))
    res = Kd_impdef_residual(d, delta, K)
    out = KdValue(K, vmin, gmin, res)
    if check and (abs(vmin - K) > CONSISTENCY_TOL * max(1.0, K)
                  or abs(res) > CONSISTENCY_TOL):
        raise ConsistencyError("K_d characterisations disagree", asdict(out))
    return out


def delta_star_lhs(d, delta):
    return delta ** 2 / math.sqrt(1 + delta) + 4 * delta - 1.0 / (d - 1)


def delta_star(d: int) -> float:
    """Crossing point of the two branches defining kappa_d."""
    _check_d(d)
    return _root(lambda x: delta_star_lhs(d, x), 0.0, 1.0 / (4 * (d - 1)))


def kappanueva_residual(d, kappa):
    k = 1.0 / kappa
    return k * k / math.sqrt((d - 1) ** 2 - k) + (4 * d - 3) * k - (d - 1) ** 2


def kappa_implicit(d: int) -> float:
    """kappa_d as the root of its implicit equation in k = 1/kappa."""
    _check_d(d)
    top = (d - 1) ** 2

    def fn(k):
        return k * k / math.sqrt(top - k) + (4 * d - 3) * k - top

    k = brentq(fn, 0.0, top * (1 - 1e-15), xtol=XTOL, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return 1.0 / k


def branch_decreasing(d, delta, b1=0.0):
    return (1 + 1 / delta) / ((d - 1) ** 2 * (1 - b1 * b1))


@dataclass
class MinMax:
    """min over delta of max(decreasing branch, increasing branch)."""

    value: float
    delta: float
    gap: float


def _minmax(dec, inc, lo=1e-10, hi=1e6, n=121) -> MinMax:
    grid = np.geomspace(lo, hi, n)
    diff = np.array([dec(x) - inc(x) for x in grid])
    idx = np.nonzero(np.diff(np.sign(diff)))[0]
    if len(idx) == 0:
        raise ArithmeticError("branches do not cross on the scanned range")
    i = int(idx[0])
    x = brentq(lambda s: dec(math.exp(s)) - inc(math.exp(s)),
               math.log(grid[i]), math.log(grid[i + 1]), xtol=1e-14, rtol=1e-15)
    x = math.exp(x)
    a, b = dec(x), inc(x)
    return MinMax(max(a, b), x, abs(a - b))


def kappa_minmax(d: int) -> MinMax:
    _check_d(d)
    return _minmax(lambda x: branch_decreasing(d, x),
                   lambda x: K_d(d, x, check=False) / (d - 1))


@dataclass
class ConstantsReport:
    d: int
    delta_star: float
    gamma_delta_star: float
    gamma_identity: float
    kappa_d: float
    kappa_def2: float
    kappa_implicit: float
    kappa_minmax: float
    residuals: dict = field(default_factory=dict)
    lower_bound: float = 0.0
    threshold: float = 0.0
    threshold_identity_residual: float = 0.0

    def to_dict(self):
        return asdict(self)


def threshold_identity_residual(d, kappa, dstar):
    c = 1.0 / ((d - 1) * kappa)
    return c ** 1.5 * math.sqrt(dstar) / math.sqrt(d - 1) + c * (4 * d - 3) / (d - 1) - 1.0


def kappa_d(d: int, check: bool = True) -> ConstantsReport:
    """kappa_d three ways, plus delta_*, gamma_{delta_*} and the bounds."""
    _check_d(d)
    ds = delta_star(d)
    k1 = branch_decreasing(d, ds)
    k2 = kappa_implicit(d)
    k3 = kappa_minmax(d).value
    g = gamma_delta(d, ds)
    res = {"def2_implicit": abs(k1 - k2), "def2_minmax": abs(k1 - k3),
           "implicit_minmax": abs(k2 - k3),
           "def2_K": abs(k1 - K_d(d, ds, check=False) / (d - 1)),
           "kappanueva": abs(kappanueva_residual(d, k1)),
           "delta_star": abs(delta_star_lhs(d, ds))}
    rep = ConstantsReport(
        d=d, delta_star=ds, gamma_delta_star=g,
        gamma_identity=(d - 1) * math.sqrt(ds / (1 + ds)),
        kappa_d=k1, kappa_def2=k1, kappa_implicit=k2, kappa_minmax=k3,
        residuals=res, lower_bound=4 / (d - 1) + 1 / (d - 1) ** 2,
        threshold=1.0 / ((d - 1) * k1),
        threshold_identity_residual=threshold_identity_residual(d, k1, ds))
    if check:
        worst = max(res["def2_implicit"], res["def2_minmax"], res["implicit_minmax"])
        if worst > CONSISTENCY_TOL * max(1.0, k1):
            raise ConsistencyError("kappa_d characterisations disagree", rep.to_dict())
    return rep


# --------------------------------------------------------------------------
# perturbed constants
# --------------------------------------------------------------------------

def K_db(d: int, delta: float, b: float) -> float:
    return K_db_detail(d, delta, b)[0]


def K_db_detail(d: int, delta: float, b: float):
    """(value, argmin gamma) of the minimisation defining K_{d,b}(delta)."""
    _check_d(d)
    _check_unit("b", b)
    if delta <= 0:
        raise DomainError("delta must be > 0")
    g, v = _golden_min(lambda gam: kd_objective(d, delta, gam, b))
    return v, g


def schifo(d, delta, b2, g1, g2):
    """The objective g_{d,delta,b2}(gamma1, gamma2); vectorised."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    beta = 1 - b2 * b2
    sd = math.sqrt(delta)
    D = (d - 1) * beta * (1 - g2 * g2)
    P = (4 * d - 3 + g1 * sd / 2 + (sd / (8 * (d - 1) * g2)) ** 2 / beta) / D
    return P + np.sqrt(P * P + (sd / (2 * g1)) / (beta * (1 - g2 * g2)))


def _cubic_largest_root(p, q):
    """Largest real root of w^3 + p w + q (trigonometric or Cardano form),
    polished by Newton steps."""
    disc = 4 * p ** 3 + 27 * q * q
    if p < 0 and disc < 0:
        m = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * m)))
        w = m * math.cos(math.acos(arg) / 3)
    else:
        s = math.sqrt(q * q / 4 + p ** 3 / 27)
        w = np.cbrt(-q / 2 + s) + np.cbrt(-q / 2 - s)
    for _ in range(3):
        f, fp = w ** 3 + p * w + q, 3 * w * w + p
        if fp == 0:
            break
        w -= f / fp
    return float(w)


def _inner_min(d, delta, b2, g2):
    """min over gamma1 of schifo at fixed gamma2, in closed form.

    g = P + sqrt(P^2 + q/gamma1) with P = c0 + c1 gamma1 is the positive
    root X of X^2 - 2 P X - q/gamma1.  Minimising over gamma1 gives
    X = w^2 with w the positive root of w^3 - 2 c0 w - 2 sqrt(2 c1 q).
    """
    beta = 1 - b2 * b2
    sd = math.sqrt(delta)
    D = (d - 1) * beta * (1 - g2 * g2)
    c0 = (4 * d - 3 + (sd / (8 * (d - 1) * g2)) ** 2 / beta) / D
    c1 = sd / (2 * D)
    q = sd / (2 * beta * (1 - g2 * g2))
    k = 2 * math.sqrt(2 * c1 * q)
    w = _cubic_largest_root(-2 * c0, -k)
    X = w * w
    g1 = math.sqrt(q / (2 * c1 * X))
    return X, g1


@dataclass
class MValue:
    value: float
    gamma1: float
    gamma2: float


def M_db2(d: int, delta: float, b2: float, starts: int = 8) -> MValue:
    """M_{d,b2}(delta) with its argmin (gamma1, gamma2).

    The gamma1 direction is solved exactly (see _inner_min); gamma2 is
    located by a multistart scan and golden-section refinement.
    """
    _check_d(d)
    _check_unit("b2", b2)
    if delta <= 0:
        raise DomainError("delta must be > 0")

    def outer(s):
        g2 = 1.0 / (1.0 + math.exp(-s))      # logit parametrisation of (0, 1)
        return _inner_min(d, delta, b2, g2)[0]

    grid = np.linspace(-20, 20, 64 * starts)
    vals = np.array([outer(s) for s in grid])
    best = None
    for i in np.argsort(vals)[:starts]:
        i = min(max(int(i), 1), len(grid) - 2)
        x, v = _refine(outer, grid[i - 1], grid[i], grid[i + 1])
        if best is None or v < best[1]:
            best = (x, v)
    g2 = 1.0 / (1.0 + math.exp(-best[0]))
    X, g1 = _inner_min(d, delta, b2, g2)
    return MValue(X, g1, g2)


def M_db2_grid(d: int, delta: float, b2: float, n: int = 400, zooms: int = 12) -> MValue:
    """Brute-force scan of schifo on an n x n grid (log gamma1, gamma2),
    repeatedly zoomed around the best cell."""
    lo1, hi1 = math.log(1e-6), math.log(1e6)
    lo2, hi2 = 1e-6, 1 - 1e-6
    best = None
    for _ in range(zooms + 1):
        s1 = np.linspace(lo1, hi1, n)
        s2 = np.linspace(lo2, hi2, n)
        G = schifo(d, delta, b2, np.exp(s1)[:, None], s2[None, :])
        i, j = np.unravel_index(int(np.argmin(G)), G.shape)
        best = MValue(float(G[i, j]), float(math.exp(s1[i])), float(s2[j]))
        w1, w2 = 4 * (s1[1] - s1[0]), 4 * (s2[1] - s2[0])
        lo1, hi1 = s1[i] - w1, s1[i] + w1
        lo2, hi2 = max(s2[j] - w2, 1e-12), min(s2[j] + w2, 1 - 1e-12)
    return best


def kappa_db_detail(d: int, b: float) -> MinMax:
    _check_d(d)
    _check_unit("b", b)
    return _minmax(lambda x: branch_decreasing(d, x),
                   lambda x: K_db(d, x, b) / (d - 1))


def kappa_db(d: int, b: float) -> float:
    return kappa_db_detail(d, b).value


def mu_detail(d: int, b1: float, b2: float) -> MinMax:
    _check_d(d)
    _check_unit("b1", b1)
    _check_unit("b2", b2)
    return _minmax(lambda x: branch_decreasing(d, x, b1),
                   lambda x: M_db2(d, x, b2).value / (d - 1), lo=1e-8, hi=1e4, n=61)


def mu(d: int, b1: float, b2: float) -> float:
    return mu_detail(d, b1, b2).value


# --------------------------------------------------------------------------
# complex potentials
# --------------------------------------------------------------------------

def _b3_coeffs(d, b1, b2):
    s = math.sqrt(1 - b1 * b1)
    A = 1.0 / (8 * (d - 1)) + (2 * d - 1.5) * s
    C = (d - 1) * (1 - b2 * b2) * s
    return A, C


def b3_bound(d: int, b1: float, b2: float) -> float:
    """The admissibility bound A + sqrt(A^2 + C) on b3 as stated for the
    eigenvalue-free result with complex potentials."""
    _check_d(d)
    _check_unit("b1", b1)
    _check_unit("b2", b2)
    A, C = _b3_coeffs(d, b1, b2)
    return A + math.sqrt(A * A + C)


def b3_root(d: int, b1: float, b2: float) -> float:
    """Largest root of b3^2 + 2A b3 - C, i.e. -A + sqrt(A^2 + C): the exact
    supremum of b3 for which the delta-tilde window is nonempty."""
    _check_d(d)
    _check_unit("b1", b1)
    _check_unit("b2", b2)
    A, C = _b3_coeffs(d, b1, b2)
    return C / (A + math.sqrt(A * A + C))


def b3_quadratic(d, b1, b2, b3):
    s = math.sqrt(1 - b1 * b1)
    return (b3 * b3 + (1.0 / (4 * (d - 1)) + (4 * d - 3) * s) * b3
            - (d - 1) * (1 - b2 * b2) * s)


@dataclass
class Window:
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return not self.lower < self.upper

    def contains(self, x) -> bool:
        return self.lower < x < self.upper

    def as_tuple(self):
        return None if self.empty else (self.lower, self.upper)


def delta_tilde_window(d: int, b1: float, b2: float, b3: float) -> Window:
    """Admissible openings delta for the cone split with a complex potential."""
    _check_d(d)
    _check_unit("b1", b1)
    _check_unit("b2", b2)
    if b3 < 0:
        raise DomainError("b3 must be >= 0")
    if b3 == 0:
        raise DegenerateInputError("b3 = 0: every delta > 0 is admissible")
    lower = b3 / ((d - 1) * (1 - b1 * b1))
    base = 1 - b2 * b2 - (4 * d - 3) / (d - 1) * b3
    if base <= 0:
        return Window(lower, -math.inf)
    upper = (d - 1) / b3 * base ** 2 / (1.0 / (4 * (d - 1)) + b3) ** 2
    return Window(lower, upper)


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def table(ds) -> list:
    return [kappa_d(d) for d in ds]


def table_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "delta_star", "kappa_d"])
    for r in reports:
        w.writerow([r.d, f"{r.delta_star:.5e}", f"{r.kappa_d:.5e}"])
    return buf.getvalue()


def table_json(reports) -> str:
    return json.dumps([{"d": r.d, "delta_star": r.delta_star, "kappa_d": r.kappa_d}
                       for r in reports], indent=2)


@dataclass
class PerturbedConstants:
    d: int
    delta: float
    b: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    K_db: Optional[float] = None
    M_db2: Optional[dict] = None
    kappa_db: Optional[float] = None
    mu: Optional[float] = None
    b3_bound: Optional[float] = None
    b3_root: Optional[float] = None

    @classmethod
    def compute(cls, d, delta, b=0.0, b1=0.0, b2=0.0):
        m = M_db2(d, delta, b2)
        return cls(d, delta, b, b1, b2, K_db=K_db(d, delta, b), M_db2=asdict(m),
                   kappa_db=kappa_db(d, b), mu=mu(d, b1, b2),
                   b3_bound=b3_bound(d, b1, b2), b3_root=b3_root(d, b1, b2))

    def to_dict(self):
        return asdict(self)
