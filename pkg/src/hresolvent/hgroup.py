"""Heisenberg group H^d: group law, Koranyi gauge and horizontal calculus.

Points are real arrays of shape ``(..., 2d+1)`` with coordinates ordered
``(x_1..x_d, y_1..y_d, t)``; a single point may also be given as an
:class:`HPoint`.  Scalar fields are anything exposing ``jet(pts, order)``
returning a :class:`Jet` of exact Euclidean partials, a :class:`GridField`
sampled on a uniform grid, or a plain callable ``pts -> values`` (stencil
evaluation only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

EPS_AXIS = 1e-8


class SingularAxisError(ValueError):
    """Raised when a weighted operation is evaluated on the axis z = 0."""


class StencilError(ValueError):
    """Raised when a stencil would read outside a sampled grid."""


@dataclass(frozen=True)
class HPoint:
    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise ValueError("x and y must be vectors of equal length d >= 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))

    @property
    def d(self) -> int:
        return self.x.size

    @property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.y

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.t]])

    @classmethod
    def from_coords(cls, c) -> "HPoint":
        c = np.asarray(c, dtype=float)
        d = dim_of(c)
        return cls(c[:d], c[d:2 * d], c[2 * d])


@dataclass
class Jet:
    """Value and Euclidean derivatives of a scalar field at a batch of points.

    ``grad`` has shape (N, 2d+1) and ``hess`` (N, 2d+1, 2d+1); either may be
    ``None`` when not requested.
    """

    val: np.ndarray
    grad: Optional[np.ndarray] = None
    hess: Optional[np.ndarray] = None


PointLike = Union[HPoint, np.ndarray, list, tuple]


def dim_of(pts) -> int:
    n = np.shape(pts)[-1]
    if n < 3 or n % 2 == 0:
        raise ValueError(f"points must have 2d+1 >= 3 coordinates, got {n}")
    return (n - 1) // 2


def as_points(p: PointLike) -> np.ndarray:
    """Return a float array of shape (N, 2d+1)."""
    if isinstance(p, HPoint):
        return p.coords[None, :]
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    dim_of(arr)
    return arr


def _unwrap(p, out):
    """Return a scalar for single-point input, else the batch array."""
    if isinstance(p, HPoint) or np.ndim(p) == 1:
        return out[0]
    return out


# --------------------------------------------------------------------------
# group structure
# --------------------------------------------------------------------------

def group_multiply(p: PointLike, q: PointLike):
    """Group law (z, t)(z', t') = (z + z', t + t' + 2 Im(z . conj z'))."""
    a, b = as_points(p), as_points(q)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("dimension mismatch in group_multiply")
    d = dim_of(a)
    xa, ya, xb, yb = a[:, :d], a[:, d:2 * d], b[:, :d], b[:, d:2 * d]
    # Im(z . conj z') = sum(y x' - x y')
    twist = 2.0 * np.sum(ya * xb - xa * yb, axis=1)
    out = a + b
    out[:, -1] += twist
    if isinstance(p, HPoint) and isinstance(q, HPoint):
        return HPoint.from_coords(out[0])
    if np.ndim(p) == 1 and np.ndim(q) == 1 and not isinstance(p, HPoint):
        return out[0]
    return out


def group_inverse(p: PointLike):
    a = -as_points(p)
    if isinstance(p, HPoint):
        return HPoint.from_coords(a[0])
    return _unwrap(p, a)


def z_norm(p: PointLike):
    a = as_points(p)
    d = dim_of(a)
    return _unwrap(p, np.sqrt(np.sum(a[:, :2 * d] ** 2, axis=1)))


def koranyi_norm(p: PointLike):
    """Koranyi gauge (|z|^4 + t^2)^(1/4)."""
    a = as_points(p)
    d = dim_of(a)
    r2 = np.sum(a[:, :2 * d] ** 2, axis=1)
    return _unwrap(p, (r2 * r2 + a[:, -1] ** 2) ** 0.25)


def sigma_matrix(p: PointLike) -> np.ndarray:
    """The 2d x (2d+1) matrix mapping Euclidean to horizontal gradients."""
    a = as_points(p)
    d = dim_of(a)
    s = np.zeros((a.shape[0], 2 * d, 2 * d + 1))
    idx = np.arange(2 * d)
    s[:, idx, idx] = 1.0
    s[:, :d, -1] = 2.0 * a[:, d:2 * d]
    s[:, d:, -1] = -2.0 * a[:, :d]
    return _unwrap(p, s)


# --------------------------------------------------------------------------
# exact horizontal calculus from Euclidean jets
# --------------------------------------------------------------------------

def hgrad_from_jet(jet: Jet, pts: np.ndarray) -> np.ndarray:
    d = dim_of(pts)
    g = jet.grad
    ft = g[:, -1:]
    out = g[:, :2 * d].astype(np.result_type(g, float), copy=True)
    out[:, :d] += 2.0 * pts[:, d:2 * d] * ft
    out[:, d:] -= 2.0 * pts[:, :d] * ft
    return out


def hhess_from_jet(jet: Jet, pts: np.ndarray) -> np.ndarray:
    """Matrix (A_i A_j f) with A = (X_1..X_d, Y_1..Y_d)."""
    d = dim_of(pts)
    s = sigma_matrix(pts)
    out = np.einsum("nik,nkl,njl->nij", s, jet.hess, s)
    ft = jet.grad[:, -1]
    j = np.arange(d)
    # first-order terms from differentiating the 2y, -2x coefficients
    out[:, d + j, j] += 2.0 * ft[:, None]
    out[:, j, d + j] -= 2.0 * ft[:, None]
    return out


def sublap_from_jet(jet: Jet, pts: np.ndarray) -> np.ndarray:
    d = dim_of(pts)
    h = jet.hess
    x, y = pts[:, :d], pts[:, d:2 * d]
    lap_z = np.einsum("nii->n", h[:, :2 * d, :2 * d])
    mixed = np.sum(y * h[:, :d, -1] - x * h[:, d:2 * d, -1], axis=1)
    r2 = np.sum(pts[:, :2 * d] ** 2, axis=1)
    return -(lap_z + 4.0 * mixed + 4.0 * r2 * h[:, -1, -1])


# --------------------------------------------------------------------------
# stencils
# --------------------------------------------------------------------------

def _parse_op(op, d: int):
    """Map 'X1', 'Y2', 'T' or ('X', 1) to (kind, zero-based index)."""
    if isinstance(op, tuple):
        kind, j = op
    else:
        op = str(op)
        kind, j = op[0], (int(op[1:]) if len(op) > 1 else 0)
    kind = kind.upper()
    if kind == "T":
        return "T", 0
    if kind not in ("X", "Y") or not 1 <= j <= d:
        raise ValueError(f"unknown field {op!r} for d={d}")
    return kind, j - 1


def _shift(pts, k, step):
    out = pts.copy()
    out[:, k] += step
    return out


def stencil_op(kind: str, j: int, f: Callable, h: float) -> Callable:
    """Second-order central-difference version of X_j, Y_j or T acting on f."""

    def deriv(pts, k):
        return (f(_shift(pts, k, h)) - f(_shift(pts, k, -h))) / (2.0 * h)

    def apply(pts):
        pts = as_points(pts)
        d = dim_of(pts)
        n = 2 * d
        if kind == "T":
            return deriv(pts, n)
        if kind == "X":
            return deriv(pts, j) + 2.0 * pts[:, d + j] * deriv(pts, n)
        return deriv(pts, d + j) - 2.0 * pts[:, j] * deriv(pts, n)

    return apply


def _as_callable(f) -> Callable:
    if hasattr(f, "jet"):
        return lambda pts: f.jet(pts, 0).val
    return f


def stencil_hgrad(f, pts, h: float) -> np.ndarray:
    pts = as_points(pts)
    d = dim_of(pts)
    g = _as_callable(f)
    cols = [stencil_op("X", j, g, h)(pts) for j in range(d)]
    cols += [stencil_op("Y", j, g, h)(pts) for j in range(d)]
    return np.stack(cols, axis=1)


def stencil_sublap(f, pts, h: float) -> np.ndarray:
    """-sum (X_j^2 + Y_j^2) f with each X_j, Y_j a central difference."""
    pts = as_points(pts)
    d = dim_of(pts)
    g = _as_callable(f)
    acc = 0.0
    for kind in ("X", "Y"):
        for j in range(d):
            once = stencil_op(kind, j, g, h)
            acc = acc + stencil_op(kind, j, once, h)(pts)
    return -acc


class GridField:
    """A field sampled on a uniform tensor grid.

    ``axes`` is a list of 2d+1 equally spaced coordinate vectors; ``values``
    has the matching shape.  Derivatives are central differences; entries
    whose stencil leaves the grid are NaN and reading them raises
    :class:`StencilError`.
    """

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values)
        dim_of(np.empty(len(self.axes)))
        if self.values.shape != tuple(a.size for a in self.axes):
            raise ValueError("values shape does not match grid axes")
        self.steps = np.array([a[1] - a[0] for a in self.axes])
        self.d = (len(self.axes) - 1) // 2

    @classmethod
    def sample(cls, f, axes):
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = _as_callable(f)(pts).reshape(mesh[0].shape)
        return cls(axes, vals)

    def _coord(self, k):
        shape = [1] * len(self.axes)
        shape[k] = -1
        return self.axes[k].reshape(shape)

    def _deriv(self, arr, k):
        out = np.full(arr.shape, np.nan, dtype=np.result_type(arr, float))
        lo = [slice(None)] * arr.ndim
        hi = [slice(None)] * arr.ndim
        mid = [slice(None)] * arr.ndim
        lo[k], hi[k], mid[k] = slice(None, -2), slice(2, None), slice(1, -1)
        out[tuple(mid)] = (arr[tuple(hi)] - arr[tuple(lo)]) / (2.0 * self.steps[k])
        return out

    def apply(self, kind: str, j: int, arr=None):
        arr = self.values if arr is None else arr
        n = 2 * self.d
        if kind == "T":
            return self._deriv(arr, n)
        dt = self._deriv(arr, n)
        if kind == "X":
            return self._deriv(arr, j) + 2.0 * self._coord(self.d + j) * dt
        return self._deriv(arr, self.d + j) - 2.0 * self._coord(j) * dt

    def hgrad(self):
        return [self.apply("X", j) for j in range(self.d)] + \
               [self.apply("Y", j) for j in range(self.d)]

    def sublap(self):
        acc = 0.0
        for kind in ("X", "Y"):
            for j in range(self.d):
                acc = acc + self.apply(kind, j, self.apply(kind, j))
        return -acc

    def index_of(self, p) -> tuple:
        c = as_points(p)[0]
        idx = []
        for k, a in enumerate(self.axes):
            i = int(round((c[k] - a[0]) / self.steps[k]))
            if not 0 <= i < a.size or abs(a[i] - c[k]) > 1e-9 * max(1.0, abs(c[k])):
                raise StencilError(f"point {c} is not a grid node")
            idx.append(i)
        return tuple(idx)

    def read(self, arr, p):
        v = arr[self.index_of(p)]
        if np.isnan(v):
            raise StencilError(f"stencil out of bounds at {as_points(p)[0]}")
        return v


# --------------------------------------------------------------------------
# public operators
# --------------------------------------------------------------------------

def apply_field(op, f, p: PointLike, *, h: Optional[float] = None):
    """Apply X_j, Y_j or T to ``f`` at ``p``.

    Closed-form fields use exact partials unless a step ``h`` is given, in
    which case the central stencil is used (also for plain callables).
    """
    pts = as_points(p)
    d = dim_of(pts)
    kind, j = _parse_op(op, d)
    if isinstance(f, GridField):
        arr = f.apply(kind, j)
        return np.array([f.read(arr, q) for q in pts]) if pts.shape[0] > 1 else f.read(arr, pts[0])
    if h is None and hasattr(f, "jet"):
        g = f.jet(pts, 1).grad
        if kind == "T":
            out = g[:, -1]
        elif kind == "X":
            out = g[:, j] + 2.0 * pts[:, d + j] * g[:, -1]
        else:
            out = g[:, d + j] - 2.0 * pts[:, j] * g[:, -1]
    else:
        if h is None:
            h = default_step(pts)
        out = stencil_op(kind, j, _as_callable(f), h)(pts)
    return _unwrap(p, out)


def default_step(pts) -> float:
    scale = max(1.0, float(np.max(np.abs(pts))))
    return 1e-4 * scale


def horizontal_gradient(f, p: PointLike, *, h: Optional[float] = None):
    pts = as_points(p)
    if isinstance(f, GridField):
        comps = f.hgrad()
        out = np.array([[f.read(c, q) for c in comps] for q in pts])
    elif h is None and hasattr(f, "jet"):
        out = hgrad_from_jet(f.jet(pts, 1), pts)
    else:
        out = stencil_hgrad(f, pts, default_step(pts) if h is None else h)
    return _unwrap(p, out)


def horizontal_hessian(f, p: PointLike):
    pts = as_points(p)
    return _unwrap(p, hhess_from_jet(f.jet(pts, 2), pts))


def sublaplacian(f, p: PointLike, *, h: Optional[float] = None):
    """L f = -sum_j (X_j^2 + Y_j^2) f."""
    pts = as_points(p)
    if isinstance(f, GridField):
        arr = f.sublap()
        out = np.array([f.read(arr, q) for q in pts])
    elif h is None and hasattr(f, "jet"):
        out = sublap_from_jet(f.jet(pts, 2), pts)
    else:
        out = stencil_sublap(f, pts, 1e-3 if h is None else h)
    return _unwrap(p, out)


def radial_derivative(f, p: PointLike, *, h: Optional[float] = None,
                      eps_axis: float = EPS_AXIS):
    """Horizontal radial derivative (z/|z|) . grad_H f."""
    pts = as_points(p)
    d = dim_of(pts)
    r = np.sqrt(np.sum(pts[:, :2 * d] ** 2, axis=1))
    if np.any(r < eps_axis):
        raise SingularAxisError("radial derivative requested on the axis z = 0")
    g = as_points_grad(horizontal_gradient(f, pts, h=h))
    out = np.sum(pts[:, :2 * d] * g, axis=1) / r
    return _unwrap(p, out)


def as_points_grad(g):
    g = np.asarray(g)
    return g[None, :] if g.ndim == 1 else g


def div_horizontal(vf, p: PointLike):
    """div(sigma^T sigma h) for a vector field with exact Jacobian.

    ``vf`` exposes ``jet(pts) -> (values (N, n), jacobian (N, n, n))`` with
    ``jacobian[:, k, i] = d h_k / d coord_i``.  The columns of sigma^T sigma
    are divergence free, so the result is trace(sigma^T sigma J).
    """
    pts = as_points(p)
    _, jac = vf.jet(pts)
    s = sigma_matrix(pts)
    a = np.einsum("nki,nkj->nij", s, s)
    return _unwrap(p, np.einsum("nik,nki->n", a, jac))


def horizontal_part(vf, p: PointLike):
    """sigma h, the horizontal projection of a vector field."""
    pts = as_points(p)
    vals, _ = vf.jet(pts)
    return _unwrap(p, np.einsum("nij,nj->ni", sigma_matrix(pts), vals))


# --------------------------------------------------------------------------
# closed-form Koranyi formulas (oracles)
# --------------------------------------------------------------------------

def koranyi_hgrad_formula(p: PointLike):
    """(|z|^2 z + (y, -x) t) / N^3 with N the Koranyi norm."""
    pts = as_points(p)
    d = dim_of(pts)
    x, y, t = pts[:, :d], pts[:, d:2 * d], pts[:, -1:]
    r2 = np.sum(pts[:, :2 * d] ** 2, axis=1, keepdims=True)
    n3 = ((r2 * r2 + t * t) ** 0.25) ** 3
    out = np.concatenate([r2 * x + y * t, r2 * y - x * t], axis=1) / n3
    return _unwrap(p, out)


def koranyi_hgrad_norm_formula(p: PointLike):
    """|z| / N."""
    pts = as_points(p)
    return _unwrap(p, z_norm(pts) / koranyi_norm(pts))


def koranyi_sublap_formula(p: PointLike):
    """-(2d+1) |z|^2 / N^3."""
    pts = as_points(p)
    d = dim_of(pts)
    return _unwrap(p, -(2 * d + 1) * z_norm(pts) ** 2 / koranyi_norm(pts) ** 3)
