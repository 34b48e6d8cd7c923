"""Polytope geometry of a quotient action.

For a group structure with bases ``U`` (d x p) and ``V`` (d x q), q = d - p,

    Delta = {y in R^p : exists lambda in R^q, ||U y + V lambda||_inf <= 1}
    Q_y   = {lambda   : ||U y + V lambda||_inf <= 1}

and ``volume(y)`` is the q-dimensional volume of ``Q_y``. Note that the
fibre dimension q here is unrelated to the neighbourhood radius used for
point-process vectors elsewhere in the package.

Exact paths exist for p <= 2 and q <= 2 (intervals and convex polygons);
other dimensions fall back to midpoint grids with an error estimate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize

from .lattice_algebra import GroupStructure

__all__ = [
    "UnsupportedGeometryError",
    "ActionGeometry",
    "fourier_motzkin",
    "delta_contains",
    "q_volume",
    "leb_delta",
    "integral_v_alpha",
    "delta_bounds",
]

_TOL = 1e-12


class UnsupportedGeometryError(ValueError):
    pass


def fourier_motzkin(A, b, n_eliminate: int):
    """Eliminate the last ``n_eliminate`` variables from ``A x <= b``.

    Arithmetic is exact over the rationals. Returns the projected system
    ``(A', b')`` on the remaining leading variables, with duplicate and
    trivially true rows removed.
    """
    rows = [([Fraction(int(a)) if float(a).is_integer() else Fraction(a) for a in r], Fraction(bb))
            for r, bb in zip(np.asarray(A).tolist(), np.asarray(b).tolist())]
    nvar = np.asarray(A).shape[1]
    for _ in range(n_eliminate):
        j = nvar - 1
        pos, neg, zero = [], [], []
        for a, bb in rows:
            (pos if a[j] > 0 else neg if a[j] < 0 else zero).append((a, bb))
        new = [(a[:j], bb) for a, bb in zero]
        for (ap, bp), (an, bn) in itertools.product(pos, neg):
            cp, cn = ap[j], -an[j]
            new.append(([cn * x + cp * y for x, y in zip(ap[:j], an[:j])], cn * bp + cp * bn))
        rows = _normalise(new)
        nvar -= 1
    return rows


def _normalise(rows):
    seen = {}
    out = []
    for a, bb in rows:
        scale = max((abs(x) for x in a), default=Fraction(0))
        if scale == 0:
            if bb < 0:
                # infeasible system; keep as a contradiction row
                key = ("infeasible",)
                if key not in seen:
                    seen[key] = True
                    out.append((a, bb))
            continue
        a = [x / scale for x in a]
        bb = bb / scale
        key = tuple(a)
        if key in seen:
            i = seen[key]
            if bb < out[i][1]:
                out[i] = (a, bb)
            continue
        seen[key] = len(out)
        out.append((a, bb))
    return out


@dataclass(frozen=True, eq=False)
class ActionGeometry:
    """Geometry attached to a :class:`GroupStructure`.

    ``grid`` is the per-axis resolution of the midpoint-grid fallback.
    """

    G: GroupStructure
    grid: int = 2048
    delta_A: np.ndarray = field(init=False, repr=False)
    delta_b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d, p = self.G.d, self.G.p
        M = np.hstack([self.G.U, self.G.V]).astype(float)
        A = np.vstack([M, -M])
        b = np.ones(2 * d)
        rows = fourier_motzkin(A, b, d - p)
        object.__setattr__(self, "delta_A", np.array([[float(x) for x in a] for a, _ in rows]).reshape(-1, p))
        object.__setattr__(self, "delta_b", np.array([float(bb) for _, bb in rows]))

    @property
    def p(self) -> int:
        return self.G.p

    @property
    def volume_dim(self) -> int:
        return self.G.d - self.G.p

    @property
    def exact_dims(self) -> bool:
        return self.p <= 2 and self.volume_dim <= 2


def delta_contains(y, geom: ActionGeometry) -> bool:
    """Membership of ``y`` in the closed set ``Delta`` via the projected system."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if geom.delta_A.size == 0:
        return True
    return bool(np.all(geom.delta_A @ y <= geom.delta_b + _TOL))


def delta_bounds(geom: ActionGeometry) -> np.ndarray:
    """Bounding box of ``Delta`` as a (p, 2) array, by linear programming."""
    A, b = geom.delta_A, geom.delta_b
    p = geom.p
    out = np.zeros((p, 2))
    for j in range(p):
        c = np.zeros(p)
        c[j] = 1.0
        lo = optimize.linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * p, method="highs")
        hi = optimize.linprog(-c, A_ub=A, b_ub=b, bounds=[(None, None)] * p, method="highs")
        if lo.status != 0 or hi.status != 0:
            raise UnsupportedGeometryError("Delta is empty or unbounded")
        out[j] = lo.fun, -hi.fun
    return out


def _interval(A: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Solution set of ``a_i x <= b_i`` for scalar x."""
    lo, hi = -np.inf, np.inf
    for a, bb in zip(A.ravel(), b):
        if a > _TOL:
            hi = min(hi, bb / a)
        elif a < -_TOL:
            lo = max(lo, bb / a)
        elif bb < -_TOL:
            return 0.0, 0.0
    return lo, hi


def _clip_polygon(poly: list[tuple[float, float]], a, bb) -> list[tuple[float, float]]:
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        fp = a[0] * P[0] + a[1] * P[1] - bb
        fq = a[0] * Q[0] + a[1] * Q[1] - bb
        if fp <= 0:
            out.append(P)
        if (fp < 0 < fq) or (fq < 0 < fp):
            s = fp / (fp - fq)
            out.append((P[0] + s * (Q[0] - P[0]), P[1] + s * (Q[1] - P[1])))
    return out


def _polygon_area(A: np.ndarray, b: np.ndarray, box: float) -> float:
    poly = [(-box, -box), (box, -box), (box, box), (-box, box)]
    for a, bb in zip(A, b):
        poly = _clip_polygon(poly, a, bb)
        if len(poly) < 3:
            return 0.0
    x = np.array([pt[0] for pt in poly])
    y = np.array([pt[1] for pt in poly])
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _fibre_system(y: np.ndarray, geom: ActionGeometry):
    V = geom.G.V.astype(float)
    c = geom.G.U.astype(float) @ y
    A = np.vstack([V, -V])
    b = np.concatenate([1.0 - c, 1.0 + c])
    return A, b


def q_volume(y, geom: ActionGeometry, return_error: bool = False):
    """Volume of the fibre ``Q_y`` (zero outside ``Delta``).

    Exact for fibre dimension 1 (interval length) and 2 (polygon clipping);
    otherwise a midpoint grid with ``geom.grid`` cells per axis whose error
    bound is the volume of the cells cut by the boundary.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    q = geom.volume_dim
    if q == 0:
        val = 1.0 if np.abs(geom.G.U.astype(float) @ y).max() <= 1 + _TOL else 0.0
        return (val, 0.0) if return_error else val
    A, b = _fibre_system(y, geom)
    if q == 1:
        lo, hi = _interval(A, b)
        val = max(0.0, hi - lo)
        return (val, 0.0) if return_error else val
    pinv = np.linalg.pinv(geom.G.V.astype(float))
    c = geom.G.U.astype(float) @ y
    centre = -pinv @ c
    half = np.abs(pinv).sum(axis=1) * 1.0 + 1e-9
    if q == 2:
        shifted_b = b - A @ centre
        val = _polygon_area(A, shifted_b, float(half.max()) + 1.0)
        return (val, 0.0) if return_error else val
    val, err = _grid_volume(A, b, centre - half, centre + half, geom.grid)
    return (val, err) if return_error else val


def _grid_volume(A, b, lo, hi, grid):
    dim = len(lo)
    n = max(2, int(round(grid ** (2.0 / dim))))  # keep total cells bounded
    axes = [lo[i] + (np.arange(n) + 0.5) * (hi[i] - lo[i]) / n for i in range(dim)]
    h = (hi - lo) / n
    cell = float(np.prod(h))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    slack = b[None, :] - pts @ A.T
    inside = np.all(slack >= 0, axis=1)
    reach = 0.5 * np.abs(A) @ h
    cut = np.any(np.abs(slack) <= reach[None, :], axis=1)
    return float(inside.sum() * cell), float(cut.sum() * cell)


def _delta_section_y1(geom: ActionGeometry, y1: float) -> tuple[float, float]:
    A, b = geom.delta_A, geom.delta_b
    return _interval(A[:, 1:], b - A[:, 0] * y1)


def leb_delta(geom: ActionGeometry, return_error: bool = False):
    """Lebesgue measure of ``Delta``.

    Exact for p <= 2 from the eliminated inequality system; midpoint grid
    over the bounding box otherwise.
    """
    p = geom.p
    A, b = geom.delta_A, geom.delta_b
    if p == 1:
        lo, hi = _interval(A, b)
        val, err = max(0.0, hi - lo), 0.0
    elif p == 2:
        box = float(np.abs(delta_bounds(geom)).max()) + 1.0
        val, err = _polygon_area(A, b, box), 0.0
    else:
        bb = delta_bounds(geom)
        val, err = _grid_volume(A, b, bb[:, 0], bb[:, 1], geom.grid)
    return (val, err) if return_error else val


def _breakpoints_1d(geom: ActionGeometry, lo: float, hi: float) -> list[float]:
    """Kinks of ``y -> volume(y)`` for p = 1, q = 1 (where two fibre bounds cross)."""
    U = geom.G.U.astype(float).ravel()
    V = geom.G.V.astype(float).ravel()
    # each fibre bound is lambda = (s - U_i y) / V_i, s = +-1
    lines = [(-U[i] / V[i], s / V[i]) for i in range(len(U)) if abs(V[i]) > _TOL for s in (-1.0, 1.0)]
    pts = {lo, hi}
    for (m1, c1), (m2, c2) in itertools.combinations(lines, 2):
        if abs(m1 - m2) > _TOL:
            y = (c2 - c1) / (m1 - m2)
            if lo < y < hi:
                pts.add(float(y))
    return sorted(pts)


def integral_v_alpha(alpha: float, geom: ActionGeometry, return_error: bool = False):
    """``int_Delta volume(y)**alpha dy`` by adaptive quadrature.

    Raises
    ------
    UnsupportedGeometryError
        If ``p == d`` (no fibre).
    """
    if geom.volume_dim == 0:
        raise UnsupportedGeometryError("conservative constants need 1 <= p < d")
    p = geom.p

    def f(*y):
        return q_volume(np.array(y), geom) ** alpha

    if p == 1:
        lo, hi = _interval(geom.delta_A, geom.delta_b)
        if geom.volume_dim == 1:
            pts = _breakpoints_1d(geom, lo, hi)
        else:
            pts = list(np.linspace(lo, hi, 9))
        total, err = 0.0, 0.0
        for a, c in zip(pts[:-1], pts[1:]):
            v, e = integrate.quad(f, a, c, epsabs=1e-12, epsrel=1e-10, limit=200)
            total += v
            err += e
    elif p == 2:
        bb = delta_bounds(geom)

        def inner(y1):
            lo2, hi2 = _delta_section_y1(geom, y1)
            if hi2 <= lo2:
                return 0.0
            return integrate.quad(lambda y2: f(y1, y2), lo2, hi2, epsabs=1e-10, epsrel=1e-9, limit=100)[0]

        total, err = integrate.quad(inner, bb[0, 0], bb[0, 1], epsabs=1e-10, epsrel=1e-9, limit=100)
    else:
        total, err = _grid_integral(alpha, geom)
    return (total, err) if return_error else total


def _grid_integral(alpha: float, geom: ActionGeometry) -> tuple[float, float]:
    bb = delta_bounds(geom)
    p = geom.p
    n = max(4, int(round(geom.grid ** (1.0 / p))))
    axes = [bb[i, 0] + (np.arange(n) + 0.5) * (bb[i, 1] - bb[i, 0]) / n for i in range(p)]
    cell = float(np.prod((bb[:, 1] - bb[:, 0]) / n))
    vals = np.array([q_volume(np.array(y), geom) ** alpha for y in itertools.product(*axes)])
    coarse_axes = [a[::2] for a in axes]
    coarse = np.array([q_volume(np.array(y), geom) ** alpha for y in itertools.product(*coarse_axes)])
    fine = vals.sum() * cell
    crude = coarse.sum() * cell * 2**p
    return float(fine), float(abs(fine - crude))


def grid_integral_v_alpha(alpha: float, geom: ActionGeometry, n: int = 10_000) -> float:
    """Uniform midpoint-grid value of ``int volume^alpha`` (cross-check oracle, p = 1)."""
    if geom.p != 1:
        raise UnsupportedGeometryError("grid oracle implemented for p = 1")
    lo, hi = _interval(geom.delta_A, geom.delta_b)
    h = (hi - lo) / n
    ys = lo + (np.arange(n) + 0.5) * h
    return float(sum(q_volume(y, geom) ** alpha for y in ys) * h)
