"""Analytic large-deviation limits for finite-kernel SaS fields.

All constants are in the series convention of :mod:`stablefield.field_model`
(tail measure ``nu_alpha(y, inf] = y**-alpha``). Closed-form values carry a
zero error bound; quadrature values carry an explicit one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .field_model import StableFieldSpec
from .geometry import (
    ActionGeometry,
    UnsupportedGeometryError,
    _breakpoints_1d,
    _delta_section_y1,
    _fibre_system,
    _interval,
    delta_bounds,
    integral_v_alpha,
    leb_delta,
    q_volume,
)
from .lattice_algebra import h_add, h_inv, project_to_H

__all__ = [
    "LimitValue",
    "Bump",
    "TestFunctionPair",
    "tail_measure",
    "order_stats_limit",
    "passage_limit_dissipative",
    "max_limit_conservative",
    "passage_limit_conservative",
    "c_f",
    "c_lvh",
    "limit_functional",
    "tail_mass_bound",
]


@dataclass(frozen=True)
class LimitValue:
    value: float
    method: str = "closed-form"
    error_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_bound", float(self.error_bound))
        if self.value < 0 or self.error_bound < 0:
            raise ValueError("limit values and error bounds are nonnegative")

    def __float__(self) -> float:
        return float(self.value)


def tail_measure(y: float, alpha: float) -> float:
    """``nu_alpha((y, inf])`` for ``y > 0``."""
    return float(y) ** (-float(alpha))


def _require(spec: StableFieldSpec, regime: str):
    if spec.regime != regime:
        raise ValueError(f"expected a {regime} field, got {spec.regime}")


def _pos_neg(spec: StableFieldSpec):
    vals = spec.atom_values()
    return np.maximum(vals, 0.0), np.maximum(-vals, 0.0)


def _check_side(side: str):
    if side not in ("upper", "two-sided"):
        raise ValueError(f"side must be 'upper' or 'two-sided', got {side!r}")


def order_stats_limit(spec: StableFieldSpec, y, side: str = "upper") -> LimitValue:
    """Limit of ``(gamma_n^a / n^d) P(X_{1:n} > gamma_n y_1, ..., X_{m:n} > gamma_n y_m)``.

    Missing order statistics of the kernel (``m`` beyond the support size)
    count as zero. With ``side="two-sided"`` the order statistics are those
    of ``|X_t|``.
    """
    _require(spec, "dissipative")
    _check_side(side)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise ValueError("thresholds must be positive")
    m = y.size
    alpha = spec.alpha
    vals = spec.atom_values()
    if side == "upper":
        parts = [np.maximum(vals, 0.0), np.maximum(-vals, 0.0)]
    else:
        parts = [np.abs(vals), np.abs(vals)]
    total = 0.0
    for v, w in enumerate(spec.weights):
        for part in parts:
            ordered = np.sort(part[v])[::-1]
            top = np.zeros(m)
            k = min(m, ordered.size)
            top[:k] = ordered[:k]
            total += w * float(np.min((top / y) ** alpha))
    return LimitValue(2.0 ** spec.d * total)


def _sup_term(spec: StableFieldSpec, side: str = "upper") -> float:
    _check_side(side)
    alpha = spec.alpha
    fp, fm = _pos_neg(spec)
    if side == "two-sided":
        return float(np.sum(spec.weights * 2.0 * np.maximum(fp, fm).max(axis=1) ** alpha))
    return float(np.sum(spec.weights * (fp.max(axis=1) ** alpha + fm.max(axis=1) ** alpha)))


def passage_limit_dissipative(spec: StableFieldSpec, a: float, lam: float = 1.0, side: str = "upper") -> LimitValue:
    """Limit of ``(gamma_n^a / n^d) P(tau^a_n <= lam n)``."""
    _require(spec, "dissipative")
    if a <= 0 or not 0 < lam <= 1:
        raise ValueError("need a > 0 and lam in (0, 1]")
    return LimitValue((2.0 * lam) ** spec.d * a ** (-spec.alpha) * _sup_term(spec, side))


def _geometry_factor(spec: StableFieldSpec, geom: ActionGeometry):
    if geom.volume_dim == 0:
        raise UnsupportedGeometryError("conservative limits need 1 <= p < d")
    leb, err = leb_delta(geom, return_error=True)
    return spec.group.l * leb, spec.group.l * err


def max_limit_conservative(spec: StableFieldSpec, geom: ActionGeometry, y: float, side: str = "upper") -> LimitValue:
    """Limit of ``(beta_n^a / n^p) P(max_t X_t > beta_n y)``."""
    _require(spec, "conservative")
    lv, err = _geometry_factor(spec, geom)
    k = y ** (-spec.alpha) * _sup_term(spec, side)
    return LimitValue(lv * k, "closed-form" if err == 0 else "quadrature", err * k)


def passage_limit_conservative(spec: StableFieldSpec, geom: ActionGeometry, a: float, lam: float = 1.0, side: str = "upper") -> LimitValue:
    _require(spec, "conservative")
    if a <= 0 or not 0 < lam <= 1:
        raise ValueError("need a > 0 and lam in (0, 1]")
    lv, err = _geometry_factor(spec, geom)
    k = lam ** geom.p * a ** (-spec.alpha) * _sup_term(spec, side)
    return LimitValue(lv * k, "closed-form" if err == 0 else "quadrature", err * k)


def _sum_term(spec: StableFieldSpec) -> float:
    # (x^+)^a + (x^-)^a == |x|^a
    return float(np.sum(spec.weights * np.abs(spec.atom_values().sum(axis=1)) ** spec.alpha))


def c_f(spec: StableFieldSpec) -> LimitValue:
    """Partial-sum constant ``C_f`` (returned as the alpha-th root)."""
    _require(spec, "dissipative")
    return LimitValue((2.0 ** spec.d * _sum_term(spec)) ** (1.0 / spec.alpha))


def c_lvh(spec: StableFieldSpec, geom: ActionGeometry) -> LimitValue:
    """Partial-sum constant ``C_{l,V,h}`` for a conservative field."""
    _require(spec, "conservative")
    alpha = spec.alpha
    integral, ierr = integral_v_alpha(alpha, geom, return_error=True)
    s = spec.group.l * _sum_term(spec)
    val = (integral * s) ** (1.0 / alpha)
    err = 0.0 if val == 0 else val * ierr / (alpha * integral)
    return LimitValue(val, "quadrature", err)


# ---------------------------------------------------------------------------
# Test functionals F_{g1, g2, eps1, eps2}


def _ramp(x, lo, hi, width):
    """1 on [lo, hi], 0 outside [lo - width, hi + width], linear between."""
    with np.errstate(invalid="ignore"):
        up = np.where(np.isfinite(lo), (x - (lo - width)) / width, np.inf)
        down = np.where(np.isfinite(hi), ((hi + width) - x) / width, np.inf)
    return np.clip(np.minimum(up, down), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Bump:
    """Piecewise-linear box bump ``g(t, z) = height * phi_t(t) * prod_w phi_w(z_w)``.

    Each factor equals one on an inner interval ``[lower, upper]`` and falls
    linearly to zero over ``ramp``. Infinite bounds leave a coordinate
    unrestricted. ``z`` is indexed by the neighbourhood offsets
    ``w in [-q, q]^d`` in C order.
    """

    height: float
    z_lower: np.ndarray
    z_upper: np.ndarray
    z_ramp: float
    t_lower: np.ndarray | None = None
    t_upper: np.ndarray | None = None
    t_ramp: float = 0.1

    def __post_init__(self):
        for name in ("z_lower", "z_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        for name in ("t_lower", "t_upper"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.asarray(val, dtype=float).reshape(-1))
        if self.height < 0 or self.z_ramp <= 0 or self.t_ramp <= 0:
            raise ValueError("bump needs height >= 0 and positive ramps")

    @classmethod
    def from_center(cls, height, center, inner, outer, **kw) -> "Bump":
        """Box bump given by a centre and per-coordinate inner/outer sup-radii."""
        center = np.asarray(center, dtype=float)
        inner = np.broadcast_to(np.asarray(inner, dtype=float), center.shape)
        outer = np.broadcast_to(np.asarray(outer, dtype=float), center.shape)
        width = outer - inner
        if np.any(width <= 0) or not np.allclose(width, width.flat[0]):
            raise ValueError("outer - inner must be a common positive ramp width")
        return cls(height, center - inner, center + inner, float(width.flat[0]), **kw)

    @classmethod
    def exceedance(cls, y: float, q: int = 0, d: int = 1, ramp: float = 1e-3, height: float = 1e3, coordinate=None) -> "Bump":
        """Approximates ``1{z_w0 > y}``: zero below ``y``, ``height`` above ``y + ramp``."""
        k = (2 * q + 1) ** d
        j = k // 2 if coordinate is None else coordinate
        lo = np.full(k, -np.inf)
        hi = np.full(k, np.inf)
        lo[j] = y + ramp
        return cls(height, lo, hi, ramp)

    @property
    def size(self) -> int:
        return self.z_lower.size

    @property
    def vanishing_radius(self) -> float:
        """Largest ``eta`` with ``g = 0`` on ``(-eta, eta)^k``."""
        lo = self.z_lower - self.z_ramp
        hi = self.z_upper + self.z_ramp
        cand = np.concatenate([lo[np.isfinite(lo)], -hi[np.isfinite(hi)]])
        return float(max(0.0, cand.max(initial=0.0)))

    @property
    def lipschitz(self) -> float:
        nz = np.isfinite(self.z_lower).sum() + np.isfinite(self.z_upper).sum()
        nt = 0 if self.t_lower is None else np.isfinite(self.t_lower).sum() + np.isfinite(self.t_upper).sum()
        return float(self.height * (nz / self.z_ramp + nt / self.t_ramp))

    @property
    def t_trivial(self) -> bool:
        if self.t_lower is None:
            return True
        return bool(np.all(self.t_lower <= -1.0) and np.all(self.t_upper >= 1.0))

    def t_factor(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.t_lower is None:
            return np.ones(t.shape[:-1])
        return np.prod(_ramp(t, self.t_lower, self.t_upper, self.t_ramp), axis=-1)

    def z_factor(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.prod(_ramp(z, self.z_lower, self.z_upper, self.z_ramp), axis=-1)

    def __call__(self, t, z) -> np.ndarray:
        return self.height * self.t_factor(t) * self.z_factor(z)

    def t_breaks(self, axis: int) -> list[float]:
        if self.t_lower is None:
            return []
        pts = [self.t_lower[axis] - self.t_ramp, self.t_lower[axis], self.t_upper[axis], self.t_upper[axis] + self.t_ramp]
        return [p for p in pts if np.isfinite(p) and -1 < p < 1]

    def z_levels(self) -> np.ndarray:
        pts = np.concatenate([self.z_lower - self.z_ramp, self.z_lower, self.z_upper, self.z_upper + self.z_ramp])
        return pts[np.isfinite(pts) & (pts != 0)]


@dataclass(frozen=True)
class TestFunctionPair:
    g1: Bump
    g2: Bump
    eps1: float
    eps2: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("thresholds eps1, eps2 must be positive")
        if self.g1.size != self.g2.size:
            raise ValueError("g1 and g2 act on different neighbourhoods")

    @property
    def vanishing_radius(self) -> float:
        return min(self.g1.vanishing_radius, self.g2.vanishing_radius)

    def F(self, xi1, xi2):
        """``(1 - exp(-(xi1 - eps1)_+)) (1 - exp(-(xi2 - eps2)_+))``."""
        return -np.expm1(-np.maximum(np.asarray(xi1) - self.eps1, 0.0)) * -np.expm1(-np.maximum(np.asarray(xi2) - self.eps2, 0.0))

    @classmethod
    def exceedance(cls, y: float, q: int = 0, d: int = 1, ramp: float = 1e-3, height: float = 1e3, eps: float = 1e-3):
        g = Bump.exceedance(y, q, d, ramp, height)
        return cls(g, g, eps, eps)


def _neighbourhood(q: int, d: int) -> np.ndarray:
    ax = np.arange(-q, q + 1)
    return np.array(list(itertools.product(ax, repeat=d)), dtype=np.int64).reshape(-1, d)


def _psi_rows_dissipative(spec: StableFieldSpec, q: int) -> np.ndarray:
    """``Psi[v, u, w] = f(v, u - w)`` over ``u`` in ``[-(T+q), T+q]^d``."""
    d, T = spec.d, spec.support_radius
    W = _neighbourhood(q, d)
    R = T + q
    us = _neighbourhood(R, d)
    out = np.zeros((spec.n_w, len(us), len(W)))
    for i, u in enumerate(us):
        for j, w in enumerate(W):
            off = u - w
            if np.all(np.abs(off) <= T):
                out[:, i, j] = spec.kernel[(slice(None),) + tuple(off + T)]
    return out


def _psi_rows_conservative(spec: StableFieldSpec, q: int) -> np.ndarray:
    """``Psi[v, u, w] = h(v, u (-) pi(w))`` over the ``u`` that can be nonzero."""
    G = spec.group
    W = _neighbourhood(q, spec.d)
    pw = [project_to_H(w, G) for w in W]
    us = sorted({h_add(z, s, G) for z in spec.atoms for s in pw}, key=lambda e: (e.coset, e.free))
    index = {a: k for k, a in enumerate(spec.atoms)}
    out = np.zeros((spec.n_w, len(us), len(W)))
    for i, u in enumerate(us):
        for j, s in enumerate(pw):
            z = h_add(u, h_inv(s, G), G)
            k = index.get(z)
            if k is not None:
                out[:, i, j] = spec.kernel[:, k]
    return out


def tail_mass_bound(spec: StableFieldSpec, eta: float, q: int | None = None) -> float:
    """``2^(d+1) eta^-alpha (2q+1)^d ||f||_alpha^alpha``: limit mass of configurations reaching ``eta``."""
    q = spec.q if q is None else q
    norm = float(np.sum(spec.weights[:, None] * np.abs(spec.atom_values()) ** spec.alpha))
    return 2.0 ** (spec.d + 1) * eta ** (-spec.alpha) * (2 * q + 1) ** spec.d * norm


def _gauss_pieces(breaks, order):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def _x_rule(psi: np.ndarray, pair: TestFunctionPair, alpha: float, order: int):
    """Nodes ``x`` and ``nu_alpha`` weights on ``|x| >= x0`` for both signs."""
    fmax = np.abs(psi).max()
    eta = pair.vanishing_radius
    x0 = eta / fmax
    # kinks: |x| * |psi| hits a ramp level
    levels = np.abs(np.concatenate([pair.g1.z_levels(), pair.g2.z_levels()]))
    vals = np.abs(psi[psi != 0])
    xs = np.unique(np.outer(levels, 1.0 / vals).ravel())
    xs = xs[xs > x0]
    rs = np.unique(np.concatenate([[0.0, 1.0], (x0 / xs) ** alpha]))
    r, wr = _gauss_pieces(rs, order)
    keep = r > 0
    r, wr = r[keep], wr[keep]
    x = x0 * r ** (-1.0 / alpha)
    scale = x0 ** (-alpha)
    return np.concatenate([x, -x]), np.concatenate([wr, wr]) * scale


def _xi_sums(psi_v: np.ndarray, x: np.ndarray, g: Bump) -> np.ndarray:
    """``height * sum_u phi_z(x * psi_v[u])`` for each node ``x``."""
    z = x[:, None, None] * psi_v[None, :, :]
    return g.height * g.z_factor(z).sum(axis=1)


def _t_rule(pair: TestFunctionPair, d: int, order: int):
    if pair.g1.t_trivial and pair.g2.t_trivial:
        return np.zeros((1, d)), np.array([2.0**d])
    axes = []
    for i in range(d):
        br = sorted({-1.0, 1.0, *pair.g1.t_breaks(i), *pair.g2.t_breaks(i)})
        axes.append(_gauss_pieces(br, order))
    nodes = np.array(list(itertools.product(*[a[0] for a in axes])))
    weights = np.array([np.prod(c) for c in itertools.product(*[a[1] for a in axes])])
    return nodes, weights


def _functional_dissipative(spec, pair, order):
    d = spec.d
    psi = _psi_rows_dissipative(spec, _q_of(pair, d))
    if not np.any(psi):
        return 0.0
    t_nodes, t_w = _t_rule(pair, d, order)
    a1 = pair.g1.t_factor(t_nodes)
    a2 = pair.g2.t_factor(t_nodes)
    total = 0.0
    x, wx = _x_rule(psi, pair, spec.alpha, order)
    for v in range(spec.n_w):
        s1 = _xi_sums(psi[v], x, pair.g1)
        s2 = _xi_sums(psi[v], x, pair.g2)
        F = pair.F(a1[:, None] * s1[None, :], a2[:, None] * s2[None, :])
        total += spec.weights[v] * float(t_w @ F @ wx)
    return total


def _q_of(pair: TestFunctionPair, d: int) -> int:
    k = pair.g1.size
    q = int(round((k ** (1.0 / d) - 1) / 2))
    if (2 * q + 1) ** d != k:
        raise ValueError("bump size is not a neighbourhood size (2q+1)^d")
    return q


def _fibre_factor(g: Bump, y: np.ndarray, geom: ActionGeometry, order: int) -> float:
    """``int_{Q_y} phi_t(U y + V lambda) d lambda``."""
    if g.t_trivial:
        return q_volume(y, geom)
    if geom.volume_dim != 1:
        raise UnsupportedGeometryError("t-dependent bumps need a one-dimensional fibre")
    A, b = _fibre_system(y, geom)
    lo, hi = _interval(A, b)
    if hi <= lo:
        return 0.0
    lam, wl = _gauss_pieces(np.linspace(lo, hi, 9), order)
    pts = (geom.G.U.astype(float) @ y)[None, :] + lam[:, None] * geom.G.V.astype(float).ravel()[None, :]
    return float(wl @ g.t_factor(pts))


def _y_rule(geom: ActionGeometry, order: int):
    if geom.p == 1:
        lo, hi = _interval(geom.delta_A, geom.delta_b)
        br = _breakpoints_1d(geom, lo, hi) if geom.volume_dim == 1 else list(np.linspace(lo, hi, 9))
        y, w = _gauss_pieces(br, order)
        return y[:, None], w
    if geom.p == 2:
        bb = delta_bounds(geom)
        y1, w1 = _gauss_pieces(np.linspace(bb[0, 0], bb[0, 1], 9), order)
        nodes, weights = [], []
        for a, wa in zip(y1, w1):
            lo, hi = _delta_section_y1(geom, a)
            if hi > lo:
                y2, w2 = _gauss_pieces(np.linspace(lo, hi, 5), order)
                nodes.extend((a, b) for b in y2)
                weights.extend(wa * w2)
        return np.array(nodes), np.array(weights)
    raise UnsupportedGeometryError("functional limits implemented for p <= 2")


def _functional_conservative(spec, geom, pair, order):
    psi = _psi_rows_conservative(spec, _q_of(pair, spec.d))
    if not np.any(psi):
        return 0.0
    y, wy = _y_rule(geom, order)
    a1 = np.array([_fibre_factor(pair.g1, yy, geom, order) for yy in y])
    a2 = np.array([_fibre_factor(pair.g2, yy, geom, order) for yy in y])
    x, wx = _x_rule(psi, pair, spec.alpha, order)
    total = 0.0
    for v in range(spec.n_w):
        s1 = _xi_sums(psi[v], x, pair.g1)
        s2 = _xi_sums(psi[v], x, pair.g2)
        F = pair.F(a1[:, None] * s1[None, :], a2[:, None] * s2[None, :])
        total += spec.weights[v] * float(wy @ F @ wx)
    return spec.group.l * total


def limit_functional(spec: StableFieldSpec, geom: ActionGeometry | None, pair: TestFunctionPair, order: int = 48) -> LimitValue:
    """Limit-measure value ``m_*(F)`` (dissipative) or ``kappa_*(F)`` (conservative).

    The tail variable is integrated after the substitution
    ``x = x0 r^(-1/alpha)`` (which maps ``nu_alpha`` on ``|x| > x0`` to
    ``x0^-alpha dr``), the positional variable by composite Gauss-Legendre.
    The error bound is the gap to the same rule at half the order.
    """
    if pair.vanishing_radius <= 0:
        raise ValueError("test functions must vanish on a neighbourhood of zero (eta > 0)")
    if spec.regime == "dissipative":
        fine = _functional_dissipative(spec, pair, order)
        coarse = _functional_dissipative(spec, pair, order // 2)
    else:
        if geom is None:
            raise ValueError("conservative functional needs the action geometry")
        fine = _functional_conservative(spec, geom, pair, order)
        coarse = _functional_conservative(spec, geom, pair, order // 2)
    return LimitValue(max(fine, 0.0), "quadrature", abs(fine - coarse) + 1e-12 * abs(fine))

