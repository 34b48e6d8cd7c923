"""Stationary SaS fields with finite kernels: model description and simulation.

Normalisation follows the series convention

    X_t = sum_i j_i f(v_i, u_i - t),   sum_i delta_(j_i, v_i, u_i) ~ PRM(nu_alpha x nu x counting),

with ``nu_alpha(x, inf] = nu_alpha[-inf, -x) = x**-alpha``. Under this
convention a coefficient vector ``c`` applied to the points gives an SaS
variable of scale ``(2 / C_alpha)**(1/alpha) * ||c||_alpha``, where the
scale refers to the characteristic function ``exp(-sigma**alpha |theta|**alpha)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy import signal

from .lattice_algebra import (
    CapacityError,
    GroupStructure,
    HElement,
    coset_counts,
    embed,
    h_norm,
    project_many,
)

__all__ = [
    "ConfigError",
    "SaturationWarning",
    "c_alpha",
    "series_scale_factor",
    "RngStream",
    "sample_sas",
    "StableFieldSpec",
    "FieldSample",
    "FieldLayout",
    "sample_field_exact",
    "sample_field_series",
    "small_jump_variance",
    "exact_scale",
    "kernel_from_entries",
    "stable_cdf",
    "stable_sf_tail",
    "stable_quantile",
]


class ConfigError(ValueError):
    """Inconsistent field or experiment configuration."""


class SaturationWarning(RuntimeWarning):
    pass


def c_alpha(alpha: float) -> float:
    """Stable tail constant ``(int_0^inf x^-alpha sin x dx)^-1``.

    Evaluated as ``2 / (pi * sinc((1 - alpha)/2) * Gamma(2 - alpha))``,
    which equals ``(1-alpha) / (Gamma(2-alpha) cos(pi alpha/2))`` for
    ``alpha != 1`` and ``2/pi`` at ``alpha = 1`` without a removable
    singularity.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0,2)")
    return 2.0 / (math.pi * float(np.sinc((1.0 - alpha) / 2.0)) * math.gamma(2.0 - alpha))


def series_scale_factor(alpha: float) -> float:
    """SaS scale of a unit-weight atom under the series convention, ``(2/C_alpha)^(1/alpha)``."""
    return (2.0 / c_alpha(alpha)) ** (1.0 / alpha)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Streams with distinct keys are independent; the same key always
    reproduces the same draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


_MAX_KERNEL_CELLS = 2**26
_LOG_MAX = math.log(np.finfo(float).max) - 1.0


def _standard_sas(alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    """Chambers-Mallows-Stuck draws of SaS(1); saturates at the float range."""
    U = gen.uniform(-math.pi / 2, math.pi / 2, size=size)
    if alpha == 1.0:
        return np.tan(U)
    W = gen.standard_exponential(size=size)
    with np.errstate(divide="ignore", over="ignore"):
        if alpha >= 0.5:
            out = np.sin(alpha * U) / np.cos(U) ** (1.0 / alpha) * (np.cos((1.0 - alpha) * U) / W) ** ((1.0 - alpha) / alpha)
            if np.all(np.isfinite(out)):
                return out
        # log-space evaluation for small alpha or overflowing draws
        log_abs = (
            np.log(np.abs(np.sin(alpha * U)))
            - np.log(np.cos(U)) / alpha
            + (1.0 - alpha) / alpha * (np.log(np.cos((1.0 - alpha) * U)) - np.log(W))
        )
    sat = log_abs > _LOG_MAX
    if np.any(sat):
        warnings.warn(f"{int(sat.sum())} stable draws saturated at the float range", SaturationWarning, stacklevel=3)
    return np.sign(U) * np.exp(np.minimum(log_abs, _LOG_MAX))


def sample_sas(alpha: float, sigma: float, rng, size=None):
    """Symmetric alpha-stable draws with scale ``sigma``.

    Parameters
    ----------
    alpha : float in (0, 2)
    sigma : float >= 0
    rng : RngStream or numpy Generator
    size : int or tuple, optional

    Returns
    -------
    float or ndarray
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0,2)")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    draws = _standard_sas(float(alpha), gen, 1 if size is None else size)
    out = sigma * draws if sigma > 0 else np.zeros_like(draws)
    return float(out[0]) if size is None else out


def kernel_from_entries(entries: Mapping[tuple, float], d: int, n_w: int = 1) -> np.ndarray:
    """Dense centred kernel array from ``{(v, u_1..u_d): value}`` or ``{(u_1..u_d): value}``."""
    keys = list(entries)
    full = [k if len(k) == d + 1 else (0, *k) for k in keys]
    T = max((max(abs(x) for x in k[1:]) for k in full), default=0)
    if n_w * (2 * T + 1) ** d > _MAX_KERNEL_CELLS:
        raise CapacityError(f"kernel support radius {T} exceeds the dense-array capacity")
    arr = np.zeros((n_w,) + (2 * T + 1,) * d)
    for k, key in zip(full, keys):
        arr[(k[0],) + tuple(x + T for x in k[1:])] = float(entries[key])
    return arr


@dataclass(frozen=True, eq=False)
class StableFieldSpec:
    """Finite-kernel SaS field.

    ``kernel`` is, for the dissipative regime, an array of shape
    ``(n_w, 2T+1, ..., 2T+1)`` centred at offset 0; for the conservative
    regime, an array of shape ``(n_w, len(atoms))`` holding ``h(v, s)`` on
    the listed ``atoms`` of ``H``.
    """

    alpha: float
    kernel: np.ndarray
    weights: np.ndarray
    regime: str = "dissipative"
    labels: tuple[str, ...] = ()
    atoms: tuple[HElement, ...] = ()
    group: GroupStructure | None = None
    q: int = 0

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 2.0:
            raise ConfigError("alpha must lie in (0,2)")
        kernel = np.asarray(self.kernel, dtype=float)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.regime not in ("dissipative", "conservative"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if kernel.shape[0] != weights.size:
            raise ConfigError("kernel and weights disagree on |W|")
        if np.any(weights <= 0):
            raise ConfigError("weights must be positive")
        if not np.all(np.isfinite(kernel)):
            raise ConfigError("kernel entries must be finite")
        if self.q < 0:
            raise ConfigError("q must be nonnegative")
        if self.regime == "conservative":
            if self.group is None:
                raise ConfigError("conservative field needs a group structure")
            if kernel.shape != (weights.size, len(self.atoms)):
                raise ConfigError("conservative kernel must have shape (n_w, n_atoms)")
            if len(set(self.atoms)) != len(self.atoms):
                raise ConfigError("duplicate H atoms in conservative kernel")
        else:
            if kernel.ndim < 2 or len(set(kernel.shape[1:])) != 1 or kernel.shape[1] % 2 == 0:
                raise ConfigError("dissipative kernel must be centred with odd equal side lengths")
        labels = tuple(self.labels) or tuple(f"w{i}" for i in range(weights.size))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @classmethod
    def dissipative(cls, alpha, kernel, weights=None, labels=(), q=0) -> "StableFieldSpec":
        kernel = np.asarray(kernel, dtype=float)
        if weights is None:
            kernel = kernel[None, ...]
            weights = [1.0]
        return cls(alpha, kernel, np.asarray(weights, dtype=float), "dissipative", labels, q=q)

    @classmethod
    def conservative(cls, alpha, atoms: Mapping[HElement, object], group: GroupStructure, weights=None, labels=(), q=0):
        items = sorted(atoms.items(), key=lambda kv: (kv[0].coset, kv[0].free))
        n_w = 1 if weights is None else len(weights)
        kernel = np.zeros((n_w, len(items)))
        for j, (_, val) in enumerate(items):
            kernel[:, j] = np.broadcast_to(np.asarray(val, dtype=float), (n_w,))
        w = [1.0] if weights is None else weights
        return cls(alpha, kernel, np.asarray(w, dtype=float), "conservative", labels, tuple(a for a, _ in items), group, q)

    @property
    def n_w(self) -> int:
        return self.weights.size

    @property
    def d(self) -> int:
        return self.group.d if self.regime == "conservative" else self.kernel.ndim - 1

    @cached_property
    def support_radius(self) -> int:
        """``T``: kernel supported in ``[-T, T]^d`` (dissipative) or ``H_T`` (conservative)."""
        if self.regime == "conservative":
            return max((h_norm(a, self.group) for a in self.atoms), default=0)
        return (self.kernel.shape[1] - 1) // 2

    @property
    def is_zero(self) -> bool:
        return not np.any(self.kernel)

    def with_q(self, q: int) -> "StableFieldSpec":
        return StableFieldSpec(self.alpha, self.kernel, self.weights, self.regime, self.labels, self.atoms, self.group, q)

    def atom_values(self) -> np.ndarray:
        """Kernel values as ``(n_w, n_support)`` regardless of regime."""
        return self.kernel.reshape(self.n_w, -1)


@dataclass(frozen=True)
class FieldSample:
    """One realisation on ``[-n, n]^d``; ``values`` has shape ``(2n+1,)*d``."""

    n: int
    values: np.ndarray
    seed: RngStream | None = None
    truncation_sd: float = 0.0

    def coordinates(self) -> np.ndarray:
        d = self.values.ndim
        ax = np.arange(-self.n, self.n + 1)
        grids = np.meshgrid(*([ax] * d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def to_csv(self) -> str:
        coords = self.coordinates()
        d = coords.shape[1]
        head = ",".join([f"t{i + 1}" for i in range(d)] + ["value"])
        lines = [head]
        for c, v in zip(coords, self.values.ravel()):
            lines.append(",".join(str(int(x)) for x in c) + f",{float(v)!r}")
        return "\n".join(lines) + "\n"


class FieldLayout:
    """Linear map from independent atoms to field values on a window.

    Sites are the window points (dissipative) or the elements of ``H_n``
    hit by the window (conservative); ``multiplicity[k]`` counts window
    points mapped to site ``k`` and ``lift`` maps window points (C order)
    to sites.
    """

    def __init__(self, spec: StableFieldSpec, n: int):
        if n < 0:
            raise ValueError("window radius must be nonnegative")
        self.spec = spec
        self.n = n
        d, T = spec.d, spec.support_radius
        self.d = d
        self.window_shape = (2 * n + 1,) * d
        if spec.regime == "dissipative":
            self.atom_shape = (spec.n_w,) + (2 * (n + T) + 1,) * d
            self.n_sites = (2 * n + 1) ** d
            self.multiplicity = np.ones(self.n_sites, dtype=np.int64)
            self.lift = np.arange(self.n_sites)
            offs = np.argwhere(spec.kernel != 0)
            self._terms = [(int(o[0]), tuple(int(x) for x in o[1:]), float(spec.kernel[tuple(o)])) for o in offs]
        else:
            G = spec.group
            elems, inverse, counts = coset_counts(n, G)
            self.sites = elems
            self.n_sites = len(elems)
            self.multiplicity = counts
            self.lift = inverse
            atoms, _, _ = coset_counts(n + T, G)
            self.atoms = atoms
            self.atom_shape = (spec.n_w, len(atoms))
            keys = _encode(atoms)
            site_pts = G.coset_reps[elems[:, 0]] + elems[:, 1:] @ G.U.T
            table = np.empty((len(spec.atoms), self.n_sites), dtype=np.int64)
            for a, z in enumerate(spec.atoms):
                c, f = project_many(embed(z, G)[None, :] - site_pts, G)
                pos = np.searchsorted(keys, _encode(np.column_stack([c, f]), like=atoms))
                table[a] = pos
            self.index = table  # atom index of z_a (-) s
            self._hvals = spec.kernel

    def apply(self, atoms: np.ndarray) -> np.ndarray:
        """Field at sites from atom array of shape ``(R,) + atom_shape``."""
        R = atoms.shape[0]
        spec = self.spec
        if spec.regime == "dissipative":
            n = self.n
            out = np.zeros((R,) + self.window_shape)
            width = 2 * n + 1
            for v, off, val in self._terms:
                sl = (slice(None), v) + tuple(slice(o, o + width) for o in off)
                out += val * atoms[sl]
            return out.reshape(R, -1)
        out = np.zeros((R, self.n_sites))
        for v in range(spec.n_w):
            for a in range(len(spec.atoms)):
                val = self._hvals[v, a]
                if val != 0:
                    out += val * atoms[:, v, self.index[a]]
        return out

    def atom_scales(self) -> np.ndarray:
        """Per-atom SaS scale in the series convention, broadcastable to atom_shape."""
        w = self.spec.weights ** (1.0 / self.spec.alpha) * series_scale_factor(self.spec.alpha)
        return w.reshape((-1,) + (1,) * (len(self.atom_shape) - 1))

    def sample_exact(self, gen: np.random.Generator, R: int) -> np.ndarray:
        Z = _standard_sas(self.spec.alpha, gen, (R,) + self.atom_shape) * self.atom_scales()
        return self.apply(Z)

    def sample_series(self, gen: np.random.Generator, R: int, eps: float, compensate: bool = True) -> np.ndarray:
        spec = self.spec
        alpha = spec.alpha
        n_pos = int(np.prod(self.atom_shape[1:]))
        mass = 2.0 * eps ** (-alpha) * spec.weights.sum() * n_pos  # per replicate
        counts = gen.poisson(mass, size=R)
        total = int(counts.sum())
        rep = np.repeat(np.arange(R), counts)
        jumps = eps * gen.uniform(size=total) ** (-1.0 / alpha)
        jumps *= np.where(gen.uniform(size=total) < 0.5, -1.0, 1.0)
        v = gen.choice(spec.n_w, size=total, p=spec.weights / spec.weights.sum()) if spec.n_w > 1 else np.zeros(total, dtype=np.int64)
        u = gen.integers(0, n_pos, size=total)
        flat = (rep * spec.n_w + v) * n_pos + u
        A = np.bincount(flat, weights=jumps, minlength=R * spec.n_w * n_pos).reshape((R,) + self.atom_shape)
        if compensate:
            sd = np.sqrt(small_jump_variance(alpha, eps) * spec.weights).reshape((-1,) + (1,) * (len(self.atom_shape) - 1))
            A = A + sd * gen.standard_normal((R,) + self.atom_shape)
        return self.apply(A)

    def to_window(self, site_values: np.ndarray) -> np.ndarray:
        return site_values[..., self.lift].reshape(site_values.shape[:-1] + self.window_shape)


def _encode(rows: np.ndarray, like: np.ndarray | None = None) -> np.ndarray:
    """Order-preserving int64 keys for lexicographically sorted integer rows."""
    ref = rows if like is None else like
    B = int(np.abs(ref[:, 1:]).max(initial=0)) + 1
    base = 2 * B + 1
    if base ** max(ref.shape[1] - 1, 0) * (int(ref[:, 0].max(initial=0)) + 1) > 2**62:
        raise OverflowError("H element keys exceed 64-bit range")
    key = rows[:, 0].astype(np.int64)
    for j in range(1, rows.shape[1]):
        col = np.clip(rows[:, j], -B, B)  # out-of-range rows never match
        key = key * base + (col + B)
    return key


def small_jump_variance(alpha: float, eps: float) -> float:
    """``int_{|x| <= eps} x^2 nu_alpha(dx) = 2 alpha eps^(2-alpha) / (2-alpha)``."""
    return 2.0 * alpha * eps ** (2.0 - alpha) / (2.0 - alpha)


def sample_field_exact(spec: StableFieldSpec, n: int, rng: RngStream) -> FieldSample:
    """Exact-in-law realisation on ``[-n, n]^d`` from independent SaS atoms."""
    layout = FieldLayout(spec, n)
    vals = layout.sample_exact(rng.generator(), 1)
    return FieldSample(n, layout.to_window(vals)[0], rng)


def sample_field_series(spec: StableFieldSpec, n: int, eps: float, rng: RngStream, compensate: bool = False) -> FieldSample:
    """Truncated Poisson-series realisation keeping points with ``|j| > eps``.

    The discarded points form a symmetric field whose per-site standard
    deviation is reported as ``truncation_sd``. With ``compensate`` the
    discarded part is replaced by a Gaussian field of the same covariance.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    layout = FieldLayout(spec, n)
    vals = layout.sample_series(rng.generator(), 1, eps, compensate)
    var = small_jump_variance(spec.alpha, eps) * float((spec.weights[:, None] * spec.atom_values() ** 2).sum())
    return FieldSample(n, layout.to_window(vals)[0], rng, truncation_sd=0.0 if compensate else math.sqrt(var))


def exact_scale(spec: StableFieldSpec, coeffs) -> float:
    """SaS scale of ``sum_t c_t X_t`` for coefficients on a window ``[-n, n]^d``.

    Parameters
    ----------
    coeffs : ndarray, shape ``(2n+1,)*d``
        Coefficients in C order over the window.
    """
    spec_d = spec.d
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != spec_d or len(set(c.shape)) != 1 or c.shape[0] % 2 == 0:
        raise ValueError("coefficients must cover a centred cube window")
    n = (c.shape[0] - 1) // 2
    alpha = spec.alpha
    total = 0.0
    if spec.regime == "dissipative":
        for v in range(spec.n_w):
            a = signal.convolve(c, spec.kernel[v], mode="full", method="direct")
            total += spec.weights[v] * float(np.sum(np.abs(a) ** alpha))
    else:
        layout = FieldLayout(spec, n)
        folded = np.bincount(layout.lift, weights=c.ravel(), minlength=layout.n_sites)
        n_atoms = layout.atom_shape[1]
        for v in range(spec.n_w):
            a = np.zeros(n_atoms)
            for k in range(len(spec.atoms)):
                if spec.kernel[v, k] != 0:
                    a += np.bincount(layout.index[k], weights=spec.kernel[v, k] * folded, minlength=n_atoms)
            total += spec.weights[v] * float(np.sum(np.abs(a) ** alpha))
    return series_scale_factor(alpha) * total ** (1.0 / alpha)


def stable_cdf(x, alpha: float, scale: float = 1.0):
    """CDF of SaS(scale) by Gil-Pelaez inversion of ``exp(-|theta|^alpha)``."""
    from scipy import integrate

    def one(z):
        if z == 0:
            return 0.5
        x = abs(z) / scale
        top = 40.0 ** (1.0 / alpha)  # exp(-top^alpha) is negligible
        val, _ = integrate.quad(
            lambda th: x * np.sinc(x * th / math.pi) * math.exp(-th**alpha),
            0.0, top, limit=1000, epsabs=1e-13, epsrel=1e-12,
        )
        return 0.5 + math.copysign(val / math.pi, z)

    return np.vectorize(one)(x) if np.ndim(x) else one(float(x))


def stable_sf_tail(x, alpha: float, scale: float) -> float:
    """Upper tail ``P(X > x)`` of SaS(scale); exact Cauchy form at alpha = 1."""
    if alpha == 1.0:
        return 0.5 - math.atan(x / scale) / math.pi
    return 1.0 - float(stable_cdf(x, alpha, scale))


def stable_quantile(p: float, alpha: float, scale: float = 1.0) -> float:
    from scipy import optimize

    if alpha == 1.0:
        return scale * math.tan(math.pi * (p - 0.5))
    hi = 1.0
    while stable_cdf(hi, alpha) < p:
        hi *= 2
    return scale * optimize.brentq(lambda z: stable_cdf(z, alpha) - p, -hi, hi, xtol=1e-12)

