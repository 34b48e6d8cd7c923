"""Monte Carlo estimation of scaled rare-event probabilities.

Replicates are drawn in fixed-size chunks; chunk ``c`` of schedule entry
``i`` uses the random stream ``(seed, i * 2**32 + c)``, and chunk results are
combined in chunk order. Estimates are therefore bitwise identical for any
thread count.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .field_model import (
    ConfigError,
    FieldLayout,
    RngStream,
    StableFieldSpec,
    exact_scale,
    series_scale_factor,
    stable_sf_tail,
)
from .geometry import ActionGeometry
from .limit_theory import (
    LimitValue,
    TestFunctionPair,
    _neighbourhood,
    _q_of,
    c_f,
    c_lvh,
    limit_functional,
    max_limit_conservative,
    order_stats_limit,
    passage_limit_conservative,
    passage_limit_dissipative,
)

__all__ = [
    "CSV_HEADER",
    "EventSpec",
    "ExperimentConfig",
    "EstimateRecord",
    "run_ldp_experiment",
    "empirical_point_functional",
    "event_limit",
    "fit_tail_exponent",
    "weak_convergence_check",
    "sigma_equivalence_check",
    "records_to_csv",
    "summarize",
]

CSV_HEADER = ("regime", "event", "n", "scaling", "replicates", "p_hat", "se", "scaled", "limit", "ratio")
CHUNK = 4096
_STREAM_STRIDE = 2**32
_KINDS = ("orderStats", "passage", "maxExceed", "sumExceed", "functional")


@dataclass(frozen=True)
class EventSpec:
    """Rare event evaluated on one field realisation.

    Use the constructors ``order_stats``, ``passage``, ``max_exceed``,
    ``sum_exceed`` and ``functional``.
    """

    kind: str
    y: tuple[float, ...] = ()
    a: float = 0.0
    lam: float = 1.0
    pair: TestFunctionPair | None = None
    side: str = "upper"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.side not in ("upper", "two-sided"):
            raise ConfigError("side must be 'upper' or 'two-sided'")
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if self.kind == "passage":
            if not self.a > 0:
                raise ConfigError("passage level a must be positive")
            if not 0 < self.lam <= 1:
                raise ConfigError("passage fraction lam must lie in (0,1]")
        elif self.kind == "functional":
            if self.pair is None:
                raise ConfigError("functional event needs a test-function pair")
            if self.side != "upper":
                raise ConfigError("functional events take no side")
        else:
            if not self.y or any(not v > 0 for v in self.y):
                raise ConfigError("thresholds must be positive")
            if self.kind != "orderStats" and len(self.y) != 1:
                raise ConfigError(f"{self.kind} takes a single threshold")

    @classmethod
    def order_stats(cls, *y, side="upper"):
        return cls("orderStats", y=tuple(y), side=side)

    @classmethod
    def passage(cls, a, lam=1.0, side="upper"):
        return cls("passage", a=float(a), lam=float(lam), side=side)

    @classmethod
    def max_exceed(cls, y, side="upper"):
        return cls("maxExceed", y=(y,), side=side)

    @classmethod
    def sum_exceed(cls, y, side="upper"):
        return cls("sumExceed", y=(y,), side=side)

    @classmethod
    def functional(cls, pair: TestFunctionPair):
        return cls("functional", pair=pair)

    @property
    def label(self) -> str:
        if self.kind == "passage":
            args = f"a={self.a:g};lam={self.lam:g}"
        elif self.kind == "functional":
            args = f"eps={self.pair.eps1:g};{self.pair.eps2:g}"
        else:
            args = "y=" + ";".join(f"{v:g}" for v in self.y)
        tag = "" if self.side == "upper" else "|two-sided"
        return f"{self.kind}({args}){tag}"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    spec: StableFieldSpec
    n_schedule: tuple[int, ...]
    scaling_exponent: float
    replicates: int
    seed: int
    event: EventSpec
    geometry: ActionGeometry | None = None
    parallelism: int = 1

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_schedule)
        object.__setattr__(self, "n_schedule", ns)
        if not ns:
            raise ConfigError("nSchedule must not be empty")
        if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("nSchedule must be increasing positive radii")
        if not self.scaling_exponent > 0:
            raise ConfigError("scalingExponent must be positive")
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be positive")
        if int(self.parallelism) < 1:
            raise ConfigError("parallelism must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        regime = self.spec.regime
        if regime == "conservative":
            if self.geometry is None:
                raise ConfigError("conservative experiments need the action geometry")
            if self.event.kind == "orderStats":
                raise ConfigError("orderStats events apply to dissipative fields only")
            if self.geometry.volume_dim == 0:
                raise ConfigError("conservative field needs a nontrivial kernel (p < d)")
        if self.event.kind == "functional" and self.event.pair.g1.size != (2 * self.spec.q + 1) ** self.spec.d:
            raise ConfigError("test functions must act on the field's (2q+1)^d neighbourhood")

    @property
    def rate_dim(self) -> int:
        """``d`` (dissipative) or ``p`` (conservative)."""
        return self.spec.d if self.spec.regime == "dissipative" else self.geometry.p

    def scaling(self, n: int) -> float:
        return float(n) ** (self.rate_dim / self.spec.alpha + self.scaling_exponent)

    def prefactor(self, n: int) -> float:
        return self.scaling(n) ** self.spec.alpha / float(n) ** self.rate_dim


@dataclass(frozen=True)
class EstimateRecord:
    regime: str
    event: str
    n: int
    scaling: float
    replicates: int
    p_hat: float
    se: float
    scaled: float
    limit: float
    ratio: float
    limit_error: float = 0.0
    oracle: float | None = None  # exact finite-n prediction of ``scaled`` when available

    @property
    def scaled_se(self) -> float:
        return self.se * self.scaled / self.p_hat if self.p_hat > 0 else 0.0

    @property
    def oracle_ratio(self) -> float | None:
        if self.oracle is None:
            return None
        return _ratio(self.scaled, self.oracle)

    def row(self) -> list:
        return [self.regime, self.event, self.n, repr(self.scaling), self.replicates, repr(self.p_hat), repr(self.se), repr(self.scaled), repr(self.limit), repr(self.ratio)]


def _ratio(est: float, lim: float) -> float:
    if lim == 0:
        return math.inf if est > 0 else math.nan
    return est / lim


def event_limit(cfg: ExperimentConfig) -> LimitValue:
    """Analytic limit of the scaled probability for ``cfg.event``."""
    spec, ev, geom = cfg.spec, cfg.event, cfg.geometry
    two = 2.0 if ev.side == "two-sided" else 1.0
    cons = spec.regime == "conservative"
    if ev.kind == "orderStats":
        return order_stats_limit(spec, ev.y, ev.side)
    if ev.kind == "maxExceed":
        if cons:
            return max_limit_conservative(spec, geom, ev.y[0], ev.side)
        return passage_limit_dissipative(spec, ev.y[0], 1.0, ev.side)
    if ev.kind == "passage":
        if cons:
            return passage_limit_conservative(spec, geom, ev.a, ev.lam, ev.side)
        return passage_limit_dissipative(spec, ev.a, ev.lam, ev.side)
    if ev.kind == "sumExceed":
        c = c_lvh(spec, geom) if cons else c_f(spec)
        k = two * ev.y[0] ** (-spec.alpha)
        return LimitValue(c.value**spec.alpha * k, c.method, spec.alpha * c.value ** (spec.alpha - 1) * c.error_bound * k)
    return limit_functional(spec, geom, ev.pair)


def _sum_oracle(cfg: ExperimentConfig, n: int) -> float:
    """Exact ``prefactor * P(normalised S_n > y)`` from the SaS scale of ``S_n``."""
    spec = cfg.spec
    sigma = exact_scale(spec, np.ones((2 * n + 1,) * spec.d))
    if sigma == 0:
        return 0.0
    thr = cfg.event.y[0] * cfg.scaling(n)
    if spec.regime == "conservative":
        thr *= float(n) ** (spec.d - cfg.geometry.p)
    p = stable_sf_tail(thr, spec.alpha, sigma)
    if cfg.event.side == "two-sided":
        p *= 2.0
    return cfg.prefactor(n) * p


class _Evaluator:
    """Per-chunk event statistic ``(sum F, sum F^2)`` for one window radius."""

    def __init__(self, cfg: ExperimentConfig, n: int):
        self.cfg = cfg
        self.n = n
        ev = cfg.event
        spec = cfg.spec
        self.scale = cfg.scaling(n)
        radius = n
        if ev.kind == "passage":
            radius = int(math.floor(ev.lam * n))
        elif ev.kind == "functional":
            radius = n + spec.q
        self.layout = FieldLayout(spec, radius)
        sites = self.layout.n_sites if ev.kind != "functional" else int(np.prod(self.layout.window_shape))
        atoms = int(np.prod(self.layout.atom_shape))
        work = max(sites * (ev.pair.g1.size if ev.pair else 1), atoms)
        self.chunk = int(max(16, min(CHUNK, 2**22 // max(work, 1))))
        if ev.kind == "functional":
            self._setup_functional()

    def _setup_functional(self):
        cfg, n = self.cfg, self.n
        spec = cfg.spec
        d, q = spec.d, _q_of(cfg.event.pair, spec.d)
        W = _neighbourhood(q, d)
        ax = np.arange(-n, n + 1) / n
        t = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
        pair = cfg.event.pair
        self.tf1 = pair.g1.t_factor(t)
        self.tf2 = pair.g2.t_factor(t)
        width = 2 * n + 1
        self.slices = [tuple(slice(q - w[i], q - w[i] + width) for i in range(d)) for w in W]
        mass = 1.0
        if spec.regime == "conservative":
            mass = float(n) ** (cfg.geometry.p - d)
        self.mass = mass

    def __call__(self, stream: RngStream, R: int) -> tuple[float, float]:
        gen = stream.generator()
        vals = self.layout.sample_exact(gen, R)
        F = self.statistic(vals)
        return float(F.sum()), float(np.square(F).sum())

    def statistic(self, vals: np.ndarray) -> np.ndarray:
        ev, spec = self.cfg.event, self.cfg.spec
        kind = ev.kind
        if kind == "functional":
            return self._functional(vals)
        if kind == "sumExceed":
            S = vals @ self.layout.multiplicity.astype(float)
            if spec.regime == "conservative":
                S = S * float(self.n) ** (self.cfg.geometry.p - spec.d)
            if ev.side == "two-sided":
                S = np.abs(S)
            return (S > ev.y[0] * self.scale).astype(float)
        Y = np.abs(vals) if ev.side == "two-sided" else vals
        if kind == "orderStats":
            m = len(ev.y)
            if m > Y.shape[1]:
                return np.zeros(Y.shape[0])
            top = -np.sort(-np.partition(Y, Y.shape[1] - m, axis=1)[:, Y.shape[1] - m:], axis=1)
            return np.all(top > np.asarray(ev.y) * self.scale, axis=1).astype(float)
        level = ev.a if kind == "passage" else ev.y[0]
        return (Y.max(axis=1) > level * self.scale).astype(float)

    def _functional(self, vals: np.ndarray) -> np.ndarray:
        pair = self.cfg.event.pair
        R = vals.shape[0]
        window = self.layout.to_window(vals) / self.scale
        Z = np.stack([window[(slice(None),) + sl].reshape(R, -1) for sl in self.slices], axis=-1)
        xi1 = self.mass * pair.g1.height * (pair.g1.z_factor(Z) * self.tf1).sum(axis=1)
        xi2 = self.mass * pair.g2.height * (pair.g2.z_factor(Z) * self.tf2).sum(axis=1)
        return pair.F(xi1, xi2)


def _estimate(cfg: ExperimentConfig, i: int, n: int) -> tuple[float, float]:
    ev = _Evaluator(cfg, n)
    R = int(cfg.replicates)
    sizes = [min(ev.chunk, R - s) for s in range(0, R, ev.chunk)]
    streams = [RngStream(cfg.seed, i * _STREAM_STRIDE + c) for c in range(len(sizes))]
    if cfg.parallelism > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            parts = list(pool.map(ev, streams, sizes))
    else:
        parts = [ev(s, k) for s, k in zip(streams, sizes)]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / R
    var = max(total_sq / R - mean * mean, 0.0)
    return mean, math.sqrt(var / R)


def run_ldp_experiment(cfg: ExperimentConfig) -> list[EstimateRecord]:
    """Scaled Monte Carlo estimates for every radius in the schedule.

    Indicator events give ``p_hat`` with binomial standard error
    ``sqrt(p_hat (1 - p_hat) / R)``; functional events give the sample mean
    of ``F`` and its standard error.
    """
    lim = event_limit(cfg)
    out = []
    for i, n in enumerate(cfg.n_schedule):
        p_hat, se = _estimate(cfg, i, n)
        scaled = cfg.prefactor(n) * p_hat
        oracle = _sum_oracle(cfg, n) if cfg.event.kind == "sumExceed" else None
        out.append(
            EstimateRecord(
                cfg.spec.regime, cfg.event.label, n, cfg.scaling(n), int(cfg.replicates),
                p_hat, se, scaled, lim.value, _ratio(scaled, lim.value), lim.error_bound, oracle,
            )
        )
    return out


def empirical_point_functional(cfg: ExperimentConfig) -> list[EstimateRecord]:
    """Estimate the scaled expectation of ``F`` at the empirical point process."""
    if cfg.event.kind != "functional":
        raise ConfigError("empirical_point_functional needs a functional event")
    return run_ldp_experiment(cfg)


def fit_tail_exponent(records: list[EstimateRecord], rate_dim: int) -> float | None:
    """Least-squares slope of ``log(p_hat / n^k)`` against ``log(scaling)``.

    With ``p_hat ~ L n^k scaling^-alpha`` the slope estimates ``-alpha``.
    Needs at least two records with ``p_hat > 0``.
    """
    pts = [(math.log(r.scaling), math.log(r.p_hat) - rate_dim * math.log(r.n)) for r in records if r.p_hat > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class KSReport:
    n: int
    replicates: int
    constant: float
    ks_distance: float
    p_value: float
    normalisation: str
    alpha: float = field(default=0.0)


def weak_convergence_check(spec: StableFieldSpec, n: int, R: int, seed: int = 0, geometry: ActionGeometry | None = None, parallelism: int = 1) -> KSReport:
    """KS distance between normalised window maxima and the limiting Frechet law.

    Maxima are divided by ``n^(d/alpha)`` (dissipative) or ``n^(p/alpha)``
    (conservative) and compared with ``exp(-c x^-alpha)``, where ``c`` is the
    max/passage limit constant at level one.
    """
    if R < 1000:
        raise ValueError("need at least 1000 replicates")
    alpha = spec.alpha
    if spec.regime == "dissipative":
        c = passage_limit_dissipative(spec, 1.0, 1.0).value
        k = spec.d
    else:
        if geometry is None:
            raise ConfigError("conservative check needs the action geometry")
        c = max_limit_conservative(spec, geometry, 1.0).value
        k = geometry.p
    norm = float(n) ** (k / alpha)
    layout = FieldLayout(spec, n)
    chunk = int(max(16, min(CHUNK, 2**22 // max(int(np.prod(layout.atom_shape)), 1))))
    sizes = [min(chunk, R - s) for s in range(0, R, chunk)]

    def run(c_idx, size):
        vals = layout.sample_exact(RngStream(seed, c_idx).generator(), size)
        return vals.max(axis=1) / norm

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(run, range(len(sizes)), sizes))
    else:
        parts = [run(i, s) for i, s in enumerate(sizes)]
    M = np.concatenate(parts)
    if c == 0:
        return KSReport(n, R, 0.0, math.nan, math.nan, f"n^({k}/alpha)", alpha)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-c * x[pos] ** (-alpha))
        return out

    res = stats.kstest(M, cdf)
    return KSReport(n, R, c, float(res.statistic), float(res.pvalue), f"n^({k}/alpha)", alpha)


def sigma_equivalence_check(spec: StableFieldSpec, n_schedule, geometry: ActionGeometry | None = None) -> dict:
    """Exact scales of the partial sums against the limit constant.

    Rows give ``sigma_n``, its normalisation (``n^(-d/alpha) sigma_n``, or
    ``n^(p-d-p/alpha) sigma_n`` for conservative fields) and the ratio to
    ``C_f`` / ``C_{l,V,h}``. The ratio converges to the series-scale factor
    ``(2 / C_alpha)^(1/alpha)``, the constant relating the char.-function
    scale to the tail constant of the Poisson representation.
    """
    alpha = spec.alpha
    if spec.regime == "dissipative":
        const = c_f(spec).value
        power = -spec.d / alpha
    else:
        if geometry is None:
            raise ConfigError("conservative check needs the action geometry")
        const = c_lvh(spec, geometry).value
        p = geometry.p
        power = p - spec.d - p / alpha
    rows = []
    for n in n_schedule:
        sigma = exact_scale(spec, np.ones((2 * n + 1,) * spec.d))
        normed = sigma * float(n) ** power
        rows.append({"n": int(n), "sigma_n": sigma, "normalised": normed, "factor": _ratio(normed, const) if const else math.nan})
    factor = series_scale_factor(alpha)
    last = rows[-1]["factor"] if rows else math.nan
    return {
        "constant": const,
        "expected_factor": factor,
        "observed_factor": last,
        "relative_gap": abs(last / factor - 1) if const else math.nan,
        "relation": "normalised sigma_n -> (2/C_alpha)^(1/alpha) * constant",
        "rows": rows,
    }


def records_to_csv(records: list[EstimateRecord], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def summarize(cfg: ExperimentConfig, records: list[EstimateRecord], ks: KSReport | None = None, sigma: dict | None = None) -> dict:
    """JSON-ready summary with fitted exponents, ratio drift and diagnostics."""
    slope = fit_tail_exponent(records, cfg.rate_dim)
    ratios = [r.ratio for r in records]
    out = {
        "regime": cfg.spec.regime,
        "event": cfg.event.label,
        "alpha": cfg.spec.alpha,
        "scalingExponent": cfg.scaling_exponent,
        "replicates": int(cfg.replicates),
        "seed": int(cfg.seed),
        "limit": records[0].limit if records else None,
        "limitError": records[0].limit_error if records else None,
        "fittedExponent": slope,
        "exponentRelativeError": None if slope is None else abs(-slope / cfg.spec.alpha - 1),
        "ratios": ratios,
        "ratioDrift": _ratio_drift(records),
        "records": [_jsonable(asdict(r)) for r in records],
    }
    if records and records[0].oracle is not None:
        out["oracleRatios"] = [r.oracle_ratio for r in records]
    if ks is not None:
        out["ks"] = _jsonable(asdict(ks))
    if sigma is not None:
        out["sigmaEquivalence"] = _jsonable(sigma)
    return out


def _ratio_drift(records: list[EstimateRecord]) -> float | None:
    """``|ratio(n_max) - ratio(n')|`` with ``n'`` the radius closest to ``n_max / 2``."""
    if len(records) < 2:
        return None
    last = records[-1]
    half = min(records[:-1], key=lambda r: abs(r.n - last.n / 2))
    return abs(last.ratio - half.ratio)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj
