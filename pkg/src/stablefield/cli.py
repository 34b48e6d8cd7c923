"""Batch front end: ``stablefield <subcommand> --config run.json --out dir``.

Exit status 0 on success, 1 on configuration errors, 2 on runtime or
capacity errors. Every output file starts with (or, for JSON, contains) the
hash of the canonical configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field_model import (
    ConfigError,
    RngStream,
    StableFieldSpec,
    kernel_from_entries,
    sample_field_exact,
    sample_field_series,
)
from .geometry import ActionGeometry, delta_bounds, integral_v_alpha, leb_delta, q_volume
from .lattice_algebra import CapacityError, GroupStructure, InvalidActionError, analyze_action, project_to_H, trivial_action
from .ldp_harness import (
    EventSpec,
    ExperimentConfig,
    event_limit,
    records_to_csv,
    run_ldp_experiment,
    sigma_equivalence_check,
    summarize,
    weak_convergence_check,
)
from .limit_theory import Bump, TestFunctionPair, c_f, c_lvh, max_limit_conservative, passage_limit_dissipative

__all__ = ["RunConfig", "ConfigErrors", "parse_config", "dispatch", "main", "THREADS_ENV"]

THREADS_ENV = "STABLEFIELD_THREADS"
SCHEMA_VERSION = 1
SUBCOMMANDS = ("analyze-action", "geometry", "limits", "simulate", "ldp", "report")


class ConfigErrors(ConfigError):
    """Schema violations, each a ``(path, message)`` pair."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


_TOP = {"version", "action", "field", "experiment", "simulate", "output"}
_FIELD = {"alpha", "regime", "d", "kernel", "weights", "labels", "q"}
_EXPERIMENT = {"nSchedule", "scalingExponent", "replicates", "seed", "event", "parallelism", "weakConvergence", "sigmaSchedule"}
_EVENT = {"kind", "y", "a", "lam", "side", "g1", "g2", "eps1", "eps2"}
_BUMP = {"height", "zLower", "zUpper", "zRamp", "tLower", "tUpper", "tRamp"}
_SIMULATE = {"n", "sampler", "eps", "compensate"}
_OUTPUT = {"dir"}
_WEAK = {"n", "replicates"}


class _Checker:
    def __init__(self):
        self.errors: list[tuple[str, str]] = []

    def fail(self, path, msg):
        self.errors.append((path, msg))

    def obj(self, value, path, allowed, required=()):
        if not isinstance(value, dict):
            self.fail(path, "expected an object")
            return None
        for k in sorted(set(value) - allowed):
            self.fail(f"{path}.{k}", "unknown key")
        for k in required:
            if k not in value:
                self.fail(f"{path}.{k}", "missing required key")
        return value

    def number(self, value, path, lo=None, hi=None, open_lo=False, open_hi=False, integer=False):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if integer:
            ok = ok and isinstance(value, int)
        if not ok or (isinstance(value, float) and not math.isfinite(value)):
            self.fail(path, "expected an integer" if integer else "expected a finite number")
            return None
        if lo is not None and (value <= lo if open_lo else value < lo):
            return self._range(path, value)
        if hi is not None and (value >= hi if open_hi else value > hi):
            return self._range(path, value)
        return value

    def _range(self, path, value):
        self.fail(path, f"value {value!r} out of range")
        return None


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; ``data`` is the normalised JSON document."""

    data: dict

    @property
    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)

    @property
    def d(self) -> int:
        return int(self.data["field"]["d"])

    def group(self) -> GroupStructure:
        act = self.data["action"]
        if act == "trivial":
            return trivial_action(self.d)
        return analyze_action(np.array(act["kernelBasis"], dtype=np.int64).T, d=self.d)

    def spec(self, group: GroupStructure | None = None) -> StableFieldSpec:
        f = self.data["field"]
        d = self.d
        weights = f.get("weights")
        n_w = 1 if weights is None else len(weights)
        labels = tuple(f.get("labels", ()))
        q = int(f.get("q", 0))
        if f["regime"] == "dissipative":
            entries = {(int(e.get("w", 0)), *e["offset"]): float(e["value"]) for e in f["kernel"]}
            kernel = kernel_from_entries(entries, d, n_w)
            return StableFieldSpec(f["alpha"], kernel, np.ones(1) if weights is None else np.asarray(weights, float), "dissipative", labels, q=q)
        G = group or self.group()
        values: dict = {}
        for e in f["kernel"]:
            h = project_to_H(e["offset"], G)
            vec = values.setdefault(h, np.zeros(n_w))
            vec[int(e.get("w", 0))] += float(e["value"])
        return StableFieldSpec.conservative(f["alpha"], values, G, weights, labels, q)

    def experiment(self, spec: StableFieldSpec, geometry: ActionGeometry | None, seed=None, threads=None) -> ExperimentConfig:
        x = self.data["experiment"]
        return ExperimentConfig(
            spec,
            tuple(x["nSchedule"]),
            float(x["scalingExponent"]),
            int(x["replicates"]),
            int(x["seed"] if seed is None else seed),
            _event(x["event"]),
            geometry if spec.regime == "conservative" else None,
            int(threads or x.get("parallelism") or os.cpu_count() or 1),
        )


def _inf(v):
    return math.inf if v is None else float(v)


def _bump(b: dict) -> Bump:
    lo = [-_inf(v) if v is None else float(v) for v in b["zLower"]]
    hi = [_inf(v) for v in b["zUpper"]]
    t_lo = None if b.get("tLower") is None else [-_inf(v) if v is None else float(v) for v in b["tLower"]]
    t_hi = None if b.get("tUpper") is None else [_inf(v) for v in b["tUpper"]]
    return Bump(float(b["height"]), lo, hi, float(b["zRamp"]), t_lo, t_hi, float(b.get("tRamp", 0.1)))


def _event(e: dict) -> EventSpec:
    kind, side = e["kind"], e.get("side", "upper")
    if kind == "orderStats":
        return EventSpec.order_stats(*e["y"], side=side)
    if kind == "passage":
        return EventSpec.passage(e["a"], e.get("lam", 1.0), side=side)
    if kind == "maxExceed":
        return EventSpec.max_exceed(e["y"][0], side=side)
    if kind == "sumExceed":
        return EventSpec.sum_exceed(e["y"][0], side=side)
    return EventSpec.functional(TestFunctionPair(_bump(e["g1"]), _bump(e["g2"]), float(e["eps1"]), float(e["eps2"])))


def _check_field(c: _Checker, f, action) -> None:
    if c.obj(f, "field", _FIELD, ("alpha", "regime", "d", "kernel")) is None:
        return
    alpha = f.get("alpha")
    if isinstance(alpha, (int, float)) and not isinstance(alpha, bool):
        if not 0 < alpha < 2:
            c.fail("field.alpha", "alpha must lie in (0,2)")
    elif "alpha" in f:
        c.fail("field.alpha", "expected a finite number")
    regime = f.get("regime")
    if regime not in ("dissipative", "conservative"):
        c.fail("field.regime", "must be 'dissipative' or 'conservative'")
    d = c.number(f.get("d"), "field.d", lo=1, integer=True) if "d" in f else None
    weights = f.get("weights")
    n_w = 1
    if weights is not None:
        if not isinstance(weights, list) or not weights:
            c.fail("field.weights", "expected a nonempty list")
        else:
            for i, w in enumerate(weights):
                c.number(w, f"field.weights[{i}]", lo=0, open_lo=True)
            n_w = len(weights)
    if "labels" in f and (not isinstance(f["labels"], list) or len(f["labels"]) != n_w):
        c.fail("field.labels", "expected one label per weight")
    if "q" in f:
        c.number(f["q"], "field.q", lo=0, integer=True)
    kernel = f.get("kernel")
    if kernel is not None:
        if not isinstance(kernel, list) or not kernel:
            c.fail("field.kernel", "expected a nonempty list of {offset, value[, w]}")
        else:
            for i, e in enumerate(kernel):
                p = f"field.kernel[{i}]"
                if c.obj(e, p, {"offset", "value", "w"}, ("offset", "value")) is None:
                    continue
                off = e.get("offset")
                if not isinstance(off, list) or (d is not None and len(off) != d) or not all(isinstance(x, int) and not isinstance(x, bool) for x in off):
                    c.fail(f"{p}.offset", "expected d integers")
                c.number(e.get("value"), f"{p}.value")
                if "w" in e:
                    c.number(e["w"], f"{p}.w", lo=0, hi=n_w - 1, integer=True)
    if regime == "conservative" and action == "trivial":
        c.fail("action", "conservative field needs a nontrivial kernel basis")
    if regime == "dissipative" and action not in ("trivial", None):
        c.fail("action", "dissipative fields use the trivial action")


def _check_bump(c: _Checker, b, path, size, d):
    if c.obj(b, path, _BUMP, ("height", "zLower", "zUpper", "zRamp")) is None:
        return
    c.number(b.get("height"), f"{path}.height", lo=0)
    c.number(b.get("zRamp"), f"{path}.zRamp", lo=0, open_lo=True)
    for k in ("zLower", "zUpper"):
        v = b.get(k)
        if not isinstance(v, list) or (size is not None and len(v) != size):
            c.fail(f"{path}.{k}", f"expected {size} numbers or nulls")
    for k in ("tLower", "tUpper"):
        v = b.get(k)
        if v is not None and (not isinstance(v, list) or (d is not None and len(v) != d)):
            c.fail(f"{path}.{k}", "expected d numbers or nulls")
    if "tRamp" in b:
        c.number(b["tRamp"], f"{path}.tRamp", lo=0, open_lo=True)


def _check_event(c: _Checker, e, field: dict):
    if c.obj(e, "experiment.event", _EVENT, ("kind",)) is None:
        return
    kind = e.get("kind")
    if kind not in ("orderStats", "passage", "maxExceed", "sumExceed", "functional"):
        c.fail("experiment.event.kind", "unknown event kind")
        return
    if e.get("side", "upper") not in ("upper", "two-sided"):
        c.fail("experiment.event.side", "must be 'upper' or 'two-sided'")
    if kind in ("orderStats", "maxExceed", "sumExceed"):
        y = e.get("y")
        if not isinstance(y, list) or not y or (kind != "orderStats" and len(y) != 1):
            c.fail("experiment.event.y", "expected a list of positive thresholds" if kind == "orderStats" else "expected one positive threshold")
        else:
            for i, v in enumerate(y):
                c.number(v, f"experiment.event.y[{i}]", lo=0, open_lo=True)
        if kind == "orderStats" and field.get("regime") == "conservative":
            c.fail("experiment.event.kind", "orderStats events apply to dissipative fields only")
    elif kind == "passage":
        c.number(e.get("a"), "experiment.event.a", lo=0, open_lo=True)
        if "lam" in e:
            c.number(e["lam"], "experiment.event.lam", lo=0, hi=1, open_lo=True)
    else:
        d = field.get("d") if isinstance(field.get("d"), int) else None
        q = field.get("q", 0) if isinstance(field.get("q", 0), int) else 0
        size = None if d is None else (2 * q + 1) ** d
        for g in ("g1", "g2"):
            if g not in e:
                c.fail(f"experiment.event.{g}", "missing required key")
            else:
                _check_bump(c, e[g], f"experiment.event.{g}", size, d)
        for k in ("eps1", "eps2"):
            c.number(e.get(k), f"experiment.event.{k}", lo=0, open_lo=True)


def _check_experiment(c: _Checker, x, field: dict):
    if c.obj(x, "experiment", _EXPERIMENT, ("nSchedule", "scalingExponent", "replicates", "seed", "event")) is None:
        return
    ns = x.get("nSchedule")
    if not isinstance(ns, list) or not ns:
        c.fail("experiment.nSchedule", "expected a nonempty increasing list of radii")
    elif not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        c.fail("experiment.nSchedule", "expected a nonempty increasing list of radii")
    c.number(x.get("scalingExponent"), "experiment.scalingExponent", lo=0, open_lo=True)
    c.number(x.get("replicates"), "experiment.replicates", lo=1, integer=True)
    c.number(x.get("seed"), "experiment.seed", lo=0, hi=2**64 - 1, integer=True)
    if "parallelism" in x:
        c.number(x["parallelism"], "experiment.parallelism", lo=1, integer=True)
    if "weakConvergence" in x and c.obj(x["weakConvergence"], "experiment.weakConvergence", _WEAK, ("n", "replicates")) is not None:
        c.number(x["weakConvergence"].get("n"), "experiment.weakConvergence.n", lo=1, integer=True)
        c.number(x["weakConvergence"].get("replicates"), "experiment.weakConvergence.replicates", lo=1000, integer=True)
    if "sigmaSchedule" in x:
        s = x["sigmaSchedule"]
        if not isinstance(s, list) or not all(isinstance(n, int) and n >= 1 for n in s):
            c.fail("experiment.sigmaSchedule", "expected a list of positive radii")
    if "event" in x:
        _check_event(c, x["event"], field)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON run configuration.

    Raises
    ------
    ConfigErrors
        With every offending field path, e.g.
        ``field.alpha: alpha must lie in (0,2)``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigErrors([("$", f"malformed JSON: {exc.msg} at line {exc.lineno} column {exc.colno}")]) from None
    c = _Checker()
    if c.obj(doc, "$", _TOP, ("version", "action", "field")) is None:
        raise ConfigErrors(c.errors)
    if doc.get("version") != SCHEMA_VERSION:
        c.fail("version", f"unsupported schema version (expected {SCHEMA_VERSION})")
    action = doc.get("action")
    field = doc.get("field") if isinstance(doc.get("field"), dict) else {}
    d = field.get("d") if isinstance(field.get("d"), int) else None
    if action != "trivial":
        if c.obj(action, "action", {"kernelBasis"}, ("kernelBasis",)) is not None:
            kb = action.get("kernelBasis")
            if not isinstance(kb, list) or not kb or not all(
                isinstance(r, list) and (d is None or len(r) == d) and all(isinstance(v, int) and not isinstance(v, bool) for v in r) for r in kb
            ):
                c.fail("action.kernelBasis", "expected a nonempty list of integer vectors of length d")
    _check_field(c, doc.get("field"), action)
    if "experiment" in doc:
        _check_experiment(c, doc["experiment"], field)
    if "simulate" in doc and c.obj(doc["simulate"], "simulate", _SIMULATE) is not None:
        s = doc["simulate"]
        if "n" in s:
            c.number(s["n"], "simulate.n", lo=0, integer=True)
        if s.get("sampler", "exact") not in ("exact", "series"):
            c.fail("simulate.sampler", "must be 'exact' or 'series'")
        if "eps" in s:
            c.number(s["eps"], "simulate.eps", lo=0, open_lo=True)
    if "output" in doc and c.obj(doc["output"], "output", _OUTPUT) is not None:
        if not isinstance(doc["output"].get("dir", ""), str):
            c.fail("output.dir", "expected a string")
    if c.errors:
        raise ConfigErrors(c.errors)
    cfg = RunConfig(json.loads(json.dumps(doc)))
    # semantic checks that need the algebra
    try:
        G = cfg.group()
        if field["regime"] == "conservative" and G.p == G.d:
            raise ConfigErrors([("action", "conservative field needs a kernel of positive rank")])
        cfg.spec(G)
    except InvalidActionError as exc:
        raise ConfigErrors([("action.kernelBasis", str(exc))]) from None
    except ConfigErrors:
        raise
    except ConfigError as exc:
        raise ConfigErrors([("field", str(exc))]) from None
    return cfg


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj: dict, cfg: RunConfig) -> str:
    return json.dumps({"configHash": cfg.hash, **obj}, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _csv_text(header, rows, cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# config-hash: {cfg.hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _geometry(cfg: RunConfig, G: GroupStructure) -> ActionGeometry | None:
    if cfg.data["field"]["regime"] != "conservative":
        return None
    return ActionGeometry(G)


def _limits(cfg: RunConfig, spec: StableFieldSpec, geom) -> dict:
    out: dict = {"regime": spec.regime, "alpha": spec.alpha, "d": spec.d}
    if spec.regime == "dissipative":
        out["C_f"] = c_f(spec).value
        out["passageConstant"] = passage_limit_dissipative(spec, 1.0, 1.0).value
    else:
        out["p"] = geom.p
        out["l"] = spec.group.l
        out["lebDelta"] = leb_delta(geom)
        out["integralV"] = integral_v_alpha(1.0, geom)
        out["integralVAlpha"] = integral_v_alpha(spec.alpha, geom)
        c = c_lvh(spec, geom)
        out["C_lVh"] = c.value
        out["C_lVhError"] = c.error_bound
        out["maxConstant"] = max_limit_conservative(spec, geom, 1.0).value
    if "experiment" in cfg.data:
        x = cfg.experiment(spec, geom, threads=1)
        lim = event_limit(x)
        out["event"] = x.event.label
        out["eventLimit"] = {"value": lim.value, "method": lim.method, "errorBound": lim.error_bound}
    return out


def _geometry_rows(geom: ActionGeometry, points: int = 41):
    bb = delta_bounds(geom)
    axes = [np.linspace(lo, hi, points) for lo, hi in bb]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, geom.p)
    return [[*(repr(float(v)) for v in y), repr(float(q_volume(y, geom)))] for y in grid]


def dispatch(command: str, cfg: RunConfig, out: Path, seed: int | None = None, threads: int | None = None) -> list[Path]:
    """Run one subcommand and return the files written."""
    if command not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}")
    if command in ("ldp", "report") and "experiment" not in cfg.data:
        raise ConfigErrors([("experiment", "missing required key")])
    G = cfg.group()
    spec = cfg.spec(G)
    geom = _geometry(cfg, G)
    written = []

    def put(name, text):
        path = out / name
        _atomic_write(path, text)
        written.append(path)

    if command == "analyze-action":
        put("group.json", _json_text({"group": G.to_dict()}, cfg))
    elif command == "geometry":
        if geom is None:
            geom = ActionGeometry(G)
        if geom.volume_dim == 0:
            raise ConfigErrors([("action", "geometry needs a kernel of positive rank")])
        header = [f"y{i + 1}" for i in range(geom.p)] + ["volume"]
        put("geometry.csv", _csv_text(header, _geometry_rows(geom), cfg))
        delta_rows = [[*(repr(float(a)) for a in row), repr(float(b))] for row, b in zip(geom.delta_A, geom.delta_b)]
        put("delta.csv", _csv_text([f"a{i + 1}" for i in range(geom.p)] + ["b"], delta_rows, cfg))
        totals = [["lebDelta", repr(float(leb_delta(geom)))], ["integralVAlpha", repr(float(integral_v_alpha(spec.alpha, geom)))]]
        put("geometry_summary.csv", _csv_text(["quantity", "value"], totals, cfg))
    elif command == "limits":
        put("limits.json", _json_text({"limits": _limits(cfg, spec, geom)}, cfg))
    elif command == "simulate":
        s = cfg.data.get("simulate", {})
        n = int(s.get("n", cfg.data.get("experiment", {}).get("nSchedule", [10])[0]))
        base = cfg.data.get("experiment", {}).get("seed", 0) if seed is None else seed
        rng = RngStream(int(base), 0)
        if s.get("sampler", "exact") == "series":
            sample = sample_field_series(spec, n, float(s.get("eps", 0.01)), rng, bool(s.get("compensate", True)))
        else:
            sample = sample_field_exact(spec, n, rng)
        put("field.csv", f"# config-hash: {cfg.hash}\n" + sample.to_csv())
    elif command == "ldp":
        x = cfg.experiment(spec, geom, seed, threads)
        records = run_ldp_experiment(x)
        xd = cfg.data["experiment"]
        ks = None
        if "weakConvergence" in xd:
            w = xd["weakConvergence"]
            ks = weak_convergence_check(spec, w["n"], w["replicates"], x.seed, geom, x.parallelism)
        sigma = None
        if x.event.kind == "sumExceed":
            sigma = sigma_equivalence_check(spec, xd.get("sigmaSchedule", list(x.n_schedule)), geom)
        put("ldp.csv", records_to_csv(records, f"config-hash: {cfg.hash}"))
        put("ldp_summary.json", _json_text({"summary": summarize(x, records, ks, sigma)}, cfg))
    else:
        put("report.txt", _report(cfg, spec, geom, G, out))
    return written


def _report(cfg, spec, geom, G, out: Path) -> str:
    lines = [f"# config-hash: {cfg.hash}", f"{'regime':<16}{spec.regime}", f"{'alpha':<16}{spec.alpha:g}", f"{'d':<16}{spec.d}"]
    lines.append(f"{'group':<16}p={G.p} l={G.l} U={G.U.tolist()} V={G.V.tolist()}")
    for k, v in _limits(cfg, spec, geom).items():
        if k not in ("regime", "alpha", "d"):
            lines.append(f"{k:<16}{v}")
    ldp = out / "ldp.csv"
    if ldp.exists():
        rows = [r for r in csv.reader(l for l in ldp.read_text().splitlines() if not l.startswith("#"))]
        widths = [max(len(r[i]) if i in (0, 1) else min(len(r[i]), 12) for r in rows) for i in range(len(rows[0]))]
        lines.append("")
        for r in rows:
            cells = [c if i in (0, 1) else _short(c) for i, c in enumerate(r)]
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def _short(cell: str) -> str:
    try:
        v = float(cell)
    except ValueError:
        return cell
    return cell if v.is_integer() and "." not in cell and "e" not in cell else f"{v:.6g}"


def _threads(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            val = int(env)
        except ValueError:
            raise ConfigErrors([(THREADS_ENV, "expected a positive integer")]) from None
        if val < 1:
            raise ConfigErrors([(THREADS_ENV, "expected a positive integer")])
        return val
    return None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="stablefield", description="Large-deviation experiments for stable random fields.")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigErrors([("--seed", "expected a 64-bit unsigned integer")])
        if args.threads is not None and args.threads < 1:
            raise ConfigErrors([("--threads", "expected a positive integer")])
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigErrors([("--config", str(exc))]) from None
        cfg = parse_config(text)
        out = args.out or Path(cfg.data.get("output", {}).get("dir", "out"))
        for path in dispatch(args.command, cfg, out, args.seed, _threads(args.threads)):
            print(path)
        return 0
    except ConfigError as exc:
        for line in getattr(exc, "errors", None) or [("config", str(exc))]:
            print(f"error: {line[0]}: {line[1]}", file=sys.stderr)
        return 1
    except (CapacityError, OverflowError, ArithmeticError, RuntimeError, ValueError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
