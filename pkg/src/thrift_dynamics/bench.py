"""Sweep engine: fixed-budget landscapes, minimal-depth scaling and power-law fits."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from . import depth as depth_mod
from .exact import DENSE_CAP, METRICS, CapabilityError, expm_hermitian
from .flo import flo_exact, flo_factors, flo_spectral_error, flo_spectral_error_pessimistic
from .formulas import (
    thrift_error_bound,
    FORMULA_KINDS,
    ORDER8_KINDS,
    MissingCoefficientsError,
    evaluate_factors,
    evaluate_schedule,
    load_omega8,
    make_formula,
)
from .magnus import convergence_series, interaction_picture, magnus_factors, magnus_remainder_bound
from .pauli_core import spectral_norm
from .models import PRNG_NAME, ModelSpec, PartitionedHamiltonian, build_model

log = logging.getLogger(__name__)

ENGINES = ("dense", "flo", "auto")
LANDSCAPE_HEADER = (
    "model,engine,seed,alpha,T,budget,formula,steps,two_qubit_depth,cnot_depth,metric,error,is_best"
)
SCALING_HEADER = (
    "model,engine,seed,L,alpha,T,epsilon,formula,steps,two_qubit_depth,cnot_depth,metric,error"
)


class ConfigError(ValueError):
    """Invalid sweep configuration."""


def fmt(x: float) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class Grid:
    """Either explicit ``values`` or ``count`` points between ``min`` and ``max``."""

    min: float | None = None
    max: float | None = None
    count: int | None = None
    spacing: str = "log"
    values: tuple[float, ...] | None = None

    @classmethod
    def from_json(cls, d, name: str) -> "Grid":
        if isinstance(d, (int, float)):
            return cls(values=(float(d),))
        if isinstance(d, list):
            return cls(values=tuple(float(v) for v in d))
        if not isinstance(d, dict):
            raise ConfigError(f"{name}: expected number, list or object")
        unknown = set(d) - {"min", "max", "count", "spacing", "values"}
        if unknown:
            raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        vals = d.get("values")
        return cls(d.get("min"), d.get("max"), d.get("count"), d.get("spacing", "log"),
                   tuple(float(v) for v in vals) if vals is not None else None)

    def to_json(self):
        if self.values is not None:
            return list(self.values)
        return {"min": self.min, "max": self.max, "count": self.count, "spacing": self.spacing}

    def points(self) -> list[float]:
        if self.values is not None:
            pts = list(self.values)
        else:
            if None in (self.min, self.max, self.count):
                raise ConfigError("grid needs min, max and count (or values)")
            if self.spacing == "log":
                if self.min <= 0 or self.max <= 0:
                    raise ConfigError("log grid bounds must be positive")
                pts = list(np.logspace(math.log10(self.min), math.log10(self.max), int(self.count)))
            elif self.spacing == "linear":
                pts = list(np.linspace(self.min, self.max, int(self.count)))
            else:
                raise ConfigError(f"unknown spacing {self.spacing!r}")
        if not pts:
            raise ConfigError("grid is empty")
        return [float(p) for p in pts]


@dataclass(frozen=True)
class SweepConfig:
    model: ModelSpec
    budget: int = 0
    metric: str = "worst_case"
    epsilon: float = 0.01
    alpha: Grid = field(default_factory=lambda: Grid(values=(0.125,)))
    T: Grid = field(default_factory=lambda: Grid(values=(1.0,)))
    formulas: tuple[str, ...] | None = None
    n_max: int = 4096
    output: str | None = None
    rng_seed: int = 0
    engine: str = "auto"
    workers: int = 1
    sizes: tuple[int, ...] = ()
    T_per_L: float = 1.0
    omega8_file: str | None = None
    report_pessimistic: bool = False

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not 0 < self.epsilon < 2:
            raise ConfigError("epsilon must lie in (0, 2)")
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.n_max < 1 or self.workers < 1:
            raise ConfigError("n_max and workers must be positive")
        if self.formulas is not None:
            bad = [f for f in self.formulas if f not in FORMULA_KINDS]
            if bad:
                raise ConfigError(f"unknown formulas {bad}")
        self.alpha.points()
        self.T.points()

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "model" not in d:
            raise ConfigError("config needs a model")
        kw = dict(d)
        try:
            kw["model"] = ModelSpec.from_dict(d["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None
        for key in ("alpha", "T"):
            if key in kw:
                kw[key] = Grid.from_json(kw[key], key)
        if kw.get("formulas") is not None:
            kw["formulas"] = tuple(kw["formulas"])
        if "sizes" in kw:
            kw["sizes"] = tuple(int(v) for v in kw["sizes"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["model"] = self.model.to_dict()
        d["alpha"] = self.alpha.to_json()
        d["T"] = self.T.to_json()
        d["formulas"] = list(self.formulas) if self.formulas is not None else None
        d["sizes"] = list(self.sizes)
        return d

    def model_spec(self) -> ModelSpec:
        return replace(self.model, rng_seed=self.rng_seed)

    def omega(self) -> list[float] | None:
        try:
            return load_omega8(self.omega8_file)
        except MissingCoefficientsError:
            return None

    def resolved_formulas(self) -> list[str]:
        """Requested formulas (or every registered one), dropping unavailable eighth-order kinds
        only when they were not asked for explicitly."""
        kind = self.model.kind
        registered = depth_mod.registered_formulas(kind)
        have_omega = self.omega() is not None
        if self.formulas is None:
            out = [f for f in registered if have_omega or f not in ORDER8_KINDS]
            if not have_omega:
                log.warning("no eighth-order coefficient table; skipping %s", ", ".join(ORDER8_KINDS))
            return out
        missing = [f for f in self.formulas if f not in registered]
        if missing:
            raise ConfigError(f"no depth registry entry for {kind}: {missing}")
        if not have_omega and any(f in ORDER8_KINDS for f in self.formulas):
            raise ConfigError("eighth-order formulas requested but no coefficient table is available")
        return list(self.formulas)


def resolve_engine(engine: str, spec: ModelSpec, metric: str, cap: int = DENSE_CAP) -> str:
    flo_ok = spec.kind == "tfim_1d" and metric == "worst_case"
    if engine == "flo":
        if not flo_ok:
            raise CapabilityError("free-fermion engine needs tfim_1d with the worst_case metric")
        return "flo"
    if engine == "dense":
        if spec.n_qubits > cap:
            raise CapabilityError(f"{spec.n_qubits} qubits exceeds dense cap {cap}")
        return "dense"
    if spec.n_qubits <= cap:
        return "dense"
    if flo_ok:
        return "flo"
    raise CapabilityError(f"no engine can handle {spec.kind} at {spec.n_qubits} qubits with {metric}")


class Evaluator:
    """Error of each formula against exact evolution for one Hamiltonian."""

    def __init__(self, part: PartitionedHamiltonian, engine: str, metric: str, omega=None):
        self.part = part
        self.engine = engine
        self.metric = metric
        self.omega = omega
        self._schedules: dict[str, object] = {}
        self._exact: dict[float, object] = {}
        self._ih = None

    def exact(self, T: float):
        if T not in self._exact:
            if self.engine == "flo":
                self._exact[T] = flo_exact(self.part, T)
            else:
                self._exact[T] = expm_hermitian(self.part.full, T)
        return self._exact[T]

    def schedule(self, formula: str):
        if formula not in self._schedules:
            self._schedules[formula] = make_formula(self.part, formula, self.omega)
        return self._schedules[formula]

    def approx(self, formula: str, T: float, N: int):
        if formula.startswith("magnus_thrift"):
            if self._ih is None:
                self._ih = interaction_picture(self.part)
            order = int(formula[-1])
            facs = magnus_factors(self.part, T, N, order, ih=self._ih)
            return flo_factors(facs) if self.engine == "flo" else evaluate_factors(facs)
        s = self.schedule(formula)
        if self.engine == "flo":
            return flo_factors(s.factors(T / N)).power(N)
        return evaluate_schedule(s, self.part, T, N)

    def error(self, formula: str, T: float, N: int) -> float:
        v = self.approx(formula, T, N)
        if self.engine == "flo":
            return flo_spectral_error(self.exact(T), v)
        return METRICS[self.metric](self.exact(T), v)

    def error_pessimistic(self, formula: str, T: float, N: int) -> float:
        """Worst-case error with the free-fermion sign ambiguity resolved against the result.

        Dense errors carry no such ambiguity and are returned unchanged.
        """
        if self.engine != "flo":
            return self.error(formula, T, N)
        return flo_spectral_error_pessimistic(self.exact(T), self.approx(formula, T, N))


@dataclass(frozen=True)
class LandscapeRow:
    model: str
    engine: str
    seed: int
    alpha: float
    T: float
    budget: int
    formula: str
    steps: int
    two_qubit_depth: int
    cnot_depth: int
    metric: str
    error: float
    is_best: bool = False
    error_pessimistic: float | None = None

    def csv_fields(self) -> list[str]:
        out = [
            self.model, self.engine, str(self.seed), fmt(self.alpha), fmt(self.T), str(self.budget),
            self.formula, str(self.steps), str(self.two_qubit_depth), str(self.cnot_depth),
            self.metric, fmt(self.error), "1" if self.is_best else "0",
        ]
        if self.error_pessimistic is not None:
            out.append(fmt(self.error_pessimistic))
        return out


def best_index(rows: Sequence[LandscapeRow]) -> int:
    """Minimum error; ties go to lower two-qubit depth, then formula name."""
    return min(range(len(rows)), key=lambda i: (rows[i].error, rows[i].two_qubit_depth, rows[i].formula))


def _landscape_point(args) -> list[LandscapeRow]:
    spec, alpha, T, budget, formulas, engine, metric, omega, pessimistic = args
    part = build_model(spec.with_alpha(alpha))
    ev = Evaluator(part, engine, metric, omega)
    rows = []
    for f in formulas:
        N = depth_mod.steps_for_budget(spec.kind, f, budget)
        if N == 0:
            continue
        d2, dc = depth_mod.depth(spec.kind, f, N)
        pess = ev.error_pessimistic(f, T, N) if pessimistic else None
        rows.append(LandscapeRow(spec.kind, engine, spec.rng_seed, alpha, T, budget, f, N, d2, dc,
                                 metric, ev.error(f, T, N), error_pessimistic=pess))
    if rows:
        b = best_index(rows)
        rows[b] = replace(rows[b], is_best=True)
    return rows


def _run_tasks(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def landscape(cfg: SweepConfig) -> list[LandscapeRow]:
    spec = cfg.model_spec()
    engine = resolve_engine(cfg.engine, spec, cfg.metric)
    formulas = cfg.resolved_formulas()
    if cfg.budget == 0 or all(depth_mod.steps_for_budget(spec.kind, f, cfg.budget) == 0 for f in formulas):
        log.warning("budget %d admits no formula; no rows produced", cfg.budget)
        return []
    omega = cfg.omega()
    tasks = [
        (spec, a, T, cfg.budget, formulas, engine, cfg.metric, omega, cfg.report_pessimistic)
        for a in cfg.alpha.points()
        for T in cfg.T.points()
    ]
    rows = [r for chunk in _run_tasks(_landscape_point, tasks, cfg.workers) for r in chunk]
    return sorted(rows, key=lambda r: (r.alpha, r.T, r.formula))


def provenance_lines(cfg: SweepConfig, kind: str, timestamp: bool = True) -> list[str]:
    lines = []
    if timestamp:
        lines.append(f"# created {datetime.now(timezone.utc).isoformat(timespec='seconds')}")
    spec = cfg.model_spec()
    meta = {"sweep": kind, "prng": PRNG_NAME, "seed": cfg.rng_seed, "model": spec.to_dict(),
            "metric_basis": "computational" if cfg.metric == "avg_infidelity" else None}
    if spec.kind == "heisenberg_1d":
        meta["fields"] = [fmt(v) for v in build_model(spec).fields]
    lines.append("# " + json.dumps(meta, sort_keys=True))
    return lines


def write_rows(header: str, rows: Iterable[Sequence[str]], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(c + "\n")
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _header(base: str, cfg: SweepConfig) -> str:
    return base + ",error_pessimistic" if cfg.report_pessimistic else base


def landscape_csv(cfg: SweepConfig, rows: Sequence[LandscapeRow], timestamp: bool = True) -> str:
    return write_rows(_header(LANDSCAPE_HEADER, cfg), (r.csv_fields() for r in rows),
                      provenance_lines(cfg, "landscape", timestamp))


def _as_part(model, alpha) -> PartitionedHamiltonian:
    if isinstance(model, PartitionedHamiltonian):
        return model if alpha is None or alpha == model.alpha else model.with_alpha(alpha)
    return build_model(model if alpha is None else model.with_alpha(alpha))


def min_steps(model, formula: str, alpha: float | None, T: float, epsilon: float,
              metric: str = "worst_case", N_max: int = 4096, engine: str = "auto",
              evaluator: Evaluator | None = None) -> int | None:
    """Smallest ``N <= N_max`` with error at most ``epsilon``; ``None`` if there is none.

    Brackets by doubling, bisects, then checks ``N - 1`` directly and walks down
    while the error stays within tolerance (the error need not be monotone in ``N``).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if evaluator is None:
        part = _as_part(model, alpha)
        evaluator = Evaluator(part, resolve_engine(engine, part.spec, metric), metric)
    memo: dict[int, float] = {}

    def err(n):
        if n not in memo:
            memo[n] = evaluator.error(formula, T, n)
        return memo[n]

    lo, hi = 0, 1
    while err(hi) > epsilon:
        if hi >= N_max:
            return None
        lo, hi = hi, min(2 * hi, N_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if err(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    while hi > 1 and err(hi - 1) <= epsilon:
        hi -= 1
    return hi


@dataclass(frozen=True)
class ScalingRow:
    model: str
    engine: str
    seed: int
    L: int
    alpha: float
    T: float
    epsilon: float
    formula: str
    steps: int | None
    two_qubit_depth: int | None
    cnot_depth: int | None
    metric: str
    error: float | None
    error_pessimistic: float | None = None
    with_pessimistic: bool = False

    def csv_fields(self) -> list[str]:
        opt = lambda v: "" if v is None else str(v)  # noqa: E731
        optf = lambda v: "" if v is None else fmt(v)  # noqa: E731
        out = [
            self.model, self.engine, str(self.seed), str(self.L), fmt(self.alpha), fmt(self.T),
            fmt(self.epsilon), self.formula, opt(self.steps), opt(self.two_qubit_depth),
            opt(self.cnot_depth), self.metric, optf(self.error),
        ]
        if self.with_pessimistic:
            out.append(optf(self.error_pessimistic))
        return out


def _scaling_point(args) -> list[ScalingRow]:
    spec, L, alpha, T, cfg_bits, formulas, omega = args
    epsilon, metric, n_max, engine_req, pessimistic = cfg_bits
    spec = spec.with_size(*L) if isinstance(L, tuple) else spec.with_size(L)
    engine = resolve_engine(engine_req, spec, metric)
    part = build_model(spec.with_alpha(alpha))
    ev = Evaluator(part, engine, metric, omega)
    rows = []
    Lval = L if isinstance(L, int) else int(np.prod(L))
    for f in formulas:
        n = min_steps(part, f, None, T, epsilon, metric, n_max, evaluator=ev)
        if n is None:
            rows.append(ScalingRow(spec.kind, engine, spec.rng_seed, Lval, alpha, T, epsilon, f,
                                   None, None, None, metric, None, None, pessimistic))
            continue
        d2, dc = depth_mod.depth(spec.kind, f, n)
        pess = ev.error_pessimistic(f, T, n) if pessimistic else None
        rows.append(ScalingRow(spec.kind, engine, spec.rng_seed, Lval, alpha, T, epsilon, f, n, d2, dc,
                               metric, ev.error(f, T, n), pess, pessimistic))
    return rows


def scaling(cfg: SweepConfig) -> list[ScalingRow]:
    """Minimal depth reaching ``epsilon`` for each size ``L`` with ``T = T_per_L * L``."""
    if not cfg.sizes:
        raise ConfigError("scaling sweep needs sizes")
    if cfg.model.kind == "tfim_2d":
        raise ConfigError("scaling sweeps take 1D models")
    spec = cfg.model_spec()
    formulas = cfg.resolved_formulas()
    omega = cfg.omega()
    for L in cfg.sizes:
        resolve_engine(cfg.engine, spec.with_size(L), cfg.metric)
    bits = (cfg.epsilon, cfg.metric, cfg.n_max, cfg.engine, cfg.report_pessimistic)
    tasks = [(spec, L, a, cfg.T_per_L * L, bits, formulas, omega)
             for L in cfg.sizes for a in cfg.alpha.points()]
    rows = [r for chunk in _run_tasks(_scaling_point, tasks, cfg.workers) for r in chunk]
    return sorted(rows, key=lambda r: (r.alpha, r.formula, r.L))


def scaling_csv(cfg: SweepConfig, rows: Sequence[ScalingRow], timestamp: bool = True) -> str:
    return write_rows(_header(SCALING_HEADER, cfg), (r.csv_fields() for r in rows),
                      provenance_lines(cfg, "scaling", timestamp))


@dataclass(frozen=True)
class FitResult:
    a: float
    k: float
    covariance: np.ndarray
    points_used: int

    @property
    def k_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[1, 1], 0.0)))

    def predict(self, L) -> np.ndarray:
        return self.a * np.asarray(L, dtype=float) ** self.k


def powerlaw_fit(points: Sequence[tuple[float, float, float]]) -> FitResult:
    """Weighted least squares of ``log d = log a + k log L``.

    ``covariance`` is for ``(log a, k)`` and treats the weights as inverse variances.
    """
    pts = [(float(L), float(d), float(w)) for L, d, w in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(L <= 0 or d <= 0 or w <= 0 for L, d, w in pts):
        raise ValueError("sizes, depths and weights must be positive")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    w = np.array([p[2] for p in pts])
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    if np.linalg.matrix_rank(Xw) < 2:
        raise ValueError("degenerate design matrix (need at least two distinct sizes)")
    coef, *_ = np.linalg.lstsq(Xw, y * sw, rcond=None)
    cov = np.linalg.inv(Xw.T @ Xw)
    return FitResult(float(np.exp(coef[0])), float(coef[1]), cov, len(pts))


def depth_weight(model: str, formula: str, depth_value: float) -> float:
    """Inverse log-variance for a depth known to within one step."""
    per_step = depth_mod.lookup(model, formula).a
    return (depth_value / per_step) ** 2


def fit_scaling_rows(rows: Iterable[dict]) -> list[dict]:
    """Fit ``d = a L^k`` per ``(model, formula, alpha)`` group of a scaling table."""
    groups: dict[tuple, list] = {}
    for r in rows:
        if not r.get("two_qubit_depth"):
            continue
        key = (r["model"], r["formula"], float(r["alpha"]))
        d = float(r["two_qubit_depth"])
        groups.setdefault(key, []).append((float(r["L"]), d, depth_weight(r["model"], r["formula"], d)))
    out = []
    for (model, formula, alpha), pts in sorted(groups.items()):
        if len({p[0] for p in pts}) < 2 or len(pts) < 3:
            log.warning("skipping %s/%s: not enough sizes to fit", model, formula)
            continue
        f = powerlaw_fit(sorted(pts))
        out.append({"model": model, "formula": formula, "alpha": alpha, "a": f.a, "k": f.k,
                    "k_stderr": f.k_stderr, "points_used": f.points_used,
                    "L_min": min(p[0] for p in pts), "L_max": max(p[0] for p in pts)})
    return out


BOUNDS_HEADER = "model,alpha,T,h1_norm,thrift1_bound,magnus1_remainder,magnus2_remainder"


def bounds_csv(cfg: SweepConfig, quadrature_points: int = 32) -> str:
    """First-order THRIFT bound and Magnus remainders on the config's (alpha, T) grid.

    Magnus columns are empty where the series argument leaves the convergence region.
    """
    spec = cfg.model_spec()
    if spec.n_qubits > DENSE_CAP:
        raise CapabilityError(f"{spec.n_qubits} qubits exceeds dense cap {DENSE_CAP}")
    series = convergence_series()
    base = build_model(spec)
    h1_norm = spectral_norm(base.h1)
    rows = []
    for a in cfg.alpha.points():
        part = base.with_alpha(a)
        for T in cfg.T.points():
            tb = thrift_error_bound(part, T, quadrature_points)
            rem = []
            for k in (1, 2):
                try:
                    rem.append(fmt(magnus_remainder_bound(k, a, T, T * h1_norm, series).value))
                except ValueError:
                    rem.append("")
            rows.append([spec.kind, fmt(a), fmt(T), fmt(h1_norm), fmt(tb), *rem])
    return write_rows(BOUNDS_HEADER, rows, provenance_lines(cfg, "bounds", timestamp=False))
