"""Replication harness: simulate, estimate, normalize, compare to theory.

An experiment runs n_reps exact-scheme replications per horizon, normalizes
the estimation residuals by the regime's deterministic rates, by the random
NLRR rates, or by the matrix normalization A_T Psi_T, and compares the
empirical law against either the regime's limit sampler or a prescribed
normal law via the two-sample Kolmogorov-Smirnov statistic.

Everything is deterministic given the master seed: replication k draws from
a stream keyed (seed, k) regardless of execution order, and reports carry
no volatile fields except wall_time_s, which is excluded from artifacts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .estimate import (
    Estimate,
    SingularDesignError,
    estimate_path,
    sufficient_stats,
)
from .limits import sample_limit
from .model import ModelParams, Regime, RootPair, char_roots, classify
from .regimes import NoNlrrError, nlrr_rate, rate_functions, rotation_template, scaling_matrix
from .simulate import SamplePath, SimConfig, SimulationOverflowError, simulate

__all__ = [
    "NormalReference",
    "ExperimentConfig",
    "HorizonResult",
    "ExperimentReport",
    "ConvergenceRow",
    "ConvergenceReport",
    "run_experiment",
    "ks_two_sample",
    "convergence_study",
]

QUANTILE_LEVELS = (1, 5, 10, 25, 50, 75, 90, 95, 99)

NORMALIZATIONS = ("deterministic_rate", "nlrr", "matrix")


@dataclass(frozen=True)
class NormalReference:
    """Reference limit N(mean_i, var_i) per coordinate; coordinate 2 optional."""

    mean1: float
    var1: float
    mean2: float | None = None
    var2: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    horizons: tuple[float, ...]
    n_reps: int
    seed: int
    steps_per_unit_time: int = 100
    normalization: str = "deterministic_rate"
    comparison: NormalReference | str = "limit_sampler"  # or "none"
    n_reference: int = 8000
    grid_n: int = 10_000

    def __post_init__(self):
        horizons = tuple(float(T) for T in self.horizons)
        object.__setattr__(self, "horizons", horizons)
        if not horizons or any(T <= 0 for T in horizons):
            raise ValueError("horizons must be positive")
        if list(horizons) != sorted(horizons):
            raise ValueError("horizons must be increasing")
        if self.n_reps < 2:
            raise ValueError("n_reps must be >= 2")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if isinstance(self.comparison, str) and self.comparison not in ("limit_sampler", "none"):
            raise ValueError("comparison must be 'limit_sampler', 'none', or a NormalReference")
        if self.normalization == "nlrr" and self.comparison == "limit_sampler":
            raise ValueError("nlrr normalization needs a NormalReference (or 'none') comparison")


@dataclass
class HorizonResult:
    horizon: float
    n_steps: int
    n_used: int
    n_excluded: int
    reps: np.ndarray  # replication indices that survived
    r1: np.ndarray
    r2: np.ndarray  # may contain nan when the coordinate has no normalization
    quantiles1: dict[int, float]
    quantiles2: dict[int, float]
    ks1: float | None
    ks2: float | None


@dataclass
class ExperimentReport:
    regime: str
    normalization: str
    comparison: str
    seed: int
    n_reps: int
    steps_per_unit_time: int
    results: list[HorizonResult]
    wall_time_s: float = 0.0

    def to_artifact_dict(self) -> dict:
        """JSON-ready dict; excludes wall time so reruns are byte-identical."""
        return {
            "regime": self.regime,
            "normalization": self.normalization,
            "comparison": self.comparison,
            "seed": self.seed,
            "n_reps": self.n_reps,
            "steps_per_unit_time": self.steps_per_unit_time,
            "horizons": [
                {
                    "horizon": res.horizon,
                    "n_steps": res.n_steps,
                    "n_used": res.n_used,
                    "n_excluded": res.n_excluded,
                    "ks1": res.ks1,
                    "ks2": res.ks2,
                    "quantiles1": {str(k): v for k, v in res.quantiles1.items()},
                    "quantiles2": {str(k): v for k, v in res.quantiles2.items()},
                }
                for res in self.results
            ],
        }

    def residual_rows(self):
        """Rows (rep, T, r1, r2) for the raw-residual CSV."""
        for res in self.results:
            for k, a, b in zip(res.reps, res.r1, res.r2):
                yield int(k), res.horizon, float(a), float(b)


def ks_two_sample(a, b) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic (merge-based)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    grid.sort(kind="mergesort")
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def _estimate_u_hat(path: SamplePath, roots: RootPair) -> tuple[float, float]:
    """Terminal-state estimate of (u_s, u_c) for the oscillating rotation."""
    lam, nu = roots.lam, roots.nu
    T = path.horizon
    scale = math.exp(-lam * T)
    x_t = float(path.x[-1])
    y_t = (float(path.v[-1]) - lam * x_t) / nu
    s, c = math.sin(nu * T), math.cos(nu * T)
    u_c = scale * (x_t * s + y_t * c)
    u_s = scale * (y_t * s - x_t * c)
    return u_s, u_c


def _normalized_residuals(cfg: ExperimentConfig, regime: Regime, roots: RootPair,
                          rate_spec, horizon: float, path: SamplePath,
                          est: Estimate) -> tuple[float, float]:
    p = cfg.params
    d1 = est.theta1_hat - p.theta1
    d2 = est.theta2_hat - p.theta2
    if cfg.normalization == "deterministic_rate":
        return rate_spec.v1(horizon) * d1, rate_spec.v2(horizon) * d2
    if cfg.normalization == "nlrr":
        stats = sufficient_stats(path)
        rates = nlrr_rate(regime, roots, stats)
        r2 = rates.r2 * d2 if rates.r2 is not None else math.nan
        return rates.r1 * d1, r2
    # matrix mode: components of B A_T Psi_T (theta2_hat - theta2, theta1_hat - theta1)
    a_t = scaling_matrix(regime, roots, horizon)
    vec = a_t @ (est.psi @ np.array([d2, d1]))
    from .model import RegimeKind

    if regime.tag is RegimeKind.UNSTABLE_OSCILLATION:
        u_s, u_c = _estimate_u_hat(path, roots)
        vec = rotation_template(u_s, u_c) @ vec
    return float(vec[0]), float(vec[1])


def _reference_samples(cfg: ExperimentConfig, regime: Regime, roots: RootPair,
                       horizon_index: int, horizon: float):
    if cfg.comparison == "none":
        return None, None
    if isinstance(cfg.comparison, NormalReference):
        ref = cfg.comparison
        gen = rng.stream(cfg.seed, rng.DOMAIN_REFERENCE, horizon_index)
        ref1 = ref.mean1 + math.sqrt(ref.var1) * gen.standard_normal(cfg.n_reference)
        ref2 = None
        if ref.var2 is not None:
            ref2 = ref.mean2 + math.sqrt(ref.var2) * gen.standard_normal(cfg.n_reference)
        return ref1, ref2
    draws = sample_limit(regime, roots, cfg.params, cfg.n_reference,
                         grid_n=cfg.grid_n, seed=cfg.seed, horizon=horizon)
    return draws.l1, draws.l2


def _quantiles(values: np.ndarray) -> dict[int, float]:
    if values.size == 0 or not np.isfinite(values).any():
        return {lev: math.nan for lev in QUANTILE_LEVELS}
    finite = values[np.isfinite(values)]
    qs = np.percentile(finite, QUANTILE_LEVELS)
    return {lev: float(v) for lev, v in zip(QUANTILE_LEVELS, qs)}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full experiment.  Deterministic given cfg (incl. seed)."""
    start = time.perf_counter()
    roots = char_roots(cfg.params)
    regime = classify(roots)
    rate_spec = rate_functions(regime, roots)
    if cfg.normalization == "nlrr" and rate_spec.nlrr == "no":
        raise NoNlrrError(f"regime {regime.tag.value} has no NLRR normalization")

    results = []
    for horizon_index, horizon in enumerate(cfg.horizons):
        n_steps = max(2, round(horizon * cfg.steps_per_unit_time))
        reps, r1s, r2s = [], [], []
        excluded = 0
        for k in range(cfg.n_reps):
            sim_cfg = SimConfig(horizon=horizon, n_steps=n_steps, scheme="exact",
                                seed=cfg.seed, replication_index=k)
            try:
                path = simulate(cfg.params, sim_cfg)
                est = estimate_path(path)
                r1, r2 = _normalized_residuals(cfg, regime, roots, rate_spec,
                                               horizon, path, est)
            except (SingularDesignError, SimulationOverflowError):
                excluded += 1
                continue
            reps.append(k)
            r1s.append(r1)
            r2s.append(r2)
        if not reps:
            raise RuntimeError(f"all {cfg.n_reps} replications failed at T={horizon}")
        r1_arr, r2_arr = np.asarray(r1s), np.asarray(r2s)

        ref1, ref2 = _reference_samples(cfg, regime, roots, horizon_index, horizon)
        ks1 = ks_two_sample(r1_arr, ref1) if ref1 is not None else None
        ks2 = None
        if ref2 is not None and np.isfinite(r2_arr).all():
            ks2 = ks_two_sample(r2_arr, ref2)
        results.append(HorizonResult(
            horizon=horizon, n_steps=n_steps, n_used=len(reps), n_excluded=excluded,
            reps=np.asarray(reps), r1=r1_arr, r2=r2_arr,
            quantiles1=_quantiles(r1_arr), quantiles2=_quantiles(r2_arr),
            ks1=ks1, ks2=ks2,
        ))

    comparison_name = (cfg.comparison if isinstance(cfg.comparison, str)
                       else "normal")
    return ExperimentReport(
        regime=regime.tag.value,
        normalization=cfg.normalization,
        comparison=comparison_name,
        seed=cfg.seed,
        n_reps=cfg.n_reps,
        steps_per_unit_time=cfg.steps_per_unit_time,
        results=results,
        wall_time_s=time.perf_counter() - start,
    )


@dataclass
class ConvergenceRow:
    horizon: float
    raw_median1: float
    raw_median2: float
    normalized_median1: float
    normalized_median2: float
    n_used: int
    n_excluded: int


@dataclass
class ConvergenceReport:
    regime: str
    rows: list[ConvergenceRow]
    stabilized1: bool
    stabilized2: bool
    raw_decreasing1: bool
    raw_decreasing2: bool
    ratio_band: tuple[float, float] = (1.0 / 3.0, 3.0)

    def to_artifact_dict(self) -> dict:
        return {
            "regime": self.regime,
            "ratio_band": list(self.ratio_band),
            "stabilized": [self.stabilized1, self.stabilized2],
            "raw_decreasing": [self.raw_decreasing1, self.raw_decreasing2],
            "rows": [
                {
                    "horizon": r.horizon,
                    "raw_median": [r.raw_median1, r.raw_median2],
                    "normalized_median": [r.normalized_median1, r.normalized_median2],
                    "n_used": r.n_used,
                    "n_excluded": r.n_excluded,
                }
                for r in self.rows
            ],
        }


def convergence_study(cfg: ExperimentConfig, rates=None) -> ConvergenceReport:
    """Median |theta_i_hat - theta_i| across horizons, raw and rate-normalized.

    The normalized median "stabilizes" when every consecutive-horizon ratio
    lies in [1/3, 3] while the raw median shrinks.  `rates` overrides the
    registry normalizations with a pair of callables (used by the wrong-rate
    control, which applies the dominant root's rate on purpose).
    """
    if len(cfg.horizons) < 3:
        raise ValueError("need at least 3 horizons")
    roots = char_roots(cfg.params)
    regime = classify(roots)
    spec = rate_functions(regime, roots)
    v1, v2 = rates if rates is not None else (spec.v1, spec.v2)

    rows = []
    for horizon in cfg.horizons:
        n_steps = max(2, round(horizon * cfg.steps_per_unit_time))
        d1s, d2s = [], []
        excluded = 0
        for k in range(cfg.n_reps):
            sim_cfg = SimConfig(horizon=horizon, n_steps=n_steps, scheme="exact",
                                seed=cfg.seed, replication_index=k)
            try:
                est = estimate_path(simulate(cfg.params, sim_cfg))
            except (SingularDesignError, SimulationOverflowError):
                excluded += 1
                continue
            d1s.append(abs(est.theta1_hat - cfg.params.theta1))
            d2s.append(abs(est.theta2_hat - cfg.params.theta2))
        if not d1s:
            raise RuntimeError(f"all replications failed at T={horizon}")
        m1, m2 = float(np.median(d1s)), float(np.median(d2s))
        rows.append(ConvergenceRow(horizon, m1, m2, v1(horizon) * m1, v2(horizon) * m2,
                                   len(d1s), excluded))

    def stabilized(values):
        ratios = [b / a for a, b in zip(values, values[1:]) if a > 0]
        return bool(ratios) and all(1.0 / 3.0 <= r <= 3.0 for r in ratios)

    norm1 = [r.normalized_median1 for r in rows]
    norm2 = [r.normalized_median2 for r in rows]
    raw1 = [r.raw_median1 for r in rows]
    raw2 = [r.raw_median2 for r in rows]
    return ConvergenceReport(
        regime=regime.tag.value,
        rows=rows,
        stabilized1=stabilized(norm1),
        stabilized2=stabilized(norm2),
        raw_decreasing1=raw1[-1] < raw1[0],
        raw_decreasing2=raw2[-1] < raw2[0],
    )
