"""Monte Carlo rate sweeps: sample replicas per horizon, average, fit log-log slopes."""

from __future__ import annotations

import math
import os
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .._deposit import cell_counts
from ..fbm import CovarianceError, sample_torus_path
from ..occupation import GridMeasure, occupation_grid, occupation_points, spectrum_of_points
from ..rates import RateLaw, proxy_rate, proxy_rate_discrete, rate_continuous, rate_discrete
from ..spectral import (
    center,
    default_cutoff,
    epsilon_rule_continuous,
    epsilon_rule_discrete,
    grad_lp_norm,
    heat_smooth,
    l2_cutoff,
    poisson_gradient,
    regime_of,
    sobolev_l2_points,
)
from ..transport import BudgetExceeded, NotConverged, wasserstein_entropic, wasserstein_exact
from .config import ExperimentConfig

MASK64 = (1 << 64) - 1
MAX_FAILURE_RATE = 0.10
RECOVERABLE = (NotConverged, BudgetExceeded, CovarianceError, FloatingPointError, np.linalg.LinAlgError)


class SweepAborted(RuntimeError):
    pass


def replica_seed(base: int, replica: int, horizon: int) -> int:
    return (int(base) + int(replica) + (int(horizon) << 32)) & MASK64


@dataclass
class RateFit:
    """Least-squares fit of log(mean metric) on log T, with the per-horizon data behind it."""

    slope: float
    intercept: float
    stderr: float
    T: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    counts: np.ndarray
    law: RateLaw
    tolerance: float
    values: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    @property
    def theory_exponent(self) -> float:
        return float(self.law.exponent)

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.theory_exponent) <= self.tolerance


def ols(x, y):
    """(slope, intercept, slope standard error) of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    icpt = ym - slope * xm
    rss = np.sum((y - icpt - slope * x) ** 2)
    se = math.sqrt(rss / (n - 2) / sxx)
    return float(slope), float(icpt), se


def fit_rate(T, values, law: RateLaw, tolerance: float, label: str = "") -> RateFit:
    """Average replicas (NaN marks a failed replica) and regress log mean on log T.

    A critical law's log factor is removed first: the regressand is
    log(mean) - log_power * log log T.
    """
    T = np.asarray(T, dtype=float)
    vals = np.asarray(values, dtype=float)
    ok = np.isfinite(vals)
    counts = ok.sum(axis=1)
    if np.any(counts < 2):
        raise SweepAborted("fewer than two successful replicas at some horizon")
    means = np.array([v[o].mean() for v, o in zip(vals, ok)])
    sds = np.array([v[o].std(ddof=1) for v, o in zip(vals, ok)])
    y = np.log(means)
    if law.log_power:
        y = y - float(law.log_power) * np.log(np.log(T))
    slope, icpt, se = ols(np.log(T), y)
    return RateFit(slope, icpt, se, T, means, sds / np.sqrt(counts), counts, law, tolerance, vals, label)


# ---------------------------------------------------------------- per replica


def steps_for(cfg: ExperimentConfig, T: float) -> int:
    """Step count at horizon T with the step size of the largest horizon."""
    dt = cfg.T_grid[-1] / cfg.n_steps_max
    return max(1, int(round(T / dt)))


def heat_time(cfg: ExperimentConfig, T: float, alpha=None) -> float:
    if cfg.epsilon_mode == "fixed":
        eps = cfg.epsilon
    elif alpha is not None:
        eps = epsilon_rule_discrete(cfg.d, cfg.H, alpha)(T)
    else:
        eps = epsilon_rule_continuous(cfg.d, cfg.H)(T)
    return cfg.eps_scale * eps


def _transport_value(cfg: ExperimentConfig, gm: GridMeasure) -> float:
    """W_p^p of the normalized binned measure against uniform."""
    mu = gm.normalized()
    nu = GridMeasure(np.full(mu.masses.shape, 1.0 / mu.masses.size))
    if cfg.metric == "wasserstein_exact":
        w, _ = wasserstein_exact(mu, nu, cfg.p)
    else:
        w = wasserstein_entropic(mu, nu, cfg.p, cfg.reg, cfg.sinkhorn_max_iter, cfg.sinkhorn_tol)
    return w**cfg.p


def _sobolev_value(cfg: ExperimentConfig, pts, weight, total, t) -> float:
    if cfg.metric == "sobolev_l2":
        K = l2_cutoff(t, cfg.spectral_tol)
        return sobolev_l2_points(pts, weight, t, K, cfg.spectral_method)
    K = default_cutoff(t, math.sqrt(cfg.spectral_tol))
    spec = spectrum_of_points(pts, weight, K, total)
    g = poisson_gradient(center(heat_smooth(spec, t)))
    m = max(cfg.resolution, 4 * K)
    return grad_lp_norm(g, cfg.p, m)


def evaluate_replica(cfg: ExperimentConfig, T: float, seed: int) -> float:
    """Metric of one continuous-time path on [0, T]."""
    path = sample_torus_path(T, steps_for(cfg, T), cfg.H, cfg.d, seed)
    if cfg.metric.startswith("wasserstein"):
        return _transport_value(cfg, occupation_grid(path, cfg.resolution))
    pts, w = occupation_points(path)
    return _sobolev_value(cfg, pts, w, path.n_steps * path.dt, heat_time(cfg, T))


def discrete_spacing(cfg: ExperimentConfig, T: float) -> float:
    return cfg.tau_scale * T ** (-cfg.alpha)


def evaluate_discrete_replica(cfg: ExperimentConfig, T: float, seed: int) -> float:
    """Metric of the samples B_{t tau}, t = 1..floor(T/tau), each of mass tau.

    The path is simulated directly on the tau grid, so the samples are exact.
    """
    tau = discrete_spacing(cfg, T)
    count = int(math.floor(T / tau + 1e-9))
    if count < 1:
        raise ValueError("tau exceeds T")
    path = sample_torus_path(count * tau, count, cfg.H, cfg.d, seed)
    pts = path.values[1:]
    if cfg.metric.startswith("wasserstein"):
        gm = GridMeasure(cell_counts(pts, cfg.resolution) * tau)
        # occupation scale: W_1 is linear in the common mass
        return _transport_value(cfg, gm) ** (1.0 / cfg.p) * count * tau
    return _sobolev_value(cfg, pts, tau, count * tau, heat_time(cfg, T, cfg.alpha))


def parallel_map(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]`` over worker processes, results in input order."""
    items = list(items)
    workers = min(int(threads), os.cpu_count() or 1, len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (16 * workers))))


def _task(args):
    fn, cfg, T, seed = args
    try:
        return fn(cfg, T, seed)
    except RECOVERABLE:
        return float("nan")


def collect(cfg: ExperimentConfig, fn) -> np.ndarray:
    """(len(T_grid), replicas) metric values; NaN where a replica failed.

    Replicas run in ``cfg.threads`` worker processes; results are placed by index, so
    the output does not depend on scheduling.
    """
    tasks = [
        (fn, cfg, T, replica_seed(cfg.seed, r, h))
        for h, T in enumerate(cfg.T_grid)
        for r in range(cfg.replicas)
    ]
    out = parallel_map(_task, tasks, cfg.threads)
    vals = np.array(out, dtype=float).reshape(len(cfg.T_grid), cfg.replicas)
    failed = np.isnan(vals).sum(axis=1)
    worst = int(failed.max())
    if worst > MAX_FAILURE_RATE * cfg.replicas:
        raise SweepAborted(f"{worst} of {cfg.replicas} replicas failed at one horizon")
    return vals


def theory_law(cfg: ExperimentConfig, discrete: bool = False) -> RateLaw:
    if discrete:
        if cfg.metric.startswith("sobolev") and cfg.epsilon_mode != "fixed":
            return proxy_rate_discrete(cfg.d, cfg.H, cfg.alpha)
        return rate_discrete(cfg.d, cfg.H, cfg.alpha, cfg.rate_reading)
    if cfg.metric.startswith("wasserstein"):
        return rate_continuous(cfg.d, cfg.H, cfg.p)
    if cfg.epsilon_mode == "fixed":
        # fixed smoothing: second moments grow linearly, the norm like sqrt(T)
        return RateLaw(regime_of(cfg.d, cfg.H), Fraction(1, 2), normalization="fixed-eps proxy")
    return proxy_rate(cfg.d, cfg.H)


def run_metric_sweep(cfg: ExperimentConfig) -> RateFit:
    cfg.validate()
    vals = collect(cfg, evaluate_replica)
    return fit_rate(cfg.T_grid, vals, theory_law(cfg), cfg.tolerance, f"{cfg.metric} d={cfg.d} H={cfg.H}")


def run_discrete_sweep(cfg: ExperimentConfig) -> RateFit:
    cfg.validate(discrete=True)
    vals = collect(cfg, evaluate_discrete_replica)
    label = f"{cfg.metric} d={cfg.d} H={cfg.H} alpha={cfg.alpha}"
    return fit_rate(cfg.T_grid, vals, theory_law(cfg, True), cfg.tolerance, label)


@dataclass(frozen=True)
class RatioTest:
    """Affine-in-log T fit of E X^2 / T against a constant fit."""

    r_squared: float
    f_stat: float
    p_value: float
    slope: float
    intercept: float
    ratios: tuple

    def passed(self, min_r2: float = 0.99, max_p: float = 0.01) -> bool:
        return self.r_squared >= min_r2 and self.p_value < max_p


def critical_ratio_test(T, values) -> RatioTest:
    """Ratios r_T = mean(values^2) / T regressed on log T.

    The F statistic compares the affine model with a constant one (1 and n-2 dof).
    """
    T = np.asarray(T, dtype=float)
    vals = np.asarray(values, dtype=float)
    r = np.array([np.nanmean(v**2) for v in vals]) / T
    x = np.log(T)
    slope, icpt, _ = ols(x, r)
    rss1 = float(np.sum((r - icpt - slope * x) ** 2))
    rss0 = float(np.sum((r - r.mean()) ** 2))
    n = r.size
    r2 = 1.0 - rss1 / rss0 if rss0 > 0 else 0.0
    F = (rss0 - rss1) / (rss1 / (n - 2)) if rss1 > 0 else math.inf
    p = float(stats.f.sf(F, 1, n - 2)) if math.isfinite(F) else 0.0
    return RatioTest(r2, F, p, slope, icpt, tuple(r))
