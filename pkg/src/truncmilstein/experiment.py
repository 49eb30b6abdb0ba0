"""Monte Carlo strong-error estimation, rate fitting and moment sweeps.

Paths are processed in fixed blocks of ``CHUNK_PATHS`` consecutive path
indices.  Per-path results are concatenated in path order before any
averaging, so estimates are bit-identical for every worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import brownian
from .errors import (ConfigurationError, NotApplicableError, RegressionDomainError)
from .schemes import SchemeKind, parse_scheme, run_batch, simulate_paths, step_grid, \
    grid_increments
from .truncation import lsigma_at, project, radius

CHUNK_PATHS = 200
BLOWUP_LIMIT = 0.05


@dataclass
class ErrorSample:
    dt: float
    num_paths: int
    moment_order: float
    error_at_T: float
    error_sup: float
    std_error: float
    blowup_frac: float = 0.0

    @property
    def unreliable(self) -> bool:
        return self.blowup_frac > BLOWUP_LIMIT


@dataclass
class ConvergenceReport:
    problem: str
    scheme: SchemeKind
    epsilon: float | None
    alpha: float
    steps: list
    samples: list
    fitted_slope: float
    half_width: float
    predicted_rate: float | None
    sup_slope: float | None = None

    @property
    def unreliable(self) -> bool:
        return any(s.unreliable for s in self.samples)


@dataclass
class MomentRow:
    dt: float
    sup_moment: float
    blowup_frac: float


def _levels_for(problem, steps, ref_level, margin):
    levels = []
    span = problem.t_end - problem.t0
    for dt in steps:
        ratio = span / dt
        lvl = round(math.log2(ratio)) if ratio >= 1 else -1
        if lvl < 0 or abs(ratio - 2 ** lvl) > 1e-9 * ratio:
            raise ConfigurationError(f"step {dt} is not a dyadic fraction of the horizon {span}")
        if lvl > ref_level - margin:
            raise ConfigurationError(
                f"step {dt} (level {lvl}) must be at least {margin} levels coarser "
                f"than the reference level {ref_level}")
        levels.append(lvl)
    return levels


def _chunks(num_paths):
    return [range(s, min(s + CHUNK_PATHS, num_paths)) for s in range(0, num_paths, CHUNK_PATHS)]


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _strong_error_chunk(job):
    (problem, scheme, policy, levels, ref_level, master_seed, q_bar, exact, paths) = job
    fine = brownian.generate_batch(master_seed, paths, ref_level, problem.t0, problem.t_end)
    finest = max(levels)
    stride = 2 ** (ref_level - finest)
    span = problem.t_end - problem.t0
    if exact is not None:
        grid = step_grid(problem.t0, problem.t_end, span / 2 ** finest)
        bpath = np.concatenate([np.zeros((len(paths), 1)),
                                np.cumsum(brownian.coarsen_batch(fine, finest), axis=1)], axis=1)
        ref = exact(grid, bpath)
        ref_blow = np.full(len(paths), -1)
    else:
        _, ref, ref_blow = simulate_paths(problem, SchemeKind.MILSTEIN_TRUNCATED, policy,
                                          span / 2 ** ref_level, fine, master_seed, paths,
                                          record_every=stride)
    out = []
    for lvl in levels:
        _, X, blow = simulate_paths(problem, scheme, policy, span / 2 ** lvl, fine,
                                    master_seed, paths)
        r = ref[:, ::2 ** (finest - lvl)]
        with np.errstate(all="ignore"):
            dev = np.sum((X - r) ** 2, axis=-1) ** (q_bar / 2)
        out.append((dev, blow >= 0, ref_blow >= 0))
    return out


def strong_error(problem, scheme, policy, steps, ref_level: int = 16, M: int = 1000,
                 master_seed: int = 0, q_bar: float = 2.0, exact_solution=None,
                 workers: int = 1, ref_margin: int = 4) -> list[ErrorSample]:
    """E|y(T) - X(T)|^q_bar and its grid supremum for each step.

    The reference is truncated Milstein at ``ref_level`` on the same lattice,
    or ``exact_solution(t, B(t))`` when given.  Paths that blow up (target or
    reference) are left out of the averages and counted.
    """
    scheme = parse_scheme(scheme)
    if ref_level > brownian.MAX_LEVELS or ref_level < 0:
        raise ConfigurationError(f"ref_level {ref_level} outside [0, {brownian.MAX_LEVELS}]")
    if M < 100:
        raise ConfigurationError(f"need at least 100 paths, got {M}")
    if q_bar < 2:
        raise ConfigurationError(f"moment order must be >= 2, got {q_bar}")
    if exact_solution is None and policy is None:
        raise ConfigurationError("the truncated-Milstein reference needs a truncation policy")
    levels = _levels_for(problem, steps, ref_level, ref_margin)
    jobs = [(problem, scheme, policy, levels, ref_level, master_seed, q_bar, exact_solution,
             paths) for paths in _chunks(M)]
    parts = _map(_strong_error_chunk, jobs, workers)
    samples = []
    span = problem.t_end - problem.t0
    for j, lvl in enumerate(levels):
        dev = np.concatenate([p[j][0] for p in parts])
        bad = np.concatenate([p[j][1] | p[j][2] for p in parts])
        good = dev[~bad]
        n_good = good.shape[0]
        if n_good == 0:
            at_T = sup = se = math.nan
        else:
            means = np.mean(good, axis=0)
            at_T, sup = float(means[-1]), float(np.max(means))
            se = float(np.std(good[:, -1], ddof=1) / math.sqrt(n_good)) if n_good > 1 else 0.0
        samples.append(ErrorSample(span / 2 ** lvl, M, q_bar, at_T, sup, se,
                                   float(np.mean(bad))))
    return samples


def fit_rate(samples, use_sup: bool = False) -> tuple[float, float]:
    """Least-squares slope of ln(error) on ln(dt), divided by the moment
    order so it estimates the strong order, with a 95% half-width."""
    if len(samples) < 3:
        raise RegressionDomainError(f"need at least 3 samples, got {len(samples)}")
    orders = {s.moment_order for s in samples}
    if len(orders) != 1:
        raise RegressionDomainError("samples mix different moment orders")
    q = orders.pop()
    errs = np.array([s.error_sup if use_sup else s.error_at_T for s in samples], dtype=float)
    if not np.all(np.isfinite(errs)) or np.any(errs <= 0):
        raise RegressionDomainError(f"errors must be positive and finite, got {errs.tolist()}")
    x = np.log([s.dt for s in samples])
    y = np.log(errs)
    res = stats.linregress(x, y)
    n = len(samples)
    half = stats.t.ppf(0.975, n - 2) * res.stderr if n > 2 else math.inf
    return float(res.slope / q), float(half / q)


def predicted_rate(scheme, epsilon: float, alpha: float) -> float:
    """min(1 - 2 eps, alpha) for truncated Milstein, min(1 - 2 eps, alpha + 1/2)
    for its randomized variant, both capped at 1."""
    scheme = parse_scheme(scheme)
    if not scheme.truncated:
        raise NotApplicableError(f"no predicted rate for {scheme.value}")
    if not 0 < epsilon <= 0.25:
        raise ConfigurationError(f"epsilon must lie in (0, 1/4], got {epsilon}")
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    time_order = alpha + 0.5 if scheme.randomized else alpha
    return min(1.0 - 2.0 * epsilon, time_order, 1.0)


def convergence_study(name, problem, scheme, policy, steps, ref_level=16, M=1000,
                      master_seed=0, q_bar=2.0, exact_solution=None, workers=1) -> ConvergenceReport:
    scheme = parse_scheme(scheme)
    samples = strong_error(problem, scheme, policy, steps, ref_level, M, master_seed, q_bar,
                           exact_solution, workers)
    try:
        slope, half = fit_rate(samples)
    except RegressionDomainError:
        # blown-up steps leave nothing to fit; the report is flagged instead
        if not any(s.unreliable for s in samples):
            raise
        slope = half = math.nan
    try:
        sup_slope = fit_rate(samples, use_sup=True)[0]
    except RegressionDomainError:
        sup_slope = None
    try:
        pred = predicted_rate(scheme, policy.epsilon, problem.holder_alpha)
    except (NotApplicableError, AttributeError):
        pred = None
    return ConvergenceReport(name, scheme, getattr(policy, "epsilon", None), problem.holder_alpha,
                             list(steps), samples, slope, half, pred, sup_slope)


# ----------------------------------------------------------- moment sweeps

def _moment_chunk(job):
    problem, scheme, policy, levels, fine_level, master_seed, p, paths = job
    fine = brownian.generate_batch(master_seed, paths, fine_level, problem.t0, problem.t_end)
    span = problem.t_end - problem.t0
    out = []
    for lvl in levels:
        _, X, blow = simulate_paths(problem, scheme, policy, span / 2 ** lvl, fine,
                                    master_seed, paths)
        out.append((np.sum(X * X, axis=-1) ** (p / 2), blow >= 0))
    return out


def moment_sweep(problem, scheme, policy, steps, M: int = 1000, p: float = 2.0,
                 master_seed: int = 0, workers: int = 1) -> list[MomentRow]:
    """Max over grid times of the empirical E|X(t)|^p, one row per step."""
    if p < 2:
        raise ConfigurationError(f"moment order must be >= 2, got {p}")
    levels = _levels_for(problem, steps, brownian.MAX_LEVELS, 0)
    jobs = [(problem, parse_scheme(scheme), policy, levels, max(levels), master_seed, p, paths)
            for paths in _chunks(M)]
    parts = _map(_moment_chunk, jobs, workers)
    rows = []
    span = problem.t_end - problem.t0
    for j, lvl in enumerate(levels):
        mom = np.concatenate([part[j][0] for part in parts])
        bad = np.concatenate([part[j][1] for part in parts])
        good = mom[~bad]
        sup = float(np.max(np.mean(good, axis=0))) if len(good) else math.nan
        rows.append(MomentRow(span / 2 ** lvl, sup, float(np.mean(bad))))
    return rows


# ----------------------------------------------- discrete/continuous gap

def _gap_chunk(job):
    problem, policy, levels, master_seed, paths = job
    fine_level = max(levels) + 1
    fine = brownian.generate_batch(master_seed, paths, fine_level, problem.t0, problem.t_end)
    span = problem.t_end - problem.t0
    out = []
    for lvl in levels:
        dt = span / 2 ** lvl
        times = step_grid(problem.t0, problem.t_end, dt)
        dB = grid_increments(fine, problem.t0, problem.t_end, times)
        states, _, blow = run_batch(problem, SchemeKind.MILSTEIN_TRUNCATED, policy, dt, times, dB)
        half = brownian.coarsen_batch(fine, lvl + 1)[:, 0::2]
        R = radius(policy, dt)
        x = project(states[:, :-1], R)
        t = times[:-1][None, :]
        with np.errstate(all="ignore"):
            gap = (problem.drift(t, x) * (dt / 2) + problem.diffusion(t, x) * half[..., None]
                   + 0.5 * lsigma_at(problem, t, x) * (half[..., None] ** 2 - dt / 2))
            size = np.sum(gap * gap, axis=-1)
        out.append((np.max(size, axis=1), blow >= 0))
    return out


def half_step_gap(problem, policy, steps, M: int = 1000, master_seed: int = 0,
                  workers: int = 1) -> list[tuple[float, float]]:
    """E[max_i |X(t_i + dt/2) - X_i|^2] of truncated Milstein per step.

    The mid-step value is the continuous interpolant driven by the Brownian
    increment over the first half of each step.
    """
    levels = _levels_for(problem, steps, brownian.MAX_LEVELS - 1, 0)
    jobs = [(problem, policy, levels, master_seed, paths) for paths in _chunks(M)]
    parts = _map(_gap_chunk, jobs, workers)
    span = problem.t_end - problem.t0
    rows = []
    for j, lvl in enumerate(levels):
        size = np.concatenate([part[j][0] for part in parts])
        bad = np.concatenate([part[j][1] for part in parts])
        rows.append((span / 2 ** lvl, float(np.mean(size[~bad]))))
    return rows


def loglog_slope(xs, ys) -> float:
    """Plain least-squares slope of ln y on ln x."""
    return float(stats.linregress(np.log(xs), np.log(ys)).slope)
