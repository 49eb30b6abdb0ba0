"""Step maps and the integration loop.

Schemes: Euler-Maruyama, classical Milstein, truncated Milstein and the
randomized truncated Milstein predictor-corrector.  All step maps accept a
single state of shape ``(d,)`` or a batch of shape ``(paths, d)``; increments
broadcast over the leading axis.

Non-finite states are data: the path is marked as blown up at the first
offending index and its later states are left as NaN.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import brownian
from .errors import ConfigurationError, DomainError, ResolutionError
from .truncation import TruncationPolicy, lsigma_at, project, radius


class SchemeKind(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    MILSTEIN_CLASSICAL = "milstein_classical"
    MILSTEIN_TRUNCATED = "milstein_truncated"
    MILSTEIN_TRUNCATED_RANDOMIZED = "milstein_truncated_randomized"

    @property
    def truncated(self) -> bool:
        return self in (SchemeKind.MILSTEIN_TRUNCATED, SchemeKind.MILSTEIN_TRUNCATED_RANDOMIZED)

    @property
    def randomized(self) -> bool:
        return self is SchemeKind.MILSTEIN_TRUNCATED_RANDOMIZED


SCHEME_ALIASES = {
    "em": SchemeKind.EULER_MARUYAMA,
    "milstein": SchemeKind.MILSTEIN_CLASSICAL,
    "trunc-milstein": SchemeKind.MILSTEIN_TRUNCATED,
    "rand-trunc-milstein": SchemeKind.MILSTEIN_TRUNCATED_RANDOMIZED,
}


def parse_scheme(name) -> SchemeKind:
    if isinstance(name, SchemeKind):
        return name
    if name in SCHEME_ALIASES:
        return SCHEME_ALIASES[name]
    try:
        return SchemeKind(name)
    except ValueError:
        raise ConfigurationError(
            f"unknown scheme {name!r}; use one of {', '.join(SCHEME_ALIASES)}") from None


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    scheme: SchemeKind
    dt: float
    times: np.ndarray
    states: np.ndarray
    blew_up: bool = False
    blowup_index: int | None = None


def _col(v):
    return np.asarray(v, dtype=float)[..., None]


# ---------------------------------------------------------------- step maps

def step_euler_maruyama(problem, t, x, dt, dB):
    return x + problem.drift(t, x) * dt + problem.diffusion(t, x) * _col(dB)


def step_milstein(problem, t, x, dt, dB):
    db = _col(dB)
    return (x + problem.drift(t, x) * dt + problem.diffusion(t, x) * db
            + 0.5 * lsigma_at(problem, t, x) * (db * db - dt))


def _truncated_step(problem, R, t, x, dt, dB):
    xp = project(x, R)
    db = _col(dB)
    return (x + problem.drift(t, xp) * dt + problem.diffusion(t, xp) * db
            + 0.5 * lsigma_at(problem, t, xp) * (db * db - dt))


def _randomized_step(problem, R, t, x, dt, tau, dB_partial, dB):
    xp = project(x, R)
    tau = np.asarray(tau, dtype=float)
    sig = problem.diffusion(t, xp)
    x_tau = x + _col(tau) * dt * problem.drift(t, xp) + sig * _col(dB_partial)
    db = _col(dB)
    return (x + dt * problem.drift(t + tau * dt, project(x_tau, R)) + sig * db
            + 0.5 * lsigma_at(problem, t, xp) * (db * db - dt))


def _check_steps(dt_nominal, dt_actual):
    if not 0 < dt_actual <= dt_nominal * (1 + 1e-12) or dt_nominal > 1:
        raise DomainError(
            f"need 0 < dt_actual <= dt_nominal <= 1, got {dt_actual}, {dt_nominal}")


def step_truncated_milstein(problem, policy: TruncationPolicy, t_i, x, dt_nominal,
                            dt_actual, dB):
    """One truncated Milstein step; the radius comes from ``dt_nominal``."""
    _check_steps(dt_nominal, dt_actual)
    with np.errstate(all="ignore"):
        return _truncated_step(problem, radius(policy, dt_nominal), t_i,
                               np.asarray(x, dtype=float), dt_actual, dB)


def step_randomized(problem, policy: TruncationPolicy, t_i, x, dt_nominal, dt_actual,
                    tau, dB_partial, dB):
    """Predictor to the random time t_i + tau dt, then a corrector whose drift
    is evaluated there; diffusion and L sigma stay at (t_i, x)."""
    _check_steps(dt_nominal, dt_actual)
    if np.any((np.asarray(tau) <= 0) | (np.asarray(tau) >= 1)):
        raise DomainError("tau must lie strictly inside (0, 1)")
    with np.errstate(all="ignore"):
        return _randomized_step(problem, radius(policy, dt_nominal), t_i,
                                np.asarray(x, dtype=float), dt_actual, tau, dB_partial, dB)


# ------------------------------------------------------------------- grids

def step_grid(t0: float, t_end: float, dt: float) -> np.ndarray:
    """t_i = t0 + i dt for i <= N = floor((T - t0)/dt), then T if not on grid."""
    span = t_end - t0
    if not dt > 0:
        raise DomainError(f"step must be positive, got {dt}")
    ratio = span / dt
    n = math.floor(ratio + 1e-9)
    times = t0 + dt * np.arange(n + 1)
    if ratio - n > 1e-9:
        times = np.append(times, t_end)
    times[-1] = t_end
    return times


def dyadic_level(t0: float, t_end: float, dt: float) -> int | None:
    ratio = (t_end - t0) / dt
    level = round(math.log2(ratio)) if ratio >= 1 else -1
    if level >= 0 and abs(ratio - 2 ** level) <= 1e-9 * ratio:
        return level
    return None


def grid_increments(fine: np.ndarray, t0: float, t_end: float, times: np.ndarray) -> np.ndarray:
    """Brownian increments over ``times`` from fine increments (last axis)."""
    n_fine = fine.shape[-1]
    fine_dt = (t_end - t0) / n_fine
    dt = times[1] - times[0] if len(times) > 1 else t_end - t0
    level = dyadic_level(t0, t_end, dt)
    if level is not None and len(times) == 2 ** level + 1:
        if 2 ** level > n_fine:
            raise ResolutionError(f"step {dt} is finer than the lattice cell {fine_dt}")
        return brownian.coarsen_batch(fine, level)
    pos = (times - t0) / fine_dt
    idx = np.rint(pos).astype(np.int64)
    if np.any(np.abs(pos - idx) > 1e-7) or np.any(np.diff(idx) <= 0):
        raise ResolutionError(
            f"step {dt} does not align with the lattice cell width {fine_dt}")
    return np.add.reduceat(fine, idx[:-1], axis=-1)


# ---------------------------------------------------------------- the loop

def _validate(scheme, policy, randomized_inputs):
    if scheme.truncated and policy is None:
        raise ConfigurationError(f"{scheme.value} needs a truncation policy")
    if scheme.randomized and not randomized_inputs:
        raise ConfigurationError("the randomized scheme needs uniform offsets")
    if not scheme.randomized and randomized_inputs:
        raise ConfigurationError(f"{scheme.value} does not take uniform offsets")


def run_batch(problem, scheme: SchemeKind, policy, dt: float, times: np.ndarray,
              dB: np.ndarray, taus: np.ndarray | None = None, z: np.ndarray | None = None,
              record_every: int = 1):
    """Integrate a batch of paths over ``times``.

    ``dB`` has shape (paths, steps).  Returns ``(states, recorded, blowup)``
    where ``states`` has shape (paths, len(recorded), d), ``recorded`` are the
    step indices kept (every ``record_every``-th plus the last) and
    ``blowup`` holds the first non-finite index per path or -1.
    """
    scheme = parse_scheme(scheme)
    _validate(scheme, policy, taus is not None)
    P, n = dB.shape
    d = problem.dim
    R = radius(policy, dt) if scheme.truncated else None
    recorded = list(range(0, n + 1, record_every))
    if recorded[-1] != n:
        recorded.append(n)
    slot = {k: j for j, k in enumerate(recorded)}
    out = np.empty((P, len(recorded), d))
    x = np.tile(problem.y0, (P, 1))
    out[:, 0] = x
    blowup = np.full(P, -1, dtype=np.int64)
    with np.errstate(all="ignore"):
        for i in range(n):
            t = float(times[i])
            h = float(times[i + 1] - times[i])
            db = dB[:, i]
            if scheme is SchemeKind.EULER_MARUYAMA:
                x = step_euler_maruyama(problem, t, x, h, db)
            elif scheme is SchemeKind.MILSTEIN_CLASSICAL:
                x = step_milstein(problem, t, x, h, db)
            elif scheme is SchemeKind.MILSTEIN_TRUNCATED:
                x = _truncated_step(problem, R, t, x, h, db)
            else:
                tau = taus[:, i]
                partial = brownian.bridge_sample(db, tau, h, z[:, i])
                x = _randomized_step(problem, R, t, x, h, tau, partial, db)
            bad = ~np.isfinite(x).all(axis=1)
            if bad.any():
                fresh = bad & (blowup < 0)
                blowup[fresh] = i + 1
            if i + 1 in slot:
                out[:, slot[i + 1]] = x
    for p in np.nonzero(blowup >= 0)[0]:
        later = np.asarray(recorded) > blowup[p]
        out[p, later] = np.nan
    return out, np.asarray(recorded), blowup


def simulate_paths(problem, scheme, policy, dt: float, fine: np.ndarray,
                   master_seed: int, path_indices, record_every: int = 1):
    """Batch integration driven by stacked fine increments of the given paths.

    Offsets and bridge normals are drawn from each path's own streams, so the
    result for a path does not depend on which batch it is in.
    """
    scheme = parse_scheme(scheme)
    times = step_grid(problem.t0, problem.t_end, dt)
    dB = grid_increments(fine, problem.t0, problem.t_end, times)
    taus = z = None
    if scheme.randomized:
        n = dB.shape[1]
        taus = np.stack([brownian.offsets(master_seed, int(p), n).values for p in path_indices])
        z = np.stack([brownian.bridge_normals(master_seed, int(p), n) for p in path_indices])
    states, recorded, blowup = run_batch(problem, scheme, policy, dt, times, dB, taus, z,
                                         record_every)
    return times[recorded], states, blowup


def integrate(problem, scheme, policy, dt: float, lattice: brownian.BrownianLattice,
              offsets: brownian.UniformOffsets | None = None,
              aux_normals: np.ndarray | None = None) -> TrajectoryRecord:
    """Full trajectory for one lattice.

    For the randomized scheme the bridge normals default to the lattice's
    dedicated stream.
    """
    scheme = parse_scheme(scheme)
    _validate(scheme, policy, offsets is not None)
    if abs(problem.t0 - lattice.t0) > 1e-12 or abs(problem.t_end - lattice.t_end) > 1e-12:
        raise ResolutionError("lattice span does not match the problem horizon")
    if not 0 < dt <= problem.t_end - problem.t0:
        raise ResolutionError(f"step {dt} outside (0, {problem.t_end - problem.t0}]")
    times = step_grid(problem.t0, problem.t_end, dt)
    dB = grid_increments(lattice.increments[None, :], problem.t0, problem.t_end, times)
    taus = z = None
    n = dB.shape[1]
    if scheme.randomized:
        if len(offsets.values) != n:
            raise ConfigurationError(f"need {n} offsets, got {len(offsets.values)}")
        taus = np.asarray(offsets.values)[None, :]
        if aux_normals is None:
            aux_normals = brownian.bridge_normals(lattice.master_seed, lattice.path_index, n)
        z = np.asarray(aux_normals, dtype=float)[None, :]
    states, _, blowup = run_batch(problem, scheme, policy, dt, times, dB, taus, z)
    k = int(blowup[0])
    if k >= 0:
        return TrajectoryRecord(scheme, dt, times[:k + 1], states[0, :k + 1], True, k)
    return TrajectoryRecord(scheme, dt, times, states[0])
