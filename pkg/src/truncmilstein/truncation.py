"""Truncation machinery: growth envelopes, the step-control function and the
radial projection used to build bounded coefficients.

For a step ``dt`` the truncation radius is ``R = f^{-1}(h(dt))`` with
``h(dt) = dt**(-epsilon)``.  Coefficients are evaluated at the state
projected onto the closed ball of radius ``R``, which keeps them bounded by
``h(dt)`` whenever ``f`` dominates the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PolicyDomainError

BISECTION_MAX_ITER = 200
BISECTION_TOL = 1e-14


class GrowthEnvelope:
    """Strictly increasing f with f(u) -> inf; see :class:`PowerLaw` and
    :class:`GenericEnvelope`."""

    def __call__(self, u):
        raise NotImplementedError

    def inverse(self, v: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLaw(GrowthEnvelope):
    """f(u) = c * u**gamma."""

    c: float
    gamma: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"power-law envelope needs c > 0, got {self.c}")
        if not (self.gamma >= 1 and math.isfinite(self.gamma)):
            raise DomainError(f"power-law envelope needs gamma >= 1, got {self.gamma}")

    def __call__(self, u):
        return self.c * np.power(u, self.gamma)

    def inverse(self, v: float) -> float:
        if v < 0:
            raise DomainError(f"envelope inverse undefined for v={v}")
        return (v / self.c) ** (1.0 / self.gamma)


@dataclass(frozen=True)
class GenericEnvelope(GrowthEnvelope):
    """Arbitrary monotone f, inverted by bracketed bisection on [lo, domain_hi]."""

    f: Callable[[float], float]
    domain_hi: float = 1e6

    def __call__(self, u):
        return self.f(u)

    def inverse(self, v: float, lo: float = 1.0) -> float:
        hi = self.domain_hi
        flo, fhi = float(self.f(lo)), float(self.f(hi))
        if not flo <= v <= fhi:
            raise DomainError(
                f"value {v} outside envelope range [{flo}, {fhi}] on [{lo}, {hi}]")
        for _ in range(BISECTION_MAX_ITER):
            if hi - lo <= BISECTION_TOL:
                break
            mid = 0.5 * (lo + hi)
            if self.f(mid) < v:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TruncationPolicy:
    """Envelope plus the step control h(dt) = dt**(-epsilon) and its cap.

    ``strict_floor`` enforces h(dt) >= f(1) at every requested step.  Turning
    it off lets :func:`radius` return radii below 1, which some published
    configurations rely on.
    """

    envelope: GrowthEnvelope
    epsilon: float
    h_cap: float | None = None
    strict_floor: bool = True
    _cap: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        eps = self.epsilon
        if not (0 < eps <= 0.25):
            raise DomainError(
                f"epsilon={eps} violates dt**(1/4) * h(dt) <= h_cap on (0, 1]: "
                "need 0 < epsilon <= 1/4")
        floor = max(1.0, float(self.envelope(1.0)))
        cap = floor if self.h_cap is None else float(self.h_cap)
        if cap < floor:
            raise DomainError(f"h_cap={cap} must be >= max(1, f(1)) = {floor}")
        object.__setattr__(self, "_cap", cap)

    @property
    def cap(self) -> float:
        return self._cap

    def h(self, dt: float) -> float:
        return dt ** (-self.epsilon)


def radius(policy: TruncationPolicy, dt: float) -> float:
    """Truncation radius f^{-1}(dt**-epsilon) for a step in (0, 1]."""
    if not (0 < dt <= 1):
        raise DomainError(f"step dt={dt} outside (0, 1]")
    h = policy.h(dt)
    f1 = float(policy.envelope(1.0))
    if h < f1:
        if policy.strict_floor:
            raise PolicyDomainError(
                f"h(dt)={h:.6g} < f(1)={f1:.6g} at dt={dt:.6g}: "
                f"the step must satisfy dt <= f(1)**(-1/epsilon) = {f1 ** (-1 / policy.epsilon):.6g}")
        if isinstance(policy.envelope, GenericEnvelope):
            return policy.envelope.inverse(h, lo=0.0)
    return policy.envelope.inverse(h)


def vector_norm(y: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis, scaled to avoid overflow."""
    y = np.asarray(y, dtype=float)
    m = np.max(np.abs(y), axis=-1)
    safe = np.where(m > 0, m, 1.0)
    with np.errstate(invalid="ignore"):
        scaled = y / safe[..., None]
        return m * np.sqrt(np.sum(scaled * scaled, axis=-1))


def project(y, R: float) -> np.ndarray:
    """Radial projection of ``y`` (last axis = state) onto the ball |y| <= R.

    The returned vector never has computed norm above R, so projecting twice
    gives back the same array.
    """
    if not R > 0:
        raise DomainError(f"projection radius must be positive, got {R}")
    y = np.asarray(y, dtype=float)
    if y.shape[-1] == 1:
        return np.clip(y, -R, R)
    norm = vector_norm(y)
    outside = norm > R
    if not np.any(outside):
        return y.copy()
    scale = np.where(outside, R / np.where(outside, norm, 1.0), 1.0)
    out = y * scale[..., None]
    # rounding can leave the scaled norm one ulp above R
    over = vector_norm(out) > R
    while np.any(over):
        scale = np.where(over, np.nextafter(scale, 0.0), scale)
        out = y * scale[..., None]
        over = vector_norm(out) > R
    return out


def lsigma_at(problem, t, y) -> np.ndarray:
    """sum_l sigma^l(t, y) * G^l(t, y) without finiteness checks."""
    sig = problem.diffusion(t, y)
    acc = np.zeros_like(sig)
    for l in range(problem.dim):
        acc = acc + sig[..., l:l + 1] * problem.diffusion_jacobian_col(t, y, l)
    return acc


def truncated_coefficients(problem, policy: TruncationPolicy, dt: float, t, y):
    """Return (mu_d, sigma_d, lsigma_d) evaluated at the projected state."""
    yp = project(y, radius(policy, dt))
    return problem.drift(t, yp), problem.diffusion(t, yp), lsigma_at(problem, t, yp)
