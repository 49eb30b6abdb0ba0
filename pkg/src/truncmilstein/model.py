"""SDE problem definitions, the built-in problem catalog and sampling-based
assumption probes.

Coefficient callables take ``(t, y)`` where ``y`` has the state on its last
axis (shape ``(..., d)``) and ``t`` is a scalar or broadcasts against
``y.shape[:-1]``.  They must be pure so many paths can be evaluated at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, NumericEvaluationError
from .truncation import PowerLaw, TruncationPolicy, lsigma_at, vector_norm

Coefficient = Callable[[object, np.ndarray], np.ndarray]


def _tcol(t):
    return np.asarray(t, dtype=float)[..., None]


@dataclass(frozen=True, eq=False)
class SdeProblem:
    """dy = drift(t, y) dt + diffusion(t, y) dB on [t0, t_end], y(t0) = y0.

    ``diffusion_jacobian_col(t, y, l)`` is the derivative of the diffusion
    vector with respect to the l-th state component (0-based).
    """

    dim: int
    t0: float
    t_end: float
    y0: np.ndarray
    drift: Coefficient
    diffusion: Coefficient
    diffusion_jacobian_col: Callable[[object, np.ndarray, int], np.ndarray]
    holder_alpha: float = 1.0
    poly_beta: float = 0.0

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        object.__setattr__(self, "y0", y0)
        if self.dim < 1:
            raise ConfigurationError(f"dim must be positive, got {self.dim}")
        if not self.t0 < self.t_end:
            raise ConfigurationError(f"need t0 < t_end, got [{self.t0}, {self.t_end}]")
        if y0.shape != (self.dim,):
            raise ConfigurationError(f"y0 has shape {y0.shape}, expected ({self.dim},)")
        if not 0 < self.holder_alpha <= 1:
            raise ConfigurationError(f"holder_alpha must lie in (0, 1], got {self.holder_alpha}")
        if self.poly_beta < 0:
            raise ConfigurationError(f"poly_beta must be >= 0, got {self.poly_beta}")
        for name, fn in (("drift", self.drift), ("diffusion", self.diffusion)):
            v = np.asarray(fn(self.t0, y0), dtype=float)
            if v.shape != (self.dim,):
                raise ConfigurationError(f"{name} at (t0, y0) has shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise NumericEvaluationError(name, self.t0, y0)


@dataclass(frozen=True, eq=False)
class ProblemCatalogEntry:
    name: str
    problem: SdeProblem
    truncation_defaults: TruncationPolicy
    exact_solution: Callable | None = None
    description: str = ""


def _checked(what, value, t, y):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise NumericEvaluationError(what, t, y)
    return value


def eval_lsigma(problem: SdeProblem, t: float, y) -> np.ndarray:
    """L sigma(t, y) = sum_l sigma^l(t, y) G^l(t, y)."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != problem.dim:
        raise DomainError(f"state has length {y.shape[-1]}, problem dim is {problem.dim}")
    with np.errstate(all="ignore"):
        value = lsigma_at(problem, t, y)
    return _checked("L sigma", value, t, y)


# ----------------------------------------------------------------- built-ins

def _ex51_weight(t):
    """t(1 - t) clipped at 0; a float for scalar t, a column otherwise."""
    if np.ndim(t) == 0:
        t = float(t)
        return max(t * (1.0 - t), 0.0)
    tt = _tcol(t)
    return np.clip(tt * (1.0 - tt), 0.0, None)


def _ex51_drift(t, y):
    return _ex51_weight(t) ** 0.25 * y * y - y ** 5


def _ex51_diffusion(t, y):
    return _ex51_weight(t) ** 0.75 * y


def _ex51_jac(t, y, l):
    return np.full(np.broadcast_shapes(np.shape(y), np.shape(_ex51_weight(t))),
                   0.0) + _ex51_weight(t) ** 0.75


def _r35_drift(t, y):
    return y - 2.0 * y ** 5


def _r35_diffusion(t, y):
    return y * y


def _r35_jac(t, y, l):
    return 2.0 * y


@dataclass(frozen=True)
class Linear:
    """y -> coef * y, with ``jacobian_col`` giving its constant derivative."""

    coef: float

    def __call__(self, t, y):
        return self.coef * np.asarray(y, dtype=float)

    def jacobian_col(self, t, y, l):
        out = np.zeros(np.shape(y))
        out[..., l] = self.coef
        return out


@dataclass(frozen=True)
class GbmExact:
    """Closed form y0 * exp((a - b^2/2)(t - t0) + b B(t)) of linear SDEs."""

    a: float
    b: float
    y0: tuple
    t0: float = 0.0

    def __call__(self, t, b_path):
        t = np.asarray(t, dtype=float)
        b_path = np.asarray(b_path, dtype=float)
        expo = (self.a - 0.5 * self.b ** 2) * (t - self.t0) + self.b * b_path
        return np.asarray(self.y0, dtype=float) * np.exp(expo)[..., None]


@dataclass(frozen=True)
class TimePolyTerms:
    """Scalar coefficient sum_j c_j t^a1_j (1 - t)^a2_j y^k_j.

    Each term is a 4-tuple ``(c, a1, a2, k)``; ``k`` is a nonnegative integer.
    """

    terms: tuple

    @classmethod
    def parse(cls, text: str) -> "TimePolyTerms":
        terms = []
        for chunk in text.replace(" ", "").split(";"):
            if not chunk:
                continue
            parts = chunk.split(",")
            if len(parts) != 4:
                raise ConfigurationError(
                    f"term {chunk!r} must be 'c,a1,a2,k' (c * t^a1 * (1-t)^a2 * y^k)")
            c, a1, a2, k = (float(p) for p in parts)
            if k < 0 or k != int(k):
                raise ConfigurationError(f"state exponent must be a nonnegative integer, got {k}")
            terms.append((c, a1, a2, int(k)))
        return cls(tuple(terms))

    def format(self) -> str:
        return ";".join(f"{c!r},{a1!r},{a2!r},{k}" for c, a1, a2, k in self.terms)

    def _time_factor(self, t, a1, a2):
        tt = _tcol(t)
        return np.power(tt, a1) * np.power(np.clip(1.0 - tt, 0.0, None), a2)

    def __call__(self, t, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast_shapes(y.shape, np.shape(_tcol(t))))
        for c, a1, a2, k in self.terms:
            out = out + c * self._time_factor(t, a1, a2) * y ** k
        return out

    def jacobian_col(self, t, y, l):
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast_shapes(y.shape, np.shape(_tcol(t))))
        for c, a1, a2, k in self.terms:
            if k:
                out = out + c * k * self._time_factor(t, a1, a2) * y ** (k - 1)
        return out

    def max_degree(self) -> int:
        return max((k for *_, k in self.terms), default=0)


def inline_problem(drift: str, diffusion: str, y0: float = 1.0, t0: float = 0.0,
                   t_end: float = 1.0, alpha: float = 1.0, beta: float | None = None) -> SdeProblem:
    """Scalar problem from ``c,a1,a2,k;...`` term lists."""
    mu = TimePolyTerms.parse(drift)
    sig = TimePolyTerms.parse(diffusion)
    if beta is None:
        # L sigma = sigma sigma' has degree 2 deg(sigma) - 1
        top = max(mu.max_degree(), sig.max_degree(), 2 * sig.max_degree() - 1)
        beta = max(0, top - 1)
    return SdeProblem(dim=1, t0=t0, t_end=t_end, y0=np.array([y0]), drift=mu,
                      diffusion=sig, diffusion_jacobian_col=sig.jacobian_col,
                      holder_alpha=alpha, poly_beta=beta)


def catalog() -> list[ProblemCatalogEntry]:
    """Built-in problems: the non-autonomous benchmark, the autonomous
    quintic example and a geometric Brownian motion with closed form."""
    ex51 = SdeProblem(
        dim=1, t0=0.0, t_end=1.0, y0=np.array([2.0]),
        drift=_ex51_drift, diffusion=_ex51_diffusion, diffusion_jacobian_col=_ex51_jac,
        holder_alpha=0.25, poly_beta=4.0)
    r35 = SdeProblem(
        dim=1, t0=0.0, t_end=1.0, y0=np.array([1.0]),
        drift=_r35_drift, diffusion=_r35_diffusion, diffusion_jacobian_col=_r35_jac,
        holder_alpha=1.0, poly_beta=4.0)
    a, b = 0.5, 1.0
    gbm_mu, gbm_sig = Linear(a), Linear(b)
    gbm = SdeProblem(
        dim=1, t0=0.0, t_end=1.0, y0=np.array([1.0]),
        drift=gbm_mu, diffusion=gbm_sig, diffusion_jacobian_col=gbm_sig.jacobian_col,
        holder_alpha=1.0, poly_beta=0.0)
    return [
        ProblemCatalogEntry(
            "example51", ex51, TruncationPolicy(PowerLaw(2.0, 5.0), 0.25),
            description="dy = ([t(1-t)]^(1/4) y^2 - y^5) dt + [t(1-t)]^(3/4) y dB, y(0)=2"),
        ProblemCatalogEntry(
            "remark35", r35, TruncationPolicy(PowerLaw(3.0, 5.0), 0.25),
            description="dy = (y - 2y^5) dt + y^2 dB, y(0)=1"),
        ProblemCatalogEntry(
            "gbm_oracle", gbm, TruncationPolicy(PowerLaw(1.0, 1.0), 0.25),
            exact_solution=GbmExact(a, b, (1.0,), 0.0),
            description="dy = 0.5 y dt + y dB, y(0)=1, closed-form solution"),
    ]


def get_entry(name: str) -> ProblemCatalogEntry:
    for entry in catalog():
        if entry.name == name:
            return entry
    names = ", ".join(e.name for e in catalog())
    raise ConfigurationError(f"unknown problem {name!r}; catalog has: {names}")


# -------------------------------------------------------------------- probes

@dataclass
class ProbeResult:
    name: str
    passed: bool
    fitted_constant: float
    bound: float
    inequality: str
    witness: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.name}: fitted {self.fitted_constant:.6g} (bound {self.bound:.6g}); {self.inequality}"
        if not self.passed and self.witness:
            text += "; witness " + ", ".join(f"{k}={v}" for k, v in self.witness.items())
        return text


def _sample_points(problem, rng, samples, box):
    t = rng.uniform(problem.t0, problem.t_end, size=samples)
    y = rng.uniform(-box, box, size=(samples, problem.dim))
    return t, y


def _evaluate(problem, t, y):
    with np.errstate(all="ignore"):
        mu = np.asarray(problem.drift(t, y), dtype=float)
        sig = np.asarray(problem.diffusion(t, y), dtype=float)
    for name, v in (("drift", mu), ("diffusion", sig)):
        bad = ~np.all(np.isfinite(v), axis=-1)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NumericEvaluationError(name, float(t[i]), y[i].tolist())
    return mu, sig


def _witness(t, y, i, **extra):
    w = {"t": float(t[i]), "y": y[i].tolist()}
    w.update({k: float(v) for k, v in extra.items()})
    return w


def fd_check(problem: SdeProblem, samples: int = 1000, seed: int = 0) -> float:
    """Maximum deviation between the supplied diffusion Jacobian columns and
    central finite differences of the diffusion.

    Deviations are relative to max(|G|, |fd|, 1), so columns near zero are
    compared absolutely and the O(h^2) differencing error does not dominate.
    """
    if samples < 1:
        raise DomainError("fd_check needs at least one sample")
    rng = np.random.default_rng(seed)
    t, y = _sample_points(problem, rng, samples, 2.0)
    _evaluate(problem, t, y)
    step = 1e-6 * np.maximum(1.0, vector_norm(y))
    worst = 0.0
    for l in range(problem.dim):
        bump = np.zeros_like(y)
        bump[:, l] = step
        with np.errstate(all="ignore"):
            fd = (problem.diffusion(t, y + bump) - problem.diffusion(t, y - bump)) / (2 * step[:, None])
            g = np.asarray(problem.diffusion_jacobian_col(t, y, l), dtype=float)
        if not (np.all(np.isfinite(fd)) and np.all(np.isfinite(g))):
            raise NumericEvaluationError("diffusion Jacobian", t.tolist(), y.tolist())
        num = vector_norm(g - fd)
        den = np.maximum(np.maximum(vector_norm(g), vector_norm(fd)), 1.0)
        worst = max(worst, float(np.max(num / den)))
    return worst


def growth_probe(problem: SdeProblem, samples: int = 10_000, seed: int = 0,
                 bound: float = 3.0, box: float = 5.0) -> ProbeResult:
    """Ratio max(|mu|, |sigma|, |L sigma|) / (1 + |y|^(beta+1)) on the box."""
    rng = np.random.default_rng(seed)
    t, y = _sample_points(problem, rng, samples, box)
    mu, sig = _evaluate(problem, t, y)
    ls = eval_lsigma(problem, t, y)
    coef = np.maximum.reduce([vector_norm(mu), vector_norm(sig), vector_norm(ls)])
    ratio = coef / (1.0 + vector_norm(y) ** (problem.poly_beta + 1))
    i = int(np.argmax(ratio))
    return ProbeResult(
        "growth", bool(ratio[i] <= bound), float(ratio[i]), bound,
        "|mu| v |sigma| v |L sigma| <= M2 (1 + |y|^(beta+1))",
        _witness(t, y, i, ratio=ratio[i]))


def envelope_probe(problem: SdeProblem, envelope, samples: int = 10_000, seed: int = 0,
                   box: float = 5.0) -> ProbeResult:
    """Checks |mu| v |sigma| v |G^l| <= f(max(1, |y|)), a necessary condition
    for the envelope to dominate the coefficients on every ball."""
    rng = np.random.default_rng(seed)
    t, y = _sample_points(problem, rng, samples, box)
    mu, sig = _evaluate(problem, t, y)
    parts = [vector_norm(mu), vector_norm(sig)]
    with np.errstate(all="ignore"):
        for l in range(problem.dim):
            parts.append(vector_norm(np.asarray(problem.diffusion_jacobian_col(t, y, l), dtype=float)))
    coef = np.maximum.reduce(parts)
    ratio = coef / np.asarray(envelope(np.maximum(1.0, vector_norm(y))), dtype=float)
    i = int(np.argmax(ratio))
    return ProbeResult(
        "growth_envelope", bool(ratio[i] <= 1.0), float(ratio[i]), 1.0,
        "sup_{|y|<=u} |mu| v |sigma| v |G^l| <= f(u) for u >= 1",
        _witness(t, y, i, ratio=ratio[i]))


def khasminskii_probe(problem: SdeProblem, p: float = 4.0, samples: int = 10_000,
                      seed: int = 0, bound: float = 8.0, box: float = 5.0) -> ProbeResult:
    rng = np.random.default_rng(seed)
    t, y = _sample_points(problem, rng, samples, box)
    mu, sig = _evaluate(problem, t, y)
    lhs = np.sum(y * mu, axis=-1) + (p - 1) * np.sum(sig * sig, axis=-1)
    ratio = lhs / (1.0 + np.sum(y * y, axis=-1))
    i = int(np.argmax(ratio))
    return ProbeResult(
        "khasminskii", bool(ratio[i] <= bound), float(ratio[i]), bound,
        f"<y, mu> + {p - 1:g} |sigma|^2 <= C3 (1 + |y|^2)",
        _witness(t, y, i, ratio=ratio[i]))


def monotonicity_probe(problem: SdeProblem, q: float = 4.0, samples: int = 10_000,
                       seed: int = 0, bound: float = 10.0, box: float = 5.0) -> ProbeResult:
    rng = np.random.default_rng(seed)
    t, x = _sample_points(problem, rng, samples, box)
    y = rng.uniform(-box, box, size=x.shape)
    mux, sigx = _evaluate(problem, t, x)
    muy, sigy = _evaluate(problem, t, y)
    dx = x - y
    ds = sigx - sigy
    lhs = np.sum(dx * (mux - muy), axis=-1) + (q - 1) * np.sum(ds * ds, axis=-1)
    sq = np.sum(dx * dx, axis=-1)
    ratio = np.where(sq > 0, lhs / np.where(sq > 0, sq, 1.0), -np.inf)
    i = int(np.argmax(ratio))
    return ProbeResult(
        "monotonicity", bool(ratio[i] <= bound), float(ratio[i]), bound,
        f"<x - y, mu(x) - mu(y)> + {q - 1:g} |sigma(x) - sigma(y)|^2 <= C2 |x - y|^2",
        {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist(), "ratio": float(ratio[i])})
