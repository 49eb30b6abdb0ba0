import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncmilstein import (ErrorSample, NotApplicableError, PowerLaw, RegressionDomainError,
                           SdeProblem, TruncationPolicy, fit_rate, get_entry, moment_sweep,
                           predicted_rate, strong_error)
from truncmilstein.errors import ConfigurationError


def _samples(errors, dts, q=2.0):
    return [ErrorSample(dt, 1000, q, e, e, 0.0) for dt, e in zip(dts, errors)]


DTS = [2.0 ** -k for k in range(6, 12)]


def test_fit_rate_exact_power_law():
    slope, half = fit_rate(_samples([dt ** 0.5 for dt in DTS], DTS))
    assert slope == pytest.approx(0.25, abs=1e-10)
    assert half < 1e-10


@given(st.floats(0.05, 2.0), st.floats(1e-3, 1e3), st.sampled_from([2.0, 3.0, 4.0]))
def test_fit_rate_recovers_synthetic_power_laws(rate, const, q):
    errs = [const * dt ** (rate * q) for dt in DTS]
    slope, _ = fit_rate(_samples(errs, DTS, q))
    assert abs(slope - rate) <= 1e-10


def test_fit_rate_jitter():
    rng = np.random.default_rng(3)
    errs = [dt ** 2.0 * (1 + 0.1 * rng.uniform(-1, 1)) for dt in DTS]
    slope, half = fit_rate(_samples(errs, DTS))
    assert 0.9 <= slope <= 1.1
    assert half > 0


def test_fit_rate_domain_errors():
    with pytest.raises(RegressionDomainError):
        fit_rate(_samples([1e-2, 1e-3], DTS[:2]))
    with pytest.raises(RegressionDomainError):
        fit_rate(_samples([1e-2, 0.0, 1e-4], DTS[:3]))
    with pytest.raises(RegressionDomainError):
        fit_rate(_samples([1e-2, math.nan, 1e-4], DTS[:3]))
    mixed = _samples([1e-2, 1e-3], DTS[:2]) + _samples([1e-4], DTS[2:3], q=4.0)
    with pytest.raises(RegressionDomainError):
        fit_rate(mixed)


def test_predicted_rate_examples():
    assert predicted_rate("milstein_truncated", 0.25, 0.25) == 0.25
    assert predicted_rate("milstein_truncated_randomized", 0.25, 0.25) == 0.5
    assert predicted_rate("milstein_truncated_randomized", 0.05, 0.25) == pytest.approx(0.75)
    assert predicted_rate("milstein_truncated_randomized", 0.01, 1.0) == pytest.approx(0.98)
    with pytest.raises(NotApplicableError):
        predicted_rate("milstein_classical", 0.25, 0.25)
    with pytest.raises(ConfigurationError):
        predicted_rate("milstein_truncated", 0.3, 0.25)


@given(st.floats(0.001, 0.25), st.floats(0.001, 1.0))
def test_predicted_rate_bounds(eps, alpha):
    a = predicted_rate("milstein_truncated", eps, alpha)
    b = predicted_rate("milstein_truncated_randomized", eps, alpha)
    assert 0 < a <= b <= 1


def test_self_comparison_is_exactly_zero():
    e = get_entry("example51")
    out = strong_error(e.problem, "milstein_truncated", e.truncation_defaults, [2.0 ** -8],
                       ref_level=8, M=100, ref_margin=0)
    assert out[0].error_at_T == 0.0 and out[0].error_sup == 0.0


def test_strong_error_preconditions():
    e = get_entry("example51")
    pol = e.truncation_defaults
    with pytest.raises(ConfigurationError, match="levels coarser"):
        strong_error(e.problem, "milstein_truncated", pol, [2.0 ** -10], ref_level=12, M=100)
    with pytest.raises(ConfigurationError, match="100 paths"):
        strong_error(e.problem, "milstein_truncated", pol, [2.0 ** -6], ref_level=12, M=50)
    with pytest.raises(ConfigurationError):
        strong_error(e.problem, "milstein_truncated", pol, [2.0 ** -6], ref_level=27, M=100)
    with pytest.raises(ConfigurationError, match="dyadic"):
        strong_error(e.problem, "milstein_truncated", pol, [0.3], ref_level=12, M=100)


def test_worker_count_does_not_change_estimates():
    e = get_entry("example51")
    args = (e.problem, "milstein_truncated_randomized", e.truncation_defaults,
            [2.0 ** -k for k in (6, 7, 8)])
    a = strong_error(*args, ref_level=12, M=400, master_seed=5, workers=1)
    b = strong_error(*args, ref_level=12, M=400, master_seed=5, workers=3)
    assert a == b


def test_exact_solution_matches_fine_milstein():
    e = get_entry("gbm_oracle")
    out = strong_error(e.problem, "milstein_classical", None, [2.0 ** -14], ref_level=18,
                       M=100, exact_solution=e.exact_solution)
    assert math.sqrt(out[0].error_at_T) < 1e-3


def test_moment_sweep_constant_path():
    def zero(t, y):
        return np.zeros(np.shape(y))
    p = SdeProblem(1, 0.0, 1.0, np.array([-1.5]), zero, zero, lambda t, y, l: zero(t, y))
    rows = moment_sweep(p, "milstein_truncated", TruncationPolicy(PowerLaw(1, 1), 0.25),
                        [2.0 ** -k for k in (3, 4, 5)], M=100, p=3.0)
    for r in rows:
        assert r.sup_moment == pytest.approx(1.5 ** 3, rel=1e-14)
        assert r.blowup_frac == 0.0


def test_moment_sweep_remark35_finite():
    e = get_entry("remark35")
    rows = moment_sweep(e.problem, "milstein_truncated", e.truncation_defaults,
                        [2.0 ** -k for k in range(7, 12)], M=1000, p=2.0)
    for r in rows:
        assert math.isfinite(r.sup_moment) and r.blowup_frac == 0.0


def test_moment_sweep_order_check():
    e = get_entry("remark35")
    with pytest.raises(ConfigurationError):
        moment_sweep(e.problem, "milstein_truncated", e.truncation_defaults, [2.0 ** -8],
                     M=100, p=1.0)


# ---------------------------------------------- properties on the full studies

@pytest.mark.parametrize("kind", ["truncated", "randomized"])
def test_error_at_T_not_above_sup(studies, kind):
    for s in studies.example51(kind).samples:
        assert 0 <= s.error_at_T <= s.error_sup
        assert s.std_error >= 0


def test_error_decreases_with_step(studies):
    errs = [s.error_at_T for s in studies.example51("truncated").samples]
    drops = sum(b < a for a, b in zip(errs, errs[1:]))
    assert drops >= 4


@pytest.mark.parametrize("kind", ["truncated", "randomized"])
def test_seed_invariance_of_slopes(studies, kind):
    slopes = [studies.example51(kind, seed).fitted_slope for seed in (0, 1, 2)]
    assert max(slopes) - min(slopes) < 0.1, slopes


def test_seed_invariance_oracle(studies):
    slopes = [studies.oracle(seed).fitted_slope for seed in (0, 1, 2)]
    assert max(slopes) - min(slopes) < 0.1, slopes


def test_reference_bias(studies):
    a = studies.example51("truncated", 0, 16).fitted_slope
    b = studies.example51("truncated", 0, 17).fitted_slope
    assert abs(a - b) < 0.05
