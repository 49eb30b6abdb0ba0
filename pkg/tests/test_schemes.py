import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncmilstein import (PowerLaw, SchemeKind, SdeProblem, TruncationPolicy, brownian,
                           get_entry, integrate, radius, step_randomized, step_truncated_milstein)
from truncmilstein.errors import ConfigurationError, DomainError, ResolutionError
from truncmilstein.model import Linear
from truncmilstein.schemes import parse_scheme, simulate_paths, step_grid

# two-stage evaluation done by hand in plain floats before the build
RAND_PREDICTOR = 0.9985355339059327
RAND_OUTPUT = 0.9964982051853299

WIDE = TruncationPolicy(PowerLaw(1.0, 1.0), 0.25)


def _problem(mu, sig, jac=None, y0=1.0, t_end=1.0):
    def zero_jac(t, y, l):
        return np.zeros(np.shape(y))
    return SdeProblem(1, 0.0, t_end, np.array([y0]), mu, sig, jac or zero_jac)


def _zero(t, y):
    return np.zeros(np.shape(y))


def _one(t, y):
    return np.ones(np.shape(y))


def _gbm_unit():
    g = Linear(1.0)
    return _problem(_zero, g, g.jacobian_col)


def test_parse_scheme_aliases():
    assert parse_scheme("em") is SchemeKind.EULER_MARUYAMA
    assert parse_scheme("milstein") is SchemeKind.MILSTEIN_CLASSICAL
    assert parse_scheme("trunc-milstein") is SchemeKind.MILSTEIN_TRUNCATED
    assert parse_scheme("rand-trunc-milstein") is SchemeKind.MILSTEIN_TRUNCATED_RANDOMIZED
    assert parse_scheme("milstein_truncated") is SchemeKind.MILSTEIN_TRUNCATED
    with pytest.raises(ConfigurationError):
        parse_scheme("rk4")


def test_truncated_step_zero_dynamics():
    p = _problem(_zero, _zero)
    x = np.array([0.7])
    assert np.array_equal(step_truncated_milstein(p, WIDE, 0.1, x, 0.01, 0.01, 0.3), x)


@pytest.mark.parametrize("dB,expected", [(0.1, 1.1), (0.2, 1.215)])
def test_truncated_step_gbm_hand_values(dB, expected):
    out = step_truncated_milstein(_gbm_unit(), WIDE, 0.0, np.array([1.0]), 0.01, 0.01, dB)
    assert out[0] == pytest.approx(expected, rel=1e-14)


def test_truncated_step_uses_nominal_radius():
    e = get_entry("example51")
    pol = e.truncation_defaults
    x = np.array([5.0])
    R = radius(pol, 2.0 ** -6)
    full = step_truncated_milstein(e.problem, pol, 0.5, x, 2.0 ** -6, 2.0 ** -8, 0.0)
    xp = np.array([R])
    hand = x + e.problem.drift(0.5, xp) * 2.0 ** -8 + 0.5 * 0.25 ** 1.5 * R * (0 - 2.0 ** -8)
    assert full[0] == pytest.approx(hand[0], rel=1e-14)


def test_step_rejects_actual_above_nominal():
    with pytest.raises(DomainError):
        step_truncated_milstein(_gbm_unit(), WIDE, 0.0, np.array([1.0]), 0.01, 0.02, 0.1)


def test_randomized_constant_drift():
    p = _problem(_one, _zero)
    for tau in (0.1, 0.5, 0.9):
        out = step_randomized(p, WIDE, 0.0, np.array([0.5]), 0.01, 0.01, tau, 0.0, 0.0)
        assert out[0] == pytest.approx(0.51, rel=1e-15)


@given(st.floats(0.01, 0.99), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-3, 3))
def test_randomized_equals_truncated_without_drift(tau, part, dB, x0):
    p = _gbm_unit()
    x = np.array([x0])
    a = step_randomized(p, WIDE, 0.0, x, 0.01, 0.01, tau, part, dB)
    b = step_truncated_milstein(p, WIDE, 0.0, x, 0.01, 0.01, dB)
    assert np.array_equal(a, b)


def test_randomized_example51_oracle():
    e = get_entry("example51")
    pred = 1 + 0.005 * (0.25 ** 0.25 - 1)
    assert pred == pytest.approx(RAND_PREDICTOR, rel=1e-15)
    out = step_randomized(e.problem, e.truncation_defaults, 0.5, np.array([1.0]), 0.01, 0.01,
                          0.5, 0.0, 0.0)
    assert out[0] == pytest.approx(RAND_OUTPUT, rel=1e-14)


def test_randomized_tau_domain():
    with pytest.raises(DomainError):
        step_randomized(_gbm_unit(), WIDE, 0.0, np.array([1.0]), 0.01, 0.01, 1.0, 0.0, 0.0)


def test_step_grid_partial_final_step():
    times = step_grid(0.0, 1.0, 3 * 2.0 ** -4)
    assert len(times) == 7
    assert times[0] == 0.0 and times[-1] == 1.0
    assert np.all(np.diff(times) > 0)
    assert times[-1] - times[-2] == pytest.approx(2.0 ** -4)


def test_integrate_one_step_zero_dynamics():
    p = _problem(_zero, _zero, y0=3.0)
    rec = integrate(p, "trunc-milstein", WIDE, 1.0, brownian.generate(0, 0, 4))
    assert rec.times.tolist() == [0.0, 1.0]
    assert rec.states[:, 0].tolist() == [3.0, 3.0]
    assert not rec.blew_up


def test_integrate_partial_step_uses_summed_increments():
    p = _gbm_unit()
    lat = brownian.generate(1, 0, 6)
    dt = 3 * 2.0 ** -4
    rec = integrate(p, "milstein", None, dt, lat)
    assert rec.times[0] == 0.0 and rec.times[-1] == 1.0 and len(rec.times) == 7
    assert rec.states[0, 0] == 1.0
    inc = lat.coarsen(4)
    x = 1.0
    for i in range(5):
        db = math.fsum(inc[3 * i:3 * i + 3])
        x = x + x * db + 0.5 * x * (db * db - dt)
    db = inc[15]
    x = x + x * db + 0.5 * x * (db * db - 2.0 ** -4)
    assert rec.states[-1, 0] == pytest.approx(x, rel=1e-12)


def test_integrate_misaligned_step():
    with pytest.raises(ResolutionError):
        integrate(_gbm_unit(), "milstein", None, 0.3, brownian.generate(0, 0, 4))


def test_integrate_requires_policy_and_offsets():
    lat = brownian.generate(0, 0, 6)
    p = _gbm_unit()
    with pytest.raises(ConfigurationError):
        integrate(p, "trunc-milstein", None, 2.0 ** -4, lat)
    with pytest.raises(ConfigurationError):
        integrate(p, "rand-trunc-milstein", WIDE, 2.0 ** -4, lat)
    with pytest.raises(ConfigurationError):
        integrate(p, "milstein", None, 2.0 ** -4, lat, offsets=brownian.offsets(0, 0, 16))


def test_integrate_randomized_runs_and_is_deterministic():
    e = get_entry("example51")
    lat = brownian.generate(3, 2, 10)
    off = brownian.offsets(3, 2, 2 ** 7)
    a = integrate(e.problem, "rand-trunc-milstein", e.truncation_defaults, 2.0 ** -7, lat, off)
    b = integrate(e.problem, "rand-trunc-milstein", e.truncation_defaults, 2.0 ** -7, lat, off)
    assert np.array_equal(a.states, b.states)
    assert np.all(np.isfinite(a.states))


def test_integrate_matches_batch_simulation():
    e = get_entry("example51")
    fine = brownian.generate_batch(4, range(3), 10)
    _, batch, _ = simulate_paths(e.problem, "rand-trunc-milstein", e.truncation_defaults,
                                 2.0 ** -8, fine, 4, range(3))
    for p in range(3):
        rec = integrate(e.problem, "rand-trunc-milstein", e.truncation_defaults, 2.0 ** -8,
                        brownian.generate(4, p, 10), brownian.offsets(4, p, 2 ** 8))
        assert np.array_equal(rec.states, batch[p])


def test_degeneracy_truncated_equals_classical():
    e = get_entry("gbm_oracle")
    dt = 2.0 ** -8
    R = radius(WIDE, dt)
    checked = 0
    for path in range(40):
        lat = brownian.generate(0, path, 10)
        cl = integrate(e.problem, "milstein", None, dt, lat)
        if np.max(np.abs(cl.states)) >= R:
            continue
        tr = integrate(e.problem, "trunc-milstein", WIDE, dt, lat)
        assert np.max(np.abs(tr.states - cl.states)) <= 1e-14
        checked += 1
    assert checked >= 10


def test_blowup_recorded_in_band():
    def quintic(t, y):
        return -np.asarray(y) ** 5
    p = _problem(quintic, _zero, y0=3.0)
    rec = integrate(p, "em", None, 1 / 8, brownian.generate(0, 0, 3))
    assert rec.blew_up
    k = rec.blowup_index
    assert len(rec.states) == k + 1 == len(rec.times)
    assert not np.isfinite(rec.states[-1]).all()
    assert np.isfinite(rec.states[:-1]).all()


def test_em_gbm_terminal_rms():
    e = get_entry("gbm_oracle")
    fine = brownian.generate_batch(0, range(500), 10)
    _, X, blow = simulate_paths(e.problem, "em", None, 2.0 ** -10, fine, 0, range(500))
    b_T = fine.sum(axis=1)
    exact = e.exact_solution(np.ones(500), b_T)[:, 0]
    rms = math.sqrt(np.mean((X[:, -1, 0] - exact) ** 2))
    assert np.all(blow < 0)
    # independent 20000-path EM loop gives about 0.060
    assert 0.04 <= rms <= 0.08


def test_example51_truncated_no_blowup():
    e = get_entry("example51")
    fine = brownian.generate_batch(0, range(1000), 10)
    _, X, blow = simulate_paths(e.problem, "trunc-milstein", e.truncation_defaults, 2.0 ** -10,
                                fine, 0, range(1000))
    assert np.sum(blow >= 0) <= 1


def test_coupled_terminal_values_converge():
    e = get_entry("gbm_oracle")
    fine = brownian.generate_batch(2, range(200), 12)
    gaps = []
    for lvl in (4, 6, 8):
        _, a, _ = simulate_paths(e.problem, "milstein", None, 2.0 ** -lvl, fine, 2, range(200))
        _, b, _ = simulate_paths(e.problem, "milstein", None, 2.0 ** -(lvl + 1), fine, 2,
                                 range(200))
        gaps.append(np.mean(np.abs(a[:, -1] - b[:, -1])))
    assert gaps[0] > gaps[1] > gaps[2]
