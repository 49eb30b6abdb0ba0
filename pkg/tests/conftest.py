"""Shared, session-cached Monte Carlo studies.

The full-size studies take tens of seconds each, so acceptance and property
tests reuse one run per (configuration, seed, reference level).
"""

import pytest

from truncmilstein import PowerLaw, TruncationPolicy, convergence_study, get_entry

STEPS_EX51 = [2.0 ** -k for k in range(6, 12)]
STEPS_ORACLE = [2.0 ** -k for k in range(5, 10)]

CONFIGS = {
    "truncated": ("milstein_truncated", lambda: TruncationPolicy(PowerLaw(2.0, 5.0), 0.25)),
    # every step violates h(dt) >= f(1) at epsilon = 0.05, so the floor is relaxed
    "randomized": ("milstein_truncated_randomized",
                   lambda: TruncationPolicy(PowerLaw(2.0, 5.0), 0.05, strict_floor=False)),
}

ACCEPTANCE_LINES = []


class Studies:
    def __init__(self):
        self._cache = {}

    def example51(self, kind, seed=0, ref_level=16):
        key = ("example51", kind, seed, ref_level)
        if key not in self._cache:
            scheme, policy = CONFIGS[kind]
            entry = get_entry("example51")
            self._cache[key] = convergence_study(
                "example51", entry.problem, scheme, policy(), STEPS_EX51, ref_level=ref_level,
                M=1000, master_seed=seed)
        return self._cache[key]

    def oracle(self, seed=0):
        key = ("gbm_oracle", seed)
        if key not in self._cache:
            entry = get_entry("gbm_oracle")
            self._cache[key] = convergence_study(
                "gbm_oracle", entry.problem, "milstein_classical", None, STEPS_ORACLE,
                ref_level=16, M=1000, master_seed=seed, exact_solution=entry.exact_solution)
        return self._cache[key]


_STUDIES = Studies()


@pytest.fixture(scope="session")
def studies():
    return _STUDIES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
