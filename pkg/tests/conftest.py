import dataclasses
import time

import pytest

from rsvo.scenarios import preset, run_scenario

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def scaled(cfg, dt_scale=1.0):
    """Same scenario at ``dt * dt_scale`` with the step budget scaled to keep the horizon."""
    if dt_scale == 1.0:
        return cfg
    sim = cfg.sim
    return cfg.with_sim(dynamics=dataclasses.replace(sim.dynamics, dt=sim.dynamics.dt * dt_scale),
                        max_steps=int(round(sim.max_steps / dt_scale)))


class RunCache:
    def __init__(self):
        self._runs = {}

    def get(self, name, symmetric=None, dt_scale=1.0):
        """``(cfg, log, metrics, seconds)`` for a preset, simulated once per session."""
        key = (name, symmetric, dt_scale)
        if key not in self._runs:
            cfg = scaled(preset(name), dt_scale)
            if symmetric is not None:
                cfg = cfg.with_sim(symmetric=symmetric)
            t0 = time.perf_counter()
            log_, metrics = run_scenario(cfg)
            self._runs[key] = (cfg, log_, metrics, time.perf_counter() - t0)
        return self._runs[key]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


@pytest.fixture
def record():
    def _record(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
