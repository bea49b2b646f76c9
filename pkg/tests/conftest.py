import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pomdp_lp import kernels
from pomdp_lp.model import validate_instance

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

BACKENDS = sorted(kernels.available_backends())

# criterion number -> (passed, one-line description), filled by the report hook
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_criterion_(\d+)", item.name)
    if not m or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    n = int(m.group(1))
    doc = (item.function.__doc__ or "").strip().splitlines()
    prev = _criteria.get(n, (True, ""))[0]
    _criteria[n] = (prev and rep.passed, doc[0] if doc else "")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, desc = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {desc}")


@pytest.fixture(params=BACKENDS)
def kernel_backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    mod = kernels.available_backends()[request.param]
    monkeypatch.setattr(kernels, "active", mod)
    return request.param


def identity_emission_instance(seed, n_states, n_actions, horizon):
    rng = np.random.default_rng(seed)
    P = rng.random((n_states, n_actions, n_states))
    P /= P.sum(axis=2, keepdims=True)
    p0 = rng.random(n_states)
    return validate_instance({
        "num_states": n_states, "num_observations": n_states,
        "num_actions": n_actions, "horizon": horizon,
        "initial": p0 / p0.sum(), "transition": P,
        "emission": np.eye(n_states), "reward": rng.random((n_states, n_actions, n_states)),
    })


def instance_with(base, **changes):
    raw = {
        "num_states": base.num_states, "num_observations": base.num_observations,
        "num_actions": base.num_actions, "horizon": base.horizon,
        "initial": base.initial, "transition": base.transition,
        "emission": base.emission, "reward": base.reward,
    }
    raw.update(changes)
    return validate_instance(raw)


def random_policy(rng, n_obs, n_actions, horizon):
    from pomdp_lp.model import Policy

    return Policy.from_actions(rng.integers(0, n_actions, size=(horizon, n_obs)), n_actions)


def random_stochastic_policy(rng, n_obs, n_actions, horizon):
    from pomdp_lp.model import Policy

    rules = rng.random((horizon, n_obs, n_actions))
    return Policy(rules / rules.sum(axis=2, keepdims=True))
