import numpy as np
import pytest

from spectral_hmm.hmm import HmmModel, builtin_model


@pytest.fixture
def model_a():
    return builtin_model("k2d3")


@pytest.fixture
def identity_chain():
    return HmmModel(T=np.eye(2), O=np.eye(2), pi=[1.0, 0.0])


def random_model(seed, k, d, min_pi=0.05, max_cond=30.0):
    """Dirichlet-column model that satisfies the rank conditions comfortably.

    Returns None when the draw is too ill-conditioned.
    """
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(k) * 2, size=k).T + np.eye(k)
    T /= T.sum(axis=0)
    O = rng.dirichlet(np.ones(d), size=k).T
    pi = rng.dirichlet(np.ones(k) * 3)
    if pi.min() < min_pi or np.linalg.cond(O) > max_cond or np.linalg.cond(T) > max_cond:
        return None
    return HmmModel(T, O, pi)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call" and "test_acceptance.py" in rep.nodeid:
                lines.append((rep.nodeid.split("::")[-1], outcome.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{'PASS' if outcome == 'PASSED' else 'FAIL'}  {name}")
