import numpy as np
import pytest

from disclosure.core import MixConfig, ObservationPair, SenderFrequencies, SenderProfiles
from disclosure.traffic import simulate

_VERDICTS = {}


def random_truth(rng, n, floor=0.5):
    """Dirichlet frequencies mixed with uniform so nobody is vanishingly rare."""
    f = floor / n + (1 - floor) * rng.dirichlet(np.ones(n))
    f /= f.sum()
    probs = rng.dirichlet(np.ones(n), size=n).T
    probs /= probs.sum(axis=0)
    return SenderFrequencies(f), SenderProfiles(probs)


def random_observations(seed, n, t, rho):
    rng = np.random.default_rng(seed)
    freqs, profiles = random_truth(rng, n)
    obs = simulate(MixConfig(n, t, rho, seed), freqs, profiles)
    return freqs, profiles, obs


# Hand-built 3-user, 5-round trace with t = 3.
HAND_X = np.array([[3, 0, 0], [1, 1, 1], [0, 2, 1], [2, 0, 1], [1, 2, 0]])
HAND_Y = np.array([[1, 1, 1], [0, 2, 1], [2, 0, 1], [1, 1, 1], [0, 0, 3]])


@pytest.fixture
def hand_obs():
    return ObservationPair(HAND_X, HAND_Y)


@pytest.fixture
def record():
    def _record(number, ok, detail):
        _VERDICTS[number] = (ok, detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")
