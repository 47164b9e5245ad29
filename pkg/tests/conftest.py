import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from idmix.measures import CompoundPoisson, SeqSpec, SymmetricAlphaStable, TemperedStable
from idmix.seqspace import DualFunctional, IndexDomain
from idmix.shifts import WeightedShiftOperator, WeightRule

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)


def functionals(domain=IndexDomain.NATURALS, lo=None, hi=8, max_size=5):
    lo = (0 if domain is IndexDomain.NATURALS else -8) if lo is None else lo
    return st.dictionaries(st.integers(lo, hi), complexes, max_size=max_size).map(
        lambda d: DualFunctional(d, domain))


def random_functional(rng, domain=IndexDomain.NATURALS, lo=0, hi=6, size=4, real=False):
    idx = rng.choice(np.arange(lo, hi + 1), size=min(size, hi - lo + 1), replace=False)
    re = rng.normal(size=idx.size)
    im = np.zeros(idx.size) if real else rng.normal(size=idx.size)
    return DualFunctional(dict(zip(idx.tolist(), (re + 1j * im).tolist())), domain)


# canonical invariant (measure, operator) pairs
def poisson_pair(gamma=1.5, p=1.0):
    T = WeightedShiftOperator.backward(WeightRule.power_law_p6(gamma, p))
    return CompoundPoisson(SeqSpec.power_law(1.0, gamma, p), p), T


def stable_pair(alpha=1.5, p=1.6):
    T = WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5))
    return SymmetricAlphaStable(alpha, SeqSpec.from_weights(1.0, T), p), T


def tempered_pair():
    T = WeightedShiftOperator.backward(WeightRule.constant(2.0))
    return TemperedStable(0.5, SeqSpec.geometric(1.0, 0.5)), T


PAIRS = {"poisson": poisson_pair, "stable": stable_pair, "tempered": tempered_pair}


@pytest.fixture(params=sorted(PAIRS))
def invariant_pair(request):
    return PAIRS[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, repeated in the terminal summary so the
# verdicts are visible without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
