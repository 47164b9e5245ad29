import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from idmix.bounds import (BoundDomainError, ControlData, Kind, ShiftBound, bound_for_pair,
                          control_bound, count_above, envelope_base, levy_bound, max_value,
                          overlap_rate, poisson_rate, poisson_shift_bound, rate_formula,
                          shift_bound, specfun_beta, specfun_gamma, specfun_inc_gamma_lower,
                          specfun_inc_gamma_upper, stable_orbit_sum, stable_shift_rate,
                          stable_sup_bound, temp_bound, temp_prefactor, temp_rate,
                          temp_shift_bound)
from idmix.codiff import codiff_equal, codiff_notequal
from idmix.measures import CompoundPoisson, SeqSpec, SymmetricAlphaStable, TemperedStable
from idmix.seqspace import BasisAtom, DualFunctional, IndexDomain, Phase
from idmix.shifts import RateParams, WeightedShiftOperator, WeightRule, adjoint_power, weight

from conftest import PAIRS, poisson_pair, random_functional, stable_pair, tempered_pair

mp.mp.dps = 40
E0 = DualFunctional({0: 1})


# ---------------------------------------------------------------------------
# special functions


def test_special_function_identities():
    assert_allclose(specfun_beta(0.5, 0.5), math.pi, rtol=1e-14)
    assert_allclose(specfun_gamma(0.5), math.sqrt(math.pi), rtol=1e-14)
    assert_allclose(specfun_beta(0.25, 0.5), 5.2441151085842, rtol=1e-12)


@given(st.floats(0.05, 20))
def test_gamma_matches_mpmath(x):
    assert_allclose(specfun_gamma(x), float(mp.gamma(x)), rtol=1e-12)


@given(st.floats(0.05, 10), st.floats(0.05, 10))
def test_beta_matches_mpmath(a, b):
    assert_allclose(specfun_beta(a, b), float(mp.beta(a, b)), rtol=1e-12)


@pytest.mark.parametrize("s,x", [(0.5, 0.1), (0.5, 3.0), (1.3, 2.0), (0.2, 40.0)])
def test_incomplete_gamma_matches_mpmath(s, x):
    assert_allclose(specfun_inc_gamma_lower(s, x), float(mp.gammainc(s, 0, x)), rtol=1e-12)
    assert_allclose(specfun_inc_gamma_upper(s, x), float(mp.gammainc(s, x, mp.inf)), rtol=1e-12)
    assert_allclose(specfun_inc_gamma_upper(-s / 2, x), float(mp.gammainc(-s / 2, x, mp.inf)), rtol=1e-11)


def test_special_function_domain_errors():
    for bad in (lambda: specfun_gamma(0.0), lambda: specfun_gamma(-2.0), lambda: specfun_beta(0, 1),
                lambda: specfun_inc_gamma_lower(-0.5, 1.0)):
        with pytest.raises(BoundDomainError):
            bad()


# ---------------------------------------------------------------------------
# pointwise bounds


def test_levy_bound_examples():
    m = CompoundPoisson(SeqSpec.explicit([1.0]))
    assert levy_bound(m, E0, E0, 1.0) == 8.0
    assert levy_bound(m, E0, DualFunctional({}), 1.0) == 0.0


def test_control_bound_stable_examples():
    data = ControlData(((BasisAtom(0), 1.0, 1.0),), 1.0, ("stable", 1.5))
    expected = 2 ** 3.4 / 0.1 + 32 / 1.5
    assert_allclose(control_bound(data, E0, E0, 1.6, 1.0), expected, rtol=1e-14)
    empty = DualFunctional({})
    for c in (0.3, 1.0, 7.0):
        assert_allclose(control_bound(data, empty, empty, 1.6, c), 32 / (1.5 * c ** 1.5), rtol=1e-14)
    with pytest.raises(BoundDomainError):
        control_bound(data, E0, E0, 1.4, 1.0)


def test_stable_closed_form_matches_u_quadrature():
    # 16 (2^-p int_{-c}^{c} |u|^p rho(du) + rho(R minus [-c,c])) with rho(du) = |u|^{-1-alpha} du
    alpha, p, c = 1.5, 1.6, 1.0
    # algebraic-weight quadrature handles the u^{p-1-alpha} endpoint singularity
    inner = 2 * quad(lambda u: 1.0, 0, c, weight="alg", wvar=(p - 1 - alpha, 0))[0]
    tail = 2 * quad(lambda u: u ** (-1 - alpha), c, np.inf, epsabs=0, epsrel=1e-13)[0]
    ref = 16 * (2 ** -p * inner + tail)
    data = ControlData(((BasisAtom(0), 1.0, 1.0),), 1.0, ("stable", alpha))
    assert_allclose(control_bound(data, E0, E0, p, c), ref, rtol=1e-10)


def test_tempered_control_bound_tends_to_closed_form(rng):
    m, _ = tempered_pair()
    x, y = random_functional(rng), random_functional(rng)
    lim = control_bound(m, x, y, 1.0, "auto")
    big = control_bound(m, x, y, 1.0, 1e12)
    assert lim <= big and big - lim < 1e-3 * lim
    for kind in (Kind.EQUAL, Kind.NOT_EQUAL):
        assert_allclose(control_bound(m, x, y, 1.0, "auto", kind), temp_bound(m, x, y, kind, p=1.0), rtol=1e-13)


def test_temp_bound_examples():
    m = TemperedStable(0.5, SeqSpec.geometric(1.0, 0.5))
    assert_allclose(temp_prefactor(m, 1.0), 16 * math.sqrt(math.pi), rtol=1e-14)
    assert temp_bound(m, E0, DualFunctional({})) == 0.0
    assert_allclose(temp_shift_bound(m.k, m, 1.0, 1), 32 * math.sqrt(math.pi) * math.sqrt(2), rtol=1e-12)
    assert_allclose(temp_shift_bound(m.k, m, 1.0, 0), 2 * temp_prefactor(m, 1.0) * 2, rtol=1e-12)


def test_poisson_shift_bound_examples():
    lam = SeqSpec.geometric(1.0, 0.5)
    assert_allclose(poisson_shift_bound(lam, 1.0, 0), 16.0, rtol=1e-14)
    assert_allclose(poisson_shift_bound(lam, 1.0, 1), 8 * math.sqrt(2), rtol=1e-14)


def test_poisson_rate_examples():
    B = specfun_beta(0.25, 0.5)
    assert_allclose(poisson_rate(1.0, 1.5, 1.0, 4), 8 * B * 0.5, rtol=1e-14)
    assert_allclose(poisson_rate(1.0, 1.5, 1.0, 1), 8 * B, rtol=1e-14)
    assert_allclose(overlap_rate(1.0, 2.5, 1.0, 9, 0.5), specfun_beta(0.25, 0.5) * 9 ** -0.5, rtol=1e-14)
    with pytest.raises(BoundDomainError):
        poisson_rate(1.0, 1.0, 1.0, 3)
    with pytest.raises(BoundDomainError):
        poisson_rate(1.0, 2.5, 1.0, 3)


def test_max_value_and_count_above():
    s = SeqSpec.power_law(2.0, 1.5, 1.0)  # 2/(n+1)^1.5
    assert max_value(s) == 2.0
    vals = s.values(np.arange(10_000))
    for c in (0.01, 0.3, 1.0, 2.5):
        assert count_above(s, c) == int(np.sum(vals > c))
    g = SeqSpec.geometric(3.0, 0.5)
    assert count_above(g, 0.1) == int(np.sum(g.values(np.arange(100)) > 0.1))


# ---------------------------------------------------------------------------
# stable rates


def _brute_stable_orbit(alpha, p, n, T, L=600):
    """sum_l k_l^alpha prod_{j=l+1}^{l+n} w_j^{p/2} over |l| <= L, k_l = 2^{-|l|}."""
    total = []
    for l in range(-L, L + 1):
        prod = math.prod(weight(T, j) ** (p / 2) for j in range(l + 1, l + n + 1))
        total.append(2.0 ** (-abs(l) * alpha) * prod)
    return math.fsum(total)


def test_stable_envelope_examples():
    rp = RateParams(0.5, 0.5)
    assert_allclose(stable_shift_rate(rp, 1.5, 1.6, 2).envelope, (0.5 ** 0.875) ** 1.5, rtol=1e-14)
    assert stable_shift_rate(rp, 1.5, 1.6, 0).envelope == 1.0
    # eta_+^{p/2} = eta_-^{alpha - p/2}
    with pytest.raises(BoundDomainError):
        stable_shift_rate(RateParams(0.5 ** (0.8 / 0.7), 0.5), 1.5, 1.6, 3)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10, 20, 40])
def test_three_term_chain_dominates_brute_orbit_sum(n):
    m, T = stable_pair()
    brute = _brute_stable_orbit(1.5, 1.6, n, T)
    assert_allclose(stable_orbit_sum(m, 1.6, n), brute, rtol=1e-12)
    assert brute <= stable_shift_rate(RateParams(0.5, 0.5), 1.5, 1.6, n).pre_rate * (1 + 1e-12)


def test_stable_sup_bound_follows_envelope():
    m, T = stable_pair()
    rho = envelope_base(RateParams(0.5, 0.5), 1.5, 1.6)
    ratios = [stable_sup_bound(m, T, 1.6, n) / rho ** (1.5 * n / 2) for n in range(0, 400, 10)]
    # B(n) = O(rho^{alpha n/2}): the ratio increases to a finite limit
    assert np.all(np.isfinite(ratios)) and np.all(np.diff(ratios) >= 0)
    assert ratios[-1] - ratios[-2] < 1e-3 * ratios[-1]


# ---------------------------------------------------------------------------
# domination and rate consistency


def _domination(name, n_range, pairs=100, seed=0):
    m, T = PAIRS[name]()
    rng = np.random.default_rng(seed)
    lo = 0 if m.domain is IndexDomain.NATURALS else -5
    worst = 0.0
    for _ in range(pairs):
        x = random_functional(rng, m.domain, lo, 5, size=int(rng.integers(1, 5)))
        y = random_functional(rng, m.domain, lo, 5, size=int(rng.integers(1, 5)))
        for n in n_range:
            yn = adjoint_power(T, n, y)
            B = bound_for_pair(m, T, x, y, n)
            c = max(abs(codiff_equal(m, x, yn).value), abs(codiff_notequal(m, x, yn).value))
            assert c <= B * (1 + 1e-12), (name, n, c, B)
            if B > 0:
                worst = max(worst, c / B)
    return worst


@pytest.mark.parametrize("name", sorted(PAIRS))
def test_domination_suite(name):
    assert _domination(name, range(0, 51, 5), pairs=40) <= 1


@pytest.mark.parametrize("name", sorted(PAIRS))
def test_pointwise_bounds_dominate(name, rng):
    m, T = PAIRS[name]()
    lo = 0 if m.domain is IndexDomain.NATURALS else -5
    for _ in range(40):
        x, y = (random_functional(rng, m.domain, lo, 6) for _ in range(2))
        for kind, fn in ((Kind.EQUAL, codiff_equal), (Kind.NOT_EQUAL, codiff_notequal)):
            c = abs(fn(m, x, y).value)
            if isinstance(m, CompoundPoisson):
                assert c <= levy_bound(m, x, y, m.p, kind) * (1 + 1e-12)
                assert c <= control_bound(m, x, y, m.p, 1.0, kind) * (1 + 1e-12)
            elif isinstance(m, TemperedStable):
                assert c <= temp_bound(m, x, y, kind) * (1 + 1e-12)
                assert c <= control_bound(m, x, y, m.p, 0.7, kind) * (1 + 1e-12)
            else:
                assert c <= control_bound(m, x, y, m.p, 1.0, kind) * (1 + 1e-12)


def test_poisson_rate_consistency():
    lam = SeqSpec.power_law(1.0, 1.5, 1.0)
    B = specfun_beta(0.25, 0.5)
    prev = math.inf
    for n in range(1, 1001):
        s = lam.overlap(0.5, 0.5, n)
        assert s <= B * n ** -0.5
        assert poisson_shift_bound(lam, 1.0, n) <= poisson_rate(1.0, 1.5, 1.0, n)
        assert s <= prev
        prev = s


def test_tempered_rate_consistency():
    k = SeqSpec.power_law(1.0, 1.5, 1.0)
    m = TemperedStable(0.5, k)
    for n in (1, 2, 5, 10, 100, 1000):
        assert temp_shift_bound(k, m, 1.0, n) <= temp_rate(1.0, 1.5, 1.0, n, None, m)


@pytest.mark.parametrize("name", sorted(PAIRS))
def test_shift_bounds_nonnegative_and_nonincreasing(name):
    m, T = PAIRS[name]()
    vals = [shift_bound(m, T, n).value for n in range(0, 1001, 25)]
    assert min(vals) >= 0
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_rate_formula_dispatch():
    m, T = poisson_pair()
    assert_allclose(rate_formula(m, T, 4), poisson_rate(1.0, 1.5, 1.0, 4))
    ms, Ts = stable_pair()
    assert_allclose(rate_formula(ms, Ts, 2), (0.5 ** 0.875) ** 1.5)
    mt, Tt = tempered_pair()
    assert rate_formula(mt, Tt, 3) is None
    assert shift_bound(m, T, 3) == ShiftBound(poisson_shift_bound(m.lam, 1.0, 3), 0.5)
