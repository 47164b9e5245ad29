import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from idmix.seqspace import BasisAtom, DualFunctional, IndexDomain, pairing
from idmix.shifts import (Direction, RateConditionError, WeightedShiftOperator, WeightRule,
                          adjoint_power, apply_power, apply_to_atom, operator_norm_bound,
                          rate_params, weight, weight_product)

from conftest import functionals

Z = IndexDomain.INTEGERS


def test_weight_examples():
    assert_allclose(weight(WeightedShiftOperator.backward(WeightRule.power_law_p4(1.5, 1)), 1), 2 ** 1.5)
    assert_allclose(weight(WeightedShiftOperator.backward(WeightRule.power_law_p6(1.5, 1)), 0), 2 ** 1.5)
    assert weight(WeightedShiftOperator.backward(WeightRule.constant(2.0)), 17) == 2.0
    assert weight(WeightedShiftOperator.backward(WeightRule.power_law_p4(1.5, 1)), 0) == 1.0


def test_adjoint_power_examples():
    T = WeightedShiftOperator.backward(WeightRule.constant(2.0))
    assert adjoint_power(T, 1, DualFunctional({0: 1})) == DualFunctional({1: 2})
    assert adjoint_power(T, 3, DualFunctional({0: 1})) == DualFunctional({3: 8})
    F = WeightedShiftOperator.forward(WeightRule.constant(0.5))
    assert adjoint_power(F, 1, DualFunctional({0: 1}, Z)) == DualFunctional({-1: 0.5}, Z)


def test_operator_norm_examples():
    assert operator_norm_bound(WeightedShiftOperator.backward(WeightRule.constant(2.0))) == 2.0
    for rule in (WeightRule.power_law_p4(1.5, 1), WeightRule.power_law_p6(1.5, 1)):
        T = WeightedShiftOperator.backward(rule)
        assert_allclose(operator_norm_bound(T), 2 ** 1.5)
        w = rule.values(np.arange(0, 5000))
        assert w.max() <= operator_norm_bound(T) * (1 + 1e-15)


def test_rate_params_examples():
    T = WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5))
    rp = rate_params(T)
    assert (rp.eta_minus, rp.eta_plus, rp.q_minus, rp.q_plus) == (0.5, 0.5, 0, 1)
    with pytest.raises(RateConditionError):
        rate_params(WeightedShiftOperator.forward(WeightRule.constant(0.5)))


def test_rate_params_with_exceptions_use_the_tail_rule():
    rule = WeightRule.two_sided(3.0, 0.25, exceptions={-3: 0.1, 0: 5.0, 2: 7.0, 3: 0.9})
    rp = rate_params(WeightedShiftOperator.forward(rule))
    # brute-force sup beyond the exceptions over a long prefix
    lo, hi = np.arange(-2000, -rp.q_minus + 1), np.arange(rp.q_plus, 2000)
    assert_allclose(rp.eta_minus, np.max(1 / rule.values(lo)))
    assert_allclose(rp.eta_plus, np.max(rule.values(hi)))
    assert rp.q_minus == 4 and rp.q_plus == 4


def _operators():
    return st.sampled_from([
        WeightedShiftOperator.backward(WeightRule.power_law_p4(1.5, 1.0)),
        WeightedShiftOperator.backward(WeightRule.power_law_p6(1.7, 1.3)),
        WeightedShiftOperator.backward(WeightRule.head_const_tail([0.5, 3.0], 1.5)),
        WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5, exceptions={1: 3.0})),
    ])


@given(_operators(), st.integers(0, 20), st.integers(0, 20), st.data())
def test_adjoint_powers_compose(T, m, n, data):
    f = data.draw(functionals(T.domain))
    a = adjoint_power(T, m, adjoint_power(T, n, f))
    b = adjoint_power(T, m + n, f)
    assert a.support == b.support
    for k in a.support:
        assert abs(a[k] - b[k]) <= 1e-12 * abs(b[k])


@given(_operators(), st.data())
def test_duality_with_atoms(T, data):
    f = data.draw(functionals(T.domain))
    lo = 0 if T.domain is IndexDomain.NATURALS else -8
    for k in range(lo, 10):
        img = apply_to_atom(T, k)
        lhs = pairing(BasisAtom(k), adjoint_power(T, 1, f))
        rhs = 0 if img is None else img[1] * pairing(BasisAtom(img[0]), f)
        assert lhs == rhs


@given(_operators(), st.integers(0, 30), st.data())
def test_support_moves_by_n(T, n, data):
    f = data.draw(functionals(T.domain))
    shift = n if T.direction is Direction.BACKWARD_N else -n
    assert adjoint_power(T, n, f).support == tuple(k + shift for k in f.support)


def test_long_products_agree_with_direct_products():
    T = WeightedShiftOperator.backward(WeightRule.power_law_p4(1.5, 1.0))
    lo = np.array([3, 10])
    direct = np.array([np.prod(T.weights.values(np.arange(a, a + 200))) for a in lo])
    assert_allclose(weight_product(T, lo, lo + 199), direct, rtol=1e-11)


def test_long_adjoint_powers_use_log_space():
    T = WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5))
    v = adjoint_power(T, 1000, DualFunctional({0: 1.0}, Z))
    assert v.support == (-1000,)
    assert_allclose(v[-1000].real, 2.0 ** 1000, rtol=1e-12)
    with pytest.raises(OverflowError):
        adjoint_power(T, 3000, DualFunctional({0: 1.0}, Z))


def test_apply_power_matches_pairing_duality():
    rng = np.random.default_rng(3)
    for T in (WeightedShiftOperator.backward(WeightRule.power_law_p6(1.5, 1.0)),
              WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5))):
        first = 0 if T.domain is IndexDomain.NATURALS else -10
        X = rng.normal(size=(3, 30)) + 1j * rng.normal(size=(3, 30))
        y = DualFunctional({first + 12: 1.0, first + 14: -0.5j}, T.domain)
        for n in (0, 1, 4):
            Y, f2 = apply_power(T, n, X, first)
            v = adjoint_power(T, n, y)
            lhs = sum(Y[:, k - f2] * c for k, c in y.coeffs.items())
            rhs = sum(X[:, k - first] * c for k, c in v.coeffs.items())
            assert_allclose(lhs, rhs, rtol=1e-13)


def test_json_round_trip():
    for T in (WeightedShiftOperator.backward(WeightRule.power_law_p4(1.5, 1.0)),
              WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5, exceptions={1: 3.0})),
              WeightedShiftOperator.identity(Z)):
        assert WeightedShiftOperator.from_json(T.to_json()) == T


def test_invalid_direction_rule_combinations():
    with pytest.raises(ValueError):
        WeightedShiftOperator.backward(WeightRule.two_sided(2.0, 0.5))
    with pytest.raises(ValueError):
        WeightedShiftOperator.forward(WeightRule.power_law_p4(1.5, 1.0))
