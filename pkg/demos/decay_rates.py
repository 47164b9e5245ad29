"""Codifference decay of the three invariant (measure, shift) pairs next to
their analytic bounds.

Compound Poisson with power-law intensities decays polynomially, the stable
forward shift on Z geometrically, and the tempered stable shift with geometric
scales geometrically as well.

    python demos/decay_rates.py
"""

import numpy as np

from idmix import DualFunctional, IndexDomain, SeqSpec, WeightRule, WeightedShiftOperator
from idmix.bounds import bound_for_pair, rate_formula
from idmix.codiff import codiff_equal, fit_decay
from idmix.measures import CompoundPoisson, SymmetricAlphaStable, TemperedStable
from idmix.shifts import adjoint_power


def pairs():
    P = WeightedShiftOperator.backward(WeightRule.power_law_p6(1.5, 1.0))
    yield "compound Poisson, lambda_n = (n+1)^-1.5", CompoundPoisson(SeqSpec.power_law(1.0, 1.5, 1.0)), P, \
        DualFunctional({j: 1.0 for j in range(40)})
    F = WeightedShiftOperator.forward(WeightRule.two_sided(2.0, 0.5))
    yield "symmetric 1.5-stable, forward shift on Z", SymmetricAlphaStable(1.5, SeqSpec.from_weights(1.0, F), 1.6), F, \
        DualFunctional({j: 0.9 ** abs(j) for j in range(-80, 81)}, IndexDomain.INTEGERS)
    B = WeightedShiftOperator.backward(WeightRule.constant(2.0))
    yield "tempered 0.5-stable, k_n = 2^-n", TemperedStable(0.5, SeqSpec.geometric(1.0, 0.5)), B, \
        DualFunctional({j: 1.0 for j in range(40)})


for title, m, T, x in pairs():
    print(f"\n{title}")
    print(f"{'n':>4} {'|C=(x, T*^n x)|':>18} {'bound':>12} {'rate formula':>13}")
    pts = []
    for n in (1, 2, 4, 8, 16, 32):
        c = abs(codiff_equal(m, x, adjoint_power(T, n, x)).value)
        pts.append((n, c))
        r = rate_formula(m, T, n)
        print(f"{n:>4} {c:>18.6e} {bound_for_pair(m, T, x, x, n):>12.4e} "
              f"{'' if r is None else f'{r:.4e}':>13}")
    fit = fit_decay([(n, abs(codiff_equal(m, x, adjoint_power(T, n, x)).value)) for n in range(1, 31)])
    print(f"best fit: {fit.model}, rate {fit.rate:.4f}, r2 {fit.r2:.4f}")
