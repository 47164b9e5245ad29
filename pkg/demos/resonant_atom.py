"""A compound Poisson measure with one atom at 2*pi, under the identity map.

The identity preserves every measure and is never mixing. At the scaling a = 1
every codifference vanishes (e^{2 pi i} = 1), so a naive decay check would be
fooled; the admissible scaling a = 1/2 exposes the constant value 4.

    python demos/resonant_atom.py
"""

import math

from idmix import CompoundPoisson, DualFunctional, SeqSpec, WeightedShiftOperator, adjoint_power
from idmix.codiff import codiff_equal
from idmix.mixing import mixing_verdict, pick_admissible_scale, pushforward_levy

m = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
T = WeightedShiftOperator.identity()
x = DualFunctional({0: 1.0})

nu = pushforward_levy(m, x)
a = pick_admissible_scale(nu)
print(f"pushforward atoms {nu.atoms}; admissible scale a = {a}")
for scale in (1.0, a):
    ax = x.scale(scale)
    vals = {codiff_equal(m, ax, adjoint_power(T, n, ax)).value for n in range(0, 101, 25)}
    print(f"a = {scale}: C=(ax, a T*^n x) over n = 0..100 takes the values {sorted(v.real for v in vals)}")
print("verdict:", mixing_verdict(m, T, [x]).to_json()["verdict"])
