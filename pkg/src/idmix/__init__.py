"""Mixing rates of weighted shifts under infinitely divisible measures.

Codifferences, analytic decay bounds, exact correlations of exponential
observables, Monte Carlo checks and a command-line report generator for
compound Poisson, symmetric alpha-stable and tempered stable measures on
sequence spaces.
"""

from .seqspace import BasisAtom, DualFunctional, IndexDomain, Phase, dual_norm, pairing
from .shifts import RateParams, WeightedShiftOperator, WeightRule, adjoint_power, rate_params
from .measures import (CompoundPoisson, Drift, SeqSpec, SymmetricAlphaStable, TemperedStable,
                       log_cf, validate)
from .codiff import (ExpSeriesObservable, PhiPsi, codiff_equal, codiff_general, codiff_notequal,
                     exact_In, fit_decay)
from .mixing import mixing_verdict, pick_admissible_scale, pushforward_levy
from .mc import RngSpec, estimate_cf, estimate_In

__version__ = "0.1.0"

__all__ = [
    "BasisAtom", "DualFunctional", "IndexDomain", "Phase", "dual_norm", "pairing",
    "RateParams", "WeightedShiftOperator", "WeightRule", "adjoint_power", "rate_params",
    "CompoundPoisson", "Drift", "SeqSpec", "SymmetricAlphaStable", "TemperedStable", "log_cf",
    "validate", "ExpSeriesObservable", "PhiPsi", "codiff_equal", "codiff_general",
    "codiff_notequal", "exact_In", "fit_decay", "mixing_verdict", "pick_admissible_scale",
    "pushforward_levy", "RngSpec", "estimate_cf", "estimate_In",
]
