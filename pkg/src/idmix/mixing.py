"""Admissible scalings and numeric mixing verdicts.

A shift is mixing when ``C^=(a x, a T*^n x)`` and ``C^!=(a x, a T*^n x)`` tend
to zero for every functional ``x`` and every scaling ``a`` outside the
exceptional set ``Z_1`` of the pushforward Levy measure of ``x``. Finite
computation can only exhibit evidence of decay, or certify failure when the
orbit of ``x`` is exactly stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .codiff import codiff_equal, codiff_notequal, fit_decay
from .measures import CompoundPoisson, MeasureSpec
from .seqspace import DualFunctional
from .shifts import WeightedShiftOperator, adjoint_power

# relative tolerance for deciding that a number is an integer multiple
_LATTICE_TOL = 1e-9


class UnsupportedFamilyError(TypeError):
    """The pushforward Levy measure of this family is not atomic."""


@dataclass(frozen=True)
class AtomicLevyMeasure1D:
    """Finitely many atoms ``(location, mass)`` on the real line, none at 0."""

    atoms: tuple = ()

    def __post_init__(self):
        merged: dict[float, float] = {}
        for loc, mass in self.atoms:
            loc, mass = float(loc), float(mass)
            if loc == 0 or not math.isfinite(loc):
                raise ValueError("atom locations must be finite and nonzero")
            if not mass > 0:
                raise ValueError("atom masses must be positive")
            merged[loc] = merged.get(loc, 0.0) + mass
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    def locations(self) -> list[float]:
        return [loc for loc, _ in self.atoms]

    def to_json(self) -> list:
        return [[loc, mass] for loc, mass in self.atoms]


def pushforward_levy(m: MeasureSpec, f: DualFunctional) -> AtomicLevyMeasure1D:
    """Law of ``Re <z, f>`` under the Levy measure, for compound Poisson.

    Atoms ``lambda_n e_n`` are sent to ``lambda_n Re f_n``; zero locations are
    dropped because a Levy measure has no mass at the origin.

    Examples
    --------
    >>> from idmix.measures import SeqSpec
    >>> m = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
    >>> pushforward_levy(m, DualFunctional({0: 1})).atoms
    ((6.283185307179586, 1.0),)
    """
    if not isinstance(m, CompoundPoisson):
        raise UnsupportedFamilyError(
            f"pushforward of a {type(m).__name__} Levy measure is absolutely continuous")
    idx, val = f.arrays()
    if not idx.size:
        return AtomicLevyMeasure1D()
    loc = m.lam.values(idx) * val.real
    return AtomicLevyMeasure1D(tuple((float(s), 1.0) for s in loc if s != 0))


def _near_integer(v: float) -> bool:
    return abs(v - round(v)) <= _LATTICE_TOL * max(1.0, abs(v))


def _resonant(nu: AtomicLevyMeasure1D) -> list[float]:
    return [s for s in nu.locations() if _near_integer(s / (2 * math.pi))]


def in_Z1(nu: AtomicLevyMeasure1D, a: float) -> bool:
    """Membership of ``a`` in the exceptional scaling set.

    With no atom in ``2 pi Z`` the set is everything except 1. Otherwise it is
    ``{2 pi k / s : s an atom location, k integer}``.

    Examples
    --------
    >>> nu = AtomicLevyMeasure1D(((2 * math.pi, 1.0),))
    >>> in_Z1(nu, 1.0), in_Z1(nu, 0.5)
    (True, False)
    """
    if not _resonant(nu):
        return a != 1
    return any(_near_integer(a * s / (2 * math.pi)) for s in nu.locations())


def _candidate_scales():
    seen = set()
    for q in range(2, 257):
        for p in range(1, q):
            fr = Fraction(p, q)
            if fr not in seen:
                seen.add(fr)
                yield float(fr)
    for d in (2, 3, 5, 7, 11):
        yield 1 / math.sqrt(d)


def pick_admissible_scale(nu: AtomicLevyMeasure1D) -> float:
    """A scaling ``a`` with ``|a|`` in (0, 1] outside the exceptional set.

    Scans ``1/2, 1/3, 2/3, 1/4, ...`` and falls back to quadratic irrationals.
    """
    if not _resonant(nu):
        return 1.0
    for a in _candidate_scales():
        if not in_Z1(nu, a):
            return a
    raise RuntimeError("no admissible scale found")  # pragma: no cover - countability


class Verdict(str, Enum):
    MIXING_EVIDENCE = "MixingEvidence"
    NOT_MIXING = "NotMixing"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Witness:
    probe: DualFunctional
    scale: float
    value: complex
    kind: str  # "equal" | "not_equal"

    def to_json(self) -> dict:
        return {"probe": self.probe.to_json(), "scale": self.scale, "kind": self.kind,
                "value": [self.value.real, self.value.imag]}


@dataclass(frozen=True)
class MixingVerdict:
    verdict: Verdict
    witness: Witness | None = None
    probes: tuple = field(default_factory=tuple)  # per-probe summaries

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value,
                "witness": None if self.witness is None else self.witness.to_json(),
                "probes": list(self.probes)}


def _orbit_stationary(T: WeightedShiftOperator, x: DualFunctional) -> bool:
    return adjoint_power(T, 1, x) == x


def decay_evidence(values: list[complex], tol: float, min_r2: float = 0.98) -> tuple[bool, dict]:
    """Whether ``values[n]`` (``n = 0, 1, ...``) shows decay to zero.

    The sequence counts as decaying when it vanishes exactly from some index
    on, or when its last quarter lies below ``tol`` and a geometric or
    power-law fit over ``n >= 1`` has ``r^2 >= min_r2`` and a decaying rate.
    """
    mags = np.abs(np.asarray(values, dtype=complex))
    nz = np.nonzero(mags)[0]
    if nz.size == 0 or nz[-1] < len(mags) - 1:
        last = int(nz[-1]) if nz.size else -1
        return True, {"mode": "eventually_zero", "last_nonzero": last}
    tail = mags[-max(1, len(mags) // 4):]
    small = bool(np.max(tail) < tol)
    pts = [(n, mags[n]) for n in range(1, len(mags))]
    try:
        fit = fit_decay(pts)
    except ValueError:
        return False, {"mode": "too_few_points", "tail_max": float(np.max(tail))}
    decaying = fit.rate < 1 if fit.model == "geometric" else fit.rate < 0
    ok = small and decaying and fit.r2 >= min_r2
    return ok, {"mode": "fit", "tail_max": float(np.max(tail)), "fit": fit.to_json()}


def mixing_verdict(m: MeasureSpec, T: WeightedShiftOperator, probes, n_max: int = 200,
                   tol: float = 1e-3) -> MixingVerdict:
    """Evidence for or against mixing of ``T`` with respect to ``m``.

    For each probe ``x`` the scale ``a`` is admissible for the pushforward
    Levy measure (``a = 1`` for families whose pushforward is non-atomic). The
    verdict is ``NotMixing`` when a probe has a stationary orbit with a
    nonzero codifference, ``MixingEvidence`` when every probe shows decay of
    both codifferences, and ``Inconclusive`` otherwise. Weak mixing is never
    decided.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    summaries = []
    all_decay = True
    for x in probes:
        try:
            a = pick_admissible_scale(pushforward_levy(m, x))
        except UnsupportedFamilyError:
            a = 1.0
        ax = x.scale(a)
        if _orbit_stationary(T, x):
            c_eq = codiff_equal(m, ax, ax).value
            c_ne = codiff_notequal(m, ax, ax).value
            for val, kind in ((c_eq, "equal"), (c_ne, "not_equal")):
                if val != 0:
                    w = Witness(x, a, complex(val), kind)
                    summaries.append({"scale": a, "stationary": True, "value": [val.real, val.imag]})
                    return MixingVerdict(Verdict.NOT_MIXING, w, tuple(summaries))
            summaries.append({"scale": a, "stationary": True, "value": [0.0, 0.0]})
            continue
        eq, ne = [], []
        for n in range(n_max + 1):
            y = adjoint_power(T, n, ax)
            eq.append(codiff_equal(m, ax, y).value)
            ne.append(codiff_notequal(m, ax, y).value)
        ok_eq, info_eq = decay_evidence(eq, tol)
        ok_ne, info_ne = decay_evidence(ne, tol)
        summaries.append({"scale": a, "stationary": False, "equal": info_eq, "not_equal": info_ne})
        all_decay = all_decay and ok_eq and ok_ne
    verdict = Verdict.MIXING_EVIDENCE if all_decay and summaries else Verdict.INCONCLUSIVE
    return MixingVerdict(verdict, None, tuple(summaries))
