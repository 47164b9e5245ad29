"""Codifferences and exact correlations of exponential-series observables.

For sign functions ``phi, psi`` in ``{Re, -Re, Im, -Im}`` the codifference is

    C^{phi,psi}(x, y) = log E e^{i phi<X,x> + i psi<X,y>}
                        - log E e^{i phi<X,x>} - log E e^{i psi<X,y>}.

Writing ``phi<z,x> = Re<z, w_phi(x)>`` with ``w_Re(x) = x``, ``w_Im(x) = -i x``
(bilinear pairing), every codifference is a combination
``K(u, v) = L(u + v) - L(u) - L(v)`` of the log characteristic functional
``L``. ``C^=(x, y) = K(x, -y)`` and ``C^!=(x, y) = K(x, i y)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .measures import (CompoundPoisson, Drift, MeasureSpec, SymmetricAlphaStable,
                       TemperedStable, _tempered_psi, log_cf)
from .seqspace import (BasisAtom, DomainError, DualFunctional, Phase, combine,
                       pairing)
from .shifts import WeightedShiftOperator, adjoint_power, operator_norm_bound


class SignFn(str, Enum):
    RE = "re"
    NEG_RE = "-re"
    IM = "im"
    NEG_IM = "-im"

    def apply(self, c: complex) -> float:
        c = complex(c)
        return {"re": c.real, "-re": -c.real, "im": c.imag, "-im": -c.imag}[self.value]

    def functional(self, f: DualFunctional) -> DualFunctional:
        """``w`` with ``sign(<z, f>) = Re <z, w>`` for every ``z``."""
        factor = {"re": 1, "-re": -1, "im": -1j, "-im": 1j}[self.value]
        return f.scale(factor)


@dataclass(frozen=True)
class PhiPsi:
    phi: SignFn
    psi: SignFn

    def __post_init__(self):
        object.__setattr__(self, "phi", SignFn(self.phi))
        object.__setattr__(self, "psi", SignFn(self.psi))
        if self.phi == self.psi:
            raise ValueError("phi and psi must differ")

    def __str__(self):
        return f"({self.phi.value},{self.psi.value})"


class CodiffKind(str, Enum):
    EQUAL = "equal"
    NOT_EQUAL = "not_equal"
    GENERAL = "general"


@dataclass(frozen=True)
class CodifferenceValue:
    value: complex
    kind: CodiffKind
    pair: PhiPsi | None = None

    def __complex__(self):
        return complex(self.value)

    def __abs__(self):
        return abs(self.value)


# The twelve function-codifference rows in print order: (phi, psi) mapped to
# (C^= or C^!=, argument transform applied to both x and y). Rows 9-12 read
# their arguments in the order (y, x); see ``TABLE_SWAPPED``.
_T = {"id": 1, "neg": -1, "-i": -1j, "i": 1j}
TABLE: list[tuple[PhiPsi, CodiffKind, str]] = [
    (PhiPsi("re", "-re"), CodiffKind.EQUAL, "id"),
    (PhiPsi("-re", "re"), CodiffKind.EQUAL, "neg"),
    (PhiPsi("im", "-im"), CodiffKind.EQUAL, "-i"),
    (PhiPsi("-im", "im"), CodiffKind.EQUAL, "i"),
    (PhiPsi("re", "-im"), CodiffKind.NOT_EQUAL, "id"),
    (PhiPsi("-re", "im"), CodiffKind.NOT_EQUAL, "neg"),
    (PhiPsi("im", "re"), CodiffKind.NOT_EQUAL, "-i"),
    (PhiPsi("-im", "-re"), CodiffKind.NOT_EQUAL, "i"),
    (PhiPsi("-im", "re"), CodiffKind.NOT_EQUAL, "id"),
    (PhiPsi("im", "-re"), CodiffKind.NOT_EQUAL, "neg"),
    (PhiPsi("re", "im"), CodiffKind.NOT_EQUAL, "-i"),
    (PhiPsi("-re", "-im"), CodiffKind.NOT_EQUAL, "i"),
]
TABLE_SWAPPED = frozenset(row[0] for row in TABLE[8:])
_TABLE_INDEX = {row[0]: row for row in TABLE}


def _check(m: MeasureSpec, *fs: DualFunctional):
    for f in fs:
        if f.domain is not m.domain:
            raise DomainError(f"functional on {f.domain.value} used with a measure on {m.domain.value}")


def combination(m: MeasureSpec, u: DualFunctional, v: DualFunctional) -> complex:
    """``L(u+v) - L(u) - L(v)`` with drift-free ``L``.

    ``L`` is a sum over coordinates, so only the common support of ``u`` and
    ``v`` contributes; disjoint supports give exactly zero.
    """
    _check(m, u, v)
    common = sorted(set(u.coeffs) & set(v.coeffs))
    if not common:
        return 0j
    uu = DualFunctional({k: u[k] for k in common}, u.domain)
    vv = DualFunctional({k: v[k] for k in common}, v.domain)
    s = combine(1, uu, 1, vv)
    d = Drift.DRIFT_FREE
    return log_cf(m, s, d) - log_cf(m, uu, d) - log_cf(m, vv, d)


def codiff_equal(m: MeasureSpec, x: DualFunctional, y: DualFunctional) -> CodifferenceValue:
    """``C^=(x, y) = L(x - y) - L(x) - L(-y)``.

    Examples
    --------
    >>> from idmix.measures import CompoundPoisson, SeqSpec
    >>> m = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
    >>> x = DualFunctional({0: 0.5})
    >>> round(codiff_equal(m, x, x).value.real, 12)
    4.0
    """
    return CodifferenceValue(combination(m, x, y.scale(-1)), CodiffKind.EQUAL)


def codiff_notequal(m: MeasureSpec, x: DualFunctional, y: DualFunctional) -> CodifferenceValue:
    """``C^!=(x, y)``, using ``-Im<z, y> = Re<z, i y>``."""
    return CodifferenceValue(combination(m, x, y.scale(1j)), CodiffKind.NOT_EQUAL)


def codiff_general(m: MeasureSpec, pair: PhiPsi, x: DualFunctional, y: DualFunctional,
                   *, method: str = "table") -> CodifferenceValue:
    """``C^{phi,psi}(x, y)``.

    ``method="table"`` dispatches through the function-codifference table;
    ``method="direct"`` applies ``phi`` and ``psi`` to every atom pairing.
    For the last four table rows the table entry holds with ``x`` and ``y``
    exchanged, which is what the dispatch does.
    """
    pair = PhiPsi(pair.phi, pair.psi) if not isinstance(pair, PhiPsi) else pair
    if method == "direct":
        return CodifferenceValue(codiff_direct(m, pair, x, y), CodiffKind.GENERAL, pair)
    if method != "table":
        raise ValueError(f"unknown method {method!r}")
    try:
        _, kind, tr = _TABLE_INDEX[pair]
    except KeyError:
        raise ValueError(f"pair {pair} is not in the codifference table") from None
    a, b = (y, x) if pair in TABLE_SWAPPED else (x, y)
    a, b = a.scale(_T[tr]), b.scale(_T[tr])
    fn = codiff_equal if kind is CodiffKind.EQUAL else codiff_notequal
    return CodifferenceValue(fn(m, a, b).value, CodiffKind.GENERAL, pair)


def table_entry(pair: PhiPsi, x: DualFunctional, y: DualFunctional, m: MeasureSpec) -> complex:
    """The table entry evaluated with the arguments exactly as printed."""
    _, kind, tr = _TABLE_INDEX[pair]
    a, b = x.scale(_T[tr]), y.scale(_T[tr])
    fn = codiff_equal if kind is CodiffKind.EQUAL else codiff_notequal
    return fn(m, a, b).value


# ---------------------------------------------------------------------------
# direct atom-by-atom evaluation


def _atoms(m: MeasureSpec, index: int):
    """Atoms ``(BasisAtom, mass, exponent)`` carried by coordinate ``index``.

    ``exponent(t)`` is the drift-free one-dimensional log-CF of the atom's
    Levy law evaluated at ``t = Re <z, f>``.
    """
    if isinstance(m, CompoundPoisson):
        lam = float(m.lam.values(np.array([index]))[0])
        if lam == 0:
            return []
        return [(BasisAtom(index, Phase.REAL, lam), 1.0, lambda t: np.expm1(1j * t) - 1j * t)]
    if isinstance(m, SymmetricAlphaStable):
        k = float(m.k.values(np.array([index]))[0])
        w = 0.5 * k ** m.alpha
        ex = lambda t: -abs(t) ** m.alpha + 0j
        return [(BasisAtom(index, Phase.REAL), w, ex), (BasisAtom(index, Phase.IMAG), w, ex)]
    k = float(m.k.values(np.array([index]))[0])
    ex = lambda t: complex(_tempered_psi(m, np.array(k * t), Drift.DRIFT_FREE))
    return [(BasisAtom(index, Phase.REAL), 1.0, ex), (BasisAtom(index, Phase.IMAG), 1.0, ex)]


def codiff_direct(m: MeasureSpec, pair: PhiPsi, x: DualFunctional, y: DualFunctional) -> complex:
    """Definition-level evaluation: ``sum_atoms mass * (k(a+b) - k(a) - k(b))``
    with ``a = phi(<z, x>)`` and ``b = psi(<z, y>)``."""
    _check(m, x, y)
    terms = []
    for idx in sorted(set(x.coeffs) & set(y.coeffs)):
        for atom, mass, ex in _atoms(m, idx):
            a = pair.phi.apply(pairing(atom, x))
            b = pair.psi.apply(pairing(atom, y))
            terms.append(mass * (ex(a + b) - ex(a) - ex(b)))
    if m.gaussian_diag is not None:
        u, v = pair.phi.functional(x), pair.psi.functional(y)
        for idx in sorted(set(u.coeffs) & set(v.coeffs)):
            r = float(m.gaussian_diag.values(np.array([idx]))[0])
            terms.append(-0.5 * r * (u[idx] * np.conj(v[idx])).real + 0j)
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def codiff_notequal_levy(m: CompoundPoisson, x: DualFunctional, y: DualFunctional) -> complex:
    """``C^!=`` for compound Poisson from the Levy-measure product form
    ``sum_n (e^{i Re<z,x>} - 1)(e^{-i Im<z,y>} - 1)`` over atoms ``z = lambda_n e_n``."""
    if not isinstance(m, CompoundPoisson):
        raise TypeError("the product form is specific to compound Poisson")
    _check(m, x, y)
    terms = []
    for idx in sorted(set(x.coeffs) & set(y.coeffs)):
        z = BasisAtom(idx, Phase.REAL, float(m.lam.values(np.array([idx]))[0]))
        terms.append(np.expm1(1j * pairing(z, x).real) * np.expm1(-1j * pairing(z, y).imag))
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


# ---------------------------------------------------------------------------
# exponential-series observables


@dataclass(frozen=True)
class ObsTerm:
    coeff: complex
    sign: SignFn
    base: DualFunctional
    power: int


@dataclass(frozen=True)
class ExpSeriesObservable:
    """``f(z) = sum_j a_j exp(i phi_j(<z, T*^{p_j} x_j>))`` with finitely many terms.

    ``tail_bound`` bounds ``sum |a_j| ||T||^{j p/2}`` over terms dropped when a
    geometric series was truncated (zero for genuinely finite observables).
    """

    terms: tuple = ()
    tail_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.power < 0:
                raise ValueError("powers must be >= 0")
            if not np.isfinite(complex(t.coeff)):
                raise ValueError("coefficients must be finite")

    @classmethod
    def single(cls, base: DualFunctional, sign=SignFn.RE, coeff: complex = 1.0, power: int = 0):
        return cls((ObsTerm(complex(coeff), SignFn(sign), base, power),))

    @classmethod
    def geometric(cls, base: DualFunctional, sign, T: WeightedShiftOperator, p: float,
                  first: complex = 1.0, ratio: float = 0.5, tol: float = 1e-10):
        """``sum_j first * ratio^j exp(i sign(<z, T*^j base>))``, truncated once
        ``sum_{j>=J} |first| |ratio|^j ||T||^{jp/2} < tol``."""
        q = abs(ratio) * operator_norm_bound(T) ** (p / 2)
        if not q < 1:
            raise ValueError(f"sum |a_j| ||T||^(jp/2) diverges (ratio {q:.4g} >= 1)")
        a0 = abs(first)
        J = 1 if a0 == 0 else max(1, math.ceil(math.log(tol * (1 - q) / a0) / math.log(q)))
        terms = tuple(ObsTerm(complex(first) * ratio ** j, SignFn(sign), base, j) for j in range(J))
        return cls(terms, a0 * q ** J / (1 - q))

    def norm_sum(self, T: WeightedShiftOperator, p: float) -> float:
        nt = operator_norm_bound(T) ** (p / 2)
        return math.fsum(abs(t.coeff) * nt ** t.power for t in self.terms) + self.tail_bound

    def evaluate_samples(self, T: WeightedShiftOperator, pair_fn) -> np.ndarray:
        """Sum the terms given ``pair_fn(functional) -> array of <X, functional>``."""
        out = 0j
        for t in self.terms:
            vals = pair_fn(adjoint_power(T, t.power, t.base))
            out = out + t.coeff * np.exp(1j * _sign_array(t.sign, vals))
        return out


def _sign_array(sign: SignFn, vals):
    vals = np.asarray(vals)
    return {"re": vals.real, "-re": -vals.real, "im": vals.imag, "-im": -vals.imag}[sign.value]


def truncation_bound(fobs: ExpSeriesObservable, gobs: ExpSeriesObservable,
                     T: WeightedShiftOperator, p: float) -> float:
    """Bound on the part of ``I_n`` lost by truncating the two series."""
    A, B = fobs.norm_sum(T, p), gobs.norm_sum(T, p)
    return 2 * (fobs.tail_bound * B + A * gobs.tail_bound)


def exact_In(m: MeasureSpec, T: WeightedShiftOperator, fobs: ExpSeriesObservable,
             gobs: ExpSeriesObservable, n: int, *, workers: int = 1) -> complex:
    """``I_n(f, g) = E f(X) g(T^n X) - E f(X) E g(X)``, term by term.

    Each pair of terms contributes
    ``a_j b_l E e^{i phi} E e^{i psi} (exp(C^{phi,psi}(T*^j x, T*^{n+l} y)) - 1)``
    with the single-exponential moments taken with full drift. Contributions
    are summed with ``math.fsum``, so the result does not depend on how the
    pairs are split across workers.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    orbit: dict = {}

    def prepared(base, power, sign):
        key = (base, power, sign)
        if key not in orbit:
            w = sign.functional(adjoint_power(T, power, base))
            orbit[key] = (w, np.exp(log_cf(m, w, Drift.FULL)))
        return orbit[key]

    left = [(t.coeff,) + prepared(t.base, t.power, t.sign) for t in fobs.terms]
    right = [(t.coeff,) + prepared(t.base, t.power + n, t.sign) for t in gobs.terms]

    def block(rows):
        out = []
        for i in rows:
            a, u, mu = left[i]
            for b, v, mv in right:
                if a == 0 or b == 0:
                    continue
                c = combination(m, u, v)
                if c == 0:
                    continue
                out.append(a * b * mu * mv * np.expm1(c))
        return out

    idx = list(range(len(left)))
    if workers > 1 and len(idx) > 1:
        chunks = [idx[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(workers) as ex:
            parts = [t for part in ex.map(block, chunks) for t in part]
    else:
        parts = block(idx)
    return complex(math.fsum(t.real for t in parts), math.fsum(t.imag for t in parts))


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class ModelFit:
    model: str  # "geometric" | "power_law"
    rate: float  # r for geometric, exponent for power law
    r2: float
    intercept: float


@dataclass(frozen=True)
class FitResult:
    model: str
    rate: float
    r2: float
    geometric: ModelFit
    power_law: ModelFit | None
    points: int

    def to_json(self) -> dict:
        out = {"model": self.model, "rate": self.rate, "r2": self.r2, "points": self.points,
               "geometric": {"rate": self.geometric.rate, "r2": self.geometric.r2}}
        if self.power_law is not None:
            out["power_law"] = {"exponent": self.power_law.rate, "r2": self.power_law.r2}
        return out


def _linfit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y ** 2))) else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def fit_decay(values: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares decay fit of ``log|v|`` against ``n`` and against ``log n``.

    Zero magnitudes are dropped. The model with the larger r^2 wins, ties going
    to the geometric model.

    Examples
    --------
    >>> fit = fit_decay([(n, 2.0 ** -n) for n in range(1, 11)])
    >>> fit.model, round(fit.rate, 6)
    ('geometric', 0.5)
    """
    pts = [(float(n), abs(complex(v))) for n, v in values]
    pts = [(n, v) for n, v in pts if v > 0 and np.isfinite(v)]
    if len(pts) < 5:
        raise ValueError(f"need at least 5 nonzero points to fit a decay model, got {len(pts)}")
    n = np.array([p[0] for p in pts])
    y = np.log(np.array([p[1] for p in pts]))
    s, c, r2 = _linfit(n, y)
    geo = ModelFit("geometric", math.exp(s), r2, c)
    pos = n > 0
    pw = None
    if pos.sum() >= 5:
        s2, c2, r22 = _linfit(np.log(n[pos]), y[pos])
        pw = ModelFit("power_law", s2, r22, c2)
    best = geo if pw is None or geo.r2 >= pw.r2 else pw
    return FitResult(best.model, best.rate, best.r2, geo, pw, len(pts))
