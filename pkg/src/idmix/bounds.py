"""Analytic codifference bounds, shift-rate formulas and special functions.

Norms of dual functionals are l^q norms with ``q = p/(p-1)``; every bound of
the form ``|C| <= B * ||x||^s ||y||^s`` only uses ``|<e_n, x>| <= ||x||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .measures import (CompoundPoisson, SeqSpec, SymmetricAlphaStable,
                       TemperedStable, validate)
from .seqspace import BasisAtom, DualFunctional, Phase, conjugate_exponent, dual_norm, pairing
from .shifts import (Direction, RateParams, WeightedShiftOperator, adjoint_power,
                     rate_params)


class BoundDomainError(ValueError):
    """Raised when a bound is requested outside the parameter range it covers."""


# ---------------------------------------------------------------------------
# special functions


def specfun_gamma(x: float) -> float:
    """Gamma function; raises at the poles ``0, -1, -2, ...``."""
    if x <= 0 and float(x).is_integer():
        raise BoundDomainError(f"Gamma has a pole at {x}")
    return float(special.gamma(x))


def specfun_beta(a: float, b: float) -> float:
    """Beta function for ``a, b > 0``."""
    if not (a > 0 and b > 0):
        raise BoundDomainError(f"Beta needs positive arguments, got ({a}, {b})")
    return float(special.beta(a, b))


def specfun_inc_gamma_lower(s: float, x: float) -> float:
    """Unregularized lower incomplete gamma ``int_0^x t^(s-1) e^(-t) dt``."""
    if not s > 0 or x < 0:
        raise BoundDomainError(f"lower incomplete gamma needs s > 0 and x >= 0, got ({s}, {x})")
    return float(special.gammainc(s, x) * special.gamma(s))


def specfun_inc_gamma_upper(s: float, x: float) -> float:
    """Unregularized upper incomplete gamma, also for ``s`` in (-1, 0)."""
    if x <= 0:
        raise BoundDomainError("upper incomplete gamma needs x > 0")
    if s > 0:
        return float(special.gammaincc(s, x) * special.gamma(s))
    if -1 < s < 0:
        return (specfun_inc_gamma_upper(s + 1, x) - x ** s * math.exp(-x)) / s
    raise BoundDomainError(f"upper incomplete gamma not implemented for s = {s}")


class Kind:
    EQUAL = "equal"
    NOT_EQUAL = "not_equal"


def _check_kind(kind):
    if kind not in (Kind.EQUAL, Kind.NOT_EQUAL):
        raise ValueError(f"kind must be 'equal' or 'not_equal', got {kind!r}")


def _gaussian_term(m, x: DualFunctional, y: DualFunctional, kind) -> float:
    if m.gaussian_diag is None:
        return 0.0
    common = sorted(set(x.coeffs) & set(y.coeffs))
    if not common:
        return 0.0
    r = m.gaussian_diag.values(np.array(common))
    s = complex(np.sum(r * np.conj([x[k] for k in common]) * np.array([y[k] for k in common])))
    return 0.5 * abs(s.real if kind == Kind.EQUAL else s.imag)


def _pair_products(atom: BasisAtom, x, y, kind) -> float:
    a = pairing(atom, x).real
    b = pairing(atom, y)
    b = b.real if kind == Kind.EQUAL else b.imag
    return abs(a * b)


# ---------------------------------------------------------------------------
# Levy-measure and control-measure bounds


def levy_bound(m: CompoundPoisson, x: DualFunctional, y: DualFunctional, p: float,
               kind: str = Kind.EQUAL) -> float:
    """``(1/2)|<Rx, y>| + 2^(4-p) sum_n |Re<z,x> Re<z,y>|^(p/2)`` over atoms
    ``z = lambda_n e_n`` (imaginary part of ``<z, y>`` for ``not_equal``).

    Examples
    --------
    >>> m = CompoundPoisson(SeqSpec.explicit([1.0]))
    >>> levy_bound(m, DualFunctional({0: 1}), DualFunctional({0: 1}), 1.0)
    8.0
    """
    _check_kind(kind)
    if not 0 <= p <= 2:
        raise BoundDomainError("p must lie in [0, 2]")
    if not isinstance(m, CompoundPoisson):
        raise TypeError("levy_bound applies to the compound Poisson family")
    terms = []
    for k in sorted(set(x.coeffs) & set(y.coeffs)):
        z = BasisAtom(k, Phase.REAL, float(m.lam.values(np.array([k]))[0]))
        terms.append(_pair_products(z, x, y, kind) ** (p / 2))
    return _gaussian_term(m, x, y, kind) + 2 ** (4 - p) * math.fsum(terms)


@dataclass(frozen=True)
class ControlData:
    """Atomic control measure ``sum mass * delta_atom`` restricted to the
    atoms that can pair with the functionals, plus the total mass ``xi(E)``.

    ``rho`` names the one-dimensional Levy law attached to each atom:
    ``("stable", alpha)`` for density ``|u|^(-1-alpha)``; ``("tempered", m)`` for
    the tempered density rescaled by the atom's ``k``; ``("dirac", None)`` for
    ``rho(z, du) = delta_{scale}``.
    """

    atoms: tuple  # ((BasisAtom, mass, k_scale), ...)
    total_mass: float
    rho: tuple


def control_data(m, x: DualFunctional, y: DualFunctional) -> ControlData:
    """Control data of a measure family on the common support of ``x`` and ``y``."""
    common = sorted(set(x.coeffs) & set(y.coeffs))
    idx = np.array(common, dtype=np.int64)
    if isinstance(m, SymmetricAlphaStable):
        k = m.k.values(idx) if common else np.array([])
        atoms = tuple((BasisAtom(i, ph), 0.5 * kk ** m.alpha, kk)
                      for i, kk in zip(common, k) for ph in (Phase.REAL, Phase.IMAG))
        return ControlData(atoms, m.k.power_sum(m.alpha), ("stable", m.alpha))
    if isinstance(m, TemperedStable):
        k = m.k.values(idx) if common else np.array([])
        atoms = tuple((BasisAtom(i, ph), kk ** m.alpha, kk)
                      for i, kk in zip(common, k) for ph in (Phase.REAL, Phase.IMAG))
        return ControlData(atoms, 2 * m.k.power_sum(m.alpha), ("tempered", m))
    if isinstance(m, CompoundPoisson):
        lam = m.lam.values(idx) if common else np.array([])
        atoms = tuple((BasisAtom(i, Phase.REAL), 1.0, l) for i, l in zip(common, lam))
        return ControlData(atoms, math.inf, ("dirac", m))
    raise TypeError(f"unknown family {type(m).__name__}")


def _stable_schedule_c(T, n, x, y, p, alpha) -> float:
    rp = rate_params(T)
    rho = envelope_base(rp, alpha, p)
    q = conjugate_exponent(p)
    nx, ny = dual_norm(x, q), dual_norm(y, q)
    if nx == 0 or ny == 0:
        return math.inf
    return (nx * ny) ** -0.5 * rho ** (-n / 2)


def control_bound(m, x: DualFunctional, y: DualFunctional, p: float, c="auto",
                  kind: str = Kind.EQUAL, *, T: WeightedShiftOperator | None = None,
                  n: int = 0) -> float:
    """Control-measure codifference bound for ``C(x, T*^n y)``.

    ``m`` is a measure family or a :class:`ControlData`. For stable laws the
    inner integrals are in closed form,
    ``2^(5-p) c^(p-alpha)/(p-alpha) int |..|^(p/2) dxi + 32 xi(E)/(alpha c^alpha)``;
    ``c="auto"`` picks ``c_n = (||x|| ||y||)^(-1/2) rho^(-n/2)`` from the rates of
    ``T``. For tempered laws ``c="auto"`` is the ``c -> infinity`` limit.

    Examples
    --------
    >>> data = ControlData(((BasisAtom(0), 1.0, 1.0),), 1.0, ("stable", 1.5))
    >>> e0 = DualFunctional({0: 1})
    >>> round(control_bound(data, e0, e0, 1.6, 1.0), 6)
    126.893966
    """
    _check_kind(kind)
    if not 0 <= p <= 2:
        raise BoundDomainError("p must lie in [0, 2]")
    base_y = y
    if T is not None and n:
        y = adjoint_power(T, n, y)
    data = m if isinstance(m, ControlData) else control_data(m, x, y)
    gauss = 0.0 if isinstance(m, ControlData) else _gaussian_term(m, x, y, kind)
    fam, par = data.rho
    integrand = [(mass, _pair_products(atom, x, y, kind) ** (p / 2), kk)
                 for atom, mass, kk in data.atoms]
    if fam == "stable":
        alpha = par
        if not p > alpha:
            raise BoundDomainError(f"the stable closed form needs p > alpha (p={p}, alpha={alpha})")
        if c == "auto":
            if T is None:
                raise ValueError("c='auto' for stable laws needs the operator T")
            c = _stable_schedule_c(T, n, x, base_y, p, alpha)
        S = math.fsum(mass * v for mass, v, _ in integrand)
        if math.isinf(c):
            return gauss + (0.0 if S == 0 else math.inf)
        return gauss + 2 ** (5 - p) * c ** (p - alpha) / (p - alpha) * S \
            + 32 * data.total_mass / (alpha * c ** alpha)
    if fam == "tempered":
        tm: TemperedStable = par
        al = tm.alpha
        if c == "auto" or math.isinf(c):
            pref = tm.a_minus * tm.lam_minus ** (al - p) + tm.a_plus * tm.lam_plus ** (al - p)
            pref *= specfun_gamma(p - al)
            return gauss + 2 ** (4 - p) * pref * math.fsum(
                mass * v * kk ** (p - al) for mass, v, kk in integrand)
        terms = []
        for mass, v, kk in integrand:
            inner = sum(a * (kk / lam) ** (p - al) * specfun_inc_gamma_lower(p - al, lam * c / kk)
                        for a, lam in ((tm.a_minus, tm.lam_minus), (tm.a_plus, tm.lam_plus)))
            terms.append(mass * 2 ** (-p) * v * inner)
        tail = data.total_mass * (tm.a_minus + tm.a_plus) / (al * c ** al)
        return gauss + 16 * (math.fsum(terms) + tail)
    # compound Poisson: xi = sum delta_{e_n}, rho(e_n, du) = delta_{lambda_n}
    cp: CompoundPoisson = par
    if c == "auto":
        c = max_value(cp.lam)
    inside = math.fsum(2 ** (-p) * kk ** p * v for mass, v, kk in integrand if kk <= c)
    return gauss + 16 * (inside + count_above(cp.lam, c))


def max_value(s: SeqSpec) -> float:
    """Supremum of a nonincreasing-tailed sequence on N."""
    r = s.resolved.right
    head_max = max(r.head) if r.head else 0.0
    first_tail = float(r.tail.values(np.array([r.H]))[0]) if r.tail.kind != "zero" else 0.0
    return max(head_max, first_tail)


def count_above(s: SeqSpec, c: float) -> int:
    """Number of indices ``n`` with ``s_n > c`` for a sequence on N."""
    r = s.resolved.right
    cnt = sum(1 for h in r.head if h > c)
    t = r.tail
    if t.kind == "zero":
        return cnt
    # tails are nonincreasing: count m >= H with value > c
    if t.kind == "geom":
        if t.r >= 1:
            raise BoundDomainError("non-decaying tail")
        mmax = math.floor(math.log(c / t.A) / math.log(t.r)) if c < t.A else -1
    else:
        mmax = math.floor((t.A / c) ** (1 / t.beta) - t.c) if c < t.A * (r.H + t.c) ** (-t.beta) or r.H == 0 else r.H - 1
    lo = r.H
    hi = max(lo - 1, mmax + 1)
    m = np.arange(lo, hi + 1)
    return cnt + int(np.sum(t.values(m) > c))


# ---------------------------------------------------------------------------
# compound Poisson shift bounds


def poisson_shift_bound(lam: SeqSpec, p: float, n: int) -> float:
    """``2^(4-p) sum_l (lambda_l lambda_{l+n})^(p/2)``: bound on the normalized
    codifference sup for the backward shift preserving the measure.

    Examples
    --------
    >>> poisson_shift_bound(SeqSpec.geometric(1.0, 0.5), 1.0, 0)
    16.0
    """
    if not 1 <= p < 2:
        raise BoundDomainError("p must lie in [1, 2)")
    return 2 ** (4 - p) * lam.overlap(p / 2, p / 2, n)


def overlap_rate(lam0: float, gamma: float, p: float, n: int, epsilon: float | None = None) -> float:
    """Closed-form bound on ``sum_l (lambda_l lambda_{l+n})^(p/2)`` for
    ``lambda_l = lam0/(l+1)^(gamma/p)``, without the ``2^(4-p)`` factor."""
    if not gamma > 1:
        raise BoundDomainError("gamma must be > 1")
    if n < 1:
        raise BoundDomainError("the rate formula holds for n >= 1")
    if gamma < 2:
        return lam0 ** p * specfun_beta(1 - gamma / 2, gamma - 1) * n ** (-(gamma - 1))
    if epsilon is None or not 0 < epsilon < 1:
        raise BoundDomainError("gamma >= 2 needs epsilon in (0, 1)")
    return lam0 ** p * specfun_beta(epsilon / 2, 1 - epsilon) * n ** (-(1 - epsilon))


def poisson_rate(lam0: float, gamma: float, p: float, n: int, epsilon: float | None = None) -> float:
    """``2^(4-p) lam0^p B(1-gamma/2, gamma-1) n^-(gamma-1)`` (``1 < gamma < 2``)
    or ``2^(4-p) lam0^p B(eps/2, 1-eps) n^-(1-eps)`` (``gamma >= 2``)."""
    return 2 ** (4 - p) * overlap_rate(lam0, gamma, p, n, epsilon)


# ---------------------------------------------------------------------------
# stable shift rates


def envelope_base(rp: RateParams, alpha: float, p: float) -> float:
    """``rho = max(eta_-^(2 alpha/p - 1), eta_+)``."""
    return max(rp.eta_minus ** (2 * alpha / p - 1), rp.eta_plus)


@dataclass(frozen=True)
class StableRate:
    envelope: float
    pre_rate: float
    K1: float
    K2: float
    K3: float


def _check_stable_params(alpha, p):
    if not (0 < alpha < 2 and alpha != 1):
        raise BoundDomainError("alpha must lie in (0, 2) minus {1}")
    if not (1 <= p <= 2 and p > alpha):
        raise BoundDomainError(f"p must lie in (alpha, 2] and in [1, 2] (p={p}, alpha={alpha})")


def stable_shift_rate(rp: RateParams, alpha: float, p: float, n: int, k0: float = 1.0) -> StableRate:
    """Envelope ``rho^(alpha n/2)`` and the three-term bound
    ``k0^alpha (K1 eta_+^(pn/2) + K2 eta_-^((alpha-p/2)n) + K3 eta_-^((alpha-p/2)n))``
    on ``sum_l k_l^alpha prod_{j=l+1}^{l+n} w_j^(p/2)``.

    The chain assumes ``q_- = 0``, ``q_+ = 1`` and ``alpha > p/2``; the ratio
    ``eta_-^(alpha-p/2) / eta_+^(p/2)`` must differ from 1.

    Examples
    --------
    >>> rp = RateParams(0.5, 0.5)
    >>> round(stable_shift_rate(rp, 1.5, 1.6, 2).envelope, 4)
    0.4026
    """
    _check_stable_params(alpha, p)
    if n < 0:
        raise ValueError("n must be >= 0")
    em, ep = rp.eta_minus, rp.eta_plus
    envelope = envelope_base(rp, alpha, p) ** (alpha * n / 2)
    a = em ** (alpha - p / 2)
    b = ep ** (p / 2)
    if math.isclose(a, b, rel_tol=1e-12):
        raise BoundDomainError(
            "eta_+^(p/2) equals eta_-^(alpha-p/2): the constants K1 and K3 are singular")
    if rp.q_minus != 0 or rp.q_plus != 1:
        raise BoundDomainError(
            "the K-chain needs q_- = 0 and q_+ = 1; use stable_orbit_sum for the exact value")
    if not alpha > p / 2:
        raise BoundDomainError("the K-chain needs alpha > p/2; use stable_orbit_sum for the exact value")
    K1 = 1 / (1 - ep ** alpha) + a / (b - a)
    K2 = 1 / (1 - em ** alpha)
    K3 = -a / (b - a) * (a / b)
    pre = k0 ** alpha * (K1 * ep ** (p * n / 2) + (K2 + K3) * em ** ((alpha - p / 2) * n))
    return StableRate(envelope, pre, K1, K2, K3)


def stable_orbit_sum(m: SymmetricAlphaStable, p: float, n: int) -> float:
    """``sum_l k_l^alpha ||T^n e_l||^(p/2) = sum_l k_l^(alpha-p/2) k_{l+n}^(p/2)``
    for the forward shift preserving ``m`` (upper bracket for power-law tails)."""
    return m.k.overlap(m.alpha - p / 2, p / 2, n)


def stable_sup_bound(m: SymmetricAlphaStable, T: WeightedShiftOperator, p: float, n: int) -> float:
    """Bound ``B(n)`` with ``|C^{=,!=}(x, T*^n y)| <= B(n) (||x|| ||y||)^(alpha/2)``.

    Plugs ``c_n = (||x|| ||y||)^(-1/2) rho^(-n/2)`` into the stable control
    bound: ``B(n) = 2^(5-p)/(p-alpha) P_n rho^(-n(p-alpha)/2) + 32 xi(E)/alpha rho^(alpha n/2)``
    with ``P_n`` the exact orbit sum.
    """
    alpha = m.alpha
    _check_stable_params(alpha, p)
    rho = envelope_base(rate_params(T), alpha, p)
    A = 2 ** (5 - p) / (p - alpha)
    B = 32 * m.k.power_sum(alpha) / alpha
    return A * stable_orbit_sum(m, p, n) * rho ** (-n * (p - alpha) / 2) + B * rho ** (alpha * n / 2)


# ---------------------------------------------------------------------------
# tempered stable


def temp_prefactor(m: TemperedStable, p: float | None = None) -> float:
    """``2^(4-p) (a_- lam_-^(alpha-p) + a_+ lam_+^(alpha-p)) Gamma(p-alpha)``."""
    p = m.p if p is None else p
    if not 1 <= p <= 2:
        raise BoundDomainError("p must lie in [1, 2]")
    al = m.alpha
    s = m.a_minus * m.lam_minus ** (al - p) + m.a_plus * m.lam_plus ** (al - p)
    return 2 ** (4 - p) * s * specfun_gamma(p - al)


def temp_bound(m: TemperedStable, x: DualFunctional, y: DualFunctional, kind: str = Kind.EQUAL,
               p: float | None = None) -> float:
    """Tempered stable codifference bound with ``k_n^p``-weighted atom sums."""
    _check_kind(kind)
    p = m.p if p is None else p
    common = sorted(set(x.coeffs) & set(y.coeffs))
    if not common:
        return _gaussian_term(m, x, y, kind)
    k = m.k.values(np.array(common))
    xs = np.array([x[i] for i in common])
    ys = np.array([y[i] for i in common])
    if kind == Kind.EQUAL:
        s = np.abs(xs.real * ys.real) ** (p / 2) + np.abs(xs.imag * ys.imag) ** (p / 2)
    else:
        s = np.abs(xs.real * ys.imag) ** (p / 2) + np.abs(xs.imag * ys.real) ** (p / 2)
    return _gaussian_term(m, x, y, kind) + temp_prefactor(m, p) * math.fsum((k ** p * s).tolist())


def temp_shift_bound(k: SeqSpec, m: TemperedStable, p: float, n: int) -> float:
    """``2^(5-p) (...) Gamma(p-alpha) sum_l k_l^(p/2) k_{l+n}^(p/2)``.

    Examples
    --------
    >>> m = TemperedStable(0.5, SeqSpec.geometric(1.0, 0.5))
    >>> round(temp_shift_bound(m.k, m, 1.0, 1) / (32 * math.sqrt(2 * math.pi)), 12)
    1.0
    """
    return 2 * temp_prefactor(m, p) * k.overlap(p / 2, p / 2, n)


def temp_rate(k0: float, gamma: float, p: float, n: int, epsilon: float | None, m: TemperedStable) -> float:
    """Closed-form rate for ``k_n = k0/(n+1)^(gamma/p)``."""
    return 2 * temp_prefactor(m, p) * overlap_rate(k0, gamma, p, n, epsilon)


# ---------------------------------------------------------------------------
# family dispatch used by the pipeline


@dataclass(frozen=True)
class ShiftBound:
    """``|C(x, T*^n y)| <= value * (||x|| ||y||)^exponent`` (dual l^q norms)."""

    value: float
    exponent: float


def shift_bound(m, T: WeightedShiftOperator, n: int) -> ShiftBound:
    """Normalized sup bound for the invariant (measure, shift) pairs."""
    if isinstance(m, CompoundPoisson):
        return ShiftBound(poisson_shift_bound(m.lam, m.p, n), m.p / 2)
    if isinstance(m, TemperedStable):
        return ShiftBound(temp_shift_bound(m.k, m, m.p, n), m.p / 2)
    if isinstance(m, SymmetricAlphaStable):
        if T.direction is not Direction.FORWARD_Z:
            raise BoundDomainError("stable shift bounds are for the forward shift on Z")
        return ShiftBound(stable_sup_bound(m, T, m.p, n), m.alpha / 2)
    raise TypeError(type(m).__name__)


def bound_for_pair(m, T: WeightedShiftOperator, x: DualFunctional, y: DualFunctional, n: int) -> float:
    """``shift_bound(n) * (||x||_q ||y||_q)^exponent``."""
    sb = shift_bound(m, T, n)
    q = conjugate_exponent(m.p)
    return sb.value * (dual_norm(x, q) * dual_norm(y, q)) ** sb.exponent


def rate_formula(m, T: WeightedShiftOperator, n: int, *, epsilon: float = 0.5):
    """Closed-form rate of the family at ``n`` when one is available.

    Power-law sequences get the Beta-function rate, the stable forward shift
    gets its envelope; other configurations return ``None``.
    """
    if isinstance(m, SymmetricAlphaStable):
        try:
            return envelope_base(rate_params(T), m.alpha, m.p) ** (m.alpha * n / 2)
        except ValueError:
            return None
    seq = m.lam if isinstance(m, CompoundPoisson) else getattr(m, "k", None)
    par = _power_law_params(seq, m.p)
    if par is None or n < 1:
        return None
    k0, gamma = par
    eps = epsilon if gamma >= 2 else None
    if isinstance(m, CompoundPoisson):
        return poisson_rate(k0, gamma, m.p, n, eps)
    return temp_rate(k0, gamma, m.p, n, eps, m)


def _power_law_params(seq: SeqSpec | None, p: float):
    """``(k0, gamma)`` when ``seq`` is exactly ``k0/(n+1)^(gamma/p)``."""
    if seq is None:
        return None
    r = seq.resolved.right
    if seq.resolved.left is None and not r.head and r.tail.kind == "power" and r.tail.c == 1.0:
        return r.tail.A, r.tail.beta * p
    return None
