"""Infinitely divisible measure families on sequence spaces.

Three families are supported, all with atomic Levy or control data on the
basis vectors:

* compound Poisson with Levy measure ``sum_n delta_{lambda_n e_n}``; its
  characteristic functional collapses to ``sum_n (exp(i lambda_n Re f_n) - 1)``
  and coordinate ``n`` is ``lambda_n N_n`` with ``N_n`` unit-rate Poisson;
* symmetric alpha-stable with control measure
  ``(1/2) sum_n k_n^alpha (delta_{e_n} + delta_{i e_n})`` on Z;
* tempered stable series ``sum_n k_n (theta_{1,n} + i theta_{2,n}) e_n`` on N.

Each may carry a diagonal Gaussian part contributing ``-(1/4) sum r_n |f_n|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from ._series import (OneSided, Resolved, Tail, ZERO_TAIL, DivergentSeriesError,
                      TruncationError)
from .seqspace import DomainError, DualFunctional, IndexDomain
from .shifts import Direction, WeightKind, WeightedShiftOperator

__all__ = [
    "SeqSpec", "CompoundPoisson", "SymmetricAlphaStable", "TemperedStable",
    "MeasureSpec", "TemperedExponentParams", "Side", "Drift", "ValidityReport",
    "validate", "tempered_exponent", "tempered_drift", "log_cf", "series_tail_bound",
    "measure_from_json", "DivergentSeriesError", "TruncationError",
]


class Drift(str, Enum):
    FULL = "full"
    DRIFT_FREE = "drift_free"


class Side(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True, eq=False)
class SeqSpec:
    """Positive coefficient sequence over N or Z.

    Use the classmethod constructors; ``resolved`` holds the head/tail form
    used for evaluation and summation.
    """

    kind: str
    domain: IndexDomain
    params: dict
    resolved: Resolved = field(repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def power_law(cls, lam0: float, gamma: float, p: float) -> "SeqSpec":
        """``s_n = lam0 / (n+1)^(gamma/p)`` on N."""
        _pos("lam0", lam0)
        _pos("gamma", gamma)
        _pos("p", p)
        tail = Tail("power", A=float(lam0), c=1.0, beta=gamma / p)
        return cls("power_law", IndexDomain.NATURALS, dict(lam0=lam0, gamma=gamma, p=p),
                   Resolved(OneSided((), tail)))

    @classmethod
    def geometric(cls, c: float, r: float, domain=IndexDomain.NATURALS, r_minus: float | None = None) -> "SeqSpec":
        """``s_n = c r^n`` on N; on Z, ``c r_minus^|n|`` for negative ``n``."""
        _pos("c", c)
        _pos("r", r)
        domain = IndexDomain(domain)
        right = OneSided((), Tail("geom", A=float(c), r=float(r)))
        left = None
        params = dict(c=c, r=r)
        if domain is IndexDomain.INTEGERS:
            rm = r if r_minus is None else r_minus
            _pos("r_minus", rm)
            left = OneSided((), Tail("geom", A=float(c) * rm, r=float(rm)))
            params["r_minus"] = rm
        return cls("geometric", domain, params, Resolved(right, left))

    @classmethod
    def explicit(cls, head, tail: "SeqSpec | None" = None) -> "SeqSpec":
        """Explicit values ``head[n]`` on N, followed by ``tail`` (or zeros).

        The tail is read at the same absolute index, ``s_n = tail[n]``.
        """
        head = [float(h) for h in head]
        for h in head:
            _pos("head value", h)
        if tail is None:
            res = Resolved(OneSided(tuple(head), ZERO_TAIL))
        else:
            if tail.domain is not IndexDomain.NATURALS:
                raise DomainError("explicit sequences on N need a tail on N")
            tr = tail.resolved.right
            H = len(head)
            extra = tr.values(np.arange(H, max(H, tr.H))).tolist() if tr.H > H else []
            res = Resolved(OneSided(tuple(head + extra), tr.tail))
        params = dict(head=head, tail=None if tail is None else tail.to_json())
        return cls("explicit", IndexDomain.NATURALS, params, res)

    @classmethod
    def from_weights(cls, k0: float, T: WeightedShiftOperator) -> "SeqSpec":
        """Sequence making the shift ``T`` preserve the measure.

        Backward shift on N: ``k_n = k0 prod_{l<n} 1/w_l``.
        Forward shift on Z: ``k_n = k0 prod_{l=1}^n w_l`` for ``n >= 0`` and
        ``k0 prod_{l=n+1}^0 1/w_l`` for ``n < 0``.
        """
        _pos("k0", k0)
        k0 = float(k0)
        w = T.weights
        params = dict(k0=k0, operator=T.to_json())
        if T.direction is Direction.IDENTITY:
            raise ValueError("the identity operator does not determine a sequence")
        if T.direction is Direction.BACKWARD_N:
            if w.kind is WeightKind.POWER_LAW_P4:
                right = OneSided((k0,), Tail("power", A=k0, c=0.0, beta=w.exponent))
            elif w.kind is WeightKind.POWER_LAW_P6:
                right = OneSided((), Tail("power", A=k0, c=1.0, beta=w.exponent))
            elif w.kind is WeightKind.CONSTANT:
                right = OneSided((), Tail("geom", A=k0, r=1.0 / w.c))
            else:
                vals = [k0]
                for h in w.head:
                    vals.append(vals[-1] / h)
                H = len(w.head)
                r = 1.0 / w.tail
                right = OneSided(tuple(vals[:H]), Tail("geom", A=vals[H] / r ** H, r=r))
            return cls("from_weights", IndexDomain.NATURALS, params, Resolved(right))
        # forward shift on Z
        if w.kind is WeightKind.CONSTANT:
            left_w = right_w = w.c
            hp, hm = 1, 0
        else:
            left_w, right_w = w.left, w.right
            keys = list(w.exceptions)
            hp = max([1, w.split + 1] + [h + 1 for h in keys])
            hm = max([0, -w.split] + [1 - h for h in keys])
        pos = [k0]
        for l in range(1, hp):
            pos.append(pos[-1] * float(w.values(np.array([l]))[0]))
        # right tail from hp: k_n = k_{hp-1} right_w^{n-hp+1}
        right = OneSided(tuple(pos), Tail("geom", A=pos[-1] * right_w ** (1 - hp), r=right_w))
        neg = []  # neg[m] = k_{-m-1}
        cur = k0
        for m in range(hm):
            cur = cur / float(w.values(np.array([-m]))[0])
            neg.append(cur)
        kh = neg[-1] if neg else k0  # k_{-hm}
        r = 1.0 / left_w
        left = OneSided(tuple(neg), Tail("geom", A=kh * r ** (1 - hm), r=r))
        return cls("from_weights", IndexDomain.INTEGERS, params, Resolved(right, left))

    # -- evaluation -------------------------------------------------------
    def values(self, idx) -> np.ndarray:
        return self.resolved.values(idx)

    def value(self, n: int) -> float:
        return float(self.values(np.array([n]))[0])

    def in_ls(self, s: float) -> bool:
        """Membership of the sequence in l^s."""
        return self.resolved.in_ls(s)

    def power_sum(self, power: float, start: int = 0) -> float:
        return self.resolved.power_sum(power, start)

    def overlap(self, a: float, b: float, n: int) -> float:
        """Upper bound on ``sum_l s_l^a s_{l+n}^b``."""
        return self.resolved.overlap(a, b, n)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        out = {"kind": self.kind, "domain": self.domain.value}
        out.update(self.params)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SeqSpec":
        kind = obj["kind"]
        if kind == "power_law":
            return cls.power_law(float(obj["lam0"]), float(obj["gamma"]), float(obj["p"]))
        if kind == "geometric":
            return cls.geometric(float(obj["c"]), float(obj["r"]), obj.get("domain", "N"), obj.get("r_minus"))
        if kind == "explicit":
            tail = obj.get("tail")
            return cls.explicit(obj["head"], None if tail is None else cls.from_json(tail))
        if kind == "from_weights":
            return cls.from_weights(float(obj["k0"]), WeightedShiftOperator.from_json(obj["operator"]))
        raise ValueError(f"unknown sequence kind {kind!r}")

    def __eq__(self, other):
        return isinstance(other, SeqSpec) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(repr(self.to_json()))


def _pos(name, v):
    if v is None or not (math.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be finite and > 0, got {v!r}")


def series_tail_bound(s: SeqSpec, power: float, start: int) -> float:
    """Upper bound on ``sum_{n >= start} s_n^power`` (``|n| >= start`` on Z).

    Geometric tails are summed in closed form; power-law tails use an
    Euler-Maclaurin upper bracket after an explicit window.

    Examples
    --------
    >>> series_tail_bound(SeqSpec.geometric(1.0, 0.5), 1.0, 10)
    0.001953125
    """
    if not s.in_ls(power):
        raise DivergentSeriesError(f"sequence is not in l^{power}")
    return s.power_sum(power, start)


# ---------------------------------------------------------------------------
# measure families


@dataclass(frozen=True)
class CompoundPoisson:
    lam: SeqSpec
    p: float = 1.0
    gaussian_diag: SeqSpec | None = None
    domain = IndexDomain.NATURALS


@dataclass(frozen=True)
class SymmetricAlphaStable:
    alpha: float
    k: SeqSpec
    p: float = 2.0
    gaussian_diag: SeqSpec | None = None
    domain = IndexDomain.INTEGERS


@dataclass(frozen=True)
class TemperedStable:
    alpha: float
    k: SeqSpec
    a_minus: float = 1.0
    a_plus: float = 1.0
    lam_minus: float = 1.0
    lam_plus: float = 1.0
    p: float = 1.0
    gaussian_diag: SeqSpec | None = None
    domain = IndexDomain.NATURALS

    def side(self, side: Side) -> "TemperedExponentParams":
        if Side(side) is Side.PLUS:
            return TemperedExponentParams(self.a_plus, self.lam_plus, self.alpha, Side.PLUS)
        return TemperedExponentParams(self.a_minus, self.lam_minus, self.alpha, Side.MINUS)


MeasureSpec = CompoundPoisson | SymmetricAlphaStable | TemperedStable


@dataclass(frozen=True)
class TemperedExponentParams:
    a: float
    lam: float
    alpha: float
    side: Side = Side.PLUS

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"tempered stable index must lie in (0, 1), got {self.alpha}")
        _pos("a", self.a)
        _pos("lam", self.lam)
        object.__setattr__(self, "side", Side(self.side))


@dataclass
class ValidityReport:
    valid: bool
    failures: list[str]
    checks: dict

    def to_json(self) -> dict:
        return {"valid": self.valid, "failures": list(self.failures), "checks": dict(self.checks)}


def validate(m: MeasureSpec) -> ValidityReport:
    """Check the summability and parameter conditions of a measure.

    Compound Poisson needs ``lambda`` in l^p (every listed atom is nonzero by
    construction); the stable and tempered families need ``k`` in l^alpha.
    """
    failures: list[str] = []
    checks: dict = {}

    def need(name, ok, msg):
        checks[name] = bool(ok)
        if not ok:
            failures.append(msg)

    if isinstance(m, CompoundPoisson):
        need("p_range", 1 <= m.p < 2, f"p = {m.p} must lie in [1, 2)")
        need("domain", m.lam.domain is IndexDomain.NATURALS, "compound Poisson atoms are indexed by N")
        if checks["domain"]:
            need("lambda_in_lp", m.lam.in_ls(m.p), f"lambda is not in l^{m.p}")
    elif isinstance(m, SymmetricAlphaStable):
        need("alpha_range", 0 < m.alpha < 2 and m.alpha != 1, f"alpha = {m.alpha} must lie in (0, 2) minus {{1}}")
        need("p_range", 1 <= m.p <= 2, f"p = {m.p} must lie in [1, 2]")
        need("domain", m.k.domain is IndexDomain.INTEGERS, "stable control atoms are indexed by Z")
        if checks["alpha_range"]:
            need("k_in_l_alpha", m.k.in_ls(m.alpha), f"k is not in l^{m.alpha}")
    elif isinstance(m, TemperedStable):
        need("alpha_range", 0 < m.alpha < 1, f"alpha = {m.alpha} must lie in (0, 1)")
        need("p_range", 1 <= m.p <= 2, f"p = {m.p} must lie in [1, 2]")
        need("tempering", min(m.a_minus, m.a_plus, m.lam_minus, m.lam_plus) > 0,
             "a_minus, a_plus, lam_minus, lam_plus must be > 0")
        need("domain", m.k.domain is IndexDomain.NATURALS, "tempered stable atoms are indexed by N")
        if checks["alpha_range"]:
            need("k_in_l_alpha", m.k.in_ls(m.alpha), f"k is not in l^{m.alpha}")
    else:
        raise TypeError(f"unknown measure family {type(m).__name__}")
    if m.gaussian_diag is not None:
        need("gaussian_domain", m.gaussian_diag.domain is m.domain, "Gaussian diagonal lives on the wrong index set")
    return ValidityReport(not failures, failures, checks)


# ---------------------------------------------------------------------------
# tempered stable exponent


def tempered_exponent(params: TemperedExponentParams, t):
    """Uncompensated exponent of one tempered side.

    Plus side: ``int_0^inf (e^{iut} - 1) a e^{-lam u} u^{-1-alpha} du
    = a Gamma(-alpha) ((lam - i t)^alpha - lam^alpha)``; the minus side is the
    plus side evaluated at ``-t``.

    Examples
    --------
    >>> v = tempered_exponent(TemperedExponentParams(1.0, 1.0, 0.5), 1.0)
    >>> round(v.real, 4), round(v.imag, 4)
    (-0.3498, 1.6133)
    """
    t = np.asarray(t, dtype=float)
    s = t if params.side is Side.PLUS else -t
    lam, al = params.lam, params.alpha
    # lam^alpha * expm1(alpha log(1 - i s / lam)) avoids cancellation near s = 0
    val = params.a * special.gamma(-al) * lam ** al * np.expm1(al * np.log1p(-1j * s / lam))
    return val if val.ndim else complex(val)


def _upper_gamma_neg(alpha: float, x: float) -> float:
    """``Gamma(-alpha, x)`` for ``alpha`` in (0, 1), ``x > 0``."""
    g1 = special.gammaincc(1 - alpha, x) * special.gamma(1 - alpha)
    return (g1 - x ** (-alpha) * math.exp(-x)) / (-alpha)


def tempered_drift(m: TemperedStable) -> float:
    """``int x kappa(x) lambda(dx)`` with ``kappa = 1_{|x|<1} + 1_{|x|>=1}/|x|``."""
    al = m.alpha

    def side(a, lam):
        low = lam ** (al - 1) * special.gammainc(1 - al, lam) * special.gamma(1 - al)
        return a * (low + lam ** al * _upper_gamma_neg(al, lam))

    return side(m.a_plus, m.lam_plus) - side(m.a_minus, m.lam_minus)


def _tempered_psi(m: TemperedStable, t: np.ndarray, drift: Drift) -> np.ndarray:
    val = (tempered_exponent(m.side(Side.PLUS), t) + tempered_exponent(m.side(Side.MINUS), t))
    val = np.asarray(val, dtype=complex)
    if drift is Drift.FULL:
        val = val - 1j * tempered_drift(m) * t
    return val


# ---------------------------------------------------------------------------
# characteristic functional


def _check_domain(m: MeasureSpec, f: DualFunctional):
    if f.domain is not m.domain:
        raise DomainError(f"functional on {f.domain.value} used with a measure on {m.domain.value}")


def log_cf(m: MeasureSpec, f: DualFunctional, drift: Drift = Drift.FULL) -> complex:
    """``log E exp(i Re <X, f>)`` for a finitely supported functional.

    Only atoms on the support of ``f`` contribute, so the sum is finite.
    ``DriftFree`` drops every term linear in ``f``; such terms cancel inside
    codifferences.

    Examples
    --------
    >>> m = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
    >>> round(log_cf(m, DualFunctional({0: 0.5})).real, 12)
    -2.0
    """
    _check_domain(m, f)
    if not f:
        return 0j
    idx, val = f.arrays()
    terms = _atom_terms(m, idx, val, Drift(drift))
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def _atom_terms(m: MeasureSpec, idx: np.ndarray, val: np.ndarray, drift: Drift) -> np.ndarray:
    """Per-coordinate contributions to the log characteristic functional."""
    re, im = val.real, val.imag
    if isinstance(m, CompoundPoisson):
        lam = m.lam.values(idx)
        x = lam * re
        out = np.expm1(1j * x)
        if drift is Drift.DRIFT_FREE:
            out = out - 1j * x
    elif isinstance(m, SymmetricAlphaStable):
        k = m.k.values(idx)
        out = -0.5 * (np.power(k * np.abs(re), m.alpha) + np.power(k * np.abs(im), m.alpha)) + 0j
    else:
        k = m.k.values(idx)
        out = _tempered_psi(m, k * re, drift) + _tempered_psi(m, -k * im, drift)
    if m.gaussian_diag is not None:
        out = out - 0.25 * m.gaussian_diag.values(idx) * (re * re + im * im)
    return out


def atom_terms(m: MeasureSpec, f: DualFunctional, drift: Drift = Drift.FULL) -> tuple[np.ndarray, np.ndarray]:
    """``(indices, per-coordinate log-CF terms)`` of ``f``."""
    _check_domain(m, f)
    idx, val = f.arrays()
    return idx, _atom_terms(m, idx, val, Drift(drift))


# ---------------------------------------------------------------------------
# JSON


def measure_to_json(m: MeasureSpec) -> dict:
    g = None if m.gaussian_diag is None else m.gaussian_diag.to_json()
    if isinstance(m, CompoundPoisson):
        out = {"family": "compound_poisson", "lambda": m.lam.to_json(), "p": m.p}
    elif isinstance(m, SymmetricAlphaStable):
        out = {"family": "stable", "alpha": m.alpha, "k": m.k.to_json(), "p": m.p}
    else:
        out = {"family": "tempered_stable", "alpha": m.alpha, "k": m.k.to_json(), "p": m.p,
               "a_minus": m.a_minus, "a_plus": m.a_plus,
               "lam_minus": m.lam_minus, "lam_plus": m.lam_plus}
    if g is not None:
        out["gaussian_diag"] = g
    return out


def measure_from_json(obj: dict) -> MeasureSpec:
    fam = obj["family"]
    g = obj.get("gaussian_diag")
    g = None if g is None else SeqSpec.from_json(g)
    if fam == "compound_poisson":
        return CompoundPoisson(SeqSpec.from_json(obj["lambda"]), float(obj.get("p", 1.0)), g)
    if fam == "stable":
        return SymmetricAlphaStable(float(obj["alpha"]), SeqSpec.from_json(obj["k"]), float(obj.get("p", 2.0)), g)
    if fam == "tempered_stable":
        return TemperedStable(float(obj["alpha"]), SeqSpec.from_json(obj["k"]),
                              float(obj.get("a_minus", 1.0)), float(obj.get("a_plus", 1.0)),
                              float(obj.get("lam_minus", 1.0)), float(obj.get("lam_plus", 1.0)),
                              float(obj.get("p", 1.0)), g)
    raise ValueError(f"unknown measure family {fam!r}")
