"""Weighted shift operators and their adjoint powers on dual functionals.

Conventions
-----------
Backward shift on N:  ``T e_0 = 0`` and ``T e_{n+1} = w_n e_n``, so the adjoint
acts by ``(T* f)_{k+1} = w_k f_k`` and ``(T* f)_0 = 0``.

Forward shift on Z:  ``T e_n = w_{n+1} e_{n+1}``, so ``(T* f)_k = w_{k+1} f_{k+1}``.

The identity operator is included as a third direction; it is the standard
example of an invariant but non-mixing map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .seqspace import DomainError, DualFunctional, IndexDomain

# Weight products over more factors than this are formed in log space.
_DIRECT_PRODUCT_MAX = 64


class Direction(str, Enum):
    BACKWARD_N = "backwardN"
    FORWARD_Z = "forwardZ"
    IDENTITY = "identity"


class WeightKind(str, Enum):
    POWER_LAW_P4 = "power_law_p4"
    POWER_LAW_P6 = "power_law_p6"
    CONSTANT = "constant"
    HEAD_CONST_TAIL = "head_const_tail"
    TWO_SIDED = "two_sided"


class RateConditionError(ValueError):
    """Raised when a weight sequence does not admit contraction rates below 1."""


@dataclass(frozen=True)
class WeightRule:
    """Closed-form weight family.

    Parameters
    ----------
    kind : WeightKind
        ``power_law_p4``: ``w_0 = 1``, ``w_n = (1 + 1/n)^(gamma/p)`` for ``n >= 1``.
        ``power_law_p6``: ``w_n = ((n+2)/(n+1))^(gamma/p)``.
        ``constant``: ``w_n = c``.
        ``head_const_tail``: ``w_n = head[n]`` for ``n < len(head)``, else ``tail``.
        ``two_sided``: ``w_l = head[l]`` if listed, else ``left`` for ``l <= split``
        and ``right`` for ``l > split``.
    """

    kind: WeightKind
    gamma: float | None = None
    p: float | None = None
    c: float | None = None
    head: tuple = ()
    tail: float | None = None
    left: float | None = None
    right: float | None = None
    split: int = 0
    exceptions: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = WeightKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "head", tuple(float(h) for h in self.head))
        object.__setattr__(self, "exceptions", {int(k): float(v) for k, v in dict(self.exceptions).items()})
        if kind in (WeightKind.POWER_LAW_P4, WeightKind.POWER_LAW_P6):
            if self.gamma is None or self.p is None:
                raise ValueError("power-law weights need gamma and p")
            if not self.gamma > 1:
                raise ValueError("gamma must be > 1")
            if not 1 <= self.p <= 2:
                raise ValueError("p must lie in [1, 2]")
        elif kind is WeightKind.CONSTANT:
            _check_positive("c", self.c)
        elif kind is WeightKind.HEAD_CONST_TAIL:
            _check_positive("tail", self.tail)
            for h in self.head:
                _check_positive("head weight", h)
        elif kind is WeightKind.TWO_SIDED:
            _check_positive("left", self.left)
            _check_positive("right", self.right)
            for v in self.exceptions.values():
                _check_positive("head weight", v)

    # convenience constructors
    @classmethod
    def power_law_p4(cls, gamma, p):
        return cls(WeightKind.POWER_LAW_P4, gamma=gamma, p=p)

    @classmethod
    def power_law_p6(cls, gamma, p):
        return cls(WeightKind.POWER_LAW_P6, gamma=gamma, p=p)

    @classmethod
    def constant(cls, c):
        return cls(WeightKind.CONSTANT, c=c)

    @classmethod
    def head_const_tail(cls, head, tail):
        return cls(WeightKind.HEAD_CONST_TAIL, head=tuple(head), tail=tail)

    @classmethod
    def two_sided(cls, left, right, split=0, exceptions=None):
        return cls(WeightKind.TWO_SIDED, left=left, right=right, split=split, exceptions=exceptions or {})

    @property
    def exponent(self) -> float:
        return self.gamma / self.p

    def values(self, idx) -> np.ndarray:
        """Vectorized weights at integer indices (no domain check)."""
        idx = np.asarray(idx, dtype=np.int64)
        k = self.kind
        if k is WeightKind.CONSTANT:
            return np.full(idx.shape, float(self.c))
        if k is WeightKind.POWER_LAW_P4:
            j = idx.astype(float)
            with np.errstate(divide="ignore"):
                out = np.power(1.0 + 1.0 / np.where(idx >= 1, j, 1.0), self.exponent)
            return np.where(idx >= 1, out, 1.0)
        if k is WeightKind.POWER_LAW_P6:
            j = idx.astype(float)
            return np.power((j + 2.0) / (j + 1.0), self.exponent)
        if k is WeightKind.HEAD_CONST_TAIL:
            out = np.full(idx.shape, float(self.tail))
            h = np.asarray(self.head)
            m = idx < len(h)
            out[m] = h[idx[m]]
            return out
        out = np.where(idx <= self.split, float(self.left), float(self.right))
        for l, v in self.exceptions.items():
            out = np.where(idx == l, v, out)
        return out

    def log_sum(self, lo: int, hi: int) -> float:
        """``sum_{j=lo}^{hi} log w_j`` in closed form (0 for empty ranges)."""
        if hi < lo:
            return 0.0
        k = self.kind
        count = hi - lo + 1
        if k is WeightKind.CONSTANT:
            return count * math.log(self.c)
        if k is WeightKind.POWER_LAW_P4:
            if hi < 1:
                return 0.0
            return self.exponent * (math.log(hi + 1) - math.log(max(lo, 1)))
        if k is WeightKind.POWER_LAW_P6:
            return self.exponent * (math.log(hi + 2) - math.log(lo + 1))
        if k is WeightKind.HEAD_CONST_TAIL:
            nh = len(self.head)
            s = 0.0
            if lo < nh:
                s += math.fsum(math.log(h) for h in self.head[lo:min(hi, nh - 1) + 1])
            ntail = hi - max(lo, nh) + 1
            if ntail > 0:
                s += ntail * math.log(self.tail)
            return s
        n_left = max(0, min(hi, self.split) - lo + 1)
        n_right = count - n_left
        s = n_left * math.log(self.left) + n_right * math.log(self.right)
        for l, v in self.exceptions.items():
            if lo <= l <= hi:
                s += math.log(v) - math.log(self.left if l <= self.split else self.right)
        return s

    def sup(self) -> float:
        k = self.kind
        if k is WeightKind.CONSTANT:
            return float(self.c)
        if k in (WeightKind.POWER_LAW_P4, WeightKind.POWER_LAW_P6):
            # both families decrease in n; the maximum is 2^(gamma/p)
            return 2.0 ** self.exponent
        if k is WeightKind.HEAD_CONST_TAIL:
            return max((*self.head, self.tail))
        return max((self.left, self.right, *self.exceptions.values()))

    def to_json(self) -> dict:
        k = self.kind
        out: dict = {"kind": k.value}
        if k in (WeightKind.POWER_LAW_P4, WeightKind.POWER_LAW_P6):
            out.update(gamma=self.gamma, p=self.p)
        elif k is WeightKind.CONSTANT:
            out.update(c=self.c)
        elif k is WeightKind.HEAD_CONST_TAIL:
            out.update(head=list(self.head), tail=self.tail)
        else:
            out.update(left=self.left, right=self.right, split=self.split,
                       exceptions=[[l, v] for l, v in sorted(self.exceptions.items())])
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "WeightRule":
        kind = WeightKind(obj["kind"])
        if kind in (WeightKind.POWER_LAW_P4, WeightKind.POWER_LAW_P6):
            return cls(kind, gamma=float(obj["gamma"]), p=float(obj["p"]))
        if kind is WeightKind.CONSTANT:
            return cls(kind, c=float(obj["c"]))
        if kind is WeightKind.HEAD_CONST_TAIL:
            return cls(kind, head=tuple(obj.get("head", ())), tail=float(obj["tail"]))
        exc = obj.get("exceptions", [])
        if isinstance(exc, dict):
            exc = exc.items()
        return cls(kind, left=float(obj["left"]), right=float(obj["right"]),
                   split=int(obj.get("split", 0)), exceptions={int(l): float(v) for l, v in exc})


def _check_positive(name, v):
    if v is None or not (math.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class WeightedShiftOperator:
    direction: Direction
    weights: WeightRule | None = None
    identity_domain: IndexDomain = IndexDomain.NATURALS

    def __post_init__(self):
        d = Direction(self.direction)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "identity_domain", IndexDomain(self.identity_domain))
        if d is not Direction.IDENTITY and self.weights is None:
            raise ValueError("a shift needs a weight rule")
        if d is Direction.BACKWARD_N and self.weights.kind is WeightKind.TWO_SIDED:
            raise ValueError("two-sided weights apply to the forward shift on Z")
        if d is Direction.FORWARD_Z and self.weights.kind in (
                WeightKind.POWER_LAW_P4, WeightKind.POWER_LAW_P6, WeightKind.HEAD_CONST_TAIL):
            raise ValueError(f"{self.weights.kind.value} weights are indexed by N")

    @classmethod
    def backward(cls, weights: WeightRule) -> "WeightedShiftOperator":
        return cls(Direction.BACKWARD_N, weights)

    @classmethod
    def forward(cls, weights: WeightRule) -> "WeightedShiftOperator":
        return cls(Direction.FORWARD_Z, weights)

    @classmethod
    def identity(cls, domain=IndexDomain.NATURALS) -> "WeightedShiftOperator":
        return cls(Direction.IDENTITY, None, domain)

    @property
    def domain(self) -> IndexDomain:
        if self.direction is Direction.BACKWARD_N:
            return IndexDomain.NATURALS
        if self.direction is Direction.FORWARD_Z:
            return IndexDomain.INTEGERS
        return self.identity_domain

    def to_json(self) -> dict:
        out = {"direction": self.direction.value}
        if self.direction is Direction.IDENTITY:
            out["domain"] = self.identity_domain.value
        else:
            out["weights"] = self.weights.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "WeightedShiftOperator":
        d = Direction(obj["direction"])
        if d is Direction.IDENTITY:
            return cls.identity(IndexDomain(obj.get("domain", "N")))
        return cls(d, WeightRule.from_json(obj["weights"]))


@dataclass(frozen=True)
class RateParams:
    eta_minus: float
    eta_plus: float
    q_minus: int = 0
    q_plus: int = 1

    def __post_init__(self):
        if not (0 < self.eta_minus < 1 and 0 < self.eta_plus < 1):
            raise RateConditionError(
                f"need 0 < eta < 1, got eta_minus={self.eta_minus}, eta_plus={self.eta_plus}")
        if self.q_minus < 0 or self.q_plus < 1:
            raise ValueError("need q_minus >= 0 and q_plus >= 1")


def weight(T: WeightedShiftOperator, index: int) -> float:
    """Weight ``w_index`` of the shift."""
    if T.direction is Direction.IDENTITY:
        return 1.0
    if T.direction is Direction.BACKWARD_N and index < 0:
        raise DomainError(f"backward shift weights are indexed by N, got {index}")
    return float(T.weights.values(np.array([index]))[0])


def weight_product(T: WeightedShiftOperator, lo, hi) -> np.ndarray:
    """``prod_{j=lo}^{hi} w_j`` for arrays of ranges of equal length.

    Short products are multiplied directly; long ones go through log space.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
    if T.direction is Direction.IDENTITY:
        return np.ones(lo.shape)
    length = int(hi[0] - lo[0] + 1) if lo.size else 0
    if length <= 0:
        return np.ones(lo.shape)
    if length <= _DIRECT_PRODUCT_MAX:
        idx = lo[:, None] + np.arange(length)[None, :]
        return np.prod(T.weights.values(idx), axis=1)
    logs = np.array([T.weights.log_sum(int(a), int(b)) for a, b in zip(lo, hi)])
    with np.errstate(over="ignore"):
        return np.exp(logs)


def adjoint_power(T: WeightedShiftOperator, n: int, f: DualFunctional) -> DualFunctional:
    """Exact ``T*^n f``.

    Examples
    --------
    >>> T = WeightedShiftOperator.backward(WeightRule.constant(2.0))
    >>> adjoint_power(T, 3, DualFunctional({0: 1})).coeffs[3]
    (8+0j)
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if f.domain != T.domain:
        raise DomainError(f"operator acts on {T.domain.value}, functional lives on {f.domain.value}")
    if n == 0 or not f or T.direction is Direction.IDENTITY:
        return f
    idx, val = f.arrays()
    if T.direction is Direction.BACKWARD_N:
        fac = weight_product(T, idx, idx + n - 1)
        new_idx = idx + n
    else:
        fac = weight_product(T, idx - n + 1, idx)
        new_idx = idx - n
    with np.errstate(over="ignore", invalid="ignore"):
        out = val * fac
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"T*^{n} f has coefficients beyond the floating-point range")
    return DualFunctional.from_arrays(new_idx, out, f.domain)


def apply_power(T: WeightedShiftOperator, n: int, coords: np.ndarray, first_index: int):
    """Apply ``T^n`` to a dense window of coordinates.

    ``coords[..., i]`` holds the coordinate at index ``first_index + i``. Returns
    ``(new_coords, new_first_index)``; for the backward shift the window shrinks
    because coordinates below the window are unknown after shifting down.
    """
    coords = np.asarray(coords)
    if n == 0 or T.direction is Direction.IDENTITY:
        return coords, first_index
    width = coords.shape[-1]
    if T.direction is Direction.BACKWARD_N:
        # (T^n z)_k = z_{k+n} prod_{j=k}^{k+n-1} w_j
        if width <= n:
            return coords[..., :0], first_index
        k = first_index + np.arange(width - n)
        k = k[k >= 0]
        fac = weight_product(T, k, k + n - 1)
        src = k + n - first_index
        return coords[..., src] * fac, int(k[0]) if k.size else first_index
    # forward on Z: (T^n z)_k = z_{k-n} prod_{j=k-n+1}^{k} w_j
    k = first_index + n + np.arange(width)
    fac = weight_product(T, k - n + 1, k)
    return coords * fac, first_index + n


def apply_to_atom(T: WeightedShiftOperator, index: int) -> tuple[int, float] | None:
    """Image of ``e_index`` as ``(new_index, factor)``; ``None`` when it is 0."""
    if T.direction is Direction.IDENTITY:
        return index, 1.0
    if T.direction is Direction.BACKWARD_N:
        if index == 0:
            return None
        return index - 1, weight(T, index - 1)
    return index + 1, weight(T, index + 1)


def operator_norm_bound(T: WeightedShiftOperator) -> float:
    """Operator norm of the shift, equal to the supremum of its weights."""
    if T.direction is Direction.IDENTITY:
        return 1.0
    return T.weights.sup()


def rate_params(T: WeightedShiftOperator) -> RateParams:
    """Contraction rates ``eta_-``, ``eta_+`` of a forward shift on Z.

    ``eta_- = sup_{l <= -q_-} 1/w_l`` and ``eta_+ = sup_{l >= q_+} w_l``, with
    ``q_-``, ``q_+`` the smallest offsets beyond every listed exception.
    """
    if T.direction is not Direction.FORWARD_Z:
        raise ValueError("rate parameters are defined for the forward shift on Z")
    w = T.weights
    if w.kind is WeightKind.CONSTANT:
        left = right = w.c
        q_minus, q_plus = 0, 1
    else:
        left, right = w.left, w.right
        keys = list(w.exceptions)
        q_minus = max([0, -w.split] + [1 - h for h in keys])
        q_plus = max([1, w.split + 1] + [h + 1 for h in keys])
    eta_minus, eta_plus = 1.0 / left, right
    if not eta_minus < 1:
        raise RateConditionError(f"eta_minus = {eta_minus} is not < 1")
    if not eta_plus < 1:
        raise RateConditionError(f"eta_plus = {eta_plus} is not < 1")
    return RateParams(eta_minus, eta_plus, q_minus, q_plus)
