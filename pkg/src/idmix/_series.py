"""Positive sequences with an explicit head and an analytic tail.

Every sequence used by the measure families is stored as a finite head
followed by one of three tails: identically zero, geometric ``A r^m`` or
power law ``A (m + c)^(-beta)``. Sums over the whole sequence are then an
explicit finite part plus a closed form (geometric) or a certified
Euler-Maclaurin bracket (power law).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

# Terms summed explicitly past the head before switching to the tail model.
_WINDOW = 4096
# Cross terms on Z are summed explicitly; refuse absurd shift lengths.
_MAX_EXPLICIT = 10_000_000


class DivergentSeriesError(ValueError):
    """Raised when a requested sum does not converge."""


class TruncationError(RuntimeError):
    """Raised when a sum cannot be certified within the term budget."""


@dataclass(frozen=True)
class Tail:
    kind: str  # "zero" | "geom" | "power"
    A: float = 0.0
    r: float = 0.0
    c: float = 0.0
    beta: float = 0.0

    def values(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(m)
        if self.kind == "geom":
            return self.A * np.power(self.r, m)
        with np.errstate(divide="ignore"):
            return self.A * np.power(m + self.c, -self.beta)

    def in_ls(self, s: float) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "geom":
            return self.r < 1
        return self.beta * s > 1


ZERO_TAIL = Tail("zero")


@dataclass(frozen=True)
class OneSided:
    """Sequence ``S(m)``, ``m >= 0``: ``head[m]`` for ``m < len(head)``, tail after."""

    head: tuple
    tail: Tail

    @property
    def H(self) -> int:
        return len(self.head)

    def values(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        out = self.tail.values(m)
        if self.H:
            h = np.asarray(self.head, dtype=float)
            inside = m < self.H
            out = np.where(inside, h[np.minimum(m, self.H - 1)], out)
        return out

    def in_ls(self, s: float) -> bool:
        return self.tail.in_ls(s)

    def power_sum(self, power: float, start: int = 0) -> float:
        """Upper bound on ``sum_{m >= start} S(m)^power`` (exact up to rounding
        except for power-law tails, where it is a certified upper bracket)."""
        return self.overlap(power, 0.0, 0, start)

    def overlap(self, a: float, b: float, n: int, start: int = 0) -> float:
        """Upper bound on ``sum_{m >= start} S(m)^a S(m+n)^b``."""
        lo, hi = self.overlap_bracket(a, b, n, start)
        return hi

    def overlap_bracket(self, a: float, b: float, n: int, start: int = 0) -> tuple[float, float]:
        if n < 0:
            raise ValueError("n must be >= 0")
        t = self.tail
        if t.kind != "zero" and not t.in_ls(a + b):
            raise DivergentSeriesError(f"sum of S^{a} S^{b} diverges for this tail")
        # explicit part: indices where S(m) or S(m+n) still reads the head,
        # plus a window that tightens the power-law bracket
        first_tail = max(start, self.H)
        end = first_tail + (_WINDOW if t.kind == "power" else 0)
        explicit = 0.0
        if end > start:
            m = np.arange(start, end)
            explicit = _fsum(_pw(self.values(m), a) * _pw(self.values(m + n), b))
        if t.kind == "zero":
            return explicit, explicit
        if t.kind == "geom":
            # sum_{m>=end} A^{a+b} r^{b n} r^{(a+b) m}
            q = t.r ** (a + b)
            val = t.A ** (a + b) * t.r ** (b * n) * q ** end / (1.0 - q)
            return explicit + val, explicit + val
        lo, hi = _power_tail_bracket(t.A, t.c, t.beta, a, b, n, end)
        return explicit + lo, explicit + hi


def _pw(x, a):
    if a == 0:
        return np.ones_like(x)
    return np.power(x, a)


def _fsum(x) -> float:
    return math.fsum(np.asarray(x, dtype=float).tolist())


def _power_tail_bracket(A, c, beta, a, b, n, start):
    """Bracket for ``sum_{m >= start} A^{a+b} (m+c)^{-a beta} (m+c+n)^{-b beta}``.

    The summand ``f`` is completely monotone, so Euler-Maclaurin truncated
    after the first derivative term over-estimates while the trapezoid part
    under-estimates.
    """
    u, v = a * beta, b * beta
    X = start + c
    if X <= 0:
        raise ValueError("power-law tail must start at a positive abscissa")
    integral = power_pair_integral(u, v, n, X)
    f = X ** (-u) * (X + n) ** (-v)
    fprime = f * (-u / X - (v / (X + n) if v else 0.0))
    scale = A ** (a + b)
    return scale * (integral + f / 2), scale * (integral + f / 2 - fprime / 12)


def power_pair_integral(u: float, v: float, n: float, X: float) -> float:
    """``int_X^inf x^(-u) (x+n)^(-v) dx`` for ``u + v > 1``."""
    if u + v <= 1:
        raise DivergentSeriesError("power-law pair integral diverges")
    if n == 0 or v == 0:
        return X ** (1 - u - v) / (u + v - 1)
    if u == 0:
        return (X + n) ** (1 - v) / (v - 1)
    # s = n / (x + n) maps [X, inf) onto (0, s0]
    s0 = n / (X + n)
    pa, pb = u + v - 1, 1 - u
    if pb > 0:
        return n ** (1 - u - v) * special.beta(pa, pb) * special.betainc(pa, pb, s0)
    val, _ = integrate.quad(lambda s: s ** (pa - 1) * (1 - s) ** (-u), 0, s0,
                            epsabs=0, epsrel=1e-13, limit=200)
    return n ** (1 - u - v) * val


@dataclass(frozen=True)
class Resolved:
    """A sequence on N (``left is None``) or on Z.

    On Z, ``right`` carries indices ``n >= 0`` and ``left`` carries
    ``n = -m - 1`` for ``m >= 0``.
    """

    right: OneSided
    left: OneSided | None = None

    @property
    def two_sided(self) -> bool:
        return self.left is not None

    def values(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self.left is None:
            if np.any(idx < 0):
                raise IndexError("negative index for a sequence on N")
            return self.right.values(idx)
        out = np.empty(idx.shape, dtype=float)
        pos = idx >= 0
        out[pos] = self.right.values(idx[pos])
        out[~pos] = self.left.values(-idx[~pos] - 1)
        return out

    def in_ls(self, s: float) -> bool:
        return self.right.in_ls(s) and (self.left is None or self.left.in_ls(s))

    def power_sum(self, power: float, start: int = 0) -> float:
        """Upper bound on the sum of ``s_n^power`` over ``|n| >= start``."""
        total = self.right.power_sum(power, start)
        if self.left is not None:
            total += self.left.power_sum(power, max(start - 1, 0))
        return total

    def overlap(self, a: float, b: float, n: int) -> float:
        """Upper bound on ``sum_l s_l^a s_{l+n}^b`` over the whole index set."""
        if n < 0:
            raise ValueError("n must be >= 0")
        total = self.right.overlap(a, b, n)
        if self.left is None:
            return total
        if n > _MAX_EXPLICIT:
            raise TruncationError(f"shift {n} exceeds the explicit cross-term budget")
        if n:
            l = np.arange(-n, 0)
            total += _fsum(_pw(self.values(l), a) * _pw(self.values(l + n), b))
        # both indices negative: l = -m-1-n, l+n = -m-1 with m >= 0
        total += self.left.overlap(b, a, n)
        return total
