"""Finitely supported dual functionals on sequence spaces.

A dual functional on l^p is stored as a sparse map ``index -> complex``.
The pairing with a basis atom ``scale * e_n`` (or ``scale * i e_n``) is
complex-bilinear, so ``Im<z, y> == Re<z, -i y>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

import numpy as np


class IndexDomain(str, Enum):
    NATURALS = "N"
    INTEGERS = "Z"


class Phase(str, Enum):
    REAL = "re"
    IMAG = "im"


class DomainError(ValueError):
    """Raised when functionals or operators live on incompatible index sets."""


@dataclass(frozen=True)
class DualFunctional:
    """Finitely supported element of the dual space l^q.

    Zero coefficients are dropped on construction, so two functionals that
    represent the same element compare equal.
    """

    coeffs: Mapping[int, complex] = field(default_factory=dict)
    domain: IndexDomain = IndexDomain.NATURALS

    def __post_init__(self):
        domain = IndexDomain(self.domain)
        clean = {}
        for k, v in self.coeffs.items():
            k = int(k)
            v = complex(v)
            if v == 0:
                continue
            if domain is IndexDomain.NATURALS and k < 0:
                raise DomainError(f"negative index {k} in a functional on N")
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"non-finite coefficient at index {k}")
            clean[k] = v
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(clean.items()))))

    @classmethod
    def zero(cls, domain=IndexDomain.NATURALS) -> "DualFunctional":
        return cls({}, domain)

    @classmethod
    def basis(cls, index: int, coeff: complex = 1.0, domain=IndexDomain.NATURALS) -> "DualFunctional":
        return cls({index: coeff}, domain)

    @classmethod
    def from_arrays(cls, indices, values, domain=IndexDomain.NATURALS) -> "DualFunctional":
        return cls(dict(zip(np.asarray(indices).tolist(), np.asarray(values, dtype=complex).tolist())), domain)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.coeffs)

    def __getitem__(self, index: int) -> complex:
        return self.coeffs.get(index, 0j)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __hash__(self):
        return hash((self.domain, tuple(self.coeffs.items())))

    def __eq__(self, other):
        if not isinstance(other, DualFunctional):
            return NotImplemented
        return self.domain == other.domain and dict(self.coeffs) == dict(other.coeffs)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(indices, values)`` as numpy arrays, sorted by index."""
        idx = np.fromiter(self.coeffs.keys(), dtype=np.int64, count=len(self.coeffs))
        val = np.fromiter(self.coeffs.values(), dtype=complex, count=len(self.coeffs))
        return idx, val

    def scale(self, a: complex) -> "DualFunctional":
        return combine(a, self, 0, DualFunctional.zero(self.domain))

    def __neg__(self):
        return self.scale(-1)

    def __add__(self, other):
        return combine(1, self, 1, other)

    def __sub__(self, other):
        return combine(1, self, -1, other)

    def __rmul__(self, a):
        return self.scale(a)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.value,
            "coeffs": [[k, v.real, v.imag] for k, v in self.coeffs.items()],
        }

    @classmethod
    def from_json(cls, obj) -> "DualFunctional":
        if isinstance(obj, str):
            obj = json.loads(obj)
        domain = IndexDomain(obj.get("domain", "N"))
        coeffs = {}
        for entry in obj.get("coeffs", []):
            if len(entry) == 2:
                k, re = entry
                im = 0.0
            else:
                k, re, im = entry
            coeffs[int(k)] = coeffs.get(int(k), 0j) + complex(re, im)
        return cls(coeffs, domain)


@dataclass(frozen=True)
class BasisAtom:
    """The point ``scale * e_index`` (REAL phase) or ``scale * i e_index``."""

    index: int
    phase: Phase = Phase.REAL
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("atom scale must be > 0")
        object.__setattr__(self, "phase", Phase(self.phase))


def pairing(atom: BasisAtom, f: DualFunctional) -> complex:
    """Bilinear dual product ``<atom, f>``."""
    c = f[atom.index]
    if atom.phase is Phase.IMAG:
        return atom.scale * 1j * c
    return atom.scale * c


def re_part(c: complex) -> float:
    return complex(c).real


def im_part(c: complex) -> float:
    return complex(c).imag


def dual_norm(f: DualFunctional, q: float) -> float:
    """l^q norm of the coefficient sequence (``q = inf`` gives the max norm)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if not f:
        return 0.0
    _, vals = f.arrays()
    return float(np.linalg.norm(np.abs(vals), ord=np.inf if math.isinf(q) else q))


def conjugate_exponent(p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return math.inf
    return p / (p - 1)


def combine(a: complex, f: DualFunctional, b: complex, g: DualFunctional) -> DualFunctional:
    """Return ``a*f + b*g`` in canonical form."""
    if f.domain != g.domain:
        raise DomainError(f"cannot combine functionals on {f.domain.value} and {g.domain.value}")
    out: dict[int, complex] = {}
    if a != 0:
        for k, v in f.coeffs.items():
            out[k] = a * v
    if b != 0:
        for k, v in g.coeffs.items():
            out[k] = out.get(k, 0j) + b * v
    return DualFunctional(out, f.domain)
