"""Seeded samplers and Monte Carlo estimators (verification plumbing).

Randomness is counter based: the generator for a coordinate inside a sample
block is a Philox stream keyed by ``(seed, stream, coordinate, component,
block)``. A coordinate's draws therefore do not depend on the truncation
window, and a block's draws do not depend on which worker produces it.
Blocks have a fixed size and are reduced in block order, so estimates are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .codiff import ExpSeriesObservable
from .measures import (CompoundPoisson, MeasureSpec, SymmetricAlphaStable, TemperedExponentParams,
                       TemperedStable, series_tail_bound, tempered_drift)
from .seqspace import DualFunctional, IndexDomain
from .shifts import WeightedShiftOperator, adjoint_power, apply_power

BLOCK_SIZE = 4096
MAX_REJECTION_ROUNDS = 10_000

# component ids of the per-coordinate streams
_C_JUMP, _C_RE, _C_IM, _C_PLUS, _C_MINUS, _C_GAUSS = range(6)


class RejectionCapError(RuntimeError):
    """The tilting rejection loop did not fill the request in time."""


@dataclass(frozen=True)
class RngSpec:
    """``(seed, stream)`` determines every sample path."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2 ** 64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")

    def generator(self, coord: int = 0, component: int = 0, block: int = 0) -> np.random.Generator:
        # zigzag keeps negative indices on Z inside the unsigned key space
        z = 2 * coord if coord >= 0 else -2 * coord - 1
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), z, component, block))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleVector:
    """Samples of the coordinates ``first_index .. first_index + width - 1``.

    ``coords`` has shape ``(samples, width)``. ``tail_bound`` bounds the
    expected l^p mass of the dropped coordinates (compound Poisson) or the
    dropped control mass ``sum k_n^alpha`` (stable and tempered laws).
    """

    truncation_N: int
    first_index: int
    coords: np.ndarray
    tail_bound: float

    def pair(self, f: DualFunctional) -> np.ndarray:
        """``<X, f> = sum_k X_k f_k`` for every sample."""
        idx, val = f.arrays()
        out = np.zeros(self.coords.shape[0], dtype=complex)
        if not idx.size:
            return out
        pos = idx - self.first_index
        if pos.min() < 0 or pos.max() >= self.coords.shape[1]:
            raise IndexError("functional support outside the sampled window")
        return self.coords[:, pos] @ val


@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr: float
    samples: int

    def to_json(self) -> dict:
        return {"value": [self.value.real, self.value.imag], "stderr": self.stderr,
                "samples": self.samples}


# ---------------------------------------------------------------------------
# scalar samplers


def sample_sas(alpha: float, scale: float, rng: np.random.Generator, size=None):
    """Symmetric alpha-stable draws with ``E e^{itS} = exp(-scale^alpha |t|^alpha)``."""
    if not (0 < alpha < 2 and alpha != 1):
        raise ValueError("alpha must lie in (0, 2) minus {1}")
    if not scale > 0:
        raise ValueError("scale must be > 0")
    # beta = 0: the S0 and S1 parameterizations coincide
    return stats.levy_stable.rvs(alpha, 0.0, loc=0.0, scale=scale, size=size, random_state=rng)


def _positive_stable(alpha: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Kanter's representation: Laplace transform ``exp(-s^alpha)``."""
    u = rng.uniform(0.0, math.pi, size)
    w = rng.standard_exponential(size)
    a = (np.sin(alpha * u) ** (alpha / (1 - alpha)) * np.sin((1 - alpha) * u)
         / np.sin(u) ** (1 / (1 - alpha)))
    return (a / w) ** ((1 - alpha) / alpha)


def sample_one_sided_tempered(params: TemperedExponentParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """One-sided tempered stable draws with log-CF ``tempered_exponent(params, t)``
    for the plus side (a positive variable in both cases).

    Draws a positive stable with Laplace transform ``exp(-sigma s^alpha)``,
    ``sigma = -a Gamma(-alpha)``, and accepts with probability
    ``exp(-lam X)``; the acceptance rate is ``exp(-sigma lam^alpha)``.
    """
    al = params.alpha
    sigma = -params.a * special.gamma(-al)
    scale = sigma ** (1 / al)
    out = np.empty(size)
    filled = 0
    batch = max(64, int(size * min(50.0, math.exp(sigma * params.lam ** al)) * 1.2))
    for _ in range(MAX_REJECTION_ROUNDS):
        if filled >= size:
            return out
        x = scale * _positive_stable(al, rng, batch)
        keep = x[rng.uniform(size=batch) < np.exp(-params.lam * x)]
        take = min(keep.size, size - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    if filled >= size:
        return out
    raise RejectionCapError(f"tilting rejection accepted {filled}/{size} draws")


def sample_tempered(params: tuple, k_n: float, rng_plus: np.random.Generator,
                    rng_minus: np.random.Generator, size: int, drift: float = 0.0) -> np.ndarray:
    """``k_n (theta_+ - theta_- - drift)`` for a ``(plus, minus)`` parameter pair."""
    plus, minus = params
    th = sample_one_sided_tempered(plus, rng_plus, size) - sample_one_sided_tempered(minus, rng_minus, size)
    return k_n * (th - drift)


# ---------------------------------------------------------------------------
# series samplers


def _window(m: MeasureSpec, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("truncation N must be >= 1")
    if m.domain is IndexDomain.INTEGERS:
        return np.arange(-N, N + 1)
    return np.arange(N)


def _gaussian(m, idx, rng: RngSpec, size, block):
    if m.gaussian_diag is None:
        return 0.0
    r = m.gaussian_diag.values(idx)
    cols = []
    for i, rr in zip(idx, r):
        z = rng.generator(int(i), _C_GAUSS, block).standard_normal((2, size))
        cols.append(math.sqrt(rr / 2) * (z[0] + 1j * z[1]))
    return np.stack(cols, axis=1)


def _sample_coords(m: MeasureSpec, idx: np.ndarray, rng: RngSpec, size: int, block: int) -> np.ndarray:
    """Samples of the coordinates ``idx``; column ``j`` only uses the stream of ``idx[j]``."""
    cols = []
    if isinstance(m, CompoundPoisson):
        lam = m.lam.values(idx)
        for i, l in zip(idx, lam):
            cols.append(l * rng.generator(int(i), _C_JUMP, block).poisson(1.0, size).astype(float) + 0j)
    elif isinstance(m, SymmetricAlphaStable):
        k = m.k.values(idx)
        c = 2 ** (-1 / m.alpha)
        for i, kk in zip(idx, k):
            s1 = sample_sas(m.alpha, 1.0, rng.generator(int(i), _C_RE, block), size)
            s2 = sample_sas(m.alpha, 1.0, rng.generator(int(i), _C_IM, block), size)
            cols.append(kk * c * (s1 + 1j * s2))
    elif isinstance(m, TemperedStable):
        k = m.k.values(idx)
        pair = (m.side("plus"), m.side("minus"))
        d = tempered_drift(m)
        for i, kk in zip(idx, k):
            parts = []
            for comp in (0, 1):
                g_plus = rng.generator(int(i), _C_PLUS + 8 * comp, block)
                g_minus = rng.generator(int(i), _C_MINUS + 8 * comp, block)
                parts.append(sample_tempered(pair, kk, g_plus, g_minus, size, d))
            cols.append(parts[0] + 1j * parts[1])
    else:
        raise TypeError(type(m).__name__)
    out = np.stack(cols, axis=1) if cols else np.zeros((size, 0), dtype=complex)
    return out + _gaussian(m, idx, rng, size, block) if cols else out


def _tail(m: MeasureSpec, N: int) -> float:
    if isinstance(m, CompoundPoisson):
        # E N^p <= (E N)^(2-p) (E N^2)^(p-1) = 2^(p-1) for unit Poisson
        return 2 ** (m.p - 1) * series_tail_bound(m.lam, m.p, N)
    start = N + 1 if m.domain is IndexDomain.INTEGERS else N
    mass = series_tail_bound(m.k, m.alpha, start)
    return 2 * mass if isinstance(m, TemperedStable) else mass


def _series(m, N, rng, size, block):
    idx = _window(m, N)
    first = int(idx[0])
    return SampleVector(N, first, _sample_coords(m, idx, rng, size, block), _tail(m, N))


def sample_poisson_cp(m: CompoundPoisson, N: int, rng: RngSpec, size: int = 1, block: int = 0) -> SampleVector:
    """Coordinates ``lambda_n N_n`` (``N_n`` unit Poisson) for ``n < N``."""
    return _series(m, N, rng, size, block)


def sample_stable_series(m: SymmetricAlphaStable, N: int, rng: RngSpec, size: int = 1,
                         block: int = 0) -> SampleVector:
    """Coordinates ``k_n 2^(-1/alpha) (S_1 + i S_2)`` for ``|n| <= N``."""
    return _series(m, N, rng, size, block)


def sample_tempered_series(m: TemperedStable, N: int, rng: RngSpec, size: int = 1,
                           block: int = 0) -> SampleVector:
    """Coordinates ``k_n (theta_1 + i theta_2)`` for ``n < N``."""
    return _series(m, N, rng, size, block)


def choose_truncation(m: MeasureSpec, tol: float = 1e-4, minimum: int = 1) -> int:
    """Smallest ``N >= minimum`` (doubling search) whose tail bound is below ``tol``."""
    N = max(1, minimum)
    while _tail(m, N) >= tol:
        N *= 2
        if N > 1 << 24:
            raise RuntimeError("truncation search did not converge")
    return N


# ---------------------------------------------------------------------------
# estimators


def _blocks(M: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK_SIZE, M - b * BLOCK_SIZE)) for b in range((M + BLOCK_SIZE - 1) // BLOCK_SIZE)]


def _run_blocks(fn, M: int, workers: int) -> np.ndarray:
    blocks = _blocks(M)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: fn(*b), blocks))
    else:
        parts = [fn(*b) for b in blocks]
    return np.concatenate(parts, axis=0)


def _window_for(m: MeasureSpec, fs) -> tuple[np.ndarray, int]:
    """Dense index window covering the supports of ``fs``."""
    ks = [k for f in fs for k in f.coeffs]
    if not ks:
        return np.array([0]), 0
    lo, hi = min(ks), max(ks)
    return np.arange(lo, hi + 1), lo


def _stderr(v: np.ndarray) -> float:
    M = v.shape[0]
    return float(math.sqrt((np.var(v.real, ddof=1) + np.var(v.imag, ddof=1)) / M))


def estimate_cf(m: MeasureSpec, f: DualFunctional, M: int, rng: RngSpec, *,
                workers: int = 1) -> MCEstimate:
    """Sample mean of ``exp(i Re <X, f>)``; only the support of ``f`` is sampled."""
    if M < 100:
        raise ValueError("M must be >= 100")
    idx, first = _window_for(m, [f])

    def block(b, size):
        X = SampleVector(len(idx), first, _sample_coords(m, idx, rng, size, b), 0.0)
        return np.exp(1j * X.pair(f).real)

    v = _run_blocks(block, M, workers)
    return MCEstimate(complex(np.mean(v)), _stderr(v), M)


def estimate_In(m: MeasureSpec, T: WeightedShiftOperator, fobs: ExpSeriesObservable,
                gobs: ExpSeriesObservable, n: int, M: int, rng: RngSpec, *,
                workers: int = 1) -> MCEstimate:
    """Plug-in estimate of ``E f(X) g(T^n X) - E f(X) E g(X)``.

    ``T^n X`` is the forward application of the shift to the sampled window,
    which covers every coordinate that the observables read after shifting.
    The standard error comes from the delta method on the three means.
    """
    if M < 100:
        raise ValueError("M must be >= 100")
    if n < 0:
        raise ValueError("n must be >= 0")
    f_funcs = [adjoint_power(T, t.power, t.base) for t in fobs.terms]
    g_funcs = [adjoint_power(T, t.power, t.base) for t in gobs.terms]
    needed = f_funcs + g_funcs + [adjoint_power(T, n, g) for g in g_funcs]
    idx, first = _window_for(m, needed)

    def block(b, size):
        X = SampleVector(len(idx), first, _sample_coords(m, idx, rng, size, b), 0.0)
        coords, first_n = apply_power(T, n, X.coords, first)
        Y = SampleVector(len(idx), first_n, coords, 0.0)
        F = fobs.evaluate_samples(T, X.pair)
        G0 = gobs.evaluate_samples(T, X.pair)
        Gn = gobs.evaluate_samples(T, Y.pair)
        F, G0, Gn = (np.broadcast_to(a, (size,)) for a in (F, G0, Gn))
        return np.stack([F * Gn, F, G0], axis=1)

    v = _run_blocks(block, M, workers)
    mfg, mf, mg = v.mean(axis=0)
    est = mfg - mf * mg
    infl = (v[:, 0] - mfg) - mg * (v[:, 1] - mf) - mf * (v[:, 2] - mg)
    return MCEstimate(complex(est), _stderr(infl), M)


def estimate_codiff(m: MeasureSpec, x: DualFunctional, y: DualFunctional, M: int, rng: RngSpec, *,
                    workers: int = 1) -> MCEstimate:
    """Plug-in estimate of ``C^=(x, y)`` from empirical characteristic functionals.

    ``log E[A B] - log E[A] - log E[B]`` with ``A = exp(i Re<X, x>)`` and
    ``B = exp(-i Re<X, y>)``; the standard error uses the delta method.
    """
    if M < 100:
        raise ValueError("M must be >= 100")
    idx, first = _window_for(m, [x, y])

    def block(b, size):
        X = SampleVector(len(idx), first, _sample_coords(m, idx, rng, size, b), 0.0)
        A = np.exp(1j * X.pair(x).real)
        B = np.exp(-1j * X.pair(y).real)
        return np.stack([A * B, A, B], axis=1)

    v = _run_blocks(block, M, workers)
    mab, ma, mb = v.mean(axis=0)
    est = np.log(mab) - np.log(ma) - np.log(mb)
    infl = (v[:, 0] - mab) / mab - (v[:, 1] - ma) / ma - (v[:, 2] - mb) / mb
    return MCEstimate(complex(est), _stderr(infl), M)
