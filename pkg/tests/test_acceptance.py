"""Acceptance criteria 1-9.

Each criterion runs at its stated tolerance and runtime limit and prints one
``criterion k: PASS/FAIL`` line (visible with ``pytest -s`` or in the captured
output of ``pytest -v``). Criterion 9 reruns 1-8 and compares the serialized
results byte for byte, once with the same worker count and once with 4 workers.
"""

import contextlib
import functools
import io
import math
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from idmix.bounds import bound_for_pair, envelope_base, specfun_beta, temp_shift_bound
from idmix.cli import dumps, main
from idmix.codiff import (ExpSeriesObservable, ObsTerm, SignFn, codiff_equal, codiff_notequal,
                          exact_In, fit_decay)
from idmix.mc import RngSpec, estimate_cf, estimate_In
from idmix.measures import (CompoundPoisson, Drift, SeqSpec, TemperedExponentParams, TemperedStable,
                            log_cf, tempered_exponent)
from idmix.seqspace import DualFunctional, IndexDomain, conjugate_exponent, dual_norm
from idmix.shifts import RateParams, WeightedShiftOperator, WeightRule, adjoint_power

from conftest import ACCEPTANCE_LINES, PAIRS, poisson_pair, random_functional, stable_pair

Z = IndexDomain.INTEGERS
CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"
ENVELOPE = envelope_base(RateParams(0.5, 0.5), 1.5, 1.6) ** (1.5 / 2)  # 0.5452^0.75


def _plain(obj):
    """Complex numbers as ``[re, im]`` so payloads serialize to JSON."""
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def serialize(payload) -> str:
    return dumps(_plain(payload))


def _line(k, ok, detail, elapsed, limit):
    in_time = limit is None or elapsed < limit
    status = "PASS" if ok and in_time else "FAIL"
    budget = "" if limit is None else f" (limit {limit:g}s)"
    line = f"criterion {k}: {status} {detail}; {elapsed:.2f}s{budget}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok and in_time


# ---------------------------------------------------------------------------
# criteria; each returns (passed, detail, payload) where payload is what
# criterion 9 compares across runs


def criterion_1(workers=1):
    m = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
    T = WeightedShiftOperator.identity()
    ax = DualFunctional({0: 0.5})
    vals = [codiff_equal(m, ax, adjoint_power(T, n, ax)).value for n in range(101)]
    err = max(abs(v - 4) for v in vals)
    with tempfile.TemporaryDirectory() as d, contextlib.redirect_stdout(io.StringIO()):
        code = main(["mixing-verdict", "--config", str(CONFIGS / "resonant_atom.json"), "--out-dir", d,
                     "--workers", str(workers)])
        report = (Path(d) / "mixing_verdict.json").read_text()
    ok = err < 1e-12 and code == 0 and '"verdict": "NotMixing"' in report
    return ok, f"max |C - 4| = {err:.2e}, verdict file ok = {ok}", {"values": vals, "report": report}


def criterion_2(workers=1):
    B = specfun_beta(0.25, 0.5)
    L, n_max = 200_000, 1000
    a = (np.arange(L + n_max, dtype=float) + 1) ** -0.75
    tail = 2 / math.sqrt(L)  # sum_{l >= L} (l+1)^{-3/2} <= int_L^inf x^{-3/2} dx
    sums = np.array([np.dot(a[:L], a[n:n + L]) for n in range(1, n_max + 1)]) + tail
    ns = np.arange(1, n_max + 1)
    rate = B * ns ** -0.5
    sum_ok = bool(np.all(sums <= rate))

    m, T = poisson_pair()
    q = conjugate_exponent(m.p)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        x = random_functional(rng, hi=8, size=int(rng.integers(1, 6)))
        y = random_functional(rng, hi=8, size=int(rng.integers(1, 6)))
        norm = (dual_norm(x, q) * dual_norm(y, q)) ** (m.p / 2)
        yn = y
        for n in range(1, n_max + 1):
            yn = adjoint_power(T, 1, yn)
            if min(yn.coeffs) > max(x.coeffs):
                break  # supports stay disjoint from here on
            c = abs(codiff_equal(m, x, yn).value) / norm
            worst = max(worst, c / (8 * rate[n - 1]))
    ok = sum_ok and worst <= 1
    return ok, (f"B(0.25,0.5) = {B:.12f}, sums below B n^-1/2: {sum_ok}, "
                f"max normalized |C|/(8 B n^-1/2) = {worst:.3f}"), {"sums": sums.tolist(), "worst": worst}


def criterion_3(workers=1):
    m, T = stable_pair()
    x = DualFunctional({j: 0.9 ** abs(j) for j in range(-80, 81)}, Z)
    y, pts = x, []
    for n in range(0, 61):
        if n >= 5:
            pts.append((n, abs(codiff_equal(m, x, y).value)))
        y = adjoint_power(T, 1, y)
    fit = fit_decay(pts)
    ok = fit.model == "geometric" and fit.rate <= ENVELOPE + 0.02 and fit.r2 >= 0.98
    return ok, (f"model {fit.model}, rate {fit.rate:.4f} <= {ENVELOPE + 0.02:.4f}, "
                f"r2 {fit.r2:.5f}"), {"points": pts, "fit": fit.to_json()}


def criterion_4(workers=1):
    m = TemperedStable(0.5, SeqSpec.geometric(1.0, 0.5))
    T = WeightedShiftOperator.backward(WeightRule.constant(2.0))
    b1 = temp_shift_bound(m.k, m, 1.0, 1)
    target = 32 * math.sqrt(math.pi) * math.sqrt(2)
    rel = abs(b1 - target) / target
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        x = random_functional(rng, hi=6, size=int(rng.integers(1, 5)))
        y = random_functional(rng, hi=6, size=int(rng.integers(1, 5)))
        yn = y
        for n in range(0, 51):
            if n:
                yn = adjoint_power(T, 1, yn)
            bound = bound_for_pair(m, T, x, y, n)
            c = max(abs(codiff_equal(m, x, yn).value), abs(codiff_notequal(m, x, yn).value))
            if c:
                worst = max(worst, c / bound)
    ok = rel < 1e-10 and worst <= 1
    return ok, f"bound(1) rel. error {rel:.1e}, max |C|/bound = {worst:.3f}", {"b1": b1, "worst": worst}


def criterion_5(workers=1):
    rng = np.random.default_rng(5)
    worst, payload = 0.0, {}
    for name in sorted(PAIRS):
        m, T = PAIRS[name]()
        lo = 0 if m.domain is IndexDomain.NATURALS else -6
        defects = []
        for _ in range(50):
            f = random_functional(rng, m.domain, lo, 8, size=int(rng.integers(1, 6)))
            a, b = log_cf(m, adjoint_power(T, 1, f)), log_cf(m, f)
            defects.append(abs(a - b) / (1 + abs(b)))
        worst = max(worst, max(defects))
        payload[name] = defects
    return worst < 1e-10, f"max relative defect {worst:.1e} over 3 pairs x 50 functionals", payload


def _quad_exponent(lam, alpha, t):
    """QUADPACK oracle for the plus-side exponent with a = 1; the linear part of
    the sine integral is integrated in closed form."""
    kw = dict(limit=5000, epsabs=0, epsrel=1e-12)
    U = 120 / lam
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        re = quad(lambda u: (math.cos(u * t) - 1) * math.exp(-lam * u) * u ** (-1 - alpha), 0, U, **kw)[0]
        im = quad(lambda u: (math.sin(u * t) - u * t) * math.exp(-lam * u) * u ** (-1 - alpha), 0, U, **kw)[0]
    return complex(re, im + t * math.gamma(1 - alpha) * lam ** (alpha - 1))


def criterion_6(workers=1):
    worst, vals = 0.0, []
    for alpha in (0.3, 0.5, 0.9):
        for lam in (0.5, 1.0, 2.0):
            for t in (-10.0, -1.0, -0.1, 0.1, 1.0, 10.0):
                v = tempered_exponent(TemperedExponentParams(1.0, lam, alpha), t)
                o = _quad_exponent(lam, alpha, t)
                worst = max(worst, abs(v - o) / abs(o))
                vals.append(v)
    return worst < 1e-8, f"54-point grid, max relative error {worst:.1e}", {"values": vals}


def _stat(estimate, exact, k):
    """One rerun on a fresh stream is permitted."""
    for stream in (0, 1):
        est = estimate(RngSpec(2024, stream))
        z = abs(est.value - exact) / est.stderr
        if z <= k:
            return True, z, stream, est.to_json()
    return False, z, stream, est.to_json()


def criterion_7(workers=1):
    M = 100_000
    results, details, ok = {}, [], True
    cp = CompoundPoisson(SeqSpec.explicit([2 * math.pi]))
    f = DualFunctional({0: 0.5})
    r = _stat(lambda s: estimate_cf(cp, f, M, s, workers=workers), math.exp(-2), 4)
    results["cp"] = r
    ok &= r[0]
    details.append(f"cp z={r[1]:.2f}")
    for name, base in (("stable", {-1: 0.4j, 0: 1.0, 1: -0.5}), ("tempered", {0: 1.0, 1: -0.5j})):
        m, _ = PAIRS[name]()
        zs = []
        for t in (0.25, 0.5, 1.0, 2.0, 4.0):
            g = DualFunctional({k: t * c for k, c in base.items()}, m.domain)
            exact = np.exp(log_cf(m, g, Drift.FULL))
            r = _stat(lambda s: estimate_cf(m, g, M, s, workers=workers), exact, 4)
            results[f"{name}_{t}"] = r
            ok &= r[0]
            zs.append(r[1])
        details.append(f"{name} max z={max(zs):.2f}")
    m, T = stable_pair()
    x = DualFunctional({j: 0.8 ** abs(j) for j in range(-8, 9)}, Z)
    fobs = ExpSeriesObservable((ObsTerm(1.0, SignFn.RE, x, 0), ObsTerm(0.5, SignFn.IM, x, 1)))
    gobs = ExpSeriesObservable.single(x, SignFn.NEG_RE)
    exact = exact_In(m, T, fobs, gobs, 3, workers=workers)
    r = _stat(lambda s: estimate_In(m, T, fobs, gobs, 3, M, s, workers=workers), exact, 3)
    results["In"] = r
    ok &= r[0]
    details.append(f"I_3 z={r[1]:.2f}")
    return bool(ok), ", ".join(details), results


def criterion_8(workers=1):
    m, T = stable_pair()
    x = DualFunctional({j: 2.0 ** -abs(j) for j in range(-2, 3)}, Z)
    fobs = ExpSeriesObservable.geometric(x, SignFn.RE, T, m.p, 1.0, 0.5)
    gobs = ExpSeriesObservable.geometric(x, SignFn.NEG_RE, T, m.p, 1.0, 0.5)
    vals = [exact_In(m, T, fobs, gobs, n, workers=workers) for n in range(5, 61)]
    fit = fit_decay(list(zip(range(5, 61), vals)))
    ok = fit.model == "geometric" and fit.rate <= ENVELOPE + 0.02 and fit.r2 >= 0.95
    return ok, (f"{len(fobs.terms)} terms per series, model {fit.model}, rate {fit.rate:.4f} <= "
                f"{ENVELOPE + 0.02:.4f}, r2 {fit.r2:.5f}"), {"values": vals, "fit": fit.to_json()}


CRITERIA = {1: (criterion_1, 1.0), 2: (criterion_2, 10.0), 3: (criterion_3, 10.0),
            4: (criterion_4, 10.0), 5: (criterion_5, 5.0), 6: (criterion_6, 5.0),
            7: (criterion_7, 120.0), 8: (criterion_8, None)}


@functools.lru_cache(maxsize=None)
def first_run(k):
    fn, limit = CRITERIA[k]
    t0 = time.perf_counter()
    ok, detail, payload = fn()
    elapsed = time.perf_counter() - t0
    return _line(k, ok, detail, elapsed, limit), serialize(payload)


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    passed, _ = first_run(k)
    assert passed


def test_criterion_9_determinism():
    t0 = time.perf_counter()
    mismatches = []
    for k in sorted(CRITERIA):
        ref = first_run(k)[1]
        fn = CRITERIA[k][0]
        for workers in (1, 4):
            if serialize(fn(workers)[2]) != ref:
                mismatches.append((k, workers))
    ok = not mismatches
    detail = "criteria 1-8 byte-identical across reruns and workers {1, 4}" if ok else f"mismatches {mismatches}"
    assert _line(9, ok, detail, time.perf_counter() - t0, None)
