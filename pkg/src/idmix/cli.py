"""Command-line front end: config ingestion, decay reports, CSV/JSON/SVG output.

Exit codes: 0 success, 1 validation failure, 2 numerical failure (including a
row whose codifference exceeds its bound), 3 malformed config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as B
from ._series import DivergentSeriesError, TruncationError
from .codiff import (ExpSeriesObservable, ObsTerm, SignFn, codiff_equal, codiff_notequal,
                     exact_In, fit_decay, truncation_bound)
from .mc import RejectionCapError, RngSpec, estimate_codiff, estimate_In
from .measures import (CompoundPoisson, Drift, MeasureSpec, SymmetricAlphaStable, TemperedStable,
                       log_cf, measure_from_json, validate)
from .mixing import mixing_verdict
from .seqspace import DomainError, DualFunctional
from .shifts import Direction, RateConditionError, WeightedShiftOperator, adjoint_power

COLUMNS = ("n", "codiff_eq_re", "codiff_eq_im", "codiff_neq_re", "codiff_neq_im",
           "bound", "rate_formula", "mc_value", "mc_stderr")
SERIES_COLUMNS = ("n", "in_re", "in_im", "truncation_bound", "mc_re", "mc_im", "mc_stderr")
FLOAT_FMT = "%.16e"
OUT_DIR_ENV = "IDMIX_OUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3
NUMERIC_ERRORS = (DivergentSeriesError, TruncationError, B.BoundDomainError, RateConditionError,
                  RejectionCapError, FloatingPointError, OverflowError, ZeroDivisionError)
# relative slack allowed when checking |codiff| <= bound (rounding only)
DOMINATION_RTOL = 1e-12


class ConfigError(ValueError):
    """Malformed configuration; the message carries ``path:line:`` context."""


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    measure: MeasureSpec
    operator: WeightedShiftOperator
    probes: list
    n_max: int
    tolerance: float = 1e-3
    mc: dict | None = None
    series: dict | None = None
    outputs: dict = field(default_factory=dict)
    epsilon: float = 0.5
    source: str = "<config>"


def _line_of(text: str, key: str) -> int:
    pos = text.find(f'"{key}"')
    return text.count("\n", 0, pos) + 1 if pos >= 0 else 1


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Parse and check a JSON experiment config; errors name the offending line."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")

    def fail(key, msg):
        raise ConfigError(f"{path}:{_line_of(text, key)}: {key}: {msg}")

    for key in ("measure", "operator", "probes"):
        if key not in raw:
            fail(key, "missing required key")
    try:
        measure = measure_from_json(raw["measure"])
    except (KeyError, TypeError, ValueError) as exc:
        fail("measure", _msg(exc))
    try:
        operator = WeightedShiftOperator.from_json(raw["operator"])
    except (KeyError, TypeError, ValueError) as exc:
        fail("operator", _msg(exc))
    if not isinstance(raw["probes"], list) or not raw["probes"]:
        fail("probes", "must be a nonempty list of functionals")
    try:
        probes = [DualFunctional.from_json(p) for p in raw["probes"]]
    except (KeyError, TypeError, ValueError) as exc:
        fail("probes", _msg(exc))
    n_max = raw.get("n_max", 50)
    if not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 1:
        fail("n_max", "must be an integer >= 1")
    tol = raw.get("tolerance", 1e-3)
    if not isinstance(tol, (int, float)) or not tol > 0:
        fail("tolerance", "must be a positive number")
    mc = raw.get("mc")
    if mc is not None:
        if not isinstance(mc, dict) or not isinstance(mc.get("samples", 0), int):
            fail("mc", "must be an object with integer 'samples'")
        if mc.get("samples", 10_000) < 100:
            fail("mc", "samples must be >= 100")
    outputs = raw.get("outputs", {})
    if not isinstance(outputs, dict):
        fail("outputs", "must be an object")
    eps = raw.get("epsilon", 0.5)
    if not isinstance(eps, (int, float)) or not 0 < eps < 1:
        fail("epsilon", "must lie in (0, 1)")
    return ExperimentConfig(measure, operator, probes, n_max, float(tol), mc, raw.get("series"),
                            dict(outputs), float(eps), path)


def _msg(exc: Exception) -> str:
    if isinstance(exc, KeyError):
        return f"missing field {exc.args[0]!r}"
    return str(exc)


# ---------------------------------------------------------------------------
# report assembly


def _probe_pair(cfg: ExperimentConfig):
    x = cfg.probes[0]
    y = cfg.probes[1] if len(cfg.probes) > 1 else cfg.probes[0]
    return x, y


def row_bound(m: MeasureSpec, T: WeightedShiftOperator, x, y, n: int) -> float:
    """Upper bound on ``|C^{=,!=}(x, T*^n y)|``.

    Invariant shift pairs use the normalized shift bounds; otherwise the
    pairwise Levy-measure or control-measure bound is applied to ``T*^n y``.
    """
    shifted = T.direction is not Direction.IDENTITY
    if shifted and m.gaussian_diag is None:
        if not isinstance(m, SymmetricAlphaStable) or T.direction is Direction.FORWARD_Z:
            return B.bound_for_pair(m, T, x, y, n)
    v = adjoint_power(T, n, y)
    if isinstance(m, CompoundPoisson):
        return max(B.levy_bound(m, x, v, m.p, kind) for kind in (B.Kind.EQUAL, B.Kind.NOT_EQUAL))
    if isinstance(m, TemperedStable):
        return max(B.temp_bound(m, x, v, kind) for kind in (B.Kind.EQUAL, B.Kind.NOT_EQUAL))
    return max(B.control_bound(m, x, v, m.p, 1.0, kind) for kind in (B.Kind.EQUAL, B.Kind.NOT_EQUAL))


def build_rows(cfg: ExperimentConfig, *, codiff=True, bound=False, rate=False, mc=False,
               first_n: int = 0, workers: int = 1) -> list[dict]:
    m, T = cfg.measure, cfg.operator
    x, y = _probe_pair(cfg)
    mc_cfg = cfg.mc or {}
    rows = []
    for n in range(first_n, cfg.n_max + 1):
        v = adjoint_power(T, n, y)
        row: dict = {"n": n}
        if codiff or bound:
            ce, cn = codiff_equal(m, x, v).value, codiff_notequal(m, x, v).value
            row.update(codiff_eq_re=ce.real, codiff_eq_im=ce.imag,
                       codiff_neq_re=cn.real, codiff_neq_im=cn.imag)
        if bound:
            b = row_bound(m, T, x, y, n)
            row["bound"] = b
            worst = max(abs(ce), abs(cn))
            if not worst <= b * (1 + DOMINATION_RTOL):
                raise NumericalFailure(f"n={n}: |codiff| = {worst:.6e} exceeds bound {b:.6e}")
        if rate:
            row["rate_formula"] = B.rate_formula(m, T, n, epsilon=cfg.epsilon)
        if mc:
            est = estimate_codiff(m, x, v, int(mc_cfg.get("samples", 10_000)),
                                  RngSpec(int(mc_cfg.get("seed", 0)), int(mc_cfg.get("stream", 0))),
                                  workers=workers)
            row.update(mc_value=est.value.real, mc_stderr=est.stderr)
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return FLOAT_FMT % float(v)


def rows_to_csv(rows: list[dict], columns=COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_float(v):
    if isinstance(v, float):
        return float(FLOAT_FMT % v) if math.isfinite(v) else str(v)
    if isinstance(v, dict):
        return {k: _json_float(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_float(u) for u in v]
    return v


def dumps(obj) -> str:
    return json.dumps(_json_float(obj), indent=2, sort_keys=True) + "\n"


def _fit(rows: list[dict]):
    pts = [(r["n"], math.hypot(r["codiff_eq_re"], r["codiff_eq_im"])) for r in rows
           if r["n"] >= 1 and "codiff_eq_re" in r]
    try:
        return fit_decay(pts).to_json()
    except ValueError as exc:
        return {"model": None, "reason": str(exc)}


# ---------------------------------------------------------------------------
# SVG


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def decay_svg(rows: list[dict], series: dict, title: str = "decay") -> str:
    """Log-scale line chart of ``|series(row)|`` against ``n``; no external assets."""
    W, H, pad = 640, 400, 56
    data = {}
    for name, fn in series.items():
        pts = [(r["n"], fn(r)) for r in rows]
        pts = [(n, abs(v)) for n, v in pts if v is not None and abs(v) > 0 and math.isfinite(abs(v))]
        if pts:
            data[name] = pts
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>']
    if data:
        ns = [n for pts in data.values() for n, _ in pts]
        ls = [math.log10(v) for pts in data.values() for _, v in pts]
        n0, n1 = min(ns), max(max(ns), min(ns) + 1)
        l0, l1 = math.floor(min(ls)), math.ceil(max(ls))
        l1 = max(l1, l0 + 1)
        sx = lambda n: pad + (n - n0) / (n1 - n0) * (W - 2 * pad)
        sy = lambda v: H - pad - (math.log10(v) - l0) / (l1 - l0) * (H - 2 * pad)
        out.append(f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
                   'fill="none" stroke="#444"/>')
        step = max(1, (l1 - l0) // 8)
        for e in range(l0, l1 + 1, step):
            yy = sy(10.0 ** e)
            out.append(f'<line x1="{pad}" x2="{W - pad}" y1="{yy:.2f}" y2="{yy:.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{pad - 6}" y="{yy + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                       f'font-size="10">1e{e}</text>')
        for n in (n0, (n0 + n1) // 2, n1):
            out.append(f'<text x="{sx(n):.2f}" y="{H - pad + 16}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{n}</text>')
        out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
                   'font-size="12">n</text>')
        for i, (name, pts) in enumerate(data.items()):
            col = _SVG_COLORS[i % len(_SVG_COLORS)]
            path = " ".join(f"{sx(n):.2f},{sy(v):.2f}" for n, v in pts)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{path}"/>')
            out.append(f'<text x="{W - pad + 4}" y="{pad + 14 * i + 10}" font-family="sans-serif" '
                       f'font-size="10" fill="{col}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_REPORT_SERIES = {
    "|C=|": lambda r: math.hypot(r["codiff_eq_re"], r["codiff_eq_im"]) if "codiff_eq_re" in r else None,
    "|C!=|": lambda r: math.hypot(r["codiff_neq_re"], r["codiff_neq_im"]) if "codiff_neq_re" in r else None,
    "bound": lambda r: r.get("bound"),
    "rate": lambda r: r.get("rate_formula"),
    "|mc|": lambda r: r.get("mc_value"),
}


# ---------------------------------------------------------------------------
# commands


@dataclass
class Outputs:
    out_dir: Path
    names: dict

    def path(self, key: str, default: str) -> Path:
        return self.out_dir / self.names.get(key, default)

    def write(self, key: str, default: str, text: str) -> Path:
        p = self.path(key, default)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return p


def _emit_report(cfg, outs: Outputs, stem: str, rows, extra: dict) -> None:
    outs.write("csv", f"{stem}.csv", rows_to_csv(rows))
    report = {"command": stem, "rows": rows}
    report.update(extra)
    outs.write("json", f"{stem}.json", dumps(report))
    outs.write("svg", f"{stem}.svg", decay_svg(rows, _REPORT_SERIES, stem))


def _require_valid(cfg) -> dict | None:
    rep = validate(cfg.measure)
    out = rep.to_json()
    if cfg.operator.domain is not cfg.measure.domain:
        out["valid"] = False
        out["failures"].append(
            f"operator acts on {cfg.operator.domain.value}, measure lives on {cfg.measure.domain.value}")
    for i, p in enumerate(cfg.probes):
        if p.domain is not cfg.measure.domain:
            out["valid"] = False
            out["failures"].append(f"probe {i} lives on {p.domain.value}")
    return out


def invariance_defect(m: MeasureSpec, T: WeightedShiftOperator, probes) -> float:
    """``max |log_cf(T* f) - log_cf(f)| / (1 + |log_cf(f)|)`` over the probes."""
    worst = 0.0
    for f in probes:
        a, b = log_cf(m, adjoint_power(T, 1, f), Drift.FULL), log_cf(m, f, Drift.FULL)
        worst = max(worst, abs(a - b) / (1 + abs(b)))
    return worst


def cmd_validate(cfg, outs, args) -> int:
    """Check the measure, the operator and that the operator preserves the measure."""
    rep = _require_valid(cfg)
    if rep["valid"]:
        d = invariance_defect(cfg.measure, cfg.operator, cfg.probes)
        rep["checks"]["invariance_defect"] = d
        if not d < 1e-10:
            rep["valid"] = False
            rep["failures"].append(f"operator does not preserve the measure on the probes (defect {d:.3e})")
    outs.write("json", "validate.json", dumps(rep))
    sys.stdout.write(dumps(rep))
    return EXIT_OK if rep["valid"] else EXIT_INVALID


def _with_valid(fn):
    def run(cfg, outs, args):
        rep = _require_valid(cfg)
        if not rep["valid"]:
            sys.stderr.write(dumps(rep))
            return EXIT_INVALID
        return fn(cfg, outs, args)
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_with_valid
def cmd_codiff(cfg, outs, args) -> int:
    """Exact codifferences C=(x, T*^n y) and C!=(x, T*^n y) for n = 0..n_max."""
    rows = build_rows(cfg, codiff=True)
    _emit_report(cfg, outs, "codiff", rows, {"fit": _fit(rows)})
    return EXIT_OK


@_with_valid
def cmd_bound(cfg, outs, args) -> int:
    """Codifferences with their analytic bounds; fails if a bound is violated."""
    rows = build_rows(cfg, codiff=True, bound=True)
    _emit_report(cfg, outs, "bound", rows, {"fit": _fit(rows)})
    return EXIT_OK


@_with_valid
def cmd_rate_table(cfg, outs, args) -> int:
    """Closed-form rate formula for n = 1..n_max."""
    rows = build_rows(cfg, codiff=False, rate=True, first_n=1)
    _emit_report(cfg, outs, "rate_table", rows, {})
    return EXIT_OK


@_with_valid
def cmd_mc(cfg, outs, args) -> int:
    """Codifferences next to Monte Carlo estimates."""
    rows = build_rows(cfg, codiff=True, mc=True, workers=args.workers)
    _emit_report(cfg, outs, "mc", rows, {"fit": _fit(rows), "mc": cfg.mc or {}})
    return EXIT_OK


def _observable(spec: dict, cfg: ExperimentConfig) -> ExpSeriesObservable:
    base = cfg.probes[int(spec.get("probe", 0))]
    sign = SignFn(spec.get("sign", "re"))
    if "terms" in spec:
        terms = [ObsTerm(complex(*t["coeff"]) if isinstance(t["coeff"], list) else complex(t["coeff"]),
                         SignFn(t.get("sign", sign.value)), cfg.probes[int(t.get("probe", 0))],
                         int(t.get("power", 0))) for t in spec["terms"]]
        return ExpSeriesObservable(tuple(terms))
    return ExpSeriesObservable.geometric(base, sign, cfg.operator, cfg.measure.p,
                                         float(spec.get("first", 1.0)), float(spec.get("ratio", 0.5)),
                                         float(spec.get("tol", 1e-10)))


@_with_valid
def cmd_series_in(cfg, outs, args) -> int:
    """Exact correlations I_n(f, g) of exponential-series observables."""
    ser = cfg.series or {}
    fobs = _observable(ser.get("f", {}), cfg)
    gobs = _observable(ser.get("g", ser.get("f", {})), cfg)
    tb = truncation_bound(fobs, gobs, cfg.operator, cfg.measure.p)
    rows = []
    for n in range(cfg.n_max + 1):
        v = exact_In(cfg.measure, cfg.operator, fobs, gobs, n, workers=args.workers)
        row = {"n": n, "in_re": v.real, "in_im": v.imag, "truncation_bound": tb}
        if cfg.mc:
            est = estimate_In(cfg.measure, cfg.operator, fobs, gobs, n, int(cfg.mc.get("samples", 10_000)),
                              RngSpec(int(cfg.mc.get("seed", 0)), int(cfg.mc.get("stream", 0))),
                              workers=args.workers)
            row.update(mc_re=est.value.real, mc_im=est.value.imag, mc_stderr=est.stderr)
        rows.append(row)
    pts = [(r["n"], math.hypot(r["in_re"], r["in_im"])) for r in rows if r["n"] >= 1]
    try:
        fit = fit_decay(pts).to_json()
    except ValueError as exc:
        fit = {"model": None, "reason": str(exc)}
    outs.write("csv", "series_in.csv", rows_to_csv(rows, SERIES_COLUMNS))
    outs.write("json", "series_in.json", dumps({"command": "series_in", "rows": rows, "fit": fit}))
    series = {"|I_n|": lambda r: math.hypot(r["in_re"], r["in_im"])}
    outs.write("svg", "series_in.svg", decay_svg(rows, series, "series_in"))
    return EXIT_OK


@_with_valid
def cmd_mixing_verdict(cfg, outs, args) -> int:
    """Mixing verdict from codifference decay at admissible scalings."""
    v = mixing_verdict(cfg.measure, cfg.operator, cfg.probes, cfg.n_max, cfg.tolerance)
    text = dumps(v.to_json())
    outs.write("json", "mixing_verdict.json", text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "codiff": cmd_codiff,
    "bound": cmd_bound,
    "rate-table": cmd_rate_table,
    "mc": cmd_mc,
    "series-in": cmd_series_in,
    "mixing-verdict": cmd_mixing_verdict,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idmix", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out-dir", default=None,
                        help=f"output directory (default: ${OUT_DIR_ENV} or the config's directory)")
        sp.add_argument("--n-max", type=int, default=None, help="override n_max")
        sp.add_argument("--seed", type=int, default=None, help="override mc.seed")
        sp.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    if args.n_max is not None:
        if args.n_max < 1:
            sys.stderr.write("error: --n-max must be >= 1\n")
            return EXIT_CONFIG
        cfg.n_max = args.n_max
    if args.seed is not None:
        cfg.mc = dict(cfg.mc or {}, seed=args.seed)
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or str(Path(args.config).resolve().parent)
    outs = Outputs(Path(out_dir), cfg.outputs)
    try:
        return COMMANDS[args.command](cfg, outs, args)
    except NumericalFailure as exc:
        sys.stderr.write(f"error: domination check failed: {exc}\n")
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"error: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (DomainError, ValueError, KeyError, IndexError) as exc:
        sys.stderr.write(f"error: {cfg.source}: {_msg(exc)}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
