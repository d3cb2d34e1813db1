"""Command-line front end.

Exit codes: 0 success, 1 tolerance failure, 2 usage or configuration error,
3 domain-guard failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .evolve import (
    COM_SIGN,
    REL_SIGN,
    DomainError,
    _require_domain,
    bogoliubov_reports,
    exponentiate,
    transform_reports,
    unitarity_error,
)
from .fock import FockConfig, FockError, build_com_rel, low_indices
from .generators import GeneratorSpec, SingularFlowError, build_generator, classical_flow, witt_closure_check
from .opexpr import _TWO_MODE_ONLY, ModeCountError, OpExprError, evaluate, parse
from .states import (
    GeometricFitError,
    density_matrix,
    evolve_vacuum,
    fit_geometric,
    number_expectation,
    number_formula_rhs,
    partial_trace_minus,
    partial_trace_mode,
    predicted_ratio,
    squeezed_state,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_TOL, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3, 4

CLOSURE_TOL = 1e-10
SINGLE_LAW_TOL = 1e-6
TWO_MODE_LAW_TOL = 1e-5
BOGOLIUBOV_TOL = 1e-8
UNITARITY_TOL = 1e-9

SWEEP_COLUMNS = (
    "n", "theta", "dim", "closure_residual", "x_law_residual", "p_law_residual",
    "N_expect", "N_formula_rhs", "beta_fit", "beta_pred", "domain_ok",
)


def fmt(x) -> str:
    """Nine significant digits; integral floats keep a trailing ``.0``."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex) or np.iscomplexobj(x):
        x = complex(x)
        if x.imag == 0:
            return fmt(x.real)
        return f"{x.real:.9g}{x.imag:+.9g}j"
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = f"{x:.9g}"
    if re.fullmatch(r"-?\d+", s):
        s += ".0"
    return s


def _coeff(c: complex) -> str:
    re_, im = float(f"{c.real:.9g}"), float(f"{c.imag:.9g}")
    if im == 0:
        return fmt(re_) + "*"
    if re_ == 0:
        if im == 1:
            return "i"
        if im == -1:
            return "-i"
        return fmt(im) + "i*"
    return f"({fmt(re_)}{im:+.9g}i)*"


class UsageError(Exception):
    pass


@dataclass
class SweepConfig:
    n_values: list = field(default_factory=lambda: [0])
    theta_values: list = field(default_factory=lambda: [0.1])
    per_mode_dim: int = 16
    subspace_dim: int = 4
    outputs: list = field(default_factory=list)
    format: str = "csv"
    trace: str = "minus"

    def validate(self):
        if not self.n_values or not self.theta_values:
            raise UsageError("n_values and theta_values must be nonempty")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format!r}")
        if self.trace not in ("minus", "partner"):
            raise UsageError(f"trace must be minus or partner, got {self.trace!r}")
        self.n_values = [int(v) for v in self.n_values]
        self.theta_values = [float(v) for v in self.theta_values]
        if min(self.n_values) < -1:
            raise UsageError("n values below -1 are not supported")
        FockConfig(self.per_mode_dim, 2, 1.0, self.subspace_dim)
        return self


def _cfg(args, mode_count=None) -> FockConfig:
    mc = mode_count or (2 if getattr(args, "mode", "one") == "two" else 1)
    return FockConfig(args.dim, mc, args.omega0, args.sub)


def _print_table(rows, headers, out=None):
    out = out or sys.stdout
    cells = [[str(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)), file=out)
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)), file=out)


def _parse_range(text: str):
    m = re.fullmatch(r"\s*(-?\d+)\s*:\s*(-?\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _parse_list(kind):
    def conv(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return conv


# -- commands ---------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _cfg(args)
    lo, hi = args.n_range
    rows, failed = [], False

    report = witt_closure_check(cfg, (lo, hi), cfg.subspace_dim)
    for label, r in zip(report.labels, report.residuals):
        ok = r < CLOSURE_TOL
        failed |= not ok
        rows.append(("closure", label, fmt(r), fmt(CLOSURE_TOL), "ok" if ok else "FAIL"))

    if args.theta is not None:
        n = 0 if args.n is None else args.n
        variant = "single_mode" if cfg.mode_count == 1 else "virasoro_bogoliubov"
        spec = GeneratorSpec(n, args.theta, variant)
        if cfg.mode_count == 2 and n == 0:
            # the n = 0 two-mode generator is the Bogoliubov generator itself
            U = exponentiate(build_generator(cfg, GeneratorSpec(0, args.theta, "bogoliubov")), args.theta)
            for name, r in bogoliubov_reports(cfg, args.theta, U=U).items():
                ok = r < BOGOLIUBOV_TOL
                failed |= not ok
                rows.append(("bogoliubov", name, fmt(r), fmt(BOGOLIUBOV_TOL), "ok" if ok else "FAIL"))
        else:
            U = exponentiate(build_generator(cfg, spec), args.theta)
        tol = SINGLE_LAW_TOL if cfg.mode_count == 1 else TWO_MODE_LAW_TOL
        for rep in transform_reports(cfg, spec, margin=args.margin, U=U):
            if not rep.domain_ok:
                print(f"domain failure: law for {rep.target} undefined at n={n}, "
                      f"theta={fmt(args.theta)}", file=sys.stderr)
                _print_table(rows, ("check", "item", "residual", "tol", "status"))
                return EXIT_DOMAIN
            ok = rep.residual < tol
            failed |= not ok
            rows.append(("law", f"n={n} {rep.target}", fmt(rep.residual), fmt(tol), "ok" if ok else "FAIL"))
        ue = unitarity_error(U)
        failed |= not ue < UNITARITY_TOL
        rows.append(("unitarity", "|U^dag U - I|", fmt(ue), fmt(UNITARITY_TOL),
                     "ok" if ue < UNITARITY_TOL else "FAIL"))

    _print_table(rows, ("check", "item", "residual", "tol", "status"))
    return EXIT_TOL if failed else EXIT_OK


def _check_vb_domain(cfg: FockConfig, n: int, theta: float):
    if n in (0, -1) or theta == 0:
        return
    X, _, dx, _ = build_com_rel(cfg)
    _require_domain(X, n, theta, COM_SIGN, 0.0, None)
    _require_domain(dx, n, theta, REL_SIGN, 0.0, None)


def _write_diagonal(path, diag):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("level", "probability"))
        for k, p in enumerate(diag):
            w.writerow((k, fmt(p)))


def _report_fit(label, rho, levels, pred):
    print(f"{label}: trace={fmt(rho.trace)} purity={fmt(rho.purity)} "
          f"discarded_weight={fmt(rho.discarded_weight)}")
    try:
        fit = fit_geometric(rho, levels, pred)
    except GeometricFitError as exc:
        print(f"  fit refused: {exc}")
        return None
    print(f"  ratio={fmt(fit.ratio)} beta={fmt(fit.beta)} residual={fmt(fit.residual)}")
    return fit


def cmd_vb(args) -> int:
    cfg = FockConfig(args.dim, 2, args.omega0, args.sub)
    try:
        _check_vb_domain(cfg, args.n, args.theta)
    except DomainError as exc:
        print(f"domain-guard failure: {exc} (eigenvalue {fmt(exc.eigenvalue)})", file=sys.stderr)
        return EXIT_DOMAIN
    state, U = evolve_vacuum(cfg, GeneratorSpec(args.n, args.theta, "virasoro_bogoliubov"))
    rho = density_matrix(state)
    try:
        pred = float(predicted_ratio(cfg, args.n, args.theta))
    except DomainError:
        pred = None
    routes = {
        "minus": ("reduced over '-' modes", partial_trace_minus(rho, cfg)),
        "partner": ("reduced over mode 2", partial_trace_mode(rho, cfg, keep=0)),
    }
    for key in ("minus", "partner"):
        label, r = routes[key]
        _report_fit(label, r, args.levels, pred)
    if pred is not None:
        beta_pred = -math.log(pred) if pred > 0 else float("inf")
        print(f"mean-field prediction: K^2 tanh^2 Omega={fmt(pred)} beta={fmt(beta_pred)}")
    print(f"unitarity: {fmt(unitarity_error(U))}")
    if args.out:
        try:
            _write_diagonal(args.out, routes[args.trace][1].diagonal)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_flow(args) -> int:
    try:
        z = complex(args.z.replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot parse z={args.z!r}") from None
    try:
        w = classical_flow(args.n, args.theta, z)
    except SingularFlowError as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(fmt(w))
    return EXIT_OK


def cmd_squeeze(args) -> int:
    cfg = FockConfig(args.dim, 1, args.omega0, args.sub)
    state = squeezed_state(cfg, GeneratorSpec(args.n, args.theta))
    N = number_expectation(state, cfg)
    print(f"N={fmt(N)}")
    try:
        rhs = number_formula_rhs(cfg, args.n, args.theta)
    except DomainError as exc:
        print(f"formula: domain failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(f"formula_rhs={fmt(rhs)} discrepancy={fmt(abs(rhs - N))}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        ast = parse(args.expr)
    except OpExprError as exc:
        print(args.expr, file=sys.stderr)
        if exc.column:
            print(" " * (exc.column - 1) + "^", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    mode = args.mode
    if mode == "auto":
        mode = "two" if _uses_two_mode(ast) else "one"
    cfg = FockConfig(args.dim, 2 if mode == "two" else 1, args.omega0, args.sub)
    try:
        op = evaluate(ast, cfg)
    except ModeCountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    idx = low_indices(cfg.structure, cfg.per_mode_dim, cfg.subspace_dim)
    block = op.entries[np.ix_(idx, idx)]
    c = complex(np.trace(block) / block.shape[0])
    resid = float(np.linalg.norm(block - c * np.eye(block.shape[0]), 2))
    if resid < 1e-12:
        print(f"≈ {_coeff(c).replace('*', '·')}I, residual {resid:.3g}")
    else:
        herm = float(np.abs(block - block.conj().T).max())
        print(f"low block {block.shape[0]}x{block.shape[0]}: norm={fmt(np.linalg.norm(block, 2))} "
              f"hermiticity_error={fmt(herm)} distance_from_scalar={fmt(resid)}")
        if args.show:
            with np.printoptions(precision=6, suppress=True, linewidth=120):
                print(block)
    return EXIT_OK


def _uses_two_mode(node) -> bool:
    if node.kind == "symbol":
        return node.value in _TWO_MODE_ONLY
    return any(_uses_two_mode(c) for c in node.children)


def sweep_point(sc: SweepConfig, n: int, theta: float, closure: dict) -> dict:
    """One CSV row; out-of-domain quantities are NaN and ``domain_ok`` False."""
    single = FockConfig(sc.per_mode_dim, 1, 1.0, sc.subspace_dim)
    row = dict.fromkeys(SWEEP_COLUMNS, float("nan"))
    row.update(n=n, theta=theta, dim=sc.per_mode_dim, closure_residual=closure.get(n, float("nan")))
    domain_ok = True

    spec = GeneratorSpec(n, theta)
    state, U = evolve_vacuum(single, spec)
    row["N_expect"] = number_expectation(state, single)
    for rep in transform_reports(single, spec, margin=0.0, U=U):
        domain_ok &= rep.domain_ok
        row[f"{rep.target}_law_residual"] = rep.residual
    try:
        row["N_formula_rhs"] = number_formula_rhs(single, n, theta)
    except DomainError:
        domain_ok = False

    two = FockConfig(sc.per_mode_dim, 2, 1.0, sc.subspace_dim)
    try:
        _check_vb_domain(two, n, theta)
        vstate, _ = evolve_vacuum(two, GeneratorSpec(n, theta, "virasoro_bogoliubov"))
        rho = density_matrix(vstate)
        reduced = (partial_trace_minus(rho, two) if sc.trace == "minus"
                   else partial_trace_mode(rho, two, keep=0))
        try:
            row["beta_fit"] = fit_geometric(reduced, min(8, sc.per_mode_dim)).beta
        except GeometricFitError:
            pass
        pred = predicted_ratio(two, n, theta)
        row["beta_pred"] = -math.log(pred) if pred > 0 else float("inf")
    except DomainError:
        domain_ok = False
    row["domain_ok"] = domain_ok
    return row


def _closure_by_n(sc: SweepConfig) -> dict:
    single = FockConfig(sc.per_mode_dim, 1, 1.0, sc.subspace_dim)
    lo, hi = max(-1, min(sc.n_values)), max(sc.n_values)
    rep = witt_closure_check(single, (lo, hi), sc.subspace_dim)
    out = {}
    for (a, b), r in zip(rep.pairs, rep.residuals):
        for j in (a, b):
            out[j] = max(out.get(j, 0.0), r)
    return out


def run_sweep(sc: SweepConfig, jobs: int = 1) -> list:
    """All rows of the sweep, ordered lexicographically in ``(n, theta)``."""
    closure = _closure_by_n(sc)
    points = sorted({(n, t) for n in sc.n_values for t in sc.theta_values})
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda nt: sweep_point(sc, nt[0], nt[1], closure), points))
    return rows


def render_rows(rows, format="csv") -> str:
    if format == "json":
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v
        return json.dumps([{k: clean(v) for k, v in r.items()} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def load_sweep_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {path}: {exc}") from None
    known = {f.name for f in fields(SweepConfig)}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return data


def cmd_sweep(args) -> int:
    data = load_sweep_config(args.config) if args.config else {}
    overrides = {
        "n_values": args.n_values, "theta_values": args.theta_values,
        "per_mode_dim": args.dim, "subspace_dim": args.sub,
        "outputs": args.out, "format": args.format, "trace": args.trace,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    sc = SweepConfig(**data).validate()
    text = render_rows(run_sweep(sc, args.jobs), sc.format)
    if not sc.outputs:
        sys.stdout.write(text)
    for path in sc.outputs:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, dim=64, sub=8):
    p.add_argument("--dim", type=int, default=dim, help="levels per mode")
    p.add_argument("--sub", type=int, default=sub, help="low subspace size used for comparisons")
    p.add_argument("--omega0", type=float, default=1.0, help="oscillator frequency")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vbsqueeze", description="Witt-algebra squeezing on truncated Fock spaces")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("verify", help="closure and transformation-law residual table")
    _common(p, dim=128, sub=16)
    p.add_argument("--mode", choices=("one", "two"), default="one", help="single-mode or two-mode generators")
    p.add_argument("--n-range", type=_parse_range, default=(-1, 2), help="inclusive range LO:HI of indices n")
    p.add_argument("--n", type=int, default=None, help="generator index checked with --theta")
    p.add_argument("--theta", type=float, default=None, help="also check the transformation laws at this theta")
    p.add_argument("--margin", type=float, default=0.0, help="domain margin for the closed forms")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("vb", help="two-mode state, reduced diagonal and canonical fit")
    _common(p, dim=64, sub=8)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--levels", type=int, default=8, help="levels used in the geometric fit")
    p.add_argument("--trace", choices=("minus", "partner"), default="minus",
                   help="which reduction is written to --out")
    p.add_argument("--out", default=None, help="CSV path for the reduced diagonal")
    p.set_defaults(func=cmd_vb)

    p = sub.add_parser("flow", help="classical flow of dz/dtheta = z^(n+1)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--z", required=True, help="complex start point, e.g. 0.5 or 0.3+0.2j")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("squeeze", help="particle number of the single-mode squeezed vacuum")
    _common(p, dim=64, sub=8)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--theta", type=float, required=True)
    p.set_defaults(func=cmd_squeeze)

    p = sub.add_parser("eval", help="evaluate an operator expression")
    p.add_argument("expr", help="operator expression, e.g. 'x1*p1 - p1*x1'")
    _common(p, dim=32, sub=8)
    p.add_argument("--mode", choices=("auto", "one", "two"), default="auto", help="mode count; auto picks two if any two-mode symbol appears")
    p.add_argument("--show", action="store_true", help="print the low block")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="parameter sweep written as CSV or JSON")
    p.add_argument("--config", default=None, help="JSON file with SweepConfig fields")
    p.add_argument("--n-values", type=_parse_list(int), default=None, help="comma-separated generator indices")
    p.add_argument("--theta-values", type=_parse_list(float), default=None, help="comma-separated parameters")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--sub", type=int, default=None)
    p.add_argument("--out", action="append", default=None, help="output path, repeatable; stdout if omitted")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--trace", choices=("minus", "partner"), default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker threads; output order does not depend on it")
    p.set_defaults(func=cmd_sweep)
    return parser


_NEG_VALUE_FLAGS = {"--n-range", "--n-values", "--theta-values", "--z", "--n", "--theta"}


def _join_negative_values(argv):
    # argparse takes "-1:2" or "-0.5,1" for an option flag; glue them with '='
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _NEG_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, FockError, ModeCountError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
