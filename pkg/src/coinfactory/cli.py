"""Command-line front end.

Subcommands: analyze (exact tables), simulate (Monte Carlo runs), verify
(statistical gate battery), sweep (optimality ratios/slopes), selftest
(reduced-size invariant suite).  Exit codes: 0 all gates pass, 1 statistical
gate failure, 2 usage error.

The default seed comes from --seed, else the COINFACTORY_SEED environment
variable, else 20240601; for simulate, a --config file (KEY = VALUE lines)
sits between: flags beat config, config beats the environment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import List, Optional

from . import _kernels
from .analysis import (
    cramer_rao_bound,
    eval_f,
    eval_f_prime,
    expected_inputs_alg1,
    expected_inputs_alg2,
)
from .engine import run_cell, run_von_neumann
from .errors import CoinFactoryError
from .expr import build_series, is_series, parse_expression, print_expression
from .harness import (
    ExperimentSpec,
    cell_seed,
    run,
    sweep_optimality,
    tail_bound_gates,
    test_joint_law,
)
from .series import as_fraction, catalog, coefficients_from_stopping, stopping_from_coefficients
from .stats import GateResult, chi2_goodness, chi2_two_sample, two_proportion_z

DEFAULT_SEED = 20240601
ENV_SEED = "COINFACTORY_SEED"

VERIFY_ENTRIES = [
    "power:a=1/3", "sqrt", "mobius_sqrt", "log2_sqrt", "exp_sqrt", "entropy",
    "finite:[1/2,1/4,1/4]",
]


def parse_p_grid(text: str) -> List[Fraction]:
    """Comma list of probabilities, or "geom:start,stop,points"."""
    if text.startswith("geom:"):
        parts = text[5:].split(",")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("geom grid needs start,stop,points")
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        if points < 2:
            return [as_fraction(start)]
        ratio = (stop / start) ** (1 / (points - 1))
        return [as_fraction(start * ratio ** i) for i in range(points)]
    return [as_fraction(tok.strip()) for tok in text.split(",") if tok.strip()]


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _seed_from(args, config: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        return int(env)
    return DEFAULT_SEED


def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CoinFactoryError(f"bad config line (need KEY = VALUE): {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    tree = parse_expression(args.expression)
    if not is_series(tree):
        raise CoinFactoryError("analyze works on series expressions "
                               "(transforms have no single series)")
    series = build_series(tree)
    rows = []
    for p in args.p:
        f = eval_f(series, p, tol=args.tol)
        fp = eval_f_prime(series, p, tol=args.tol)
        e1 = expected_inputs_alg1(series, p, tol=args.tol)
        e2 = expected_inputs_alg2(series, p, tol=args.tol)
        cr = cramer_rao_bound(series, p, tol=args.tol)
        rows.append({
            "p": str(p), "p_float": float(p),
            "f": f.value, "f_err": f.error_bound,
            "f_prime": fp.value, "f_prime_err": fp.error_bound,
            "expected_n_rand": e1.value, "expected_n_rand_err": e1.error_bound,
            "expected_n_nonrand": e2.value, "expected_n_nonrand_err": e2.error_bound,
            "lower_bound": cr.value, "lower_bound_err": cr.error_bound,
        })
    if args.format == "json":
        payload = {"expression": print_expression(tree), "rows": rows}
        _emit(json.dumps(payload, sort_keys=True, indent=2), args.out)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        _emit(buf.getvalue(), args.out)
    return 0


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = _read_config(args.config)
    expression = args.expression or config.get("expression")
    if not expression:
        raise CoinFactoryError("no expression given (argument or config)")
    p_grid = args.p if args.p is not None else parse_p_grid(config.get("p", "1/2"))
    spec = ExperimentSpec(
        expression=expression,
        p_grid=p_grid,
        reps=args.reps if args.reps is not None else int(config.get("reps", 100000)),
        seed=_seed_from(args, config),
        algorithm=args.algo or config.get("algo", "rand"),
        confidence=args.confidence,
        workers=args.workers,
        cap=args.cap,
        digit_ceiling=args.digit_ceiling,
        dyadic_shortcut=args.dyadic_shortcut,
        backend=args.backend,
    )
    report = run(spec)
    fmt = args.format or config.get("format", "csv")
    _emit(report.to_json() if fmt == "json" else report.to_csv(),
          args.out or config.get("out"))
    return 0 if report.all_gates_pass() else 1


# -- verify ----------------------------------------------------------------------


def _gate_lines(gates, out_lines) -> bool:
    ok = True
    for g in gates:
        out_lines.append(g.describe())
        ok &= g.passed
    return ok


def cmd_verify(args) -> int:
    reps = args.reps if args.reps is not None else 100000
    seed = _seed_from(args, {})
    lines: List[str] = []
    ok = True

    # output and cost laws, randomized and non-randomized, all entries
    for expression in VERIFY_ENTRIES:
        tree = parse_expression(expression)
        series = build_series(tree)
        for p in (Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)):
            cell = run_cell(tree, "rand", p, reps, cell_seed(seed, p),
                            workers=args.workers, backend=args.backend)
            f = eval_f(series, p)
            en = expected_inputs_alg1(series, p)
            se_y = math.sqrt(f.value * (1 - f.value) / cell.count)
            gates = [GateResult(f"law {expression} p={p}", cell.mean_y(), f.value,
                                se_y, 4, slack=f.error_bound)]
            se_n = math.sqrt(cell.var_n() / cell.count)
            gates.append(GateResult(f"cost {expression} p={p}", cell.mean_n(),
                                    en.value, se_n, 4, slack=en.error_bound))
            ok &= _gate_lines(gates, lines)
        p = Fraction(1, 2)
        cell = run_cell(tree, "nonrand", p, max(reps // 10, 1000),
                        cell_seed(seed + 1, p), workers=args.workers,
                        backend=args.backend)
        en2 = expected_inputs_alg2(series, p)
        se_n = math.sqrt(cell.var_n() / cell.count)
        gates = [GateResult(f"nonrand cost {expression} p={p}", cell.mean_n(),
                            en2.value, se_n, 4, slack=en2.error_bound)]
        ok &= _gate_lines(gates, lines)
        if cell.uniform_draws != 0:
            lines.append(f"FAIL nonrand uniforms {expression}: {cell.uniform_draws} != 0")
            ok = False

    # joint stopping law, sqrt at p = 1/4
    tree = parse_expression("sqrt")
    p = Fraction(1, 4)
    cell = run_cell(tree, "rand", p, reps, cell_seed(seed + 2, p),
                    workers=args.workers, backend=args.backend)
    joint = test_joint_law(cell, build_series(tree), p)
    lines.append(f"{'PASS' if joint.passed else 'FAIL'} joint law sqrt p=1/4 "
                 f"(chi2 p = {joint.chi2_p_value:.4g}, {len(joint.cells)} cells)")
    ok &= joint.passed

    # tail envelopes at p = 1/4
    for expression in VERIFY_ENTRIES:
        cell = run_cell(parse_expression(expression), "rand", p, reps,
                        cell_seed(seed + 3, p), workers=args.workers,
                        backend=args.backend)
        gates = tail_bound_gates(cell, p)
        bad = [g for g in gates if not g.passed]
        lines.append(f"{'PASS' if not bad else 'FAIL'} tail envelope {expression} "
                     f"p=1/4 (n <= {len(gates)})")
        ok &= not bad

    # fair-bit extraction
    for p in (Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)):
        vn = run_von_neumann(p, reps, cell_seed(seed + 4, p), backend=args.backend)
        se = math.sqrt(0.25 / reps)
        theta = float(2 * p * (1 - p))
        se_pairs = math.sqrt((1 - theta) / theta ** 2 / reps)
        gates = [
            GateResult(f"fair bit p={p}", vn.mean_bit(), 0.5, se, 4),
            GateResult(f"pair cost p={p}", vn.mean_pairs(), 1 / theta, se_pairs, 4),
        ]
        ok &= _gate_lines(gates, lines)

    # geometric inner law of the pair counts
    p = Fraction(3, 10)
    vn = run_von_neumann(p, reps, cell_seed(seed + 5, p), backend=args.backend)
    theta = float(2 * p * (1 - p))
    expected = [vn.reps * theta * (1 - theta) ** (k - 1) for k in range(1, 11)]
    chi = chi2_goodness(vn.hist[1:11], expected, sample_size=vn.reps)
    lines.append(f"{'PASS' if chi.passed(1e-3) else 'FAIL'} pair-count geometric law "
                 f"p=3/10 (chi2 p = {chi.p_value:.4g})")
    ok &= chi.passed(1e-3)

    # outer-loop count of the non-randomized sampler matches the randomized N law
    p = Fraction(1, 2)
    m = max(reps // 10, 1000)
    c1 = run_cell(parse_expression("sqrt"), "rand", p, m, cell_seed(seed + 6, p),
                  backend=args.backend)
    c2 = run_cell(parse_expression("sqrt"), "nonrand", p, m, cell_seed(seed + 7, p),
                  backend=args.backend)
    chi = chi2_two_sample(c1.hist[1:40], c2.hist_outer[1:40])
    lines.append(f"{'PASS' if chi.passed(1e-3) else 'FAIL'} outer-loop law sqrt p=1/2 "
                 f"(chi2 p = {chi.p_value:.4g})")
    ok &= chi.passed(1e-3)

    # lower-bound dominance on the analysis side
    entries = [e for e in VERIFY_ENTRIES]
    dominated = True
    for expression in entries:
        series = build_series(parse_expression(expression))
        for k in range(1, 20):
            p = Fraction(k, 20)
            en = expected_inputs_alg1(series, p)
            cr = cramer_rao_bound(series, p)
            if en.value + en.error_bound < cr.value - cr.error_bound:
                dominated = False
    lines.append(f"{'PASS' if dominated else 'FAIL'} lower-bound dominance "
                 f"(19-point grid, {len(entries)} entries)")
    ok &= dominated

    # baseline comparison: same law, strictly larger cost
    m = max(reps // 10, 1000)
    for p in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)):
        fast = run_cell(parse_expression("sqrt"), "rand", p, m, cell_seed(seed + 8, p),
                        backend=args.backend)
        base = run_cell(parse_expression("sqrt"), "baseline", p, m,
                        cell_seed(seed + 9, p), cap=args.cap, backend=args.backend)
        z = two_proportion_z(fast.sum_y, fast.count, base.sum_y, base.count)
        same_law = abs(z) < 4
        cheaper = fast.mean_n() < base.mean_n()
        lines.append(f"{'PASS' if same_law and cheaper else 'FAIL'} baseline sqrt p={p} "
                     f"(|z| = {abs(z):.2f}, mean N {fast.mean_n():.3f} < {base.mean_n():.3f},"
                     f" truncated {base.trunc})")
        ok &= same_law and cheaper

    lines.append(f"{'ALL GATES PASS' if ok else 'GATE FAILURES PRESENT'} "
                 f"(backend: {args.backend or _kernels.BACKEND}, reps {reps})")
    _emit("\n".join(lines), args.out)
    return 0 if ok else 1


# -- sweep ----------------------------------------------------------------------


def cmd_sweep(args) -> int:
    expressions = [e.strip() for e in args.entries.split(";") if e.strip()]
    report = sweep_optimality(expressions, args.p, args.reps or 20000,
                              _seed_from(args, {}), workers=args.workers,
                              backend=args.backend)
    rows = [{
        "expression": r.expression, "p": r.p, "p_float": r.p_float,
        "mean_n": r.mean_n, "exact_f": r.exact_f, "ratio": r.ratio,
        "ratio_se": r.ratio_se, "passed": r.passed,
    } for r in report.rows]
    if args.format == "json":
        _emit(json.dumps({"rows": rows, "slopes": report.slopes},
                         sort_keys=True, indent=2), args.out)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        for expression, slope in report.slopes.items():
            buf.write(f"# loglog slope {expression}: {slope!r}\n")
        _emit(buf.getvalue(), args.out)
    return 0 if report.all_pass() else 1


# -- selftest ----------------------------------------------------------------------


def cmd_selftest(args) -> int:
    reps = 10000
    seed = _seed_from(args, {})
    lines: List[str] = []
    ok = True

    def check(name, cond):
        nonlocal ok
        lines.append(f"{'PASS' if cond else 'FAIL'} {name}")
        ok &= bool(cond)

    # series invariants
    entries = {name: build_series(parse_expression(name)) for name in VERIFY_ENTRIES}
    good = True
    for name, series in entries.items():
        if series.exact:
            good &= all(series.coefficient_at(k) >= 0 for k in range(1, 65))
            good &= series.partial_sum_at(64) <= 1
        else:
            good &= series.partial_sum_interval_at(64, 160).upper_fraction() <= 1
    check("catalog invariants (k <= 64)", good)

    sq = entries["sqrt"]
    d = stopping_from_coefficients(sq)
    back = coefficients_from_stopping(d)
    check("round trip d -> c (k <= 64)",
          all(back.coefficient_at(k) == sq.coefficient_at(k) for k in range(1, 65)))
    half = catalog("power", a=Fraction(1, 2))
    check("power(1/2) == sqrt (k <= 64)",
          all(half.coefficient_at(k) == sq.coefficient_at(k) for k in range(1, 65)))

    # law and cost gates at reduced size (5 sigma at this scale)
    for expression, p in [("sqrt", Fraction(1, 4)), ("entropy", Fraction(1, 2))]:
        tree = parse_expression(expression)
        series = build_series(tree)
        cell = run_cell(tree, "rand", p, reps, cell_seed(seed, p), backend=args.backend)
        f = eval_f(series, p)
        se = math.sqrt(f.value * (1 - f.value) / reps)
        check(f"law {expression} p={p}", abs(cell.mean_y() - f.value) < 5 * se + 1e-9)
        en = expected_inputs_alg1(series, p)
        se_n = math.sqrt(cell.var_n() / cell.count)
        check(f"cost {expression} p={p}", abs(cell.mean_n() - en.value) < 5 * se_n + 1e-9)

    cell = run_cell(parse_expression("sqrt"), "nonrand", Fraction(1, 2), reps,
                    seed, backend=args.backend)
    en2 = expected_inputs_alg2(build_series(parse_expression("sqrt")), Fraction(1, 2))
    se_n = math.sqrt(cell.var_n() / cell.count)
    check("nonrand cost sqrt p=1/2",
          abs(cell.mean_n() - en2.value) < 5 * se_n and cell.uniform_draws == 0)

    vn = run_von_neumann(Fraction(1, 10), reps, seed, backend=args.backend)
    check("fair bit p=1/10", abs(vn.mean_bit() - 0.5) < 5 * math.sqrt(0.25 / reps))

    # determinism
    s = ExperimentSpec(expression="sqrt", p_grid=[Fraction(1, 4)], reps=2000,
                       seed=seed, backend=args.backend)
    check("determinism", run(s).to_json() == run(s).to_json())

    dominated = True
    for name, series in entries.items():
        for k in (1, 10, 19):
            p = Fraction(k, 20)
            en = expected_inputs_alg1(series, p)
            cr = cramer_rao_bound(series, p)
            dominated &= en.value + en.error_bound >= cr.value - cr.error_bound
    check("lower-bound dominance spot grid", dominated)

    lines.append("ALL PASS" if ok else "FAILURES PRESENT")
    _emit("\n".join(lines), args.out)
    return 0 if ok else 1


# -- argument wiring ------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coinfactory",
        description="Exact Bernoulli factory sampling and verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, reps_default=None):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (default: ${ENV_SEED} or {DEFAULT_SEED})")
        sp.add_argument("--reps", type=int, default=reps_default)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--backend", choices=["auto", "pure", "compiled"], default=None)
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--cap", type=int, default=1_000_000,
                        help="baseline phase-1 input cap")

    sp = sub.add_parser("analyze", help="exact f, f', E[N], lower bound over a p grid")
    sp.add_argument("expression")
    sp.add_argument("--p", type=parse_p_grid, required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="Monte Carlo run of a factory expression")
    sp.add_argument("expression", nargs="?")
    sp.add_argument("--p", type=parse_p_grid, default=None)
    sp.add_argument("--algo", choices=["rand", "nonrand", "baseline"], default=None)
    sp.add_argument("--nonrandomized", dest="algo", action="store_const",
                    const="nonrand", help="alias for --algo nonrand")
    sp.add_argument("--format", choices=["csv", "json"], default=None)
    sp.add_argument("--confidence", type=float, default=0.9999)
    sp.add_argument("--digit-ceiling", type=int, default=4096)
    sp.add_argument("--dyadic-shortcut", action="store_true")
    sp.add_argument("--config", default=None, help="KEY = VALUE experiment file")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="statistical gate battery against the exact laws")
    common(sp, reps_default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="asymptotic-optimality ratio sweep")
    sp.add_argument("--entries", default="power:a=3/10;power:a=1/2;power:a=7/10",
                    help="semicolon-separated series expressions")
    sp.add_argument("--p", type=parse_p_grid, default=parse_p_grid("geom:0.25,0.0009765625,9"))
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("selftest", help="reduced-size invariant suite (< 60 s)")
    common(sp)
    sp.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CoinFactoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
