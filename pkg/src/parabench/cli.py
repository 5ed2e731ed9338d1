"""Command-line entry point.

Subcommands: solve, verify, convergence, family, appendix.  Exit code 0 iff
every non-indeterminate check passes ("indeterminate", "inapplicable" and
"refused" reports are neutral).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, inequalities
from .grid import TimeGrid, write_field_csv
from .expr import parse


def _exit_code(results) -> int:
    for result in results:
        if result.failed:
            return 1
    return 0


def _print_reports(results) -> None:
    for result in results:
        for r in result.reports:
            print(
                f"[{r.status:>13}] {result.scenario.name}/{r.name}: "
                f"lhs={r.lhs:.6g} rhs={r.rhs:.6g} margin={r.margin:.6g}"
            )


def _cmd_solve(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    if args.theta is not None:
        scenario = replace(scenario, theta=args.theta)
    scenario = replace(scenario, checks=())
    ctx = harness.RunContext(scenario)
    W, abar, stats = ctx.solution()
    out = Path(args.out)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    write_field_csv(W, out / "fields" / "solution.csv")
    write_field_csv(abar, out / "fields" / "frozen_coefficient.csv")
    iters = stats.get("picard_iterations", [])
    print(
        f"solved {scenario.name}: grid {scenario.n_cells}x{scenario.n_steps}, "
        f"max picard iterations {max(iters) if iters else 0}"
    )
    return 0


def _cmd_verify(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    if args.theta is not None:
        scenario = replace(scenario, theta=args.theta)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    result = harness.run(scenario, out_dir=args.out)
    _print_reports([result])
    return _exit_code([result])


def _cmd_convergence(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    report = harness.convergence_study(scenario, levels=args.refine, out_dir=args.out)
    if report.degenerate:
        print("degenerate: refinement differences are at roundoff level")
        return 0
    for i, order in enumerate(report.solution_orders):
        print(f"solution order level {i}->{i + 1}: {order:.3f}")
    for name, orders in report.functional_orders.items():
        for i, order in enumerate(orders):
            print(f"{name} order level {i}->{i + 1}: {order:.3f}")
    return 0


def _cmd_family(args) -> int:
    scenario = harness.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    results = harness.run_family(scenario, count=args.count, out_dir=args.out)
    _print_reports(results)
    return _exit_code(results)


def _cmd_appendix(args) -> int:
    """Seeded property sweep of the two auxiliary inequalities."""
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    rows = []
    failures = 0
    tgrid = TimeGrid(0.0, 2.0, 200_000)
    for i in range(args.count):
        lam = float(rng.uniform(0.5, 10.0))
        inflation = float(rng.uniform(1.0, 3.0))
        amp = lam / 2.0 * 0.8
        c1 = float(rng.uniform(-amp, amp)) / 1.7
        f = parse(f"t*exp({c1!r}*sin(1.7*t))", ("t",))
        triple = inequalities.construct_gronwall_pair(f, lam, inflation, tgrid)
        report = inequalities.check_gronwall(triple, 2.0)
        rows.append(report.csv_row(f"gronwall-{i:03d}", args.seed or 0))
        failures += report.status == "fail"
    a = rng.uniform(-2.0, 1.0, size=args.count)
    b = a + rng.uniform(0.2, 1.0, size=args.count)
    coeffs = rng.uniform(-1.0, 1.0, size=(args.count, 4))
    worst = np.inf
    for i in range(args.count):
        text = " + ".join(f"{coeffs[i, k]!r}*sin({k + 1}*x)" for k in range(4))
        f = parse(text, ("x",))
        g_m, v_m = inequalities.poincare_margins(f, a[i : i + 1], b[i : i + 1])
        worst = min(worst, float(g_m[0]), float(v_m[0]))
    print(f"gronwall: {args.count} witnesses, {failures} conclusion failures")
    print(f"poincare: worst relative margin {worst:.3e}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "reports.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(harness.estimates.REPORT_COLUMNS)
            writer.writerows(rows)
    return 1 if failures or worst < -1e-9 else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="parabench",
        description="Solve the quasilinear diffusion problem and verify its interior estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--theta", type=float, default=None, help="override time weighting")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")

    p_solve = sub.add_parser("solve", help="solve and write the field CSVs")
    common(p_solve)
    p_solve.set_defaults(fn=_cmd_solve)

    p_verify = sub.add_parser("verify", help="run the scenario's checks")
    common(p_verify)
    p_verify.set_defaults(fn=_cmd_verify)

    p_conv = sub.add_parser("convergence", help="dyadic refinement study")
    common(p_conv)
    p_conv.add_argument("--refine", type=int, default=3, help="number of levels")
    p_conv.set_defaults(fn=_cmd_convergence)

    p_family = sub.add_parser("family", help="run a seeded scenario family")
    common(p_family)
    p_family.add_argument("--count", type=int, default=None, help="number of members")
    p_family.set_defaults(fn=_cmd_family)

    p_app = sub.add_parser("appendix", help="property sweep of the auxiliary inequalities")
    common(p_app, scenario=False)
    p_app.add_argument("--count", type=int, default=50, help="witnesses per inequality")
    p_app.set_defaults(fn=_cmd_appendix)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (harness.ScenarioError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
