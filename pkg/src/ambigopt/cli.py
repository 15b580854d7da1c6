"""Batch front end: solve, verify and sweep commands over instance files.

Exit codes: 0 success (verify: all tolerances met), 1 verification failure,
2 ill-posed instance (arbitrage or finiteness pre-check), 3 non-convergence,
4 schema error. The default parallelism of sweeps comes from the
AMBIGOPT_JOBS environment variable; --jobs overrides it.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import oracle as oracle_mod
from . import robust
from .ambiguity import (
    CustomGrid,
    Measure,
    SmoothCriterion,
    ambiguity_index,
    check_index_axioms,
    index_left_inverse,
)
from .errors import (
    AmbigoptError,
    AssumptionViolated,
    Infinite,
    NoArbitrageViolated,
    PreconditionViolated,
    SaddleInequalityViolated,
    ScaleRefused,
    SchemaError,
    UnsupportedVariant,
)
from .fixed_measure import conjugacy_report, dual_value, max_expected_utility
from .instance import Instance, load_instance
from .market import check_no_arbitrage

MACHINE_MARKER = "--- machine-readable ---"


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.17e}"
    return str(value)


def _report_payload(instance: Instance, report: robust.SolveReport) -> dict:
    return {
        "instance": instance.path,
        "x": report.x,
        "primal_value": report.primal_value,
        "primal_payoff": list(map(float, report.primal_payoff.wealth))
        if report.primal_payoff is not None else None,
        "worst_case_measure": list(map(float,
                                       report.worst_case_measure.probabilities))
        if report.worst_case_measure is not None else None,
        "y_star": report.y_star,
        "dual_value": report.dual_value,
        "minimax_lhs": report.minimax_lhs,
        "minimax_rhs": report.minimax_rhs,
        "duality_gap": report.duality_gap,
        "saddle_residual": report.saddle_residual,
        "iterations": report.iterations,
        "flags": list(report.flags),
    }


def render_report(instance: Instance, report: robust.SolveReport) -> str:
    m = instance.market
    out = io.StringIO()
    out.write("ambigopt solve report\n")
    out.write(f"instance: {instance.path}\n")
    out.write(f"market: {m.n_states} states, {m.d_assets} assets\n")
    out.write(f"budget x: {_fmt(report.x)}\n")
    out.write(f"primal_value u(x): {_fmt(report.primal_value)}\n")
    if report.primal_payoff is not None:
        wealth = " ".join(_fmt(float(w)) for w in report.primal_payoff.wealth)
        out.write(f"primal_payoff: {wealth}\n")
    if report.worst_case_measure is not None:
        qs = " ".join(_fmt(float(q))
                      for q in report.worst_case_measure.probabilities)
        out.write(f"worst_case_measure: {qs}\n")
    out.write(f"y_star: {_fmt(report.y_star)}\n")
    out.write(f"dual_value v(y*;x): {_fmt(report.dual_value)}\n")
    out.write(f"duality_gap: {_fmt(report.duality_gap)}\n")
    out.write(f"minimax_lhs: {_fmt(report.minimax_lhs)}\n")
    out.write(f"minimax_rhs: {_fmt(report.minimax_rhs)}\n")
    out.write(f"saddle_residual: {_fmt(report.saddle_residual)}\n")
    out.write(f"flags: {','.join(report.flags) if report.flags else '(none)'}\n")
    out.write(f"iterations: {json.dumps(report.iterations, sort_keys=True)}\n")
    out.write(MACHINE_MARKER + "\n")
    out.write(json.dumps(_report_payload(instance, report), sort_keys=True))
    out.write("\n")
    return out.getvalue()


def parse_report(text: str) -> dict:
    """Recover the machine block of a rendered report, exactly."""
    _, _, tail = text.partition(MACHINE_MARKER)
    return json.loads(tail.strip())


def _apply_overrides(instance: Instance, args) -> Instance:
    run = instance.run
    updates = {}
    if getattr(args, "x", None) is not None:
        updates["x"] = args.x
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        updates["tol"] = args.tol
    if getattr(args, "oracle", None) is not None:
        updates["oracle"] = args.oracle == "on"
    if getattr(args, "jobs", None) is not None:
        updates["jobs"] = args.jobs
    if updates:
        from dataclasses import replace

        run = replace(run, **updates)
        instance = Instance(market=instance.market, utility=instance.utility,
                            ambiguity=instance.ambiguity,
                            family=instance.family, run=run,
                            path=instance.path)
    return instance


# --- solve ---------------------------------------------------------------------


def cmd_solve(args) -> int:
    instance = _apply_overrides(load_instance(args.instance), args)
    ok, _ = check_no_arbitrage(instance.market)
    if not ok:
        print("assumption violated: the market admits arbitrage "
              "(no strictly positive martingale measure)", file=sys.stderr)
        return 2
    try:
        report = robust.extract_saddle(
            instance.market, instance.ambiguity, instance.family,
            instance.utility, instance.run.x, seed=instance.run.seed)
    except (AssumptionViolated, NoArbitrageViolated, Infinite) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 2
    except (PreconditionViolated, UnsupportedVariant) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except SaddleInequalityViolated as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3
    text = render_report(instance, report)
    out_path = args.out or (args.instance + ".report.txt")
    with open(out_path, "w") as fh:
        fh.write(text)
    print(text, end="")
    return 3 if "non_convergence" in report.flags else 0


# --- verify --------------------------------------------------------------------


@dataclass
class CheckLine:
    name: str
    measured: float | None
    threshold: float | None
    passed: bool | None  # None = skipped
    note: str = ""

    def render(self) -> str:
        status = "SKIP" if self.passed is None else (
            "PASS" if self.passed else "FAIL")
        meas = "n/a" if self.measured is None else f"{self.measured:.3e}"
        thr = "" if self.threshold is None else f" (tol {self.threshold:.1e})"
        note = f"  [{self.note}]" if self.note else ""
        return f"{status:4s} {self.name:32s} {meas}{thr}{note}"


def cmd_verify(args) -> int:
    instance = _apply_overrides(load_instance(args.instance), args)
    run = instance.run
    tol_scale = run.tol
    market, spec, family, u = (instance.market, instance.ambiguity,
                               instance.family, instance.utility)
    x = run.x
    rng = np.random.default_rng(run.seed)
    lines: list[CheckLine] = []

    ok, witness = check_no_arbitrage(market)
    lines.append(CheckLine("no_arbitrage", 1.0 if ok else 0.0, None, ok))
    axioms_ok = True
    if ok and not isinstance(spec, SmoothCriterion):
        report = check_index_axioms(spec, 10_000, run.seed, family=family)
        tol = 1e-9 * tol_scale
        for name, viol, witness_t in (
                ("g_axiom_monotone", report.monotonicity,
                 report.monotonicity_witness),
                ("g_axiom_quasiconvex", report.quasiconvexity,
                 report.quasiconvexity_witness),
                ("g_axiom_asymptotic_max", report.asymptotic,
                 report.asymptotic_witness)):
            passed = viol <= tol
            note = "" if passed else f"witness {witness_t}"
            lines.append(CheckLine(name, viol, tol, passed, note))
            axioms_ok = axioms_ok and passed

        mism = 0
        for _ in range(1000):
            q = family.sample(rng)
            if isinstance(spec, CustomGrid):
                t = rng.uniform(spec.t_grid[0], spec.t_grid[-1])
                mlev = rng.uniform(float(spec.values.min()),
                                   float(spec.values.max()))
            else:
                t = rng.uniform(-10, 10)
                mlev = rng.uniform(-10, 10)
            g = ambiguity_index(spec, q, t)
            linv = index_left_inverse(spec, q, mlev)
            lhs = g >= mlev
            rhs = t >= linv
            if lhs != rhs and min(abs(g - mlev), abs(t - linv)) > 1e-9:
                mism += 1
        lines.append(CheckLine("left_inverse_equivalence", float(mism), 0.0,
                               mism == 0))
        axioms_ok = axioms_ok and mism == 0

    solver_ready = ok and axioms_ok and not isinstance(spec, SmoothCriterion)
    if ok and not solver_ready:
        lines.append(CheckLine("solver_checks", None, None, None,
                               "skipped: index axioms failed or smooth variant"))
    if solver_ready:
        saddle = None
        try:
            if robust._strictly_increasing_in_t(spec):
                saddle = robust.extract_saddle(market, spec, family, u, x,
                                               seed=run.seed)
                u_val = saddle.primal_value
            else:
                u_val = robust.robust_primal_solve(
                    market, spec, family, u, x, seed=run.seed).primal_value
        except (AssumptionViolated, Infinite) as exc:
            print(f"assumption violated: {exc}", file=sys.stderr)
            return 2
        except SaddleInequalityViolated as exc:
            lines.append(CheckLine("saddle_residual", math.inf,
                                   1e-5 * tol_scale, False, str(exc)))
            print(f"ambigopt verify report: {instance.path}")
            for line in lines:
                print(line.render())
            print("FAILED: saddle extraction failed")
            return 1

        margin = math.inf
        cache: dict = {}
        y0 = np.geomspace(1e-2, 1e2, 20) * max(1e-12, primal_y_scale(u, x))
        for y in y0:
            v, _, _ = robust.robust_dual_value(market, spec, family, u, x,
                                               float(y), seed=run.seed,
                                               solution_cache=cache)
            margin = min(margin, v + 1e-6 * tol_scale - u_val)
        lines.append(CheckLine("weak_duality_chain", margin, 0.0,
                               margin >= 0.0))

        if saddle is not None and robust._dichotomy_holds(spec, u):
            gap = abs(saddle.primal_value - saddle.dual_value)
            lines.append(CheckLine("strong_duality", gap, 1e-3 * tol_scale,
                                   gap <= 1e-3 * tol_scale))
            mgap = saddle.minimax_rhs - saddle.minimax_lhs
            lines.append(CheckLine("minimax_interchange", abs(mgap),
                                   1e-3 * tol_scale,
                                   abs(mgap) <= 1e-3 * tol_scale))
            lines.append(CheckLine("saddle_residual",
                                   saddle.saddle_residual, 1e-5 * tol_scale,
                                   saddle.saddle_residual <= 1e-5 * tol_scale))
        else:
            lines.append(CheckLine("strong_duality", None, None, None,
                                   "skipped: interchange preconditions absent"))

        measures = [Measure(market.reference, market.reference), witness]
        for _ in range(4):
            measures.append(family.sample(rng))
        worst_gap = 0.0
        worst_margin = math.inf
        for q in measures:
            rep = conjugacy_report(market, q, u,
                                   [0.5 * x, x, 2.0 * x],
                                   list(np.geomspace(0.05, 20, 7)
                                        * primal_y_scale(u, x)))
            worst_gap = max(worst_gap, rep.max_gap)
            worst_margin = min(worst_margin, rep.fenchel_margin)
        lines.append(CheckLine("conjugacy_gap", worst_gap, 1e-4 * tol_scale,
                               worst_gap <= 1e-4 * tol_scale))
        lines.append(CheckLine("fenchel_margin", worst_margin,
                               -1e-8 * tol_scale,
                               worst_margin >= -1e-8 * tol_scale))

        p_meas = Measure(market.reference, market.reference)
        eps = 1e-5
        slope0 = (max_expected_utility(market, p_meas, u, 2 * eps).value
                  - max_expected_utility(market, p_meas, u, eps).value) / eps
        lines.append(CheckLine("primal_slope_at_zero", slope0, 1e3,
                               slope0 > 1e3))
        big = 1e4
        vslope = abs(dual_value(market, p_meas, u, 2 * big)
                     - dual_value(market, p_meas, u, big)) / big
        lines.append(CheckLine("dual_slope_at_infinity", vslope, 1e-3,
                               vslope < 1e-3))

        if run.oracle:
            try:
                ov = oracle_mod.oracle_u(market, spec, family, u, x)
                diff = abs(ov.value - u_val)
                tol = max(2e-3 * tol_scale, ov.grid_bound)
                lines.append(CheckLine("oracle_u_agreement", diff, tol,
                                       diff <= tol))
            except (ScaleRefused, UnsupportedVariant) as exc:
                lines.append(CheckLine("oracle_u_agreement", None, None, None,
                                       str(exc)))
            bip = oracle_mod.oracle_bipolar(market, seed=run.seed)
            bip_ok = (bip.forward_violations == 0
                      and bip.reverse_violations == 0
                      and bip.superbudget_rejected)
            lines.append(CheckLine(
                "bipolar", float(bip.forward_violations
                                 + bip.reverse_violations), 0.0, bip_ok))
        else:
            lines.append(CheckLine("oracle_u_agreement", None, None, None,
                                   "oracle disabled"))

    print(f"ambigopt verify report: {instance.path}")
    for line in lines:
        print(line.render())
    failed = [l for l in lines if l.passed is False]
    print(f"{'FAILED' if failed else 'OK'}: "
          f"{sum(1 for l in lines if l.passed)} passed, {len(failed)} failed, "
          f"{sum(1 for l in lines if l.passed is None)} skipped")
    return 1 if failed else 0


def primal_y_scale(u, x: float) -> float:
    from .utility import marginal

    return float(marginal(u, x))


# --- sweep ---------------------------------------------------------------------


def _sweep_row(payload):
    instance_path, x, seed = payload
    instance = load_instance(instance_path)
    primal = robust.robust_primal_solve(instance.market, instance.ambiguity,
                                        instance.family, instance.utility, x,
                                        seed=seed)
    dual = robust.robust_dual_minimize(instance.market, instance.ambiguity,
                                       instance.family, instance.utility, x,
                                       seed=seed)
    q = primal.worst_case_measure
    return (x, primal.primal_value, dual.value,
            dual.value - primal.primal_value, dual.y_star,
            tuple(float(v) for v in q.probabilities))


def cmd_sweep(args) -> int:
    instance = _apply_overrides(load_instance(args.instance), args)
    run = instance.run
    xs = list(run.x_grid) if run.x_grid else [run.x]
    jobs = run.jobs or int(os.environ.get("AMBIGOPT_JOBS", "1"))
    payloads = [(args.instance, x, run.seed) for x in xs]
    if jobs > 1 and len(xs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, payloads))
    else:
        rows = [_sweep_row(p) for p in payloads]
    n = instance.market.n_states
    header = ["x", "u", "v", "gap", "y_star"] + [f"q_{i+1}" for i in range(n)]
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for x, uval, vval, gap, ystar, q in rows:
        cells = [f"{x:.17e}", f"{uval:.17e}", f"{vval:.17e}",
                 f"{gap:.17e}", f"{ystar:.17e}"] + [f"{qi:.17e}" for qi in q]
        out.write(",".join(cells) + "\n")
    for a, b in zip(rows, rows[1:]):
        if a[1] > b[1] + 1e-8:
            print("monotonicity violation in the value column", file=sys.stderr)
            return 1
    text = out.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


# --- entry point -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ambigopt",
        description="Solve and verify risk- and ambiguity-averse investment "
                    "problems on finite-state markets.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("verify", cmd_verify),
                     ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("instance", help="path to the instance file")
        p.add_argument("--x", type=float, default=None,
                       help="override the run budget")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed")
        p.add_argument("--tol", type=float, default=None,
                       help="scale verification tolerances")
        p.add_argument("--oracle", choices=("on", "off"), default=None,
                       help="enable or disable brute-force cross-checks")
        p.add_argument("--jobs", type=int, default=None,
                       help="sweep parallelism (default AMBIGOPT_JOBS or 1)")
        p.add_argument("--out", default=None, help="output file path")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error at {exc.field}: {exc}", file=sys.stderr)
        return 4
    except AmbigoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
