"""Command-line front end: transport solves, log-Minkowski runs, and
inequality sweeps with reproducible file output.

Every report path writes delimited output with a provenance header
(grid size, seed, version) and renders a matplotlib figure next to it.
Exit codes: 0 pass, 1 input error, 2 infeasible, 3 non-convergence,
4 assertion violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, verify
from .errors import Infeasible, SlokError
from .spheremeas import GridDensity, measure_from_json
from .transport import duals_to_body, sinkhorn, solve_plan

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGED = 3
EXIT_VIOLATION = 4


def _default_seed() -> int:
    return int(os.environ.get("SLOK_SEED", "0"))


def _header(seed, M) -> list:
    return [f"grid_M={M}", f"seed={seed}", f"version={__version__}"]


def _load_measure(path: str):
    try:
        return measure_from_json(Path(path).read_text())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise SystemExit_with(EXIT_INPUT, f"error: cannot read measure {path}: {exc}")


class SystemExit_with(SystemExit):
    def __init__(self, code, message):
        print(message, file=sys.stderr)
        super().__init__(code)


def _grid_size_of(m) -> int:
    if isinstance(m, GridDensity):
        return m.grid.size
    return m.size


# ---------------------------------------------------------------------------
# transport

def cmd_transport(args) -> int:
    mu = _load_measure(args.mu)
    nu = _load_measure(args.nu)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed
    M = _grid_size_of(mu)

    if args.sinkhorn is not None:
        print("sinkhorn mode: approximate value, exactness assertions disabled")
        try:
            res = sinkhorn(mu, nu, eps=args.sinkhorn)
        except Infeasible as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            print(f"witness: {json.dumps(exc.witness)}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"K_eps = {res.value:.12g} "
              f"(guardrail {res.lp_gap_guardrail:.3g}, "
              f"converged={res.converged}, iterations={res.iterations})")
        (out / "sinkhorn.json").write_text(json.dumps({
            "value": float(res.value), "eps": args.sinkhorn,
            "converged": bool(res.converged),
            "iterations": int(res.iterations),
            "marginal_error": float(res.marginal_error),
            "lp_gap_guardrail": float(res.lp_gap_guardrail),
        }))
        return EXIT_OK if res.converged else EXIT_NONCONVERGED

    try:
        plan, duals = solve_plan(mu, nu)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        print(f"witness: {json.dumps(exc.witness)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    print(f"K = {plan.value:.12g}")
    (out / "plan.csv").write_text(plan.to_csv(header_lines=_header(seed, M)))
    (out / "duals.json").write_text(json.dumps(duals.to_json_dict()))

    from . import plots
    from .spheremeas import make_circle_grid

    if isinstance(mu, GridDensity):
        try:
            sf, _ = duals_to_body(duals, gauge=args.gauge, grid=mu.grid)
            plots.body_outline(sf, str(out / "body.png"),
                               f"recovered body ({args.gauge})")
        except SlokError:
            pass
    return EXIT_OK


# ---------------------------------------------------------------------------
# logmink

def cmd_logmink(args) -> int:
    from . import plots
    from .body import body_to_json
    from .minkowski import fixed_point_F, minimize_F0
    from .body import POLYTOPE, SMOOTH

    mu = _load_measure(args.mu)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed
    M = _grid_size_of(mu)

    if args.method == "f0":
        regime = SMOOTH if isinstance(mu, GridDensity) else POLYTOPE
        res = minimize_F0(mu, regime=regime, max_iter=args.max_iter)
        label = "G"
    else:
        if not isinstance(mu, GridDensity):
            print("error: fixedpoint needs a grid density input", file=sys.stderr)
            return EXIT_INPUT
        res = fixed_point_F(mu, mu.grid, max_iter=args.max_iter)
        label = "F"

    sf = res.support
    uniform_like = (isinstance(mu, GridDensity)
                    and np.allclose(mu.rho, 1.0, atol=1e-12))
    if uniform_like:
        dev = float(np.max(np.abs(sf.values - sf.values.mean())))
        print(f"uniform input: minimizer is the unit-volume ball "
              f"(max deviation {dev:.3g})")
    print(f"method={args.method} converged={res.converged} "
          f"iterations={res.iterations} objective={res.trace[-1]:.12g} "
          f"stationarity={res.stationarity:.3g}")

    (out / "body.json").write_text(body_to_json(sf))
    lines = [f"# {h}" for h in _header(seed, M)]
    lines.append("iteration,objective")
    lines += [f"{i},{v:.17g}" for i, v in enumerate(res.trace)]
    (out / "trace.csv").write_text("\n".join(lines) + "\n")
    report = res.to_json_dict()
    report.update({"method": args.method, "seed": seed})
    (out / "report.json").write_text(json.dumps(report))
    plots.trace_plot(res.trace, str(out / "trace.png"),
                     f"logmink {args.method}", ylabel=label)
    plots.body_outline(sf, str(out / "body.png"), "log-Minkowski body")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# verify

def _sweep_instance(suite: str, iseed: int, M: int):
    # one-instance re-entry point used by --jobs workers
    gen = verify.run_sweep(suite, 1, iseed, M)
    _, verdict = next(iter(gen))
    return iseed, verdict


_ALL_SUITES = ("entropy-transport", "leblog", "trace", "trfh", "trfh2",
               "gage", "bonnesen", "santalo")


def cmd_verify(args) -> int:
    from . import plots

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed

    if args.suite == "counterexample":
        rep = verify.rectangle_counterexample(args.R)
        rep["threshold"] = verify.rectangle_threshold()
        verdict = "violated" if rep["violated"] else "not violated"
        print(f"R={args.R}: lhs={rep['lhs']:.12g} rhs={rep['rhs']:.12g} "
              f"-> {verdict} (threshold R* = {rep['threshold']:.6f})")
        (out / "counterexample.json").write_text(json.dumps(rep))
        return EXIT_OK

    suites = _ALL_SUITES if args.suite == "all" else (args.suite,)
    summary = {}
    failed = False
    for suite in suites:
        seeds = [seed + i for i in range(args.count)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                results = list(ex.map(_sweep_instance, [suite] * len(seeds),
                                      seeds, [args.M] * len(seeds)))
        else:
            results = list(verify.run_sweep(suite, args.count, seed, args.M))
        rows = [(s, v.margin) for s, v in results]
        name = suite.replace("-", "_")
        (out / f"margins_{name}.csv").write_text(
            verify.margins_csv(rows, header_lines=_header(seed, args.M)))
        plots.margin_histogram([m for _, m in rows],
                               str(out / f"margins_{name}.png"),
                               f"{suite} margins")
        bad = [(s, v) for s, v in results if not v.passed]
        summary[suite] = {
            "count": len(results),
            "min_margin": min(m for _, m in rows),
            "violations": len(bad),
        }
        for s, v in bad:
            failed = True
            print(f"VIOLATION suite={suite} instance_seed={s} "
                  f"margin={v.margin:.6g}", file=sys.stderr)
    (out / "summary.json").write_text(json.dumps(
        {"seed": seed, "M": args.M, "suites": summary}))
    for suite, info in summary.items():
        print(f"{suite}: {info['count']} instances, "
              f"min margin {info['min_margin']:.6g}, "
              f"{info['violations']} violations")
    return EXIT_VIOLATION if failed else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slok")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transport", help="solve one transport instance")
    t.add_argument("--mu", required=True)
    t.add_argument("--nu", required=True)
    t.add_argument("--out", default="slok-out")
    t.add_argument("--sinkhorn", type=float, default=None, metavar="EPS")
    t.add_argument("--gauge", choices=["unit_volume", "h0_equals_1"],
                   default="unit_volume")
    t.add_argument("--seed", type=int, default=_default_seed())
    t.set_defaults(func=cmd_transport)

    l = sub.add_parser("logmink", help="solve the log-Minkowski problem")
    l.add_argument("--mu", required=True)
    l.add_argument("--method", choices=["f0", "fixedpoint"], default="f0")
    l.add_argument("--max-iter", type=int, default=500)
    l.add_argument("--out", default="slok-out")
    l.add_argument("--seed", type=int, default=_default_seed())
    l.set_defaults(func=cmd_logmink)

    v = sub.add_parser("verify", help="run inequality sweeps")
    v.add_argument("--suite", required=True,
                   choices=list(_ALL_SUITES) + ["counterexample", "all"])
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--seed", type=int, default=_default_seed())
    v.add_argument("--M", type=int, default=180)
    v.add_argument("--R", type=float, default=10.0)
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--out", default="slok-out")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except SlokError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
