"""Command-line entry point.

    gridcollab run --scenario <path|bundled> (--method M | --compare | --validate) [--out DIR]
    gridcollab validate --scenario <path|bundled>
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import output
from .coordination import ControlMethod
from .scenario import ScenarioError, load_scenario, parse_method, resolve, validate
from .simulation import ScenarioResults, run_scenario
from .textfmt import FormatError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_INVALID = 4
EXIT_ABORTED = 5

log = logging.getLogger("gridcollab")


def _run_one(path: str, method: ControlMethod) -> ScenarioResults:
    scn = load_scenario(path, [method])
    return run_scenario(scn.feeder, scn.agents, scn.topology, scn.profiles, scn.config(method))


def run_methods(path: str, methods: list[ControlMethod], jobs: int = 1) -> dict[ControlMethod, ScenarioResults]:
    if jobs > 1 and len(methods) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {m: pool.submit(_run_one, path, m) for m in methods}
            return {m: f.result() for m, f in futures.items()}
    return {m: _run_one(path, m) for m in methods}


def cmd_validate(args) -> int:
    methods = [parse_method(args.method)] if getattr(args, "method", None) else None
    report = validate(args.scenario, methods)
    sys.stdout.write(output.dumps(report))
    return EXIT_OK if report["ok"] else EXIT_INVALID


def cmd_run(args) -> int:
    if args.validate:
        return cmd_validate(args)
    if args.compare:
        methods = list(ControlMethod)
    elif args.method:
        methods = [parse_method(args.method)]
    else:
        methods = None

    scenario_path = str(args.scenario)
    if not resolve(scenario_path).is_file():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return EXIT_NOT_FOUND
    try:
        scn = load_scenario(scenario_path, methods)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ScenarioError, FormatError, ValueError) as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    methods = scn.spec.methods

    to_run = list(methods)
    if ControlMethod.NO_CTL not in to_run:
        to_run.insert(0, ControlMethod.NO_CTL)  # curtailment baseline
    results = run_methods(scenario_path, to_run, args.jobs)
    baseline = results[ControlMethod.NO_CTL]

    out_dir = Path(args.out)
    summaries = {}
    status = EXIT_OK
    for m in methods:
        res = results[m]
        summaries[m] = output.method_summary(res, baseline)
        output.write_method(out_dir, res, summaries[m])
        if not res.complete:
            print(f"error: {m.value}: {res.abort_reason}", file=sys.stderr)
            status = EXIT_ABORTED
        else:
            s = summaries[m]
            print(f"{m.value:8s} F_v^2={s['fv_sum_then_square']:.6g} "
                  f"mean loss={s['mean_active_loss_kw']:.2f} kW")
    if len(methods) > 1:
        output.atomic_write(out_dir / "comparison.json", output.dumps(output.comparison(summaries)))
        output.atomic_write(out_dir / "comparison.csv", output.comparison_csv(summaries))
        print(f"lowest F_v^2: {output.comparison(summaries)['lowest_fv']}")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridcollab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one method or compare all five")
    r.add_argument("--scenario", required=True, help="scenario file, or 'bundled'")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--method", choices=[m.value for m in ControlMethod])
    g.add_argument("--compare", action="store_true", help="run all five control methods")
    g.add_argument("--validate", action="store_true", help="static checks only")
    r.add_argument("--out", default="results", help="output directory (default: results)")
    r.add_argument("--jobs", type=int, default=1, help="parallel scenario runs for --compare")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="static checks only")
    v.add_argument("--scenario", required=True)
    v.add_argument("--method", choices=[m.value for m in ControlMethod])
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
