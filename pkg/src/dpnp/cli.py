"""Command line: ``dpnp run | verify | convergence | demo-sign-condition``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation (``verify`` only).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import build, load_scenario, shipped_scenarios
from .coupling import run
from .diagnostics import drift_sign_term
from .errors import CompatibilityViolation, ConfigError, DPNPError, NegativeConcentration
from .oracle import CASES, manufactured_errors
from .output import CSVWriter, write_vtk
from .verify import verify_problem

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

THREE_SPECIES_VALENCIES = (1, 1, -1)
THREE_SPECIES_CONCENTRATIONS = (1.0, 1.0, math.sqrt(3.0))


def _scenario_arg(args):
    target = args.config or args.scenario
    if target is None:
        raise ConfigError("no scenario given; pass a file, a shipped name "
                          f"({', '.join(shipped_scenarios())}) or --config PATH")
    return load_scenario(target)


def cmd_run(args, out) -> int:
    cfg = _scenario_arg(args)
    problem, c0, fp = build(cfg)
    outdir = Path(args.out or cfg.output.directory)
    names = cfg.species_names
    every = cfg.output.vtk_every
    step = {"n": 0}

    with CSVWriter(outdir / cfg.output.csv_path, names) as writer:
        def callback(state, rec):
            writer.write(rec)
            if every and step["n"] % every == 0:
                write_vtk(outdir / f"state_{step['n']:05d}.vtk", problem.grid, state, names)
            step["n"] += 1

        traj = run(problem, c0, fp, callback=callback, keep_states=False)
    last = traj.records[-1]
    if not args.quiet:
        print(f"{cfg.name or 'scenario'}: {len(traj.records) - 1} steps to t={last.t:g}, "
              f"entropy {traj.records[0].entropy:.6g} -> {last.entropy:.6g}, "
              f"clamp events {sum(r.clamp_events for r in traj.records)}", file=out)
        print(f"diagnostics written to {outdir / cfg.output.csv_path}", file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    cfg = _scenario_arg(args)
    problem, c0, fp = build(cfg)
    try:
        results = verify_problem(problem, c0, fp, seed=args.seed)
    except NegativeConcentration as exc:
        print(f"FAIL non-negativity: {exc}", file=out)
        return EXIT_INVARIANT
    failed = [r for r in results if not r.passed]
    if not args.quiet or failed:
        for r in results:
            if not args.quiet or not r.passed:
                print(r, file=out)
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_convergence(args, out) -> int:
    table = manufactured_errors(args.case, args.levels)
    print(table, file=out)
    return EXIT_OK


def sign_probe(samples: int, seed: int) -> float:
    """Smallest two-species drift integrand over random non-negative pairs."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.0, 10.0, size=(samples, 2))
    return min(drift_sign_term((1, -1), ci) for ci in c)


def cmd_demo(args, out) -> int:
    value = drift_sign_term(THREE_SPECIES_VALENCIES, THREE_SPECIES_CONCENTRATIONS)
    print("three species z = (1, 1, -1), c = (1, 1, sqrt 3):", file=out)
    print("  sum z c = 2 - sqrt 3, sum sign(z)(|z| c)^2 = 2 - 3 = -1", file=out)
    print(f"  drift integrand = {value:.15f}  (-(2 - sqrt 3) = {-(2 - math.sqrt(3)):.15f})", file=out)
    pair = drift_sign_term((1, -1), (2.0, 1.0))
    print("two species z = (1, -1), c = (2, 1):", file=out)
    print(f"  drift integrand = (c1 - c2)(c1^2 - c2^2) = {pair:.15f}", file=out)
    low = sign_probe(args.samples, args.seed)
    print(f"random two-species probe ({args.samples} samples, seed {args.seed}): "
          f"minimum {low:.6g} ({'never negative' if low >= 0 else 'NEGATIVE'})", file=out)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only print failures")
    common.add_argument("--seed", type=int, default=0, help="seed for random probes")

    parser = argparse.ArgumentParser(prog="dpnp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "integrate a scenario and write diagnostics"),
                           ("verify", "run a scenario through the invariant suite")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("scenario", nargs="?", help="scenario file or shipped scenario name")
        p.add_argument("--config", metavar="PATH", help="scenario file (alternative to the positional)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the scenario)")

    p = sub.add_parser("convergence", parents=[common], help="manufactured-solution error table")
    p.add_argument("case", choices=CASES)
    p.add_argument("--levels", type=int, nargs="+", default=[8, 16, 32], metavar="N")

    p = sub.add_parser("demo-sign-condition", parents=[common],
                       help="show the drift integrand changing sign with three species")
    p.add_argument("--samples", type=int, default=1000)
    return parser


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "convergence": cmd_convergence,
            "demo-sign-condition": cmd_demo}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompatibilityViolation as exc:
        print(f"incompatible data: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DPNPError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
