#!/usr/bin/env python3
"""
axiomlib Main Program

Command-line entry point for the containment simulator. Each subcommand loads
a scenario file (or succession parameters), runs it, prints a short summary
and writes its artifacts to the --out directory.

Features:
- run: one scenario, with report and binary/text chain dumps
- ablate: the single-omission matrix over the pathway catalogue
- sweep: breach frequency over an availability grid
- succession: generation handoffs against the hack probability
- dump-chain: re-verify and re-serialise a run's chain dump

Exit codes:
    0  contained (or command succeeded)
    1  error (parse failure, invalid input, corrupted dump)
    2  breached
    3  ablation coverage regression (an omission breaks nothing)

Usage:
    axiomlib run scenarios/impersonation-sabotage.yaml --out runs/imp
    axiomlib ablate scenarios/base.yaml --format json
    axiomlib sweep scenarios/sweep.yaml --grid 0,0.25,0.5,0.75,1 --trials 50
    axiomlib succession --generations 3 --n 5 --k 4 --p 0.3 --trials 1000
    axiomlib dump-chain runs/imp
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import CONFIG_FILE, apply_override, fraction, load_config
from .errors import AxiomError, MissingArtifactsError
from .ledger import dump_chain, format_chain_text, load_chain, parse_chain_text, verify_dump
from .report import ChainSummary, RunReport, render
from .scenario import load_scenario
from .simulation import PATHWAYS, run_ablation_matrix, simulate, succession_run, sweep_availability

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BREACHED = 2
EXIT_REGRESSION = 3

CHAIN_BIN = "chain.bin"
CHAIN_TXT = "chain.txt"


def _write_report(report, args):
    text = render(report, args.format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        name = "report.json" if args.format == "json" else "report.txt"
        (out / name).write_bytes(text.encode("utf-8"))
    return text


def _load_spec(args, config):
    spec = load_scenario(args.scenario, config)
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, seed=args.seed).validate()
    return spec


def cmd_run(args, config):
    """
    Run one scenario.

    Returns:
        Exit code: 0 contained, 2 breached
    """
    spec = _load_spec(args, config)
    run = simulate(spec, config)
    report = RunReport("run", spec, run.outcome, ChainSummary.of(run.ledger))
    _write_report(report, args)
    if args.out:
        out = Path(args.out)
        (out / CHAIN_BIN).write_bytes(dump_chain(run.ledger))
        (out / CHAIN_TXT).write_bytes(format_chain_text(run.ledger).encode("ascii"))

    outcome = run.outcome
    print(f"\nScenario {spec.name} (seed {spec.seed}, pathway {spec.pathway})")
    print("--------------------------------------")
    print(f"Attempts: {outcome.attempts}  Detections: {outcome.detections}  Breaches: {outcome.breach_count}")
    print(f"Chain height: {run.ledger.height}")
    print("Contained" if outcome.contained else "BREACHED")
    return EXIT_OK if outcome.contained else EXIT_BREACHED


def cmd_ablate(args, config):
    """
    Run the ablation matrix.

    Returns:
        Exit code: 0 when every omission breaks a pathway, 3 otherwise
    """
    spec = _load_spec(args, config)
    pathways = args.pathways.split(",") if args.pathways else None
    matrix = run_ablation_matrix(spec, config, pathways, args.workers)
    report = RunReport("ablate", spec, ablation=matrix)
    _write_report(report, args)

    print(f"\nAblation over {len(matrix.pathways)} pathways")
    print("--------------------------------------")
    for axiom in sorted(matrix.rows):
        broken = matrix.broken_by(axiom)
        print(f"Omit {axiom:2d}: breaks {', '.join(broken) if broken else 'nothing'}")
    uncovered = matrix.uncovered_axioms()
    if uncovered:
        print(f"Coverage regression: omitting {uncovered} breaks nothing")
        return EXIT_REGRESSION
    return EXIT_OK


def cmd_sweep(args, config):
    spec = _load_spec(args, config)
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    curve = sweep_availability(spec, grid, args.trials, config, args.workers)
    report = RunReport("sweep", spec, sweep=curve)
    _write_report(report, args)

    print(f"\nAvailability sweep ({args.trials} trials per point)")
    print("--------------------------------------")
    for point in curve.points:
        print(f"  {point.availability:5.2f}  ->  {point.frequency:.3f} (se {point.standard_error:.3f})")
    return EXIT_OK


def cmd_succession(args, config):
    result = succession_run(args.generations, args.n, args.k, args.p, args.seed, args.trials, config)
    report = RunReport("succession", succession=result, fields={"seed": args.seed})
    _write_report(report, args)

    print(f"\nSuccession: {args.generations} generations, {args.k}-of-{args.n} vaults, p={args.p}")
    print("--------------------------------------")
    print(f"Observed compromise rate: {result.observed_rate:.4f} (se {result.standard_error:.4f})")
    print(f"Expected (hack probability): {result.expected_rate:.4f}")
    print(f"Ethics lineage: {'intact' if result.lineage_intact else 'broken'}")
    return EXIT_OK


def cmd_dump_chain(args, config):
    """
    Re-verify a run's binary dump and rewrite its text dump.

    Returns:
        Exit code: 0 when the chain verifies, 1 otherwise
    """
    artifacts = Path(args.artifacts)
    source = artifacts / CHAIN_BIN
    if not source.is_file():
        raise MissingArtifactsError(f"no {CHAIN_BIN} in {artifacts}")
    data = source.read_bytes()
    integrity = verify_dump(data, config['VALIDATOR_COUNT'], fraction(config, 'CONSENSUS_THRESHOLD'))
    if not integrity.valid:
        print(f"Integrity check failed at block {integrity.bad_height}: {integrity.reason}")
        return EXIT_ERROR

    blocks = load_chain(data)
    text = format_chain_text(blocks)
    if dump_chain(parse_chain_text(text)) != data:
        print("Text dump does not round-trip to the binary dump")
        return EXIT_ERROR
    (artifacts / CHAIN_TXT).write_bytes(text.encode("ascii"))
    print(f"Chain valid: {len(blocks)} blocks, head {blocks[-1].block_hash.hex() if blocks else '-'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="axiomlib", description="Ledger-backed AGI containment simulator")
    parser.add_argument("--config", default=CONFIG_FILE, help="JSON configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration parameter")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def outputs(p):
        p.add_argument("--out", help="artifact directory")
        p.add_argument("--format", choices=("text", "json"), default="text")

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    outputs(run)
    run.set_defaults(handler=cmd_run)

    ablate = sub.add_parser("ablate", help="single-axiom omission matrix")
    ablate.add_argument("scenario")
    ablate.add_argument("--seed", type=int)
    ablate.add_argument("--pathways", help=f"comma-separated subset of: {', '.join(PATHWAYS)}")
    ablate.add_argument("--workers", type=int)
    outputs(ablate)
    ablate.set_defaults(handler=cmd_ablate)

    sweep = sub.add_parser("sweep", help="breach frequency over availability")
    sweep.add_argument("scenario")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    sweep.add_argument("--trials", type=int, default=100)
    sweep.add_argument("--workers", type=int)
    outputs(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    succession = sub.add_parser("succession", help="generation handoffs through custodian vaults")
    succession.add_argument("--generations", type=int, default=3)
    succession.add_argument("--n", type=int, default=5)
    succession.add_argument("--k", type=int, default=4)
    succession.add_argument("--p", type=float, default=0.3)
    succession.add_argument("--seed", type=int, default=0)
    succession.add_argument("--trials", type=int, default=1000)
    outputs(succession)
    succession.set_defaults(handler=cmd_succession)

    dump = sub.add_parser("dump-chain", help="verify and re-serialise a run's chain dump")
    dump.add_argument("artifacts")
    dump.set_defaults(handler=cmd_dump_chain)
    return parser


def main(argv=None):
    """
    Parse arguments and dispatch.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise AxiomError(f"--set expects KEY=VALUE, got '{item}'")
            apply_override(config, key, value)
        return args.handler(args, config)
    except (AxiomError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


# Application Entry Point
if __name__ == "__main__":
    sys.exit(main())
