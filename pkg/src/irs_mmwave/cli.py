"""Command-line entry point: ``irs-mmwave {run, verify-scaling, solve, eta}``.

Exit codes: 0 success, 1 bad input (config, instance file, arguments),
2 solver failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import List, Optional

import numpy as np

from . import analysis, harness, precoding
from .errors import ConfigError, IrsError, InvalidArgumentError
from .instance import read_instance

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

SOLVE_TAGS = ("no_irs", "closed_form", "analytical", "sdr", "upper_bound", "brute_force")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, metavar="PATH", help="key = value experiment file")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="set a config key, wins over the file (repeatable)")
    p.add_argument("--solvers", help="comma-separated solver tags, e.g. no_irs,analytical:2")
    p.add_argument("--bits", type=int, help="also run every quantizable solver with N-bit phases")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--progress", action="store_true", help="print a block counter on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs-mmwave",
                                     description="IRS-assisted mmWave beamforming simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("run", help="run a Monte Carlo experiment and write CSV"))
    _add_common(sub.add_parser("verify-scaling", help="compare simulated mean power with closed forms"))

    solve = sub.add_parser("solve", help="solve one channel instance file")
    solve.add_argument("instance", metavar="PATH")
    solve.add_argument("--solvers", default="analytical", help=f"any of {', '.join(SOLVE_TAGS)}")
    solve.add_argument("--bits", type=int, help="quantize the phases to N bits")
    solve.add_argument("--power-dbm", type=float, default=30.0)
    solve.add_argument("--seed", type=int, default=0, help="seed for SDR randomization")
    solve.add_argument("--grid-bits", type=int, default=10, help="brute_force grid resolution")

    eta = sub.add_parser("eta", help="print the b-bit quantization loss for b = 1..B")
    eta.add_argument("--max-bits", "--bits", dest="max_bits", type=int, default=3, metavar="B")
    return parser


def _config(args) -> harness.ExperimentConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.trials is not None:
        overrides.append(f"trials={args.trials}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.solvers is not None:
        overrides.append(f"solvers={args.solvers}")
    cfg = harness.load_config(args.config, overrides)
    if args.bits is not None:
        if args.bits < 1:
            raise ConfigError("--bits", "must be >= 1")
        extra = [f"{t}:{args.bits}" for t in cfg.solvers
                 if ":" not in t and harness.parse_solver_tag(t)[0] in harness.QUANTIZABLE]
        tags = list(cfg.solvers) + [t for t in extra if t not in cfg.solvers]
        cfg = harness.load_config(args.config, overrides + ["solvers=" + ",".join(tags)])
    return cfg


def _progress(enabled):
    if not enabled:
        return None

    def report(i, n):
        print(f"{i}/{n}", file=sys.stderr, flush=True)
    return report


def _emit(text: str, out: Optional[str]):
    if out:
        harness.write_text(out, text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = _config(args)
    if cfg.scenario is harness.Scenario.BLOCKAGE_SWEEP:
        rows = harness.run_blockage_experiment(cfg, _progress(args.progress))
    else:
        rows = harness.run_experiment(cfg, _progress(args.progress))
    _emit(harness.summary_csv(rows), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = _config(args)
    rows = harness.verify_scaling(cfg, _progress(args.progress))
    _emit(harness.scaling_csv(rows), args.out)
    flagged = [r for r in rows if r.flagged]
    for r in flagged:
        print(f"flagged: M={r.num_elements} {r.solver} relative error {r.relative_error:.3g}",
              file=sys.stderr)
    return EXIT_OK


def _solve_one(tag: str, ch, p: float, args):
    base, _, bits = tag.partition(":")
    if base not in SOLVE_TAGS:
        raise InvalidArgumentError(f"unknown solver {base!r}")
    if base == "upper_bound":
        return precoding.sdr_upper_bound(ch, None, p)
    if base == "no_irs":
        sol = precoding.mrt_no_irs(ch.bs_user, p)
    elif base == "closed_form":
        sol = precoding.solve_single_irs(ch, ch.rank_one[0], p)
    elif base == "analytical":
        sol = precoding.solve_multi_irs_analytical(ch, None, p)
    elif base == "sdr":
        sol = precoding.solve_multi_irs_sdr(ch, None, p, rng=np.random.default_rng(args.seed))
    else:
        sol = precoding.brute_force_phases(ch, p, args.grid_bits, polish=True)
    b = int(bits) if bits else args.bits
    if b is not None and base not in ("no_irs", "brute_force"):
        sol = precoding.quantize_solution(sol, ch.rank_one_view(), p, b)
    return sol


def _cmd_solve(args) -> int:
    try:
        ch = read_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    p = harness.dbm_to_watts(args.power_dbm)
    for tag in [t.strip() for t in args.solvers.split(",") if t.strip()]:
        result = _solve_one(tag, ch, p, args)
        print(f"solver {tag}")
        if isinstance(result, float):
            print(f"power {result:.17g}")
            continue
        # the reported power is scored on the instance's full channels
        print(f"power {precoding.received_power(result.precoder, result.phase_config, ch):.17g}")
        for i, w in enumerate(result.precoder):
            print(f"w {i} {w.real:.17g},{w.imag:.17g}")
        for k, ph in enumerate(result.phase_config.phases, 1):
            print(f"theta{k} " + " ".join(format(x, ".17g") for x in ph))
    return EXIT_OK


def _cmd_eta(args) -> int:
    if args.max_bits < 1:
        raise InvalidArgumentError("B must be >= 1")
    for b in range(1, args.max_bits + 1):
        eta = analysis.quantization_ratio(b)
        print(f"{b} {eta:.4g} {10 * math.log10(eta):.4f} dB")
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "verify-scaling": _cmd_verify, "solve": _cmd_solve, "eta": _cmd_eta}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IrsError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
