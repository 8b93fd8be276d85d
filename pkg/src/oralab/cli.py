"""Command-line entry point.

Exit codes: 0 ok, 2 invariant violation, 3 invalid config.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .errors import (BarrierDiagnostic, ConfigError, InvariantViolation, KernelWiderThanDomain,
                     OralabError, SandwichViolation, TruncationLoss)
from .harness import compare_models, run_scenario
from .scenario import PRESETS, load_scenario, preset

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 2, 3

log = logging.getLogger("oralab")


def _scenario(args, model: str | None = None):
    if args.config is None:
        raise ConfigError("--config is required (a JSON file or a preset name)")
    sc = preset(args.config) if args.config in PRESETS else load_scenario(args.config)
    if model is not None and sc.model != model:
        raise ConfigError(f"this command needs a {model} scenario, got {sc.model}")
    return sc


def _out(args, default: str) -> Path:
    return Path(args.out_dir or default)


def cmd_solve(args, model):
    sc = _scenario(args, model)
    out = run_scenario(sc, _out(args, f"runs/{sc.name}"), threads=args.threads, seed=args.seed, parts=("solve",))
    print(out)


def cmd_simulate(args, model):
    sc = _scenario(args, model)
    if not sc.simulation.N:
        raise ConfigError("scenario has no simulation.N list")
    out = run_scenario(sc, _out(args, f"runs/{sc.name}"), threads=args.threads, seed=args.seed,
                       parts=("simulate",))
    print(out)


def cmd_check_ora(args):
    sc = _scenario(args)
    out = run_scenario(sc, _out(args, f"runs/{sc.name}"), threads=args.threads, seed=args.seed, parts=("ora",))
    print(out / "ora.csv")


def cmd_compare(args):
    sc = _scenario(args)
    if args.seed is not None:
        sc = sc.model_copy(update={"simulation": sc.simulation.model_copy(update={"seed": args.seed})})
    rep = compare_models(sc, threads=args.threads)
    text = json.dumps(rep.to_json(), indent=2, sort_keys=True)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(text + "\n")
    print(text)


def cmd_sweep(args):
    sc = _scenario(args)
    print(run_scenario(sc, _out(args, f"runs/{sc.name}"), threads=args.threads, seed=args.seed))


def cmd_presets(args):
    from . import acceptance
    if args.show:
        print(json.dumps(preset(args.show).model_dump(mode="json"), indent=2))
        return EXIT_OK
    if args.run:
        name = args.run
        if name.startswith("acceptance-"):
            k = int(name.split("-", 1)[1])
            if k not in acceptance.CRITERIA:
                raise ConfigError(f"no acceptance criterion {k}")
            res = acceptance.CRITERIA[k]()
            print(res.line())
            return EXIT_OK if res.passed else EXIT_INVARIANT
        sc = preset(name)
        print(run_scenario(sc, _out(args, f"runs/{sc.name}"), threads=args.threads, seed=args.seed))
        return EXIT_OK
    for name in sorted(PRESETS):
        print(name)
    for k in sorted(acceptance.CRITERIA):
        print(f"acceptance-{k}")
    return EXIT_OK


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand. The subcommand
    copy uses SUPPRESS defaults so it never overwrites a flag given earlier."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", default=d(None), help="scenario JSON file or preset name")
    c.add_argument("--out-dir", default=d(None), help="run directory (default runs/<name>)")
    c.add_argument("--seed", type=int, default=d(None), help="override simulation seed")
    c.add_argument("--threads", type=int, default=d(1), help="worker pool size")
    c.add_argument("--strict", action="store_true", default=d(False), help="turn diagnostic warnings into errors")
    c.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common(True)
    p = argparse.ArgumentParser(prog="oralab", parents=[_common(False)],
                                description="Barrier solvers and particle simulators for heat flow "
                                            "with order-respecting absorption.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-rab", parents=[common], help="barrier sweep, removal at the boundary")
    sub.add_parser("solve-raq", parents=[common], help="barrier sweep, removal at a quantile")
    sub.add_parser("simulate-rab", parents=[common], help="particle replicas, removal at the boundary")
    sub.add_parser("simulate-raq", parents=[common], help="particle replicas, removal at a quantile")
    sub.add_parser("check-ora", parents=[common], help="absorption residuals of barriers and traces")
    sub.add_parser("compare", parents=[common], help="barrier versus simulation report")
    sub.add_parser("sweep", parents=[common], help="everything the scenario asks for")
    pr = sub.add_parser("presets", parents=[common], help="list, show or run named presets")
    pr.add_argument("--show", metavar="NAME")
    pr.add_argument("--run", metavar="NAME", help="scenario preset or acceptance-<k>")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    dispatch = {
        "solve-rab": lambda: cmd_solve(args, "rab"),
        "solve-raq": lambda: cmd_solve(args, "raq"),
        "simulate-rab": lambda: cmd_simulate(args, "rab"),
        "simulate-raq": lambda: cmd_simulate(args, "raq"),
        "check-ora": lambda: cmd_check_ora(args),
        "compare": lambda: cmd_compare(args),
        "sweep": lambda: cmd_sweep(args),
        "presets": lambda: cmd_presets(args),
    }
    with warnings.catch_warnings():
        if args.strict:
            for cat in (BarrierDiagnostic, KernelWiderThanDomain, TruncationLoss):
                warnings.simplefilter("error", cat)
        try:
            code = dispatch[args.command]()
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (InvariantViolation, SandwichViolation) as exc:
            print(f"invariant violated: {exc}", file=sys.stderr)
            return EXIT_INVARIANT
        except (BarrierDiagnostic, KernelWiderThanDomain, TruncationLoss) as exc:
            print(f"strict mode: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_INVARIANT
        except OralabError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_INVARIANT
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
