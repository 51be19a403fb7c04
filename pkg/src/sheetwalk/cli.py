"""Command-line front end: ``sheetwalk simulate | couple | convergence | verify``.

Exit codes: 0 ok, 1 verification failure, 2 bad configuration, 3 I/O error,
4 numeric failure (Brownian horizon exhausted after retries).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass

from . import __version__
from .coupling import HorizonExhausted, coupling_record
from .gridio import FORMATS, GridIOError, provenance, write_text
from .sheet import EXPLORATORY, THEOREM, GridSpec, SheetParams, build_sheet, render_grid

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4
COUPLE_WARN_N = 512
# fields that control execution only and are kept out of the provenance block
EXECUTION_ONLY = ("out", "workers", "timing")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n: int | None = None
    lam: float | None = None
    d: int = 2
    seed: int = 0
    replications: int | None = None
    grid: list | None = None
    schedule: list | None = None
    out: str | None = None
    format: str | None = None
    mode: str = THEOREM
    refine: int = 4
    bridge: bool = True
    workers: int = 1
    timing: bool = False
    only: list | None = None
    inject_fault: bool = False

    def provenance(self) -> dict:
        cfg = {k: v for k, v in asdict(self).items() if k not in EXECUTION_ONLY}
        return provenance(cfg)


def _default_seed() -> int:
    raw = os.environ.get("SHEETWALK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SHEETWALK_SEED must be an integer, got {raw!r}") from None


def _parse_int_list(text, sep, field_name):
    try:
        vals = [int(x) for x in text.split(sep) if x.strip()]
    except ValueError:
        raise ConfigError(f"--{field_name}: expected integers separated by {sep!r}, got {text!r}") from None
    if not vals:
        raise ConfigError(f"--{field_name}: empty list")
    return vals


def _lambda(args):
    if args.lam is not None and args.lambda_inv is not None:
        raise ConfigError("--lambda and --lambda-inv are mutually exclusive")
    if args.lambda_inv is not None:
        if not args.lambda_inv > 0:
            raise ConfigError("--lambda-inv must be positive")
        return 1.0 / args.lambda_inv
    if args.lam is None:
        raise ConfigError("--lambda (or --lambda-inv) is required")
    return args.lam


def build_config(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    cfg.seed = _default_seed() if args.seed is None else args.seed
    if cfg.seed < 0:
        raise ConfigError("--seed must be nonnegative")
    cfg.workers = getattr(args, "workers", 1)
    if cfg.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg.out = getattr(args, "out", None)
    if args.command == "verify":
        cfg.only = args.only
        cfg.inject_fault = args.inject_fault
        return cfg
    cfg.lam = _lambda(args)
    cfg.mode = getattr(args, "mode", THEOREM)
    cfg.refine = getattr(args, "refine", 4)
    if cfg.refine < 1:
        raise ConfigError("--refine must be >= 1")
    if args.command == "simulate":
        cfg.n, cfg.d = args.n, args.d
        cfg.grid = _parse_int_list(args.grid, "x", "grid")
        if len(cfg.grid) == 1:
            cfg.grid = cfg.grid * cfg.d
        if len(cfg.grid) != cfg.d or min(cfg.grid) < 1:
            raise ConfigError(f"--grid: need {cfg.d} positive sizes, got {args.grid!r}")
        fmt = args.format
        if fmt is None:
            fmt = "json" if cfg.out and cfg.out.endswith(".json") else "csv"
        cfg.format = fmt
    elif args.command == "couple":
        cfg.n = args.n
        cfg.bridge = not args.no_bridge
        cfg.timing = args.timing
    elif args.command == "convergence":
        cfg.schedule = _parse_int_list(args.schedule, ",", "schedule")
        if len(cfg.schedule) < 3:
            raise ConfigError("--schedule: need at least 3 values of n")
        if any(b <= a for a, b in zip(cfg.schedule, cfg.schedule[1:])):
            raise ConfigError("--schedule: values must be strictly ascending")
        cfg.replications = args.reps
        if cfg.replications < 1:
            raise ConfigError("--reps must be >= 1")
    if cfg.n is not None and cfg.n < 1:
        raise ConfigError("--n must be a positive integer")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for n in ([cfg.n] if cfg.n is not None else cfg.schedule):
                SheetParams(n, cfg.lam, cfg.d, cfg.mode)
    except ValueError as exc:
        raise ConfigError(f"--lambda: {exc}") from None
    return cfg


def _emit(cfg: RunConfig, text: str):
    if cfg.out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(cfg.out, text)


def cmd_simulate(cfg: RunConfig) -> int:
    params = SheetParams(cfg.n, cfg.lam, cfg.d, cfg.mode)
    if params.outside_theorem:
        print(f"warning: lambda={cfg.lam} is outside the theorem range", file=sys.stderr)
    sheet = build_sheet(params, cfg.seed)
    _emit(cfg, render_grid(sheet, GridSpec.uniform(cfg.grid), cfg.format, cfg.provenance()))
    return EXIT_OK


def _json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def cmd_couple(cfg: RunConfig) -> int:
    if cfg.n > COUPLE_WARN_N:
        print(f"warning: n={cfg.n} is above the desk-scale cap {COUPLE_WARN_N}; "
              f"this needs {2 * cfg.n * cfg.n} embeddings per strip", file=sys.stderr)
    record = coupling_record(cfg.n, cfg.lam, cfg.seed, cfg.refine, cfg.bridge, timing=cfg.timing)
    record["provenance"] = cfg.provenance()
    _emit(cfg, _json(record))
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    from .experiments import convergence_table

    table = convergence_table(cfg.schedule, cfg.lam, cfg.replications, cfg.seed, cfg.refine, cfg.workers)
    table["accepted"] = table["inversions"] <= 1 and table["slope"] < 0
    table["provenance"] = cfg.provenance()
    _emit(cfg, _json(table))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verification import CRITERIA, run_criteria

    names = None
    if cfg.only:
        names = [x for item in cfg.only for x in item.split(",") if x]
        bad = [x for x in names if x not in CRITERIA]
        if bad:
            raise ConfigError(f"--only: unknown criteria {bad}; choose from {list(CRITERIA)}")
    log = lambda line: print(line, file=sys.stderr)  # noqa: E731
    results = run_criteria(names, cfg.seed, cfg.workers, cfg.inject_fault, log=log)
    report = {
        "passed": all(r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
        "criteria": [r.as_dict() for r in results],
        "provenance": cfg.provenance(),
    }
    _emit(cfg, json.dumps(report, sort_keys=True, indent=1, default=_jsonable) + "\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def _jsonable(x):
    if hasattr(x, "item"):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, lam=True):
        p.add_argument("--seed", type=int, default=None, help="master seed (default $SHEETWALK_SEED or 0)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--workers", type=int, default=1)
        if lam:
            p.add_argument("--lambda", dest="lam", type=float, default=None)
            p.add_argument("--lambda-inv", type=float, default=None, help="give lambda as 1 / value")
            p.add_argument("--refine", type=int, default=4, help="time refinement of the error grid")

    p = sub.add_parser("simulate", help="simulate W_n on a grid")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--grid", default="200x200", help="points per axis, e.g. 200x200")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--mode", choices=(THEOREM, EXPLORATORY), default=THEOREM)

    p = sub.add_parser("couple", help="one coupled realization and its sup error")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--no-bridge", action="store_true", help="disable the bridge crossing check")
    p.add_argument("--timing", action="store_true", help="record wall-clock runtime")

    p = sub.add_parser("convergence", help="median sup error across an n schedule")
    common(p)
    p.add_argument("--schedule", default="16,32,64,128,256")
    p.add_argument("--reps", type=int, default=50)

    p = sub.add_parser("verify", help="run the acceptance checks")
    common(p, lam=False)
    p.add_argument("--only", action="append", default=None, help="criterion name(s), comma separated")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


COMMANDS = {"simulate": cmd_simulate, "couple": cmd_couple, "convergence": cmd_convergence,
            "verify": cmd_verify}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"sheetwalk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridIOError, OSError) as exc:
        print(f"sheetwalk: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HorizonExhausted as exc:
        print(f"sheetwalk: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
