"""Command line interface: ``run`` and ``error-study``.

Every flag can also be given in a flat ``key = value`` config file passed with
``--config``; keys use the flag name with or without leading dashes, and flags
given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .drivers import METHODS, StageError
from .harness import ErrorStudy, error_study, params_for, run_to_files, write_error_table
from .scenarios import BUILTIN, builtin_scenario

log = logging.getLogger("mgmc")


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _float_list(text):
    return tuple(float(s) for s in str(text).split(",") if s.strip())


def _int_list(text):
    return tuple(int(s) for s in str(text).split(",") if s.strip())


def _common(p):
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--scenario", choices=sorted(BUILTIN), default="sod")
    p.add_argument("--method", choices=METHODS, default="mgmc")
    p.add_argument("--eps", type=float, default=None, help="Knudsen number")
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--particles-per-cell", type=int, default=None)
    p.add_argument("--cfl", type=float, default=None)
    p.add_argument("--dt", type=float, default=None, help="fixed time step (default: CFL rule)")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel", choices=("pc", "ngp"), default="pc")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write snapshot CSVs")
    _common(run_p)
    run_p.add_argument("--output-times", type=_float_list, default=None,
                       help="comma-separated snapshot times (default: t_final only)")
    run_p.add_argument("--out", default="out")

    es = sub.add_parser("error-study", help="statistical error versus particle count")
    _common(es)
    es.set_defaults(scenario="smooth-accuracy", method="dsmc")
    es.add_argument("--n-list", type=_int_list, default=(25, 100, 400))
    es.add_argument("--realizations", type=int, default=10)
    es.add_argument("--ref-particles", type=int, default=2000)
    es.add_argument("--ref-realizations", type=int, default=5)
    es.add_argument("--out", default="error_study.csv")
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values installed as subparser defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in read_config(args.config).items():
        if key not in actions:
            parser.error(f"unknown config key {key!r}")
        action = actions[key]
        if action.type is not None:
            value = action.type(value)
        elif isinstance(action.const, bool):  # store_true flag
            value = value.lower() in ("1", "true", "yes", "on")
        if action.choices is not None and value not in action.choices:
            parser.error(f"config key {key!r}: invalid choice {value!r}")
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def scenario_from_args(args):
    sc = builtin_scenario(args.scenario)
    changes = {
        "eps": args.eps,
        "n_cells": args.cells,
        "particles_per_cell": args.particles_per_cell,
        "cfl": args.cfl,
        "dt": args.dt,
        "t_final": args.t_final,
    }
    changes = {k: v for k, v in changes.items() if v is not None}
    if getattr(args, "output_times", None) is not None:
        changes["output_times"] = args.output_times
    return sc.with_(**changes)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = scenario_from_args(args)
        params = params_for(sc, kernel=args.kernel, workers=args.workers)
        if args.command == "run":
            written, state = run_to_files(sc, args.method, args.seed, args.out, params)
            for path in written:
                print(path)
            log.info("%d steps to t=%.6g", state.n, state.t)
        else:
            study = ErrorStudy(args.n_list, args.realizations, args.ref_particles,
                               args.ref_realizations, args.seed)
            rows = error_study(study, args.method, sc, params)
            write_error_table(args.out, rows)
            print(args.out)
    except (StageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
