"""Command-line entry point: ``maxcons <command> [options]``."""

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, FileGraphSource, apply_overrides, parse_config
from .errors import InvariantError, MaxConsError
from .experiments import RECIPES, graph_summary, reproduce_figure, run_bounds, run_robust, run_simulate
from .selfcheck import selfcheck

logger = logging.getLogger(__name__)


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "graph", None):
        cfg = cfg.model_copy(update={"graph": FileGraphSource(path=Path(args.graph), one_indexed=args.one_indexed)})
    return apply_overrides(cfg, seed=args.seed, output_dir=args.out, threads=args.threads)


def _print_paths(paths: dict[str, Path]) -> None:
    for name, path in paths.items():
        print(f"{name}: {path}")


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    summary = graph_summary(cfg.graph.build())
    cfg.noise.build()
    print(f"N={summary['n_nodes']} E={summary['edge_count']}")
    print(f"rho={summary['rho']:.10g}")
    print(f"diameter={summary['diameter']}")
    print("degree histogram: " + " ".join(f"{d}:{c}" for d, c in summary["degree_histogram"].items()))
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    report, paths = run_bounds(_load_config(args))
    for field, value in report.model_dump(mode="json").items():
        print(f"{field}={value}")
    _print_paths(paths)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    _print_paths(run_simulate(_load_config(args)))
    return 0


def cmd_robust(args: argparse.Namespace) -> int:
    _print_paths(run_robust(_load_config(args)))
    return 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    figures = sorted(RECIPES) if args.figure == "all" else [args.figure]
    for figure in figures:
        _print_paths(reproduce_figure(figure, cfg))
    return 0


def cmd_selfcheck(args: argparse.Namespace) -> int:
    report = selfcheck()
    for line in report.lines():
        print(line)
    if not report.passed:
        raise InvariantError(f"{len(report.failures())} invariant(s) failed")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import main as serve_main

    asyncio.run(serve_main())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="Seed (overrides the config file and MAXCONS_SEED)")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--threads", type=int, help="Worker threads for Monte Carlo trials")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="maxcons", description="Max consensus under additive link noise")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", parents=[common], help="Check a configuration or graph file")
    validate.add_argument("--graph", type=Path, help="Edge-list file ('N E' header, then 'i j' lines)")
    validate.add_argument("--one-indexed", action="store_true", help="Edge list uses 1-based node indices")
    validate.set_defaults(func=cmd_validate)

    sub.add_parser("bounds", parents=[common], help="Compute every growth-rate bound").set_defaults(func=cmd_bounds)
    sub.add_parser("simulate", parents=[common], help="Per-iteration statistics of one noisy run").set_defaults(
        func=cmd_simulate
    )
    sub.add_parser("robust", parents=[common], help="Run the two-run robust algorithm").set_defaults(func=cmd_robust)

    reproduce = sub.add_parser("reproduce", parents=[common], help="Regenerate the CSV series of a figure")
    reproduce.add_argument("--figure", required=True, choices=[*sorted(RECIPES), "all"])
    reproduce.set_defaults(func=cmd_reproduce)

    sub.add_parser("selfcheck", parents=[common], help="Run the fast invariant suite").set_defaults(func=cmd_selfcheck)
    sub.add_parser("serve", parents=[common], help="Start the MCP stdio server").set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except MaxConsError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code


def cli():
    """Entry point for console script."""
    sys.exit(main())


if __name__ == "__main__":
    cli()
