"""Command-line entry point: fkdet <operation> [flags]."""

import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence

from dotenv import dotenv_values
from pydantic import ValidationError

from src import __version__
from src.exceptions import ComplexError, DomainMismatchError, ExpressionSyntaxError, FKDetError, ShapeError
from src.logger import get_logger, set_console_level
from src.models import JobConfig, Operation, OutputFormat
from src.pipeline import JobRunner, format_summary

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NONCONVERGED = 3

# flags a config file may set, by JobConfig field
CONFIG_KEYS = (
    "group", "expr", "complex_file", "cap", "tol", "theta", "method",
    "eps_sweep", "out", "cache_dir", "seed", "format",
)


class UsageError(Exception):
    """Raised instead of argparse's own exit so usage errors map to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=str, default=None, help="key=value file mirroring the flags.")
    parent.add_argument("--group", type=str, default=None, help="Group spec: Z, Z^d, Z/n x Z/m, H3.")
    parent.add_argument("--expr", type=str, default=None, help="Ring expression or matrix.")
    parent.add_argument("--complex-file", type=str, default=None, help="Chain complex file (torsion).")
    parent.add_argument("--cap", type=int, default=None, help="Largest box parameter.")
    parent.add_argument("--tol", type=float, default=None, help="Per-site convergence tolerance.")
    parent.add_argument("--theta", type=float, default=None, help="Cocycle twist on Z^2.")
    parent.add_argument("--method", choices=["pseudo", "laplacian", "both"], default=None, help="Torsion method.")
    parent.add_argument("--eps-sweep", type=_float_list, default=None, help="Decreasing epsilons, comma separated.")
    parent.add_argument("--out", type=str, default=None, help="Report directory.")
    parent.add_argument("--cache-dir", type=str, default=None, help="Report cache directory.")
    parent.add_argument("--seed", type=int, default=None, help="Quasi-random seed.")
    parent.add_argument("--format", choices=[f.value for f in OutputFormat], default=None, help="Extra artifact.")
    parent.add_argument("--no-cache", action="store_true", help="Neither read nor write the report cache.")
    parent.add_argument("-v", "--verbose", action="store_true", help="Log estimator progress to stderr.")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fkdet", description="Fuglede–Kadison determinants through Følner sections")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="operation", required=True, parser_class=_Parser)
    parent = _common_flags()
    helps = {
        Operation.FKDET: "log det of a ring matrix",
        Operation.MAHLER: "logarithmic Mahler measure over Z^d",
        Operation.ENTROPY: "entropy of a principal algebraic action",
        Operation.TORSION: "L2-torsion of a chain complex file",
        Operation.SPECTRUM: "spectrum of the largest finite section",
        Operation.SELFTEST: "run the built-in known-answer suite",
    }
    for operation, text in helps.items():
        subparsers.add_parser(operation.value, parents=[parent], help=text)
    return parser


def load_config_file(path: str) -> Dict[str, object]:
    """Read a key=value config file; keys use flag names with '-' or '_'."""
    values = {}
    for key, value in dotenv_values(path).items():
        key = key.strip().lower().lstrip("-").replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"Unknown key {key!r} in {path}")
        if value is None or value == "":
            continue
        values[key] = _float_list(value) if key == "eps_sweep" else value
    return values


def job_config(args: argparse.Namespace) -> JobConfig:
    """Merge defaults, the config file and flags (flags win) into a JobConfig."""
    fields: Dict[str, object] = {}
    if args.config:
        fields.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    return JobConfig(operation=args.operation, **fields)


def _main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = job_config(args)
    except UsageError as e:
        print(f"fkdet: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"fkdet: invalid job: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.verbose:
        set_console_level(logging.DEBUG)

    try:
        runner = JobRunner(config, use_cache=not args.no_cache)
        record = runner.run()
    except (ExpressionSyntaxError, ComplexError, ShapeError, DomainMismatchError) as e:
        print(f"fkdet: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"fkdet: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FKDetError as e:
        print(f"fkdet: {e}", file=sys.stderr)
        return EXIT_USAGE

    print(format_summary(record))
    print(f"report  {runner.report_paths(record.job_hash)[0]}")
    if record.nonconverged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def main() -> None:
    raise SystemExit(_main())


if __name__ == "__main__":
    main()
