import argparse
import sys
from typing import List, Optional

from app.commands import presets, run, validate
from app.core.config import get_settings
from app.core.exceptions import EXIT_FAILURE, EXIT_PARSE, FsoQkdError, ScenarioParseError
from app.core.logging import logger, set_verbosity


# ------------------------------------------------------------------
# Settings
# ------------------------------------------------------------------

settings = get_settings()

SEED_MAX = (1 << 64) - 1


# ------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fso-qkd", description=settings.APP_NAME)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Debug logging.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")

    sub = parser.add_subparsers(dest="cmd", required=True)
    run.register(sub)
    validate.register(sub)
    presets.register(sub)

    return parser


def _validate_args(args: argparse.Namespace) -> None:
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed <= SEED_MAX:
        raise ValueError(f"--seed must be an unsigned 64-bit integer, got {seed}")

    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        raise ValueError(f"--threads must be >= 1, got {threads}")


# ------------------------------------------------------------------
# Entry point
# ------------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verbosity(args.verbose)

    try:
        _validate_args(args)
    except ValueError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_PARSE

    try:
        return args.handler(args)

    except ScenarioParseError as e:
        print(f"{getattr(args, 'scenario', '')}: {e}", file=sys.stderr)
        return e.exit_code

    except FsoQkdError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    except Exception as e:
        logger.error(f"Unexpected failure in '{args.cmd}': {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
