import argparse

from app.core.exceptions import EXIT_OK
from app.services.scenario import PRESETS, preset_text


# -------------------------------------------------------------------
# presets [name]
# -------------------------------------------------------------------

def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("presets", help="Print the built-in presets as scenario text.")
    p.add_argument("name", nargs="?", choices=sorted(PRESETS), help="Print one preset only.")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    names = [args.name] if args.name else sorted(PRESETS)
    print("\n".join(preset_text(name) for name in names), end="")
    return EXIT_OK
