import argparse

from app.core.exceptions import EXIT_OK, RegimeError
from app.core.logging import logger
from app.models.results import Regime
from app.services.pipeline import classify_points
from app.services.scenario import load_scenario


# -------------------------------------------------------------------
# validate <scenario>
# -------------------------------------------------------------------

def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("validate", help="Check a scenario and classify every sweep point.")
    p.add_argument("scenario", help="Scenario file (key = value).")
    p.add_argument("--override-regime", action="store_true", help="Report strong points without failing.")
    p.set_defaults(handler=handle)


def validation_report(path: str):
    """(report lines, first strong point or None). No rates are computed."""
    scenario = load_scenario(path)
    lines = [f"scenario: {path}"]
    lines += [f"warning: {w}" for w in scenario.warnings]
    lines.append(f"sweep: {scenario.sweep.variable} ({scenario.sweep.points} points)")

    first_strong = None
    for index, value, state in classify_points(scenario):
        lines.append(
            f"point {index}: {scenario.sweep.variable}={value:g} regime={state.regime.value} "
            f"rytov={state.rytov_var:.4g} rho0={state.rho0:.4g}"
        )
        if state.regime == Regime.STRONG and first_strong is None:
            first_strong = (index, value, state)
    return lines, first_strong


def handle(args: argparse.Namespace) -> int:
    lines, first_strong = validation_report(args.scenario)
    print("\n".join(lines))

    if first_strong is not None and not args.override_regime:
        index, value, state = first_strong
        raise RegimeError(index, value, state.rytov_var)

    logger.info(f"scenario {args.scenario} is valid")
    return EXIT_OK
