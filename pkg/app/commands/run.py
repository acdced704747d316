import argparse
import time

from app.core.analytics import write_run_summary
from app.core.config import get_settings
from app.core.exceptions import EXIT_OK
from app.core.logging import logger
from app.services.export import default_output, results_frame, summary_counts, write_csv
from app.services.pipeline import run_sweep
from app.services.scenario import load_scenario

settings = get_settings()


# -------------------------------------------------------------------
# run <scenario>
# -------------------------------------------------------------------

def register(subparsers: argparse._SubParsersAction) -> None:
    p = subparsers.add_parser("run", help="Evaluate a scenario sweep and write the CSV.")
    p.add_argument("scenario", help="Scenario file (key = value).")
    p.add_argument("--output", default=None, help="CSV path (default: scenario path with .csv).")
    p.add_argument("--override-regime", action="store_true", help="Continue past strong-turbulence points.")
    p.add_argument("--seed", type=int, default=None, help="Oracle seed (unsigned 64-bit).")
    p.add_argument("--threads", type=int, default=None, help="Sweep points evaluated concurrently.")
    p.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)

    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    threads = settings.DEFAULT_THREADS if args.threads is None else args.threads
    output = args.output or scenario.output_path or default_output(args.scenario, None)

    for warning in scenario.warnings:
        logger.warning(warning)

    started = time.perf_counter()
    results = run_sweep(scenario, seed=seed, threads=threads, override_regime=args.override_regime)

    frame = results_frame(results, with_ks=scenario.oracle_samples > 0)
    write_csv(frame, output)

    write_run_summary(
        csv_path=output,
        scenario_path=args.scenario,
        seed=seed,
        threads=threads,
        points=len(results),
        counts=summary_counts(results),
        wall_time=time.perf_counter() - started,
        warnings=list(scenario.warnings),
        override_regime=args.override_regime,
    )
    return EXIT_OK
