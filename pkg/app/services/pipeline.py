"""Per-sweep-point evaluation: channel, bounds and optimised composable rates."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from app.core.config import get_settings
from app.core.exceptions import RegimeError
from app.core.logging import logger
from app.models.results import ChannelPoint, FadingModel, PointResult, RateOptimum, Regime, TurbulenceState
from app.models.schemas import LinkGeometry, NoiseModel, ProtocolConfig, Scenario, Strategy
from app.services.beam_optics import eta_diffraction
from app.services.bounds import delta_correction, loss_bound, thermal_bounds, trusted_setup_parameters
from app.services.environment import eta_atm, n_background, n_total
from app.services.estimation import worst_case_noise
from app.services.fading import build_fading_model
from app.services.finite_size import composite_epsilon, optimize_rate
from app.services.oracle_mc import fading_ks_oracle
from app.services.scenario import sweep_values
from app.services.turbulence import turbulence_state


settings = get_settings()

COLUMNS: List[str] = [
    "schema_version",
    "sweep_value",
    "eta_d",
    "eta_st",
    "eta",
    "sigma",
    "delta",
    "loss_bound",
    "thermal_upper",
    "thermal_lower",
    "rate_collective",
    "rate_general",
    "eps",
    "eps_prime",
    "mu_opt",
    "eta_th_opt",
    "rytov_var",
    "regime",
    "flags",
]

KS_COLUMN = "ks_distance"


# -----------------------------------------------------
# Sweep application
# -----------------------------------------------------
@dataclass(frozen=True)
class PointInputs:
    geometry: LinkGeometry
    noise: NoiseModel
    protocol: ProtocolConfig
    general: Optional[ProtocolConfig]
    mu: Optional[float] = None
    eta_th_fraction: Optional[float] = None


def _with_slots(config: Optional[ProtocolConfig], slots: int) -> Optional[ProtocolConfig]:
    if config is None:
        return None
    return ProtocolConfig(**{**config.model_dump(), "strategy": Strategy.LATTICE, "slots": slots})


def point_inputs(scenario: Scenario, value: float) -> PointInputs:
    """Inputs of one sweep point; non-distance sweeps run at the scenario's z."""
    variable = scenario.sweep.variable
    geometry = scenario.geometry
    noise = scenario.noise
    protocol = scenario.protocol
    general = scenario.general

    if variable == "z":
        geometry = geometry.model_copy(update={"z": float(value)})
    elif variable == "aR":
        geometry = geometry.model_copy(update={"rx_aperture": float(value)})
        noise = noise.model_copy(update={"rx_aperture": float(value)})
    elif variable == "mu":
        return PointInputs(geometry, noise, protocol, general, mu=float(value))
    elif variable == "eta_th":
        return PointInputs(geometry, noise, protocol, general, eta_th_fraction=float(value))
    elif variable == "M":
        slots = int(round(value))
        return PointInputs(geometry, noise, _with_slots(protocol, slots), _with_slots(general, slots))

    return PointInputs(geometry, noise, protocol, general)


def classify_points(scenario: Scenario) -> List[Tuple[int, float, TurbulenceState]]:
    """Turbulence state of every sweep point, without computing any rate."""
    out = []
    for index, value in enumerate(sweep_values(scenario.sweep)):
        inputs = point_inputs(scenario, float(value))
        out.append((index, float(value), turbulence_state(inputs.geometry, scenario.turbulence)))
    return out


def check_regimes(scenario: Scenario, override: bool = False) -> List[Tuple[int, float, TurbulenceState]]:
    """Raise RegimeError at the first strong-turbulence point unless overridden."""
    states = classify_points(scenario)
    for index, value, state in states:
        if state.regime == Regime.STRONG:
            if not override:
                raise RegimeError(index, value, state.rytov_var)
            logger.warning(f"point {index} (value {value:g}) is in strong turbulence; regime check overridden")
    return states


# -----------------------------------------------------
# Point evaluation
# -----------------------------------------------------
def noise_bound(config: ProtocolConfig, eta: float, n_bar: float) -> float:
    """Worst-case thermal number n'; independent of tau and mu."""
    reference = ChannelPoint(tau=eta, n_bar=n_bar, mu=2.0)
    return worst_case_noise(config.estimation(), reference, pilot=config.pilot)


def _optimise(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    inputs: PointInputs,
    general: bool,
) -> RateOptimum:
    eta_th = None
    if inputs.eta_th_fraction is not None:
        eta_th = inputs.eta_th_fraction * fading.eta
    return optimize_rate(config, fading, n_bar_prime, general=general, mu=inputs.mu, eta_th=eta_th)


def evaluate_point(
    scenario: Scenario,
    index: int,
    value: float,
    seed: Optional[int] = None,
    state: Optional[TurbulenceState] = None,
) -> PointResult:
    inputs = point_inputs(scenario, value)
    geometry = inputs.geometry
    flags: List[str] = []

    turb = state or turbulence_state(geometry, scenario.turbulence)
    if turb.regime == Regime.STRONG:
        flags.append("strong_overridden")
    elif turb.regime == Regime.WEAK_NUMERICAL_WARN:
        flags.append("weak_numerical_warn")

    atm = eta_atm(scenario.extinction, geometry.altitude, geometry.z)
    fading = build_fading_model(geometry, turb, inputs.noise.eta_eff, atm)
    n_bar = n_total(inputs.noise, geometry.wavelength)

    # bounds (optionally with the setup loss and noise trusted)
    bound_model = fading
    bound_noise = n_bar
    if scenario.trusted_setup:
        eta_trusted, bound_noise = trusted_setup_parameters(
            fading.eta_st, atm, inputs.noise.eta_eff, n_background(inputs.noise, geometry.wavelength)
        )
        bound_model = fading.with_eta(eta_trusted)
        flags.append("trusted_setup")

    thermal = thermal_bounds(bound_model, bound_noise)
    if thermal.clamped:
        flags.append("clamped")

    values: Dict[str, float] = {
        "eta_d": eta_diffraction(geometry),
        "eta_st": fading.eta_st,
        "eta": fading.eta,
        "sigma": fading.sigma,
        "delta": delta_correction(bound_model),
        "loss_bound": loss_bound(bound_model),
        "thermal_upper": thermal.upper,
        "thermal_lower": thermal.lower,
        "rate_collective": math.nan,
        "rate_general": math.nan,
        "eps": composite_epsilon(inputs.protocol).eps,
        "eps_prime": math.nan,
        "mu_opt": math.nan,
        "eta_th_opt": math.nan,
        "rytov_var": turb.rytov_var,
    }

    # composable rates are defined in weak turbulence only
    if turb.regime.is_weak:
        collective = _optimise(inputs.protocol, fading, noise_bound(inputs.protocol, fading.eta, n_bar), inputs, False)
        values["rate_collective"] = collective.rate
        if collective.found:
            values["mu_opt"] = collective.mu
            values["eta_th_opt"] = collective.eta_th if collective.eta_th is not None else math.nan
        else:
            flags.append("rate_zero")

        if inputs.general is not None:
            general = _optimise(inputs.general, fading, noise_bound(inputs.general, fading.eta, n_bar), inputs, True)
            values["rate_general"] = general.rate
            if general.eps is not None and general.eps.eps_prime is not None:
                values["eps_prime"] = general.eps.eps_prime

    if scenario.oracle_samples > 0:
        values[KS_COLUMN] = _ks_column(fading, scenario.oracle_samples, seed, index)

    logger.debug(
        f"point {index}: value={value:g} eta={fading.eta:.4e} sigma={fading.sigma:.3e} "
        f"UB={thermal.upper:.4e} R={values['rate_collective']:.4e}"
    )

    return PointResult(index=index, sweep_value=value, values=values, regime=turb.regime, flags=tuple(flags))


def _ks_column(fading: FadingModel, samples: int, seed: Optional[int], index: int) -> float:
    if fading.sigma == 0 or fading.d != 0:
        return math.nan
    base = settings.DEFAULT_SEED if seed is None else seed
    # one independent stream per point
    return fading_ks_oracle(fading, seed=base + index, samples=samples).value


# -----------------------------------------------------
# Sweep
# -----------------------------------------------------
def run_sweep(
    scenario: Scenario,
    seed: Optional[int] = None,
    threads: int = 1,
    override_regime: bool = False,
) -> List[PointResult]:
    """Evaluate all sweep points; results come back in sweep order."""
    states = check_regimes(scenario, override=override_regime)
    logger.info(f"evaluating {len(states)} sweep point(s) with {threads} thread(s)")

    def work(item: Tuple[int, float, TurbulenceState]) -> PointResult:
        index, value, state = item
        return evaluate_point(scenario, index, value, seed=seed, state=state)

    if threads > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, states))
    return [work(item) for item in states]


def to_rows(results: List[PointResult], with_ks: bool = False) -> List[Dict[str, object]]:
    rows = []
    for result in results:
        row: Dict[str, object] = {
            "schema_version": settings.CSV_SCHEMA_VERSION,
            "sweep_value": result.sweep_value,
            **{key: result.values.get(key, math.nan) for key in COLUMNS[2:-3]},
            "rytov_var": result.values.get("rytov_var", math.nan),
            "regime": result.regime.value,
            "flags": ";".join(result.flags),
        }
        if with_ks:
            row[KS_COLUMN] = result.values.get(KS_COLUMN, math.nan)
        rows.append(row)
    return rows
