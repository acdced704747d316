import math
from typing import Optional

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import Regime, TurbulenceState
from app.models.schemas import LinkGeometry, TurbulenceInputs
from app.services.beam_optics import spot_size


settings = get_settings()

SIGMA_TB_COEFF = 0.1337


# -----------------------------------------------------
# Refractive-index structure constant
# -----------------------------------------------------
def cn2_hufnagel_valley(h: float, wind: float, a: float) -> float:
    """Hufnagel-Valley profile at altitude ``h`` (m), rms wind ``wind`` (m/s)
    and ground-level strength ``a`` (m^-2/3)."""
    if h < 0 or wind < 0 or a < 0:
        raise ValueError("Hufnagel-Valley inputs must be nonnegative")

    upper = 5.94e-53 * (wind / 27.0) ** 2 * h ** 10 * math.exp(-h / 1000.0)
    tropo = 2.7e-16 * math.exp(-h / 1500.0)
    ground = a * math.exp(-h / 100.0)

    return upper + tropo + ground


def resolve_cn2(inputs: TurbulenceInputs, h: float) -> float:
    if inputs.cn2 is not None:
        return inputs.cn2
    return cn2_hufnagel_valley(h, inputs.wind, inputs.hv_a)


# -----------------------------------------------------
# Coherence length / Rytov
# -----------------------------------------------------
def coherence_length(cn2: float, wavelength: float, z: float) -> float:
    """Spherical-wave coherence length rho0; infinite without turbulence."""
    if cn2 < 0 or wavelength <= 0 or z < 0:
        raise ValueError("coherence_length needs Cn2 >= 0, wavelength > 0, z >= 0")
    if cn2 == 0 or z == 0:
        return math.inf
    k = 2.0 * math.pi / wavelength
    return (0.548 * k ** 2 * cn2 * z) ** (-3.0 / 5.0)


def fried_parameter(rho0: float) -> float:
    return settings.FRIED_RATIO * rho0


def rytov_variance(cn2: float, wavelength: float, z: float) -> float:
    k = 2.0 * math.pi / wavelength
    return 1.23 * cn2 * k ** (7.0 / 6.0) * z ** (11.0 / 6.0)


def rytov_horizon(cn2: float, wavelength: float) -> float:
    """Distance at which the Rytov variance reaches 1."""
    if cn2 <= 0:
        return math.inf
    k = 2.0 * math.pi / wavelength
    return (1.0 / (1.23 * cn2 * k ** (7.0 / 6.0))) ** (6.0 / 11.0)


def pointing_sigma(z: float, jitter: Optional[float] = None) -> float:
    if z < 0:
        raise ValueError("distance must be nonnegative")
    jitter = settings.POINTING_JITTER_RAD if jitter is None else jitter
    return jitter * z


# -----------------------------------------------------
# Closed-form spot sizes
# -----------------------------------------------------
def _spread_term(wavelength: float, z: float, rho0: float) -> float:
    if math.isinf(rho0):
        return 0.0
    return 2.0 * (wavelength * z / (math.pi * rho0)) ** 2


def phi_parameter(rho0: float, w0: float) -> float:
    return 0.33 * (rho0 / w0) ** (1.0 / 3.0)


def long_term_spot_closed(geom: LinkGeometry, rho0: float) -> float:
    w_z = spot_size(geom)
    return math.sqrt(w_z ** 2 + _spread_term(geom.wavelength, geom.z, rho0))


def short_term_spot_closed(geom: LinkGeometry, rho0: float) -> float:
    w_z = spot_size(geom)
    if math.isinf(rho0):
        return w_z
    phi = phi_parameter(rho0, geom.w0)
    return math.sqrt(w_z ** 2 + _spread_term(geom.wavelength, geom.z, rho0) * (1.0 - phi) ** 2)


def wander_variance_closed(geom: LinkGeometry, rho0: float) -> float:
    if math.isinf(rho0):
        return 0.0
    return SIGMA_TB_COEFF * geom.wavelength ** 2 * geom.z ** 2 / (geom.w0 ** (1.0 / 3.0) * rho0 ** (5.0 / 3.0))


# -----------------------------------------------------
# Regime classification
# -----------------------------------------------------
def weak_turbulence_check(state: TurbulenceState, geom: LinkGeometry) -> Regime:
    """Weak iff Rytov variance < 1 and z <= k min(aR, rho0)^2 (Yura).

    Within the weak regime the sub-regime follows rho0/w0 and phi.
    """
    k = geom.wavenumber
    yura_limit = k * min(geom.rx_aperture, state.rho0) ** 2

    if not state.rytov_var < 1.0 or geom.z > yura_limit:
        return Regime.STRONG

    if state.rho0 / geom.w0 >= settings.NEGLIGIBLE_WANDER_RATIO:
        return Regime.NEGLIGIBLE_WANDER
    if state.phi < settings.YURA_PHI_LIMIT:
        return Regime.WEAK_YURA
    return Regime.WEAK_NUMERICAL_WARN


# -----------------------------------------------------
# Turbulence state
# -----------------------------------------------------
def short_long_term(
    geom: LinkGeometry,
    cn2: Optional[float] = None,
    rho0: Optional[float] = None,
    jitter: Optional[float] = None,
) -> TurbulenceState:
    """Assemble the turbulence state of a link from Cn2 (or directly rho0).

    Returns:
        TurbulenceState with spot sizes and wandering standard deviations.
        Outside the Yura branch wandering is folded into the spot size:
        sigma_TB = 0 and w_st = w_lt.
    """
    if cn2 is None and rho0 is None:
        raise ValueError("short_long_term needs Cn2 or rho0")

    if rho0 is None:
        rho0 = coherence_length(cn2, geom.wavelength, geom.z)
    elif cn2 is None:
        # invert the coherence-length law so the Rytov variance stays defined
        if math.isinf(rho0) or geom.z == 0:
            cn2 = 0.0
        else:
            cn2 = rho0 ** (-5.0 / 3.0) / (0.548 * geom.wavenumber ** 2 * geom.z)

    rytov = rytov_variance(cn2, geom.wavelength, geom.z)
    phi = math.inf if math.isinf(rho0) else phi_parameter(rho0, geom.w0)
    w_z = spot_size(geom)
    sigma_p = pointing_sigma(geom.z, jitter)

    w_lt_closed = long_term_spot_closed(geom, rho0)
    provisional = TurbulenceState(
        Cn2=cn2,
        rho0=rho0,
        rytov_var=rytov,
        phi=phi,
        w_z=w_z,
        w_st=w_lt_closed,
        w_lt=w_lt_closed,
        sigma_TB=0.0,
        sigma_P=sigma_p,
        regime=Regime.STRONG,
    )
    regime = weak_turbulence_check(provisional, geom)

    if regime in (Regime.WEAK_YURA, Regime.WEAK_NUMERICAL_WARN):
        if regime == Regime.WEAK_NUMERICAL_WARN:
            logger.warning(
                f"phi={phi:.3f} >= {settings.YURA_PHI_LIMIT}: Yura closed forms used outside their validated range"
            )
        w_st = short_term_spot_closed(geom, rho0)
        sigma_tb2 = wander_variance_closed(geom, rho0)
        # w_lt^2 = w_st^2 + sigma_TB^2 holds exactly in this branch
        w_lt = math.sqrt(w_st ** 2 + sigma_tb2)
        return TurbulenceState(
            Cn2=cn2,
            rho0=rho0,
            rytov_var=rytov,
            phi=phi,
            w_z=w_z,
            w_st=w_st,
            w_lt=w_lt,
            sigma_TB=math.sqrt(sigma_tb2),
            sigma_P=sigma_p,
            regime=regime,
        )

    if regime == Regime.STRONG:
        logger.debug(f"strong turbulence at z={geom.z:g} m (rytov={rytov:.3g}); using long-term spot")

    return TurbulenceState(
        Cn2=cn2,
        rho0=rho0,
        rytov_var=rytov,
        phi=phi,
        w_z=w_z,
        w_st=w_lt_closed,
        w_lt=w_lt_closed,
        sigma_TB=0.0,
        sigma_P=sigma_p,
        regime=regime,
    )


def turbulence_state(geom: LinkGeometry, inputs: TurbulenceInputs) -> TurbulenceState:
    cn2 = resolve_cn2(inputs, geom.altitude)
    return short_long_term(geom, cn2=cn2, jitter=inputs.pointing_jitter)
