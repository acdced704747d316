import math

from app.core.config import get_settings
from app.core.logging import logger
from app.models.schemas import ExtinctionModel, NoiseModel


settings = get_settings()


# -----------------------------------------------------
# Atmospheric extinction (Beer-Lambert)
# -----------------------------------------------------
def eta_atm(model: ExtinctionModel, h: float, z: float) -> float:
    if h < 0 or z < 0:
        raise ValueError("altitude and distance must be nonnegative")
    alpha = model.alpha0 * math.exp(-h / model.scale_height)
    return math.exp(-alpha * z)


# -----------------------------------------------------
# Background noise
# -----------------------------------------------------
def receiver_etendue(model: NoiseModel) -> float:
    """Gamma_R = dlambda * dt * Omega_fov * aR^2 (dlambda in nm)."""
    return model.filter_nm * model.gate * model.fov * model.rx_aperture ** 2


def n_background(model: NoiseModel, wavelength: float) -> float:
    """Thermal photons per mode collected from the sky.

    Evaluated as written; an explicit ``n_background_override`` on the model
    replaces the computed value (used to pin published figure values).
    """
    if model.n_background_override is not None:
        return model.n_background_override

    gamma_r = receiver_etendue(model)
    value = math.pi * wavelength * gamma_r * model.sky_brightness / (settings.PLANCK_H * settings.LIGHT_C)

    logger.debug(f"n_background: Gamma_R={gamma_r:.4e}, B={model.sky_brightness:g} -> {value:.4e}")

    return value


def n_total(model: NoiseModel, wavelength: float) -> float:
    return model.eta_eff * n_background(model, wavelength) + model.n_ex
