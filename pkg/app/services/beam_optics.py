import math
from typing import Optional

from app.core.config import get_settings
from app.core.logging import logger
from app.models.schemas import BeamVariant, LinkGeometry


settings = get_settings()

LN2 = math.log(2.0)


# -----------------------------------------------------
# Gaussian beam propagation
# -----------------------------------------------------
def rayleigh_range(geom: LinkGeometry) -> float:
    return math.pi * geom.w0 ** 2 / geom.wavelength


def spot_size(geom: LinkGeometry, z: Optional[float] = None) -> float:
    """Field spot size w_z after free propagation over ``z`` (default geom.z)."""
    z = geom.z if z is None else z
    if z < 0:
        raise ValueError("propagation distance must be nonnegative")

    z_r = rayleigh_range(geom)
    # collimated beams carry no curvature term, so (1 - z/R0) = 1 exactly
    focus = 1.0 if geom.collimated else 1.0 - z / geom.curvature

    return geom.w0 * math.sqrt(focus ** 2 + (z / z_r) ** 2)


def diffraction_exponent(geom: LinkGeometry) -> float:
    """2 aR^2 / w_z^2, so that eta_d = 1 - exp(-exponent)."""
    return 2.0 * geom.rx_aperture ** 2 / spot_size(geom) ** 2


def eta_diffraction(geom: LinkGeometry) -> float:
    return -math.expm1(-diffraction_exponent(geom))


def diffraction_plob(geom: LinkGeometry) -> float:
    """-log2(1 - eta_d) taken from the exponent; finite where eta_d rounds to 1."""
    return diffraction_exponent(geom) / LN2


def fresnel_product(geom: LinkGeometry, z: Optional[float] = None) -> float:
    z = geom.z if z is None else z
    if z <= 0:
        raise ValueError("Fresnel number product needs z > 0")
    return (math.pi * geom.w0 * geom.rx_aperture / (geom.wavelength * z)) ** 2


# -----------------------------------------------------
# Transmitter aperture
# -----------------------------------------------------
def tx_power_fraction(geom: LinkGeometry) -> float:
    """Fraction of beam power passing the transmitter aperture."""
    if geom.tx_aperture is None:
        return 1.0
    return -math.expm1(-2.0 * geom.tx_aperture ** 2 / geom.w0 ** 2)


def check_tx_aperture(geom: LinkGeometry) -> Optional[str]:
    """Warn when aT < 2 w0, i.e. transmitter diffraction is no longer negligible."""
    if geom.tx_aperture is None:
        return None

    if geom.tx_aperture < settings.TX_APERTURE_RATIO * geom.w0:
        message = (
            f"transmitter aperture aT={geom.tx_aperture:g} m is below "
            f"{settings.TX_APERTURE_RATIO:g}*w0={settings.TX_APERTURE_RATIO * geom.w0:g} m; "
            f"only {tx_power_fraction(geom):.4%} of the power is passed"
        )
        logger.warning(message)
        return message

    return None


# -----------------------------------------------------
# Diffraction-limited bounds
# -----------------------------------------------------
def diffraction_bound(geom: LinkGeometry, variant: BeamVariant = BeamVariant.GENERAL) -> float:
    """Far-field repeaterless bound (bits/use) of a diffraction-limited link.

    GENERAL uses the geometry's own curvature, FOCUSED the best curvature
    (R0 = z), COLLIMATED sets R0 = infinity.
    """
    if variant == BeamVariant.FOCUSED:
        return 2.0 * fresnel_product(geom) / LN2

    if variant == BeamVariant.COLLIMATED:
        z_r = rayleigh_range(geom)
        return (2.0 / LN2) * geom.rx_aperture ** 2 / (geom.w0 ** 2 * (1.0 + (geom.z / z_r) ** 2))

    w_z = spot_size(geom)
    return (2.0 / LN2) * (geom.rx_aperture / w_z) ** 2


def max_distance_for_loss(geom: LinkGeometry, n_bar: float) -> float:
    """Closed-form collimated z_max from 2 f_0R(z) = -ln(1 - n_bar)."""
    if n_bar <= 0:
        return math.inf
    target = -math.log1p(-n_bar)
    return math.pi * geom.w0 * geom.rx_aperture / geom.wavelength * math.sqrt(2.0 / target)
