import math
from typing import Optional, Tuple

from app.core.config import get_settings
from app.core.exceptions import InvalidCovarianceError
from app.core.logging import logger
from app.models.results import ChannelPoint, TwoModeCM
from app.models.schemas import Detection
from app.services.bounds import entropic_h, h_prime, rcoh_rate


settings = get_settings()


# -----------------------------------------------------
# Covariance matrix of the transmitter/receiver modes
# -----------------------------------------------------
def two_mode_cm(point: ChannelPoint) -> TwoModeCM:
    return TwoModeCM(
        a=point.mu,
        b=point.b,
        c=math.sqrt(point.tau * (point.mu ** 2 - 1.0)),
    )


def cm_det_sqrt(point: ChannelPoint) -> float:
    """sqrt(det V) = ab - c^2 = mu (1 - tau + 2 n) + tau, free of cancellation."""
    return point.mu * (1.0 - point.tau + 2.0 * point.n_bar) + point.tau


def symplectic_eigenvalues(cm: TwoModeCM, det_sqrt: Optional[float] = None) -> Tuple[float, float]:
    """(nu_plus, nu_minus) of a two-mode CM in standard form.

    ``det_sqrt`` may be passed when ab - c^2 is known in closed form.
    """
    if det_sqrt is None:
        det_sqrt = cm.a * cm.b - cm.c ** 2

    delta = cm.a ** 2 + cm.b ** 2 - 2.0 * cm.c ** 2
    # delta^2 - 4 det = (a - b)^2 (a + b - 2c)(a + b + 2c), free of cancellation
    spread = (cm.a + cm.b - 2.0 * cm.c) * (cm.a + cm.b + 2.0 * cm.c)

    if spread < 0:
        if spread < -settings.CM_TOLERANCE * max(1.0, (cm.a + cm.b) ** 2):
            raise InvalidCovarianceError(f"negative symplectic discriminant {spread:.3e} for {cm}")
        spread = 0.0

    disc_sqrt = abs(cm.a - cm.b) * math.sqrt(spread)
    nu_plus = math.sqrt((delta + disc_sqrt) / 2.0)
    nu_minus = abs(det_sqrt) / nu_plus if nu_plus > 0 else 0.0
    return nu_plus, nu_minus


def conditional_eigenvalue(point: ChannelPoint, detection: Detection) -> float:
    """Eigenvalue of the transmitter mode conditioned on the receiver's outcome."""
    det_sqrt = cm_det_sqrt(point)
    if detection == Detection.HOM:
        # sqrt(mu^2 - mu tau (mu^2 - 1)/b)
        return math.sqrt(point.mu * det_sqrt / point.b)
    # mu - tau (mu^2 - 1)/(b + 1)
    return (det_sqrt + point.mu) / (point.b + 1.0)


# -----------------------------------------------------
# Information quantities
# -----------------------------------------------------
def mutual_info(point: ChannelPoint, detection: Detection) -> float:
    signal = point.tau * point.sigma_x2
    if detection == Detection.HOM:
        return 0.5 * math.log2(1.0 + signal / point.sigma_z2)
    return math.log2(1.0 + signal / (1.0 + point.sigma_z2))


def holevo_bound(point: ChannelPoint, detection: Detection) -> float:
    cm = two_mode_cm(point)
    nu_plus, nu_minus = symplectic_eigenvalues(cm, det_sqrt=cm_det_sqrt(point))

    if nu_minus < 1.0 - settings.CM_TOLERANCE:
        raise InvalidCovarianceError(f"unphysical state: nu_minus={nu_minus!r} for {point}")

    nu_cond = conditional_eigenvalue(point, detection)
    return h_prime(nu_plus) + h_prime(nu_minus) - h_prime(nu_cond)


def asymptotic_rate_raw(point: ChannelPoint, beta: float, detection: Detection) -> float:
    return beta * mutual_info(point, detection) - holevo_bound(point, detection)


def asymptotic_rate(point: ChannelPoint, beta: float, detection: Detection) -> float:
    """beta I - chi, clamped at 0."""
    raw = asymptotic_rate_raw(point, beta, detection)
    if raw < 0:
        logger.debug(f"asymptotic rate clamped at 0 (raw {raw:.3e}) for {point}, beta={beta}")
        return 0.0
    return raw


# -----------------------------------------------------
# Large-modulation closed forms
# -----------------------------------------------------
def asymptotic_rate_hom_limit(tau: float, n_bar: float) -> float:
    return rcoh_rate(tau, n_bar)


def asymptotic_rate_het_limit(tau: float, n_bar: float) -> float:
    return (
        math.log2(tau / (math.e * (1.0 - tau) * (n_bar + 1.0)))
        - entropic_h(n_bar / (1.0 - tau))
        + entropic_h((n_bar + 1.0) / tau - 1.0)
    )
