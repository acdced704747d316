import math
from typing import Tuple

import numpy as np
from scipy import special

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import ChannelPoint
from app.models.schemas import Detection, EstimationConfig


settings = get_settings()


# -----------------------------------------------------
# Confidence level -> number of standard deviations
# -----------------------------------------------------
def deviations_from_eps(eps_pe: float, force_tail: bool = False) -> float:
    """w such that a Gaussian estimator exceeds w standard deviations with
    probability eps_pe. Below TAIL_EPS_THRESHOLD the tail bound sqrt(2 ln 1/eps)
    replaces the exact inverse; the two branches are not joined continuously.
    """
    if not 0.0 < eps_pe < 0.5:
        raise ValueError(f"eps_pe must lie in (0, 1/2), got {eps_pe}")

    if force_tail or eps_pe < settings.TAIL_EPS_THRESHOLD:
        return math.sqrt(2.0 * math.log(1.0 / eps_pe))

    # sqrt(2) erfinv(1 - 2 eps) == sqrt(2) erfcinv(2 eps), exact near eps -> 0
    return math.sqrt(2.0) * float(special.erfcinv(2.0 * eps_pe))


# -----------------------------------------------------
# Estimator statistics
# -----------------------------------------------------
def effective_samples(config: EstimationConfig, point: ChannelPoint) -> Tuple[float, float]:
    """(m, sigma_z^2) seen by the estimators; heterodyne doubles the samples
    and adds a vacuum unit of noise."""
    if config.detection == Detection.HET:
        return 2.0 * config.m, point.sigma_z2 + 1.0
    return float(config.m), point.sigma_z2


def estimator_variances(config: EstimationConfig, point: ChannelPoint) -> Tuple[float, float]:
    """(sigma_tau^2, sigma_nbar^2) to first order in 1/m."""
    m, sz2 = effective_samples(config, point)
    if point.sigma_x2 <= 0:
        raise ValueError("transmissivity is not estimable without modulation (mu = 1)")

    var_tau = (4.0 / m) * (2.0 * point.tau ** 2 + point.tau * sz2 / point.sigma_x2)
    var_noise = sz2 ** 2 / (2.0 * m)
    return var_tau, var_noise


def worst_case_params(config: EstimationConfig, point: ChannelPoint) -> Tuple[float, float]:
    """(tau', n') = (tau - w sigma_tau, n + w sigma_n); O(1/m) terms dropped."""
    w = deviations_from_eps(config.eps_pe)
    var_tau, var_noise = estimator_variances(config, point)
    tau_prime = max(point.tau - w * math.sqrt(var_tau), 0.0)
    return tau_prime, point.n_bar + w * math.sqrt(var_noise)


def pilot_worst_case_noise(config: EstimationConfig, point: ChannelPoint) -> float:
    """Noise bound when pilots fix tau; independent of the pilot energy."""
    w = deviations_from_eps(config.eps_pe)
    if config.detection == Detection.HET:
        return point.n_bar + w * (point.n_bar + 1.0) / math.sqrt(config.m)
    return point.n_bar + w * (2.0 * point.n_bar + 1.0) / math.sqrt(2.0 * config.m)


def worst_case_noise(config: EstimationConfig, point: ChannelPoint, pilot: bool = True) -> float:
    if pilot:
        return pilot_worst_case_noise(config, point)
    return worst_case_params(config, point)[1]


# -----------------------------------------------------
# Sample estimators
# -----------------------------------------------------
def estimate_transmissivity(x: np.ndarray, y: np.ndarray, sigma_x2: float) -> float:
    """tau_hat = (C_xy / sigma_x^2)^2 with C_xy the empirical correlation."""
    c_xy = float(np.mean(np.asarray(x) * np.asarray(y)))
    return (c_xy / sigma_x2) ** 2


def estimate_noise(x: np.ndarray, y: np.ndarray, tau: float, detection: Detection = Detection.HOM) -> float:
    """Thermal-number estimator from residuals y - sqrt(tau) x.

    Heterodyne samples (both quadratures stacked) carry one extra vacuum unit.
    """
    residual = np.asarray(y) - math.sqrt(tau) * np.asarray(x)
    variance = float(np.mean(residual ** 2))
    if detection == Detection.HET:
        n_hat = (variance - 2.0) / 2.0
    else:
        n_hat = (variance - 1.0) / 2.0
    logger.debug(f"estimate_noise: residual variance {variance:.6f} -> n_hat {n_hat:.3e}")
    return n_hat
