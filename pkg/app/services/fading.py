"""Beam-wandering fading: misalignment transmissivity, centroid statistics
and the induced transmissivity density P0(tau).

Every P0 expectation is computed in the variable x = ln(eta/tau), pushed one
step further to u = (r0^2/2 sigma^2) x^(2/gamma), under which the density
becomes exp(-u) on [0, inf). This removes the endpoint singularities at
tau -> 0 and tau -> eta.
"""

import math
import sys
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy import integrate, special

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import FadingModel, TurbulenceState
from app.models.schemas import LinkGeometry


settings = get_settings()

_LOG_FLOAT_MAX = math.log(sys.float_info.max)


# -----------------------------------------------------
# Short-term transmissivity
# -----------------------------------------------------
def eta_shortterm(geom: LinkGeometry, w_st: float) -> Tuple[float, float]:
    """Return (eta_st, eta_st_far) for a beam of short-term spot size ``w_st``."""
    if w_st <= 0:
        raise ValueError("short-term spot size must be positive")
    far = 2.0 * geom.rx_aperture ** 2 / w_st ** 2
    return -math.expm1(-far), far


# -----------------------------------------------------
# Incomplete Weber integral
# -----------------------------------------------------
def _weber_scaled(x: float, y: float) -> float:
    """exp(-2x) Q0(x, y), computed with bounded factors only.

    t exp(-t^2/4x) I0(t) exp(-x) = t exp(-(t - 2x)^2 / 4x) [exp(-t) I0(t)].
    """
    if y <= 0:
        return 0.0

    def integrand(t: float) -> float:
        return t * math.exp(-((t - 2.0 * x) ** 2) / (4.0 * x)) * special.i0e(t)

    peak = 2.0 * x
    points = [peak] if 0.0 < peak < y else None
    value, _ = integrate.quad(
        integrand,
        0.0,
        y,
        points=points,
        epsabs=0.0,
        epsrel=settings.QUAD_EPSREL,
        limit=settings.QUAD_LIMIT,
    )
    return value / (2.0 * x)


def weber_q0(x: float, y: float) -> float:
    """Incomplete Weber integral Q0(x, y) = (2x)^-1 e^x int_0^y t e^(-t^2/4x) I0(t) dt.

    At x = 0 the integrand collapses onto t = 0 and Q0 -> 1 - exp(-y^2/4x),
    i.e. 1 for any y > 0. The e^(2x) factor is applied in log space; values
    beyond the float range return inf.
    """
    if x < 0 or y < 0:
        raise ValueError("weber_q0 needs x >= 0 and y >= 0")
    if y == 0:
        return 0.0
    if x == 0:
        return 1.0

    scaled = _weber_scaled(x, y)
    if scaled <= 0:
        return 0.0
    log_value = 2.0 * x + math.log(scaled)
    if log_value >= _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_value)


def eta_deflected_exact(r: float, geom: LinkGeometry, w_st: float) -> float:
    """Power fraction of a beam displaced by ``r`` from the receiver centre."""
    if r < 0:
        raise ValueError("deflection must be nonnegative")
    a_r = geom.rx_aperture
    if r == 0:
        return -math.expm1(-2.0 * a_r ** 2 / w_st ** 2)

    x = 2.0 * r ** 2 / w_st ** 2
    y = 4.0 * r * a_r / w_st ** 2
    # e^(-4r^2/w^2) Q0(x, y) == e^(-2x) Q0(x, y)
    return _weber_scaled(x, y)


# -----------------------------------------------------
# Shape parameters
# -----------------------------------------------------
def lambda_n(n: int, x: float) -> float:
    """Lambda_n(x) = exp(-2x) I_n(2x), exponentially scaled."""
    return float(special.ive(n, 2.0 * x))


def fading_shape_params(eta_st: float, eta_st_far: float, a_r: float) -> Tuple[float, float]:
    """Shape gamma and scale r0 of tau(r) = eta exp[-(r/r0)^gamma]."""
    if eta_st_far <= 0:
        raise ValueError("far-field transmissivity must be positive")

    l0 = lambda_n(0, eta_st_far)
    l1 = lambda_n(1, eta_st_far)
    log_term = math.log(2.0 * eta_st / (1.0 - l0))

    gamma = (4.0 * eta_st_far * l1 / (1.0 - l0)) / log_term
    r0 = a_r * log_term ** (-1.0 / gamma)

    return gamma, r0


def build_fading_model(
    geom: LinkGeometry,
    turb: TurbulenceState,
    eta_eff: float = 1.0,
    eta_atm: float = 1.0,
    d: float = 0.0,
) -> FadingModel:
    eta_st, eta_far = eta_shortterm(geom, turb.w_st)
    gamma, r0 = fading_shape_params(eta_st, eta_far, geom.rx_aperture)
    return FadingModel(
        eta=eta_st * eta_eff * eta_atm,
        gamma=gamma,
        r0=r0,
        sigma=turb.sigma,
        d=d,
        eta_st=eta_st,
        eta_st_far=eta_far,
    )


def tau_of_r(r, model: FadingModel):
    return model.eta * np.exp(-((np.asarray(r, dtype=float) / model.r0) ** model.gamma))


# -----------------------------------------------------
# Density and distribution of tau (d = 0)
# -----------------------------------------------------
def p0_cdf(t: float, model: FadingModel) -> float:
    """Prob(tau <= t) = exp[-(r0^2/2 sigma^2) ln(eta/t)^(2/gamma)] on (0, eta]."""
    if t <= 0:
        return 0.0
    if t >= model.eta:
        return 1.0
    if model.sigma == 0:
        return 0.0
    x = math.log(model.eta / t)
    return math.exp(-model.weibull_rate * x ** (2.0 / model.gamma))


def p0_survival(t: float, model: FadingModel) -> float:
    """Prob(tau >= t); the mass of P0 on [t, eta]."""
    if t <= 0:
        return 1.0
    if model.sigma == 0:
        return 1.0 if t <= model.eta else 0.0
    if t >= model.eta:
        return 0.0
    x = math.log(model.eta / t)
    # 1 - exp(-u) without cancellation for small u
    return -math.expm1(-model.weibull_rate * x ** (2.0 / model.gamma))


def p0_density(tau: float, model: FadingModel) -> float:
    if model.sigma == 0:
        raise ValueError("P0 is a point mass at eta when sigma = 0")
    if tau <= 0 or tau > model.eta:
        return 0.0

    c = model.weibull_rate
    x = math.log(model.eta / tau)
    if x == 0:
        # integrable divergence (gamma > 2) or finite limit (gamma <= 2)
        return math.inf if model.gamma > 2 else (c / tau if model.gamma == 2 else 0.0)

    expo = 2.0 / model.gamma
    return (2.0 * c / (model.gamma * tau)) * x ** (expo - 1.0) * math.exp(-c * x ** expo)


def p_rician_density(r: float, d: float, sigma: float) -> float:
    """Rician density of the centroid distance; Weibull (Rayleigh) at d = 0."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if r < 0:
        return 0.0
    s2 = sigma ** 2
    # exp(-(r^2+d^2)/2s2) I0(rd/s2) = exp(-(r-d)^2/2s2) i0e(rd/s2)
    return (r / s2) * math.exp(-((r - d) ** 2) / (2.0 * s2)) * float(special.i0e(r * d / s2))


def p_general_density(tau: float, model: FadingModel) -> float:
    """Transmissivity density for a beam whose mean deflection is d != 0."""
    if model.sigma <= 0:
        raise ValueError("sigma must be positive")
    if tau <= 0 or tau > model.eta:
        return 0.0
    x = math.log(model.eta / tau)
    r = model.r0 * x ** (1.0 / model.gamma)
    if r == 0:
        return 0.0
    # |dr/dtau| = r / (gamma tau x)
    jacobian = r / (model.gamma * tau * x)
    return p_rician_density(r, model.d, model.sigma) * jacobian


def slot_probability(t_lo: float, t_hi: float, model: FadingModel) -> float:
    if not (0.0 <= t_lo < t_hi <= model.eta):
        raise ValueError(f"slot bounds need 0 <= t_lo < t_hi <= eta (got {t_lo}, {t_hi}, eta={model.eta})")
    if model.sigma == 0:
        # point mass at eta belongs to the last slot only
        return 1.0 if t_hi >= model.eta else 0.0
    return p0_cdf(t_hi, model) - p0_cdf(t_lo, model)


def threshold_probability(eta_th: float, model: FadingModel) -> float:
    """p_th = slot_probability(eta_th, eta), evaluated without cancellation."""
    if eta_th >= model.eta:
        return 0.0
    return p0_survival(max(eta_th, 0.0), model)


# -----------------------------------------------------
# P0 expectations
# -----------------------------------------------------
def u_of_tau(tau: float, model: FadingModel) -> float:
    return model.weibull_rate * math.log(model.eta / tau) ** (2.0 / model.gamma)


def fading_average(
    g: Callable[[float], float],
    model: FadingModel,
    breakpoints: Optional[Iterable[float]] = None,
) -> float:
    """E[g(tau)] over P0. ``breakpoints`` are tau values where g has kinks."""
    if model.sigma == 0:
        return float(g(model.eta))

    c = model.weibull_rate
    half_gamma = model.gamma / 2.0
    u_max = settings.TAIL_EXPONENT

    def integrand(u: float) -> float:
        tau = model.eta * math.exp(-((u / c) ** half_gamma))
        return math.exp(-u) * g(tau)

    points = None
    if breakpoints:
        points = sorted(
            u for u in (u_of_tau(t, model) for t in breakpoints if 0 < t < model.eta) if 0 < u < u_max
        ) or None

    value, err = integrate.quad(
        integrand,
        0.0,
        u_max,
        points=points,
        epsabs=settings.QUAD_EPSABS,
        epsrel=settings.QUAD_EPSREL,
        limit=settings.QUAD_LIMIT,
    )
    logger.debug(f"fading_average: value={value:.6e} err={err:.1e}")
    return value
