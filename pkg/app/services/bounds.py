import math
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import integrate, optimize, special

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import BoundKind, BoundResult, FadingModel, TurbulenceState
from app.models.schemas import LinkGeometry
from app.services.beam_optics import fresnel_product
from app.services.fading import fading_average, p0_survival


settings = get_settings()

LN2 = math.log(2.0)


# -----------------------------------------------------
# Elementary capacities
# -----------------------------------------------------
def plob(tau: float) -> float:
    """Phi(tau) = -log2(1 - tau). log1p keeps the tau/ln2 behaviour below 1e-3."""
    if tau <= 0:
        return 0.0
    if tau >= 1:
        return math.inf
    return -math.log1p(-tau) / LN2


def entropic_h(x):
    """h(x) = (x+1) log2(x+1) - x log2 x, with h(0) = 0."""
    x = np.asarray(x, dtype=float)
    value = (special.xlogy(x + 1.0, x + 1.0) - special.xlogy(x, x)) / LN2
    return float(value) if value.ndim == 0 else value


def h_prime(nu: float) -> float:
    """h[(nu - 1)/2], the von Neumann entropy of a mode with symplectic eigenvalue nu."""
    return entropic_h(max(nu - 1.0, 0.0) / 2.0)


def plob_thermal(tau: float, n_bar: float) -> float:
    """Thermal-loss PLOB bound; zero once the noise reaches the transmissivity."""
    if n_bar < 0 or tau < 0 or tau >= 1:
        raise ValueError("plob_thermal needs 0 <= tau < 1 and n_bar >= 0")
    if n_bar == 0:
        return plob(tau)
    if n_bar >= tau:
        return 0.0
    ratio = n_bar / (1.0 - tau)
    value = -math.log1p(-tau) / LN2 - ratio * math.log2(tau) - entropic_h(ratio)
    return max(value, 0.0)


def g_thermal(n_bar: float) -> float:
    if n_bar <= 0:
        return 0.0
    return n_bar * math.log2(n_bar) / (1.0 - n_bar) + entropic_h(n_bar)


# -----------------------------------------------------
# Fading corrections
# -----------------------------------------------------
def _x_max(model: FadingModel) -> float:
    tail = (settings.TAIL_EXPONENT / model.weibull_rate) ** (model.gamma / 2.0)
    return min(tail, settings.LN_TAIL_MAX)


def _quad(fn, upper: float) -> float:
    value, _ = integrate.quad(
        fn,
        0.0,
        upper,
        epsabs=settings.QUAD_EPSABS,
        epsrel=settings.QUAD_EPSREL,
        limit=settings.QUAD_LIMIT,
    )
    return value


def lambda_correction(model: FadingModel) -> float:
    if model.sigma == 0:
        return 1.0
    c = model.weibull_rate
    expo = 2.0 / model.gamma
    return 1.0 - _quad(lambda x: math.exp(-c * x ** expo - x), _x_max(model))


def delta_correction(model: FadingModel, eta: Optional[float] = None) -> float:
    """Fading correction Delta(eta, sigma) to the PLOB bound.

    ``eta`` replaces the model's maximum transmissivity while keeping its
    shape (gamma, r0) and sigma; the thermal correction uses it with eta = n_bar.
    """
    eta = model.eta if eta is None else eta
    if model.sigma == 0:
        return 1.0
    if eta <= 0:
        return lambda_correction(model)
    if eta >= 1:
        raise ValueError("Delta is undefined at eta = 1")

    c = model.weibull_rate
    expo = 2.0 / model.gamma
    omega = _quad(lambda x: math.exp(-c * x ** expo) / (math.exp(x) - eta), _x_max(model))

    return 1.0 + eta * omega / math.log1p(-eta)


# -----------------------------------------------------
# Loss and thermal bounds
# -----------------------------------------------------
def loss_bound(model: FadingModel) -> float:
    """-Delta(eta, sigma) log2(1 - eta); an upper bound that is also achievable."""
    return delta_correction(model) * plob(model.eta)


def loss_bound_high_loss(model: FadingModel) -> float:
    return model.eta * lambda_correction(model) / LN2


def thermal_correction(model: FadingModel, n_bar: float) -> float:
    if n_bar <= 0:
        return 0.0
    mass = p0_survival(n_bar, model)
    return mass * g_thermal(n_bar) - delta_correction(model, eta=n_bar) * math.log2(1.0 - n_bar)


def thermal_upper(model: FadingModel, n_bar: float) -> float:
    if n_bar >= model.eta:
        return 0.0
    raw = loss_bound(model) - thermal_correction(model, n_bar)
    if raw < 0:
        logger.warning(f"thermal upper bound clamped at 0 (raw {raw:.3e}, n_bar={n_bar:.3e}, eta={model.eta:.3e})")
        return 0.0
    return raw


def rci_rate(tau: float, n_bar: float) -> float:
    """Reverse coherent information of a thermal-loss channel (may be negative)."""
    if tau <= 0:
        return -entropic_h(n_bar)
    return plob(tau) - entropic_h(n_bar / (1.0 - tau))


def thermal_lower(model: FadingModel, n_bar: float, quadrature: bool = False) -> float:
    """Achievable rate under thermal noise.

    The closed form replaces h(n_bar/(1-tau)) by its value at tau = eta; the
    quadrature form averages the reverse coherent information over P0.
    """
    if quadrature:
        raw = fading_average(lambda tau: rci_rate(tau, n_bar), model)
    else:
        raw = loss_bound(model) - entropic_h(n_bar / (1.0 - model.eta))
    return max(raw, 0.0)


def thermal_direct(model: FadingModel, n_bar: float) -> float:
    """Direct P0 average of the thermal PLOB bound over [n_bar, eta]."""
    if n_bar >= model.eta:
        return 0.0
    return fading_average(lambda tau: plob_thermal(tau, n_bar) if tau > n_bar else 0.0, model, breakpoints=[n_bar])


def loss_bounds(model: FadingModel) -> BoundResult:
    value = loss_bound(model)
    return BoundResult(
        upper=value,
        lower=value,
        kind=BoundKind.LOSS_ONLY,
        delta_factor=delta_correction(model),
    )


def thermal_bounds(model: FadingModel, n_bar: float) -> BoundResult:
    delta = delta_correction(model)
    loss = delta * plob(model.eta)

    if n_bar >= model.eta:
        return BoundResult(
            upper=0.0, lower=0.0, kind=BoundKind.THERMAL, delta_factor=delta, clamped=True, raw_upper=0.0, raw_lower=0.0
        )

    correction = thermal_correction(model, n_bar)
    raw_upper = loss - correction
    raw_lower = loss - entropic_h(n_bar / (1.0 - model.eta))
    clamped = raw_upper < 0 or raw_lower < 0
    if clamped:
        logger.warning(f"thermal bounds clamped (raw upper {raw_upper:.3e}, raw lower {raw_lower:.3e})")

    return BoundResult(
        upper=max(raw_upper, 0.0),
        lower=max(raw_lower, 0.0),
        kind=BoundKind.THERMAL,
        delta_factor=delta,
        thermal_correction=correction,
        clamped=clamped,
        raw_upper=raw_upper,
        raw_lower=raw_lower,
    )


# -----------------------------------------------------
# Maximum secure distance
# -----------------------------------------------------
def max_secure_distance(geom: LinkGeometry, n_bar: float) -> float:
    """Largest z with 2 f_0R(z) >= -ln(1 - n_bar); inf when there is no noise."""
    if n_bar <= 0:
        logger.info("max_secure_distance: n_bar = 0, distance unbounded")
        return math.inf
    if n_bar >= 1:
        return 0.0

    target = -math.log1p(-n_bar)

    def excess(z: float) -> float:
        return 2.0 * fresnel_product(geom, z) - target

    lo = geom.wavelength
    hi = max(geom.z, 1.0)
    while excess(hi) > 0:
        hi *= 2.0
    while excess(lo) < 0:
        lo /= 2.0

    return optimize.bisect(excess, lo, hi, xtol=1e-9, rtol=1e-14, maxiter=400)


# -----------------------------------------------------
# Detector time-scale variants
# -----------------------------------------------------
def slow_detector_eta(geom: LinkGeometry, turb: TurbulenceState, eta_eff: float, eta_atm: float) -> float:
    """Transmissivity seen by a detector slower than the wandering: spot w_st^2 + sigma_TB^2 + sigma_P^2."""
    w_slow2 = turb.w_st ** 2 + turb.sigma_TB ** 2 + turb.sigma_P ** 2
    return eta_eff * eta_atm * -math.expm1(-2.0 * geom.rx_aperture ** 2 / w_slow2)


def slow_detector_bound(geom: LinkGeometry, turb: TurbulenceState, eta_eff: float, eta_atm: float) -> float:
    return plob(slow_detector_eta(geom, turb, eta_eff, eta_atm))


def slow_detector_simple(geom: LinkGeometry, turb: TurbulenceState) -> float:
    return (2.0 / LN2) * geom.rx_aperture ** 2 / (turb.w_lt ** 2 + turb.sigma_P ** 2)


def intermediate_detector_bound(
    geom: LinkGeometry,
    turb: TurbulenceState,
    shape: FadingModel,
    eta_eff: float,
    eta_atm: float,
) -> float:
    """Pointing-only fading over a long-term spot: -Delta(eta_inter, sigma_P) log2(1 - eta_inter).

    ``shape`` supplies (gamma, r0) of the link's fading model.
    """
    eta_lt = -math.expm1(-2.0 * geom.rx_aperture ** 2 / turb.w_lt ** 2)
    eta_inter = eta_lt * eta_eff * eta_atm
    pointing = shape.with_eta(eta_inter).with_sigma(turb.sigma_P)
    return delta_correction(pointing) * plob(eta_inter)


# -----------------------------------------------------
# Trusted setup
# -----------------------------------------------------
def trusted_setup_parameters(eta_st: float, eta_atm: float, eta_eff: float, n_background: float) -> Tuple[float, float]:
    """Setup loss and noise trusted: (eta', n') = (eta_st eta_atm, eta_eff n_B)."""
    return eta_st * eta_atm, eta_eff * n_background


# -----------------------------------------------------
# Achievable protocol rates
# -----------------------------------------------------
def sifting_fraction(p: float) -> float:
    return p ** 2 + (1.0 - p) ** 2


def rcoh_rate(tau: float, n_bar: float) -> float:
    """Large-modulation coherent-state/homodyne rate at perfect reconciliation."""
    return plob(tau) - entropic_h(n_bar / (1.0 - tau)) + 0.5 * math.log2(1.0 - tau / (2.0 * n_bar + 1.0))


def rsq_rate(tau: float, n_bar: float = 0.0, p: float = 1.0, mu: float = math.inf) -> float:
    """Biased squeezed-state protocol rate.

    The sifting fraction p^2 + (1-p)^2 scales the whole conditional rate, so
    that p = 1/2 gives half and p -> 1 the full reverse coherent information.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("bias probability must lie in [0, 1]")
    if math.isinf(mu):
        return sifting_fraction(p) * rci_rate(tau, n_bar)

    from app.services.cvqkd import holevo_bound
    from app.models.results import ChannelPoint
    from app.models.schemas import Detection

    noise = 1.0 - tau + 2.0 * n_bar
    info = 0.5 * math.log2((tau * mu + noise) / (tau / mu + noise))
    chi = holevo_bound(ChannelPoint(tau=tau, n_bar=n_bar, mu=mu), Detection.HOM)
    return sifting_fraction(p) * (info - chi)


def achievable_protocol_rates(model: FadingModel, n_bar: float = 0.0, p: float = 1.0, mu: float = math.inf) -> Dict[str, float]:
    """P0-averaged achievable rates (bits/use), each clamped at 0."""
    rates = {
        "rci": fading_average(lambda tau: rci_rate(tau, n_bar), model),
        "sq": fading_average(lambda tau: rsq_rate(tau, n_bar, p, mu), model),
        "coh": fading_average(lambda tau: rcoh_rate(tau, n_bar), model),
    }
    return {key: max(value, 0.0) for key, value in rates.items()}
