"""Composable finite-size key rates over a fading link.

Two post-selection strategies are supported: a single threshold eta_th
(keep instances with tau >= eta_th) and a regular lattice of M slots. Both
share one bracket

    R_pe(tau, n') - Delta_aep / sqrt(n p) + (Theta - Phi) / (n p)

where Phi is nonzero only under general (coherent) attacks.
"""

import itertools
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from app.core.config import get_settings
from app.core.exceptions import DegenerateStatisticsError, InvalidCovarianceError
from app.core.logging import logger
from app.models.results import ChannelPoint, CompositeEpsilon, FadingModel, RateOptimum, RateResult, Regime
from app.models.schemas import Detection, ProtocolConfig, Strategy
from app.services.cvqkd import asymptotic_rate_raw
from app.services.estimation import worst_case_params
from app.services.fading import slot_probability, threshold_probability


settings = get_settings()


# -----------------------------------------------------
# Finite-size terms
# -----------------------------------------------------
def aep_delta(p_ec: float, eps_s: float, d: int) -> float:
    """4 log2(2 sqrt(d) + 1) sqrt(log2(18 / (p_ec^2 eps_s^4))), in bits."""
    if not 0.0 < p_ec <= 1.0 or not 0.0 < eps_s < 1.0 or d < 1:
        raise ValueError("aep_delta needs 0 < p_ec <= 1, 0 < eps_s < 1, d >= 1")
    # log form: eps_s^4 underflows for eps_s below ~1e-77
    log_arg = math.log2(18.0) - 2.0 * math.log2(p_ec) - 4.0 * math.log2(eps_s)
    return 4.0 * math.log2(2.0 * math.sqrt(d) + 1.0) * math.sqrt(log_arg)


def theta_term(p_ec: float, eps_s: float, eps_h: float) -> float:
    return math.log2(p_ec * (1.0 - eps_s ** 2 / 3.0)) + 2.0 * math.log2(math.sqrt(2.0) * eps_h)


def composite_epsilon(config: ProtocolConfig, k_n: Optional[float] = None) -> CompositeEpsilon:
    """eps = p_ec k eps_pe + eps_cor + eps_s + eps_h, k the number of estimated
    parameters. With ``k_n`` the general-attack value K_n^4 eps / 50 is added."""
    eps = config.p_ec * config.estimated_parameters * config.eps_pe + config.eps_cor + config.eps_s + config.eps_h
    if k_n is None:
        return CompositeEpsilon(eps=eps)
    return CompositeEpsilon(eps=eps, eps_prime=k_n ** 4 * eps / 50.0)


def sigma_n(n: float, eps: float, f_et: float) -> float:
    if f_et <= 0:
        raise ValueError("the energy test needs f_et > 0")
    if n <= 0:
        raise ValueError("sigma_n needs n > 0")

    log_term = math.log(8.0 / eps)
    numerator = 1.0 + 2.0 * math.sqrt(log_term / (2.0 * n)) + log_term / n
    denominator = 1.0 - 2.0 * math.sqrt(log_term / (2.0 * f_et * n))
    if denominator <= 0:
        raise ValueError(f"energy test too short: f_et n = {f_et * n:.3g} for eps = {eps:.3g}")
    return numerator / denominator


def k_n(n: float, d_total: float, eps: float, f_et: float) -> float:
    """K_n = max{1, n (d_T + d_R) Sigma_n}."""
    return max(1.0, n * d_total * sigma_n(n, eps, f_et))


def phi_n(k: float) -> float:
    """2 ceil(log2 C(K + 4, 4)); log-gamma keeps K ~ 1e9 finite."""
    if k < 1:
        raise ValueError("K_n must be >= 1")
    log_binom = special.gammaln(k + 5.0) - special.gammaln(k + 1.0) - special.gammaln(5.0)
    bits = float(log_binom) / math.log(2.0)
    # guard exact integers (K = 1 -> C = 5) against rounding upwards
    return 2.0 * math.ceil(bits - 1e-12)


def energy_test_thresholds(config: ProtocolConfig, mu: float) -> float:
    """d_T + d_R; each defaults to the mean thermal number (mu - 1)/2 of the ensemble."""
    default = (mu - 1.0) / 2.0
    d_t = config.d_T if config.d_T is not None else default
    d_r = config.d_R if config.d_R is not None else default
    return d_t + d_r


def energy_test_mu_cap(config: ProtocolConfig, p: float) -> Optional[float]:
    """Largest mu whose default thresholds keep K^4 eps / 50 within ``eps_prime_max``.

    ``p`` is the acceptance of the post-selected block. None when no budget is
    set, both thresholds are pinned, or Sigma_n is undefined at n p.
    """
    if config.eps_prime_max is None or p <= 0:
        return None
    free = int(config.d_T is None) + int(config.d_R is None)
    if free == 0:
        return None

    n_eff = _key_modes(config, True) * p
    eps = composite_epsilon(config).eps
    try:
        spread = n_eff * sigma_n(n_eff, eps, config.f_et)
    except ValueError:
        return None

    k_max = (50.0 * config.eps_prime_max / eps) ** 0.25
    pinned = (config.d_T or 0.0) + (config.d_R or 0.0)
    room = max(k_max / spread - pinned, 0.0)
    return 1.0 + 2.0 * room / free


def within_budget(config: ProtocolConfig, result: RateResult) -> bool:
    if config.eps_prime_max is None or result.eps is None or result.eps.eps_prime is None:
        return True
    # K at the mu cap reproduces the budget up to rounding
    return result.eps.eps_prime <= config.eps_prime_max * (1.0 + 1e-9)


# -----------------------------------------------------
# Rate brackets
# -----------------------------------------------------
def r_pe(config: ProtocolConfig, tau: float, n_bar_prime: float, mu: float) -> float:
    """beta I - chi at the worst-case noise.

    With pilots tau is known exactly; otherwise its worst-case estimate
    tau' replaces it.
    """
    if not config.pilot:
        tau = worst_case_params(config.estimation(), ChannelPoint(tau=tau, n_bar=n_bar_prime, mu=mu))[0]
    return asymptotic_rate_raw(ChannelPoint(tau=tau, n_bar=n_bar_prime, mu=mu), config.beta, config.detection)


def _key_modes(config: ProtocolConfig, general: bool) -> float:
    if general:
        return (config.N - config.m) / (1.0 + config.f_et)
    return config.N - config.m


def _check_general(config: ProtocolConfig) -> None:
    if config.detection != Detection.HET:
        raise ValueError("general attacks require heterodyne detection")
    if config.f_et <= 0:
        raise ValueError("general attacks require an energy test (f_et > 0)")


def _require_weak(regime: Optional[Regime]) -> None:
    if regime is not None and not regime.is_weak:
        raise ValueError("composable rates need a weak-turbulence link")


def _post_selected_rate(
    config: ProtocolConfig,
    p: float,
    tau: float,
    n_bar_prime: float,
    mu: float,
    general: bool,
) -> RateResult:
    """Rate carried by the n p post-selected signals assigned transmissivity tau.

    The prefactor is n p p_ec / N; the result is not clamped.
    """
    if p <= 0:
        eps = composite_epsilon(config)
        return RateResult(rate=0.0, raw=0.0, clamped=False, eps=eps)

    n = _key_modes(config, general)
    n_eff = n * p
    if n_eff < 1:
        raise DegenerateStatisticsError(f"only {n_eff:.3g} post-selected signals (n={n:.3g}, p={p:.3g})")

    bracket = (
        r_pe(config, tau, n_bar_prime, mu)
        - aep_delta(config.p_ec, config.eps_s, config.d) / math.sqrt(n_eff)
        + theta_term(config.p_ec, config.eps_s, config.eps_h) / n_eff
    )

    k_value = None
    if general:
        eps_total = composite_epsilon(config).eps
        k_value = k_n(n_eff, energy_test_thresholds(config, mu), eps_total, config.f_et)
        bracket -= phi_n(k_value) / n_eff

    raw = (n_eff * config.p_ec / config.N) * bracket
    return RateResult(
        rate=max(raw, 0.0),
        raw=raw,
        clamped=raw < 0,
        eps=composite_epsilon(config, k_value),
        k_n=k_value,
    )


# -----------------------------------------------------
# Threshold strategy
# -----------------------------------------------------
def threshold_rate(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    mu: float,
    eta_th: float,
    general: bool = False,
    regime: Optional[Regime] = None,
) -> RateResult:
    _require_weak(regime)
    if general:
        _check_general(config)
    if not 0.0 <= eta_th < fading.eta:
        raise ValueError(f"eta_th must lie in [0, eta), got {eta_th} (eta={fading.eta})")

    p_th = threshold_probability(eta_th, fading)
    return _post_selected_rate(config, p_th, eta_th, n_bar_prime, mu, general)


def collective_rate_threshold(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    mu: float,
    eta_th: float,
    regime: Optional[Regime] = None,
) -> RateResult:
    """Threshold rate secure against collective Gaussian attacks (bits/use)."""
    return threshold_rate(config, fading, n_bar_prime, mu, eta_th, general=False, regime=regime)


def general_attack_rate(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    mu: float,
    eta_th: float,
    regime: Optional[Regime] = None,
) -> RateResult:
    """Heterodyne threshold rate secure against general attacks.

    Reduces the key by Phi over the n p_th post-selected signals and reports
    eps' = K^4 eps / 50 in ``eps.eps_prime``.
    """
    return threshold_rate(config, fading, n_bar_prime, mu, eta_th, general=True, regime=regime)


# -----------------------------------------------------
# Lattice strategy
# -----------------------------------------------------
def lattice_slots(fading: FadingModel, slots: int) -> List[Tuple[float, float]]:
    """(tau_k, p_k) for k = 2..M, tau_k = (k-1) eta / M the lower edge of slot k."""
    if slots < 2:
        raise ValueError("a lattice needs M >= 2 slots")

    step = fading.eta / slots
    out: List[Tuple[float, float]] = []
    for k in range(2, slots + 1):
        lo = (k - 1) * step
        if k == slots:
            # top slot through the survival function, as the threshold strategy does
            p = threshold_probability(lo, fading)
        else:
            p = slot_probability(lo, k * step, fading)
        out.append((lo, p))
    return out


def lattice_rate(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    slots: int,
    mu: float,
    general: bool = False,
    regime: Optional[Regime] = None,
) -> RateResult:
    """Average of max{0, R_k} over slots k >= 2 (slot 1 has tau_1 = 0).

    Slots holding fewer than one signal are dropped. Under general attacks
    eps' is the largest per-slot value.
    """
    _require_weak(regime)
    if general:
        _check_general(config)

    n = _key_modes(config, general)
    total = 0.0
    raw_total = 0.0
    k_max: Optional[float] = None
    starved = 0

    for tau_k, p_k in lattice_slots(fading, slots):
        if p_k <= 0:
            continue
        if n * p_k < 1:
            starved += 1
            continue

        slot = _post_selected_rate(config, p_k, tau_k, n_bar_prime, mu, general)
        total += slot.rate
        raw_total += slot.raw
        if slot.k_n is not None and slot.rate > 0:
            k_max = slot.k_n if k_max is None else max(k_max, slot.k_n)

    if starved:
        logger.warning(f"lattice M={slots}: {starved} slot(s) with n p_k < 1 dropped")

    return RateResult(
        rate=total,
        raw=raw_total,
        clamped=raw_total < total,
        eps=composite_epsilon(config, k_max),
        k_n=k_max,
    )


def lattice_turnover(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    slot_counts: Sequence[int],
    mu: float,
    general: bool = False,
) -> Tuple[int, List[float]]:
    """Rates for each M in ``slot_counts`` and the M at which refinement stops paying."""
    rates = [lattice_rate(config, fading, n_bar_prime, int(m), mu, general).rate for m in slot_counts]
    best = int(np.argmax(rates))
    logger.info(f"lattice turnover at M={slot_counts[best]} (rate {rates[best]:.4e})")
    return int(slot_counts[best]), rates


# -----------------------------------------------------
# Optimisation over (mu, eta_th)
# -----------------------------------------------------
def _safe(fn: Callable[[], RateResult]) -> Optional[RateResult]:
    try:
        return fn()
    except (DegenerateStatisticsError, InvalidCovarianceError) as err:
        logger.debug(f"rate evaluation skipped: {err}")
        return None


def _mu_from(log_excess: float) -> float:
    return 1.0 + 10.0 ** log_excess


def _eta_th_from(log_gap: float, eta: float) -> float:
    return eta * (1.0 - 10.0 ** log_gap)


def _largest_acceptance(fading: FadingModel, eta_th: Optional[float], slots: Optional[int]) -> float:
    if slots is not None:
        return max((p for _, p in lattice_slots(fading, slots)), default=0.0)
    return threshold_probability(eta_th, fading)


def optimize_rate(
    config: ProtocolConfig,
    fading: FadingModel,
    n_bar_prime: float,
    general: bool = False,
    regime: Optional[Regime] = None,
    grid_points: Optional[int] = None,
    mu: Optional[float] = None,
    eta_th: Optional[float] = None,
) -> RateOptimum:
    """Maximise the composable rate over mu and the post-selection parameter.

    The threshold strategy searches (mu, eta_th); the lattice strategy uses the
    configured M and searches mu only. Passing ``mu`` or ``eta_th`` pins that
    coordinate. mu runs log-spaced in mu - 1 over [1e-3, mu_max - 1]; eta_th
    runs log-spaced in the gap 1 - eta_th/eta. A coarse grid is refined by
    bounded Nelder-Mead. Ties resolve to the lowest mu, then the lowest
    eta_th. An all-zero surface returns no argmax.

    Under general attacks with ``eps_prime_max`` set, a free mu is capped so
    that the default energy-test thresholds keep eps' within the budget, and
    points over the budget count as zero rate.
    """
    _require_weak(regime)
    if general:
        _check_general(config)

    lattice = config.strategy == Strategy.LATTICE
    free_mu = mu is None
    free_th = not lattice and eta_th is None
    slots = config.slots if lattice else None
    budgeted = general and config.eps_prime_max is not None

    points = grid_points or settings.OPT_GRID_POINTS
    mu_lo = math.log10(settings.MU_MIN_OFFSET)
    mu_hi = math.log10(min(config.mu_max, settings.MU_HARD_CAP) - 1.0)
    gap_lo = math.log10(1.0 - settings.ETA_TH_MAX_FRACTION)
    gap_hi = math.log10(1.0 - settings.ETA_TH_MIN_FRACTION)

    def params(x: Sequence[float]) -> Tuple[float, Optional[float]]:
        coords = iter(x)
        mu_v = _mu_from(next(coords)) if free_mu else mu
        th_v = None
        if not lattice:
            th_v = _eta_th_from(next(coords), fading.eta) if free_th else eta_th
        if free_mu and budgeted:
            cap = energy_test_mu_cap(config, _largest_acceptance(fading, th_v, slots))
            if cap is not None:
                mu_v = min(mu_v, max(cap, _mu_from(mu_lo)))
        return mu_v, th_v

    def evaluate(x: Sequence[float]) -> Optional[RateResult]:
        mu_v, th_v = params(x)
        if lattice:
            result = _safe(lambda: lattice_rate(config, fading, n_bar_prime, config.slots, mu_v, general))
        else:
            result = _safe(lambda: threshold_rate(config, fading, n_bar_prime, mu_v, th_v, general))
        if result is not None and general and not within_budget(config, result):
            return None
        return result

    axes: List[np.ndarray] = []
    bounds: List[Tuple[float, float]] = []
    if free_mu:
        axes.append(np.linspace(mu_lo, mu_hi, points))
        bounds.append((mu_lo, mu_hi))
    if free_th:
        # descending gap == ascending eta_th
        axes.append(np.linspace(gap_hi, gap_lo, points))
        bounds.append((gap_lo, gap_hi))

    best_rate = 0.0
    best_x: Optional[Tuple[float, ...]] = None
    for x in itertools.product(*axes):
        x = tuple(float(v) for v in x)
        result = evaluate(x)
        if result is not None and result.rate > best_rate:
            best_rate = result.rate
            best_x = x

    if best_x is None:
        logger.info("optimize_rate: rate surface is zero everywhere")
        return RateOptimum(mu=None, eta_th=None, rate=0.0, slots=slots)

    # -------------------------------------------------
    # Local refinement
    # -------------------------------------------------
    if axes:

        def objective(x: np.ndarray) -> float:
            result = evaluate(list(x))
            return -(result.rate if result is not None else 0.0)

        try:
            refined = optimize.minimize(
                objective,
                x0=np.asarray(best_x),
                method="Nelder-Mead",
                bounds=bounds,
                options={"xatol": 1e-6, "fatol": 1e-12 * best_rate, "maxiter": 2000},
            )
            if -refined.fun > best_rate:
                best_rate = -refined.fun
                best_x = tuple(float(v) for v in refined.x)
            logger.debug(f"optimize_rate: refinement {refined.nit} iterations, rate {best_rate:.6e}")
        except Exception as err:
            logger.warning(f"optimize_rate: refinement failed, keeping grid optimum ({err})")

    final = evaluate(best_x)
    mu_star, eta_star = params(best_x)

    return RateOptimum(
        mu=mu_star,
        eta_th=eta_star,
        rate=final.rate if final is not None else best_rate,
        eps=final.eps if final is not None else None,
        slots=slots,
    )
