"""Brute-force and Monte Carlo oracles for the analytic channel and estimator formulas.

Random streams come from the Philox counter-based generator keyed by
(seed, chunk index): chunk k of a run always sees the same numbers, so
splitting the work across threads gives bit-identical results.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np
from scipy import stats

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import ChannelPoint, FadingModel, OracleRun
from app.models.schemas import EstimationConfig
from app.services.estimation import deviations_from_eps, effective_samples, estimator_variances


settings = get_settings()

SEED_MASK = (1 << 64) - 1


# -----------------------------------------------------
# Deterministic random streams
# -----------------------------------------------------
def rng_for_chunk(seed: int, chunk: int) -> np.random.Generator:
    """Philox stream with key = chunk << 64 | seed (both 64-bit)."""
    if chunk < 0:
        raise ValueError("chunk index must be nonnegative")
    key = ((chunk & SEED_MASK) << 64) | (int(seed) & SEED_MASK)
    return np.random.Generator(np.random.Philox(key=key))


def _chunk_sizes(total: int) -> List[int]:
    size = settings.ORACLE_CHUNK
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def _run_chunks(
    seed: int,
    total: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Concatenate ``draw(rng_k, size_k)`` over all chunks, in chunk order."""
    if total <= 0:
        raise ValueError("sample count must be positive")

    sizes = _chunk_sizes(total)

    def work(k: int) -> np.ndarray:
        return draw(rng_for_chunk(seed, k), sizes[k])

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]

    return np.concatenate(parts)


# -----------------------------------------------------
# Beam-centroid sampling
# -----------------------------------------------------
def sample_deflections(model: FadingModel, seed: int, n_samples: int, threads: int = 1) -> np.ndarray:
    """Centroid distance r from the receiver centre.

    d = 0: Weibull (Rayleigh) by inverse CDF, r = sigma sqrt(-2 ln(1 - U)).
    d != 0: Rician, as the norm of two Gaussian components around (d, 0).
    """
    sigma = model.sigma
    d = model.d

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        if sigma == 0:
            return np.full(size, d)
        if d == 0:
            u = rng.random(size)
            return sigma * np.sqrt(-2.0 * np.log1p(-u))
        g = rng.standard_normal((2, size))
        return np.hypot(d + sigma * g[0], sigma * g[1])

    return _run_chunks(seed, n_samples, draw, threads)


def sample_fading(model: FadingModel, seed: int, n_samples: int, threads: int = 1) -> np.ndarray:
    """Transmissivity samples tau = eta exp[-(r/r0)^gamma]."""
    r = sample_deflections(model, seed, n_samples, threads)
    return model.eta * np.exp(-((r / model.r0) ** model.gamma))


def p0_cdf_array(t: np.ndarray, model: FadingModel) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    inside = (t > 0) & (t < model.eta)
    out[t <= 0] = 0.0
    if model.sigma == 0:
        out[inside] = 0.0
        return out
    x = np.log(model.eta / t[inside])
    out[inside] = np.exp(-model.weibull_rate * x ** (2.0 / model.gamma))
    return out


def ks_distance(samples: np.ndarray, model: FadingModel) -> float:
    """Kolmogorov-Smirnov distance to the closed-form CDF of P0 (d = 0 only)."""
    if model.d != 0:
        raise ValueError("the closed-form CDF covers centred wandering only (d = 0)")
    result = stats.kstest(np.asarray(samples), lambda t: p0_cdf_array(t, model))
    return float(result.statistic)


def fading_ks_oracle(model: FadingModel, seed: Optional[int] = None, samples: int = 1_000_000, threads: int = 1) -> OracleRun:
    seed = settings.DEFAULT_SEED if seed is None else seed
    tau = sample_fading(model, seed, samples, threads)
    distance = ks_distance(tau, model)
    # asymptotic 95% critical value of the KS statistic
    run = OracleRun(seed=seed, samples=samples, statistic="ks_distance", value=distance, ci95=1.358 / math.sqrt(samples))
    logger.debug(f"fading_ks_oracle: D={distance:.3e} (95% critical {run.ci95:.3e})")
    return run


def fading_moment_oracle(model: FadingModel, seed: Optional[int] = None, samples: int = 1_000_000, threads: int = 1) -> OracleRun:
    """Sample mean of r^2; equals 2 sigma^2 + d^2."""
    seed = settings.DEFAULT_SEED if seed is None else seed
    r2 = sample_deflections(model, seed, samples, threads) ** 2
    spread = float(np.std(r2, ddof=1)) if samples > 1 else 0.0
    return OracleRun(
        seed=seed,
        samples=samples,
        statistic="mean",
        value=float(np.mean(r2)),
        ci95=1.96 * spread / math.sqrt(samples),
    )


# -----------------------------------------------------
# Geometric overlap
# -----------------------------------------------------
def overlap_oracle(r: float, a_r: float, w_st: float, grid_n: int = 256) -> float:
    """Power of a Gaussian spot centred at distance ``r`` inside a disk of radius ``a_r``.

    Gauss-Legendre polar quadrature of (2/pi w^2) exp(-2|p - c|^2 / w^2);
    the angular half-range [0, pi] is doubled by symmetry.
    """
    if r < 0 or a_r <= 0 or w_st <= 0:
        raise ValueError("overlap_oracle needs r >= 0 and positive radii")

    nodes, weights = np.polynomial.legendre.leggauss(grid_n)
    rho = 0.5 * a_r * (nodes + 1.0)
    w_rho = 0.5 * a_r * weights
    theta = 0.5 * math.pi * (nodes + 1.0)
    w_theta = 0.5 * math.pi * weights

    rho_g, theta_g = np.meshgrid(rho, theta, indexing="ij")
    dist2 = rho_g ** 2 + r ** 2 - 2.0 * rho_g * r * np.cos(theta_g)
    intensity = (2.0 / (math.pi * w_st ** 2)) * np.exp(-2.0 * dist2 / w_st ** 2)

    inner = intensity @ w_theta
    return float(2.0 * np.sum(inner * rho * w_rho))


# -----------------------------------------------------
# Parameter-estimation simulation
# -----------------------------------------------------
def _simulate_estimates(config: EstimationConfig, point: ChannelPoint, seed: int, trials: int, threads: int = 1) -> np.ndarray:
    """(trials, 2) array of (tau_hat, n_hat) under y = sqrt(tau) x + z.

    Sums over the m estimation samples are drawn from their exact
    distributions: S = sum x^2 ~ sigma_x^2 chi2(m), sum x z | S ~ N(0, sigma_z^2 S),
    sum z^2 ~ sigma_z^2 chi2(m). Heterodyne uses 2m samples with one
    extra vacuum unit of noise.
    """
    m, sz2 = effective_samples(config, point)
    sx2 = point.sigma_x2
    sqrt_tau = math.sqrt(point.tau)
    vacuum = sz2 - point.sigma_z2 + 1.0

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        s = sx2 * rng.chisquare(m, size)
        cross = math.sqrt(sz2) * np.sqrt(s) * rng.standard_normal(size)
        zz = sz2 * rng.chisquare(m, size)
        tau_hat = ((sqrt_tau * s + cross) / (m * sx2)) ** 2
        n_hat = (zz / m - vacuum) / 2.0
        return np.column_stack([tau_hat, n_hat]).ravel()

    return _run_chunks(seed, trials, draw, threads).reshape(-1, 2)


def estimator_coverage(
    config: EstimationConfig,
    point: ChannelPoint,
    seed: Optional[int] = None,
    trials: int = 100_000,
    parameter: str = "noise",
    w: Optional[float] = None,
    threads: int = 1,
) -> OracleRun:
    """Frequency with which the worst-case bound fails to cover the true value.

    ``parameter`` selects the noise bound (n_hat + w sigma_n < n) or the
    transmissivity bound (tau_hat - w sigma_tau > tau).
    """
    if parameter not in ("noise", "tau"):
        raise ValueError("parameter must be 'noise' or 'tau'")
    seed = settings.DEFAULT_SEED if seed is None else seed
    w = deviations_from_eps(config.eps_pe) if w is None else w

    var_tau, var_noise = estimator_variances(config, point)
    estimates = _simulate_estimates(config, point, seed, trials, threads)

    if parameter == "noise":
        failures = estimates[:, 1] + w * math.sqrt(var_noise) < point.n_bar
    else:
        failures = estimates[:, 0] - w * math.sqrt(var_tau) > point.tau

    freq = float(np.mean(failures))
    ci95 = 1.96 * math.sqrt(max(freq * (1.0 - freq), 1.0 / trials) / trials)
    logger.info(f"estimator_coverage[{parameter}]: failure frequency {freq:.4e} over {trials} trials (w={w:.3f})")
    return OracleRun(seed=seed, samples=trials, statistic="coverage", value=freq, ci95=ci95)


def estimator_mean_oracle(
    config: EstimationConfig,
    point: ChannelPoint,
    seed: Optional[int] = None,
    trials: int = 10_000,
    parameter: str = "noise",
    threads: int = 1,
) -> OracleRun:
    seed = settings.DEFAULT_SEED if seed is None else seed
    column = 1 if parameter == "noise" else 0
    values = _simulate_estimates(config, point, seed, trials, threads)[:, column]
    return OracleRun(
        seed=seed,
        samples=trials,
        statistic="mean",
        value=float(np.mean(values)),
        ci95=1.96 * float(np.std(values, ddof=1)) / math.sqrt(trials),
    )


def estimator_variance_oracle(
    config: EstimationConfig,
    point: ChannelPoint,
    seed: Optional[int] = None,
    trials: int = 20_000,
    parameter: str = "tau",
    threads: int = 1,
) -> OracleRun:
    """Sample variance of an estimator, to compare with the first-order formula."""
    seed = settings.DEFAULT_SEED if seed is None else seed
    column = 1 if parameter == "noise" else 0
    values = _simulate_estimates(config, point, seed, trials, threads)[:, column]
    variance = float(np.var(values, ddof=1))
    # normal-theory standard error of a sample variance
    return OracleRun(
        seed=seed,
        samples=trials,
        statistic="variance",
        value=variance,
        ci95=1.96 * variance * math.sqrt(2.0 / (trials - 1)),
    )
