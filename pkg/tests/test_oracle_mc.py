import math
from dataclasses import replace

import numpy as np
import pytest

from app.core.config import get_settings
from app.models.results import ChannelPoint
from app.models.schemas import Detection, EstimationConfig
from app.services.estimation import estimator_variances
from app.services.fading import eta_deflected_exact
from app.services.oracle_mc import (
    estimator_coverage,
    estimator_mean_oracle,
    estimator_variance_oracle,
    fading_ks_oracle,
    fading_moment_oracle,
    ks_distance,
    overlap_oracle,
    rng_for_chunk,
    sample_deflections,
    sample_fading,
)

settings = get_settings()

POINT = ChannelPoint(tau=0.4, n_bar=0.01, mu=20.0)


# -----------------------------------------------------
# Random streams
# -----------------------------------------------------
def test_streams_are_keyed_by_seed_and_chunk():
    a = rng_for_chunk(5, 0).random(4)
    assert np.array_equal(a, rng_for_chunk(5, 0).random(4))
    assert not np.array_equal(a, rng_for_chunk(5, 1).random(4))
    assert not np.array_equal(a, rng_for_chunk(6, 0).random(4))
    with pytest.raises(ValueError):
        rng_for_chunk(5, -1)


def test_samples_do_not_depend_on_thread_count(fading_model):
    n = 3 * settings.ORACLE_CHUNK + 17
    single = sample_fading(fading_model, 99, n, threads=1)
    pooled = sample_fading(fading_model, 99, n, threads=4)
    assert single.shape == (n,)
    assert np.array_equal(single, pooled)


# -----------------------------------------------------
# Fading
# -----------------------------------------------------
@pytest.mark.slow
def test_sampled_fading_matches_closed_form_cdf(fading_model):
    run = fading_ks_oracle(fading_model, seed=1, samples=1_000_000)
    assert run.statistic == "ks_distance"
    assert run.value < 0.005


def test_no_wandering_gives_constant_transmissivity(fading_model):
    still = fading_model.with_sigma(0.0)
    tau = sample_fading(still, 3, 1000)
    assert np.all(tau == still.eta)


def test_deflection_second_moment(fading_model):
    run = fading_moment_oracle(fading_model, seed=2, samples=200_000)
    assert abs(run.value - 2.0 * fading_model.sigma ** 2) <= 2.0 * run.ci95


def test_rician_deflections_have_offset_moment(fading_model):
    shifted = replace(fading_model, d=0.01)
    r = sample_deflections(shifted, 4, 200_000)
    assert np.mean(r ** 2) == pytest.approx(2.0 * 0.02 ** 2 + 0.01 ** 2, rel=0.02)
    with pytest.raises(ValueError):
        ks_distance(sample_fading(shifted, 4, 100), shifted)


@pytest.mark.parametrize("fraction", [0.0, 0.5, 1.0, 2.0, 3.0])
def test_overlap_quadrature_matches_closed_form(geometry, fraction):
    geom = geometry(200.0)
    a_r = geom.rx_aperture
    r = fraction * a_r
    expected = eta_deflected_exact(r, geom, a_r)
    assert overlap_oracle(r, a_r, a_r) == pytest.approx(expected, rel=1e-4)


# -----------------------------------------------------
# Parameter estimation
# -----------------------------------------------------
@pytest.mark.slow
def test_noise_bound_coverage_at_confidence_level():
    config = EstimationConfig(m=1e4, eps_pe=1e-2, detection=Detection.HOM)
    run = estimator_coverage(config, POINT, seed=7, trials=100_000, parameter="noise")
    assert run.value <= 0.01 + 3.0 * math.sqrt(0.01 * 0.99 / 1e5)


def test_zero_width_bound_fails_half_the_time():
    config = EstimationConfig(m=1e4, eps_pe=1e-2, detection=Detection.HOM)
    run = estimator_coverage(config, POINT, seed=8, trials=20_000, parameter="noise", w=0.0)
    assert run.value == pytest.approx(0.5, abs=0.02)


def test_coverage_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        estimator_coverage(EstimationConfig(m=100, eps_pe=1e-2), POINT, trials=10, parameter="mu")


@pytest.mark.parametrize("detection", [Detection.HOM, Detection.HET])
def test_estimator_means_converge(detection):
    config = EstimationConfig(m=1e5, eps_pe=1e-2, detection=detection)
    noise = estimator_mean_oracle(config, POINT, seed=9, trials=10_000, parameter="noise")
    tau = estimator_mean_oracle(config, POINT, seed=10, trials=10_000, parameter="tau")
    assert abs(noise.value - POINT.n_bar) <= 3.0 * noise.ci95 / 1.96
    # tau_hat carries an O(1/m) bias
    assert tau.value == pytest.approx(POINT.tau, abs=3.0 * tau.ci95 / 1.96 + 1e-4)


def test_transmissivity_variance_matches_first_order_formula():
    config = EstimationConfig(m=1e4, eps_pe=1e-2, detection=Detection.HOM)
    run = estimator_variance_oracle(config, POINT, seed=11, trials=20_000, parameter="tau")
    assert run.value == pytest.approx(estimator_variances(config, POINT)[0], rel=0.05)
