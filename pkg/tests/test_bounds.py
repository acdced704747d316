import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import optimize

from app.models.results import BoundKind, FadingModel
from app.models.schemas import ExtinctionModel
from app.services.beam_optics import eta_diffraction
from app.services.bounds import (
    achievable_protocol_rates,
    delta_correction,
    entropic_h,
    fading_average,
    g_thermal,
    intermediate_detector_bound,
    lambda_correction,
    loss_bound,
    loss_bound_high_loss,
    loss_bounds,
    max_secure_distance,
    plob,
    plob_thermal,
    rci_rate,
    rcoh_rate,
    rsq_rate,
    slow_detector_bound,
    slow_detector_simple,
    thermal_bounds,
    thermal_direct,
    thermal_lower,
    thermal_upper,
    trusted_setup_parameters,
)
from app.services.environment import eta_atm


def test_plob_values():
    assert plob(0.0) == 0.0
    assert plob(0.5) == pytest.approx(1.0)
    assert plob(1e-6) == pytest.approx(1e-6 / math.log(2.0), rel=1e-6)
    assert plob(1.0) == math.inf


def test_entropy_function():
    assert entropic_h(0.0) == 0.0
    assert entropic_h(1.0) == pytest.approx(2.0)
    values = entropic_h(np.array([0.0, 1.0]))
    assert values.shape == (2,)


def test_thermal_plob_limits():
    assert plob_thermal(0.4, 0.0) == pytest.approx(plob(0.4))
    assert plob_thermal(0.4, 0.5) == 0.0
    assert plob_thermal(0.4, 1e-3) < plob(0.4)


def test_delta_without_wandering_is_one():
    model = FadingModel(eta=0.4, gamma=3.0, r0=0.04, sigma=0.0)
    assert delta_correction(model) == 1.0
    assert loss_bound(model) == pytest.approx(plob(0.4))


def test_delta_bounded_by_one(fading_model):
    delta = delta_correction(fading_model)
    assert 0.0 < delta < 1.0
    assert lambda_correction(fading_model) > 0.0


@pytest.mark.parametrize("z", [100.0, 300.0, 600.0, 1000.0])
@pytest.mark.parametrize("sigma", [0.002, 0.005, 0.01, 0.02, 0.04])
def test_loss_bound_equals_average_plob(link, z, sigma):
    model = link(z).fading.with_sigma(sigma)
    assert abs(loss_bound(model) - fading_average(plob, model)) < 1e-8


def test_high_loss_approximation():
    model = FadingModel(eta=1e-4, gamma=3.0, r0=0.04, sigma=0.02)
    assert loss_bound_high_loss(model) == pytest.approx(loss_bound(model), rel=1e-3)


def test_loss_bounds_result(fading_model):
    result = loss_bounds(fading_model)
    assert result.kind == BoundKind.LOSS_ONLY
    assert result.upper == result.lower == pytest.approx(loss_bound(fading_model))


def test_thermal_sandwich_on_day_sweep(link):
    for z in np.linspace(50.0, 1000.0, 50):
        current = link(float(z))
        result = thermal_bounds(current.fading, current.n_bar)
        assert result.lower <= result.upper <= loss_bound(current.fading)


def test_thermal_bounds_collapse_without_noise(fading_model):
    assert abs(thermal_upper(fading_model, 1e-12) - loss_bound(fading_model)) < 1e-6
    assert thermal_upper(fading_model, 0.5) == 0.0


def test_thermal_lower_quadrature_form(fading_model):
    n_bar = 1e-3
    closed = thermal_lower(fading_model, n_bar)
    averaged = thermal_lower(fading_model, n_bar, quadrature=True)
    assert 0.0 < closed <= averaged <= thermal_upper(fading_model, n_bar) + 1e-3


def test_thermal_direct_below_loss_bound(fading_model):
    assert thermal_direct(fading_model, 1e-3) < loss_bound(fading_model)
    assert thermal_direct(fading_model, 0.5) == 0.0


def test_g_thermal():
    assert g_thermal(0.0) == 0.0
    assert g_thermal(1e-3) > 0.0


def test_max_secure_distance(geometry):
    geom = geometry(100.0)
    assert max_secure_distance(geom, 0.0) == math.inf
    z_max = max_secure_distance(geom, 1e-3)
    far = math.pi * 0.05 * 0.05 / 800e-9
    assert z_max == pytest.approx(far * math.sqrt(2.0 / -math.log1p(-1e-3)), rel=1e-8)


DAY_SWEEP = np.linspace(50.0, 1000.0, 20)


def _setup_losses(current):
    """(eta_eff, eta_atm) folded into the conftest link's fading model."""
    return 0.5, eta_atm(ExtinctionModel(), current.geometry.altitude, current.geometry.z)


def test_slow_detector_below_its_simple_form_on_day_sweep(link):
    for z in DAY_SWEEP:
        current = link(float(z))
        eta_eff, atm = _setup_losses(current)
        slow = slow_detector_bound(current.geometry, current.turbulence, eta_eff, atm)
        assert 0.0 < slow < slow_detector_simple(current.geometry, current.turbulence)


def test_slow_detector_matches_simple_form_without_setup_loss(link):
    # w_st^2 + sigma_TB^2 = w_lt^2, so only eta_eff eta_atm separates the two
    for z in [200.0, 600.0, 1000.0]:
        current = link(z)
        slow = slow_detector_bound(current.geometry, current.turbulence, 1.0, 1.0)
        assert slow == pytest.approx(slow_detector_simple(current.geometry, current.turbulence), rel=1e-9)


def test_detector_variants_coincide_without_wandering_or_pointing(link):
    current = link(600.0)
    eta_eff, atm = _setup_losses(current)
    turb = replace(current.turbulence, w_st=current.turbulence.w_lt, sigma_TB=0.0, sigma_P=0.0)

    slow = slow_detector_bound(current.geometry, turb, eta_eff, atm)
    intermediate = intermediate_detector_bound(current.geometry, turb, current.fading, eta_eff, atm)
    eta_lt = -math.expm1(-2.0 * current.geometry.rx_aperture ** 2 / turb.w_lt ** 2)

    assert intermediate == pytest.approx(slow, rel=1e-9)
    assert slow == pytest.approx(plob(eta_eff * atm * eta_lt), rel=1e-12)


def test_intermediate_detector_reduces_without_pointing(link):
    current = link(600.0)
    eta_eff, atm = _setup_losses(current)
    turb = current.turbulence
    no_pointing = replace(turb, sigma_P=0.0)
    value = intermediate_detector_bound(current.geometry, no_pointing, current.fading, eta_eff, atm)
    eta_lt = -math.expm1(-2.0 * current.geometry.rx_aperture ** 2 / turb.w_lt ** 2)
    assert value == pytest.approx(plob(eta_eff * atm * eta_lt))


def test_detector_variants_are_not_ordered_against_fast_bound(link):
    # the slow and intermediate spots are not the fast-detector channel;
    # on the day link at 1 km both sit above the fast loss bound
    current = link(1000.0)
    eta_eff, atm = _setup_losses(current)
    fast = loss_bound(current.fading)
    slow = slow_detector_bound(current.geometry, current.turbulence, eta_eff, atm)
    intermediate = intermediate_detector_bound(current.geometry, current.turbulence, current.fading, eta_eff, atm)

    assert slow > fast
    assert intermediate > fast
    assert intermediate <= slow * (1.0 + 1e-9)


def test_detector_variants_need_setup_losses(link):
    current = link(600.0)
    with pytest.raises(TypeError):
        slow_detector_bound(current.geometry, current.turbulence)
    with pytest.raises(TypeError):
        intermediate_detector_bound(current.geometry, current.turbulence, current.fading)


# -----------------------------------------------------
# Day sweep properties
# -----------------------------------------------------
def test_thermal_direct_below_thermal_upper_on_day_sweep(link):
    for z in DAY_SWEEP:
        current = link(float(z))
        direct = thermal_direct(current.fading, current.n_bar)
        upper = thermal_upper(current.fading, current.n_bar)
        assert 0.0 < direct <= upper + 1e-9


def test_delta_correction_in_unit_interval_on_sweep(link):
    for day in [True, False]:
        for z in DAY_SWEEP:
            delta = delta_correction(link(float(z), day=day).fading)
            assert 0.0 < delta <= 1.0 + 1e-12


def test_max_secure_distance_where_thermal_bound_vanishes(geometry):
    n_bar = 1e-3
    z_max = max_secure_distance(geometry(100.0), n_bar)

    def margin(z: float) -> float:
        return eta_diffraction(geometry(z)) - n_bar

    # the thermal-loss bound of the diffraction channel is zero from eta_d = n_bar on
    z_root = optimize.brentq(margin, 0.1 * z_max, 10.0 * z_max, xtol=1e-6)
    assert z_root == pytest.approx(z_max, rel=2e-3)
    assert plob_thermal(eta_diffraction(geometry(0.9 * z_max)), n_bar) > 0.0
    assert plob_thermal(eta_diffraction(geometry(1.01 * z_max)), n_bar) == 0.0

    def channel(z: float) -> FadingModel:
        return FadingModel(eta=eta_diffraction(geometry(z)), gamma=3.0, r0=0.04, sigma=0.0)

    assert thermal_upper(channel(0.5 * z_max), n_bar) > 0.0
    assert thermal_upper(channel(1.01 * z_max), n_bar) == 0.0


def test_trusted_setup_parameters():
    eta, n_bar = trusted_setup_parameters(0.8, 0.99, 0.5, 1e-3)
    assert eta == pytest.approx(0.792)
    assert n_bar == pytest.approx(5e-4)


def test_rates_without_noise():
    assert rci_rate(0.4, 0.0) == pytest.approx(plob(0.4))
    assert rcoh_rate(0.4, 0.0) == pytest.approx(plob(0.4) + 0.5 * math.log2(0.6))


def test_squeezed_state_sifting():
    assert rsq_rate(0.4, 0.0, p=0.5) == pytest.approx(0.5 * plob(0.4))
    assert rsq_rate(0.4, 0.0, p=1.0) == pytest.approx(plob(0.4))
    assert rsq_rate(0.4, 0.0, p=1.0, mu=1e8) == pytest.approx(plob(0.4), rel=1e-3)
    with pytest.raises(ValueError):
        rsq_rate(0.4, 0.0, p=1.5)


def test_achievable_rates_below_loss_bound(fading_model):
    rates = achievable_protocol_rates(fading_model, n_bar=1e-4)
    bound = loss_bound(fading_model)
    assert set(rates) == {"rci", "sq", "coh"}
    assert rates["coh"] <= rates["rci"] <= bound
