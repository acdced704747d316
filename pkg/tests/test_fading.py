import math

import numpy as np
import pytest
from scipy import integrate

from app.models.results import FadingModel
from app.services.fading import (
    eta_deflected_exact,
    eta_shortterm,
    fading_average,
    fading_shape_params,
    p0_cdf,
    p0_density,
    p0_survival,
    p_general_density,
    slot_probability,
    tau_of_r,
    threshold_probability,
    weber_q0,
)


GRID_Z = [100.0, 300.0, 600.0, 1000.0]
GRID_SIGMA = [0.002, 0.005, 0.01, 0.02, 0.04]


def _integrate_in_log(density, model: FadingModel, x_max: float) -> float:
    """Integral of density(tau) d tau over (0, eta] with tau = eta exp(-x)."""
    value, _ = integrate.quad(
        lambda x: density(model.eta * math.exp(-x)) * model.eta * math.exp(-x),
        0.0,
        x_max,
        limit=400,
        epsabs=1e-13,
        epsrel=1e-11,
    )
    return value


def test_shortterm_transmissivity(geometry):
    eta_st, far = eta_shortterm(geometry(100.0), 0.05)
    assert far == pytest.approx(2.0)
    assert eta_st == pytest.approx(1.0 - math.exp(-2.0))
    with pytest.raises(ValueError):
        eta_shortterm(geometry(100.0), 0.0)


def test_weber_edge_cases():
    assert weber_q0(0.0, 1.0) == 1.0
    assert weber_q0(1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        weber_q0(-1.0, 1.0)


def test_weber_large_x_stays_in_float_range():
    # e^(2x) alone overflows here; the integral up to y=10 keeps Q0 finite
    small = weber_q0(400.0, 10.0)
    assert math.isfinite(small) and small > 0.0
    assert weber_q0(400.0, 10.0) < weber_q0(400.0, 20.0)
    # mass around the peak t = 2x pushes Q0 past the float range
    assert weber_q0(400.0, 2000.0) == math.inf


def test_deflected_transmissivity_is_decreasing(geometry):
    geom = geometry(100.0)
    values = [eta_deflected_exact(r, geom, 0.05) for r in np.linspace(0.0, 0.15, 16)]
    assert values[0] == pytest.approx(1.0 - math.exp(-2.0))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_shape_fit_reproduces_aligned_value(geometry):
    geom = geometry(100.0)
    eta_st, far = eta_shortterm(geom, 0.06)
    gamma, r0 = fading_shape_params(eta_st, far, geom.rx_aperture)
    model = FadingModel(eta=eta_st, gamma=gamma, r0=r0, sigma=0.01)

    assert gamma > 0 and r0 > 0
    assert float(tau_of_r(0.0, model)) == pytest.approx(eta_st)
    # the shape law decays like the exact overlap
    assert float(tau_of_r(0.05, model)) == pytest.approx(eta_deflected_exact(0.05, geom, 0.06), rel=0.05)


def test_cdf_and_survival_are_complementary(fading_model):
    for t in [1e-6, 0.05, 0.2, 0.39, 0.399999]:
        assert p0_cdf(t, fading_model) + p0_survival(t, fading_model) == pytest.approx(1.0, abs=1e-15)
    assert p0_cdf(0.0, fading_model) == 0.0
    assert p0_cdf(fading_model.eta, fading_model) == 1.0


def test_density_is_derivative_of_cdf(fading_model):
    t = 0.25
    h = 1e-6
    slope = (p0_cdf(t + h, fading_model) - p0_cdf(t - h, fading_model)) / (2.0 * h)
    assert p0_density(t, fading_model) == pytest.approx(slope, rel=1e-6)


@pytest.mark.parametrize("z", GRID_Z)
@pytest.mark.parametrize("sigma", GRID_SIGMA)
def test_density_normalisation(link, z, sigma):
    model = link(z).fading.with_sigma(sigma)
    x_max = (40.0 / model.weibull_rate) ** (model.gamma / 2.0)
    total = _integrate_in_log(lambda t: p0_density(t, model), model, x_max)
    assert abs(total - 1.0) < 1e-6


def test_general_density_reduces_to_weibull(fading_model):
    for t in [0.01, 0.1, 0.3, 0.39]:
        assert p_general_density(t, fading_model) == pytest.approx(p0_density(t, fading_model), rel=1e-12)


def test_general_density_normalisation_off_centre():
    model = FadingModel(eta=0.4, gamma=3.0, r0=0.04, sigma=0.01, d=0.02)
    x_max = ((model.d + 12.0 * model.sigma) / model.r0) ** model.gamma
    total = _integrate_in_log(lambda t: p_general_density(t, model), model, x_max)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_slots_partition_unit_mass(fading_model):
    edges = np.linspace(0.0, fading_model.eta, 9)
    total = sum(slot_probability(lo, hi, fading_model) for lo, hi in zip(edges, edges[1:]))
    assert total == pytest.approx(1.0, abs=1e-14)
    assert threshold_probability(edges[4], fading_model) == pytest.approx(
        slot_probability(edges[4], fading_model.eta, fading_model), abs=1e-15
    )


def test_slot_bounds_are_checked(fading_model):
    with pytest.raises(ValueError):
        slot_probability(0.3, 0.2, fading_model)


def test_no_wandering_is_point_mass():
    model = FadingModel(eta=0.4, gamma=3.0, r0=0.04, sigma=0.0)
    assert slot_probability(0.3, 0.4, model) == 1.0
    assert slot_probability(0.1, 0.3, model) == 0.0
    assert threshold_probability(0.39, model) == 1.0
    assert fading_average(lambda t: t ** 2, model) == pytest.approx(0.16)


def test_fading_average_matches_direct_quadrature(fading_model):
    direct = _integrate_in_log(lambda t: t * p0_density(t, fading_model), fading_model, 60.0)
    assert fading_average(lambda t: t, fading_model) == pytest.approx(direct, rel=1e-8)
