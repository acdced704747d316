import math

import pytest

from app.models.schemas import ExtinctionModel, NoiseModel
from app.services.environment import eta_atm, n_background, n_total, receiver_etendue


def test_extinction_sea_level():
    model = ExtinctionModel(alpha0=5e-6)
    assert eta_atm(model, 0.0, 1000.0) == pytest.approx(math.exp(-5e-3))


def test_extinction_decreases_with_altitude():
    model = ExtinctionModel()
    assert eta_atm(model, 30.0, 1000.0) > eta_atm(model, 0.0, 1000.0)
    assert eta_atm(model, 30.0, 0.0) == 1.0


def test_extinction_rejects_negative_inputs():
    with pytest.raises(ValueError):
        eta_atm(ExtinctionModel(), -1.0, 10.0)


def test_etendue_of_reference_receiver():
    noise = NoiseModel(sky_brightness=1e-6, rx_aperture=0.05)
    assert receiver_etendue(noise) == pytest.approx(1.0 * 10e-9 * 1e-10 * 0.05 ** 2)


def test_background_scales_with_sky_brightness():
    night = n_background(NoiseModel(sky_brightness=1e-6, rx_aperture=0.05), 800e-9)
    day = n_background(NoiseModel(sky_brightness=0.1, rx_aperture=0.05), 800e-9)
    assert day / night == pytest.approx(1e5)
    assert night == pytest.approx(3.16e-8, rel=0.01)


def test_background_override_and_total():
    noise = NoiseModel(sky_brightness=1e-6, rx_aperture=0.05, n_background_override=4.8e-8, n_ex=1e-9)
    assert n_background(noise, 800e-9) == 4.8e-8
    assert n_total(noise, 800e-9) == pytest.approx(0.5 * 4.8e-8 + 1e-9)
