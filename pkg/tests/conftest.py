from dataclasses import dataclass
from typing import Callable

import pytest

from app.models.results import FadingModel, TurbulenceState
from app.models.schemas import ExtinctionModel, LinkGeometry, NoiseModel, ProtocolConfig, TurbulenceInputs
from app.services.environment import eta_atm, n_total
from app.services.fading import build_fading_model
from app.services.turbulence import turbulence_state


NIGHT = TurbulenceInputs(hv_a=1.7e-14, wind=21.0)
DAY = TurbulenceInputs(hv_a=2.75e-14, wind=57.0)


@dataclass(frozen=True)
class Link:
    geometry: LinkGeometry
    turbulence: TurbulenceState
    fading: FadingModel
    n_bar: float


def make_geometry(z: float, rx_aperture: float = 0.05) -> LinkGeometry:
    return LinkGeometry(wavelength=800e-9, z=z, altitude=30.0, w0=0.05, rx_aperture=rx_aperture)


def make_link(z: float, day: bool = True, rx_aperture: float = 0.05) -> Link:
    geometry = make_geometry(z, rx_aperture)
    noise = NoiseModel(sky_brightness=0.1 if day else 1e-6, rx_aperture=rx_aperture)
    turb = turbulence_state(geometry, DAY if day else NIGHT)
    atm = eta_atm(ExtinctionModel(), geometry.altitude, z)
    fading = build_fading_model(geometry, turb, noise.eta_eff, atm)
    return Link(geometry, turb, fading, n_total(noise, geometry.wavelength))


@pytest.fixture
def link() -> Callable[..., Link]:
    return make_link


@pytest.fixture
def geometry() -> Callable[..., LinkGeometry]:
    return make_geometry


@pytest.fixture
def table_protocol() -> ProtocolConfig:
    """Collective-attack column of the reference parameter table."""
    return ProtocolConfig(N=5e7, m=7.5e6, d=32, beta=0.98, p_ec=0.9)


@pytest.fixture
def general_protocol() -> ProtocolConfig:
    """General-attack column of the reference parameter table."""
    return ProtocolConfig(
        N=5e7,
        m=7.5e6,
        d=32,
        beta=0.98,
        p_ec=0.1,
        eps_s=1e-43,
        eps_h=1e-43,
        eps_cor=1e-43,
        eps_pe=1e-43,
        f_et=0.9,
        attack="general",
    )


@pytest.fixture
def fading_model() -> FadingModel:
    return FadingModel(eta=0.4, gamma=3.0, r0=0.04, sigma=0.02)
