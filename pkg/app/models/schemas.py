from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# -------------------------------------------------------------------
# Enumerations
# -------------------------------------------------------------------


class Detection(str, Enum):
    HOM = "hom"
    HET = "het"


class Attack(str, Enum):
    COLLECTIVE = "collective"
    GENERAL = "general"


class Strategy(str, Enum):
    THRESHOLD = "threshold"
    LATTICE = "lattice"


class BeamVariant(str, Enum):
    GENERAL = "general"
    FOCUSED = "focused"
    COLLIMATED = "collimated"


# -------------------------------------------------------------------
# Link geometry
# -------------------------------------------------------------------


class LinkGeometry(BaseModel):
    """Transmitter/receiver geometry. All lengths in meters.

    ``curvature`` is the phase-front radius R0; ``None`` marks a collimated beam.
    """

    model_config = ConfigDict(frozen=True)

    wavelength: float = Field(..., gt=0)
    z: float = Field(..., ge=0)
    altitude: float = Field(0.0, ge=0)
    w0: float = Field(..., gt=0)
    curvature: Optional[float] = None
    tx_aperture: Optional[float] = Field(default=None, gt=0)
    rx_aperture: float = Field(..., gt=0)

    @field_validator("curvature")
    @classmethod
    def _curvature_nonzero(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value == 0:
            raise ValueError("curvature R0 = 0 is undefined; use None for a collimated beam")
        return value

    @property
    def collimated(self) -> bool:
        return self.curvature is None

    @property
    def wavenumber(self) -> float:
        return 2.0 * 3.141592653589793 / self.wavelength


# -------------------------------------------------------------------
# Environment
# -------------------------------------------------------------------


class ExtinctionModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha0: float = Field(5e-6, ge=0, description="sea-level extinction factor, 1/m")
    scale_height: float = Field(6600.0, gt=0)


class NoiseModel(BaseModel):
    """Background light collected by the receiver.

    ``filter_nm`` stays in nm to match the per-nm normalisation of the
    sky brightness; ``gate`` is in seconds.
    """

    model_config = ConfigDict(frozen=True)

    sky_brightness: float = Field(..., ge=0, description="W m^-2 nm^-1 sr^-1")
    filter_nm: float = Field(1.0, gt=0)
    gate: float = Field(10e-9, gt=0)
    fov: float = Field(1e-10, gt=0)
    rx_aperture: float = Field(..., gt=0)
    eta_eff: float = Field(0.5, ge=0, le=1)
    n_ex: float = Field(0.0, ge=0)
    n_background_override: Optional[float] = Field(default=None, ge=0)


class TurbulenceInputs(BaseModel):
    """Either a fixed Cn2 or Hufnagel-Valley parameters (A, wind speed)."""

    model_config = ConfigDict(frozen=True)

    cn2: Optional[float] = Field(default=None, ge=0)
    hv_a: float = Field(1.7e-14, ge=0)
    wind: float = Field(21.0, ge=0)
    pointing_jitter: float = Field(1e-6, ge=0)


# -------------------------------------------------------------------
# Protocol / estimation
# -------------------------------------------------------------------


class EstimationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: float = Field(..., ge=1)
    eps_pe: float = Field(..., gt=0, lt=0.5)
    detection: Detection = Detection.HET
    pilot_energy: float = Field(0.0, ge=0)


class ProtocolConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: float = Field(5e7, gt=0)
    m: float = Field(7.5e6, ge=1)
    d: int = Field(32, ge=2)
    beta: float = Field(0.98, ge=0, le=1)
    p_ec: float = Field(0.9, gt=0, le=1)
    eps_s: float = Field(2.0 ** -33, gt=0, lt=1)
    eps_h: float = Field(2.0 ** -33, gt=0, lt=1)
    eps_cor: float = Field(2.0 ** -33, gt=0, lt=1)
    eps_pe: float = Field(2.0 ** -33, gt=0, lt=0.5)
    f_et: float = Field(0.0, ge=0)
    d_T: Optional[float] = Field(default=None, ge=0)
    d_R: Optional[float] = Field(default=None, ge=0)
    eps_prime_max: Optional[float] = Field(default=None, gt=0, lt=1, description="general-attack eps' budget for the optimiser")
    detection: Detection = Detection.HET
    attack: Attack = Attack.COLLECTIVE
    pilot: bool = True
    estimated_parameters: int = Field(1, ge=1, le=2)
    mu_max: float = Field(1e4, gt=1, le=1e8)
    strategy: Strategy = Strategy.THRESHOLD
    slots: int = Field(2, ge=2)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ProtocolConfig":
        if self.m >= self.N:
            raise ValueError("estimation modes m must be fewer than the total N")
        if self.attack == Attack.GENERAL and self.detection != Detection.HET:
            raise ValueError("general attacks require heterodyne detection")
        return self

    @property
    def n(self) -> float:
        """Key-generation signals: N - m, or (N - m)/(1 + f_et) under general attacks."""
        if self.attack == Attack.GENERAL:
            return (self.N - self.m) / (1.0 + self.f_et)
        return self.N - self.m

    def estimation(self) -> EstimationConfig:
        return EstimationConfig(m=self.m, eps_pe=self.eps_pe, detection=self.detection)


# -------------------------------------------------------------------
# Scenario
# -------------------------------------------------------------------

SweepVariable = Literal["z", "aR", "mu", "eta_th", "M"]


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variable: SweepVariable = "z"
    start: float
    stop: float
    points: int = Field(1, ge=1)
    scale: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _check_range(self) -> "SweepSpec":
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("log sweeps need positive start and stop")
        if self.variable == "eta_th" and not (0 < self.start < 1 and 0 < self.stop < 1):
            raise ValueError("eta_th sweeps are fractions of eta in (0, 1)")
        if self.variable == "M" and min(self.start, self.stop) < 2:
            raise ValueError("lattice sweeps need M >= 2")
        if self.variable == "mu" and min(self.start, self.stop) <= 1:
            raise ValueError("modulation sweeps need mu > 1")
        return self


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    preset: Optional[str] = None
    geometry: LinkGeometry
    extinction: ExtinctionModel = ExtinctionModel()
    turbulence: TurbulenceInputs = TurbulenceInputs()
    noise: NoiseModel
    protocol: ProtocolConfig = ProtocolConfig()
    general: Optional[ProtocolConfig] = None
    sweep: SweepSpec
    trusted_setup: bool = False
    oracle_samples: int = Field(0, ge=0)
    output_path: Optional[str] = None
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_apertures(self) -> "Scenario":
        if abs(self.noise.rx_aperture - self.geometry.rx_aperture) > 1e-15:
            raise ValueError("noise.rx_aperture must equal geometry.rx_aperture")
        return self
