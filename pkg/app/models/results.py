"""Computed (derived) states. Frozen dataclasses: cheap to build inside sweeps
and optimiser loops, safe to share across threads."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple


class Regime(str, Enum):
    WEAK_YURA = "weak_yura"
    WEAK_NUMERICAL_WARN = "weak_numerical_warn"
    NEGLIGIBLE_WANDER = "negligible_wander"
    STRONG = "strong"

    @property
    def is_weak(self) -> bool:
        return self is not Regime.STRONG


class BoundKind(str, Enum):
    LOSS_ONLY = "loss_only"
    THERMAL = "thermal"
    SLOW = "slow"
    INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class TurbulenceState:
    Cn2: float
    rho0: float
    rytov_var: float
    phi: float
    w_z: float
    w_st: float
    w_lt: float
    sigma_TB: float
    sigma_P: float
    regime: Regime

    @property
    def sigma(self) -> float:
        # the only place sigma^2 = sigma_TB^2 + sigma_P^2 is assembled
        return math.hypot(self.sigma_TB, self.sigma_P)


@dataclass(frozen=True)
class FadingModel:
    eta: float
    gamma: float
    r0: float
    sigma: float
    d: float = 0.0
    eta_st: float = 1.0
    eta_st_far: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.gamma <= 0 or self.r0 <= 0:
            raise ValueError(f"shape parameters must be positive (gamma={self.gamma}, r0={self.r0})")
        if self.sigma < 0 or self.d < 0:
            raise ValueError("sigma and d must be nonnegative")

    @property
    def weibull_rate(self) -> float:
        """r0^2 / (2 sigma^2); infinite without wandering."""
        if self.sigma == 0:
            return math.inf
        return self.r0 ** 2 / (2.0 * self.sigma ** 2)

    def with_eta(self, eta: float) -> "FadingModel":
        return FadingModel(eta, self.gamma, self.r0, self.sigma, self.d, self.eta_st, self.eta_st_far)

    def with_sigma(self, sigma: float) -> "FadingModel":
        return FadingModel(self.eta, self.gamma, self.r0, sigma, self.d, self.eta_st, self.eta_st_far)


@dataclass(frozen=True)
class BoundResult:
    upper: float
    lower: float
    kind: BoundKind
    delta_factor: float
    thermal_correction: float = 0.0
    clamped: bool = False
    raw_upper: Optional[float] = None
    raw_lower: Optional[float] = None


@dataclass(frozen=True)
class ChannelPoint:
    tau: float
    n_bar: float
    mu: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.n_bar < 0:
            raise ValueError("n_bar must be nonnegative")
        if self.mu < 1:
            raise ValueError("modulation variance mu must be >= 1")

    @property
    def sigma_x2(self) -> float:
        return self.mu - 1.0

    @property
    def sigma_z2(self) -> float:
        return 2.0 * self.n_bar + 1.0

    @property
    def b(self) -> float:
        return self.tau * (self.mu - 1.0) + 2.0 * self.n_bar + 1.0


@dataclass(frozen=True)
class TwoModeCM:
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class CompositeEpsilon:
    eps: float
    eps_prime: Optional[float] = None


@dataclass(frozen=True)
class RateResult:
    rate: float
    raw: float
    clamped: bool
    eps: CompositeEpsilon
    k_n: Optional[float] = None


@dataclass(frozen=True)
class RateOptimum:
    mu: Optional[float]
    eta_th: Optional[float]
    rate: float
    eps: Optional[CompositeEpsilon] = None
    slots: Optional[int] = None

    @property
    def found(self) -> bool:
        return self.mu is not None


@dataclass(frozen=True)
class OracleRun:
    seed: int
    samples: int
    statistic: str
    value: float
    ci95: float


@dataclass(frozen=True)
class PointResult:
    """One CSV row before formatting."""

    index: int
    sweep_value: float
    values: Dict[str, float] = field(default_factory=dict)
    regime: Regime = Regime.WEAK_YURA
    flags: Tuple[str, ...] = ()
