"""
Parameter types and the physical -> dimensionless mapping.

Everything downstream works in scaled variables: intensities in units of the
saturation photon number n0, atomic detuning in units of the dipole decay rate
(delta = T2 * Delta) and cavity-laser detuning in units of kappa (theta).

Units ledger:
    - angular frequencies and decay rates are rad/s (or 1/s) internally
    - kappa is the *field* decay rate, kappa = pi c / (2 L F), so the cavity
      intensity FWHM is kappa / pi in Hz
    - the mode volume is V_eff = L * mode_area with mode_area = pi (100 um)^2 by default
"""
from __future__ import annotations

import math

from dataclasses import dataclass, field, replace
from typing import Union

from scipy import constants

from . import ConfigException, log

DEFAULT_MODE_AREA = math.pi * (100e-6) ** 2
DEFAULT_CAVITY_LENGTH = 1e-2
DEFAULT_BETA = 2.0


@dataclass(frozen=True)
class PhysicalSystem:
    """
    One atom-cavity realization.

    `T2` may be given as a number (seconds) or the string "radiative" which means
    T2 = 2 / gamma (no decoherence beyond spontaneous decay).
    """

    name: str
    wavelength: float  # m
    gamma: float  # rad/s, spontaneous decay
    T2: Union[float, str]  # s, dipole coherence time
    N: int
    finesse: float
    cavity_length: float = DEFAULT_CAVITY_LENGTH
    mode_area: float = DEFAULT_MODE_AREA
    detector_efficiency: float = 1.0
    beta: float = DEFAULT_BETA
    radiatively_limited: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.T2 == "radiative":
            object.__setattr__(self, "radiatively_limited", True)
            if not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
                raise ConfigException(f"{self.name}: gamma must be strictly positive, got {self.gamma}")
            object.__setattr__(self, "T2", 2.0 / self.gamma)

        for attr in ["wavelength", "gamma", "T2", "finesse", "cavity_length", "mode_area"]:
            value = getattr(self, attr)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
                raise ConfigException(f"{self.name}: {attr} must be a strictly positive number, got {value!r}")

        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 0:
            raise ConfigException(f"{self.name}: atom number N must be a non-negative integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

        if not 0 < self.detector_efficiency <= 1:
            raise ConfigException(f"{self.name}: detector_efficiency must be in (0, 1], got {self.detector_efficiency}")

        # relative slack so that T2 = 2/gamma survives the round trip through floats
        if self.dipole_decay < self.gamma / 2 * (1 - 1e-12):
            raise ConfigException(f"{self.name}: dipole decay 1/T2 = {self.dipole_decay:g} 1/s is below the radiative limit gamma/2 = {self.gamma / 2:g} 1/s")

        if not self.beta > 0:
            raise ConfigException(f"{self.name}: beta must be positive, got {self.beta}")

    @property
    def dipole_decay(self) -> float:
        """Gamma_2 = 1/T2 in 1/s"""
        return 1.0 / self.T2

    @property
    def gamma_t2(self) -> float:
        return self.gamma * self.T2

    def with_changes(self, **changes) -> PhysicalSystem:
        if "T2" not in changes and self.radiatively_limited:
            changes["T2"] = "radiative"
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    g: float  # rad/s
    kappa: float  # 1/s, field decay
    n0: float  # saturation photon number
    C0: float  # single atom cooperativity
    C: float  # collective cooperativity
    omega_L: float  # rad/s

    @property
    def vacuum_rabi_splitting(self) -> float:
        """2 g sqrt(N) in rad/s"""
        return 2.0 * self.g * math.sqrt(self.C / self.C0) if self.C0 else 0.0


@dataclass(frozen=True)
class DimensionlessPoint:
    """
    The universal description of a driven operating point: C, I_in = eta^2/(n0 kappa^2),
    delta = T2 (omega_a - omega_c) and theta = (omega_c - omega_L) / kappa.
    """

    C: float
    I_in: float
    delta: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for attr in ["C", "I_in", "delta", "theta"]:
            value = getattr(self, attr)
            if not math.isfinite(value):
                raise ConfigException(f"{attr} must be finite, got {value}")
        if self.C < 0:
            raise ConfigException(f"cooperativity C must be non-negative, got {self.C}")
        if self.I_in < 0:
            raise ConfigException(f"drive intensity I_in must be non-negative, got {self.I_in}")

    @property
    def beta(self) -> float:
        return beta_from_drive(self.C, self.I_in)

    @property
    def y(self) -> float:
        """scaled drive amplitude eta / (kappa sqrt(n0)); the drive defines the phase reference"""
        return math.sqrt(self.I_in)


def mode_volume(sys: PhysicalSystem) -> float:
    return sys.cavity_length * sys.mode_area


def coupling_squared(sys: PhysicalSystem) -> float:
    """
    g^2 = 3 lambda^2 c gamma / (8 pi V_eff), from g = (p/hbar) sqrt(hbar omega / (2 V eps0))
    with the dipole moment eliminated through p^2 = 3 pi eps0 hbar c^3 gamma / omega^3.
    """
    return 3.0 * sys.wavelength**2 * constants.c * sys.gamma / (8.0 * math.pi * mode_volume(sys))


def cavity_decay(sys: PhysicalSystem) -> float:
    """Field decay rate kappa = pi c / (2 L F)"""
    return math.pi * constants.c / (2.0 * sys.cavity_length * sys.finesse)


def single_atom_cooperativity(sys: PhysicalSystem) -> float:
    """Closed form C0 = 3 lambda^2 gamma T2 F / (4 pi^2 A); independent of the cavity length"""
    return 3.0 * sys.wavelength**2 * sys.gamma * sys.T2 * sys.finesse / (4.0 * math.pi**2 * sys.mode_area)


def derive_params(sys: PhysicalSystem) -> DerivedParams:
    g2 = coupling_squared(sys)
    kappa = cavity_decay(sys)
    gamma2 = sys.dipole_decay

    C0 = g2 / (kappa * gamma2)
    derived = DerivedParams(
        g=math.sqrt(g2),
        kappa=kappa,
        n0=sys.gamma * gamma2 / (4.0 * g2),
        C0=C0,
        C=sys.N * C0,
        omega_L=2.0 * math.pi * constants.c / sys.wavelength,
    )
    log.debug("derived parameters for %s: %s", sys.name, derived)
    return derived


def beta_from_drive(C: float, I_in: float) -> float:
    """beta = 4 I_in / C^2; infinite for an empty cavity with non-zero drive"""
    if C == 0:
        return math.inf if I_in > 0 else 0.0
    return 4.0 * I_in / C**2


def drive_from_beta(C: float, beta: float) -> float:
    return beta * C**2 / 4.0


def to_dimensionless(sys: PhysicalSystem, eta: float, Delta: float = 0.0, cavity_laser_detuning: float = 0.0) -> DimensionlessPoint:
    """
    Map a drive amplitude eta (1/s), atom-cavity detuning Delta (rad/s) and
    cavity-laser detuning omega_c - omega_L (rad/s) onto the universal variables.
    """
    d = derive_params(sys)
    return DimensionlessPoint(
        C=d.C,
        I_in=eta**2 / (d.n0 * d.kappa**2),
        delta=sys.T2 * Delta,
        theta=cavity_laser_detuning / d.kappa,
    )


def from_dimensionless(sys: PhysicalSystem, point: DimensionlessPoint) -> tuple:
    """
    Inverse of `to_dimensionless`: returns (eta, Delta, omega_c - omega_L). The
    cooperativity of `point` is not free; it must belong to `sys`.
    """
    d = derive_params(sys)
    if not math.isclose(point.C, d.C, rel_tol=1e-9, abs_tol=1e-300):
        raise ConfigException(f"point has C={point.C:g} but {sys.name} realizes C={d.C:g}")
    eta = math.sqrt(point.I_in * d.n0) * d.kappa
    return eta, point.delta / sys.T2, point.theta * d.kappa


def operating_point(sys: PhysicalSystem, beta: Union[float, None] = None, delta: float = 0.0, theta: float = 0.0) -> DimensionlessPoint:
    """The lock operating point I_in = beta C^2 / 4 of a system"""
    beta = sys.beta if beta is None else beta
    C = derive_params(sys).C
    return DimensionlessPoint(C=C, I_in=drive_from_beta(C, beta), delta=delta, theta=theta)


def laser_linewidth_reference(sys: PhysicalSystem) -> float:
    """Linewidth C0 gamma / pi (Hz) of an active laser on the same transition, for comparison"""
    return derive_params(sys).C0 * sys.gamma / math.pi
