"""
Lock performance of a laser stabilized to the transmitted phase of a strongly
saturated atomic sample: signal power, shot-noise limited SNR, phase slope,
quantum-limited linewidth, lock bandwidth and line pulling.

Power, SNR and bandwidth go through the identity kappa C^2 n0 = N^2 C0 gamma / 4,
which removes the cavity length from every reported result.
"""
from __future__ import annotations

import math
import warnings

from dataclasses import asdict, dataclass
from typing import Iterable, List, Tuple, Union

from scipy import constants

from . import ConfigException, log
from .config import Catalog
from .params import DimensionlessPoint, PhysicalSystem, derive_params, drive_from_beta, laser_linewidth_reference, operating_point
from .steady_state import phase_zero_crossing, solve_branches


def _check_beta(beta: float):
    if not beta > 0 or not math.isfinite(beta):
        raise ConfigException(f"saturation parameter beta must be positive and finite, got {beta}")
    if beta < 1:
        log.warning("beta=%g is below the saturated regime (beta >= 1); lock formulas assume a bleached sample", beta)


def _beta(sys: PhysicalSystem, beta: Union[float, None]) -> float:
    beta = sys.beta if beta is None else beta
    _check_beta(beta)
    return beta


def signal_power(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """Transmitted power P = hbar omega_L kappa C^2 n0 beta / 2 in W"""
    beta = _beta(sys, beta)
    d = derive_params(sys)
    return constants.hbar * d.omega_L * d.kappa * d.C**2 * d.n0 * beta / 2.0


def snr_squared(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """eta_qe N^2 C0 gamma beta / 4 in Hz"""
    beta = _beta(sys, beta)
    d = derive_params(sys)
    return sys.detector_efficiency * sys.N**2 * d.C0 * sys.gamma * beta / 4.0


def snr(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """Bandwidth-normalized shot-noise SNR in sqrt(Hz)"""
    return math.sqrt(snr_squared(sys, beta))


def lock_bandwidth(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """Quantum-limited lock bandwidth kappa C^2 n0 beta in Hz"""
    beta = _beta(sys, beta)
    d = derive_params(sys)
    return d.kappa * d.C**2 * d.n0 * beta


@dataclass(frozen=True)
class PhaseSlope:
    """d(phase)/d(delta) in units of T2 (i.e. per unit scaled detuning)"""

    exact: float
    leading: float

    @property
    def relative_gap(self) -> float:
        return abs(self.exact - self.leading) / self.exact if self.exact else math.inf


def operating_sigma_z(C: float, beta: float) -> float:
    return solve_branches(DimensionlessPoint(C=C, I_in=drive_from_beta(C, beta))).top.sigma_z


def phase_slope(C: float, beta: float, sigma_z: Union[float, None] = None) -> PhaseSlope:
    """
    Exact slope C sigma_z/(C sigma_z - 1) of the transmitted phase on resonance and
    its large-C limit 4/(beta C). sigma_z defaults to the top branch at I_in = beta C^2/4.
    """
    _check_beta(beta)
    if C < 0:
        raise ConfigException(f"cooperativity C must be non-negative, got {C}")
    if sigma_z is None:
        sigma_z = operating_sigma_z(C, beta) if C > 0 else -1.0
    return PhaseSlope(
        exact=C * sigma_z / (C * sigma_z - 1.0),
        leading=4.0 / (beta * C) if C > 0 else math.inf,
    )


def phase_slope_physical(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """d(phase)/d(Delta) in s, exact on the operating branch"""
    beta = _beta(sys, beta)
    return sys.T2 * phase_slope(derive_params(sys).C, beta).exact


@dataclass(frozen=True)
class Linewidth:
    """Quantum-limited FWHM in Hz, from SNR and exact slope (`full`) and from the closed form"""

    full: float
    closed_form: float

    @property
    def relative_gap(self) -> float:
        return abs(self.full - self.closed_form) / self.closed_form


def quantum_limited_linewidth(sys: PhysicalSystem, beta: Union[float, None] = None) -> Linewidth:
    beta = _beta(sys, beta)
    d = derive_params(sys)
    closed_form = d.C0 * beta / (16.0 * math.pi * sys.gamma * sys.T2**2) / sys.detector_efficiency

    slope = 2.0 * math.pi * phase_slope_physical(sys, beta)  # rad/Hz
    denominator = snr_squared(sys, beta) * slope**2
    full = math.pi / denominator if denominator > 0 else math.inf
    return Linewidth(full=full, closed_form=closed_form)


def radiative_linewidth(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """beta C0 gamma / (64 pi), the closed form with T2 = 2/gamma"""
    beta = _beta(sys, beta)
    return beta * derive_params(sys).C0 * sys.gamma / (64.0 * math.pi) / sys.detector_efficiency


def pulling_coefficient(sys: PhysicalSystem, beta: Union[float, None] = None) -> float:
    """d(nu_lock)/d(theta) = C beta / (8 pi T2) in Hz"""
    beta = _beta(sys, beta)
    return derive_params(sys).C * beta / (8.0 * math.pi * sys.T2)


def line_pulling(sys: PhysicalSystem, theta: float, beta: Union[float, None] = None) -> float:
    """Lock-point shift in Hz for a cavity-laser detuning theta (units of kappa)"""
    if abs(theta) > 0.1:
        log.warning("theta=%g is not small; the linear pulling formula is off", theta)
    return pulling_coefficient(sys, beta) * theta


def intracavity_beta(C: float, beta: float) -> float:
    """4 u / C^2 on the operating branch, the saturation parameter seen by the atoms"""
    _check_beta(beta)
    if C == 0:
        # u -> I_in = beta C^2/4 as C -> 0
        return beta
    return 4.0 * solve_branches(DimensionlessPoint(C=C, I_in=drive_from_beta(C, beta))).top.u / C**2


def pulling_zero_crossing(sys: PhysicalSystem, theta: float, beta: Union[float, None] = None) -> float:
    """Lock-point shift in Hz from the numerical zero of the transmitted phase"""
    beta = _beta(sys, beta)
    point = operating_point(sys, beta)
    delta = phase_zero_crossing(point.C, point.I_in, theta)
    return delta / (2.0 * math.pi * sys.T2)


@dataclass(frozen=True)
class CollectiveDipole:
    """<J+ J-> on resonance from the steady state (N^2 |sigma_-|^2) and its closed form"""

    steady_state: float
    closed_form: float


def collective_dipole(sys: PhysicalSystem, beta: Union[float, None] = None) -> CollectiveDipole:
    beta = _beta(sys, beta)
    d = derive_params(sys)
    if d.C == 0:
        return CollectiveDipole(steady_state=0.0, closed_form=0.0)
    top = solve_branches(operating_point(sys, beta)).top
    sigma_minus = top.sigma_minus(sys.gamma_t2)
    return CollectiveDipole(
        steady_state=sys.N**2 * abs(sigma_minus) ** 2,
        closed_form=sys.N**2 / d.C**2 * sys.gamma_t2 / beta,
    )


@dataclass(frozen=True)
class LockBudget:
    name: str
    beta: float
    C0: float
    C: float
    signal_power: float  # W
    snr: float  # sqrt(Hz)
    phase_slope: float  # s, per rad/s of detuning
    phase_slope_leading: float  # s
    linewidth: float  # Hz, closed form
    linewidth_full: float  # Hz
    bandwidth: float  # Hz
    pulling_coefficient: float  # Hz per unit theta
    collective_dipole: float
    collective_dipole_closed_form: float
    laser_linewidth_reference: float  # Hz

    def __post_init__(self):
        for key, value in asdict(self).items():
            if isinstance(value, float) and value < 0:
                raise ConfigException(f"{self.name}: {key} came out negative ({value})")

    @property
    def phase_slope_per_hz(self) -> float:
        """d(phase)/d(nu) in rad/Hz"""
        return 2.0 * math.pi * self.phase_slope

    def to_record(self) -> dict:
        record = asdict(self)
        record["phase_slope_per_hz"] = self.phase_slope_per_hz
        return record


def budget(sys: PhysicalSystem, beta: Union[float, None] = None) -> LockBudget:
    beta = _beta(sys, beta)
    d = derive_params(sys)
    slope = phase_slope(d.C, beta) if d.C > 0 else PhaseSlope(exact=0.0, leading=math.inf)
    linewidth = quantum_limited_linewidth(sys, beta)
    dipole = collective_dipole(sys, beta)
    return LockBudget(
        name=sys.name,
        beta=beta,
        C0=d.C0,
        C=d.C,
        signal_power=signal_power(sys, beta),
        snr=snr(sys, beta),
        phase_slope=sys.T2 * slope.exact,
        phase_slope_leading=sys.T2 * slope.leading,
        linewidth=linewidth.closed_form,
        linewidth_full=linewidth.full,
        bandwidth=lock_bandwidth(sys, beta),
        pulling_coefficient=pulling_coefficient(sys, beta),
        collective_dipole=dipole.steady_state,
        collective_dipole_closed_form=dipole.closed_form,
        laser_linewidth_reference=laser_linewidth_reference(sys),
    )


@dataclass(frozen=True)
class Table1Row:
    name: str
    C0: float
    signal_power: float
    snr: float
    linewidth: float
    bandwidth: float

    HEADER = ("name", "C0", "P_W", "SNR_sqrtHz", "linewidth_Hz", "bandwidth_Hz")

    def values(self) -> Tuple:
        return (self.name, self.C0, self.signal_power, self.snr, self.linewidth, self.bandwidth)


def table1(source: Union[Catalog, Iterable[PhysicalSystem], None] = None, beta: Union[float, None] = None) -> List[Table1Row]:
    """
    Lock budget summary for every species in a catalog (built-in by default),
    in catalog order.
    """
    if source is None:
        source = Catalog.builtin()
    systems = source.systems() if isinstance(source, Catalog) else list(source)

    rows = []
    for sys in systems:
        b = budget(sys, beta)
        rows.append(Table1Row(name=b.name, C0=b.C0, signal_power=b.signal_power, snr=b.snr, linewidth=b.linewidth, bandwidth=b.bandwidth))
        if b.bandwidth < 1e3:
            warnings.warn(f"{b.name}: quantum-limited lock bandwidth {b.bandwidth:g} Hz is below 1 kHz")
    return rows
