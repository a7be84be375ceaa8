"""
Driven steady states of the absorptive/dispersive optical bistability equation

    y = x (1 + C (1 - i delta) / (1 + |x|^2 + delta^2) + i theta)

with x = <a>/sqrt(n0), |y|^2 = I_in. With s = 1 + u + delta^2 and u = |x|^2 every
steady state intensity is a non-negative real root of the cubic

    I_in s^2 = u [(s + C)^2 + (theta s - C delta)^2].

Roots are taken from the eigenvalues of the companion matrix and polished with a
Newton step. Near folds the two merging roots can come back from the eigenvalue
solver as a conjugate pair grazing the real axis; those are recovered from the
critical points of the cubic.
"""
from __future__ import annotations

import enum
import math

from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple, Union

import numpy as np

from scipy.optimize import brentq

from . import ConfigException, NumericalException, log
from .params import DimensionlessPoint

IMAG_TOLERANCE = 1e-8
TANGENCY_TOLERANCE = 1e-6
RESIDUAL_TOLERANCE = 1e-9
CRITICAL_COOPERATIVITY = 8.0

# Default figure grids
DRIVE_GRID = (1.0, 1e5, 400)
SPECTRUM_GRID = (-300.0, 300.0, 1201)
SURFACE_DELTA_GRID = (-300.0, 300.0, 301)
SURFACE_THETA_GRID = (-3.0, 3.0, 301)


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class SteadyStateBranch:
    """
    One self-consistent solution. `dipole` is the per-atom dipole in units of
    sqrt(gamma T2)/2, i.e. dipole = x sigma_z / (1 + i delta), which makes it
    independent of the physical realization; see `sigma_minus`.
    """

    u: float
    x: complex
    sigma_z: float
    dipole: complex
    stability: Stability = Stability.UNCLASSIFIED
    eigenvalues: Tuple[complex, ...] = field(default_factory=tuple)

    def sigma_minus(self, gamma_t2: float) -> complex:
        """Physical per-atom dipole <sigma_->"""
        return math.sqrt(gamma_t2) / 2.0 * self.dipole

    def transmission(self, I_in: float) -> float:
        """Intracavity intensity relative to the empty cavity"""
        return self.u / I_in if I_in > 0 else 1.0


@dataclass(frozen=True)
class BranchSet:
    point: DimensionlessPoint
    branches: Tuple[SteadyStateBranch, ...]

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def __getitem__(self, index) -> SteadyStateBranch:
        return self.branches[index]

    @property
    def top(self) -> SteadyStateBranch:
        return self.branches[-1]

    @property
    def bottom(self) -> SteadyStateBranch:
        return self.branches[0]

    def with_branches(self, branches: Sequence[SteadyStateBranch]) -> BranchSet:
        return replace(self, branches=tuple(branches))


@dataclass(frozen=True)
class Thresholds:
    """
    Fold drives of the resonant (delta = theta = 0) bistability curve. The lower
    drive threshold belongs to the high-intensity fold and vice versa.
    """

    C: float
    lower: float
    upper: float
    u_lower_fold: float
    u_upper_fold: float

    @property
    def asymptotes(self) -> Tuple[float, float]:
        """Large-C estimates (4C, C^2/4)"""
        return 4.0 * self.C, self.C**2 / 4.0

    def contains(self, I_in: float) -> bool:
        return self.lower < I_in < self.upper


def bistability_cubic(point: DimensionlessPoint) -> np.ndarray:
    """Coefficients (highest power first) of the steady-state cubic in u"""
    C, I, delta, theta = point.C, point.I_in, point.delta, point.theta
    a0 = 1.0 + delta**2
    p = a0 + C
    q = theta * a0 - C * delta
    return np.array(
        [
            1.0 + theta**2,
            2.0 * (p + q * theta) - I,
            p**2 + q**2 - 2.0 * I * a0,
            -I * a0**2,
        ]
    )


def denominator(point: DimensionlessPoint, u: float) -> complex:
    """D(u) = 1 + C (1 - i delta)/s + i theta, so that y = x D"""
    s = 1.0 + u + point.delta**2
    return 1.0 + point.C * (1.0 - 1j * point.delta) / s + 1j * point.theta


def residual(point: DimensionlessPoint, u: float) -> float:
    """|I_in - u |D(u)|^2|, the residual of the intensity form of the bistability equation"""
    return abs(point.I_in - u * abs(denominator(point, u)) ** 2)


def _polish(coeffs: np.ndarray, u: float) -> float:
    derivative = np.polyder(coeffs)
    slope = np.polyval(derivative, u)
    if slope == 0:
        return u
    step = np.polyval(coeffs, u) / slope
    if abs(step) > 0.1 * (1.0 + abs(u)):
        # far from a simple root; the eigenvalue estimate is better than this step
        return u
    return u - step


def _term_scale(coeffs: np.ndarray, u: float) -> float:
    powers = np.abs(u) ** np.arange(len(coeffs) - 1, -1, -1)
    return float(np.sum(np.abs(coeffs) * powers))


def _critical_points(coeffs: np.ndarray) -> List[float]:
    roots = np.roots(np.polyder(coeffs))
    return [float(r.real) for r in roots if abs(r.imag) <= 1e-6 * (1.0 + abs(r.real))]


def real_roots(coeffs: np.ndarray) -> List[Tuple[float, bool]]:
    """
    Non-negative real roots of a cubic, ascending, as (root, is_tangency) pairs.
    Roots closer than TANGENCY_TOLERANCE (relative) are merged and flagged.
    """
    monic = coeffs / coeffs[0]
    companion = np.array(
        [
            [-monic[1], -monic[2], -monic[3]],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )
    eigenvalues = np.linalg.eigvals(companion)

    candidates = []
    grazing = []
    for r in eigenvalues:
        if abs(r.imag) < IMAG_TOLERANCE * (1.0 + abs(r.real)):
            candidates.append(_polish(coeffs, float(r.real)))
        elif r.imag > 0:
            grazing.append(r)

    tangencies = []
    for pair in grazing:
        for c in _critical_points(coeffs):
            radius = max(10.0 * abs(pair.imag), TANGENCY_TOLERANCE * (1.0 + abs(c)))
            if abs(c - pair.real) > radius:
                continue
            if abs(np.polyval(coeffs, c)) <= RESIDUAL_TOLERANCE * _term_scale(coeffs, c):
                log.debug("recovered tangency at u=%r from grazing pair %r", c, pair)
                # a near-degenerate cluster scatters its eigenvalues; absorb them
                candidates = [r for r in candidates if abs(r - c) > radius]
                tangencies.append(c)

    roots = sorted([(r, False) for r in candidates] + [(c, True) for c in tangencies])

    merged: List[Tuple[float, bool]] = []
    for r, tangent in roots:
        if merged:
            previous, previous_tangent = merged[-1]
            if abs(r - previous) <= TANGENCY_TOLERANCE * max(1.0, abs(r), abs(previous)):
                keep = previous if previous_tangent or not tangent else r
                merged[-1] = (keep, True)
                continue
        merged.append((r, tangent))

    return [(r, tangent) for r, tangent in merged if r >= 0.0]


def _branch(point: DimensionlessPoint, u: float, marginal: bool) -> SteadyStateBranch:
    a0 = 1.0 + point.delta**2
    x = point.y / denominator(point, u)
    sigma_z = -a0 / (a0 + u)
    return SteadyStateBranch(
        u=u,
        x=complex(x),
        sigma_z=sigma_z,
        dipole=complex(x * sigma_z / (1.0 + 1j * point.delta)),
        stability=Stability.MARGINAL if marginal else Stability.UNCLASSIFIED,
    )


def solve_branches(point: DimensionlessPoint) -> BranchSet:
    """
    All steady states of `point`, ordered by ascending intensity (ties by sigma_z).
    """
    if point.I_in == 0:
        return BranchSet(point=point, branches=(_branch(point, 0.0, False),))

    coeffs = bistability_cubic(point)
    roots = real_roots(coeffs)
    if not roots:
        # P(0) < 0 < P(inf) so a positive root always exists
        raise NumericalException(f"no real steady state found for {point}; cubic coefficients {coeffs}")

    branches = [_branch(point, u, tangent) for u, tangent in roots]
    branches.sort(key=lambda b: (b.u, b.sigma_z))

    tolerance = RESIDUAL_TOLERANCE * max(1.0, point.I_in)
    for b in branches:
        r = residual(point, b.u)
        if r <= tolerance:
            continue
        if b.stability != Stability.MARGINAL:
            raise NumericalException(f"steady state u={b.u!r} of {point} has residual {r:g} above {tolerance:g}")
        # tangencies are accepted on the polynomial scale, which is looser near a fold
        log.warning("tangent steady state u=%r of %s has residual %g above %g", b.u, point, r, tolerance)

    return BranchSet(point=point, branches=tuple(branches))


def resonant_drive(C: float, u: float) -> float:
    """I_in(u) = u (1 + C/(1+u))^2 on resonance"""
    return u * (1.0 + C / (1.0 + u)) ** 2


def fold_points(C: float) -> Tuple[float, ...]:
    """
    Intensities where dI_in/du = 0 on resonance, i.e. the non-negative roots of
    u^2 + (2 - C) u + (1 + C) = 0. Empty below the critical cooperativity and a
    single tangency (u = 3) exactly at it.
    """
    if C < 0:
        raise ConfigException(f"cooperativity C must be non-negative, got {C}")
    discriminant = C * (C - CRITICAL_COOPERATIVITY)
    if discriminant < 0:
        return ()
    if discriminant == 0:
        return ((C - 2.0) / 2.0,)

    u_high = ((C - 2.0) + math.sqrt(discriminant)) / 2.0
    # product of the roots is 1 + C; avoids cancellation for large C
    u_low = (1.0 + C) / u_high
    return (u_low, u_high)


def critical_cooperativity() -> float:
    return CRITICAL_COOPERATIVITY


def bistability_thresholds(C: float) -> Union[Thresholds, None]:
    """
    Exact fold drives of the resonant bistability curve, or None when there is no
    open bistable window (C <= 8).
    """
    folds = fold_points(C)
    if len(folds) < 2:
        return None
    u_low, u_high = folds
    return Thresholds(
        C=C,
        lower=resonant_drive(C, u_high),
        upper=resonant_drive(C, u_low),
        u_lower_fold=u_high,
        u_upper_fold=u_low,
    )


def validate_grid(values: Sequence[float], name: str, non_negative: bool = False) -> np.ndarray:
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigException(f"{name} grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(grid)):
        raise ConfigException(f"{name} grid contains non-finite values")
    if non_negative and np.any(grid < 0):
        raise ConfigException(f"{name} grid must be non-negative")
    if grid.size > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigException(f"{name} grid must be strictly monotone")
    return grid


def scan_drive(C: float, delta: float, drives: Sequence[float], theta: float = 0.0) -> List[BranchSet]:
    """Steady states along a drive-intensity grid (bistability curve)"""
    grid = validate_grid(drives, "I_in", non_negative=True)
    return [solve_branches(DimensionlessPoint(C=C, I_in=float(I), delta=delta, theta=theta)) for I in grid]


def scan_spectrum(C: float, I_in: float, deltas: Sequence[float], theta: float = 0.0) -> List[BranchSet]:
    """Steady states along an atomic-detuning grid at fixed drive"""
    grid = validate_grid(deltas, "delta")
    return [solve_branches(DimensionlessPoint(C=C, I_in=I_in, delta=float(d), theta=theta)) for d in grid]


@dataclass(frozen=True)
class SurfaceGrid:
    """Largest-intensity branch on a theta (rows) x delta (columns) grid"""

    C: float
    I_in: float
    deltas: np.ndarray
    thetas: np.ndarray
    branches: Tuple[Tuple[SteadyStateBranch, ...], ...]

    @property
    def u(self) -> np.ndarray:
        return np.array([[b.u for b in row] for row in self.branches])

    def row(self, theta_index: int) -> Tuple[SteadyStateBranch, ...]:
        return self.branches[theta_index]


def scan_surface(C: float, I_in: float, deltas: Sequence[float], thetas: Sequence[float]) -> SurfaceGrid:
    delta_grid = validate_grid(deltas, "delta")
    theta_grid = validate_grid(thetas, "theta")
    rows = []
    for theta in theta_grid:
        rows.append(tuple(solve_branches(DimensionlessPoint(C=C, I_in=I_in, delta=float(d), theta=float(theta))).top for d in delta_grid))
    return SurfaceGrid(C=C, I_in=I_in, deltas=delta_grid, thetas=theta_grid, branches=tuple(rows))


@dataclass(frozen=True)
class NormalModeOverlay:
    """
    Weak-drive resonances in the (delta, theta) plane.

    `upper`/`lower` are the two normal-mode branches of the coupled atom-cavity
    oscillators, K theta (K theta + delta) = C K, which need the stiffness ratio
    K = kappa T2. `ridge` is the universal line of maximal weak-drive
    transmission, theta = C delta / (1 + delta^2), which the upper/lower hyperbola
    approaches once |delta| >> sqrt(C K).
    """

    C: float
    K: float
    deltas: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    ridge: np.ndarray

    @property
    def cavity_like(self) -> np.ndarray:
        """The branch closer to the bare cavity resonance theta = 0"""
        return np.where(np.abs(self.upper) <= np.abs(self.lower), self.upper, self.lower)


def normal_mode_overlay(C: float, deltas: Sequence[float], K: float = 1e3) -> NormalModeOverlay:
    if C < 0:
        raise ConfigException(f"cooperativity C must be non-negative, got {C}")
    if K <= 0:
        raise ConfigException(f"K = kappa T2 must be positive, got {K}")
    grid = validate_grid(deltas, "delta")

    root = np.sqrt(grid**2 + 4.0 * C * K)
    return NormalModeOverlay(
        C=C,
        K=K,
        deltas=grid,
        upper=(-grid + root) / (2.0 * K),
        lower=(-grid - root) / (2.0 * K),
        ridge=C * grid / (1.0 + grid**2),
    )


def vacuum_rabi_splitting(C: float, K: float) -> float:
    """2 g sqrt(N) in units of the dipole decay rate, 2 sqrt(C K)"""
    return 2.0 * math.sqrt(C * K)


def transmitted_phase(point: DimensionlessPoint, branch: SteadyStateBranch) -> float:
    """Arg[x/y] = -Arg[D(u)], the phase of the transmitted light relative to the drive"""
    return -float(np.angle(denominator(point, branch.u)))


def phase_slope_exact(point: DimensionlessPoint) -> float:
    """
    d(Arg[x/y])/d delta = C sigma_z / (C sigma_z - 1) on the top branch; exact on
    resonance where u(delta) is stationary.
    """
    sigma_z = solve_branches(point).top.sigma_z
    return point.C * sigma_z / (point.C * sigma_z - 1.0)


def phase_zero_crossing(C: float, I_in: float, theta: float, xtol: float = 1e-15) -> float:
    """
    Scaled atomic detuning delta where the top-branch transmitted phase vanishes,
    i.e. the lock point in presence of a cavity-laser detuning theta.
    """
    if theta == 0:
        return 0.0
    if C == 0:
        raise ConfigException(f"no atoms, no lock point: the empty-cavity phase does not cross zero for theta={theta}")

    def phase(delta: float) -> float:
        p = DimensionlessPoint(C=C, I_in=I_in, delta=delta, theta=theta)
        return transmitted_phase(p, solve_branches(p).top)

    direction = math.copysign(1.0, theta)
    beta = 4.0 * I_in / C**2
    # linearized lock point, then widen until the phase changes sign
    hi = direction * max(abs(theta) * C * beta / 4.0, 1e-12) * 2.0
    for _ in range(60):
        if phase(0.0) * phase(hi) < 0:
            break
        hi *= 2.0
    else:
        raise NumericalException(f"could not bracket the phase zero crossing for C={C}, I_in={I_in}, theta={theta}")

    lo, hi = sorted([0.0, hi])
    return brentq(phase, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
