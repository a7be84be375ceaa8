"""
Semiclassical (mean-field) dynamics of the driven atom-cavity system.

Time is scaled to the dipole coherence time, tau = t/T2. The state is the
5-vector [Re x, Im x, Re s, Im s, z] with x the field in units of sqrt(n0), z the
inversion and s = 2 <sigma_-> / sqrt(gamma T2) the scaled per-atom dipole. With
G = gamma T2 and K = kappa T2 the flow is

    dx/dtau = K [y - (1 + i theta) x + C s]
    ds/dtau = -(1 + i delta) s + x z
    dz/dtau = -G [(1 + z) + Re(x s*)]

whose fixed points are exactly the solutions of the steady-state cubic.
"""
from __future__ import annotations

import math
import warnings

from dataclasses import dataclass, field, replace
from typing import Callable, List, Tuple, Union

import numpy as np

from scipy.integrate import solve_ivp

from . import ConfigException, NumericalException, log
from .params import DimensionlessPoint
from .steady_state import BranchSet, Stability, SteadyStateBranch, bistability_thresholds, solve_branches

DEFAULT_K = 1e3
DEFAULT_GAMMA_T2 = 2.0
DEFAULT_TOLERANCE = 1e-8
DEFAULT_RAMP_RATE = 1e-3
FIXED_POINT_TOLERANCE = 1e-8
STABILITY_BAND = 1e-9


class QuasiStaticWarning(UserWarning):
    """The drive ramp is too fast for the state to follow the steady-state branches"""


@dataclass(frozen=True)
class FlowParams:
    C: float
    K: float
    I_in: float
    delta: float = 0.0
    theta: float = 0.0
    gamma_t2: float = DEFAULT_GAMMA_T2

    def __post_init__(self):
        for attr in ["C", "K", "I_in", "delta", "theta", "gamma_t2"]:
            if not math.isfinite(getattr(self, attr)):
                raise ConfigException(f"{attr} must be finite, got {getattr(self, attr)}")
        if self.K <= 0:
            raise ConfigException(f"K = kappa T2 must be positive, got {self.K}")
        if not 0 < self.gamma_t2 <= 2:
            raise ConfigException(f"gamma T2 must be in (0, 2], got {self.gamma_t2}")
        if self.C < 0:
            raise ConfigException(f"cooperativity C must be non-negative, got {self.C}")
        if self.I_in < 0:
            raise ConfigException(f"drive intensity I_in must be non-negative, got {self.I_in}")

    @classmethod
    def from_point(cls, point: DimensionlessPoint, K: float = DEFAULT_K, gamma_t2: float = DEFAULT_GAMMA_T2) -> FlowParams:
        return cls(C=point.C, K=K, I_in=point.I_in, delta=point.delta, theta=point.theta, gamma_t2=gamma_t2)

    @property
    def point(self) -> DimensionlessPoint:
        return DimensionlessPoint(C=self.C, I_in=self.I_in, delta=self.delta, theta=self.theta)

    @property
    def y(self) -> float:
        return math.sqrt(self.I_in)

    def with_drive(self, I_in: float) -> FlowParams:
        return replace(self, I_in=I_in)


@dataclass(frozen=True)
class SemiclassicalState:
    x: complex
    s: complex
    z: float

    @classmethod
    def vacuum(cls) -> SemiclassicalState:
        """Empty cavity, atoms in the ground state"""
        return cls(x=0j, s=0j, z=-1.0)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> SemiclassicalState:
        return cls(x=complex(v[0], v[1]), s=complex(v[2], v[3]), z=float(v[4]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.x.real, self.x.imag, self.s.real, self.s.imag, self.z])

    def sigma_minus(self, gamma_t2: float) -> complex:
        return math.sqrt(gamma_t2) / 2.0 * self.s

    def check_bloch(self, gamma_t2: float, tol: float = 1e-6):
        """Raise unless the atomic state is inside the Bloch sphere"""
        if not -1.0 - tol <= self.z <= 1.0 + tol:
            raise ConfigException(f"inversion z={self.z} outside [-1, 1]")
        if abs(self.sigma_minus(gamma_t2)) > 0.5 + tol:
            raise ConfigException(f"|sigma_-| = {abs(self.sigma_minus(gamma_t2))} exceeds 1/2")


def state_from_branch(branch: SteadyStateBranch) -> SemiclassicalState:
    return SemiclassicalState(x=branch.x, s=branch.dipole, z=branch.sigma_z)


def _as_vector(state: Union[SemiclassicalState, np.ndarray, SteadyStateBranch]) -> np.ndarray:
    if isinstance(state, SteadyStateBranch):
        state = state_from_branch(state)
    if isinstance(state, SemiclassicalState):
        return state.to_vector()
    v = np.asarray(state, dtype=float)
    if v.shape != (5,):
        raise ConfigException(f"expected a 5-component state vector, got shape {v.shape}")
    return v


def rhs_vector(v: np.ndarray, fp: FlowParams, y: Union[float, None] = None) -> np.ndarray:
    """The flow on the real 5-vector; `y` overrides the drive amplitude of `fp`"""
    y = fp.y if y is None else y
    xr, xi, sr, si, z = v
    K, C, theta, delta, G = fp.K, fp.C, fp.theta, fp.delta, fp.gamma_t2
    return np.array(
        [
            K * (y - xr + theta * xi + C * sr),
            K * (-xi - theta * xr + C * si),
            -sr + delta * si + xr * z,
            -si - delta * sr + xi * z,
            -G * ((1.0 + z) + xr * sr + xi * si),
        ]
    )


def rhs(state: Union[SemiclassicalState, np.ndarray], fp: FlowParams) -> np.ndarray:
    """d(state)/dtau as a real 5-vector"""
    return rhs_vector(_as_vector(state), fp)


def jacobian_vector(v: np.ndarray, fp: FlowParams) -> np.ndarray:
    xr, xi, sr, si, z = v
    K, C, theta, delta, G = fp.K, fp.C, fp.theta, fp.delta, fp.gamma_t2
    return np.array(
        [
            [-K, K * theta, K * C, 0.0, 0.0],
            [-K * theta, -K, 0.0, K * C, 0.0],
            [z, 0.0, -1.0, delta, xr],
            [0.0, z, -delta, -1.0, xi],
            [-G * sr, -G * si, -G * xr, -G * xi, -G],
        ]
    )


def fixed_point_tolerance(fp: FlowParams) -> float:
    return FIXED_POINT_TOLERANCE * max(1.0, fp.K * fp.y / DEFAULT_K)


def jacobian(state: Union[SemiclassicalState, np.ndarray, SteadyStateBranch], fp: FlowParams, check: bool = True) -> np.ndarray:
    """
    Analytic Jacobian of the flow at a fixed point. Linearizing anywhere else is
    almost certainly a mistake, so non-fixed points are rejected unless
    check=False.
    """
    v = _as_vector(state)
    if check:
        norm = float(np.linalg.norm(rhs_vector(v, fp)))
        if norm >= fixed_point_tolerance(fp):
            raise NumericalException(f"state is not a fixed point of {fp}: |rhs| = {norm:g}")
    return jacobian_vector(v, fp)


def _verdict(eigenvalues: np.ndarray, K: float) -> Stability:
    band = STABILITY_BAND * K
    leading = float(np.max(eigenvalues.real))
    if leading < -band:
        return Stability.STABLE
    if leading > band:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def classify_stability(branch_set: BranchSet, fp: Union[FlowParams, None] = None, K: float = DEFAULT_K, gamma_t2: float = DEFAULT_GAMMA_T2) -> BranchSet:
    """
    Attach eigenvalues and a stability verdict to every branch. A branch that the
    solver already flagged as a tangency stays marginal.
    """
    if fp is None:
        fp = FlowParams.from_point(branch_set.point, K=K, gamma_t2=gamma_t2)
    elif fp.point != branch_set.point:
        raise ConfigException(f"flow parameters {fp} do not belong to {branch_set.point}")

    classified = []
    for branch in branch_set:
        eigenvalues = np.linalg.eigvals(jacobian(branch, fp))
        eigenvalues = eigenvalues[np.argsort(-eigenvalues.real, kind="stable")]
        verdict = Stability.MARGINAL if branch.stability == Stability.MARGINAL else _verdict(eigenvalues, fp.K)
        log.debug("u=%r: leading eigenvalue %r -> %s", branch.u, eigenvalues[0], verdict.value)
        classified.append(replace(branch, stability=verdict, eigenvalues=tuple(complex(e) for e in eigenvalues)))

    return branch_set.with_branches(classified)


@dataclass(frozen=True)
class Trajectory:
    HEADER = ("tau", "re_x", "im_x", "re_s", "im_s", "z")

    fp: FlowParams
    tau: np.ndarray
    states: np.ndarray  # (len(tau), 5)
    drive: Union[np.ndarray, None] = None  # I_in(tau) when the drive was ramped
    nfev: int = 0

    @property
    def final(self) -> SemiclassicalState:
        return SemiclassicalState.from_vector(self.states[-1])

    @property
    def intensity(self) -> np.ndarray:
        return self.states[:, 0] ** 2 + self.states[:, 1] ** 2

    def rows(self) -> List[Tuple[float, ...]]:
        """[tau, re_x, im_x, re_s, im_s, z] rows for CSV output"""
        return [(float(t),) + tuple(float(c) for c in v) for t, v in zip(self.tau, self.states)]


def _check_tolerance(tol: float):
    if not 1e-12 <= tol <= 1e-3:
        raise ConfigException(f"integration tolerance must be in [1e-12, 1e-3], got {tol}")


def integrate(
    state0: Union[SemiclassicalState, np.ndarray, SteadyStateBranch],
    fp: FlowParams,
    tau_end: float,
    tol: float = DEFAULT_TOLERANCE,
    t_eval: Union[np.ndarray, None] = None,
    drive: Union[Callable[[float], float], None] = None,
) -> Trajectory:
    """
    Integrate the flow from `state0` over [0, tau_end] with an L-stable implicit
    Runge-Kutta scheme (Radau IIA) and the analytic Jacobian. `drive`, if given,
    maps tau to I_in(tau).
    """
    _check_tolerance(tol)
    if not tau_end > 0:
        raise ConfigException(f"tau_end must be positive, got {tau_end}")

    v0 = _as_vector(state0)

    if drive is None:

        def fun(tau, v):
            return rhs_vector(v, fp)

    else:

        def fun(tau, v):
            return rhs_vector(v, fp, y=math.sqrt(max(drive(tau), 0.0)))

    def jac(tau, v):
        return jacobian_vector(v, fp)

    result = solve_ivp(fun, (0.0, tau_end), v0, method="Radau", jac=jac, rtol=tol, atol=tol, t_eval=t_eval)
    log.debug("integrated %s to tau=%g: %s (nfev=%d, njev=%d)", fp, tau_end, result.message, result.nfev, result.njev)
    if result.status == -1:
        raise NumericalException(f"integration failed at tau={result.t[-1] if len(result.t) else 0.0:g}: {result.message}")

    drive_values = np.array([drive(t) for t in result.t]) if drive is not None else None
    return Trajectory(fp=fp, tau=result.t, states=result.y.T, drive=drive_values, nfev=result.nfev)


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


def escape_trajectory(
    branch_set: BranchSet,
    index: int,
    fp: Union[FlowParams, None] = None,
    kick: float = 1e-3,
    tau_end: Union[float, None] = None,
    tol: float = DEFAULT_TOLERANCE,
) -> Trajectory:
    """Kick branch `index` along the leading eigenvector of its Jacobian and integrate"""
    fp = fp or FlowParams.from_point(branch_set.point)
    start = _as_vector(branch_set[index])

    eigenvalues, eigenvectors = np.linalg.eig(jacobian(start, fp))
    leading = int(np.argmax(eigenvalues.real))
    direction = eigenvectors[:, leading].real
    if np.linalg.norm(direction) == 0:
        direction = eigenvectors[:, leading].imag
    direction = direction / np.linalg.norm(direction)

    if tau_end is None:
        growth = max(float(eigenvalues[leading].real), 0.0)
        escape = math.log(1.0 / kick) / growth if growth > 0 else 0.0
        tau_end = 2.0 * escape + 200.0 / min(1.0, fp.gamma_t2)

    kicked = start + kick * max(1.0, float(np.linalg.norm(start))) * direction
    return integrate(kicked, fp, tau_end, tol=tol)


def escape_destination(
    branch_set: BranchSet,
    index: int,
    fp: Union[FlowParams, None] = None,
    kick: float = 1e-3,
    tau_end: Union[float, None] = None,
    tol: float = DEFAULT_TOLERANCE,
) -> int:
    """
    Time-domain stability oracle: index of the branch the kicked trajectory of
    branch `index` ends up nearest to. A stable branch returns its own index.
    """
    final = escape_trajectory(branch_set, index, fp, kick=kick, tau_end=tau_end, tol=tol).states[-1]

    distances = [_distance(final, _as_vector(b)) for b in branch_set]
    destination = int(np.argmin(distances))
    log.debug("branch %d escapes to branch %d (distances %s)", index, destination, distances)
    return destination


@dataclass(frozen=True)
class HysteresisLoop:
    """
    Up and down traces u(I_in) of a slow logarithmic drive ramp, sampled on a
    common drive grid (ascending).
    """

    C: float
    drives: np.ndarray
    up: np.ndarray
    down: np.ndarray
    up_jump: Union[float, None]
    down_jump: Union[float, None]
    rate: float

    @property
    def bistable(self) -> bool:
        return self.up_jump is not None and self.down_jump is not None

    def rows(self) -> List[Tuple[float, float, str]]:
        """[I_in, u, direction] rows, the down trace listed in ramp order"""
        rows = [(float(I), float(u), "up") for I, u in zip(self.drives, self.up)]
        rows += [(float(I), float(u), "down") for I, u in zip(self.drives[::-1], self.down[::-1])]
        return rows


def jump_drive(drives: np.ndarray, u: np.ndarray, threshold: float = 1.0) -> Union[float, None]:
    """Drive at the largest step of ln(1+u) between neighbouring samples, if that step exceeds `threshold`"""
    steps = np.abs(np.diff(np.log1p(u)))
    if steps.size == 0:
        return None
    k = int(np.argmax(steps))
    if steps[k] <= threshold:
        return None
    return float(math.sqrt(drives[k] * drives[k + 1]))


def hysteresis_sweep(
    C: float,
    i_min: float = 10.0,
    i_max: float = 1e5,
    rate: float = DEFAULT_RAMP_RATE,
    K: float = DEFAULT_K,
    gamma_t2: float = DEFAULT_GAMMA_T2,
    points: int = 2000,
    delta: float = 0.0,
    theta: float = 0.0,
    tol: float = 1e-7,
) -> HysteresisLoop:
    """
    Ramp the drive up from i_min to i_max and back with I_in(tau) = I_start exp(+-rate tau),
    starting on the lowest branch. `rate` is the logarithmic ramp rate dln(I_in)/dtau.
    """
    if not 0 < i_min < i_max:
        raise ConfigException(f"need 0 < i_min < i_max, got {i_min}, {i_max}")
    if not rate > 0:
        raise ConfigException(f"ramp rate must be positive, got {rate}")
    if points < 2:
        raise ConfigException(f"need at least two sample points, got {points}")

    slowest = 1.0 / min(1.0, gamma_t2)
    if rate * slowest > 1e-2:
        message = f"ramp rate {rate:g} is not slow compared to the relaxation time {slowest:g} T2; traces will lag the steady states"
        log.warning(message)
        warnings.warn(message, QuasiStaticWarning)

    thresholds = bistability_thresholds(C) if delta == 0 and theta == 0 else None
    if thresholds is not None and not (i_min < thresholds.lower and thresholds.upper < i_max):
        log.warning("ramp [%g, %g] does not cover the bistable window [%g, %g]", i_min, i_max, thresholds.lower, thresholds.upper)

    fp = FlowParams(C=C, K=K, I_in=i_min, delta=delta, theta=theta, gamma_t2=gamma_t2)
    drives = np.geomspace(i_min, i_max, points)
    span = math.log(i_max / i_min)
    tau_end = span / rate
    samples = np.clip(np.log(drives / i_min) / rate, 0.0, tau_end)

    start = solve_branches(fp.point).bottom
    up = integrate(start, fp, tau_end, tol=tol, t_eval=samples, drive=lambda tau: i_min * math.exp(rate * tau))

    down_fp = fp.with_drive(i_max)
    down = integrate(up.states[-1], down_fp, tau_end, tol=tol, t_eval=samples, drive=lambda tau: i_max * math.exp(-rate * tau))

    u_up = up.intensity
    u_down = down.intensity[::-1]
    return HysteresisLoop(
        C=C,
        drives=drives,
        up=u_up,
        down=u_down,
        up_jump=jump_drive(drives, u_up),
        down_jump=jump_drive(drives, u_down),
        rate=rate,
    )
