"""
Shot-noise limited lock: homodyne detection model, frequency-error spectrum and a
Monte-Carlo check that white frequency noise of one-sided level h0 yields a
Lorentzian line of FWHM pi h0 / 2.

Conventions:
    - h0 is the one-sided white frequency-noise level; the one-sided PSD of the
      frequency excursion is h0/2 and the two-sided PSD h0/4, so a series sampled
      at fs has per-sample variance h0 fs / 4
    - phase accumulates as phi(t) = 2 pi * integral(dnu dt'), which gives the
      structure function D(tau) = pi^2 h0 tau
"""
from __future__ import annotations

import math
import warnings

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from scipy import constants, signal
from scipy.optimize import OptimizeWarning, curve_fit

from . import ConfigException, NumericalException, log
from .metrology import budget, quantum_limited_linewidth
from .params import PhysicalSystem, derive_params

RNG_ALGORITHM = "numpy.random.Philox"
DEFAULT_SEGMENTS = 64
SAMPLES_PER_FWHM = 256
FWHMS_PER_DURATION = 2048
LO_DOMINANCE = 100.0


class LocalOscillatorWarning(UserWarning):
    """The local oscillator does not dominate the signal power"""


@dataclass(frozen=True)
class HomodyneConfig:
    signal_power: float  # W
    lo_power: float  # W
    optical_frequency: float  # Hz
    phase_slope: float  # rad/Hz
    detector_efficiency: float = 1.0
    lo_phase: float = math.pi / 2

    def __post_init__(self):
        for attr in ["signal_power", "lo_power", "optical_frequency"]:
            if not getattr(self, attr) > 0:
                raise ConfigException(f"{attr} must be positive, got {getattr(self, attr)}")
        if not 0 <= self.detector_efficiency <= 1:
            raise ConfigException(f"detector_efficiency must be in [0, 1], got {self.detector_efficiency}")
        if self.lo_power < LO_DOMINANCE * self.signal_power:
            message = f"P_LO/P_sig = {self.lo_power / self.signal_power:g} < {LO_DOMINANCE:g}; the shot noise is no longer set by the LO alone"
            log.warning(message)
            warnings.warn(message, LocalOscillatorWarning)

    @classmethod
    def from_budget(cls, sys: PhysicalSystem, beta: Union[float, None] = None, lo_power: float = 1e-3) -> HomodyneConfig:
        b = budget(sys, beta)
        return cls(
            signal_power=b.signal_power,
            lo_power=lo_power,
            optical_frequency=derive_params(sys).omega_L / (2.0 * math.pi),
            phase_slope=b.phase_slope_per_hz,
            detector_efficiency=sys.detector_efficiency,
        )

    @property
    def photon_energy(self) -> float:
        return constants.h * self.optical_frequency


def shot_noise_psd(cfg: HomodyneConfig, include_signal: bool = False) -> float:
    """Two-sided photocurrent noise PSD e^2 eta P_LO / (h nu) in A^2/Hz"""
    power = cfg.lo_power + (cfg.signal_power if include_signal else 0.0)
    return constants.e**2 * cfg.detector_efficiency * power / cfg.photon_energy


def homodyne_photocurrents(cfg: HomodyneConfig, phase: Union[float, np.ndarray] = 0.0) -> Tuple:
    """Mean photocurrents (i1, i2, i1 - i2) in A for a signal phase shift `phase`"""
    scale = constants.e * cfg.detector_efficiency / cfg.photon_energy
    dc = (cfg.signal_power + cfg.lo_power) / 2.0
    beat = np.sqrt(cfg.signal_power * cfg.lo_power) * np.cos(np.asarray(phase) - cfg.lo_phase)
    i1 = scale * (dc + beat)
    i2 = scale * (dc - beat)
    return i1, i2, i1 - i2


def frequency_error_psd(cfg: HomodyneConfig) -> float:
    """Two-sided PSD h nu / (4 eta P_sig (dphi/dnu)^2) of the lock error in Hz^2/Hz"""
    if cfg.phase_slope == 0:
        raise ConfigException("phase slope dphi/dnu is zero; the lock has no error signal")
    if cfg.detector_efficiency == 0:
        return math.inf
    return cfg.photon_energy / (4.0 * cfg.detector_efficiency * cfg.signal_power * cfg.phase_slope**2)


def white_noise_level(cfg: HomodyneConfig) -> float:
    """h0 = 4 x the two-sided error PSD"""
    return 4.0 * frequency_error_psd(cfg)


def lorentzian_fwhm(h0: float) -> float:
    return math.pi * h0 / 2.0


@dataclass(frozen=True)
class NoiseSimConfig:
    h0: float  # Hz^2/Hz, one-sided
    sample_rate: float  # Hz
    duration: float  # s
    seed: int = 0
    segments: int = DEFAULT_SEGMENTS

    def __post_init__(self):
        if not 0 <= self.seed < 2**64 or int(self.seed) != self.seed:
            raise ConfigException(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.segments < 1:
            raise ConfigException(f"segments must be at least 1, got {self.segments}")
        if not (self.sample_rate > 0 and self.duration > 0 and self.h0 >= 0):
            raise ConfigException(f"need h0 >= 0, sample_rate > 0 and duration > 0 (got {self.h0}, {self.sample_rate}, {self.duration})")
        if self.samples < 16 * self.segments:
            raise ConfigException(f"{self.samples} samples are too few for {self.segments} segments")
        problems = self.violations()
        if problems:
            raise ConfigException("unresolvable line: " + "; ".join(problems))

    def violations(self) -> List[str]:
        """The resolvability inequalities this configuration fails"""
        if self.h0 == 0:
            return []
        ret_val = []
        if not self.sample_rate > 100.0 * self.fwhm:
            ret_val.append(f"sample_rate {self.sample_rate:g} Hz must exceed 100 x FWHM = {100.0 * self.fwhm:g} Hz")
        if not self.duration * self.fwhm > 100.0:
            ret_val.append(f"duration x FWHM = {self.duration * self.fwhm:g} must exceed 100")
        return ret_val

    @classmethod
    def for_linewidth(cls, h0: float, seed: int = 0, segments: int = DEFAULT_SEGMENTS) -> NoiseSimConfig:
        """
        A configuration that resolves the line of level h0: 256 samples per FWHM and
        2048 FWHM^-1 of data. All times scale with 1/FWHM, so a fixed seed gives the
        same normalized series for every h0.
        """
        if not h0 > 0:
            raise ConfigException(f"h0 must be positive to choose a resolution, got {h0}")
        fwhm = lorentzian_fwhm(h0)
        return cls(h0=h0, sample_rate=SAMPLES_PER_FWHM * fwhm, duration=FWHMS_PER_DURATION / fwhm, seed=seed, segments=segments)

    @property
    def fwhm(self) -> float:
        return lorentzian_fwhm(self.h0)

    @property
    def samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True)
class FieldSeries:
    """Baseband field exp(i phi(t)) of the locked laser"""

    field: np.ndarray
    phase: np.ndarray
    sample_rate: float
    seed: Union[int, None] = None
    rng: str = RNG_ALGORITHM

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.field)) / self.sample_rate

    @property
    def frequency_excursion(self) -> np.ndarray:
        """dnu samples recovered from the phase increments"""
        return np.diff(self.phase, prepend=0.0) * self.sample_rate / (2.0 * math.pi)

    def rows(self) -> List[Tuple[float, float, float]]:
        """[t, re, im] rows for CSV output"""
        return [(float(t), float(e.real), float(e.imag)) for t, e in zip(self.times, self.field)]

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> FieldSeries:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != 3 or len(rows) < 2:
            raise ConfigException("a field series needs [t, re, im] columns and at least two rows")
        dt = np.diff(rows[:, 0])
        if not np.all(dt > 0) or not np.allclose(dt, dt[0], rtol=1e-6):
            raise ConfigException("field series must be uniformly sampled in time")
        values = rows[:, 1] + 1j * rows[:, 2]
        return cls(field=values, phase=np.unwrap(np.angle(values)), sample_rate=1.0 / float(dt[0]), seed=None, rng="file")


def read_series(filename: Union[str, Path]) -> FieldSeries:
    try:
        rows = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as ex:
        raise ConfigException(f"Unable to read field series {filename}: {ex}") from ex
    return FieldSeries.from_rows(rows)


def synthesize_locked_field(cfg: NoiseSimConfig) -> FieldSeries:
    """
    White Gaussian frequency noise at one-sided level h0 integrated to a phase
    random walk. One Philox stream per seed; draws are consumed in time order.
    """
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n = cfg.samples
    sigma = math.sqrt(cfg.h0 * cfg.sample_rate / 4.0)
    excursion = rng.normal(0.0, sigma, n) if sigma > 0 else np.zeros(n)
    phase = 2.0 * math.pi * np.cumsum(excursion) / cfg.sample_rate
    log.debug("synthesized %d samples at %g Hz (h0=%g, seed=%d)", n, cfg.sample_rate, cfg.h0, cfg.seed)
    return FieldSeries(field=np.exp(1j * phase), phase=phase, sample_rate=cfg.sample_rate, seed=cfg.seed)


def frequency_noise_psd(series: FieldSeries, segments: int = DEFAULT_SEGMENTS) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided PSD (Hz^2/Hz) of the frequency excursion, segment averaged"""
    nperseg = len(series.field) // segments
    return signal.welch(series.frequency_excursion, fs=series.sample_rate, window="boxcar", nperseg=nperseg, noverlap=0, detrend="constant", scaling="density")


@dataclass(frozen=True)
class LineshapeEstimate:
    fwhm: float  # Hz
    uncertainty: float  # Hz
    residual_norm: float
    center: float  # Hz, relative to the carrier
    resolution: float  # Hz, bin spacing
    segments: int
    frequencies: np.ndarray = field(repr=False)
    psd: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (self.fwhm > 0 and self.uncertainty > 0):
            raise NumericalException(f"invalid lineshape estimate: FWHM {self.fwhm}, uncertainty {self.uncertainty}")

    def rows(self) -> List[Tuple[float, float]]:
        """[f_Hz, psd] rows for CSV output"""
        return [(float(f), float(p)) for f, p in zip(self.frequencies, self.psd)]

    def summary(self, h0: Union[float, None] = None, seed: Union[int, None] = None) -> dict:
        return {
            "fwhm_hz": self.fwhm,
            "err_hz": self.uncertainty,
            "h0_hz2_per_hz": h0,
            "seed": seed,
            "rng": RNG_ALGORITHM,
            "residual_norm": self.residual_norm,
            "center_hz": self.center,
            "resolution_hz": self.resolution,
            "segments": self.segments,
        }


def _lorentzian(x, amplitude, center, width, background):
    half = width / 2.0
    return amplitude * half**2 / ((x - center) ** 2 + half**2) + background


def _half_max_width(psd: np.ndarray, peak: int) -> int:
    """Number of contiguous bins around `peak` at or above half maximum"""
    half = psd[peak] / 2.0
    lo = peak
    while lo > 0 and psd[lo - 1] >= half:
        lo -= 1
    hi = peak
    while hi < len(psd) - 1 and psd[hi + 1] >= half:
        hi += 1
    return hi - lo + 1


def estimate_lineshape(
    series: Union[FieldSeries, np.ndarray],
    sample_rate: Union[float, None] = None,
    segments: int = DEFAULT_SEGMENTS,
    fit_span: float = 10.0,
) -> LineshapeEstimate:
    """
    Averaged periodogram of the complex field (non-overlapping rectangular
    segments) and a weighted Lorentzian least-squares fit around the peak.
    """
    if isinstance(series, FieldSeries):
        values, sample_rate = series.field, series.sample_rate
    else:
        values = np.asarray(series, dtype=complex)
        if sample_rate is None:
            raise ConfigException("sample_rate is required for a raw field array")

    nperseg = len(values) // segments
    if nperseg < 16:
        raise ConfigException(f"{len(values)} samples are too few for {segments} segments")

    # no detrending: the carrier is the mean of the field
    freqs, psd = signal.welch(values, fs=sample_rate, window="boxcar", nperseg=nperseg, noverlap=0, detrend=False, return_onesided=False, scaling="density")
    freqs, psd = np.fft.fftshift(freqs), np.fft.fftshift(psd)
    df = sample_rate / nperseg

    peak = int(np.argmax(psd))
    width_guess = _half_max_width(psd, peak) * df
    reach = max(fit_span * width_guess, 8 * df)
    window = np.abs(freqs - freqs[peak]) <= reach
    f, p = freqs[window], psd[window]

    # normalized coordinates keep the optimizer well scaled
    xn = (f - freqs[peak]) / width_guess
    yn = p / psd[peak]
    floor = df / (2.0 * width_guess)
    lower = [0.0, -fit_span, floor, 0.0]
    upper = [np.inf, fit_span, 2.0 * fit_span, np.inf]
    p0 = [1.0, 0.0, 1.0, float(np.min(yn))]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        try:
            popt, _ = curve_fit(_lorentzian, xn, yn, p0=p0, bounds=(lower, upper))
            uncertainty = df
            if popt[2] > 2.0 * floor:
                sigma = _lorentzian(xn, *popt) / math.sqrt(segments)
                popt, pcov = curve_fit(_lorentzian, xn, yn, p0=popt, sigma=sigma, absolute_sigma=True, bounds=(lower, upper))
                error = math.sqrt(pcov[2, 2]) * width_guess if np.all(np.isfinite(pcov)) else math.nan
                uncertainty = error if error > 0 else df
        except (RuntimeError, ValueError) as ex:
            raise NumericalException(
                f"Lorentzian fit failed ({ex}); peak {psd[peak]:g} at {freqs[peak]:g} Hz, half-max width {width_guess:g} Hz, {len(f)} bins"
            ) from ex

    model = _lorentzian(xn, *popt)
    residual_norm = float(np.sqrt(np.mean(((yn - model) / model) ** 2)))
    log.debug("lineshape fit %s, residual norm %g", popt, residual_norm)

    return LineshapeEstimate(
        fwhm=float(popt[2] * width_guess),
        uncertainty=float(uncertainty),
        residual_norm=residual_norm,
        center=float(freqs[peak] + popt[1] * width_guess),
        resolution=df,
        segments=segments,
        frequencies=f,
        psd=p,
    )


def structure_function(series: Union[FieldSeries, np.ndarray], sample_rate: Union[float, None] = None, lags: Union[Sequence[int], None] = None) -> Tuple[np.ndarray, np.ndarray]:
    """D(tau) = <[phi(t) - phi(t + tau)]^2> at integer sample lags (default 1..32)"""
    if isinstance(series, FieldSeries):
        phase, sample_rate = series.phase, series.sample_rate
    else:
        phase = np.asarray(series, dtype=float)
        if sample_rate is None:
            raise ConfigException("sample_rate is required for a raw phase array")

    lags = np.arange(1, 33) if lags is None else np.asarray(lags, dtype=int)
    if np.any(lags < 1) or np.any(lags >= len(phase)):
        raise ConfigException(f"lags must be in [1, {len(phase) - 1}]")

    values = np.array([np.mean((phase[k:] - phase[:-k]) ** 2) for k in lags])
    return lags / sample_rate, values


def structure_function_slope(taus: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of D(tau) through the origin; pi^2 h0 for white frequency noise"""
    return float(np.sum(taus * values) / np.sum(taus**2))


@dataclass(frozen=True)
class LockSimulation:
    estimate: LineshapeEstimate
    config: NoiseSimConfig
    scale: float
    predicted_fwhm: float  # Hz, rescaled
    h0: float  # Hz^2/Hz, unscaled

    @property
    def relative_error(self) -> float:
        return abs(self.estimate.fwhm - self.predicted_fwhm) / self.predicted_fwhm


def end_to_end_lock_sim(
    sys: PhysicalSystem,
    beta: Union[float, None] = None,
    scale: float = 1e6,
    seed: int = 0,
    lo_power: float = 1e-3,
    segments: int = DEFAULT_SEGMENTS,
) -> LockSimulation:
    """
    Lock budget -> homodyne error spectrum -> synthesized field -> fitted lineshape.
    h0 is multiplied by `scale` so that the line is resolvable with a desk-sized
    record; the linewidth is linear in h0, so the prediction scales alike.
    """
    if not scale > 0:
        raise ConfigException(f"scale must be positive, got {scale}")
    homodyne = HomodyneConfig.from_budget(sys, beta, lo_power=lo_power)
    h0 = white_noise_level(homodyne)
    cfg = NoiseSimConfig.for_linewidth(h0 * scale, seed=seed, segments=segments)
    estimate = estimate_lineshape(synthesize_locked_field(cfg), segments=segments)
    return LockSimulation(
        estimate=estimate,
        config=cfg,
        scale=scale,
        predicted_fwhm=quantum_limited_linewidth(sys, beta).full * scale,
        h0=h0,
    )
