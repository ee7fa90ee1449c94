"""
Time/frequency grids, pulse constructors and classical pulse diagnostics.

Units used throughout the package: time in ps, angular frequency in rad/ps,
length in m, power in W, energy in pJ (1 W x 1 ps = 1 pJ). Field envelopes are
in sqrt(W) so that ``abs(A)**2`` is the instantaneous power.

Fourier convention: ``A(t) = int A~(w) exp(-i w t) dw / 2pi``, so positive
``w`` is the blue side of the carrier.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erfc

SECH_FWHM_FACTOR = 2.0 * math.log(1.0 + math.sqrt(2.0))  # FWHM / T0 for sech^2
GAUSS_FWHM_FACTOR = 2.0 * math.sqrt(math.log(2.0))  # FWHM / T0 for exp(-t^2/T0^2)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid centred on ``t = 0`` and its discrete frequency dual.

    ``omega`` is sorted ascending (zero frequency at index ``n_samples // 2``),
    matching the sample order of :class:`SpectralEnvelope`.
    """

    n_samples: int = 4096
    window: float = 20.0

    def __post_init__(self):
        if not isinstance(self.n_samples, (int, np.integer)) or not _is_power_of_two(int(self.n_samples)):
            raise ValueError(f"n_samples must be a power of two, got {self.n_samples}")
        if self.n_samples < 8:
            raise ValueError("n_samples must be at least 8")
        if not self.window > 0:
            raise ValueError("window must be positive")

    @property
    def dt(self) -> float:
        return self.window / self.n_samples

    @property
    def domega(self) -> float:
        return 2.0 * np.pi / self.window

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.dt

    @property
    def omega(self) -> np.ndarray:
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.domega

    @property
    def omega_fft(self) -> np.ndarray:
        """Angular frequencies in FFT (unshifted) order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_samples, d=self.dt)


@dataclass(frozen=True)
class ComplexEnvelope:
    grid: TimeGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != (self.grid.n_samples,):
            raise ValueError(
                f"expected {self.grid.n_samples} samples, got shape {samples.shape}"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    @property
    def energy(self) -> float:
        return pulse_energy(self)


@dataclass(frozen=True)
class SpectralEnvelope:
    """Frequency-domain view, samples aligned with ``grid.omega``."""

    grid: TimeGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != (self.grid.n_samples,):
            raise ValueError("spectral samples do not match the grid")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def psd(self) -> np.ndarray:
        """Energy spectral density |A~|^2 in pJ ps / rad (integrates with dw/2pi)."""
        return np.abs(self.samples) ** 2

    @property
    def energy(self) -> float:
        return float(np.sum(self.psd) * self.grid.domega / (2.0 * np.pi))

    def inverse(self) -> ComplexEnvelope:
        n = self.grid.n_samples
        shifted = np.fft.ifftshift(self.samples)
        samples = np.fft.ifftshift(np.fft.fft(shifted)) / (n * self.grid.dt)
        return ComplexEnvelope(self.grid, samples)


@dataclass(frozen=True)
class FibreSpec:
    beta2: float
    gamma: float
    length: float
    loss: float = 0.0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("fibre length must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.loss < 0:
            raise ValueError("loss must be non-negative")

    def dispersion_length(self, t0: float) -> float:
        if self.beta2 == 0:
            return math.inf
        return t0**2 / abs(self.beta2)

    def with_length(self, length: float) -> "FibreSpec":
        return FibreSpec(self.beta2, self.gamma, length, self.loss)


@dataclass(frozen=True)
class PulseSpec:
    """Pulse request. ``fwhm`` is the intensity FWHM in fs; give exactly one of
    ``energy`` (pJ) or ``peak_power`` (W)."""

    shape: str = "sech"
    fwhm: float = 130.0
    energy: Optional[float] = None
    peak_power: Optional[float] = None
    chirp: float = 0.0
    center_offset: float = 0.0

    def __post_init__(self):
        if self.shape not in ("sech", "gaussian"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if not self.fwhm > 0:
            raise ValueError("fwhm must be positive")
        if (self.energy is None) == (self.peak_power is None):
            raise ValueError("give exactly one of energy or peak_power")
        level = self.energy if self.energy is not None else self.peak_power
        if level < 0:
            raise ValueError("energy/peak_power must be non-negative")

    @property
    def t0(self) -> float:
        """Natural width parameter in ps."""
        factor = SECH_FWHM_FACTOR if self.shape == "sech" else GAUSS_FWHM_FACTOR
        return self.fwhm * 1e-3 / factor

    def analytic_peak_power(self) -> float:
        if self.peak_power is not None:
            return self.peak_power
        if self.shape == "sech":
            return self.energy / (2.0 * self.t0)
        return self.energy / (math.sqrt(math.pi) * self.t0)

    def with_energy(self, energy: float) -> "PulseSpec":
        return PulseSpec(self.shape, self.fwhm, energy, None, self.chirp, self.center_offset)


def sech_t0(fwhm_fs: float) -> float:
    """T0 in ps of a sech pulse with the given intensity FWHM in fs."""
    return fwhm_fs * 1e-3 / SECH_FWHM_FACTOR


def _clipped_fraction(spec: PulseSpec, grid: TimeGrid) -> float:
    # Analytic energy outside [t_min, t_max + dt) for the unchirped profile.
    t0 = spec.t0
    lo = (grid.t[0] - 0.5 * grid.dt - spec.center_offset) / t0
    hi = (grid.t[-1] + 0.5 * grid.dt - spec.center_offset) / t0
    if spec.shape == "sech":
        # int sech^2 = tanh, total 2
        return float((1.0 + np.tanh(lo)) / 2.0 + (1.0 - np.tanh(hi)) / 2.0)
    # Intensity exp(-x^2)
    return float(erfc(-lo) / 2.0 + erfc(hi) / 2.0)


def make_pulse(spec: PulseSpec, grid: TimeGrid) -> ComplexEnvelope:
    """Sample ``spec`` on ``grid``.

    Energy requests are matched against the discrete energy ``sum |A|^2 dt``;
    peak-power requests set the analytic peak amplitude.
    """
    level = spec.energy if spec.energy is not None else spec.peak_power
    if level == 0:
        return ComplexEnvelope(grid, np.zeros(grid.n_samples, dtype=complex))
    if grid.window < 20.0 * spec.fwhm * 1e-3:
        warnings.warn(
            f"window {grid.window} ps is shorter than 20 x FWHM", RuntimeWarning, stacklevel=2
        )
    clipped = _clipped_fraction(spec, grid)
    if clipped > 1e-9:
        raise ValueError(
            f"window too small: {clipped:.3g} of the pulse energy falls outside the grid"
        )

    x = (grid.t - spec.center_offset) / spec.t0
    if spec.shape == "sech":
        profile = 1.0 / np.cosh(x)
    else:
        profile = np.exp(-0.5 * x**2)
    profile = profile * np.exp(-0.5j * spec.chirp * x**2)

    if spec.energy is not None:
        scale = math.sqrt(spec.energy / (np.sum(np.abs(profile) ** 2) * grid.dt))
    else:
        scale = math.sqrt(spec.peak_power)
    return ComplexEnvelope(grid, scale * profile)


def spectrum(env: ComplexEnvelope) -> SpectralEnvelope:
    """Fourier transform normalised so that Parseval reads
    ``sum |A|^2 dt == sum |A~|^2 dw / 2pi``."""
    n = env.grid.n_samples
    shifted = np.fft.ifftshift(env.samples)
    samples = np.fft.fftshift(np.fft.ifft(shifted)) * (n * env.grid.dt)
    return SpectralEnvelope(env.grid, samples)


def pulse_energy(env: ComplexEnvelope) -> float:
    """Energy in pJ."""
    return float(np.sum(np.abs(env.samples) ** 2) * env.grid.dt)


def autocorrelation(env: ComplexEnvelope):
    """Intensity autocorrelation ``G(tau) = sum_t P(t) P(t - tau)``.

    Returns ``(delay, trace)`` with delays ``-(n-1)dt .. (n-1)dt``. The negative
    half is mirrored from the positive half so the trace is exactly symmetric.
    """
    p = env.power
    n = p.size
    full = np.correlate(p, p, mode="full")
    positive = full[n - 1:].copy()
    positive[0] = np.sum(p * p)
    trace = np.concatenate([positive[:0:-1], positive])
    delay = (np.arange(2 * n - 1) - (n - 1)) * env.grid.dt
    return delay, trace


def fwhm(x: np.ndarray, trace: np.ndarray) -> Optional[float]:
    """Full width at half maximum by linear interpolation; ``None`` for a
    trace without a positive maximum."""
    trace = np.asarray(trace, dtype=float)
    x = np.asarray(x, dtype=float)
    peak = trace.max() if trace.size else 0.0
    if not peak > 0:
        return None
    half = 0.5 * peak
    above = np.nonzero(trace >= half)[0]
    i, j = above[0], above[-1]

    def crossing(a, b):
        # interpolate between samples a (below) and b (above)
        return x[a] + (half - trace[a]) * (x[b] - x[a]) / (trace[b] - trace[a])

    left = x[0] if i == 0 else crossing(i - 1, i)
    right = x[-1] if j == trace.size - 1 else crossing(j + 1, j)
    return float(right - left)


def rms_width(x: np.ndarray, weight: np.ndarray) -> float:
    """Root-mean-square width of a non-negative distribution."""
    weight = np.asarray(weight, dtype=float)
    total = weight.sum()
    if not total > 0:
        raise ValueError("rms width of an empty distribution")
    mean = np.sum(x * weight) / total
    return float(np.sqrt(np.sum((x - mean) ** 2 * weight) / total))
