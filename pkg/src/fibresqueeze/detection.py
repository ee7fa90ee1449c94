"""
Measurement chain for spectral-filtering squeezing: knife-edge high-pass
filter, 50:50 balanced detection with electronic-noise correction, shot-noise
calibration by attenuation, and cutoff scans.

Variances are photon-number variances per pulse. The difference current of a
balanced pair is shot-noise limited for any input, so it serves as the shot
noise reference.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import UndefinedError
from .pulse import ComplexEnvelope, TimeGrid
from .quantum import (
    DEFAULT_WAVELENGTH_NM,
    CovarianceMatrix,
    ModeSelector,
    filtered_number_moments,
    photons_per_pj,
    to_db,
)

DEFAULT_REPETITION_RATE = 82e6


@dataclass(frozen=True)
class FilterSpec:
    """Ideal knife edge passing ``omega >= cutoff`` (rad/ps from the carrier)."""

    cutoff: float


def knife_edge(grid: TimeGrid, cutoff: float) -> ModeSelector:
    """High-pass selector: weight 1 for bins with ``omega >= cutoff``."""
    return ModeSelector((grid.omega >= cutoff).astype(float))


@dataclass(frozen=True)
class DetectionRecord:
    sum_variance: float
    difference_variance: float
    mean_photons: float
    mean_power_mw: float
    electronic_noise: float
    corrected: bool = True
    clamped: bool = False

    @property
    def ratio(self) -> float:
        return self.sum_variance / self.difference_variance

    @property
    def ratio_db(self) -> float:
        return to_db(self.ratio)


def balanced_detection(
    env: ComplexEnvelope,
    cov: CovarianceMatrix,
    sel: ModeSelector,
    efficiency: float = 1.0,
    electronic_noise: float = 0.0,
    correct: bool = True,
    repetition_rate: float = DEFAULT_REPETITION_RATE,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
) -> DetectionRecord:
    """Sum and difference photocurrent variances of the filtered beam.

    Detector efficiency is a beamsplitter with vacuum in front of the diodes.
    With ``correct=True`` the electronic noise is subtracted from both
    variances; negative results are clamped to zero with a warning.
    """
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("detector efficiency must lie in (0, 1]")
    if electronic_noise < 0:
        raise ValueError("electronic noise must be non-negative")
    mean, var = filtered_number_moments(env, cov, sel.scaled(efficiency))
    if mean <= 0:
        raise UndefinedError("no power reaches the detectors")
    sum_var = var + electronic_noise
    diff_var = mean + electronic_noise
    clamped = False
    if correct:
        sum_var -= electronic_noise
        diff_var -= electronic_noise
        if sum_var < 0 or diff_var < 0:
            warnings.warn("corrected variance below zero, clamped", RuntimeWarning, stacklevel=2)
            sum_var, diff_var = max(sum_var, 0.0), max(diff_var, 0.0)
            clamped = True
    energy_pj = mean / photons_per_pj(wavelength_nm)
    power_mw = energy_pj * 1e-12 * repetition_rate * 1e3
    return DetectionRecord(sum_var, diff_var, mean, power_mw, electronic_noise, correct, clamped)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def shot_noise_calibration(
    env: ComplexEnvelope,
    cov: CovarianceMatrix,
    attenuations: Sequence[float],
    sel: Optional[ModeSelector] = None,
    electronic_noise: float = 0.0,
) -> LinearFit:
    """Fit the uncorrected difference variance against detected mean power (mW)
    over neutral-density attenuations."""
    if len(attenuations) < 3:
        raise ValueError("calibration needs at least 3 attenuation points")
    if any(not 0.0 < a <= 1.0 for a in attenuations):
        raise ValueError("attenuations must lie in (0, 1]")
    sel = ModeSelector.all_pass(env.grid) if sel is None else sel
    powers, variances = [], []
    for a in attenuations:
        rec = balanced_detection(env, cov, sel, efficiency=a,
                                 electronic_noise=electronic_noise, correct=False)
        powers.append(rec.mean_power_mw)
        variances.append(rec.difference_variance)
    return exact_linear_fit(powers, variances)


def exact_linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares evaluated in rational arithmetic.

    The calibration data sit near 1e7-1e8 photons, where a floating-point fit
    leaves an intercept of one ulp (~1e-8) even for exactly proportional data.
    """
    xs = [Fraction(float(v)) for v in x]
    ys = [Fraction(float(v)) for v in y]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    if sxx == 0:
        raise ValueError("calibration powers must not all be equal")
    slope = sxy / sxx
    intercept = my - slope * mx
    r_squared = sxy * sxy / (sxx * syy) if syy else Fraction(1)
    return LinearFit(float(slope), float(intercept), float(r_squared))


@dataclass(frozen=True)
class SqueezingCurve:
    cutoffs: np.ndarray = field(repr=False)
    ratio_db: np.ndarray = field(repr=False)
    mean_power_mw: np.ndarray = field(repr=False)
    energy_pj: Optional[float] = None

    @property
    def minimum(self) -> Tuple[float, float]:
        """``(cutoff, ratio_db)`` of the deepest point."""
        i = int(np.nanargmin(self.ratio_db))
        return float(self.cutoffs[i]), float(self.ratio_db[i])

    def windows(self, level_db: float = 0.0) -> List[Tuple[float, float]]:
        """Contiguous cutoff ranges with ``ratio_db < level_db``."""
        below = np.nan_to_num(self.ratio_db, nan=np.inf) < level_db
        out, start = [], None
        for i, flag in enumerate(below):
            if flag and start is None:
                start = i
            if not flag and start is not None:
                out.append((float(self.cutoffs[start]), float(self.cutoffs[i - 1])))
                start = None
        if start is not None:
            out.append((float(self.cutoffs[start]), float(self.cutoffs[-1])))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cutoff_rad_per_ps", "ratio_db", "mean_power_mw"])
        for row in zip(self.cutoffs, self.ratio_db, self.mean_power_mw):
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def squeezing_scan(
    env: ComplexEnvelope,
    cov: CovarianceMatrix,
    cutoffs: Sequence[float],
    efficiency: float = 1.0,
    electronic_noise: float = 0.0,
    energy_pj: Optional[float] = None,
) -> SqueezingCurve:
    """Corrected sum/difference noise ratio versus knife-edge cutoff.

    Cutoffs that block all mean power give NaN entries.
    """
    if len(cutoffs) < 8:
        raise ValueError("a scan needs at least 8 cutoffs")
    cutoffs = np.sort(np.asarray(cutoffs, dtype=float))
    ratios = np.full(cutoffs.size, np.nan)
    powers = np.zeros(cutoffs.size)
    for i, cut in enumerate(cutoffs):
        try:
            rec = balanced_detection(env, cov, knife_edge(env.grid, cut),
                                     efficiency=efficiency, electronic_noise=electronic_noise)
        except UndefinedError:
            continue
        ratios[i] = rec.ratio_db
        powers[i] = rec.mean_power_mw
    return SqueezingCurve(cutoffs, ratios, powers, energy_pj)


def default_cutoffs(grid: TimeGrid) -> np.ndarray:
    """One cutoff per frequency bin, starting at the all-pass edge."""
    return grid.omega.copy()
