"""
Linearized quantum fluctuations riding on the classical NLSE solution.

Each time sample ``k`` is a bosonic mode ``a_k`` (photon-number units,
``|a_k|^2`` photons in the sample). Fluctuations ``da`` evolve under the
Jacobian of every split-step operator, stored as the complex pair ``(U, V)``
with ``da_out = U da_in + V da_in^dagger``. Quadratures follow
``a = (X + iP) / 2`` so vacuum has ``Var(X) = Var(P) = 1``.

Quadratures of a :class:`SymplecticMap` or :class:`CovarianceMatrix` are
expressed in the *local* frame of each sample, rotated by the phase of the
classical field there: ``X`` is the amplitude quadrature, ``P`` the phase
quadrature. Samples with zero mean field use phase 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
import scipy.fft
from scipy.constants import c as SPEED_OF_LIGHT, h as PLANCK

from .errors import UndefinedError
from .nlse import SolverConfig, split_step
from .pulse import ComplexEnvelope, FibreSpec, TimeGrid

MAX_QUANTUM_SAMPLES = 4096
DEFAULT_WAVELENGTH_NM = 810.0


def photons_per_pj(wavelength_nm: float = DEFAULT_WAVELENGTH_NM) -> float:
    photon_energy = PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
    return 1e-12 / photon_energy


def photon_amplitudes(env: ComplexEnvelope, wavelength_nm: float = DEFAULT_WAVELENGTH_NM) -> np.ndarray:
    """Mean mode amplitudes ``a_k`` with ``|a_k|^2`` photons per time sample."""
    return env.samples * math.sqrt(env.grid.dt * photons_per_pj(wavelength_nm))


def to_frequency_modes(a: np.ndarray) -> np.ndarray:
    """Unitary DFT of time-sample modes, output aligned with ``TimeGrid.omega``.

    Works along axis 0 so it also maps matrices column by column.
    """
    n = a.shape[0]
    return np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(a, axes=0), axis=0), axes=0) * math.sqrt(n)


def to_time_modes(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_frequency_modes`."""
    n = c.shape[0]
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(c, axes=0), axis=0), axes=0) / math.sqrt(n)


def symplectic_form(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


def real_symplectic(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Real matrix acting on stacked ``(X..., P...)`` for ``da' = U da + V da^dagger``."""
    plus, minus = u + v, u - v
    return np.block([[plus.real, -minus.imag], [plus.imag, minus.real]])


def local_frame(u, v, phase_out, phase_in):
    """Re-express a lab-frame ``(U, V)`` relative to the mean-field phases."""
    rot_out = np.exp(-1j * np.asarray(phase_out))[:, None]
    rot_in = np.exp(1j * np.asarray(phase_in))[None, :]
    return rot_out * u * rot_in, rot_out * v * np.conj(rot_in)


@dataclass(frozen=True)
class SymplecticMap:
    """Linear map on quadratures, kept in complex ``(U, V)`` form.

    ``matrix`` is the equivalent real matrix ``S`` on ``(X_1..X_M, P_1..P_M)``.
    """

    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    @property
    def n_out(self) -> int:
        return self.u.shape[0]

    @property
    def n_in(self) -> int:
        return self.u.shape[1]

    @cached_property
    def matrix(self) -> np.ndarray:
        return real_symplectic(self.u, self.v)

    def symplectic_error(self) -> float:
        """``max |S Omega_in S^T - Omega_out|``."""
        s = self.matrix
        lhs = s @ symplectic_form(self.n_in) @ s.T
        return float(np.max(np.abs(lhs - symplectic_form(self.n_out))))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric quadrature covariance on ``(X_1..X_M, P_1..P_M)``."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError("covariance must be a square matrix of even size")
        object.__setattr__(self, "matrix", m)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @classmethod
    def vacuum(cls, n_modes: int) -> "CovarianceMatrix":
        return cls(np.eye(2 * n_modes))

    def mode_block(self, k: int) -> np.ndarray:
        """2x2 covariance of ``(X_k, P_k)``."""
        idx = [k, k + self.n_modes]
        return self.matrix[np.ix_(idx, idx)]

    def uncertainty_margin(self) -> float:
        """Smallest eigenvalue of ``sigma + i Omega`` (>= 0 for physical states)."""
        herm = self.matrix + 1j * symplectic_form(self.n_modes)
        return float(np.linalg.eigvalsh(herm).min())

    def quadratic_form(self, weights: np.ndarray) -> np.ndarray:
        """``W^T sigma W`` for a weight matrix with quadrature vectors in columns."""
        return weights.T @ self.matrix @ weights


@dataclass(frozen=True)
class ModeSelector:
    """Per-frequency-bin power transmissions aligned with ``TimeGrid.omega``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("selector weights must lie within [0, 1]")
        object.__setattr__(self, "weights", w)

    @classmethod
    def all_pass(cls, grid: TimeGrid) -> "ModeSelector":
        return cls(np.ones(grid.n_samples))

    def scaled(self, efficiency: float) -> "ModeSelector":
        return ModeSelector(self.weights * efficiency)


class _MapRecorder:
    """Accumulates the Jacobian of the split-step sequence.

    Holds ``[U | V]`` transposed (one input mode per row) so every transform
    runs along the contiguous axis and ``U``, ``V`` share one FFT pair.
    """

    def __init__(self, n: int):
        self.n = n
        self.rows = np.zeros((2 * n, n), dtype=complex)
        self.rows[:n] = np.eye(n)

    @property
    def u(self):
        return self.rows[: self.n].T

    @property
    def v(self):
        return self.rows[self.n:].T

    def dispersion(self, factor):
        # factor is in ifft order
        spec = scipy.fft.ifft(self.rows, axis=1, overwrite_x=False)
        spec *= factor
        self.rows = scipy.fft.fft(spec, axis=1, overwrite_x=True)

    def kerr(self, a, phase):
        rot = np.exp(1j * phase)
        mag2 = np.abs(a) ** 2
        phase2 = np.divide(a**2, mag2, out=np.zeros_like(a), where=mag2 > 0)
        ku = rot * (1.0 + 1j * phase)
        kv = rot * 1j * phase * phase2
        # U' = K_U U + K_V V*,  V' = K_U V + K_V U*
        swapped = np.conj(np.roll(self.rows, self.n, axis=0))
        self.rows = ku * self.rows + kv * swapped


def propagate_linearized(
    env: ComplexEnvelope, fibre: FibreSpec, cfg: SolverConfig = SolverConfig()
) -> Tuple[ComplexEnvelope, np.ndarray, np.ndarray]:
    """Classical output plus the lab-frame fluctuation map ``(U, V)``."""
    n = env.grid.n_samples
    if n > MAX_QUANTUM_SAMPLES:
        raise ValueError(f"fluctuation propagation is limited to {MAX_QUANTUM_SAMPLES} samples")
    if fibre.loss != 0:
        raise ValueError("fluctuation propagation supports lossless fibre only; "
                         "model loss as a detection efficiency")
    rec = _MapRecorder(n)
    out = split_step(env, fibre, cfg, kerr_hook=rec.kerr, dispersion_hook=rec.dispersion)
    return out, rec.u, rec.v


def propagate_with_noise(
    env: ComplexEnvelope, fibre: FibreSpec, cfg: SolverConfig = SolverConfig()
) -> Tuple[ComplexEnvelope, SymplecticMap]:
    """Propagate the mean field and its linearized fluctuations together.

    The classical output is bit-identical to :func:`nlse.propagate`.
    """
    out, u, v = propagate_linearized(env, fibre, cfg)
    u_loc, v_loc = local_frame(u, v, np.angle(out.samples), np.angle(env.samples))
    return out, SymplecticMap(u_loc, v_loc)


def output_covariance(smap: SymplecticMap) -> CovarianceMatrix:
    """Covariance for vacuum input fluctuations, ``sigma = S S^T``."""
    s = smap.matrix
    return CovarianceMatrix(s @ s.T)


def _number_weights(env: ComplexEnvelope, spectral_weights: np.ndarray) -> np.ndarray:
    """Quadrature weight vectors for photon-number fluctuations.

    ``spectral_weights`` has one column per observable; column ``j`` defines
    ``dN_j = sum_m c_mj (abar_m^* da_m + h.c.)`` with ``c`` real per-bin factors.
    The result has shape ``(2M, n_obs)`` in the local quadrature frame.
    """
    a = photon_amplitudes(env)
    a_freq = to_frequency_modes(a)
    c = spectral_weights * a_freq[:, None]
    d = to_time_modes(c)
    d_local = np.exp(-1j * np.angle(env.samples))[:, None] * d
    return np.vstack([d_local.real, d_local.imag])


def filtered_number_moments(env: ComplexEnvelope, cov: CovarianceMatrix, sel: ModeSelector):
    """Mean photon number and its variance for the beam after ``sel``.

    The selector acts as a beamsplitter per frequency bin; the rejected power
    is replaced by vacuum.
    """
    if cov.n_modes != env.grid.n_samples:
        raise ValueError("covariance and envelope are defined on different grids")
    w = sel.weights
    a_freq = to_frequency_modes(photon_amplitudes(env))
    occupation = np.abs(a_freq) ** 2
    mean = float(np.sum(w * occupation))
    vec = _number_weights(env, w[:, None])
    var_signal = float(cov.quadratic_form(vec)[0, 0])
    var_vacuum = float(np.sum(w * (1.0 - w) * occupation))
    return mean, var_signal + var_vacuum


def photon_number_noise(env: ComplexEnvelope, cov: CovarianceMatrix, sel: ModeSelector) -> float:
    """Fano factor ``Var(N) / <N>`` of the filtered beam; 1 is shot noise."""
    mean, var = filtered_number_moments(env, cov, sel)
    if mean <= 0:
        raise UndefinedError("the selector transmits no mean field")
    return var / mean


def to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)


def spectral_correlation_matrix(
    env: ComplexEnvelope, cov: CovarianceMatrix, bands: Sequence[Tuple[float, float]]
) -> np.ndarray:
    """Correlation coefficients of photon numbers in frequency bands.

    Bands are half-open ``[lo, hi)`` intervals in rad/ps and must not overlap.
    Rows and columns of bands without mean field are NaN.
    """
    omega = env.grid.omega
    spans = sorted(bands)
    for (lo1, hi1), (lo2, _) in zip(spans, spans[1:]):
        if lo2 < hi1:
            raise ValueError("frequency bands overlap")
    masks = np.column_stack([(omega >= lo) & (omega < hi) for lo, hi in bands]).astype(float)
    vec = _number_weights(env, masks)
    c = cov.quadratic_form(vec)
    diag = np.diag(c).copy()
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), np.nan)
    corr = c * scale[:, None] * scale[None, :]
    corr = 0.5 * (corr + corr.T)
    defined = ~np.isnan(scale)
    corr[np.ix_(defined, defined)] = np.clip(corr[np.ix_(defined, defined)], -1.0, 1.0)
    idx = np.flatnonzero(defined)
    corr[idx, idx] = 1.0
    return corr
