"""
Two-mode Gaussian states built from two squeezed beams: beamsplitter
interference, Duan inseparability, EPR-style conditional variances and
linearized Stokes-parameter fluctuations.

Quadrature ordering for two modes is ``(X_A, P_A, X_B, P_B)``; vacuum has unit
variance, so the Duan bound for separable states is 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UndefinedError
from .nolm import SingleModeState

DUAN_SEPARABLE_BOUND = 4.0
# Values this close to the bound are rounding noise, not inseparability.
DUAN_MARGIN = 1e-9

OMEGA_2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA_4 = np.kron(np.eye(2), OMEGA_2)


def uncertainty_margin(cov: np.ndarray) -> float:
    """Smallest eigenvalue of ``cov + i Omega`` for interleaved (X, P) ordering."""
    n = cov.shape[0] // 2
    omega = np.kron(np.eye(n), OMEGA_2)
    return float(np.linalg.eigvalsh(cov + 1j * omega).min())


@dataclass(frozen=True)
class TwoModeState:
    alpha_a: complex
    alpha_b: complex
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (4, 4):
            raise ValueError("two-mode covariance must be 4x4")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def product(cls, a: SingleModeState, b: SingleModeState) -> "TwoModeState":
        cov = np.zeros((4, 4))
        cov[:2, :2] = a.cov
        cov[2:, 2:] = b.cov
        return cls(a.alpha, b.alpha, cov)

    def mode(self, which: str) -> SingleModeState:
        if which == "A":
            return SingleModeState(self.alpha_a, self.cov[:2, :2])
        if which == "B":
            return SingleModeState(self.alpha_b, self.cov[2:, 2:])
        raise ValueError("mode must be 'A' or 'B'")

    def swapped(self) -> "TwoModeState":
        order = [2, 3, 0, 1]
        return TwoModeState(self.alpha_b, self.alpha_a, self.cov[np.ix_(order, order)])

    def variance(self, coefficients) -> float:
        """Variance of the linear combination ``c . (X_A, P_A, X_B, P_B)``."""
        c = np.asarray(coefficients, dtype=float)
        return float(c @ self.cov @ c)

    @property
    def mean_photons(self) -> float:
        return abs(self.alpha_a) ** 2 + abs(self.alpha_b) ** 2


def _rotation(theta: float) -> np.ndarray:
    # a -> a exp(i theta)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def beamsplitter_matrix(theta: float = math.pi / 2) -> np.ndarray:
    """Symplectic matrix of ``b -> b e^{i theta}`` followed by a 50:50 splitter
    ``A = (a + b)/sqrt2, B = (a - b)/sqrt2``."""
    eye = np.eye(2)
    phase = np.zeros((4, 4))
    phase[:2, :2] = eye
    phase[2:, 2:] = _rotation(theta)
    mix = np.block([[eye, eye], [eye, -eye]]) / math.sqrt(2.0)
    return mix @ phase


def combine_on_beamsplitter(
    a: SingleModeState, b: SingleModeState, theta: float = math.pi / 2
) -> TwoModeState:
    """Interfere two single-mode states on a 50:50 beamsplitter.

    With ``theta = pi/2`` two amplitude-squeezed inputs leave as amplitude
    anti-correlated, phase correlated outputs.
    """
    s = beamsplitter_matrix(theta)
    prod = TwoModeState.product(a, b)
    rotated_b = b.alpha * complex(math.cos(theta), math.sin(theta))
    alpha_a = (a.alpha + rotated_b) / math.sqrt(2.0)
    alpha_b = (a.alpha - rotated_b) / math.sqrt(2.0)
    return TwoModeState(alpha_a, alpha_b, s @ prod.cov @ s.T)


def separate_on_beamsplitter(state: TwoModeState, theta: float = math.pi / 2):
    """Inverse of :func:`combine_on_beamsplitter`."""
    s_inv = np.linalg.inv(beamsplitter_matrix(theta))
    cov = s_inv @ state.cov @ s_inv.T
    a = (state.alpha_a + state.alpha_b) / math.sqrt(2.0)
    rotated_b = (state.alpha_a - state.alpha_b) / math.sqrt(2.0)
    b = rotated_b * complex(math.cos(theta), -math.sin(theta))
    return SingleModeState(a, cov[:2, :2]), SingleModeState(b, cov[2:, 2:])


def apply_loss(state: TwoModeState, transmittance: float, mode: str = "B",
               excess_noise: float = 0.0) -> TwoModeState:
    """Pass one mode through a beamsplitter with vacuum, then add excess noise."""
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    if excess_noise < 0:
        raise ValueError("excess noise must be non-negative")
    idx = slice(2, 4) if mode == "B" else slice(0, 2)
    other = slice(0, 2) if mode == "B" else slice(2, 4)
    cov = state.cov.copy()
    root = math.sqrt(transmittance)
    cov[idx, idx] = transmittance * cov[idx, idx] + (1.0 - transmittance + excess_noise) * np.eye(2)
    cov[idx, other] *= root
    cov[other, idx] *= root
    alpha_a, alpha_b = state.alpha_a, state.alpha_b
    if mode == "B":
        alpha_b = alpha_b * root
    else:
        alpha_a = alpha_a * root
    return TwoModeState(alpha_a, alpha_b, cov)


@dataclass(frozen=True)
class DuanResult:
    value: float
    separable_excluded: bool


def duan_criterion(state: TwoModeState) -> DuanResult:
    """``min`` over sign choices of ``Var(X_A +- X_B) + Var(P_A -+ P_B)``."""
    plus = state.variance([1, 0, 1, 0]) + state.variance([0, 1, 0, -1])
    minus = state.variance([1, 0, -1, 0]) + state.variance([0, 1, 0, 1])
    value = min(plus, minus)
    return DuanResult(value, value < DUAN_SEPARABLE_BOUND - DUAN_MARGIN)


@dataclass(frozen=True)
class QuadratureCorrelations:
    corr_xx: float
    corr_pp: float
    cond_var_x: float
    cond_var_p: float

    @property
    def epr_product(self) -> float:
        return self.cond_var_x * self.cond_var_p


def conditional_variance(cov: np.ndarray, target: int, given: int) -> float:
    var_given = cov[given, given]
    if var_given <= 0:
        raise UndefinedError("conditioning on a quadrature with zero variance")
    return float(cov[target, target] - cov[target, given] ** 2 / var_given)


def _corr(cov, i, j):
    denom = math.sqrt(cov[i, i] * cov[j, j])
    return float(cov[i, j] / denom) if denom > 0 else 0.0


def quadrature_correlations(state: TwoModeState) -> QuadratureCorrelations:
    """Correlation coefficients and Gaussian conditional variances
    ``V(X_B | X_A)``, ``V(P_B | P_A)``."""
    cov = state.cov
    return QuadratureCorrelations(
        corr_xx=_corr(cov, 0, 2),
        corr_pp=_corr(cov, 1, 3),
        cond_var_x=conditional_variance(cov, 2, 0),
        cond_var_p=conditional_variance(cov, 3, 1),
    )


# Stokes parameters --------------------------------------------------------

def _number_gradient(alpha):
    # dn = 2 Re(alpha^* da) = Re(alpha) X + Im(alpha) P
    return np.array([alpha.real, alpha.imag])


def _stokes_gradients(alpha_x: complex, alpha_y: complex) -> np.ndarray:
    """Rows: gradients of S0..S3 with respect to (X_x, P_x, X_y, P_y)."""
    ax, ay = complex(alpha_x), complex(alpha_y)
    nx = _number_gradient(ax)
    ny = _number_gradient(ay)
    # S2 = 2 Re(a_x^* a_y): d = 2Re(a_y^* da_x) + 2Re(a_x^* da_y)
    s2 = np.concatenate([_number_gradient(ay), _number_gradient(ax)])
    # S3 = 2 Im(a_x^* a_y): d = 2Im(a_x^* da_y) - 2Im(a_y^* da_x)
    # with 2 Im(c^* da) = Re(c) P - Im(c) X
    s3 = np.array([ay.imag, -ay.real, -ax.imag, ax.real])
    return np.vstack([
        np.concatenate([nx, ny]),
        np.concatenate([nx, -ny]),
        s2,
        s3,
    ])


def stokes_means(alpha_x: complex, alpha_y: complex) -> np.ndarray:
    ax, ay = complex(alpha_x), complex(alpha_y)
    cross = np.conj(ax) * ay
    return np.array([
        abs(ax) ** 2 + abs(ay) ** 2,
        abs(ax) ** 2 - abs(ay) ** 2,
        2.0 * cross.real,
        2.0 * cross.imag,
    ])


@dataclass(frozen=True)
class StokesRecord:
    """Mean Stokes vectors and fluctuation variances per beam (rows), plus
    correlation coefficients ``corr(S_i^1, S_i^2)`` when two beams are given."""

    means: np.ndarray
    variances: np.ndarray
    correlations: Optional[np.ndarray] = None


def stokes_covariance(mode_x: SingleModeState, mode_y: SingleModeState,
                      cross: Optional[np.ndarray] = None) -> StokesRecord:
    """Linearized Stokes statistics of one beam with polarization modes x, y.

    ``cross`` is the optional 2x2 covariance between the x and y quadratures.
    Only photon-number-like observables enter, so no local oscillator is
    involved.
    """
    if mode_x.alpha == 0 and mode_y.alpha == 0:
        raise UndefinedError("Stokes linearization needs a bright mean field")
    cov = np.zeros((4, 4))
    cov[:2, :2] = mode_x.cov
    cov[2:, 2:] = mode_y.cov
    if cross is not None:
        cov[:2, 2:] = cross
        cov[2:, :2] = np.asarray(cross).T
    grads = _stokes_gradients(mode_x.alpha, mode_y.alpha)
    stokes_cov = grads @ cov @ grads.T
    return StokesRecord(
        means=stokes_means(mode_x.alpha, mode_y.alpha)[None, :],
        variances=np.diag(stokes_cov)[1:][None, :],
    )


def polarization_pair(pair: TwoModeState, reference_amplitude: float) -> StokesRecord:
    """Stokes correlations of two beams whose x modes are the entangled pair
    and whose y modes are bright coherent references of equal amplitude.

    The reference phase is chosen so ``S2`` carries the amplitude quadrature of
    each x mode.
    """
    if reference_amplitude <= 0:
        raise UndefinedError("reference amplitude must be positive")
    alphas_x = [pair.alpha_a, pair.alpha_b]
    means, grads = [], []
    for ax in alphas_x:
        ay = reference_amplitude * np.exp(1j * np.angle(ax)) if ax != 0 else reference_amplitude
        means.append(stokes_means(ax, ay))
        grads.append(_stokes_gradients(ax, ay))
    # joint covariance over (X_A, P_A, X_yA, P_yA, X_B, P_B, X_yB, P_yB)
    cov = np.eye(8)
    idx_x = [[0, 1], [4, 5]]
    for i in range(2):
        for j in range(2):
            cov[np.ix_(idx_x[i], idx_x[j])] = pair.cov[2 * i: 2 * i + 2, 2 * j: 2 * j + 2]
    big = np.zeros((8, 8))
    big[:4, :4] = grads[0]
    big[4:, 4:] = grads[1]
    stokes_cov = big @ cov @ big.T
    var1 = np.diag(stokes_cov)[1:4]
    var2 = np.diag(stokes_cov)[5:8]
    cross = np.array([stokes_cov[i, i + 4] for i in range(1, 4)])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(var1 * var2 > 0, cross / np.sqrt(var1 * var2), 0.0)
    return StokesRecord(np.vstack(means), np.vstack([var1, var2]), corr)
