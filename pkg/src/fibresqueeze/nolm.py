"""
Asymmetric nonlinear optical loop mirror (fibre Sagnac interferometer).

The input pulse is split on a lossless coupler into a bright arm (power
fraction ``split_ratio``) and a dark arm; the vacuum entering the unused coupler
port is carried as a second set of input modes. Both arms traverse the loop
fibre independently and recombine on the same coupler. With coupler matrix
``[[sqrt(r), i sqrt(1-r)], [i sqrt(1-r), sqrt(r)]]`` the bright output is

    out = sqrt(r) a' + i sqrt(1-r) b'

which reduces to single-pass propagation as ``r -> 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import UndefinedError
from .nlse import SolverConfig
from .pulse import ComplexEnvelope, FibreSpec, PulseSpec, TimeGrid, make_pulse
from .quantum import (
    CovarianceMatrix,
    ModeSelector,
    SymplecticMap,
    local_frame,
    photon_amplitudes,
    photon_number_noise,
    propagate_linearized,
    to_db,
)


@dataclass(frozen=True)
class NolmSpec:
    fibre: FibreSpec
    pulse: PulseSpec
    split_ratio: float = 0.9

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie strictly between 0 and 1")
        if self.split_ratio == 0.5:
            warnings.warn("split_ratio 0.5 makes the loop symmetric", RuntimeWarning, stacklevel=2)

    @property
    def symmetric(self) -> bool:
        return self.split_ratio == 0.5


@dataclass(frozen=True)
class SingleModeState:
    """One bosonic mode: complex mean ``alpha`` (sqrt photons) and 2x2
    quadrature covariance ``cov`` on ``(X, P)``."""

    alpha: complex
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError("single-mode covariance must be 2x2")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def coherent(cls, alpha: complex = 0.0) -> "SingleModeState":
        return cls(alpha, np.eye(2))

    @classmethod
    def squeezed(cls, variance: float, alpha: complex = 0.0) -> "SingleModeState":
        """Pure amplitude-squeezed state with ``Var(X) = variance``."""
        return cls(alpha, np.diag([variance, 1.0 / variance]))

    @property
    def mean_photons(self) -> float:
        return abs(self.alpha) ** 2


@dataclass(frozen=True)
class NolmPorts:
    """Both coupler outputs with their joint fluctuation map.

    ``smap`` maps the 2M input modes (signal, then vacuum port) onto the 2M
    output modes (bright, then dark), in the local frame of each output.
    """

    bright: ComplexEnvelope
    dark: ComplexEnvelope
    smap: SymplecticMap

    @property
    def n_samples(self) -> int:
        return self.bright.grid.n_samples

    def joint_covariance(self) -> CovarianceMatrix:
        s = self.smap.matrix
        return CovarianceMatrix(s @ s.T)

    def bright_covariance(self) -> CovarianceMatrix:
        m = self.n_samples
        rows = np.r_[0:m, 2 * m: 3 * m]
        s = self.smap.matrix[rows]
        return CovarianceMatrix(s @ s.T)


def nolm_ports(spec: NolmSpec, grid: TimeGrid, cfg: SolverConfig = SolverConfig()) -> NolmPorts:
    env = make_pulse(spec.pulse, grid)
    r = spec.split_ratio
    t_amp, x_amp = math.sqrt(r), 1j * math.sqrt(1.0 - r)
    arm_a = ComplexEnvelope(grid, t_amp * env.samples)
    arm_b = ComplexEnvelope(grid, x_amp * env.samples)
    out_a, ua, va = propagate_linearized(arm_a, spec.fibre, cfg)
    out_b, ub, vb = propagate_linearized(arm_b, spec.fibre, cfg)

    bright = ComplexEnvelope(grid, t_amp * out_a.samples + x_amp * out_b.samples)
    dark = ComplexEnvelope(grid, x_amp * out_a.samples + t_amp * out_b.samples)

    # inputs (signal, vacuum) -> arm fluctuations
    m = grid.n_samples
    eye = np.eye(m)
    ca = np.hstack([t_amp * eye, x_amp * eye])
    cb = np.hstack([x_amp * eye, t_amp * eye])
    arm_u = [ua @ ca, ub @ cb]
    arm_v = [va @ np.conj(ca), vb @ np.conj(cb)]
    u = np.vstack([
        t_amp * arm_u[0] + x_amp * arm_u[1],
        x_amp * arm_u[0] + t_amp * arm_u[1],
    ])
    v = np.vstack([
        t_amp * arm_v[0] + x_amp * arm_v[1],
        x_amp * arm_v[0] + t_amp * arm_v[1],
    ])
    phase_out = np.concatenate([np.angle(bright.samples), np.angle(dark.samples)])
    u_loc, v_loc = local_frame(u, v, phase_out, np.zeros(2 * m))
    return NolmPorts(bright, dark, SymplecticMap(u_loc, v_loc))


def nolm_output(
    spec: NolmSpec, grid: TimeGrid, cfg: SolverConfig = SolverConfig()
) -> Tuple[ComplexEnvelope, CovarianceMatrix]:
    """Mean field and covariance of the bright output port."""
    ports = nolm_ports(spec, grid, cfg)
    return ports.bright, ports.bright_covariance()


def nolm_energy_scan(
    spec: NolmSpec,
    energies: Sequence[float],
    grid: TimeGrid,
    cfg: SolverConfig = SolverConfig(),
) -> List[Tuple[float, float]]:
    """Direct-detection noise ratio (dB) of the bright port per input energy."""
    if len(energies) < 4:
        raise ValueError("an energy scan needs at least 4 energies")
    rows = []
    for energy in energies:
        point = NolmSpec(spec.fibre, spec.pulse.with_energy(energy), spec.split_ratio)
        out, cov = nolm_output(point, grid, cfg)
        ratio = photon_number_noise(out, cov, ModeSelector.all_pass(grid))
        rows.append((float(energy), to_db(ratio)))
    return rows


def effective_single_mode(env: ComplexEnvelope, cov: CovarianceMatrix) -> SingleModeState:
    """Project the fluctuations onto the normalised mean-field mode.

    The returned mean is real and positive, so ``X`` is the amplitude
    quadrature of the pulse as a whole.
    """
    a = photon_amplitudes(env)
    norm = float(np.linalg.norm(a))
    if norm == 0:
        raise UndefinedError("effective mode is undefined for a zero mean field")
    # Mode function in the local frame of each sample: f_k = |a_k| / |a|
    f = np.abs(a) / norm
    zero = np.zeros_like(f)
    amp = np.concatenate([f, zero])
    phs = np.concatenate([zero, f])
    weights = np.column_stack([amp, phs])
    return SingleModeState(complex(norm), cov.quadratic_form(weights))
