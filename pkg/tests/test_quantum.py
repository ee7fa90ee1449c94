import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibresqueeze.errors import UndefinedError
from fibresqueeze.nlse import SolverConfig, calibrated_fibre, propagate
from fibresqueeze.pulse import ComplexEnvelope, FibreSpec, PulseSpec, TimeGrid, make_pulse
from fibresqueeze.quantum import (
    CovarianceMatrix,
    ModeSelector,
    SymplecticMap,
    filtered_number_moments,
    output_covariance,
    photon_amplitudes,
    photon_number_noise,
    propagate_linearized,
    propagate_with_noise,
    spectral_correlation_matrix,
    to_frequency_modes,
    to_time_modes,
)

# Coarse grid for cheap maps: 300 fs pulses up to ~5 pJ stay clear of the edge bins.
SMALL = TimeGrid(64, 6.0)
WIDE = 300.0
FIXED_STEPS = SolverConfig(max_nonlinear_phase_per_step=0.1, max_step=2e-3)


def single_sample_envelope(grid, power, phase=0.0, k=None):
    samples = np.zeros(grid.n_samples, complex)
    samples[grid.n_samples // 2 if k is None else k] = math.sqrt(power) * np.exp(1j * phase)
    return ComplexEnvelope(grid, samples)


def shear_oracle(phi):
    return np.array([[1.0, 2 * phi], [2 * phi, 1 + 4 * phi**2]])


def test_zero_length_map_is_identity():
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=4.0), SMALL)
    out, smap = propagate_with_noise(env, calibrated_fibre(length=0.0))
    assert np.array_equal(out.samples, env.samples)
    assert np.allclose(smap.matrix, np.eye(2 * SMALL.n_samples), atol=1e-15)


def test_identity_map_gives_vacuum_covariance():
    n = 8
    cov = output_covariance(SymplecticMap(np.eye(n, dtype=complex), np.zeros((n, n), complex)))
    assert np.array_equal(cov.matrix, np.eye(2 * n))


@pytest.mark.parametrize("phi", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("mean_phase", [0.0, 1.1])
def test_single_sample_kerr_shear(phi, mean_phase):
    gamma, length = 0.04, 1.0
    fibre = FibreSpec(beta2=0.0, gamma=gamma, length=length)
    env = single_sample_envelope(SMALL, phi / (gamma * length), mean_phase)
    _, smap = propagate_with_noise(env, fibre, SolverConfig(max_nonlinear_phase_per_step=0.1))
    k = SMALL.n_samples // 2
    block = smap.matrix[np.ix_([k, k + SMALL.n_samples], [k, k + SMALL.n_samples])]
    assert np.allclose(block, [[1.0, 0.0], [2 * phi, 1.0]], atol=1e-8)
    cov = output_covariance(smap)
    assert np.allclose(cov.mode_block(k), shear_oracle(phi), atol=1e-8)
    # dark samples stay in vacuum
    assert np.allclose(cov.mode_block(0), np.eye(2), atol=1e-12)


def test_classical_output_matches_plain_propagation():
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=5.0), SMALL)
    fibre = calibrated_fibre(length=1.0)
    out, _ = propagate_with_noise(env, fibre)
    assert np.array_equal(out.samples, propagate(env, fibre).samples)


def test_lab_frame_map_matches_finite_differences():
    grid = SMALL
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=4.0), grid)
    fibre = calibrated_fibre(length=0.3)
    _, u, v = propagate_linearized(env, fibre, FIXED_STEPS)
    eps = 1e-6 * np.max(np.abs(env.samples))

    def response(delta):
        plus = propagate(ComplexEnvelope(grid, env.samples + delta), fibre, FIXED_STEPS).samples
        minus = propagate(ComplexEnvelope(grid, env.samples - delta), fibre, FIXED_STEPS).samples
        return (plus - minus) / 2

    for j in [20, 30, 32, 40]:
        e = np.zeros(grid.n_samples, complex)
        e[j] = eps
        d_re, d_im = response(e), response(1j * e)
        u_fd = (d_re - 1j * d_im) / (2 * eps)
        v_fd = (d_re + 1j * d_im) / (2 * eps)
        assert np.allclose(u[:, j], u_fd, atol=1e-6)
        assert np.allclose(v[:, j], v_fd, atol=1e-6)


def test_fig3_map_is_symplectic_and_physical(fig3_state):
    _, cov, smap = fig3_state
    assert smap.symplectic_error() < 1e-8
    assert cov.uncertainty_margin() >= -1e-8
    assert np.allclose(cov.matrix, cov.matrix.T, atol=0)
    dets = [np.linalg.det(cov.mode_block(k)) for k in range(cov.n_modes)]
    assert min(dets) >= 1 - 1e-8


@settings(max_examples=12, deadline=None)
@given(
    energy=st.floats(0.2, 5.0),
    length=st.floats(0.0, 1.0),
    chirp=st.floats(-0.5, 0.5),
    beta2=st.sampled_from([-0.0133, 0.0, 0.01]),
)
def test_maps_are_symplectic_over_parameter_matrix(energy, length, chirp, beta2):
    grid = TimeGrid(128, 8.0)
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=energy, chirp=chirp), grid)
    fibre = FibreSpec(beta2, 0.04, length)
    out, smap = propagate_with_noise(env, fibre, SolverConfig(max_nonlinear_phase_per_step=0.02))
    assert smap.symplectic_error() < 1e-8
    cov = output_covariance(smap)
    assert cov.uncertainty_margin() >= -1e-8
    assert photon_number_noise(out, cov, ModeSelector.all_pass(grid)) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vacuum_fluctuations_are_poissonian_for_any_selector(seed):
    rng = np.random.default_rng(seed)
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=5.0, chirp=rng.normal()), SMALL)
    weights = rng.uniform(size=SMALL.n_samples)
    ratio = photon_number_noise(env, CovarianceMatrix.vacuum(SMALL.n_samples), ModeSelector(weights))
    assert ratio == pytest.approx(1.0, abs=1e-10)


def test_unfiltered_noise_is_shot_noise_after_propagation(fig3_state, quantum_grid):
    out, cov, _ = fig3_state
    ratio = photon_number_noise(out, cov, ModeSelector.all_pass(quantum_grid))
    assert abs(ratio - 1.0) < 1e-8


def test_selector_limits(fig3_state, quantum_grid):
    out, cov, _ = fig3_state
    with pytest.raises(UndefinedError):
        photon_number_noise(out, cov, ModeSelector(np.zeros(quantum_grid.n_samples)))
    # nearly all-pass approaches shot noise
    ratios = [photon_number_noise(out, cov, ModeSelector(np.full(quantum_grid.n_samples, w)))
              for w in (0.9, 0.99, 0.999)]
    assert all(abs(r - 1) < 1e-8 for r in ratios)


def test_mean_photon_number_matches_energy(fig3_state):
    out, cov, _ = fig3_state
    mean, _ = filtered_number_moments(out, cov, ModeSelector.all_pass(out.grid))
    assert mean == pytest.approx(np.sum(np.abs(photon_amplitudes(out)) ** 2), rel=1e-12)


def test_selector_weight_validation():
    with pytest.raises(ValueError):
        ModeSelector(np.array([0.5, 1.2]))


def test_frequency_modes_are_unitary():
    rng = np.random.default_rng(3)
    a = rng.normal(size=16) + 1j * rng.normal(size=16)
    c = to_frequency_modes(a)
    assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(a), rel=1e-13)
    assert np.allclose(to_time_modes(c), a, atol=1e-13)


def test_correlation_matrix_of_vacuum_is_identity():
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=5.0), SMALL)
    bands = [(-20.0, -5.0), (-5.0, 0.0), (0.0, 5.0), (5.0, 20.0)]
    c = spectral_correlation_matrix(env, CovarianceMatrix.vacuum(SMALL.n_samples), bands)
    assert np.allclose(c, np.eye(4), atol=1e-12)


def test_correlation_matrix_after_soliton_propagation(fig3_state):
    out, cov, _ = fig3_state
    edges = np.linspace(-30.0, 30.0, 9)
    bands = list(zip(edges[:-1], edges[1:]))
    c = spectral_correlation_matrix(out, cov, bands)
    assert np.array_equal(c, c.T)
    assert np.all(np.abs(c) <= 1.0)
    assert np.all(np.diag(c) == 1.0)
    off = c[~np.eye(len(bands), dtype=bool)]
    assert off.min() < -0.1


def test_correlation_bands_must_not_overlap():
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=5.0), SMALL)
    with pytest.raises(ValueError):
        spectral_correlation_matrix(env, CovarianceMatrix.vacuum(SMALL.n_samples), [(-5, 1), (0, 5)])


def test_empty_band_is_flagged():
    env = make_pulse(PulseSpec(fwhm=WIDE, energy=5.0), SMALL)
    c = spectral_correlation_matrix(env, CovarianceMatrix.vacuum(SMALL.n_samples),
                                    [(-5.0, 5.0), (1e3, 2e3)])
    assert c[0, 0] == 1.0
    assert np.all(np.isnan(c[1])) and np.all(np.isnan(c[:, 1]))


def test_size_and_loss_guards():
    with pytest.raises(ValueError):
        propagate_with_noise(make_pulse(PulseSpec(energy=1.0), TimeGrid(8192, 20.0)),
                             calibrated_fibre(length=0.01))
    with pytest.raises(ValueError):
        propagate_with_noise(make_pulse(PulseSpec(fwhm=WIDE, energy=1.0), SMALL),
                             FibreSpec(-0.013, 0.04, 0.1, loss=0.1))
