import math

import numpy as np
import pytest

from fibresqueeze.detection import (
    balanced_detection,
    default_cutoffs,
    exact_linear_fit,
    knife_edge,
    shot_noise_calibration,
    squeezing_scan,
)
from fibresqueeze.errors import UndefinedError
from fibresqueeze.pulse import ComplexEnvelope
from fibresqueeze.quantum import CovarianceMatrix, ModeSelector, photon_number_noise


@pytest.fixture(scope="module")
def squeezed(fig3_state):
    out, cov, _ = fig3_state
    curve = squeezing_scan(out, cov, default_cutoffs(out.grid))
    return out, cov, curve


def test_knife_edge_limits(quantum_grid):
    assert np.all(knife_edge(quantum_grid, quantum_grid.omega[0]).weights == 1)
    assert np.all(knife_edge(quantum_grid, -np.inf).weights == 1)
    assert np.all(knife_edge(quantum_grid, np.inf).weights == 0)
    assert knife_edge(quantum_grid, 0.0).weights.sum() == quantum_grid.n_samples // 2


def test_coherent_state_sum_equals_difference(fig3_state, quantum_grid):
    out, _, _ = fig3_state
    vac = CovarianceMatrix.vacuum(quantum_grid.n_samples)
    for cut in quantum_grid.omega[::8]:
        try:
            rec = balanced_detection(out, vac, knife_edge(quantum_grid, cut), electronic_noise=3.0)
        except UndefinedError:
            continue
        assert abs(rec.sum_variance - rec.difference_variance) <= 1e-10 * rec.difference_variance


def test_squeezed_sum_below_difference_at_best_cutoff(squeezed):
    out, cov, curve = squeezed
    cut, _ = curve.minimum
    rec = balanced_detection(out, cov, knife_edge(out.grid, cut))
    assert rec.sum_variance < rec.difference_variance


@pytest.mark.parametrize("eta", [0.5, 0.8, 0.3])
def test_efficiency_matches_beamsplitter_algebra(squeezed, eta):
    out, cov, curve = squeezed
    sel = knife_edge(out.grid, curve.minimum[0])
    r = photon_number_noise(out, cov, sel)
    rec = balanced_detection(out, cov, sel, efficiency=eta)
    assert rec.ratio == pytest.approx(eta * r + 1 - eta, abs=1e-10)
    # explicit oracle: every mode meets vacuum on a beamsplitter of transmittance eta
    lossy_env = ComplexEnvelope(out.grid, math.sqrt(eta) * out.samples)
    lossy_cov = CovarianceMatrix(eta * cov.matrix + (1 - eta) * np.eye(cov.matrix.shape[0]))
    assert rec.ratio == pytest.approx(photon_number_noise(lossy_env, lossy_cov, sel), abs=1e-10)


def test_electronic_noise_correction(squeezed):
    out, cov, curve = squeezed
    sel = knife_edge(out.grid, curve.minimum[0])
    clean = balanced_detection(out, cov, sel)
    raw = balanced_detection(out, cov, sel, electronic_noise=1e6, correct=False)
    fixed = balanced_detection(out, cov, sel, electronic_noise=1e6, correct=True)
    assert raw.sum_variance == pytest.approx(clean.sum_variance + 1e6, rel=1e-12)
    assert raw.difference_variance == pytest.approx(clean.difference_variance + 1e6, rel=1e-12)
    assert fixed.ratio == pytest.approx(clean.ratio, rel=1e-9)
    assert raw.ratio > clean.ratio
    assert not fixed.clamped


def test_detection_input_validation(fig3_state, quantum_grid):
    out, cov, _ = fig3_state
    sel = ModeSelector.all_pass(quantum_grid)
    with pytest.raises(ValueError):
        balanced_detection(out, cov, sel, efficiency=0.0)
    with pytest.raises(ValueError):
        balanced_detection(out, cov, sel, electronic_noise=-1.0)
    with pytest.raises(UndefinedError):
        balanced_detection(out, cov, knife_edge(quantum_grid, np.inf))


def test_mean_power_at_repetition_rate(fig3_state, quantum_grid):
    out, cov, _ = fig3_state
    rec = balanced_detection(out, cov, ModeSelector.all_pass(quantum_grid))
    assert rec.mean_power_mw == pytest.approx(15.8e-12 * 82e6 * 1e3, rel=1e-9)


def test_shot_noise_calibration_coherent(fig3_state, quantum_grid):
    out, _, _ = fig3_state
    fit = shot_noise_calibration(out, CovarianceMatrix.vacuum(quantum_grid.n_samples), [1, 0.5, 0.25])
    assert abs(fit.r_squared - 1) < 1e-9
    assert abs(fit.intercept) < 1e-9
    assert fit.slope > 0


def test_shot_noise_calibration_squeezed_beam_is_linear(squeezed):
    out, cov, curve = squeezed
    sel = knife_edge(out.grid, curve.minimum[0])
    fit = shot_noise_calibration(out, cov, [1, 0.5, 0.25, 0.125], sel=sel)
    assert abs(fit.r_squared - 1) < 1e-9
    assert abs(fit.intercept) < 1e-9


def test_calibration_with_general_attenuations(fig3_state, quantum_grid):
    # non-dyadic factors round the data themselves at the 1e-16 relative level
    out, _, _ = fig3_state
    fit = shot_noise_calibration(out, CovarianceMatrix.vacuum(quantum_grid.n_samples),
                                 [1, 0.7, 0.3, 0.1])
    scale = fit.slope * 1.3
    assert abs(fit.intercept) < 1e-15 * scale
    assert abs(fit.r_squared - 1) < 1e-12


def test_exact_fit_recovers_line():
    fit = exact_linear_fit([1.0, 2.0, 4.0], [3.5, 6.0, 11.0])
    assert (fit.slope, fit.intercept, fit.r_squared) == (2.5, 1.0, 1.0)


def test_calibration_with_electronic_noise_offsets_intercept(fig3_state, quantum_grid):
    out, cov, _ = fig3_state
    fit = shot_noise_calibration(out, cov, [1, 0.5, 0.25], electronic_noise=250.0)
    assert fit.intercept == pytest.approx(250.0, rel=1e-6)


def test_calibration_needs_three_points(fig3_state):
    out, cov, _ = fig3_state
    with pytest.raises(ValueError):
        shot_noise_calibration(out, cov, [1, 0.5])
    with pytest.raises(ValueError):
        shot_noise_calibration(out, cov, [1, 0.5, 0.0])


def test_vacuum_scan_is_flat(fig3_state, quantum_grid):
    out, _, _ = fig3_state
    curve = squeezing_scan(out, CovarianceMatrix.vacuum(quantum_grid.n_samples), quantum_grid.omega)
    assert np.nanmax(np.abs(curve.ratio_db)) < 1e-9


def test_squeezing_window_and_all_pass_endpoint(squeezed):
    _, _, curve = squeezed
    assert np.all(np.diff(curve.cutoffs) > 0)
    assert abs(curve.ratio_db[0]) < 1e-8
    windows = curve.windows(0.0)
    assert len(windows) >= 1
    cut, depth = curve.minimum
    assert depth < 0
    assert any(lo <= cut <= hi for lo, hi in windows)


def test_scan_minimum_stable_under_refinement(squeezed):
    out, cov, curve = squeezed
    w = out.grid.omega
    mid = w[:-1] + 0.5 * np.diff(w)
    fine = squeezing_scan(out, cov, np.sort(np.concatenate([w, mid])))
    assert abs(fine.minimum[1] - curve.minimum[1]) < 0.05


def test_scan_needs_eight_cutoffs(fig3_state):
    out, cov, _ = fig3_state
    with pytest.raises(ValueError):
        squeezing_scan(out, cov, np.linspace(-5, 5, 7))


def test_blocked_cutoffs_are_nan(fig3_state):
    out, cov, _ = fig3_state
    curve = squeezing_scan(out, cov, np.linspace(0.0, 1e4, 8))
    assert np.isnan(curve.ratio_db[-1])
    assert curve.mean_power_mw[-1] == 0.0


def test_curve_csv_schema(squeezed):
    _, _, curve = squeezed
    lines = curve.to_csv().splitlines()
    assert lines[0] == "cutoff_rad_per_ps,ratio_db,mean_power_mw"
    assert len(lines) == curve.cutoffs.size + 1
