import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fibresqueeze.entanglement import combine_on_beamsplitter, quadrature_correlations
from fibresqueeze.nolm import SingleModeState
from fibresqueeze.qkd import (
    AMPLITUDE,
    ChannelSpec,
    apply_channel,
    beamsplit_attack,
    detect_eavesdropper,
    eavesdropper_state,
    raw_bit_rate,
    run_session,
    sift_key,
)

SQUEEZED = combine_on_beamsplitter(SingleModeState.squeezed(0.3, 50.0), SingleModeState.squeezed(0.3, 50.0))
COHERENT = combine_on_beamsplitter(SingleModeState.coherent(50.0), SingleModeState.coherent(50.0))
ATTACK = ChannelSpec(tap=0.5)


@pytest.fixture(scope="module")
def clean_session():
    return run_session(SQUEEZED, ChannelSpec(), 10_000, seed=11)


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelSpec(transmittance=1.5)
    with pytest.raises(ValueError):
        ChannelSpec(tap=-0.1)
    with pytest.raises(ValueError):
        ChannelSpec(excess_noise=-1.0)
    with pytest.raises(ValueError):
        run_session(SQUEEZED, ChannelSpec(), 0, seed=1)


def test_basis_match_fraction(clean_session):
    n = clean_session.n_slots
    frac = clean_session.bases_match.mean()
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_matched_amplitude_values_anticorrelated(clean_session):
    amp = clean_session.bases_match & (clean_session.alice_basis == AMPLITUDE)
    r = np.corrcoef(clean_session.alice_values[amp].ravel(), clean_session.bob_values[amp].ravel())[0, 1]
    assert r < 0


def test_sessions_are_deterministic():
    a = run_session(SQUEEZED, ChannelSpec(), 500, seed=5)
    b = run_session(SQUEEZED, ChannelSpec(), 500, seed=5)
    c = run_session(SQUEEZED, ChannelSpec(), 500, seed=6)
    for field in ("alice_basis", "bob_basis", "alice_values", "bob_values"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert not np.array_equal(a.alice_values, c.alice_values)
    sa, sb = sift_key(a), sift_key(b)
    assert sa.alice_key == sb.alice_key and np.array_equal(sa.block_correlations, sb.block_correlations)
    assert a.to_csv() == b.to_csv()


def test_clean_sifting_gives_identical_keys(clean_session):
    result = sift_key(clean_session)
    assert result.alice_key == result.bob_key
    assert result.key_length == result.matched_slots.size
    assert set(result.alice_key) <= {"0", "1"}
    assert abs(result.sift_rate - 0.5) <= 4 * math.sqrt(0.25 / clean_session.n_slots)
    # every accepted slot really had equal bases
    assert np.all(clean_session.bases_match[result.matched_slots])
    assert not result.eavesdropper_flag


def test_bit_convention(clean_session):
    result = sift_key(clean_session)
    for slot, bit in zip(result.matched_slots[:50], result.alice_key[:50]):
        assert bit == ("1" if clean_session.alice_basis[slot] == AMPLITUDE else "0")


def test_coherent_pair_does_not_sift():
    rec = run_session(COHERENT, ChannelSpec(), 2000, seed=3)
    result = sift_key(rec)
    assert result.sift_rate < 0.01
    check = detect_eavesdropper(rec)
    assert check.status == "unusable" and check.flag


def test_no_correlation_gives_empty_key_with_diagnostic():
    rec = run_session(COHERENT, ChannelSpec(), 50, seed=4)
    result = sift_key(rec, block_size=128)
    assert result.key_length == 0 or result.sift_rate < 0.1
    empty = sift_key(run_session(SQUEEZED, ChannelSpec(tap=0.0), 50, seed=4))
    assert empty.key_length == 0
    assert empty.diagnostic


def test_block_size_limits(clean_session):
    with pytest.raises(ValueError):
        sift_key(clean_session, block_size=8)
    with pytest.raises(ValueError):
        sift_key(clean_session, block_size=clean_session.pulses_per_slot + 1)


def test_attack_composition():
    assert beamsplit_attack(ChannelSpec(0.8), 1.0) == ChannelSpec(0.8)
    composed = beamsplit_attack(beamsplit_attack(ChannelSpec(), 0.5), 0.4)
    assert composed.total_transmittance == pytest.approx(0.2)


def test_full_tap_leaves_bob_vacuum():
    shared = apply_channel(SQUEEZED, beamsplit_attack(ChannelSpec(), 0.0))
    assert np.allclose(shared.cov[2:, 2:], np.eye(2))
    assert np.allclose(shared.cov[:2, 2:], 0)


def test_half_tap_blends_bob_covariance():
    shared = apply_channel(SQUEEZED, ATTACK)
    assert np.allclose(shared.cov[2:, 2:], 0.5 * SQUEEZED.cov[2:, 2:] + 0.5 * np.eye(2), atol=1e-14)
    assert np.allclose(shared.cov[:2, 2:], math.sqrt(0.5) * SQUEEZED.cov[:2, 2:], atol=1e-14)
    eve = eavesdropper_state(SQUEEZED, ATTACK)
    assert np.allclose(eve.cov[2:, 2:], 0.5 * SQUEEZED.cov[2:, 2:] + 0.5 * np.eye(2), atol=1e-14)


def test_clean_channel_not_flagged_at_midway_threshold(clean_session):
    clean = quadrature_correlations(SQUEEZED).cond_var_x
    attacked = quadrature_correlations(apply_channel(SQUEEZED, ATTACK)).cond_var_x
    check = detect_eavesdropper(clean_session, threshold=0.5 * (clean + attacked))
    assert check.flag is False and check.status == "clean"


def test_attack_is_flagged():
    flags = [detect_eavesdropper(run_session(SQUEEZED, ATTACK, 2000, seed=s)).flag for s in range(10)]
    assert all(flags)


def test_too_few_slots_is_inconclusive():
    check = detect_eavesdropper(run_session(SQUEEZED, ChannelSpec(), 150, seed=2))
    assert check.status == "inconclusive" and check.flag is None


def test_estimates_converge_to_analytic_values():
    rec = run_session(SQUEEZED, ATTACK, 100_000, seed=21, pulses_per_slot=16)
    check = detect_eavesdropper(rec)
    analytic = quadrature_correlations(apply_channel(SQUEEZED, ATTACK))
    amp = rec.bases_match & (rec.alice_basis == AMPLITUDE)
    phs = rec.bases_match & (rec.alice_basis != AMPLITUDE)
    for est, exact, mask in ((check.estimates[0], analytic.cond_var_x, amp),
                             (check.estimates[1], analytic.cond_var_p, phs)):
        stderr = exact * math.sqrt(2.0 / (mask.sum() * rec.pulses_per_slot))
        assert abs(est - exact) < 5 * stderr


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.99), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_conditional_variance_monotone_in_tap(v, tap_hi, frac):
    source = combine_on_beamsplitter(SingleModeState.squeezed(v), SingleModeState.squeezed(v))
    tap_lo = tap_hi * frac
    hi = quadrature_correlations(apply_channel(source, ChannelSpec(tap=tap_hi)))
    lo = quadrature_correlations(apply_channel(source, ChannelSpec(tap=tap_lo)))
    assert lo.cond_var_x >= hi.cond_var_x - 1e-12
    assert lo.cond_var_p >= hi.cond_var_p - 1e-12


def test_rate_anchors():
    assert raw_bit_rate(82e6, 0.1) == 8.2e6
    assert raw_bit_rate(100e9, 0.1) == 1e10
    assert raw_bit_rate(82e6, 0.5, overhead=0.8) == 8.2e6
    assert raw_bit_rate(82e6, 0.0) == 0.0
    with pytest.raises(ValueError):
        raw_bit_rate(-1.0, 0.1)


def test_session_csv_schema():
    rec = run_session(SQUEEZED, ChannelSpec(), 3, seed=0, pulses_per_slot=4)
    lines = rec.to_csv().splitlines()
    assert lines[0] == "slot,alice_basis,bob_basis,alice_value,bob_value"
    assert len(lines) == 1 + 3 * 4
    assert lines[1].split(",")[1] in ("amplitude", "phase")
