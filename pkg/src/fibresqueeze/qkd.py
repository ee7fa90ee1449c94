"""
Entanglement-based key distribution with amplitude/phase measurements.

Each slot is one correlation-measurement window of ``pulses_per_slot`` pulses
during which Alice and Bob each keep a randomly chosen basis (amplitude or
phase). Bob discloses his photocurrent values but not his basis; Alice accepts
a slot when her values and Bob's show the correlation expected for equal
bases. Accepted slots give one bit each: 1 for amplitude, 0 for phase.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .entanglement import TwoModeState, apply_loss, quadrature_correlations

AMPLITUDE = 1
PHASE = 0
BASIS_NAMES = {AMPLITUDE: "amplitude", PHASE: "phase"}

MIN_BLOCK = 16
MIN_MATCHED_SLOTS = 100


@dataclass(frozen=True)
class ChannelSpec:
    """Quantum channel to Bob.

    ``tap`` is the fraction left in the channel by a beamsplitting eavesdropper
    (1 means no attack); the effective transmittance is ``transmittance * tap``.
    """

    transmittance: float = 1.0
    excess_noise: float = 0.0
    tap: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError("transmittance must lie in [0, 1]")
        if not 0.0 <= self.tap <= 1.0:
            raise ValueError("tap must lie in [0, 1]")
        if self.excess_noise < 0:
            raise ValueError("excess noise must be non-negative")

    @property
    def total_transmittance(self) -> float:
        return self.transmittance * self.tap


def beamsplit_attack(channel: ChannelSpec, tap: float) -> ChannelSpec:
    """Add a passive beamsplitter that leaves ``tap`` of the power to Bob."""
    if not 0.0 <= tap <= 1.0:
        raise ValueError("tap must lie in [0, 1]")
    return replace(channel, tap=channel.tap * tap)


def apply_channel(pair: TwoModeState, channel: ChannelSpec) -> TwoModeState:
    """State shared by Alice and Bob after Bob's mode crosses the channel."""
    return apply_loss(pair, channel.total_transmittance, "B", channel.excess_noise)


def eavesdropper_state(pair: TwoModeState, channel: ChannelSpec) -> TwoModeState:
    """Joint state of Alice's mode and the mode diverted by the attacker.

    The tap sits at the start of the channel.
    """
    return apply_loss(pair, 1.0 - channel.tap, "B")


@dataclass(frozen=True)
class SessionRecord:
    alice_basis: np.ndarray = field(repr=False)
    bob_basis: np.ndarray = field(repr=False)
    alice_values: np.ndarray = field(repr=False)
    bob_values: np.ndarray = field(repr=False)
    seed: int
    channel: ChannelSpec
    source: TwoModeState = field(repr=False)

    @property
    def n_slots(self) -> int:
        return int(self.alice_basis.size)

    @property
    def pulses_per_slot(self) -> int:
        return int(self.alice_values.shape[1])

    @property
    def bases_match(self) -> np.ndarray:
        return self.alice_basis == self.bob_basis

    def to_csv(self) -> str:
        """One row per pulse: slot, alice_basis, bob_basis, alice_value, bob_value."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["slot", "alice_basis", "bob_basis", "alice_value", "bob_value"])
        for slot in range(self.n_slots):
            ab = BASIS_NAMES[int(self.alice_basis[slot])]
            bb = BASIS_NAMES[int(self.bob_basis[slot])]
            for va, vb in zip(self.alice_values[slot], self.bob_values[slot]):
                writer.writerow([slot, ab, bb, repr(float(va)), repr(float(vb))])
        return buf.getvalue()


def run_session(
    pair: TwoModeState,
    channel: ChannelSpec,
    n_slots: int,
    seed: int,
    pulses_per_slot: int = 128,
) -> SessionRecord:
    """Simulate ``n_slots`` measurement windows; deterministic for a given seed."""
    if n_slots < 1:
        raise ValueError("n_slots must be at least 1")
    if pulses_per_slot < 1:
        raise ValueError("pulses_per_slot must be at least 1")
    shared = apply_channel(pair, channel)
    rng = np.random.default_rng(seed)
    alice_basis = rng.integers(0, 2, size=n_slots)
    bob_basis = rng.integers(0, 2, size=n_slots)
    samples = rng.multivariate_normal(
        np.zeros(4), shared.cov, size=(n_slots, pulses_per_slot), method="eigh"
    )
    # columns: X_A, P_A, X_B, P_B
    alice_values = np.where(alice_basis[:, None] == AMPLITUDE, samples[..., 0], samples[..., 1])
    bob_values = np.where(bob_basis[:, None] == AMPLITUDE, samples[..., 2], samples[..., 3])
    return SessionRecord(alice_basis, bob_basis, alice_values, bob_values, seed, channel, pair)


@dataclass(frozen=True)
class SiftResult:
    matched_slots: np.ndarray = field(repr=False)
    alice_key: str = field(repr=False)
    bob_key: str = field(repr=False)
    block_correlations: np.ndarray = field(repr=False)
    thresholds: Tuple[float, float]
    sift_rate: float
    eavesdropper_flag: bool
    conditional_variances: Tuple[float, float]
    diagnostic: str = ""

    @property
    def key_length(self) -> int:
        return len(self.alice_key)


def _row_correlation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    num = np.sum(xc * yc, axis=1)
    den = np.sqrt(np.sum(xc**2, axis=1) * np.sum(yc**2, axis=1))
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def expected_correlations(pair: TwoModeState) -> Tuple[float, float]:
    """Clean-channel correlation of equal-basis values: (amplitude, phase)."""
    corr = quadrature_correlations(pair)
    return corr.corr_xx, corr.corr_pp


def sift_key(
    rec: SessionRecord,
    block_size: Optional[int] = None,
    threshold_fraction: float = 0.5,
    noise_floor_sigmas: float = 4.0,
) -> SiftResult:
    """Alice's correlation-based sifting.

    A slot is accepted when the sample correlation of its first ``block_size``
    pulses has the sign expected for equal bases and a magnitude above
    ``max(threshold_fraction * |expected|, noise_floor_sigmas / sqrt(block))``.
    The floor keeps uncorrelated (mismatched or unentangled) slots out.
    """
    block = rec.pulses_per_slot if block_size is None else block_size
    if block < MIN_BLOCK:
        raise ValueError(f"block size must be at least {MIN_BLOCK}")
    if block > rec.pulses_per_slot:
        raise ValueError("block size exceeds the pulses recorded per slot")
    r = _row_correlation(rec.alice_values[:, :block], rec.bob_values[:, :block])
    floor = noise_floor_sigmas / math.sqrt(block)
    exp_amp, exp_phase = expected_correlations(rec.source)
    thr_amp = max(threshold_fraction * abs(exp_amp), floor)
    thr_phase = max(threshold_fraction * abs(exp_phase), floor)
    expected = np.where(rec.alice_basis == AMPLITUDE, exp_amp, exp_phase)
    threshold = np.where(rec.alice_basis == AMPLITUDE, thr_amp, thr_phase)
    accepted = (np.sign(r) == np.sign(expected)) & (np.abs(r) > threshold)
    matched = np.flatnonzero(accepted)
    alice_key = "".join("1" if rec.alice_basis[i] == AMPLITUDE else "0" for i in matched)
    bob_key = "".join("1" if rec.bob_basis[i] == AMPLITUDE else "0" for i in matched)
    diagnostic = "" if matched.size else "no slot exceeded the correlation threshold"
    check = detect_eavesdropper(rec)
    return SiftResult(
        matched_slots=matched,
        alice_key=alice_key,
        bob_key=bob_key,
        block_correlations=r,
        thresholds=(thr_amp, thr_phase),
        sift_rate=matched.size / rec.n_slots,
        eavesdropper_flag=check.flag,
        conditional_variances=check.estimates,
        diagnostic=diagnostic,
    )


@dataclass(frozen=True)
class EavesdropperCheck:
    """Outcome of the channel test.

    ``status`` is one of ``clean``, ``flagged``, ``unusable`` (no correlation
    below the vacuum level to protect) or ``inconclusive`` (too few matched
    slots). ``flag`` is ``None`` only when inconclusive.
    """

    flag: Optional[bool]
    estimates: Tuple[float, float]
    threshold: float
    status: str


def _pooled_conditional_variance(a: np.ndarray, b: np.ndarray) -> float:
    a = a.ravel()
    b = b.ravel()
    cov = np.cov(a, b)
    return float(cov[1, 1] - cov[0, 1] ** 2 / cov[0, 0])


def detect_eavesdropper(rec: SessionRecord, threshold: Optional[float] = None) -> EavesdropperCheck:
    """Estimate ``V(X_B|X_A)`` and ``V(P_B|P_A)`` from equal-basis slots.

    Bases are compared publicly on the tested slots. Without an explicit
    ``threshold`` the channel is flagged when either estimate exceeds the
    clean-channel prediction of the source by five standard errors.
    """
    amp = rec.bases_match & (rec.alice_basis == AMPLITUDE)
    phs = rec.bases_match & (rec.alice_basis == PHASE)
    if min(amp.sum(), phs.sum()) < MIN_MATCHED_SLOTS:
        return EavesdropperCheck(None, (math.nan, math.nan), math.nan, "inconclusive")
    vx = _pooled_conditional_variance(rec.alice_values[amp], rec.bob_values[amp])
    vp = _pooled_conditional_variance(rec.alice_values[phs], rec.bob_values[phs])
    clean = quadrature_correlations(rec.source)
    if threshold is None:
        n = min(amp.sum(), phs.sum()) * rec.pulses_per_slot
        worst = max(clean.cond_var_x, clean.cond_var_p)
        threshold = worst * (1.0 + 5.0 * math.sqrt(2.0 / n))
    # no sub-vacuum conditional variance to protect (rounding margin for exact 1)
    if min(clean.cond_var_x, clean.cond_var_p) >= 1.0 - 1e-9:
        return EavesdropperCheck(True, (vx, vp), threshold, "unusable")
    flag = vx > threshold or vp > threshold
    return EavesdropperCheck(flag, (vx, vp), threshold, "flagged" if flag else "clean")


def raw_bit_rate(repetition_rate: float, sift_rate: float, overhead: float = 0.0) -> float:
    """Raw key rate ``repetition_rate * sift_rate * (1 - overhead)`` in bit/s.

    Evaluated in exact decimal arithmetic and rounded once, so decimal inputs
    such as 82e6 and 0.1 give exactly 8.2e6.
    """
    if repetition_rate < 0 or sift_rate < 0:
        raise ValueError("rates must be non-negative")
    if not 0.0 <= overhead <= 1.0:
        raise ValueError("overhead must lie in [0, 1]")
    exact = Fraction(repr(float(repetition_rate))) * Fraction(repr(float(sift_rate)))
    exact *= 1 - Fraction(repr(float(overhead)))
    return float(exact)
