"""Step counting from envelope peaks.

Pipeline: 50 Hz zero-phase lowpass, decimation to ~1 kHz, analytic
envelope, <5 Hz smoothing, per-envelope peak detection and filtering,
then one-to-one alignment of upper and lower peaks. A step is counted
only when an upper peak pairs with a lower peak within the alignment
interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator

from .audio import (
    AudioTrace,
    DEFAULT_LOWPASS_HZ,
    PIPELINE_RATE_HZ,
    decimate,
    lowpass,
    pipeline_decimation_factor,
)
from .envelope import DEFAULT_SMOOTH_HZ, Peak, analytic_envelope, detect_peaks, smooth_envelope

LOW_CONFIDENCE_DURATION_S = 2.0


@dataclass(frozen=True)
class StepCounterConfig:
    theta_intvl_s: float = 0.3
    theta_amp_factor: float = 0.3
    delta_align_s: float = 0.2
    lowpass_cutoff_hz: float = DEFAULT_LOWPASS_HZ
    envelope_smooth_hz: float = DEFAULT_SMOOTH_HZ

    def __post_init__(self):
        for name in (
            "theta_intvl_s",
            "theta_amp_factor",
            "delta_align_s",
            "lowpass_cutoff_hz",
            "envelope_smooth_hz",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_align_s >= self.theta_intvl_s:
            raise ValueError("delta_align_s must be smaller than theta_intvl_s")


class RejectReason(Enum):
    TOO_CLOSE = "TooClose"
    TOO_SMALL = "TooSmall"
    UNMATCHED = "Unmatched"


@dataclass(frozen=True)
class StepReport:
    count: int
    matched_pairs: tuple[tuple[Peak, Peak], ...]
    rejected_peaks: tuple[tuple[Peak, RejectReason], ...] = ()
    low_confidence: bool = False

    def __post_init__(self):
        if self.count != len(self.matched_pairs):
            raise ValueError("count must equal the number of matched pairs")

    @property
    def step_times(self) -> tuple[float, ...]:
        return tuple((up.x + low.x) / 2 for up, low in self.matched_pairs)


def _filter_peaks_detailed(
    peaks: list[Peak], theta_intvl_s: float, theta_amp_factor: float
) -> tuple[list[Peak], list[tuple[Peak, RejectReason]]]:
    if not peaks:
        return [], []
    # Amplitude threshold from the mean of ALL raw peaks, fixed before
    # any deletion; then the amplitude pass runs before the interval
    # pass so sub-threshold blips cannot shadow genuine peaks.
    theta_amplitude = theta_amp_factor * float(np.mean([abs(p.y) for p in peaks]))
    rejected: list[tuple[Peak, RejectReason]] = []
    big: list[Peak] = []
    for peak in peaks:
        if abs(peak.y) < theta_amplitude:
            rejected.append((peak, RejectReason.TOO_SMALL))
        else:
            big.append(peak)
    kept: list[Peak] = []
    for peak in big:
        if kept and peak.x - kept[-1].x < theta_intvl_s:
            rejected.append((peak, RejectReason.TOO_CLOSE))
            continue
        kept.append(peak)
    return kept, rejected


def filter_peaks(peaks, theta_intvl_s: float, theta_amp_factor: float) -> list[Peak]:
    """Drop peaks below the relative amplitude threshold, then enforce
    the minimum interval (earlier peak wins, scan re-anchors)."""
    peaks = sorted(peaks, key=lambda p: p.x)
    kept, _ = _filter_peaks_detailed(peaks, theta_intvl_s, theta_amp_factor)
    return kept


def align_peaks(upper, lower, delta_s: float) -> list[tuple[Peak, Peak]]:
    """Greedy one-to-one matching in time order.

    Each upper peak takes the earliest still-unmatched lower peak with
    |dx| < delta_s; every peak participates in at most one pair.
    """
    if delta_s <= 0:
        raise ValueError(f"delta_s must be positive, got {delta_s}")
    upper = sorted(upper, key=lambda p: p.x)
    lower = sorted(lower, key=lambda p: p.x)
    pairs: list[tuple[Peak, Peak]] = []
    j = 0
    for up in upper:
        while j < len(lower) and lower[j].x <= up.x - delta_s:
            j += 1
        if j < len(lower) and abs(lower[j].x - up.x) < delta_s:
            pairs.append((up, lower[j]))
            j += 1
    return pairs


def count_steps(trace: AudioTrace, cfg: StepCounterConfig | None = None) -> StepReport:
    """Run the full step-counting pipeline on one channel.

    A silent trace yields a zero count, not an error. Traces shorter
    than two seconds are processed but flagged low-confidence.
    """
    cfg = cfg or StepCounterConfig()
    low_confidence = trace.duration_s < LOW_CONFIDENCE_DURATION_S

    filtered = lowpass(trace, cfg.lowpass_cutoff_hz)
    factor = pipeline_decimation_factor(trace.sample_rate_hz, PIPELINE_RATE_HZ)
    filtered = decimate(filtered, factor, prior_cutoff_hz=cfg.lowpass_cutoff_hz)
    rate = filtered.sample_rate_hz

    env = smooth_envelope(analytic_envelope(filtered), cfg.envelope_smooth_hz)
    upper_raw = detect_peaks(env.upper, rate)
    # Events on the lower envelope are its troughs; detect maxima of the
    # negated series and restore the (negative) amplitudes.
    lower_raw = [Peak(p.x, -p.y) for p in detect_peaks(-env.lower, rate)]

    upper_kept, upper_rej = _filter_peaks_detailed(
        upper_raw, cfg.theta_intvl_s, cfg.theta_amp_factor
    )
    lower_kept, lower_rej = _filter_peaks_detailed(
        lower_raw, cfg.theta_intvl_s, cfg.theta_amp_factor
    )
    pairs = align_peaks(upper_kept, lower_kept, cfg.delta_align_s)

    matched = {id(p) for pair in pairs for p in pair}
    unmatched = [
        (p, RejectReason.UNMATCHED)
        for p in upper_kept + lower_kept
        if id(p) not in matched
    ]
    return StepReport(
        count=len(pairs),
        matched_pairs=tuple(pairs),
        rejected_peaks=tuple(upper_rej + lower_rej + unmatched),
        low_confidence=low_confidence,
    )


class StepCounter(BaseEstimator):
    """Estimator-style wrapper so the counter carries get_params/set_params."""

    def __init__(
        self,
        theta_intvl_s: float = 0.3,
        theta_amp_factor: float = 0.3,
        delta_align_s: float = 0.2,
        lowpass_cutoff_hz: float = DEFAULT_LOWPASS_HZ,
        envelope_smooth_hz: float = DEFAULT_SMOOTH_HZ,
    ):
        self.theta_intvl_s = theta_intvl_s
        self.theta_amp_factor = theta_amp_factor
        self.delta_align_s = delta_align_s
        self.lowpass_cutoff_hz = lowpass_cutoff_hz
        self.envelope_smooth_hz = envelope_smooth_hz

    def config(self) -> StepCounterConfig:
        return StepCounterConfig(**self.get_params())

    def count(self, trace: AudioTrace) -> StepReport:
        return count_steps(trace, self.config())

    def predict(self, traces) -> np.ndarray:
        """Step counts for a sequence of traces."""
        return np.array([self.count(t).count for t in traces], dtype=int)
