"""Analytic-signal envelopes and generic peak detection.

The envelope pair (upper = +|analytic|, lower = -|analytic|) is the
shared substrate of step counting and gesture segmentation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio import AudioTrace, lowpass_array
from .validation import as_finite_array, check_rate, readonly

DEFAULT_SMOOTH_HZ = 5.0


@dataclass(frozen=True)
class Envelope:
    """Upper/lower amplitude envelopes sampled at ``sample_rate_hz``."""

    upper: np.ndarray
    lower: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        object.__setattr__(self, "sample_rate_hz", check_rate(self.sample_rate_hz))
        upper = as_finite_array(self.upper, "upper")
        lower = as_finite_array(self.lower, "lower")
        if upper.size != lower.size:
            raise ValueError("upper and lower envelopes must have equal length")
        if upper.size and np.any(upper < lower):
            raise ValueError("upper envelope must dominate the lower envelope")
        object.__setattr__(self, "upper", readonly(upper))
        object.__setattr__(self, "lower", readonly(lower))

    def __len__(self) -> int:
        return self.upper.size


@dataclass(frozen=True)
class Peak:
    """A local maximum: time index ``x`` in seconds, amplitude ``y``."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("peak coordinates must be finite")


def analytic_envelope(trace: AudioTrace) -> Envelope:
    """Hilbert-magnitude envelope via full-length FFT.

    The analytic signal is built by one-sided spectrum doubling, so the
    magnitude bounds |x| pointwise (up to float error).
    """
    if len(trace) < 4:
        raise ValueError(f"trace too short for envelope extraction ({len(trace)} samples)")
    magnitude = np.abs(sps.hilbert(trace.samples))
    return Envelope(magnitude, -magnitude, trace.sample_rate_hz)


def smooth_envelope(env: Envelope, cutoff_hz: float = DEFAULT_SMOOTH_HZ) -> Envelope:
    """Lowpass both envelope series; clamps (and warns) if smoothing
    makes the pair cross anywhere."""
    if cutoff_hz >= env.sample_rate_hz / 2:
        raise ValueError(
            f"cutoff_hz must be below the envelope Nyquist "
            f"({env.sample_rate_hz / 2} Hz), got {cutoff_hz}"
        )
    upper = lowpass_array(env.upper, env.sample_rate_hz, cutoff_hz)
    lower = lowpass_array(env.lower, env.sample_rate_hz, cutoff_hz)
    crossed = lower > upper
    if np.any(crossed):
        # Meet at the midpoint: pulling one series onto the other would
        # break the +/- symmetry of mirror envelopes and turn filter
        # undershoot into phantom peaks on one side only.
        warnings.warn("smoothing made the envelopes cross; clamped", stacklevel=2)
        midpoint = 0.5 * (upper + lower)
        upper = np.where(crossed, midpoint, upper)
        lower = np.where(crossed, midpoint, lower)
    return Envelope(upper, lower, env.sample_rate_hz)


def _local_maxima_indices(series: np.ndarray) -> np.ndarray:
    """Strict local maxima; a plateau resolves to its leftmost sample."""
    if series.size < 3:
        return np.empty(0, dtype=np.intp)
    change = np.flatnonzero(np.diff(series) != 0)
    run_starts = np.concatenate(([0], change + 1))
    run_values = series[run_starts]
    is_peak = np.zeros(run_values.size, dtype=bool)
    if run_values.size >= 3:
        is_peak[1:-1] = (run_values[1:-1] > run_values[:-2]) & (
            run_values[1:-1] > run_values[2:]
        )
    return run_starts[is_peak]


def detect_peaks(series, rate_hz: float, min_interval_s: float = 0.0) -> list[Peak]:
    """Local maxima of ``series`` thinned to a minimum spacing.

    Spacing is enforced by a single left-to-right pass that keeps the
    earlier peak and re-anchors the comparison to the last retained one.
    """
    series = as_finite_array(series, "series")
    if min_interval_s < 0:
        raise ValueError(f"min_interval_s must be >= 0, got {min_interval_s}")
    if rate_hz <= 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    peaks = [Peak(i / rate_hz, series[i]) for i in _local_maxima_indices(series)]
    if min_interval_s == 0:
        return peaks
    kept: list[Peak] = []
    for peak in peaks:
        if kept and peak.x - kept[-1].x < min_interval_s:
            continue
        kept.append(peak)
    return kept
