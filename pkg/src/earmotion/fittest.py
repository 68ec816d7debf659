"""Software fit test for ear-canal sealing.

A dual-tone probe (300 Hz and 1500 Hz, 100 ms each) is played once
unworn and once worn. Good sealing boosts the low tone and damps the
high tone, so the decision is a pair of amplitude-ratio thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioTrace

PROBE_LOW_HZ = 300.0
PROBE_HIGH_HZ = 1500.0
PROBE_DURATION_S = 0.1
FADE_S = 0.005
MIN_RECORDING_S = 0.05
LOW_RATIO_THRESHOLD = 5.0
HIGH_RATIO_THRESHOLD = 0.2


@dataclass(frozen=True)
class FitTestResult:
    a300_base: float
    a1500_base: float
    a300_test: float
    a1500_test: float
    ratio_low: float
    ratio_high: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "a300_base": self.a300_base,
            "a1500_base": self.a1500_base,
            "a300_test": self.a300_test,
            "a1500_test": self.a1500_test,
            "ratio_low": self.ratio_low,
            "ratio_high": self.ratio_high,
            "passed": self.passed,
        }


def generate_probe_tone(
    freq_hz: float,
    duration_s: float = PROBE_DURATION_S,
    rate_hz: int = 48000,
    amplitude: float = 0.5,
) -> AudioTrace:
    """Single probe tone with 5 ms raised-cosine fade-in/out."""
    if not 0 < freq_hz < rate_hz / 2:
        raise ValueError(f"freq_hz must lie in (0, {rate_hz / 2}), got {freq_hz}")
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    tone = amplitude * np.sin(2 * np.pi * freq_hz * t)
    n_fade = min(int(round(FADE_S * rate_hz)), n // 2)
    if n_fade:
        ramp = 0.5 * (1 - np.cos(np.pi * np.arange(n_fade) / n_fade))
        tone[:n_fade] *= ramp
        tone[-n_fade:] *= ramp[::-1]
    return AudioTrace(tone, rate_hz)


def tone_amplitude(recording: AudioTrace, freq_hz: float) -> float:
    """Amplitude at one frequency via single-bin projection.

    Projects the steady-state region (fades excluded) onto a complex
    exponential, so broadband noise and other tones barely leak in.
    """
    rate = recording.sample_rate_hz
    if len(recording) < MIN_RECORDING_S * rate:
        raise ValueError(
            f"recording must be at least {MIN_RECORDING_S * 1000:.0f} ms, "
            f"got {recording.duration_s * 1000:.1f} ms"
        )
    if not 0 < freq_hz < rate / 2:
        raise ValueError(f"freq_hz must lie in (0, {rate / 2}), got {freq_hz}")
    n_fade = int(round(FADE_S * rate))
    interior = recording.samples[n_fade : len(recording) - n_fade]
    k = np.arange(interior.size)
    projection = np.sum(interior * np.exp(-2j * np.pi * freq_hz * k / rate))
    return float(2.0 * np.abs(projection) / interior.size)


def evaluate_fit(
    base300: float,
    base1500: float,
    test300: float,
    test1500: float,
    low_ratio_threshold: float = LOW_RATIO_THRESHOLD,
    high_ratio_threshold: float = HIGH_RATIO_THRESHOLD,
) -> FitTestResult:
    """Apply the ratio rule: pass iff the low-tone ratio exceeds
    ``low_ratio_threshold`` and the high-tone ratio stays below
    ``high_ratio_threshold``."""
    for name, value in (("base300", base300), ("base1500", base1500)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")
    for name, value in (("test300", test300), ("test1500", test1500)):
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value!r}")
    ratio_low = test300 / base300
    ratio_high = test1500 / base1500
    return FitTestResult(
        a300_base=float(base300),
        a1500_base=float(base1500),
        a300_test=float(test300),
        a1500_test=float(test1500),
        ratio_low=float(ratio_low),
        ratio_high=float(ratio_high),
        passed=bool(ratio_low > low_ratio_threshold and ratio_high < high_ratio_threshold),
    )


def run_fit_test(
    base_low: AudioTrace,
    base_high: AudioTrace,
    test_low: AudioTrace,
    test_high: AudioTrace,
) -> FitTestResult:
    """Measure the four recordings and apply the ratio rule."""
    return evaluate_fit(
        tone_amplitude(base_low, PROBE_LOW_HZ),
        tone_amplitude(base_high, PROBE_HIGH_HZ),
        tone_amplitude(test_low, PROBE_LOW_HZ),
        tone_amplitude(test_high, PROBE_HIGH_HZ),
    )
