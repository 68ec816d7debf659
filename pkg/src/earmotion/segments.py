"""Classifier-ready segments: sliding windows, peak-anchored gesture
extraction, and the step-vs-tap disambiguator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .audio import AudioTrace, Channel, PIPELINE_RATE_HZ, decimate, lowpass, pipeline_decimation_factor
from .envelope import analytic_envelope, detect_peaks, smooth_envelope
from .steps import StepCounterConfig, _filter_peaks_detailed
from .validation import as_finite_array, check_rate, readonly

GESTURE_BACK_S = 0.15
GESTURE_FWD_S = 0.25
GESTURE_DURATION_S = GESTURE_BACK_S + GESTURE_FWD_S

STEP_LABEL = "step"
TAP_LABEL = "tap"


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    sample_rate_hz: int
    start_s: float
    label: str | None = None
    channel: Channel = Channel.MONO
    padded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sample_rate_hz", check_rate(self.sample_rate_hz))
        samples = as_finite_array(self.samples, "samples")
        object.__setattr__(self, "samples", readonly(samples))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def sliding_windows(trace: AudioTrace, window_s: float = 1.0, overlap: float = 0.5) -> list[Segment]:
    """Fixed windows with the given overlap; a trailing partial window
    is discarded so every segment has identical length."""
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    if window_s <= 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    rate = trace.sample_rate_hz
    win = int(round(window_s * rate))
    step = max(1, int(round(win * (1 - overlap))))
    out = []
    start = 0
    while start + win <= len(trace):
        out.append(
            Segment(
                trace.samples[start : start + win],
                rate,
                start_s=start / rate,
                channel=trace.channel,
            )
        )
        start += step
    return out


def extract_gestures(trace: AudioTrace, cfg: StepCounterConfig | None = None) -> list[Segment]:
    """One 0.4 s segment per retained envelope peak.

    The trace runs through the standard lowpass/decimate front end; each
    peak anchors a window 0.15 s back and 0.25 s forward. Windows that
    spill over the trace bounds are zero-padded and flagged.
    """
    cfg = cfg or StepCounterConfig()
    filtered = lowpass(trace, cfg.lowpass_cutoff_hz)
    factor = pipeline_decimation_factor(trace.sample_rate_hz, PIPELINE_RATE_HZ)
    filtered = decimate(filtered, factor, prior_cutoff_hz=cfg.lowpass_cutoff_hz)
    rate = filtered.sample_rate_hz
    if len(filtered) < 4:
        return []

    env = smooth_envelope(analytic_envelope(filtered), cfg.envelope_smooth_hz)
    raw = detect_peaks(env.upper, rate)
    kept, _ = _filter_peaks_detailed(raw, cfg.theta_intvl_s, cfg.theta_amp_factor)

    n_seg = int(round(GESTURE_DURATION_S * rate))
    segments = []
    for peak in kept:
        start_s = peak.x - GESTURE_BACK_S
        first = int(round(start_s * rate))
        window = np.zeros(n_seg)
        src_lo = max(first, 0)
        src_hi = min(first + n_seg, len(filtered))
        padded = src_lo != first or src_hi != first + n_seg
        if src_hi > src_lo:
            window[src_lo - first : src_hi - first] = filtered.samples[src_lo:src_hi]
        segments.append(
            Segment(window, rate, start_s=start_s, channel=trace.channel, padded=padded)
        )
    return segments


def zero_crossing_rate(seg: Segment) -> float:
    """Sign changes per second; zero samples adopt the previous sign
    (leading zeros the first non-zero sign, so they never count)."""
    if len(seg) == 0:
        raise ValueError("zero-crossing rate of an empty segment is undefined")
    signs = np.sign(seg.samples)
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        return 0.0
    last_nonzero = np.where(signs != 0, np.arange(signs.size), -1)
    np.maximum.accumulate(last_nonzero, out=last_nonzero)
    filled = np.where(
        last_nonzero >= 0, signs[np.maximum(last_nonzero, 0)], signs[nonzero[0]]
    )
    crossings = int(np.count_nonzero(filled[1:] != filled[:-1]))
    return crossings / seg.duration_s


def segment_peak_count(seg: Segment, min_spacing_s: float = 0.015, rel_height: float = 0.25) -> int:
    """Number of prominent rectified-amplitude peaks in the segment."""
    magnitude = np.abs(seg.samples)
    top = magnitude.max() if len(seg) else 0.0
    if top == 0.0:
        return 0
    peaks = detect_peaks(magnitude, seg.sample_rate_hz, min_spacing_s)
    return sum(1 for p in peaks if p.y >= rel_height * top)


def segment_rms(seg: Segment) -> float:
    return float(np.sqrt(np.mean(np.square(seg.samples)))) if len(seg) else 0.0


class ZcrStepTapClassifier(BaseEstimator, ClassifierMixin):
    """Step/tap decision by thresholding the zero-crossing rate.

    The threshold is calibrated as the midpoint between the two class
    means on the fitting segments.
    """

    def fit(self, segments, labels):
        labels = np.asarray(labels)
        classes = np.unique(labels)
        if classes.size != 2:
            raise ValueError(f"expected exactly 2 classes, got {classes.tolist()}")
        zcrs = np.array([zero_crossing_rate(s) for s in segments])
        means = {c: zcrs[labels == c].mean() for c in classes}
        lo, hi = sorted(classes, key=lambda c: means[c])
        self.classes_ = classes
        self.threshold_ = (means[lo] + means[hi]) / 2
        self.low_label_ = lo
        self.high_label_ = hi
        return self

    def predict(self, segments):
        if not hasattr(self, "threshold_"):
            raise NotFittedError("ZcrStepTapClassifier must be fitted before predicting")
        return np.array(
            [
                self.high_label_ if zero_crossing_rate(s) > self.threshold_ else self.low_label_
                for s in segments
            ]
        )


class KnnStepTapClassifier(BaseEstimator, ClassifierMixin):
    """k-NN on (zero-crossing rate, peak count, RMS) per segment."""

    def __init__(self, k: int = 5):
        self.k = k

    @staticmethod
    def _features(segments) -> np.ndarray:
        return np.array(
            [
                [zero_crossing_rate(s), segment_peak_count(s), segment_rms(s)]
                for s in segments
            ]
        )

    def fit(self, segments, labels):
        from .classify import KnnClassifier

        self.knn_ = KnnClassifier(k=self.k).fit(self._features(segments), labels)
        self.classes_ = self.knn_.classes_
        return self

    def predict(self, segments):
        if not hasattr(self, "knn_"):
            raise NotFittedError("KnnStepTapClassifier must be fitted before predicting")
        return self.knn_.predict(self._features(segments))


def classify_step_vs_tap(seg: Segment, method) -> str:
    """Label one segment with a fitted step/tap classifier."""
    return method.predict([seg])[0]
