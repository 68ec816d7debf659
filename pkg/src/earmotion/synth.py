"""Synthetic-signal oracles with exact ground truth.

Walking traces are a train of multi-spike strike bursts with silence in
between; taps are one or two spikes. Every generator is a pure function
of its spec, so identical seeds give bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioTrace
from .classify import Dataset

MIN_CADENCE_HZ = 1.0
MAX_CADENCE_HZ = 3.3
WALK_LEAD_S = 0.5
BURST_HALF_S = 0.06
SPIKE_DURATION_S = 0.08
TAP_MIN_SPACING_S = 0.4
TAP_MARGIN_LO_S = 0.2
TAP_MARGIN_HI_S = 0.3


@dataclass(frozen=True)
class WalkSpec:
    n_steps: int
    cadence_hz: float = 2.0
    strike_spikes: int = 6
    snr_db: float | None = None
    seed: int = 0
    rate_hz: int = 48000
    duration_s: float | None = None

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        if not MIN_CADENCE_HZ <= self.cadence_hz <= MAX_CADENCE_HZ:
            raise ValueError(
                f"cadence_hz must lie in [{MIN_CADENCE_HZ}, {MAX_CADENCE_HZ}], "
                f"got {self.cadence_hz}"
            )
        if self.strike_spikes < 1:
            raise ValueError("strike_spikes must be >= 1")

    @property
    def effective_duration_s(self) -> float:
        minimum = self.n_steps / self.cadence_hz + 2 * WALK_LEAD_S
        if self.duration_s is None:
            return minimum
        if self.duration_s < minimum:
            raise ValueError(
                f"duration_s={self.duration_s} cannot hold {self.n_steps} steps "
                f"at {self.cadence_hz} Hz (needs >= {minimum:.2f} s)"
            )
        return self.duration_s


@dataclass(frozen=True)
class TapsSpec:
    times_s: tuple[float, ...]
    spike_count: int = 1
    seed: int = 0
    rate_hz: int = 48000
    duration_s: float | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times_s)
        object.__setattr__(self, "times_s", times)
        if self.spike_count < 1:
            raise ValueError("spike_count must be >= 1")
        if any(b - a < TAP_MIN_SPACING_S for a, b in zip(times, times[1:])):
            raise ValueError(f"tap times must be at least {TAP_MIN_SPACING_S} s apart")
        duration = self.effective_duration_s
        for t in times:
            if not TAP_MARGIN_LO_S <= t <= duration - TAP_MARGIN_HI_S:
                raise ValueError(
                    f"tap at {t} s falls outside [{TAP_MARGIN_LO_S}, "
                    f"{duration - TAP_MARGIN_HI_S:.2f}] s"
                )

    @property
    def effective_duration_s(self) -> float:
        if self.duration_s is not None:
            return self.duration_s
        last = max(self.times_s) if self.times_s else 0.0
        return last + TAP_MARGIN_HI_S + 0.2


@dataclass(frozen=True)
class MusicSpec:
    freqs_hz: tuple[float, ...]
    gains: tuple[float, ...] | None = None
    seed: int = 0
    rate_hz: int = 48000
    duration_s: float = 2.0

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.freqs_hz)
        object.__setattr__(self, "freqs_hz", freqs)
        for f in freqs:
            if f <= 50.0:
                raise ValueError(f"music tones must sit above 50 Hz, got {f}")
            if f >= self.rate_hz / 2:
                raise ValueError(f"tone {f} Hz is at or above Nyquist")
        if self.gains is not None and len(self.gains) != len(freqs):
            raise ValueError("gains must match freqs_hz in length")


@dataclass(frozen=True)
class BlobsSpec:
    n_classes: int
    dim: int = 8
    margin: float = 5.0
    per_class: int = 50
    n_subjects: int = 1
    subject_shift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.per_class < 1 or self.dim < 1 or self.n_subjects < 1:
            raise ValueError("per_class, dim, and n_subjects must be >= 1")


def _add_spike(x: np.ndarray, rate: int, start_s: float, freq_hz: float, amp: float) -> None:
    """Hann-windowed damped oscillation added in place."""
    n = len(x)
    first = int(round(start_s * rate))
    length = int(round(SPIKE_DURATION_S * rate))
    k0 = max(first, 0)
    k1 = min(first + length, n)
    if k1 <= k0:
        return
    u = (np.arange(k0, k1) - first) / rate
    window = 0.5 - 0.5 * np.cos(2 * np.pi * u / SPIKE_DURATION_S)
    x[k0:k1] += amp * np.sin(2 * np.pi * freq_hz * u) * window


def synth_walk(spec: WalkSpec) -> tuple[AudioTrace, tuple[float, ...]]:
    """Walking trace plus the exact strike times.

    Each step is a burst of ``strike_spikes`` damped oscillations in the
    15-40 Hz band spread over ~120 ms, centered on the step time.
    """
    rng = np.random.default_rng(spec.seed)
    rate = spec.rate_hz
    duration = spec.effective_duration_s
    n = int(round(duration * rate))
    x = np.zeros(n)
    times = tuple(WALK_LEAD_S + i / spec.cadence_hz for i in range(spec.n_steps))
    spike_gap = 2 * BURST_HALF_S / spec.strike_spikes
    for t in times:
        step_amp = rng.uniform(0.8, 1.0)
        for j in range(spec.strike_spikes):
            _add_spike(
                x,
                rate,
                start_s=t - BURST_HALF_S + j * spike_gap,
                freq_hz=rng.uniform(18.0, 40.0),
                amp=step_amp * rng.uniform(0.5, 1.0),
            )
    peak = np.max(np.abs(x)) if n else 0.0
    if peak > 0:
        x *= 0.7 / peak
    if spec.snr_db is not None:
        rms = float(np.sqrt(np.mean(np.square(x))))
        sigma = rms / 10 ** (spec.snr_db / 20) if rms > 0 else 10 ** (-spec.snr_db / 20)
        x = x + rng.normal(0.0, sigma, n)
    return AudioTrace(x, rate), times


def synth_taps(spec: TapsSpec) -> tuple[AudioTrace, tuple[float, ...]]:
    """Tap trace plus the exact tap times; taps use few, slower spikes
    than walk strikes so their zero-crossing rate stays lower."""
    rng = np.random.default_rng(spec.seed)
    rate = spec.rate_hz
    n = int(round(spec.effective_duration_s * rate))
    x = np.zeros(n)
    for t in spec.times_s:
        for j in range(spec.spike_count):
            _add_spike(
                x,
                rate,
                start_s=t - SPIKE_DURATION_S / 2 + j * 0.03,
                freq_hz=rng.uniform(15.0, 18.0),
                amp=rng.uniform(0.8, 1.0),
            )
    peak = np.max(np.abs(x)) if n else 0.0
    if peak > 0:
        x *= 0.7 / peak
    return AudioTrace(x, rate), spec.times_s


def synth_music(spec: MusicSpec) -> AudioTrace:
    """Sum of tones above the motion band; peak-normalized to 0.5."""
    rng = np.random.default_rng(spec.seed)
    rate = spec.rate_hz
    n = int(round(spec.duration_s * rate))
    t = np.arange(n) / rate
    gains = spec.gains or tuple(1.0 for _ in spec.freqs_hz)
    x = np.zeros(n)
    for freq, gain in zip(spec.freqs_hz, gains):
        x += gain * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    peak = np.max(np.abs(x)) if n else 0.0
    if peak > 0:
        x *= 0.5 / peak
    return AudioTrace(x, rate)


def synth_blobs(spec: BlobsSpec) -> Dataset:
    """Gaussian class clusters (unit sigma) with a guaranteed minimum
    pairwise center distance of ``margin``; optional per-subject mean
    shift emulates between-person style differences."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(size=(spec.n_classes, spec.dim))
    deltas = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt((deltas ** 2).sum(axis=-1))
    min_dist = dists[~np.eye(spec.n_classes, dtype=bool)].min()
    if min_dist <= 0:
        min_dist = 1e-9
    centers *= spec.margin / min_dist

    rows_x, rows_y, rows_s = [], [], []
    for s in range(spec.n_subjects):
        offset = (
            rng.normal(size=spec.dim) * spec.subject_shift
            if spec.subject_shift > 0
            else np.zeros(spec.dim)
        )
        for label in range(spec.n_classes):
            samples = centers[label] + offset + rng.normal(size=(spec.per_class, spec.dim))
            rows_x.append(samples)
            rows_y.extend([label] * spec.per_class)
            rows_s.extend([f"s{s}"] * spec.per_class)
    return Dataset(np.concatenate(rows_x), np.array(rows_y), np.array(rows_s))


def cut_event_segments(trace: AudioTrace, times, label: str | None = None):
    """Pipeline-rate 0.4 s windows around known event times.

    Synthetic traces are band-limited by construction, so plain
    decimation suffices and silent spans stay exactly zero. Filtered
    pipelines leave numerical ringing in silence, which would poison
    zero-crossing statistics.
    """
    from .audio import decimate, pipeline_decimation_factor
    from .segments import GESTURE_BACK_S, GESTURE_FWD_S, Segment

    factor = pipeline_decimation_factor(trace.sample_rate_hz)
    low = decimate(trace, factor)
    rate = low.sample_rate_hz
    n_seg = int(round((GESTURE_BACK_S + GESTURE_FWD_S) * rate))
    segments = []
    for t in times:
        first = int(round((t - GESTURE_BACK_S) * rate))
        window = np.zeros(n_seg)
        src_lo = max(first, 0)
        src_hi = min(first + n_seg, len(low))
        if src_hi > src_lo:
            window[src_lo - first : src_hi - first] = low.samples[src_lo:src_hi]
        segments.append(
            Segment(
                window,
                rate,
                start_s=t - GESTURE_BACK_S,
                label=label,
                padded=src_lo != first or src_hi != first + n_seg,
            )
        )
    return segments


def match_events(detected, truth, tolerance_s: float = 0.15) -> int:
    """Greedy one-to-one matches between detected and true event times."""
    detected = sorted(detected)
    truth = sorted(truth)
    used = [False] * len(detected)
    hits = 0
    for t in truth:
        best = None
        best_err = tolerance_s
        for i, d in enumerate(detected):
            if used[i]:
                continue
            err = abs(d - t)
            if err < best_err:
                best_err = err
                best = i
        if best is not None:
            used[best] = True
            hits += 1
    return hits
