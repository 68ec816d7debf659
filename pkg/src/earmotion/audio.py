"""Audio containers, zero-phase filtering, decimation, and spectra.

All functions are pure: they take immutable traces and return new ones,
so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal as sps

from .validation import as_finite_array, check_rate, readonly

FILTER_ORDER = 4
PIPELINE_RATE_HZ = 1000
DEFAULT_LOWPASS_HZ = 50.0


class Channel(Enum):
    LEFT = "Left"
    RIGHT = "Right"
    MONO = "Mono"


@dataclass(frozen=True)
class AudioTrace:
    """One channel of sampled audio, amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int
    channel: Channel = Channel.MONO

    def __post_init__(self):
        object.__setattr__(self, "sample_rate_hz", check_rate(self.sample_rate_hz))
        samples = as_finite_array(self.samples, "samples")
        object.__setattr__(self, "samples", readonly(samples))
        if not isinstance(self.channel, Channel):
            raise ValueError(f"channel must be a Channel, got {self.channel!r}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "AudioTrace":
        return AudioTrace(samples, self.sample_rate_hz, self.channel)


@dataclass(frozen=True)
class StereoTrace:
    """Synchronized left/right traces of identical length and rate."""

    left: AudioTrace
    right: AudioTrace

    def __post_init__(self):
        if self.left.sample_rate_hz != self.right.sample_rate_hz:
            raise ValueError("left and right must share a sample rate")
        if len(self.left) != len(self.right):
            raise ValueError("left and right must have identical length")

    @property
    def sample_rate_hz(self) -> int:
        return self.left.sample_rate_hz

    @property
    def duration_s(self) -> float:
        return self.left.duration_s


@dataclass(frozen=True)
class Spectrogram:
    """Non-negative STFT magnitudes, shaped [n_freq_bins, n_frames]."""

    magnitudes: np.ndarray
    freq_resolution_hz: float
    hop_s: float

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2:
            raise ValueError(f"magnitudes must be 2-D, got shape {mags.shape}")
        if not np.all(np.isfinite(mags)):
            raise ValueError("magnitudes must be finite")
        if mags.size and mags.min() < 0:
            raise ValueError("magnitudes must be non-negative")
        mags = mags.copy()
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)

    @property
    def n_freq_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[1]


def _lowpass_sos(rate_hz: int, cutoff_hz: float):
    return sps.butter(FILTER_ORDER, cutoff_hz, btype="low", fs=rate_hz, output="sos")


def _edge_pad(rate_hz: int, cutoff_hz: float, n: int) -> int:
    # Reflect padding must span a few filter time constants; a pad of
    # 3x the filter order is far too short when the cutoff sits orders
    # of magnitude below the sample rate.
    return max(0, min(int(3 * FILTER_ORDER * rate_hz / cutoff_hz), n - 1))


def lowpass_array(samples: np.ndarray, rate_hz: int, cutoff_hz: float) -> np.ndarray:
    """Zero-phase 4th-order Butterworth lowpass on a raw sample array.

    Forward-backward application squares the magnitude response and
    cancels phase delay, keeping downstream peak timing unbiased.
    """
    if len(samples) == 0:
        raise ValueError("cannot filter an empty signal")
    nyquist = rate_hz / 2
    if not 0 < cutoff_hz < nyquist:
        raise ValueError(
            f"cutoff_hz must lie in (0, {nyquist}), got {cutoff_hz}"
        )
    sos = _lowpass_sos(rate_hz, cutoff_hz)
    padlen = _edge_pad(rate_hz, cutoff_hz, len(samples))
    # Anti-symmetric reflection: a symmetric mirror would fold energy
    # near the boundary onto itself and displace envelope peaks there.
    return sps.sosfiltfilt(sos, samples, padtype="odd", padlen=padlen)


def lowpass(trace: AudioTrace, cutoff_hz: float) -> AudioTrace:
    """Zero-phase lowpass of a trace; same length and rate."""
    return trace.with_samples(
        lowpass_array(trace.samples, trace.sample_rate_hz, cutoff_hz)
    )


def decimate(trace: AudioTrace, factor: int, prior_cutoff_hz: float | None = None) -> AudioTrace:
    """Keep every ``factor``-th sample of an already band-limited trace.

    The trailing partial frame is dropped, so the output has exactly
    ``len(trace) // factor`` samples. ``prior_cutoff_hz``, when given,
    guards against decimating below the existing lowpass band.
    """
    if not float(factor).is_integer() or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor!r}")
    factor = int(factor)
    if trace.sample_rate_hz % factor != 0:
        raise ValueError(
            f"factor {factor} must divide the sample rate {trace.sample_rate_hz}"
        )
    new_rate = trace.sample_rate_hz // factor
    if prior_cutoff_hz is not None and new_rate / 2 < prior_cutoff_hz:
        raise ValueError(
            f"decimation by {factor} pushes Nyquist ({new_rate / 2} Hz) below "
            f"the prior cutoff ({prior_cutoff_hz} Hz)"
        )
    n = len(trace) - len(trace) % factor
    return AudioTrace(trace.samples[:n:factor], new_rate, trace.channel)


def pipeline_decimation_factor(rate_hz: int, target_hz: int = PIPELINE_RATE_HZ) -> int:
    """Largest divisor of ``rate_hz`` keeping the decimated rate >= target."""
    best = 1
    for f in range(1, rate_hz // target_hz + 1):
        if rate_hz % f == 0:
            best = f
    return best


def preprocess(trace: AudioTrace, cutoff_hz: float = DEFAULT_LOWPASS_HZ,
               target_rate_hz: int = PIPELINE_RATE_HZ) -> AudioTrace:
    """Standard front end: lowpass at ``cutoff_hz`` then decimate to ~1 kHz."""
    filtered = lowpass(trace, cutoff_hz)
    factor = pipeline_decimation_factor(trace.sample_rate_hz, target_rate_hz)
    return decimate(filtered, factor, prior_cutoff_hz=cutoff_hz)


def band_energy_ratio(trace: AudioTrace, split_hz: float) -> tuple[float, float]:
    """Fractions of FFT energy below and at-or-above ``split_hz``.

    The trace is zero-padded to the next power of two so the fractions
    do not depend on awkward lengths. Raises on a zero-energy trace.
    """
    nyquist = trace.sample_rate_hz / 2
    if not 0 < split_hz < nyquist:
        raise ValueError(f"split_hz must lie in (0, {nyquist}), got {split_hz}")
    if len(trace) == 0:
        raise ValueError("band energy of an empty trace is undefined")
    n_fft = 1 << (len(trace) - 1).bit_length()
    energy = np.abs(np.fft.rfft(trace.samples, n_fft)) ** 2
    freqs = np.fft.rfftfreq(n_fft, 1.0 / trace.sample_rate_hz)
    low = float(energy[freqs < split_hz].sum())
    high = float(energy[freqs >= split_hz].sum())
    total = low + high
    if total == 0.0:
        raise ValueError("band energy ratio is undefined for a zero-energy trace")
    return low / total, high / total


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def stft_spectrogram(trace: AudioTrace, window_len: int, hop: int) -> Spectrogram:
    """Hann-windowed STFT magnitudes without padding or centering.

    Frames start at multiples of ``hop``; the count is
    ``1 + (len - window_len) // hop`` and trailing samples are dropped.
    """
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    if window_len < 2:
        raise ValueError(f"window_len must be >= 2, got {window_len}")
    if window_len > len(trace):
        raise ValueError(
            f"trace ({len(trace)} samples) is shorter than the window ({window_len})"
        )
    n_frames = 1 + (len(trace) - window_len) // hop
    frames = np.lib.stride_tricks.sliding_window_view(trace.samples, window_len)
    frames = frames[:: hop][:n_frames]
    mags = np.abs(np.fft.rfft(frames * hann_periodic(window_len), axis=1)).T
    return Spectrogram(
        magnitudes=mags,
        freq_resolution_hz=trace.sample_rate_hz / window_len,
        hop_s=hop / trace.sample_rate_hz,
    )
