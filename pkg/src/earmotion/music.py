"""Music/speech robustness analysis: superposition, spectrogram SSIM,
and Pearson correlation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .audio import AudioTrace, DEFAULT_LOWPASS_HZ, Spectrogram, band_energy_ratio, preprocess, stft_spectrogram

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DB_RANGE = 80.0
_STFT_WINDOW = 256
_STFT_HOP = 64


@dataclass(frozen=True)
class SimilarityReport:
    ssim: float
    pearson: float
    low_band_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.ssim <= 1.0:
            raise ValueError(f"ssim must lie in [0, 1], got {self.ssim}")
        if not -1.0 <= self.pearson <= 1.0:
            raise ValueError(f"pearson must lie in [-1, 1], got {self.pearson}")
        if not 0.0 <= self.low_band_fraction <= 1.0:
            raise ValueError(f"low_band_fraction must lie in [0, 1], got {self.low_band_fraction}")

    def to_dict(self) -> dict:
        return {
            "ssim": self.ssim,
            "pearson": self.pearson,
            "low_band_fraction": self.low_band_fraction,
        }


def superimpose(activity: AudioTrace, interference: AudioTrace, gain: float = 1.0) -> AudioTrace:
    """Sample-wise sum; interference is looped or truncated to fit.

    If the sum leaves [-1, 1] the whole result is rescaled by its peak
    (preserving the waveform shape) and a warning is issued.
    """
    if activity.sample_rate_hz != interference.sample_rate_hz:
        raise ValueError(
            f"sample rates differ: {activity.sample_rate_hz} vs {interference.sample_rate_hz}"
        )
    n = len(activity)
    other = interference.samples
    if len(other) == 0:
        other = np.zeros(n)
    elif len(other) < n:
        other = np.tile(other, -(-n // len(other)))[:n]
    else:
        other = other[:n]
    out = activity.samples + gain * other
    peak = float(np.max(np.abs(out))) if n else 0.0
    if peak > 1.0:
        warnings.warn(f"superposition peak {peak:.3f} > 1; rescaled to unit range", stacklevel=2)
        out = out / peak
    return activity.with_samples(out)


def _window_stats(image: np.ndarray, win: int):
    """Exact valid-window means/variances/covariance inputs via cumsum."""
    padded = np.zeros((image.shape[0] + 1, image.shape[1] + 1))
    padded[1:, 1:] = np.cumsum(np.cumsum(image, axis=0), axis=1)
    return (
        padded[win:, win:] - padded[:-win, win:] - padded[win:, :-win] + padded[:-win, :-win]
    )


def _ssim_mean(a: np.ndarray, b: np.ndarray) -> float:
    win = SSIM_WINDOW
    n = win * win
    level = max(float(a.max()), float(b.max()))
    if level <= 0.0:
        return 1.0  # both images are identically zero
    c1 = (SSIM_K1 * level) ** 2
    c2 = (SSIM_K2 * level) ** 2

    sum_a = _window_stats(a, win)
    sum_b = _window_stats(b, win)
    sum_aa = _window_stats(a * a, win)
    sum_bb = _window_stats(b * b, win)
    sum_ab = _window_stats(a * b, win)

    mu_a = sum_a / n
    mu_b = sum_b / n
    # sample (n-1) normalization, matching the uniform-window convention
    var_a = np.maximum(sum_aa - n * mu_a ** 2, 0.0) / (n - 1)
    var_b = np.maximum(sum_bb - n * mu_b ** 2, 0.0) / (n - 1)
    cov = (sum_ab - n * mu_a * mu_b) / (n - 1)

    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    return float(np.clip(ssim_map.mean(), 0.0, 1.0))


def spectrogram_ssim(a: Spectrogram, b: Spectrogram) -> float:
    """Structural similarity between two equally shaped spectrograms.

    Uses an 8x8 sliding window with the canonical stabilizers
    C1=(0.01 L)^2 and C2=(0.03 L)^2, where L is the maximum value across
    both inputs; the mean over windows is clamped to [0, 1].
    """
    if a.magnitudes.shape != b.magnitudes.shape:
        raise ValueError(
            f"spectrogram shapes differ: {a.magnitudes.shape} vs {b.magnitudes.shape}"
        )
    if min(a.magnitudes.shape) < SSIM_WINDOW:
        raise ValueError(
            f"spectrograms must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, "
            f"got {a.magnitudes.shape}"
        )
    return _ssim_mean(a.magnitudes, b.magnitudes)


def pearson(a, b) -> float:
    """Product-moment correlation; constant inputs are rejected."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if a.size < 2:
        raise ValueError("correlation needs at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    norm = float(np.linalg.norm(da) * np.linalg.norm(db))
    if norm == 0.0:
        raise ValueError("correlation is undefined for constant input")
    return float(np.clip(np.dot(da, db) / norm, -1.0, 1.0))


def _db_image(spec: Spectrogram) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(spec.magnitudes, 1e-10))


def music_impact(
    activity: AudioTrace,
    music: AudioTrace,
    gain: float = 1.0,
    cutoff_hz: float = DEFAULT_LOWPASS_HZ,
) -> SimilarityReport:
    """Quantify how much superimposed music perturbs the filtered signal.

    SSIM compares dB spectrograms of the filtered clean activity and
    the filtered superposition (both shifted onto a common [0, 80] dB
    scale); Pearson correlates their time-domain samples; the low-band
    fraction reports the music's own sub-cutoff energy share.
    """
    mixed = superimpose(activity, music, gain)
    clean = preprocess(activity, cutoff_hz)
    noisy = preprocess(mixed, cutoff_hz)

    spec_clean = stft_spectrogram(clean, _STFT_WINDOW, _STFT_HOP)
    spec_noisy = stft_spectrogram(noisy, _STFT_WINDOW, _STFT_HOP)
    img_clean = _db_image(spec_clean)
    img_noisy = _db_image(spec_noisy)
    top = max(img_clean.max(), img_noisy.max())
    img_clean = np.clip(img_clean - top + DB_RANGE, 0.0, DB_RANGE)
    img_noisy = np.clip(img_noisy - top + DB_RANGE, 0.0, DB_RANGE)

    return SimilarityReport(
        ssim=_ssim_mean(img_noisy, img_clean),
        pearson=pearson(noisy.samples, clean.samples),
        low_band_fraction=band_energy_ratio(music, cutoff_hz)[0],
    )
