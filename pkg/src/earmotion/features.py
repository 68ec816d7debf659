"""The 187-value per-segment audio descriptor and two-channel fusion.

Layout (index ranges, fixed):

    mfcc        [0, 40)    DCT-II of log mel power, 40 coefficients
    mfcc_delta  [40, 80)   centered frame differences of mfcc
    mfcc_delta2 [80, 120)  centered differences of mfcc_delta
    mel         [120, 160) per-band time means of mel power
    chroma      [160, 172) 12 pitch-class energy folds of the STFT
    contrast    [172, 179) 7 sub-band peak-to-valley log ratios
    tonnetz     [179, 185) tonal-centroid projections of chroma
    rmse        [185, 186) root mean square of the samples
    onsets      [186, 187) count of spectral-flux novelty peaks

Frame-varying blocks are reduced to per-coefficient time means, so a
segment maps to exactly one vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from sklearn.base import BaseEstimator, TransformerMixin

from .audio import AudioTrace, Channel, stft_spectrogram
from .segments import Segment
from .validation import readonly

PIPELINE_RATE_HZ = 1000
STFT_WINDOW = 256
STFT_HOP = 64
N_MELS = 40
N_MFCC = 40
N_CHROMA = 12
N_CONTRAST = 7
N_TONNETZ = 6
FEATURE_LENGTH = 187
SEGMENT_LENGTHS = (400, 1000)  # 0.4 s gestures, 1.0 s activity windows

LOG_FLOOR = 1e-10
CHROMA_REF_HZ = 16.3516  # C0
ONSET_MIN_SEPARATION_FRAMES = 2


class FeatureExtractionError(RuntimeError):
    """Raised when extraction would emit a non-finite value."""


def feature_index_map() -> list[tuple[str, tuple[int, int]]]:
    """Block name to half-open index range; ranges tile [0, 187)."""
    return [
        ("mfcc", (0, 40)),
        ("mfcc_delta", (40, 80)),
        ("mfcc_delta2", (80, 120)),
        ("mel", (120, 160)),
        ("chroma", (160, 172)),
        ("contrast", (172, 179)),
        ("tonnetz", (179, 185)),
        ("rmse", (185, 186)),
        ("onsets", (186, 187)),
    ]


def feature_names() -> list[str]:
    names = []
    for block, (lo, hi) in feature_index_map():
        if hi - lo == 1:
            names.append(block)
        else:
            names.extend(f"{block}_{i:02d}" for i in range(hi - lo))
    return names


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    channel: Channel = Channel.MONO

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (FEATURE_LENGTH,):
            raise ValueError(f"expected {FEATURE_LENGTH} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", readonly(values))


@dataclass(frozen=True)
class FusedFeatureVector:
    """Left vector followed by right vector, 374 values."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (2 * FEATURE_LENGTH,):
            raise ValueError(f"expected {2 * FEATURE_LENGTH} values, got shape {values.shape}")
        object.__setattr__(self, "values", readonly(values))


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


@lru_cache(maxsize=4)
def _mel_filterbank(n_mels: int, n_fft: int, rate_hz: int) -> np.ndarray:
    n_bins = n_fft // 2 + 1
    fft_freqs = np.arange(n_bins) * rate_hz / n_fft
    mel_edges = np.linspace(_hz_to_mel(0.0), _hz_to_mel(rate_hz / 2), n_mels + 2)
    hz_edges = _mel_to_hz(mel_edges)
    bank = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = hz_edges[m], hz_edges[m + 1], hz_edges[m + 2]
        up = (fft_freqs - left) / max(center - left, 1e-12)
        down = (right - fft_freqs) / max(right - center, 1e-12)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
    return bank


@lru_cache(maxsize=4)
def _chroma_fold(n_fft: int, rate_hz: int) -> np.ndarray:
    """12 x n_bins binary matrix folding bins onto pitch classes (DC dropped)."""
    n_bins = n_fft // 2 + 1
    fold = np.zeros((N_CHROMA, n_bins))
    freqs = np.arange(1, n_bins) * rate_hz / n_fft
    classes = np.mod(np.round(12.0 * np.log2(freqs / CHROMA_REF_HZ)).astype(int), 12)
    fold[classes, np.arange(1, n_bins)] = 1.0
    return fold


@lru_cache(maxsize=4)
def _contrast_band_edges(n_fft: int) -> list[tuple[int, int]]:
    """Octave-style split of the bins into N_CONTRAST sub-bands."""
    n_bins = n_fft // 2 + 1
    edges = [0]
    for b in range(N_CONTRAST - 1, -1, -1):
        edges.append(max(edges[-1] + 2, int(round(n_bins / 2 ** b))))
    bands = [(edges[i], min(edges[i + 1], n_bins)) for i in range(N_CONTRAST)]
    bands[-1] = (bands[-1][0], n_bins)
    return bands


def _tonnetz_transform() -> np.ndarray:
    d = np.arange(N_CHROMA)
    radii = (1.0, 1.0, 0.5)
    angles = (7 * np.pi / 6, 3 * np.pi / 2, 2 * np.pi / 3)
    rows = []
    for r, phi in zip(radii, angles):
        rows.append(r * np.sin(d * phi))
        rows.append(r * np.cos(d * phi))
    return np.array(rows)


_TONNETZ = _tonnetz_transform()


def _spectral_contrast(power: np.ndarray, n_fft: int) -> np.ndarray:
    out = np.zeros((N_CONTRAST, power.shape[1]))
    for i, (lo, hi) in enumerate(_contrast_band_edges(n_fft)):
        band = np.sort(power[lo:hi], axis=0)
        m = max(1, int(round(0.02 * (hi - lo))))
        valley = band[:m].mean(axis=0)
        peak = band[-m:].mean(axis=0)
        out[i] = np.log(peak + LOG_FLOOR) - np.log(valley + LOG_FLOOR)
    return out


def _onset_count(mags: np.ndarray) -> int:
    """Spectral-flux novelty peaks above median + 1 MAD, min 2 hops apart.

    The first frame's flux is measured against silence so an attack at
    the segment start still registers.
    """
    prev = np.concatenate([np.zeros((mags.shape[0], 1)), mags[:, :-1]], axis=1)
    flux = np.maximum(mags - prev, 0.0).sum(axis=0)
    median = np.median(flux)
    mad = np.median(np.abs(flux - median))
    threshold = median + mad
    kept: list[int] = []
    for m in range(flux.size):
        left = flux[m - 1] if m > 0 else -np.inf
        right = flux[m + 1] if m < flux.size - 1 else -np.inf
        if not (flux[m] > left and flux[m] > right and flux[m] > threshold):
            continue
        if kept and m - kept[-1] < ONSET_MIN_SEPARATION_FRAMES:
            continue
        kept.append(m)
    return len(kept)


def extract_features(seg: Segment) -> FeatureVector:
    """Deterministic 187-vector for a pipeline-rate segment.

    Accepts only 0.4 s or 1.0 s segments at 1 kHz; any non-finite output
    raises rather than propagating silently.
    """
    if seg.sample_rate_hz != PIPELINE_RATE_HZ:
        raise ValueError(
            f"segments must be at the {PIPELINE_RATE_HZ} Hz pipeline rate, "
            f"got {seg.sample_rate_hz} Hz"
        )
    if len(seg) not in SEGMENT_LENGTHS:
        raise ValueError(
            f"segment must be 0.4 s or 1.0 s ({SEGMENT_LENGTHS} samples), got {len(seg)}"
        )

    spec = stft_spectrogram(
        AudioTrace(seg.samples, seg.sample_rate_hz, seg.channel), STFT_WINDOW, STFT_HOP
    )
    mags = spec.magnitudes
    power = mags ** 2

    mel = _mel_filterbank(N_MELS, STFT_WINDOW, PIPELINE_RATE_HZ) @ power
    log_mel = np.log(np.maximum(mel, LOG_FLOOR))
    mfcc = dct(log_mel, type=2, axis=0, norm="ortho")
    delta = np.gradient(mfcc, axis=1)
    delta2 = np.gradient(delta, axis=1)

    chroma = _chroma_fold(STFT_WINDOW, PIPELINE_RATE_HZ) @ power
    chroma_norm = chroma / np.maximum(chroma.sum(axis=0, keepdims=True), LOG_FLOOR)
    tonnetz = _TONNETZ @ chroma_norm
    contrast = _spectral_contrast(power, STFT_WINDOW)

    rmse = float(np.sqrt(np.mean(np.square(seg.samples))))
    onsets = float(_onset_count(mags))

    values = np.concatenate(
        [
            mfcc.mean(axis=1),
            delta.mean(axis=1),
            delta2.mean(axis=1),
            mel.mean(axis=1),
            chroma.mean(axis=1),
            contrast.mean(axis=1),
            tonnetz.mean(axis=1),
            [rmse],
            [onsets],
        ]
    )
    if values.shape != (FEATURE_LENGTH,) or not np.all(np.isfinite(values)):
        raise FeatureExtractionError("feature extraction produced a malformed vector")
    return FeatureVector(values, seg.channel)


def fuse(left: FeatureVector, right: FeatureVector) -> FusedFeatureVector:
    """Concatenate the left vector with the right vector."""
    if left.channel != Channel.LEFT:
        raise ValueError(f"first argument must be a Left-channel vector, got {left.channel}")
    if right.channel != Channel.RIGHT:
        raise ValueError(f"second argument must be a Right-channel vector, got {right.channel}")
    return FusedFeatureVector(np.concatenate([left.values, right.values]))


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer: a list of segments to an (n, 187) matrix."""

    def fit(self, segments=None, y=None):
        return self

    def transform(self, segments) -> np.ndarray:
        return np.array([extract_features(s).values for s in segments])
