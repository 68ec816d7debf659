"""File formats: 16-bit PCM WAV, feature CSV, ground-truth sidecars,
and the versioned text model format.

Every format is self-describing (magic/version first) and rejected
loudly on mismatch.
"""

from __future__ import annotations

import csv
import json
import struct
import warnings
from pathlib import Path

import numpy as np

from .audio import AudioTrace, Channel, StereoTrace
from .classify import Dataset, KnnClassifier, LinearSvmClassifier, LogisticRegressionClassifier
from .features import feature_names

MODEL_FORMAT = "earmotion-model"
MODEL_VERSION = 1
_PCM16_SCALE = 32768.0


class WavFormatError(ValueError):
    """Malformed or unsupported WAV data, with the failing byte offset."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


def read_wav(path) -> AudioTrace | StereoTrace:
    """Read a PCM16 RIFF/WAVE file; stereo files split into channels."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError("file too short for a RIFF header", 0)
    if data[0:4] != b"RIFF":
        raise WavFormatError("missing RIFF magic", 0)
    if data[8:12] != b"WAVE":
        raise WavFormatError("missing WAVE form type", 8)

    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        if body_start + size > len(data):
            raise WavFormatError(
                f"chunk {chunk_id!r} claims {size} bytes beyond end of file", offset
            )
        body = data[body_start : body_start + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError("fmt chunk too short", offset)
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = (body, body_start)
        offset = body_start + size + (size & 1)

    if fmt is None:
        raise WavFormatError("no fmt chunk found", offset)
    if payload is None:
        raise WavFormatError("no data chunk found", offset)

    audio_format, channels, rate, _, _, bits = fmt
    if audio_format != 1:
        raise WavFormatError(f"unsupported encoding tag {audio_format} (PCM only)", 12)
    if bits != 16:
        raise WavFormatError(f"unsupported bit depth {bits} (16-bit only)", 12)
    if channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {channels}", 12)

    body, body_start = payload
    if len(body) % (2 * channels) != 0:
        raise WavFormatError("data chunk is not a whole number of frames", body_start)
    ints = np.frombuffer(body, dtype="<i2")
    samples = ints.astype(np.float64) / _PCM16_SCALE
    if channels == 1:
        return AudioTrace(samples, rate, Channel.MONO)
    return StereoTrace(
        AudioTrace(samples[0::2], rate, Channel.LEFT),
        AudioTrace(samples[1::2], rate, Channel.RIGHT),
    )


def _encode_pcm16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(samples, -1.0, 1.0)
    if not np.array_equal(clipped, samples):
        warnings.warn("samples outside [-1, 1] were clipped on write", stacklevel=3)
    return np.clip(np.rint(clipped * _PCM16_SCALE), -32768, 32767).astype("<i2")


def write_wav(trace: AudioTrace | StereoTrace, path) -> None:
    """Write PCM16 little-endian RIFF/WAVE; identical input gives
    identical bytes."""
    if isinstance(trace, StereoTrace):
        channels = 2
        rate = trace.sample_rate_hz
        frames = np.empty(2 * len(trace.left), dtype="<i2")
        frames[0::2] = _encode_pcm16(trace.left.samples)
        frames[1::2] = _encode_pcm16(trace.right.samples)
    else:
        channels = 1
        rate = trace.sample_rate_hz
        frames = _encode_pcm16(trace.samples)
    body = frames.tobytes()
    block_align = 2 * channels
    header = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, channels, rate, rate * block_align, block_align, 16
    )
    header += b"data" + struct.pack("<I", len(body))
    Path(path).write_bytes(header + body)


_KIND_TAGS = {
    LogisticRegressionClassifier: "logreg",
    LinearSvmClassifier: "svm",
    KnnClassifier: "knn",
}


def save_model(model, path) -> None:
    """Serialize a fitted classifier to the versioned JSON text format."""
    kind = _KIND_TAGS.get(type(model))
    if kind is None:
        raise ModelFormatError(f"cannot serialize model of type {type(model).__name__}")
    if not hasattr(model, "classes_"):
        raise ModelFormatError("model must be fitted before saving")
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "dim": int(model.mean_.size),
        "labels": [l.item() if isinstance(l, np.generic) else l for l in model.classes_],
        "mean": model.mean_.tolist(),
        "scale": model.scale_.tolist(),
        "params": {k: v for k, v in model.get_params().items()},
    }
    if kind == "knn":
        doc["exemplars"] = model.exemplars_.tolist()
        doc["exemplar_labels"] = model.exemplar_labels_.tolist()
    else:
        doc["weights"] = model.coef_.tolist()
        doc["bias"] = model.intercept_.tolist()
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_model(path):
    """Reconstruct a classifier saved by :func:`save_model`."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not an earmotion model file (missing format tag)")
    if doc.get("version") != MODEL_VERSION:
        raise ModelVersionError(
            f"unsupported model version {doc.get('version')!r}; expected {MODEL_VERSION}"
        )
    kind = doc.get("kind")
    tags = {tag: cls for cls, tag in _KIND_TAGS.items()}
    if kind not in tags:
        raise ModelVersionError(f"unknown model kind {kind!r}")
    try:
        model = tags[kind](**doc.get("params", {}))
        model.classes_ = np.array(doc["labels"])
        model.mean_ = np.array(doc["mean"], dtype=np.float64)
        model.scale_ = np.array(doc["scale"], dtype=np.float64)
        if kind == "knn":
            model.exemplars_ = np.array(doc["exemplars"], dtype=np.float64)
            model.exemplar_labels_ = np.array(doc["exemplar_labels"], dtype=np.intp)
        else:
            model.coef_ = np.array(doc["weights"], dtype=np.float64)
            model.intercept_ = np.array(doc["bias"], dtype=np.float64)
    except KeyError as exc:
        raise ModelFormatError(f"model file is missing field {exc}") from exc
    return model


def write_features_csv(path, features: np.ndarray, labels=None, subjects=None) -> None:
    """Feature matrix to CSV: named feature columns, then subject, then
    label (label column last)."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    labels = ["" for _ in range(n)] if labels is None else list(labels)
    subjects = ["s0" for _ in range(n)] if subjects is None else list(subjects)
    names = feature_names()
    if features.ndim != 2 or features.shape[1] != len(names):
        raise ValueError(f"expected an (n, {len(names)}) feature matrix, got {features.shape}")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names + ["subject", "label"])
        for row, subject, label in zip(features, subjects, labels):
            writer.writerow([repr(float(v)) for v in row] + [subject, label])


def read_features_csv(path) -> Dataset:
    """Load a labeled feature CSV back into a dataset."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or header[-2:] != ["subject", "label"]:
            raise ValueError(f"{path}: expected a feature CSV ending in subject,label columns")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no feature rows")
    features = np.array([[float(v) for v in row[:-2]] for row in rows])
    subjects = np.array([row[-2] for row in rows])
    labels = np.array([row[-1] for row in rows])
    if any(label == "" for label in labels):
        raise ValueError(f"{path}: every row needs a non-empty label")
    return Dataset(features, labels, subjects)


def write_ground_truth(path, times, kind: str) -> None:
    """One JSON object per line: {"t": seconds, "kind": "step"|"tap"}."""
    with open(path, "w") as handle:
        for t in times:
            handle.write(json.dumps({"t": float(t), "kind": kind}, sort_keys=True) + "\n")


def read_ground_truth(path) -> list[tuple[float, str]]:
    events = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            events.append((float(doc["t"]), str(doc["kind"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad ground-truth line: {exc}") from exc
    return events
