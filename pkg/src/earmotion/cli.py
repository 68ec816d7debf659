"""Command-line interface.

Machine-readable results go to stdout as JSON lines; everything meant
for humans (diagnostics, verbose config echoes, latency reports) goes
to stderr. With fixed inputs and seed, stdout is byte-identical across
runs.
"""

from __future__ import annotations

import json
import time
import warnings
from functools import wraps
from pathlib import Path

import click
import numpy as np

from . import classify as clf
from . import io as eio
from .audio import AudioTrace, StereoTrace, preprocess
from .features import FeatureExtractor
from .fittest import run_fit_test
from .music import music_impact
from .segments import extract_gestures, sliding_windows
from .steps import StepCounterConfig, count_steps
from .synth import BlobsSpec, MusicSpec, TapsSpec, WalkSpec, synth_blobs, synth_music, synth_taps, synth_walk

LATENCY_BUDGET_MS = 50.0


def emit(obj) -> None:
    click.echo(json.dumps(obj, sort_keys=True))


def diag(message: str) -> None:
    click.echo(message, err=True)


def _echo_config(ctx, **params) -> None:
    if ctx.obj.get("verbose"):
        diag(f"config: {json.dumps(params, sort_keys=True, default=str)}")


def handles_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, OSError, RuntimeError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def _load_traces(path) -> list[AudioTrace]:
    loaded = eio.read_wav(path)
    if isinstance(loaded, StereoTrace):
        return [loaded.left, loaded.right]
    return [loaded]


def _step_config(theta_intvl, theta_amp_factor, delta_align, cutoff, smooth) -> StepCounterConfig:
    return StepCounterConfig(
        theta_intvl_s=theta_intvl,
        theta_amp_factor=theta_amp_factor,
        delta_align_s=delta_align,
        lowpass_cutoff_hz=cutoff,
        envelope_smooth_hz=smooth,
    )


step_options = [
    click.option("--theta-intvl", default=0.3, show_default=True, help="Minimum peak interval (s)."),
    click.option("--theta-amp-factor", default=0.3, show_default=True, help="Amplitude threshold as a fraction of the mean peak amplitude."),
    click.option("--delta-align", default=0.2, show_default=True, help="Maximum upper/lower peak alignment interval (s)."),
    click.option("--cutoff", default=50.0, show_default=True, help="Lowpass cutoff (Hz)."),
    click.option("--smooth", default=5.0, show_default=True, help="Envelope smoothing cutoff (Hz)."),
]


def with_options(options):
    def apply(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return apply


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--rate", default=48000, show_default=True, help="Sample rate for generated audio (Hz).")
@click.option("--seed", default=0, show_default=True, help="Seed for anything randomized.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file of per-command defaults; explicit flags win.")
@click.option("--verbose", is_flag=True, help="Echo the effective configuration to stderr.")
@click.pass_context
def main(ctx, rate, seed, config_path, verbose):
    """In-ear acoustic motion sensing toolbox."""
    # library warnings become one-line stderr diagnostics
    warnings.showwarning = lambda message, *args, **kwargs: diag(f"warning: {message}")
    if config_path:
        ctx.default_map = json.loads(Path(config_path).read_text())
    ctx.obj = {"rate": rate, "seed": seed, "verbose": verbose}


@main.command("count-steps")
@click.argument("wav", type=click.Path())
@with_options(step_options)
@click.pass_context
@handles_errors
def count_steps_cmd(ctx, wav, theta_intvl, theta_amp_factor, delta_align, cutoff, smooth):
    """Count steps in a WAV recording, one JSON line per channel."""
    cfg = _step_config(theta_intvl, theta_amp_factor, delta_align, cutoff, smooth)
    _echo_config(ctx, wav=wav, **cfg.__dict__)
    if not Path(wav).exists():
        raise click.ClickException(f"input file not found: {wav}")
    for trace in _load_traces(wav):
        report = count_steps(trace, cfg)
        emit(
            {
                "channel": trace.channel.value,
                "duration_s": trace.duration_s,
                "file": str(wav),
                "low_confidence": report.low_confidence,
                "step_times": list(report.step_times),
                "steps": report.count,
            }
        )


@main.command("segment")
@click.argument("wav", type=click.Path())
@click.option("--kind", type=click.Choice(["windows", "gestures"]), default="windows", show_default=True)
@click.option("--window-s", default=1.0, show_default=True, help="Sliding window length (s).")
@click.option("--overlap", default=0.5, show_default=True, help="Sliding window overlap fraction.")
@click.pass_context
@handles_errors
def segment_cmd(ctx, wav, kind, window_s, overlap):
    """Cut a recording into activity windows or gesture segments."""
    _echo_config(ctx, wav=wav, kind=kind, window_s=window_s, overlap=overlap)
    if not Path(wav).exists():
        raise click.ClickException(f"input file not found: {wav}")
    for trace in _load_traces(wav):
        segments = (
            sliding_windows(preprocess(trace), window_s, overlap)
            if kind == "windows"
            else extract_gestures(trace)
        )
        for index, seg in enumerate(segments):
            emit(
                {
                    "channel": seg.channel.value,
                    "duration_s": seg.duration_s,
                    "index": index,
                    "kind": kind[:-1],
                    "padded": seg.padded,
                    "start_s": seg.start_s,
                }
            )


@main.command("features")
@click.argument("wav", type=click.Path())
@click.option("--kind", type=click.Choice(["windows", "gestures"]), default="windows", show_default=True)
@click.option("--window-s", default=1.0, show_default=True)
@click.option("--overlap", default=0.5, show_default=True)
@click.option("--label", default="", help="Label written for every row.")
@click.option("--subject", default="s0", show_default=True, help="Subject id written for every row.")
@click.option("-o", "--output", required=True, type=click.Path(), help="Destination CSV.")
@click.pass_context
@handles_errors
def features_cmd(ctx, wav, kind, window_s, overlap, label, subject, output):
    """Extract 187-value feature vectors into a CSV."""
    _echo_config(ctx, wav=wav, kind=kind, output=output, label=label, subject=subject)
    if not Path(wav).exists():
        raise click.ClickException(f"input file not found: {wav}")
    all_rows = []
    for trace in _load_traces(wav):
        segments = (
            sliding_windows(preprocess(trace), window_s, overlap)
            if kind == "windows"
            else extract_gestures(trace)
        )
        all_rows.extend(FeatureExtractor().transform(segments) if segments else [])
    if not all_rows:
        raise click.ClickException(f"no segments of kind {kind!r} found in {wav}")
    matrix = np.array(all_rows)
    eio.write_features_csv(
        output, matrix, labels=[label] * len(matrix), subjects=[subject] * len(matrix)
    )
    emit({"csv": str(output), "kind": kind, "segments": int(len(matrix))})


MODEL_CHOICES = click.Choice(["logreg", "lr", "svm", "knn"])


@main.command("train")
@click.argument("features_csv", type=click.Path())
@click.option("--model", "kind", type=MODEL_CHOICES, default="logreg", show_default=True)
@click.option("--k", default=5, show_default=True, help="Neighbour count for knn.")
@click.option("-o", "--output", required=True, type=click.Path(), help="Destination model file.")
@click.pass_context
@handles_errors
def train_cmd(ctx, features_csv, kind, k, output):
    """Train a classifier on a labeled feature CSV."""
    _echo_config(ctx, features_csv=features_csv, kind=kind, output=output)
    if not Path(features_csv).exists():
        raise click.ClickException(f"input file not found: {features_csv}")
    dataset = eio.read_features_csv(features_csv)
    params = {"k": k} if kind == "knn" else {}
    model = clf.train(dataset, kind, **params)
    eio.save_model(model, output)
    emit(
        {
            "classes": [str(c) for c in model.classes_],
            "kind": kind,
            "model": str(output),
            "n_samples": int(len(dataset)),
        }
    )


@main.command("classify")
@click.argument("wav", type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path(), help="Trained model file.")
@click.option("--kind", type=click.Choice(["windows", "gestures"]), default="gestures", show_default=True)
@click.option("--latency", is_flag=True, help="Report per-stage wall time on stderr.")
@click.pass_context
@handles_errors
def classify_cmd(ctx, wav, model_path, kind, latency):
    """Classify segments of a recording with a trained model."""
    _echo_config(ctx, wav=wav, model=model_path, kind=kind)
    for path in (wav, model_path):
        if not Path(path).exists():
            raise click.ClickException(f"input file not found: {path}")
    model = eio.load_model(model_path)
    for trace in _load_traces(wav):
        t0 = time.perf_counter()
        processed = preprocess(trace)
        t1 = time.perf_counter()
        segments = (
            sliding_windows(processed)
            if kind == "windows"
            else extract_gestures(trace)
        )
        matrix = FeatureExtractor().transform(segments) if segments else np.empty((0, 187))
        t2 = time.perf_counter()
        labels = model.predict(matrix) if len(matrix) else []
        t3 = time.perf_counter()
        for index, (seg, label) in enumerate(zip(segments, labels)):
            emit(
                {
                    "channel": seg.channel.value,
                    "index": index,
                    "label": str(label),
                    "start_s": seg.start_s,
                }
            )
        if latency:
            filter_ms = (t1 - t0) * 1000
            feature_ms = (t2 - t1) * 1000
            inference_ms = (t3 - t2) * 1000
            total = filter_ms + feature_ms + inference_ms
            diag(
                f"latency[{trace.channel.value}]: filter={filter_ms:.2f}ms "
                f"feature={feature_ms:.2f}ms inference={inference_ms:.2f}ms "
                f"total={total:.2f}ms"
            )
            if total > LATENCY_BUDGET_MS:
                diag(f"warning: latency {total:.2f}ms exceeds the {LATENCY_BUDGET_MS:.0f}ms budget")


@main.command("evaluate")
@click.argument("features_csv", type=click.Path())
@click.option("--protocol", type=click.Choice(["holdout", "cv", "loo", "personalize"]), default="cv", show_default=True)
@click.option("--model", "kind", type=MODEL_CHOICES, default="logreg", show_default=True)
@click.option("--folds", default=5, show_default=True, help="Fold count for cv.")
@click.option("--test-fraction", default=0.2, show_default=True, help="Held-out fraction for holdout.")
@click.option("--personal-n", default=10, show_default=True, help="Personal samples per class for personalize.")
@click.pass_context
@handles_errors
def evaluate_cmd(ctx, features_csv, protocol, kind, folds, test_fraction, personal_n):
    """Run an evaluation protocol over a labeled feature CSV."""
    seed = ctx.obj["seed"]
    _echo_config(ctx, features_csv=features_csv, protocol=protocol, kind=kind, seed=seed)
    if not Path(features_csv).exists():
        raise click.ClickException(f"input file not found: {features_csv}")
    dataset = eio.read_features_csv(features_csv)
    if protocol == "holdout":
        metrics = clf.holdout(dataset, kind, test_fraction=test_fraction, seed=seed)
        emit({"protocol": protocol, **metrics.to_dict()})
    elif protocol == "cv":
        metrics = clf.kfold_cv(dataset, kind, k=folds, seed=seed)
        emit({"protocol": protocol, **metrics.to_dict()})
    elif protocol == "loo":
        for subject, metrics in clf.leave_one_subject_out(dataset, kind).items():
            emit({"protocol": protocol, "subject": str(subject), **metrics.to_dict()})
    else:
        results = clf.evaluate_personalization(dataset, kind, personal_n, seed=seed)
        for subject, metrics in results.items():
            emit(
                {
                    "personal_n": personal_n,
                    "protocol": protocol,
                    "subject": str(subject),
                    **metrics.to_dict(),
                }
            )


@main.command("fit-test")
@click.option("--base300", type=click.Path(), default=None, help="Unworn 300 Hz recording.")
@click.option("--base1500", type=click.Path(), default=None, help="Unworn 1500 Hz recording.")
@click.option("--test300", type=click.Path(), default=None, help="Worn 300 Hz recording.")
@click.option("--test1500", type=click.Path(), default=None, help="Worn 1500 Hz recording.")
@click.option("--base", "base_stereo", type=click.Path(), default=None,
              help="Unworn stereo recording: left=300 Hz probe, right=1500 Hz probe.")
@click.option("--test", "test_stereo", type=click.Path(), default=None,
              help="Worn stereo recording, same layout.")
@click.pass_context
@handles_errors
def fit_test_cmd(ctx, base300, base1500, test300, test1500, base_stereo, test_stereo):
    """Check earbud sealing from probe-tone recordings."""
    _echo_config(ctx, base300=base300, base1500=base1500, test300=test300,
                 test1500=test1500, base=base_stereo, test=test_stereo)
    four = (base300, base1500, test300, test1500)
    if base_stereo and test_stereo:
        paths = (base_stereo, test_stereo)
    elif all(four):
        paths = four
    else:
        raise click.UsageError(
            "provide either all of --base300/--base1500/--test300/--test1500 "
            "or both --base and --test stereo recordings"
        )
    for path in paths:
        if not Path(path).exists():
            raise click.ClickException(f"input file not found: {path}")

    if base_stereo and test_stereo:
        recordings = []
        for path in (base_stereo, test_stereo):
            loaded = eio.read_wav(path)
            if not isinstance(loaded, StereoTrace):
                raise click.ClickException(f"{path} must be a stereo probe recording")
            recordings.extend([loaded.left, loaded.right])
        result = run_fit_test(*recordings)
    else:
        traces = []
        for path in four:
            loaded = eio.read_wav(path)
            if isinstance(loaded, StereoTrace):
                loaded = loaded.left
            traces.append(loaded)
        result = run_fit_test(*traces)
    emit(result.to_dict())


@main.command("music-impact")
@click.argument("activity_wav", type=click.Path())
@click.argument("music_wav", type=click.Path())
@click.option("--gain", default=1.0, show_default=True, help="Gain applied to the music before summation.")
@click.option("--band-csv", type=click.Path(), default=None, help="Optional CSV of band-energy fractions.")
@click.pass_context
@handles_errors
def music_impact_cmd(ctx, activity_wav, music_wav, gain, band_csv):
    """Measure how superimposed music perturbs the filtered signal."""
    from .audio import band_energy_ratio
    from .music import superimpose

    _echo_config(ctx, activity=activity_wav, music=music_wav, gain=gain)
    for path in (activity_wav, music_wav):
        if not Path(path).exists():
            raise click.ClickException(f"input file not found: {path}")
    activity = _load_traces(activity_wav)[0]
    music = _load_traces(music_wav)[0]
    report = music_impact(activity, music, gain)
    emit(report.to_dict())
    if band_csv:
        mixed = superimpose(activity, music, gain)
        with open(band_csv, "w") as handle:
            handle.write("name,low_fraction,high_fraction\n")
            for name, trace in (("activity", activity), ("music", music), ("superposed", mixed)):
                low, high = band_energy_ratio(trace, 50.0)
                handle.write(f"{name},{low!r},{high!r}\n")
        diag(f"band energies written to {band_csv}")


@main.command("synth")
@click.option("--kind", type=click.Choice(["walk", "taps", "music", "blobs"]), default="walk", show_default=True)
@click.option("--n-steps", default=20, show_default=True)
@click.option("--cadence", default=2.0, show_default=True, help="Steps per second for walks.")
@click.option("--snr-db", default=None, type=float, help="Additive white-noise SNR; omit for none.")
@click.option("--times", default=None, help="Comma-separated tap times in seconds.")
@click.option("--freqs", default="440", show_default=True, help="Comma-separated music tone frequencies (Hz).")
@click.option("--duration", default=None, type=float, help="Duration override (s).")
@click.option("--n-classes", default=5, show_default=True, help="Class count for blobs.")
@click.option("--per-class", default=50, show_default=True, help="Rows per class per subject for blobs.")
@click.option("--margin", default=5.0, show_default=True, help="Minimum center distance for blobs.")
@click.option("--n-subjects", default=1, show_default=True, help="Subject count for blobs.")
@click.option("--subject-shift", default=0.0, show_default=True, help="Per-subject mean shift for blobs.")
@click.option("-o", "--output", required=True, type=click.Path(), help="Destination WAV (or CSV for blobs).")
@click.pass_context
@handles_errors
def synth_cmd(ctx, kind, n_steps, cadence, snr_db, times, freqs, duration,
              n_classes, per_class, margin, n_subjects, subject_shift, output):
    """Generate a synthetic fixture plus its ground-truth sidecar."""
    rate = ctx.obj["rate"]
    seed = ctx.obj["seed"]
    _echo_config(ctx, kind=kind, rate=rate, seed=seed, output=output)
    truth_path = str(Path(output).with_suffix(".truth.jsonl"))
    if kind == "walk":
        spec = WalkSpec(n_steps=n_steps, cadence_hz=cadence, snr_db=snr_db,
                        seed=seed, rate_hz=rate, duration_s=duration)
        trace, truth = synth_walk(spec)
        eio.write_wav(trace, output)
        eio.write_ground_truth(truth_path, truth, "step")
        emit({"events": len(truth), "kind": kind, "truth": truth_path, "wav": str(output)})
    elif kind == "taps":
        if times is None:
            raise click.UsageError("--times is required for --kind taps")
        tap_times = tuple(float(v) for v in times.split(","))
        spec = TapsSpec(times_s=tap_times, seed=seed, rate_hz=rate, duration_s=duration)
        trace, truth = synth_taps(spec)
        eio.write_wav(trace, output)
        eio.write_ground_truth(truth_path, truth, "tap")
        emit({"events": len(truth), "kind": kind, "truth": truth_path, "wav": str(output)})
    elif kind == "music":
        tone_freqs = tuple(float(v) for v in freqs.split(","))
        spec = MusicSpec(freqs_hz=tone_freqs, seed=seed, rate_hz=rate,
                         duration_s=duration if duration else 2.0)
        eio.write_wav(synth_music(spec), output)
        emit({"kind": kind, "tones": len(tone_freqs), "wav": str(output)})
    else:
        dataset = synth_blobs(BlobsSpec(n_classes=n_classes, dim=187, margin=margin,
                                        per_class=per_class, n_subjects=n_subjects,
                                        subject_shift=subject_shift, seed=seed))
        eio.write_features_csv(output, dataset.X, labels=dataset.y, subjects=dataset.subjects)
        emit({"csv": str(output), "kind": kind, "rows": int(len(dataset))})


if __name__ == "__main__":
    main()
