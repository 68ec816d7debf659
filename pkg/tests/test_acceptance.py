"""Acceptance gate: one test per release criterion.

Each test prints a single PASS line when its assertions hold (pytest -s
shows them; -v lists per-criterion status either way). Budgets and
tolerances are asserted here, not tuned elsewhere.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from earmotion import (
    AudioTrace,
    BlobsSpec,
    Channel,
    FeatureVector,
    KnnStepTapClassifier,
    MusicSpec,
    Spectrogram,
    TapsSpec,
    WalkSpec,
    ZcrStepTapClassifier,
    analytic_envelope,
    count_steps,
    evaluate_fit,
    evaluate_personalization,
    extract_features,
    fuse,
    kfold_cv,
    lowpass,
    match_events,
    pearson,
    preprocess,
    spectrogram_ssim,
    superimpose,
    synth_blobs,
    synth_music,
    synth_taps,
    synth_walk,
    train,
    write_wav,
)
from earmotion.cli import main as cli_main
from earmotion.segments import STEP_LABEL, TAP_LABEL, Segment
from earmotion.synth import cut_event_segments

pytestmark = pytest.mark.filterwarnings(
    "ignore:superposition peak", "ignore:smoothing made the envelopes cross"
)


def report(criterion: str, detail: str) -> None:
    print(f"PASS {criterion}: {detail}")


def make_segment(samples, channel=Channel.MONO):
    return Segment(np.asarray(samples, dtype=float), 1000, start_s=0.0, channel=channel)


def test_c01_feature_contract():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    window = make_segment(0.3 * rng.standard_normal(1000))
    gesture = make_segment(0.3 * rng.standard_normal(400))
    assert extract_features(window).values.shape == (187,)
    assert extract_features(gesture).values.shape == (187,)
    left = FeatureVector(extract_features(window).values, Channel.LEFT)
    right = FeatureVector(extract_features(gesture).values, Channel.RIGHT)
    assert fuse(left, right).values.shape == (374,)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report("criterion 1", f"187/374 feature contract in {elapsed:.3f}s")


def test_c02_step_count_oracle():
    started = time.perf_counter()
    specs = []
    rng = np.random.default_rng(12345)
    for seed in range(100):
        specs.append(
            WalkSpec(
                n_steps=int(rng.integers(10, 61)),
                cadence_hz=float(rng.uniform(1.2, 3.0)),
                seed=seed,
            )
        )

    exact = 0
    for spec in specs:
        trace, truth = synth_walk(spec)
        if count_steps(trace).count == len(truth):
            exact += 1
    assert exact == 100, f"clean counting exact on {exact}/100 traces"

    tp = fn = fp = 0
    for spec in specs:
        noisy_spec = WalkSpec(
            n_steps=spec.n_steps, cadence_hz=spec.cadence_hz, seed=spec.seed, snr_db=10.0
        )
        trace, truth = synth_walk(noisy_spec)
        result = count_steps(trace)
        hits = match_events(result.step_times, truth)
        tp += hits
        fn += len(truth) - hits
        fp += result.count - hits
    recall = tp / (tp + fn)
    precision = tp / (tp + fp)
    assert recall >= 0.99, f"recall {recall:.4f}"
    assert precision >= 0.99, f"precision {precision:.4f}"
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(
        "criterion 2",
        f"clean {exact}/100 exact; snr10 recall {recall:.4f} precision {precision:.4f} "
        f"in {elapsed:.1f}s",
    )


def test_c03_music_robustness():
    started = time.perf_counter()
    correlations = []
    for seed in range(20):
        walk, _ = synth_walk(WalkSpec(n_steps=12, cadence_hz=2.0, seed=seed))
        music = synth_music(
            MusicSpec(
                freqs_hz=(150.0 + 37 * seed, 440.0, 1200.0),
                seed=seed,
                duration_s=walk.duration_s,
            )
        )
        mixed = superimpose(walk, music, gain=0.4)
        assert count_steps(mixed).count == count_steps(walk).count
        correlations.append(
            pearson(preprocess(mixed).samples, preprocess(walk).samples)
        )
    assert min(correlations) >= 0.98
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    report(
        "criterion 3",
        f"20/20 counts unchanged under music; min r {min(correlations):.4f} in {elapsed:.1f}s",
    )


def test_c04_ssim_properties():
    rng = np.random.default_rng(4)
    image = np.abs(rng.normal(size=(40, 40))) * 2.0
    spec_a = Spectrogram(image, 1.0, 0.064)
    assert spectrogram_ssim(spec_a, spec_a) == pytest.approx(1.0, abs=1e-9)
    spec_b = Spectrogram(np.abs(rng.normal(size=(40, 40))), 1.0, 0.064)
    assert spectrogram_ssim(spec_a, spec_b) == pytest.approx(
        spectrogram_ssim(spec_b, spec_a), abs=1e-12
    )
    inverted = Spectrogram(image.max() - image, 1.0, 0.064)
    dissimilar = spectrogram_ssim(spec_a, inverted)
    assert dissimilar < 0.5
    report("criterion 4", f"identity/symmetry hold; inverted pair ssim {dissimilar:.3f}")


def test_c05_fit_test_rule_table():
    cases = [
        # (ratio_low via test300, ratio_high via test1500, expected)
        ((1.0, 1.0, 6.0, 0.1), True),    # both comfortably inside
        ((1.0, 1.0, 2.0, 0.1), False),   # low boost too weak
        ((1.0, 1.0, 6.0, 0.5), False),   # high damping too weak
        ((1.0, 1.0, 2.0, 0.5), False),   # both fail
        ((1.0, 1.0, 5.0, 0.1), False),   # low ratio exactly 5 is not > 5
        ((1.0, 1.0, 6.0, 0.2), False),   # high ratio exactly 0.2 is not < 0.2
        ((1.0, 1.0, 5.0001, 0.1999), True),   # just inside both
        ((2.0, 4.0, 10.1, 0.79), True),  # scaled baselines: 5.05 and 0.1975
    ]
    for args, expected in cases:
        assert evaluate_fit(*args).passed is expected, f"case {args}"
    report("criterion 5", f"{len(cases)}/8 boundary cases match the ratio rule")


def test_c06_envelope_correctness():
    t = np.arange(2000) / 1000
    env = analytic_envelope(AudioTrace(0.8 * np.sin(2 * np.pi * 10 * t), 1000))
    interior = slice(100, 1900)  # central 90%
    worst = np.max(np.abs(env.upper[interior] - 0.8)) / 0.8
    assert worst <= 0.01

    burst = np.exp(-0.5 * ((t - 1.0) / 0.05) ** 2) * np.sin(2 * np.pi * 20 * t)
    env_b = analytic_envelope(AudioTrace(burst, 1000))
    localization = abs(np.argmax(env_b.upper) / 1000 - 1.0)
    assert localization <= 0.010
    report(
        "criterion 6",
        f"tone envelope err {worst * 100:.3f}%; burst peak within {localization * 1000:.1f}ms",
    )


def test_c07_filter_spec():
    rate, cutoff = 48000, 50.0

    def gain(freq):
        t = np.arange(2 * rate) / rate
        trace = AudioTrace(np.sin(2 * np.pi * freq * t), rate)
        out = lowpass(trace, cutoff)
        sl = slice(rate // 5, -rate // 5)
        return np.sqrt(np.mean(out.samples[sl] ** 2)) / np.sqrt(
            np.mean(trace.samples[sl] ** 2)
        )

    attenuation_db = -20 * np.log10(gain(2 * cutoff))
    assert attenuation_db >= 40.0
    worst_ripple = max(
        abs(20 * np.log10(gain(freq))) for freq in (5.0, 10.0, 15.0, 20.0, 25.0)
    )
    assert worst_ripple <= 0.5
    report(
        "criterion 7",
        f"{attenuation_db:.1f}dB at 2x cutoff; passband ripple {worst_ripple:.3f}dB",
    )


def test_c08_classifier_suite():
    data = synth_blobs(BlobsSpec(n_classes=5, dim=8, margin=5.0, per_class=100, seed=0))
    recalls = {}
    for kind in ("logreg", "svm"):
        recalls[kind] = kfold_cv(data, kind, k=5, seed=0).macro_recall
        assert recalls[kind] >= 0.98, f"{kind} macro recall {recalls[kind]:.4f}"

    # personalization: median recall over 10 seeds, non-decreasing in n
    sizes = (0, 5, 10, 60)
    curves = {n: [] for n in sizes}
    for seed in range(10):
        shifted = synth_blobs(
            BlobsSpec(
                n_classes=5, dim=8, margin=5.0, per_class=70,
                n_subjects=3, subject_shift=3.0, seed=seed,
            )
        )
        for n in sizes:
            results = evaluate_personalization(shifted, "logreg", n, seed=seed)
            curves[n].append(np.mean([m.macro_recall for m in results.values()]))
    medians = [float(np.median(curves[n])) for n in sizes]
    assert all(b >= a for a, b in zip(medians, medians[1:])), medians
    report(
        "criterion 8",
        f"cv recall lr {recalls['logreg']:.3f} svm {recalls['svm']:.3f}; "
        f"personalization medians {['%.3f' % m for m in medians]}",
    )


def _step_tap_corpus(n_each, seed0):
    steps, taps = [], []
    seed = seed0
    while len(steps) < n_each:
        trace, truth = synth_walk(WalkSpec(n_steps=5, cadence_hz=1.6, seed=seed))
        steps.extend(cut_event_segments(trace, truth, STEP_LABEL))
        seed += 1
    seed = seed0 + 1000
    while len(taps) < n_each:
        trace, truth = synth_taps(
            TapsSpec(times_s=(1.0, 2.0, 3.0, 4.0, 5.0), seed=seed, duration_s=6.0)
        )
        taps.extend(cut_event_segments(trace, truth, TAP_LABEL))
        seed += 1
    return steps[:n_each], taps[:n_each]


def test_c09_step_vs_tap():
    cal_steps, cal_taps = _step_tap_corpus(20, seed0=500)
    eval_steps, eval_taps = _step_tap_corpus(100, seed0=700)
    segments = eval_steps + eval_taps
    labels = np.array([STEP_LABEL] * 100 + [TAP_LABEL] * 100)
    cal_segments = cal_steps + cal_taps
    cal_labels = [STEP_LABEL] * 20 + [TAP_LABEL] * 20

    zcr_model = ZcrStepTapClassifier().fit(cal_segments, cal_labels)
    zcr_acc = float((zcr_model.predict(segments) == labels).mean())
    assert zcr_acc >= 0.95, f"zcr accuracy {zcr_acc:.3f}"

    knn_model = KnnStepTapClassifier(k=5).fit(cal_segments, cal_labels)
    knn_acc = float((knn_model.predict(segments) == labels).mean())
    assert knn_acc >= 0.95, f"knn accuracy {knn_acc:.3f}"
    report("criterion 9", f"200-segment corpus: zcr {zcr_acc:.3f}, knn {knn_acc:.3f}")


def test_c10_latency_budget(tmp_path):
    # soft criterion: measure and report; warn when over budget
    taps, truth = synth_taps(TapsSpec(times_s=(1.0,), duration_s=2.0, seed=0))
    blobs = synth_blobs(BlobsSpec(n_classes=2, dim=187, margin=8.0, per_class=20, seed=0))
    model = train(blobs, "logreg")

    gesture_raw = AudioTrace(
        taps.samples[int(0.85 * 48000) : int(1.25 * 48000)], 48000
    )
    t0 = time.perf_counter()
    filtered = preprocess(gesture_raw)
    t1 = time.perf_counter()
    vec = extract_features(make_segment(filtered.samples[:400]))
    t2 = time.perf_counter()
    model.predict(vec.values[None, :])
    t3 = time.perf_counter()

    filter_ms = (t1 - t0) * 1000
    feature_ms = (t2 - t1) * 1000
    inference_ms = (t3 - t2) * 1000
    total = filter_ms + feature_ms + inference_ms
    detail = (
        f"filter {filter_ms:.2f}ms + feature {feature_ms:.2f}ms + "
        f"inference {inference_ms:.2f}ms = {total:.2f}ms"
    )
    if total >= 50.0:
        import warnings

        warnings.warn(f"gesture latency over the 50ms budget: {detail}")
    report("criterion 10", detail)


def test_c11_cli_determinism(tmp_path):
    runner = CliRunner()
    walk, _ = synth_walk(WalkSpec(n_steps=8, cadence_hz=2.0, seed=0))
    walk_wav = tmp_path / "walk.wav"
    write_wav(walk, walk_wav)
    music_wav = tmp_path / "music.wav"
    blob_csv = tmp_path / "blobs.csv"
    model_json = tmp_path / "model.json"
    feat_csv = tmp_path / "features.csv"

    setup = [
        ["synth", "--kind", "music", "--freqs", "440", "--duration",
         str(walk.duration_s), "-o", str(music_wav)],
        ["--seed", "2", "synth", "--kind", "blobs", "--n-classes", "2",
         "--per-class", "20", "--margin", "8", "-o", str(blob_csv)],
        ["features", str(walk_wav), "--label", "walk", "-o", str(feat_csv)],
        ["train", str(blob_csv), "--model", "logreg", "-o", str(model_json)],
    ]
    for args in setup:
        assert runner.invoke(cli_main, args, catch_exceptions=False).exit_code == 0

    commands = [
        ["count-steps", str(walk_wav)],
        ["segment", str(walk_wav), "--kind", "gestures"],
        ["--seed", "7", "synth", "--kind", "walk", "--n-steps", "5", "-o",
         str(tmp_path / "w2.wav")],
        ["--seed", "3", "evaluate", str(blob_csv), "--protocol", "cv"],
        ["classify", str(walk_wav), "--model", str(model_json), "--kind", "windows"],
        ["music-impact", str(walk_wav), str(music_wav)],
        ["features", str(walk_wav), "--label", "walk", "-o", str(tmp_path / "f2.csv")],
        ["train", str(blob_csv), "--model", "svm", "-o", str(tmp_path / "m2.json")],
    ]
    for args in commands:
        first = runner.invoke(cli_main, args, catch_exceptions=False)
        second = runner.invoke(cli_main, args, catch_exceptions=False)
        assert first.exit_code == 0, f"{args}: {first.stderr}"
        assert first.stdout_bytes == second.stdout_bytes, f"stdout differs for {args}"
        for line in first.stdout.splitlines():
            if line:
                json.dumps(json.loads(line))  # stdout must stay machine-readable
    report("criterion 11", f"{len(commands)} commands byte-identical across runs")
