"""CLI contract: JSON-lines stdout, exit codes, determinism."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from earmotion import WalkSpec, synth_walk, write_wav
from earmotion.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


def json_lines(result):
    # Result.output interleaves stderr; machine output lives on stdout
    return [json.loads(line) for line in result.stdout.splitlines() if line]


@pytest.fixture
def walk_wav(tmp_path):
    trace, truth = synth_walk(WalkSpec(n_steps=20, cadence_hz=2.0, seed=0))
    path = tmp_path / "walk.wav"
    write_wav(trace, path)
    return path


@pytest.fixture
def features_csv(tmp_path, runner):
    path = tmp_path / "blobs.csv"
    # 187-dim blobs need a wider margin and more rows than the
    # low-dimensional library defaults to stay cleanly separable
    result = invoke(
        runner,
        ["--seed", "0", "synth", "--kind", "blobs", "--n-classes", "3",
         "--per-class", "40", "--margin", "8", "-o", str(path)],
    )
    assert result.exit_code == 0
    return path


class TestCountSteps:
    def test_counts_fixture(self, runner, walk_wav):
        result = invoke(runner, ["count-steps", str(walk_wav)])
        assert result.exit_code == 0
        lines = json_lines(result)
        assert len(lines) == 1
        assert lines[0]["channel"] == "Mono"
        assert lines[0]["steps"] == 20

    def test_missing_file_is_processing_error(self, runner):
        result = runner.invoke(main, ["count-steps", "missing.wav"])
        assert result.exit_code == 1
        assert "missing.wav" in result.stderr

    def test_stereo_wav_reports_both_channels(self, runner, tmp_path):
        from earmotion import AudioTrace, Channel, StereoTrace

        trace, _ = synth_walk(WalkSpec(n_steps=6, cadence_hz=2.0, seed=1))
        stereo = StereoTrace(
            AudioTrace(trace.samples, 48000, Channel.LEFT),
            AudioTrace(trace.samples, 48000, Channel.RIGHT),
        )
        path = tmp_path / "stereo.wav"
        write_wav(stereo, path)
        result = invoke(runner, ["count-steps", str(path)])
        assert result.exit_code == 0
        lines = json_lines(result)
        assert [line["channel"] for line in lines] == ["Left", "Right"]
        assert all(line["steps"] == 6 for line in lines)

    def test_unknown_subcommand_is_usage_error(self, runner):
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code == 2

    def test_unknown_flag_is_usage_error(self, runner):
        result = runner.invoke(main, ["count-steps", "--bogus", "x.wav"])
        assert result.exit_code == 2


class TestSynth:
    def test_walk_writes_wav_and_truth(self, runner, tmp_path):
        out = tmp_path / "walk.wav"
        result = invoke(
            runner, ["--seed", "3", "synth", "--kind", "walk", "--n-steps", "7", "-o", str(out)]
        )
        assert result.exit_code == 0
        line = json_lines(result)[0]
        assert line["events"] == 7
        assert out.exists()
        truth_lines = (tmp_path / "walk.truth.jsonl").read_text().splitlines()
        assert len(truth_lines) == 7
        assert json.loads(truth_lines[0])["kind"] == "step"

    def test_taps_requires_times(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--kind", "taps", "-o", str(tmp_path / "t.wav")])
        assert result.exit_code == 2

    def test_music(self, runner, tmp_path):
        out = tmp_path / "music.wav"
        result = invoke(runner, ["synth", "--kind", "music", "--freqs", "440,880", "-o", str(out)])
        assert result.exit_code == 0
        assert json_lines(result)[0]["tones"] == 2


class TestSegmentAndFeatures:
    def test_segment_windows(self, runner, walk_wav):
        result = invoke(runner, ["segment", str(walk_wav)])
        assert result.exit_code == 0
        lines = json_lines(result)
        assert lines and all(line["kind"] == "window" for line in lines)
        assert lines[0]["start_s"] == 0.0

    def test_segment_gestures(self, runner, walk_wav):
        result = invoke(runner, ["segment", str(walk_wav), "--kind", "gestures"])
        assert result.exit_code == 0
        assert len(json_lines(result)) == 20

    def test_features_csv(self, runner, walk_wav, tmp_path):
        out = tmp_path / "f.csv"
        result = invoke(
            runner,
            ["features", str(walk_wav), "--label", "walk", "-o", str(out)],
        )
        assert result.exit_code == 0
        line = json_lines(result)[0]
        assert line["csv"] == str(out)
        header = out.read_text().splitlines()[0]
        assert header.endswith("subject,label")


class TestTrainClassifyEvaluate:
    def test_train_then_classify(self, runner, tmp_path, walk_wav):
        csv_a = tmp_path / "a.csv"
        invoke(runner, ["features", str(walk_wav), "--kind", "gestures",
                        "--label", "gesture", "-o", str(csv_a)])
        # a second labeled batch so training has two classes
        rows_a = csv_a.read_text().splitlines()
        doctored = [rows_a[0]]
        for i, row in enumerate(rows_a[1:]):
            cells = row.rsplit(",", 1)
            doctored.append(f"{cells[0]},{'gesture' if i % 2 else 'other'}")
        csv_a.write_text("\n".join(doctored) + "\n")

        model_path = tmp_path / "model.json"
        result = invoke(runner, ["train", str(csv_a), "--model", "knn", "-o", str(model_path)])
        assert result.exit_code == 0
        assert json_lines(result)[0]["kind"] == "knn"

        result = invoke(
            runner,
            ["classify", str(walk_wav), "--model", str(model_path), "--kind", "gestures", "--latency"],
        )
        assert result.exit_code == 0
        lines = json_lines(result)
        assert len(lines) == 20
        assert all("label" in line for line in lines)
        assert "latency[Mono]" in result.stderr

    def test_evaluate_cv(self, runner, features_csv):
        result = invoke(runner, ["--seed", "1", "evaluate", str(features_csv), "--protocol", "cv"])
        assert result.exit_code == 0
        line = json_lines(result)[0]
        assert line["protocol"] == "cv"
        assert line["macro_recall"] >= 0.98

    def test_evaluate_holdout_with_lr_alias(self, runner, features_csv):
        result = invoke(
            runner,
            ["--seed", "1", "evaluate", str(features_csv), "--protocol", "holdout",
             "--model", "lr"],
        )
        assert result.exit_code == 0
        assert json_lines(result)[0]["macro_recall"] >= 0.9

    def test_evaluate_loo_needs_subjects(self, runner, features_csv):
        result = runner.invoke(main, ["evaluate", str(features_csv), "--protocol", "loo"])
        assert result.exit_code == 1  # single synthetic subject

    @pytest.fixture
    def multisubject_csv(self, tmp_path, runner):
        path = tmp_path / "subjects.csv"
        result = invoke(
            runner,
            ["--seed", "4", "synth", "--kind", "blobs", "--n-classes", "3",
             "--per-class", "25", "--margin", "8", "--n-subjects", "3",
             "--subject-shift", "2.0", "-o", str(path)],
        )
        assert result.exit_code == 0
        return path

    def test_evaluate_loo(self, runner, multisubject_csv):
        result = invoke(runner, ["evaluate", str(multisubject_csv), "--protocol", "loo"])
        assert result.exit_code == 0
        lines = json_lines(result)
        assert sorted(line["subject"] for line in lines) == ["s0", "s1", "s2"]
        assert all("macro_recall" in line for line in lines)

    def test_evaluate_personalize(self, runner, multisubject_csv):
        result = invoke(
            runner,
            ["--seed", "2", "evaluate", str(multisubject_csv), "--protocol", "personalize",
             "--personal-n", "5"],
        )
        assert result.exit_code == 0
        lines = json_lines(result)
        assert len(lines) == 3
        assert all(line["personal_n"] == 5 for line in lines)


class TestFitTestCommand:
    @pytest.fixture
    def probe_files(self, tmp_path):
        from earmotion import generate_probe_tone

        paths = {}
        for name, freq, amp in (
            ("base300", 300.0, 0.05),
            ("base1500", 1500.0, 0.4),
            ("test300", 300.0, 0.45),
            ("test1500", 1500.0, 0.04),
        ):
            path = tmp_path / f"{name}.wav"
            write_wav(generate_probe_tone(freq, amplitude=amp), path)
            paths[name] = str(path)
        return paths

    def test_four_file_mode(self, runner, probe_files):
        result = invoke(
            runner,
            ["fit-test", "--base300", probe_files["base300"], "--base1500", probe_files["base1500"],
             "--test300", probe_files["test300"], "--test1500", probe_files["test1500"]],
        )
        assert result.exit_code == 0
        line = json_lines(result)[0]
        assert line["passed"] is True
        assert line["ratio_low"] == pytest.approx(9.0, rel=0.05)

    def test_incomplete_args_usage_error(self, runner, probe_files):
        result = runner.invoke(main, ["fit-test", "--base300", probe_files["base300"]])
        assert result.exit_code == 2

    def test_stereo_mode(self, runner, tmp_path):
        from earmotion import AudioTrace, Channel, StereoTrace, generate_probe_tone

        def stereo(path, amp300, amp1500):
            left = generate_probe_tone(300.0, amplitude=amp300)
            right = generate_probe_tone(1500.0, amplitude=amp1500)
            write_wav(
                StereoTrace(
                    AudioTrace(left.samples, 48000, Channel.LEFT),
                    AudioTrace(right.samples, 48000, Channel.RIGHT),
                ),
                path,
            )
            return str(path)

        base = stereo(tmp_path / "base.wav", 0.05, 0.4)
        worn = stereo(tmp_path / "worn.wav", 0.45, 0.04)
        result = invoke(runner, ["fit-test", "--base", base, "--test", worn])
        assert result.exit_code == 0
        assert json_lines(result)[0]["passed"] is True


class TestMusicImpactCommand:
    def test_report(self, runner, tmp_path, walk_wav):
        music_path = tmp_path / "music.wav"
        invoke(runner, ["synth", "--kind", "music", "--freqs", "440",
                        "--duration", "11", "-o", str(music_path)])
        band_csv = tmp_path / "bands.csv"
        result = invoke(
            runner,
            ["music-impact", str(walk_wav), str(music_path), "--gain", "0.3",
             "--band-csv", str(band_csv)],
        )
        assert result.exit_code == 0
        line = json_lines(result)[0]
        assert line["pearson"] >= 0.98
        assert band_csv.exists()
        assert band_csv.read_text().startswith("name,low_fraction,high_fraction")


class TestOutputDiscipline:
    def test_stdout_is_pure_json_lines(self, runner, walk_wav):
        result = invoke(runner, ["--verbose", "count-steps", str(walk_wav)])
        for line in result.stdout.splitlines():
            if line:
                json.loads(line)
        assert "config:" in result.stderr

    def test_config_file_sets_defaults(self, runner, tmp_path, walk_wav):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"count-steps": {"theta_intvl": 0.5}}))
        with_config = invoke(runner, ["--config", str(config), "--verbose",
                                      "count-steps", str(walk_wav)])
        assert '"theta_intvl_s": 0.5' in with_config.stderr

    @pytest.mark.parametrize(
        "argv",
        [
            ["count-steps", "{walk}"],
            ["segment", "{walk}", "--kind", "gestures"],
            ["--seed", "5", "synth", "--kind", "walk", "--n-steps", "5", "-o", "{tmp}/s.wav"],
        ],
    )
    def test_repeat_runs_are_byte_identical(self, runner, walk_wav, tmp_path, argv):
        args = [a.format(walk=walk_wav, tmp=tmp_path) for a in argv]
        first = invoke(runner, args)
        second = invoke(runner, args)
        assert first.exit_code == second.exit_code == 0
        assert first.stdout_bytes == second.stdout_bytes
