"""In-ear acoustic motion sensing.

Occluding the ear canal boosts low-frequency bone-conducted sound, so
an inward-facing microphone picks up footfalls, chewing, and face taps
as sub-50 Hz signal while music and speech stay out of band. This
package implements the processing stack on top of that effect: step
counting, activity/gesture feature extraction and classification,
earbud fit testing, and music-robustness analysis, plus synthetic
oracles and a CLI.
"""

from .audio import (
    AudioTrace,
    Channel,
    Spectrogram,
    StereoTrace,
    band_energy_ratio,
    decimate,
    lowpass,
    pipeline_decimation_factor,
    preprocess,
    stft_spectrogram,
)
from .classify import (
    Dataset,
    KnnClassifier,
    LinearSvmClassifier,
    LogisticRegressionClassifier,
    Metrics,
    compute_metrics,
    evaluate_personalization,
    holdout,
    kfold_cv,
    leave_one_subject_out,
    personalize,
    predict,
    train,
)
from .envelope import Envelope, Peak, analytic_envelope, detect_peaks, smooth_envelope
from .features import (
    FeatureExtractor,
    FeatureVector,
    FusedFeatureVector,
    extract_features,
    feature_index_map,
    feature_names,
    fuse,
)
from .fittest import FitTestResult, evaluate_fit, generate_probe_tone, run_fit_test, tone_amplitude
from .io import load_model, read_wav, save_model, write_wav
from .music import SimilarityReport, music_impact, pearson, spectrogram_ssim, superimpose
from .segments import (
    KnnStepTapClassifier,
    Segment,
    ZcrStepTapClassifier,
    classify_step_vs_tap,
    extract_gestures,
    sliding_windows,
    zero_crossing_rate,
)
from .steps import RejectReason, StepCounter, StepCounterConfig, StepReport, align_peaks, count_steps, filter_peaks
from .synth import (
    BlobsSpec,
    MusicSpec,
    TapsSpec,
    WalkSpec,
    match_events,
    synth_blobs,
    synth_music,
    synth_taps,
    synth_walk,
)

__version__ = "0.1.0"
