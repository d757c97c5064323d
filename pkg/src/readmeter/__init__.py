"""readmeter: per-message reading time and read level estimation from
browser interaction logs, with a synthetic ground-truth simulator and a
leave-one-user-out evaluation harness."""

__version__ = "0.1.0"

from .aggregate import ReadLevel, classify_read_level, reading_time
from .baselines import (
    TimestampPrediction,
    baseline_center_distance,
    baseline_mouse_proximity,
    baseline_window_share,
)
from .corpus import Corpus, UserRun, load_corpus, save_corpus
from .estimators import (
    Estimator,
    EstimatorKind,
    build_estimator,
    load_estimator,
    predict_matrix,
    predict_session,
    predict_timestamp,
    save_estimator,
)
from .events import (
    InteractionEvent,
    MessageGeometry,
    NewsletterLayout,
    ReadingSession,
    WindowSnapshot,
    parse_event_log,
    sessionize,
    snapshot_at,
)
from .evaluate import (
    ComparisonReport,
    MetricsReport,
    compute_metrics,
    holm_sidak,
    make_cv_plan,
    paired_comparisons,
    paired_t,
)
from .features import (
    SessionalFeatures,
    Standardizer,
    TimestampFeatures,
    build_dataset,
    sessional_features,
    timestamp_features,
)
from .nnet import DenseNet, TrainConfig, TwoTowerNet, adam_step, forward, loss_and_grad, train
from .simulate import SimConfig, corpus_stats, default_sim_config, generate_corpus
