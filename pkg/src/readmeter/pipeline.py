"""Cross-validation experiment runner tying features, estimators, and
metrics together. Stages are deterministic given the corpus and seed, and
rounds are independent so they can run in a process pool."""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import features as ft
from .aggregate import READ_LEVELS, classify_read_level, reading_time
from .baselines import TimestampPrediction
from .corpus import Corpus
from .estimators import (
    HEURISTIC_KINDS,
    Estimator,
    EstimatorKind,
    build_estimator,
    granularity_of,
    predict_matrix,
)
from .evaluate import (
    CVPlan,
    CVRound,
    MessageEstimate,
    MessageTruth,
    MetricsReport,
    compute_metrics,
    make_cv_plan,
)
from .features import FeatureMatrix
from .nnet import TrainConfig

# sentinel kind: echoes the gaze labels back as an estimator, the oracle
# identity hook for end-to-end checks
GROUND_TRUTH_KIND = "ground-truth"

DEFAULT_QUESTION_PAIRS: dict[str, tuple[tuple[str, str], ...]] = {
    "Q1": (
        ("baseline1", "logistic"),
        ("baseline2", "logistic"),
        ("baseline3", "logistic"),
        ("baseline1", "nn"),
    ),
    "Q2": (("logistic", "nn"),),
    "Q3": (("nn", "pattern-nn"), ("baseline-nn", "pattern-baseline-nn")),
    "Q4": (("pattern-nn", "pattern-baseline-nn"),),
    "Q5": (
        ("pattern-sessional-nn", "pattern-nn"),
        ("pattern-category-nn", "pattern-nn"),
    ),
}


def _subset(matrix: FeatureMatrix, mask: np.ndarray) -> FeatureMatrix:
    return FeatureMatrix(
        schema=matrix.schema,
        columns=matrix.columns,
        X=matrix.X[mask],
        user_ids=matrix.user_ids[mask],
        session_ids=matrix.session_ids[mask],
        msg_ids=matrix.msg_ids[mask],
        t=None if matrix.t is None else matrix.t[mask],
        label=None if matrix.label is None else matrix.label[mask],
        label_time=None if matrix.label_time is None else matrix.label_time[mask],
        label_class=None if matrix.label_class is None else matrix.label_class[mask],
        words=None if matrix.words is None else matrix.words[mask],
    )


def truths_by_session(corpus: Corpus) -> dict[str, list[MessageTruth]]:
    out: dict[str, list[MessageTruth]] = {}
    for session in corpus.sessions:
        secs = session.true_reading_seconds()
        out[session.session_id] = [
            MessageTruth(
                session_id=session.session_id,
                msg_id=m.msg_id,
                time=float(secs[m.msg_id]),
                words=m.words,
            )
            for m in session.layout.messages
        ]
    return out


def _stable_seed(seed: int, round_index: int, kind: str) -> int:
    return zlib.crc32(f"{seed}:{round_index}:{kind}".encode()) & 0x7FFFFFFF


def _timestamp_estimates(
    est: Estimator,
    matrix: FeatureMatrix,
    session_seconds: Mapping[str, range],
    words: Mapping[tuple[str, str], int],
) -> list[MessageEstimate]:
    p = predict_matrix(est, matrix)
    groups: dict[tuple[str, str], list[TimestampPrediction]] = {}
    for i in range(matrix.n_rows):
        key = (matrix.session_ids[i], matrix.msg_ids[i])
        groups.setdefault(key, []).append(
            TimestampPrediction(matrix.msg_ids[i], int(matrix.t[i]), float(p[i]))
        )
    out = []
    for (session_id, msg_id), preds in groups.items():
        estimate = reading_time(preds, session_seconds[session_id], session_id=session_id)
        level = classify_read_level(estimate.time, words[(session_id, msg_id)])
        out.append(MessageEstimate(session_id, msg_id, estimate.time, level))
    return out


def _session_estimates(est: Estimator, matrix: FeatureMatrix) -> list[MessageEstimate]:
    out = []
    pred = predict_matrix(est, matrix)
    if est.kind is EstimatorKind.PATTERN_CATEGORY_NN:
        levels = [READ_LEVELS[int(np.argmax(row))] for row in pred]
        for i in range(matrix.n_rows):
            out.append(
                MessageEstimate(matrix.session_ids[i], matrix.msg_ids[i], None, levels[i])
            )
    else:
        for i in range(matrix.n_rows):
            time = float(pred[i])
            level = classify_read_level(time, int(matrix.words[i]))
            out.append(
                MessageEstimate(matrix.session_ids[i], matrix.msg_ids[i], time, level)
            )
    return out


def prediction_records(est: Estimator, matrix: FeatureMatrix) -> list[dict]:
    """Test-set predictions in the shared dump format."""
    from . import predictions as pred

    p = predict_matrix(est, matrix)
    records = []
    users_by_session = dict(zip(matrix.session_ids, matrix.user_ids))
    if est.granularity == "timestamp":
        for i in range(matrix.n_rows):
            records.append(pred.timestamp_record(
                matrix.user_ids[i], matrix.session_ids[i], matrix.msg_ids[i],
                int(matrix.t[i]), float(p[i])))
    elif est.kind is EstimatorKind.PATTERN_CATEGORY_NN:
        for i in range(matrix.n_rows):
            records.append(pred.class_record(
                matrix.user_ids[i], matrix.session_ids[i], matrix.msg_ids[i], p[i]))
    else:
        for i in range(matrix.n_rows):
            records.append(pred.time_record(
                matrix.user_ids[i], matrix.session_ids[i], matrix.msg_ids[i], float(p[i])))
    return records


@dataclass(frozen=True)
class RoundTask:
    index: int
    cv_round: CVRound
    kinds: tuple[EstimatorKind | str, ...]  # str: the ground-truth sentinel
    base_config: TrainConfig
    seed: int
    dump_dir: str | None = None


def evaluate_round(
    task: RoundTask,
    ts_matrix: FeatureMatrix | None,
    sess_matrix: FeatureMatrix | None,
    truths: Mapping[str, Sequence[MessageTruth]],
    session_seconds: Mapping[str, range],
) -> dict[str, MetricsReport]:
    rnd = task.cv_round
    test_truths = [t for sid in rnd.test_sessions for t in truths[sid]]
    words = {(t.session_id, t.msg_id): t.words for t in test_truths}

    splits: dict[str, tuple[FeatureMatrix, FeatureMatrix, FeatureMatrix]] = {}
    for name, matrix in (("timestamp", ts_matrix), ("session", sess_matrix)):
        if matrix is None:
            continue
        splits[name] = (
            _subset(matrix, matrix.rows_for_sessions(rnd.train_sessions)),
            _subset(matrix, matrix.rows_for_sessions(rnd.val_sessions)),
            _subset(matrix, matrix.rows_for_sessions(rnd.test_sessions)),
        )

    reports: dict[str, MetricsReport] = {}
    for kind in task.kinds:
        if kind == GROUND_TRUTH_KIND:
            oracle = [
                MessageEstimate(t.session_id, t.msg_id, t.time, t.level)
                for t in test_truths
            ]
            reports[GROUND_TRUTH_KIND] = compute_metrics(oracle, test_truths)
            continue
        gran = granularity_of(kind)
        train, val, test = splits[gran]
        if kind in HEURISTIC_KINDS:
            est = build_estimator(kind, None, None)
        else:
            config = replace(task.base_config, seed=_stable_seed(task.seed, task.index, kind.value))
            est = build_estimator(kind, train, val, config)
        if gran == "timestamp":
            estimates = _timestamp_estimates(est, test, session_seconds, words)
        else:
            estimates = _session_estimates(est, test)
        reports[kind.value] = compute_metrics(estimates, test_truths)
        if task.dump_dir is not None:
            from pathlib import Path

            from .predictions import serialize_predictions

            out = Path(task.dump_dir)
            out.mkdir(parents=True, exist_ok=True)
            text = serialize_predictions(prediction_records(est, test))
            (out / f"round{task.index:03d}-{kind.value}.jsonl").write_text(text, encoding="utf-8")
    return reports


@dataclass(frozen=True)
class ExperimentResult:
    kinds: tuple[str, ...]
    plan: CVPlan
    per_round: dict[str, list[MetricsReport]]

    def to_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "seed": self.plan.seed,
            "rounds": [
                {
                    "index": i,
                    "test_user": rnd.test_user,
                    "metrics": {
                        kind: self.per_round[kind][i].to_dict() for kind in self.kinds
                    },
                }
                for i, rnd in enumerate(self.plan.rounds)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        kinds = tuple(d["kinds"])
        rounds = d["rounds"]
        per_round = {
            kind: [MetricsReport.from_dict(r["metrics"][kind]) for r in rounds]
            for kind in kinds
        }
        plan = CVPlan(
            rounds=tuple(
                CVRound(test_user=r["test_user"], train_sessions=(), val_sessions=(), test_sessions=())
                for r in rounds
            ),
            seed=d.get("seed", 0),
        )
        return cls(kinds=kinds, plan=plan, per_round=per_round)


def _round_worker(args):
    return evaluate_round(*args)


def run_experiment(
    corpus: Corpus,
    kinds: Sequence[EstimatorKind],
    n_rounds: int | None = None,
    seed: int = 0,
    base_config: TrainConfig | None = None,
    threads: int = 1,
    ts_matrix: FeatureMatrix | None = None,
    sess_matrix: FeatureMatrix | None = None,
    dump_dir: str | None = None,
) -> ExperimentResult:
    """Leave-one-user-out evaluation of the requested kinds.

    Feature matrices may be passed in (e.g. loaded from a features stage);
    otherwise they are built from the corpus on the fly.
    """
    kinds = tuple(kinds)
    base_config = base_config or TrainConfig()
    model_kinds = [k for k in kinds if k != GROUND_TRUTH_KIND]
    need_ts = any(granularity_of(k) == "timestamp" for k in model_kinds)
    need_sess = any(granularity_of(k) == "session" for k in model_kinds)
    if need_ts and ts_matrix is None:
        ts_matrix = ft.build_dataset(corpus.runs, granularity="timestamp")
    if need_sess and sess_matrix is None:
        sess_matrix = ft.build_dataset(corpus.runs, granularity="session")

    plan = make_cv_plan(corpus.sessions_by_user(), n_rounds=n_rounds, seed=seed)
    truths = truths_by_session(corpus)
    session_seconds = {s.session_id: s.seconds() for s in corpus.sessions}

    tasks = [
        (
            RoundTask(index=i, cv_round=rnd, kinds=kinds, base_config=base_config,
                      seed=seed, dump_dir=dump_dir),
            ts_matrix if need_ts else None,
            sess_matrix if need_sess else None,
            truths,
            session_seconds,
        )
        for i, rnd in enumerate(plan.rounds)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_round_worker, tasks))
    else:
        results = [_round_worker(t) for t in tasks]

    names = [k if isinstance(k, str) else k.value for k in kinds]
    per_round = {name: [r[name] for r in results] for name in names}
    return ExperimentResult(kinds=tuple(names), plan=plan, per_round=per_round)
