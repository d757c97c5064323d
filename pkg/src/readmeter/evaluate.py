"""Reading-estimation metrics, leave-one-user-out CV, and paired model
comparisons with Holm-Sidak adjustment.

per_error averages |true - est| / true over messages whose true reading
time is at least 10 s; abs_error averages |true - est| over the rest.
Cells with an empty denominator are reported as None, never 0, and are
excluded from cross-round averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .aggregate import ReadLevel, classify_read_level

PER_ERROR_MIN_TRUE_SECONDS = 10.0

METRIC_NAMES = (
    "per_error",
    "abs_error",
    "accuracy",
    "skim_precision",
    "skim_recall",
    "detail_precision",
    "detail_recall",
    "read_precision",
    "read_recall",
)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MessageTruth:
    session_id: str
    msg_id: str
    time: float
    words: int

    @property
    def level(self) -> ReadLevel:
        return classify_read_level(self.time, self.words)


@dataclass(frozen=True)
class MessageEstimate:
    """One model's estimate for a (session, message) pair.

    time is None for the category model, which predicts only a read level.
    """

    session_id: str
    msg_id: str
    time: float | None
    level: ReadLevel


@dataclass(frozen=True)
class MetricsReport:
    per_error: float | None
    abs_error: float | None
    accuracy: float
    skim_precision: float | None
    skim_recall: float | None
    detail_precision: float | None
    detail_recall: float | None
    read_precision: float | None
    read_recall: float | None
    counts: dict = field(default_factory=dict)

    def value(self, metric: str) -> float | None:
        return getattr(self, metric)

    def to_dict(self) -> dict:
        return {name: self.value(name) for name in METRIC_NAMES} | {"counts": self.counts}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        return cls(**{name: d.get(name) for name in METRIC_NAMES}, counts=dict(d.get("counts", {})))


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_metrics(
    estimates: Iterable[MessageEstimate],
    truths: Iterable[MessageTruth],
) -> MetricsReport:
    """Score one model over (session, message) pairs, joined by key."""
    truth_by_key = {(t.session_id, t.msg_id): t for t in truths}
    est_by_key = {(e.session_id, e.msg_id): e for e in estimates}
    if set(truth_by_key) != set(est_by_key):
        missing = sorted(set(truth_by_key) - set(est_by_key))[:3]
        extra = sorted(set(est_by_key) - set(truth_by_key))[:3]
        raise EvaluationError(f"estimate/truth key mismatch: missing={missing} extra={extra}")
    if not truth_by_key:
        raise EvaluationError("nothing to score")

    per_errors: list[float] = []
    abs_errors: list[float] = []
    n_correct = 0
    level_counts = {level: {"tp": 0, "pred": 0, "true": 0} for level in ReadLevel}
    read_counts = {"tp": 0, "pred": 0, "true": 0}

    has_time = True
    for key, truth in truth_by_key.items():
        est = est_by_key[key]
        if est.time is None:
            has_time = False
        elif truth.time >= PER_ERROR_MIN_TRUE_SECONDS:
            per_errors.append(abs(truth.time - est.time) / truth.time)
        else:
            abs_errors.append(abs(truth.time - est.time))
        true_level = truth.level
        est_level = est.level
        if true_level is est_level:
            n_correct += 1
        level_counts[true_level]["true"] += 1
        level_counts[est_level]["pred"] += 1
        if true_level is est_level:
            level_counts[true_level]["tp"] += 1
        if true_level.read:
            read_counts["true"] += 1
        if est_level.read:
            read_counts["pred"] += 1
        if true_level.read and est_level.read:
            read_counts["tp"] += 1

    n = len(truth_by_key)
    counts = {
        "messages": n,
        "per_error_messages": len(per_errors),
        "abs_error_messages": len(abs_errors),
        "levels": {
            level.value: dict(c) for level, c in level_counts.items()
        },
        "read": dict(read_counts),
    }
    skim = level_counts[ReadLevel.SKIM]
    detail = level_counts[ReadLevel.DETAIL]
    return MetricsReport(
        per_error=(float(np.mean(per_errors)) if per_errors else None) if has_time else None,
        abs_error=(float(np.mean(abs_errors)) if abs_errors else None) if has_time else None,
        accuracy=n_correct / n,
        skim_precision=_ratio(skim["tp"], skim["pred"]),
        skim_recall=_ratio(skim["tp"], skim["true"]),
        detail_precision=_ratio(detail["tp"], detail["pred"]),
        detail_recall=_ratio(detail["tp"], detail["true"]),
        read_precision=_ratio(read_counts["tp"], read_counts["pred"]),
        read_recall=_ratio(read_counts["tp"], read_counts["true"]),
        counts=counts,
    )


@dataclass(frozen=True)
class CVRound:
    test_user: str
    train_sessions: tuple[str, ...]
    val_sessions: tuple[str, ...]
    test_sessions: tuple[str, ...]


@dataclass(frozen=True)
class CVPlan:
    rounds: tuple[CVRound, ...]
    seed: int


def make_cv_plan(
    sessions_by_user: Mapping[str, Sequence[str]],
    n_rounds: int | None = None,
    seed: int = 0,
) -> CVPlan:
    """Leave-one-user-out rounds with a pooled 7:1 train/validation split.

    Rounds cycle through users; validation sessions are drawn uniformly
    without replacement from the non-test pool at 1/8 of its sessions
    (rounded up). Defaults to users x 8 rounds.
    """
    users = sorted(sessions_by_user)
    if len(users) < 2:
        raise EvaluationError("cross-validation needs at least 2 users")
    for user in users:
        if not sessions_by_user[user]:
            raise EvaluationError(f"user {user!r} has no sessions")
    if n_rounds is None:
        n_rounds = len(users) * 8
    rng = np.random.default_rng(seed)
    rounds = []
    for i in range(n_rounds):
        test_user = users[i % len(users)]
        pool: list[str] = []
        for user in users:
            if user != test_user:
                pool.extend(sessions_by_user[user])
        pool.sort()
        n_val = math.ceil(len(pool) / 8)
        val_idx = rng.choice(len(pool), size=n_val, replace=False)
        val = {pool[j] for j in val_idx}
        rounds.append(
            CVRound(
                test_user=test_user,
                train_sessions=tuple(s for s in pool if s not in val),
                val_sessions=tuple(sorted(val)),
                test_sessions=tuple(sorted(sessions_by_user[test_user])),
            )
        )
    return CVPlan(rounds=tuple(rounds), seed=seed)


def paired_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t, p).

    Zero-variance differences degenerate to t=0, p=1 when the means agree
    and p=0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError("paired test needs equal-length 1-d samples")
    if a.size < 2:
        raise EvaluationError("paired test needs at least 2 rounds")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        return (0.0, 1.0) if d.mean() == 0.0 else (math.inf, 0.0)
    t = d.mean() / (sd / math.sqrt(d.size))
    p = 2.0 * sps.t.sf(abs(t), df=d.size - 1)
    return float(t), float(p)


def holm_sidak(p_values: Sequence[float]) -> list[float]:
    """Step-down Holm-Sidak adjustment of a family of p-values.

    Sorted ascending, adjusted_(i) = 1 - (1 - p_(i))^(k - i + 1) with a
    running maximum to keep the sequence monotone; k = 1 returns the raw p.
    """
    k = len(p_values)
    order = sorted(range(k), key=lambda i: p_values[i])
    adjusted = [0.0] * k
    running = 0.0
    for rank, idx in enumerate(order):
        exponent = k - rank
        # exponent 1 simplifies to the raw p; computing it directly keeps
        # single-member families exact
        if exponent == 1:
            adj = p_values[idx]
        else:
            adj = 1.0 - (1.0 - p_values[idx]) ** exponent
        running = max(running, min(adj, 1.0))
        adjusted[idx] = running
    return adjusted


@dataclass(frozen=True)
class PairComparison:
    question: str
    model_a: str
    model_b: str
    metric: str
    mean_a: float
    mean_b: float
    n_rounds: int
    t_stat: float
    p_raw: float
    p_adjusted: float

    @property
    def marker(self) -> str:
        if self.p_adjusted <= 0.05:
            return "*"
        if self.p_adjusted <= 0.10:
            return "."
        return ""


@dataclass(frozen=True)
class ComparisonReport:
    comparisons: tuple[PairComparison, ...]

    def to_dicts(self) -> list[dict]:
        return [
            {
                "question": c.question,
                "model_a": c.model_a,
                "model_b": c.model_b,
                "metric": c.metric,
                "mean_a": c.mean_a,
                "mean_b": c.mean_b,
                "n_rounds": c.n_rounds,
                "t": c.t_stat,
                "p_raw": c.p_raw,
                "p_adjusted": c.p_adjusted,
                "marker": c.marker,
            }
            for c in self.comparisons
        ]


def paired_comparisons(
    per_round: Mapping[str, Sequence[MetricsReport]],
    pairs_by_question: Mapping[str, Sequence[tuple[str, str]]],
    metrics: Sequence[str] = METRIC_NAMES,
) -> ComparisonReport:
    """Paired t-tests per (pair, metric), adjusted within each question's
    family of pairs for that metric.

    Rounds where either model's metric is undefined are dropped pairwise;
    pairs with fewer than 2 usable rounds are skipped.
    """
    n_rounds = {len(v) for v in per_round.values()}
    if len(n_rounds) > 1:
        raise EvaluationError("all models must be evaluated on identical rounds")
    out: list[PairComparison] = []
    for question, pairs in pairs_by_question.items():
        for metric in metrics:
            family: list[tuple[tuple[str, str], float, float, float, float, int]] = []
            for model_a, model_b in pairs:
                if model_a not in per_round or model_b not in per_round:
                    continue
                rows = [
                    (ra.value(metric), rb.value(metric))
                    for ra, rb in zip(per_round[model_a], per_round[model_b])
                ]
                usable = [(x, y) for x, y in rows if x is not None and y is not None]
                if len(usable) < 2:
                    continue
                a = [x for x, _ in usable]
                b = [y for _, y in usable]
                t, p = paired_t(a, b)
                family.append(((model_a, model_b), float(np.mean(a)), float(np.mean(b)), t, p, len(usable)))
            if not family:
                continue
            adjusted = holm_sidak([f[4] for f in family])
            for (pair, mean_a, mean_b, t, p, n), p_adj in zip(family, adjusted):
                out.append(
                    PairComparison(
                        question=question,
                        model_a=pair[0],
                        model_b=pair[1],
                        metric=metric,
                        mean_a=mean_a,
                        mean_b=mean_b,
                        n_rounds=n,
                        t_stat=t,
                        p_raw=p,
                        p_adjusted=p_adj,
                    )
                )
    return ComparisonReport(comparisons=tuple(out))


def mean_metric(reports: Sequence[MetricsReport], metric: str) -> float | None:
    values = [r.value(metric) for r in reports if r.value(metric) is not None]
    return float(np.mean(values)) if values else None


def _format_cell(c: PairComparison) -> str:
    scale = 100.0 if c.metric != "abs_error" else 1.0
    unit = "s" if c.metric == "abs_error" else ""
    return (
        f"{c.mean_a * scale:.0f}{unit}->{c.mean_b * scale:.0f}{unit} "
        f"({c.p_adjusted:.2f}{c.marker})"
    )


def render_comparison_table(report: ComparisonReport, metrics: Sequence[str] = METRIC_NAMES) -> str:
    """Aligned text table: one row per model pair, one column per metric."""
    by_pair: dict[tuple[str, str, str], dict[str, PairComparison]] = {}
    for c in report.comparisons:
        by_pair.setdefault((c.question, c.model_a, c.model_b), {})[c.metric] = c
    header = ["question", "model1", "model2", *metrics]
    rows = [header]
    for (question, a, b), cells in by_pair.items():
        row = [question, a, b]
        for metric in metrics:
            row.append(_format_cell(cells[metric]) if metric in cells else "\\")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
