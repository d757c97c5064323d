"""Temporary and sessional feature extraction for (message, second) pairs.

Feature values are always finite: unknown mouse positions and invisible
messages use -1 sentinels paired with 0/1 known flags, and click gaps are
capped, so the mapping is total over any valid session.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .aggregate import LEVEL_INDEX, classify_read_level
from .baselines import baseline_matrix
from .events import (
    InteractionEvent,
    NewsletterLayout,
    ReadingSession,
    SessionTimeline,
    WindowSnapshot,
)

CAP_SECONDS = 3600.0
PATTERN_WINDOWS = (2, 5, 10, None)  # None = since the beginning of the run

TS_SCHEMA_VERSION = "ts-v1"
SESS_SCHEMA_VERSION = "sess-v1"

TS_MESSAGE_COLUMNS = (
    "msg_position_on_window",
    "msg_visible",
    "msg_window_share",
    "msg_secs_since_click",
)
TS_USER_COLUMNS = (
    "mouse_x_norm",
    "mouse_y_norm",
    "mouse_known",
    "secs_since_any_click",
)
TS_PATTERN_COLUMNS = (
    "move_freq_h_2s", "move_freq_h_5s", "move_freq_h_10s", "move_freq_h_all",
    "move_freq_v_2s", "move_freq_v_5s", "move_freq_v_10s", "move_freq_v_all",
    "scroll_freq_2s", "scroll_freq_5s", "scroll_freq_10s", "scroll_freq_all",
    "clicked_fraction",
)
TS_BASELINE_COLUMNS = ("baseline_share", "baseline_center", "baseline_mouse")
TS_COLUMNS = TS_MESSAGE_COLUMNS + TS_USER_COLUMNS + TS_PATTERN_COLUMNS + TS_BASELINE_COLUMNS

SESS_MESSAGE_COLUMNS = (
    "avg_window_share",
    "avg_position_on_window",
    "clicked",
    "secs_visible",
    "baseline_time_share",
    "baseline_time_center",
    "baseline_time_mouse",
)
SESS_PATTERN_COLUMNS = (
    "sess_move_freq_h",
    "sess_move_freq_v",
    "sess_scroll_freq",
    "sess_clicked_fraction",
)
SESS_COLUMNS = SESS_MESSAGE_COLUMNS + SESS_PATTERN_COLUMNS

BLOCK_COLUMNS: dict[str, tuple[str, ...]] = {
    "ts_message": TS_MESSAGE_COLUMNS,
    "ts_user": TS_USER_COLUMNS,
    "ts_pattern": TS_PATTERN_COLUMNS,
    "ts_baseline": TS_BASELINE_COLUMNS,
    "sess_message": SESS_MESSAGE_COLUMNS,
    "sess_pattern": SESS_PATTERN_COLUMNS,
}


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class MessageTemporaryBlock:
    position_on_window: float  # window-normalized center of visible part, -1 if hidden
    visible: float
    window_share: float
    secs_since_click: float


@dataclass(frozen=True)
class UserTemporaryBlock:
    mouse_x_norm: float
    mouse_y_norm: float
    mouse_known: float
    secs_since_any_click: float


@dataclass(frozen=True)
class PatternBlock:
    move_freq_h: tuple[float, float, float, float]
    move_freq_v: tuple[float, float, float, float]
    scroll_freq: tuple[float, float, float, float]
    clicked_fraction: float

    def values(self) -> tuple[float, ...]:
        return self.move_freq_h + self.move_freq_v + self.scroll_freq + (self.clicked_fraction,)


@dataclass(frozen=True)
class TimestampFeatures:
    msg_id: str
    t: int
    message: MessageTemporaryBlock
    user: UserTemporaryBlock
    pattern: PatternBlock
    baseline: tuple[float, float, float]

    def vector(self) -> np.ndarray:
        m, u = self.message, self.user
        return np.array(
            (m.position_on_window, m.visible, m.window_share, m.secs_since_click)
            + (u.mouse_x_norm, u.mouse_y_norm, u.mouse_known, u.secs_since_any_click)
            + self.pattern.values()
            + self.baseline,
            dtype=np.float64,
        )


@dataclass(frozen=True)
class SessionalFeatures:
    msg_id: str
    session_id: str
    avg_window_share: float
    avg_position_on_window: float
    clicked: float
    secs_visible: int
    baseline_times: tuple[float, float, float]
    avg_move_freq_h: float
    avg_move_freq_v: float
    avg_scroll_freq: float
    clicked_fraction: float

    def vector(self) -> np.ndarray:
        return np.array(
            (
                self.avg_window_share,
                self.avg_position_on_window,
                self.clicked,
                float(self.secs_visible),
            )
            + self.baseline_times
            + (
                self.avg_move_freq_h,
                self.avg_move_freq_v,
                self.avg_scroll_freq,
                self.clicked_fraction,
            ),
            dtype=np.float64,
        )


def _click_seconds(events: Iterable[InteractionEvent]) -> list[tuple[int, str | None]]:
    return [(math.floor(e.t), e.msg_id) for e in events if e.kind == "click"]


def _axis_occupancy(events: Sequence[InteractionEvent], lo: int, hi: int):
    """Per-second 0/1 occupancy of axis-changing moves and scroll changes
    over integer seconds [lo, hi]. The first move counts on both axes and
    the first scroll counts as a change."""
    n = hi - lo + 1
    moved_h = np.zeros(n, dtype=np.float64)
    moved_v = np.zeros(n, dtype=np.float64)
    scrolled = np.zeros(n, dtype=np.float64)
    prev_mouse: tuple[float, float] | None = None
    prev_scroll: float | None = None
    for e in events:
        s = math.floor(e.t) - lo
        if not 0 <= s < n:
            continue
        if e.kind == "move":
            if prev_mouse is None or e.x != prev_mouse[0]:
                moved_h[s] = 1.0
            if prev_mouse is None or e.y != prev_mouse[1]:
                moved_v[s] = 1.0
            prev_mouse = (e.x, e.y)
        elif e.kind == "scroll":
            if prev_scroll is None or e.scroll_y != prev_scroll:
                scrolled[s] = 1.0
            prev_scroll = e.scroll_y
    return moved_h, moved_v, scrolled


class UserHistory:
    """One user's full event stream of a run, indexed for pattern features.

    The infinite window spans everything from the user's first event; the
    per-second occupancy arrays make any rolling-window count O(1).
    """

    def __init__(self, events: Sequence[InteractionEvent]):
        self.events = tuple(events)
        if self.events:
            self.first_second = math.floor(self.events[0].t)
            last_second = math.floor(self.events[-1].t)
            occ = _axis_occupancy(self.events, self.first_second, last_second)
            self._cum = tuple(np.concatenate(([0.0], np.cumsum(a))) for a in occ)
            self._span = last_second - self.first_second + 1
        else:
            self.first_second = 0
            self._cum = (np.zeros(1), np.zeros(1), np.zeros(1))
            self._span = 0
        self.clicks = _click_seconds(self.events)

    def _count(self, which: int, lo: int, hi: int) -> float:
        # occupied seconds in [lo, hi], clipped to the recorded span
        lo = max(lo, self.first_second)
        hi = min(hi, self.first_second + self._span - 1)
        if hi < lo:
            return 0.0
        cum = self._cum[which]
        return float(cum[hi - self.first_second + 1] - cum[lo - self.first_second])

    def pattern_features(self, layout: NewsletterLayout, t: int) -> PatternBlock:
        if not self.events or t < self.first_second:
            zeros = (0.0,) * len(PATTERN_WINDOWS)
            return PatternBlock(zeros, zeros, zeros, 0.0)
        elapsed = t - self.first_second + 1
        freqs: list[list[float]] = [[], [], []]
        for window in PATTERN_WINDOWS:
            if window is None:
                lo, denom = self.first_second, elapsed
            else:
                lo, denom = t - window + 1, min(window, elapsed)
            for which in range(3):
                freqs[which].append(self._count(which, lo, t) / denom)
        clicked = {
            msg for s, msg in self.clicks
            if s <= t and msg is not None and msg in layout.msg_ids
        }
        fraction = len(clicked) / len(layout.messages)
        return PatternBlock(tuple(freqs[0]), tuple(freqs[1]), tuple(freqs[2]), fraction)


def pattern_temporary_features(history: UserHistory, layout: NewsletterLayout, t: int) -> PatternBlock:
    """Rolling mouse/scroll occupancy rates plus clicked-message fraction."""
    return history.pattern_features(layout, t)


def _message_block_from_view(view, secs_since_click: float) -> MessageTemporaryBlock:
    if view.visible_rect is None:
        return MessageTemporaryBlock(-1.0, 0.0, 0.0, secs_since_click)
    return MessageTemporaryBlock(view.center_offset, 1.0, view.window_share, secs_since_click)


def _gap(t: int, last: int | None) -> float:
    if last is None:
        return CAP_SECONDS
    return min(float(t - last), CAP_SECONDS)


def message_temporary_features(session: ReadingSession, msg_id: str, t: int) -> MessageTemporaryBlock:
    session.layout.index_of(msg_id)
    snapshot = SessionTimeline(session).snapshot(t)
    last = None
    for s, m in _click_seconds(session.events):
        if m == msg_id and s <= t:
            last = s
    return _message_block_from_view(snapshot.view(msg_id), _gap(t, last))


def user_temporary_features(session: ReadingSession, t: int) -> UserTemporaryBlock:
    snapshot = SessionTimeline(session).snapshot(t)
    last = None
    for s, _ in _click_seconds(session.events):
        if s <= t:
            last = s
    return _user_block(snapshot, _gap(t, last))


def _user_block(snapshot: WindowSnapshot, secs_since_any_click: float) -> UserTemporaryBlock:
    if snapshot.mouse is None:
        return UserTemporaryBlock(-1.0, -1.0, 0.0, secs_since_any_click)
    mx, my = snapshot.mouse
    x = min(max(mx / snapshot.win_w, 0.0), 1.0)
    y = min(max((my - snapshot.scroll_y) / snapshot.win_h, 0.0), 1.0)
    return UserTemporaryBlock(x, y, 1.0, secs_since_any_click)


def timestamp_features(
    session: ReadingSession, history: UserHistory, msg_id: str, t: int
) -> TimestampFeatures:
    """All four temporary blocks for one (message, second)."""
    snapshot = SessionTimeline(session).snapshot(t)
    idx = session.layout.index_of(msg_id)
    baselines = baseline_matrix(snapshot)[idx]
    return TimestampFeatures(
        msg_id=msg_id,
        t=t,
        message=message_temporary_features(session, msg_id, t),
        user=user_temporary_features(session, t),
        pattern=history.pattern_features(session.layout, t),
        baseline=baselines,
    )


def _session_click_state(session: ReadingSession):
    """(clicks by message, any-click seconds, distinct clicked msg ids)."""
    per_msg: dict[str, list[int]] = {}
    any_clicks: list[int] = []
    for s, m in _click_seconds(session.events):
        any_clicks.append(s)
        if m is not None and m in session.layout.msg_ids:
            per_msg.setdefault(m, []).append(s)
    return per_msg, any_clicks


def session_features_all(session: ReadingSession) -> list[SessionalFeatures]:
    """SessionalFeatures for every message, sharing one snapshot pass."""
    timeline = SessionTimeline(session)
    seconds = session.seconds()
    n_seconds = len(seconds)
    layout = session.layout
    n_msgs = len(layout.messages)

    share = np.zeros((n_seconds, n_msgs))
    position = np.full((n_seconds, n_msgs), np.nan)
    btimes = np.zeros((n_msgs, 3))
    for i, t in enumerate(seconds):
        snapshot = timeline.snapshot(t)
        btimes += np.asarray(baseline_matrix(snapshot))
        for j, view in enumerate(snapshot.views):
            share[i, j] = view.window_share
            if view.visible_rect is not None:
                position[i, j] = view.center_offset

    moved_h, moved_v, scrolled = _axis_occupancy(session.events, seconds.start, seconds.stop - 1)
    per_msg_clicks, _ = _session_click_state(session)
    clicked_fraction = len(per_msg_clicks) / n_msgs

    out = []
    for j, m in enumerate(layout.messages):
        visible = share[:, j] > 0
        if visible.any():
            avg_position = float(np.nanmean(position[:, j]))
        else:
            avg_position = -1.0
        out.append(
            SessionalFeatures(
                msg_id=m.msg_id,
                session_id=session.session_id,
                avg_window_share=float(share[:, j].mean()),
                avg_position_on_window=avg_position,
                clicked=1.0 if m.msg_id in per_msg_clicks else 0.0,
                secs_visible=int(visible.sum()),
                baseline_times=tuple(float(v) for v in btimes[j]),
                avg_move_freq_h=float(moved_h.mean()),
                avg_move_freq_v=float(moved_v.mean()),
                avg_scroll_freq=float(scrolled.mean()),
                clicked_fraction=clicked_fraction,
            )
        )
    return out


def sessional_features(session: ReadingSession, msg_id: str) -> SessionalFeatures:
    idx = session.layout.index_of(msg_id)
    return session_features_all(session)[idx]


@dataclass
class FeatureMatrix:
    """Rows of features plus bookkeeping ids for split construction.

    For timestamp granularity: one row per (message, second), `label` is the
    0/1 gaze indicator and `t` holds the second. For session granularity:
    one row per (message, session) with `label_time` (true gaze seconds) and
    `label_class` (read-level index).
    """

    schema: str
    columns: tuple[str, ...]
    X: np.ndarray
    user_ids: np.ndarray
    session_ids: np.ndarray
    msg_ids: np.ndarray
    t: np.ndarray | None = None
    label: np.ndarray | None = None
    label_time: np.ndarray | None = None
    label_class: np.ndarray | None = None
    words: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.X).all():
            raise FeatureError("feature matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column_indices(self, names: Sequence[str]) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.columns)}
        try:
            return np.array([lookup[n] for n in names], dtype=int)
        except KeyError as exc:
            raise FeatureError(f"unknown feature column {exc.args[0]!r}") from None

    def rows_for_sessions(self, session_ids: Iterable[str]) -> np.ndarray:
        wanted = set(session_ids)
        return np.array([sid in wanted for sid in self.session_ids], dtype=bool)


def _session_timestamp_rows(session: ReadingSession, history: UserHistory, labeled: bool):
    timeline = SessionTimeline(session)
    seconds = session.seconds()
    layout = session.layout
    n_msgs = len(layout.messages)
    n_rows = len(seconds) * n_msgs
    X = np.empty((n_rows, len(TS_COLUMNS)), dtype=np.float64)
    y = np.zeros(n_rows, dtype=np.float64) if labeled else None

    per_msg_clicks, any_clicks = _session_click_state(session)
    click_lists = {m: sorted(ss) for m, ss in per_msg_clicks.items()}
    any_clicks = sorted(any_clicks)
    last_any_idx = 0
    last_any: int | None = None
    last_msg: dict[str, int] = {}
    msg_click_idx = {m: 0 for m in click_lists}

    msg_index = {m.msg_id: j for j, m in enumerate(layout.messages)}
    row = 0
    for t in seconds:
        while last_any_idx < len(any_clicks) and any_clicks[last_any_idx] <= t:
            last_any = any_clicks[last_any_idx]
            last_any_idx += 1
        for m, ss in click_lists.items():
            i = msg_click_idx[m]
            while i < len(ss) and ss[i] <= t:
                last_msg[m] = ss[i]
                i += 1
            msg_click_idx[m] = i

        snapshot = timeline.snapshot(t)
        pattern = history.pattern_features(layout, t).values()
        user = _user_block(snapshot, _gap(t, last_any))
        user_vals = (user.mouse_x_norm, user.mouse_y_norm, user.mouse_known, user.secs_since_any_click)
        baseline_rows = baseline_matrix(snapshot)
        gazed = session.labels.get(t) if labeled else None
        for view, brow in zip(snapshot.views, baseline_rows):
            block = _message_block_from_view(view, _gap(t, last_msg.get(view.msg_id)))
            X[row, 0:4] = (block.position_on_window, block.visible, block.window_share, block.secs_since_click)
            X[row, 4:8] = user_vals
            X[row, 8:21] = pattern
            X[row, 21:24] = brow
            if labeled:
                y[row] = 1.0 if gazed == view.msg_id else 0.0
            row += 1

    msg_ids = np.array(list(layout.msg_ids) * len(seconds), dtype=object)
    t_col = np.repeat(np.fromiter(seconds, dtype=np.int64), n_msgs)
    return X, y, msg_ids, t_col


def build_dataset(
    runs: Sequence,
    granularity: str = "timestamp",
    labeled: bool = True,
) -> FeatureMatrix:
    """One feature row per (message, second) or per (message, session).

    `runs` is a sequence of objects with `.user_id`, `.events` and
    `.sessions`; label-bearing datasets require every session to carry
    labels. Construction is deterministic: identical runs give bit-identical
    matrices.
    """
    if granularity not in ("timestamp", "session"):
        raise FeatureError(f"unknown granularity {granularity!r}")
    blocks_X = []
    blocks_y = []
    users: list[np.ndarray] = []
    sessions: list[np.ndarray] = []
    msgs: list[np.ndarray] = []
    ts: list[np.ndarray] = []
    times: list[np.ndarray] = []
    classes: list[np.ndarray] = []
    words_col: list[np.ndarray] = []

    for run in runs:
        history = UserHistory(run.events)
        for session in run.sessions:
            if labeled and session.labels is None:
                raise FeatureError(f"session {session.session_id!r} has no labels")
            n_msgs = len(session.layout.messages)
            if granularity == "timestamp":
                X, y, msg_ids, t_col = _session_timestamp_rows(session, history, labeled)
                blocks_X.append(X)
                if labeled:
                    blocks_y.append(y)
                msgs.append(msg_ids)
                ts.append(t_col)
                n_rows = X.shape[0]
            else:
                feats = session_features_all(session)
                X = np.vstack([f.vector() for f in feats])
                blocks_X.append(X)
                msgs.append(np.array(list(session.layout.msg_ids), dtype=object))
                n_rows = n_msgs
                word_counts = np.array([m.words for m in session.layout.messages], dtype=np.int64)
                words_col.append(word_counts)
                if labeled:
                    true_secs = session.true_reading_seconds()
                    tt = np.array([float(true_secs[m]) for m in session.layout.msg_ids])
                    times.append(tt)
                    classes.append(
                        np.array(
                            [
                                LEVEL_INDEX[classify_read_level(t_m, w)]
                                for t_m, w in zip(tt, word_counts)
                            ],
                            dtype=np.int64,
                        )
                    )
            users.append(np.array([run.user_id] * n_rows, dtype=object))
            sessions.append(np.array([session.session_id] * n_rows, dtype=object))

    if not blocks_X:
        raise FeatureError("no sessions in corpus")
    if granularity == "timestamp":
        return FeatureMatrix(
            schema=TS_SCHEMA_VERSION,
            columns=TS_COLUMNS,
            X=np.vstack(blocks_X),
            user_ids=np.concatenate(users),
            session_ids=np.concatenate(sessions),
            msg_ids=np.concatenate(msgs),
            t=np.concatenate(ts),
            label=np.concatenate(blocks_y) if labeled else None,
        )
    return FeatureMatrix(
        schema=SESS_SCHEMA_VERSION,
        columns=SESS_COLUMNS,
        X=np.vstack(blocks_X),
        user_ids=np.concatenate(users),
        session_ids=np.concatenate(sessions),
        msg_ids=np.concatenate(msgs),
        words=np.concatenate(words_col),
        label_time=np.concatenate(times) if labeled else None,
        label_class=np.concatenate(classes) if labeled else None,
    )


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring with statistics taken from the training split
    only; zero-variance columns pass through unscaled."""

    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, columns: Sequence[str]) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        return cls(columns=tuple(columns), mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            columns=tuple(d["columns"]),
            mean=np.array(d["mean"], dtype=np.float64),
            std=np.array(d["std"], dtype=np.float64),
        )


def _format_value(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    f = float(v)
    if f.is_integer():
        return str(int(f))
    return repr(f)


def save_matrix(matrix: FeatureMatrix, path) -> None:
    """Columnar text persistence: versioned header plus numeric rows.

    String ids are interned into JSON tables on comment lines so the data
    rows stay purely numeric and byte-stable.
    """
    users = sorted(set(matrix.user_ids))
    sessions = sorted(set(matrix.session_ids))
    messages = sorted(set(matrix.msg_ids))
    u_idx = {u: i for i, u in enumerate(users)}
    s_idx = {s: i for i, s in enumerate(sessions)}
    m_idx = {m: i for i, m in enumerate(messages)}

    header = ["user", "session", "msg"]
    extra_cols: list[np.ndarray] = [
        np.array([u_idx[u] for u in matrix.user_ids]),
        np.array([s_idx[s] for s in matrix.session_ids]),
        np.array([m_idx[m] for m in matrix.msg_ids]),
    ]
    for name, col in (
        ("t", matrix.t),
        ("label", matrix.label),
        ("label_time", matrix.label_time),
        ("label_class", matrix.label_class),
        ("words", matrix.words),
    ):
        if col is not None:
            header.append(name)
            extra_cols.append(col)
    header.extend(matrix.columns)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# readmeter-matrix schema={matrix.schema}\n")
        fh.write(f"# users {json.dumps(users, separators=(',', ':'))}\n")
        fh.write(f"# sessions {json.dumps(sessions, separators=(',', ':'))}\n")
        fh.write(f"# messages {json.dumps(messages, separators=(',', ':'))}\n")
        fh.write("\t".join(header) + "\n")
        for i in range(matrix.n_rows):
            cells = [_format_value(col[i]) for col in extra_cols]
            cells.extend(_format_value(v) for v in matrix.X[i])
            fh.write("\t".join(cells) + "\n")


def load_matrix(path) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# readmeter-matrix schema="):
            raise FeatureError(f"{path}: not a feature matrix file")
        schema = first.split("schema=", 1)[1]
        users = json.loads(fh.readline().strip().removeprefix("# users "))
        sessions = json.loads(fh.readline().strip().removeprefix("# sessions "))
        messages = json.loads(fh.readline().strip().removeprefix("# messages "))
        header = fh.readline().strip().split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]

    data = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(header)))
    cols = {name: data[:, i] for i, name in enumerate(header)}
    feature_names = tuple(h for h in header if h not in
                          ("user", "session", "msg", "t", "label", "label_time", "label_class", "words"))
    X = np.column_stack([cols[c] for c in feature_names]) if rows else np.zeros((0, len(feature_names)))

    def ids(table, key):
        return np.array([table[int(i)] for i in cols[key]], dtype=object)

    return FeatureMatrix(
        schema=schema,
        columns=feature_names,
        X=X,
        user_ids=ids(users, "user"),
        session_ids=ids(sessions, "session"),
        msg_ids=ids(messages, "msg"),
        t=cols["t"].astype(np.int64) if "t" in cols else None,
        label=cols.get("label"),
        label_time=cols.get("label_time"),
        label_class=cols["label_class"].astype(np.int64) if "label_class" in cols else None,
        words=cols["words"].astype(np.int64) if "words" in cols else None,
    )
