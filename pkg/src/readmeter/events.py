"""Canonical event model: log parsing, sessionization, per-second snapshots.

Coordinate conventions: positions are document pixels with y growing
downward; the visible window spans [0, win_w) x [scroll_y, scroll_y + win_h)
in document coordinates. Seconds are discretized by flooring event
timestamps, so the state at integer second s is the latest event with
t <= s. All types are immutable after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Mapping, Sequence

EVENT_KINDS = ("open", "close", "move", "scroll", "click", "viewport", "visibility")

# Per-kind field applicability; anything else must be absent on the wire.
_FIELDS_BY_KIND: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "open": (("newsletter_id",), ()),
    "close": ((), ()),
    "move": (("x", "y"), ()),
    "scroll": (("scroll_y",), ()),
    "click": (("x", "y"), ("msg_id",)),
    "viewport": (("win_w", "win_h"), ()),
    "visibility": (("visible",), ()),
}

_KEY_ORDER = ("t", "kind", "x", "y", "scroll_y", "win_w", "win_h", "msg_id", "visible", "newsletter_id")
_NUMERIC_KEYS = frozenset({"t", "x", "y", "scroll_y", "win_w", "win_h"})

# Viewport fallback used when a session carries no viewport event; snapshots
# record that the fallback fired so reports can surface it.
DEFAULT_WIN_W = 1280.0
DEFAULT_WIN_H = 800.0


class LogParseError(ValueError):
    """Malformed record or decreasing timestamp in an event log."""


class SessionError(ValueError):
    """Event stream violates the open/close/visibility session structure."""


class LayoutError(ValueError):
    """Layout geometry or identifier constraints violated."""


class LabelError(ValueError):
    """Gaze label file inconsistent with its session."""


def _require_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"field {key!r} must be a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"field {key!r} must be finite")
    return v


@dataclass(frozen=True)
class InteractionEvent:
    """One raw browser interaction record.

    Fields not applicable to ``kind`` must be None; construction enforces
    the per-kind schema so every event in the system is well formed.
    """

    t: float
    kind: str
    x: float | None = None
    y: float | None = None
    scroll_y: float | None = None
    win_w: float | None = None
    win_h: float | None = None
    msg_id: str | None = None
    visible: bool | None = None
    newsletter_id: str | None = None

    def __post_init__(self):
        if self.kind not in _FIELDS_BY_KIND:
            raise ValueError(f"unknown event kind {self.kind!r}")
        t = _require_number(self.t, "t")
        if t < 0:
            raise ValueError("event time must be non-negative")
        object.__setattr__(self, "t", t)
        required, optional = _FIELDS_BY_KIND[self.kind]
        allowed = set(required) | set(optional)
        for key in _KEY_ORDER[2:]:
            value = getattr(self, key)
            if key in required and value is None:
                raise ValueError(f"{self.kind} event requires field {key!r}")
            if value is not None and key not in allowed:
                raise ValueError(f"field {key!r} not applicable to {self.kind} events")
        for key in _NUMERIC_KEYS - {"t"}:
            value = getattr(self, key)
            if value is not None:
                object.__setattr__(self, key, _require_number(value, key))
        if self.visible is not None and not isinstance(self.visible, bool):
            raise ValueError("field 'visible' must be a boolean")
        if self.kind == "viewport" and (self.win_w <= 0 or self.win_h <= 0):
            raise ValueError("viewport dimensions must be positive")

    def to_record(self) -> dict:
        record = {}
        for key in _KEY_ORDER:
            value = getattr(self, key)
            if value is None:
                continue
            record[key] = _canonical_number(value) if key in _NUMERIC_KEYS else value
        return record


def _canonical_number(v: float):
    # Integral values serialize without a fractional part so Python and
    # browser writers produce identical bytes.
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def event_to_json(event: InteractionEvent) -> str:
    return json.dumps(event.to_record(), separators=(",", ":"))


def serialize_events(events: Iterable[InteractionEvent]) -> str:
    """Render events as canonical JSONL (one event per line, trailing newline)."""
    lines = [event_to_json(e) for e in events]
    return "".join(line + "\n" for line in lines)


def _event_from_record(record: dict) -> InteractionEvent:
    if not isinstance(record, dict):
        raise ValueError("record must be a JSON object")
    unknown = set(record) - set(_KEY_ORDER)
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)}")
    if "t" not in record or "kind" not in record:
        raise ValueError("record requires 't' and 'kind'")
    return InteractionEvent(**record)


def parse_event_log(stream: IO | Iterable[str] | Iterable[bytes]) -> list[InteractionEvent]:
    """Parse a newline-delimited event log into validated events.

    Raises LogParseError with a 1-based line number on a malformed record
    or on a timestamp decrease.
    """
    events: list[InteractionEvent] = []
    last_t = -math.inf
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            event = _event_from_record(record)
        except (ValueError, TypeError) as exc:
            raise LogParseError(f"line {lineno}: {exc}") from exc
        if event.t < last_t:
            raise LogParseError(
                f"line {lineno}: timestamp {event.t} decreases below {last_t}"
            )
        last_t = event.t
        events.append(event)
    return events


@dataclass(frozen=True)
class MessageGeometry:
    """Document-pixel bounding box and word count of one message."""

    msg_id: str
    x: float
    y: float
    w: float
    h: float
    words: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise LayoutError(f"message {self.msg_id!r} must have positive extent")
        if self.words < 1:
            raise LayoutError(f"message {self.msg_id!r} needs words >= 1")

    @property
    def rect(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class NewsletterLayout:
    newsletter_id: str
    messages: tuple[MessageGeometry, ...]
    doc_height: float

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise LayoutError("layout requires at least one message")
        ids = [m.msg_id for m in self.messages]
        if len(set(ids)) != len(ids):
            raise LayoutError("msg_ids must be unique within a newsletter")
        for m in self.messages:
            if m.y < 0 or m.y + m.h > self.doc_height:
                raise LayoutError(
                    f"message {m.msg_id!r} extends outside [0, doc_height]"
                )
        object.__setattr__(self, "_index", {m.msg_id: i for i, m in enumerate(self.messages)})

    def index_of(self, msg_id: str) -> int:
        try:
            return self._index[msg_id]
        except KeyError:
            raise LayoutError(f"unknown msg_id {msg_id!r}") from None

    def message(self, msg_id: str) -> MessageGeometry:
        return self.messages[self.index_of(msg_id)]

    @property
    def msg_ids(self) -> tuple[str, ...]:
        return tuple(m.msg_id for m in self.messages)

    def to_json(self) -> str:
        doc = {
            "newsletter_id": self.newsletter_id,
            "doc_height": _canonical_number(float(self.doc_height)),
            "messages": [
                {
                    "msg_id": m.msg_id,
                    "x": _canonical_number(m.x),
                    "y": _canonical_number(m.y),
                    "w": _canonical_number(m.w),
                    "h": _canonical_number(m.h),
                    "words": m.words,
                }
                for m in self.messages
            ],
        }
        return json.dumps(doc, separators=(",", ":"))


def parse_layout(text: str | bytes) -> NewsletterLayout:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
        messages = tuple(
            MessageGeometry(
                msg_id=m["msg_id"], x=float(m["x"]), y=float(m["y"]),
                w=float(m["w"]), h=float(m["h"]), words=int(m["words"]),
            )
            for m in doc["messages"]
        )
        return NewsletterLayout(
            newsletter_id=doc["newsletter_id"],
            messages=messages,
            doc_height=float(doc["doc_height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, LayoutError):
            raise
        raise LayoutError(f"malformed layout document: {exc}") from exc


@dataclass(frozen=True)
class ReadingSession:
    """One contiguous visible interval of a user on one newsletter.

    ``labels``, when present, maps every integer second in [t0, t1) to the
    gazed msg_id or None.
    """

    user_id: str
    newsletter_id: str
    t0: float
    t1: float
    events: tuple[InteractionEvent, ...]
    layout: NewsletterLayout
    labels: Mapping[int, str | None] | None = None
    session_id: str = ""

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise SessionError("session requires t1 > t0")
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if not (self.t0 <= e.t < self.t1):
                raise SessionError(f"event at t={e.t} outside session [{self.t0}, {self.t1})")
        if self.labels is not None:
            expected = set(self.seconds())
            got = set(self.labels)
            if got != expected:
                raise LabelError(
                    f"labels must cover exactly seconds [{self.t0}, {self.t1}): "
                    f"missing={sorted(expected - got)[:5]} extra={sorted(got - expected)[:5]}"
                )
            for s, msg_id in self.labels.items():
                if msg_id is not None:
                    self.layout.index_of(msg_id)
            object.__setattr__(self, "labels", dict(self.labels))

    def seconds(self) -> range:
        return range(math.ceil(self.t0), math.ceil(self.t1))

    def with_labels(self, labels: Mapping[int, str | None]) -> "ReadingSession":
        return replace(self, labels=labels)

    def true_reading_seconds(self) -> dict[str, int]:
        """Per-message count of labeled gaze seconds (requires labels)."""
        if self.labels is None:
            raise LabelError("session has no labels")
        counts = {m: 0 for m in self.layout.msg_ids}
        for msg_id in self.labels.values():
            if msg_id is not None:
                counts[msg_id] += 1
        return counts


def sessionize(
    events: Sequence[InteractionEvent],
    layouts: Mapping[str, NewsletterLayout],
    user_id: str = "",
) -> list[ReadingSession]:
    """Split one user's event stream into reading sessions.

    A session starts at each open event, or at visibility=true after an
    interruption, and ends at close, at visibility=false, or (unterminated)
    at the final event's second, inclusive. Events during invisible
    intervals belong to no session; sessions whose bounds collapse to an
    empty interval are dropped.
    """
    for a, b in zip(events, events[1:]):
        if b.t < a.t:
            raise LogParseError("events must be non-decreasing in t")

    sessions: list[ReadingSession] = []
    newsletter: str | None = None   # newsletter currently open in the tab
    start: float | None = None      # start of the running session, None while hidden
    collected: list[InteractionEvent] = []

    def close_out(end_t: float):
        nonlocal start, collected
        if start is not None and end_t > start:
            layout = layouts[newsletter]
            sessions.append(
                ReadingSession(
                    user_id=user_id,
                    newsletter_id=newsletter,
                    t0=start,
                    t1=end_t,
                    events=tuple(e for e in collected if start <= e.t < end_t),
                    layout=layout,
                    session_id=f"{user_id}:{len(sessions)}",
                )
            )
        start = None
        collected = []

    for event in events:
        if event.kind == "open":
            if newsletter is not None:
                raise SessionError(f"open at t={event.t} while {newsletter!r} is still open")
            if event.newsletter_id not in layouts:
                raise SessionError(f"unknown newsletter_id {event.newsletter_id!r}")
            newsletter = event.newsletter_id
            start = event.t
            collected = [event]
        elif event.kind == "close":
            if newsletter is None:
                raise SessionError(f"close at t={event.t} without a matching open")
            close_out(event.t)
            newsletter = None
        elif event.kind == "visibility":
            if newsletter is None:
                continue  # stray visibility outside any newsletter
            if event.visible is False and start is not None:
                close_out(event.t)
            elif event.visible is True and start is None:
                start = event.t
                collected = []
        else:
            if start is not None:
                collected.append(event)

    if newsletter is not None and start is not None:
        last_t = collected[-1].t if collected else start
        close_out(math.floor(last_t) + 1.0)
    return sessions


def parse_labels(stream: IO | Iterable[str] | Iterable[bytes]) -> dict[int, str | None]:
    labels: dict[int, str | None] = {}
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            if set(record) != {"t", "msg_id"}:
                raise ValueError("label record requires exactly keys {'t', 'msg_id'}")
            t = record["t"]
            if isinstance(t, bool) or not isinstance(t, int):
                raise ValueError("label 't' must be an integer second")
            msg_id = record["msg_id"]
            if msg_id is not None and not isinstance(msg_id, str):
                raise ValueError("label 'msg_id' must be a string or null")
        except (ValueError, TypeError) as exc:
            raise LabelError(f"line {lineno}: {exc}") from exc
        if t in labels:
            raise LabelError(f"line {lineno}: duplicate second {t}")
        labels[t] = msg_id
    return labels


def serialize_labels(labels: Mapping[int, str | None]) -> str:
    lines = [
        json.dumps({"t": int(t), "msg_id": labels[t]}, separators=(",", ":"))
        for t in sorted(labels)
    ]
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class MessageView:
    """One message's geometry clipped against the window at one second.

    visible_rect is (x, y, w, h) in window coordinates, None when the
    message is entirely off screen; center_offset is the window-normalized
    vertical center of the visible part.
    """

    msg_id: str
    visible_rect: tuple[float, float, float, float] | None
    window_share: float
    center_offset: float | None


@dataclass(frozen=True)
class WindowSnapshot:
    t: int
    scroll_y: float
    win_w: float
    win_h: float
    mouse: tuple[float, float] | None
    views: tuple[MessageView, ...]
    viewport_defaulted: bool = False

    def view(self, msg_id: str) -> MessageView:
        for v in self.views:
            if v.msg_id == msg_id:
                return v
        raise LayoutError(f"unknown msg_id {msg_id!r}")


def clip_to_window(
    rect: tuple[float, float, float, float],
    scroll_y: float,
    win_w: float,
    win_h: float,
) -> tuple[tuple[float, float, float, float] | None, float, float | None]:
    """Clip a document rect against the window; returns (rect, share, center).

    The returned rect is in window coordinates. share is clipped area over
    window area; center is the clipped part's vertical center / win_h.
    """
    x, y, w, h = rect
    x0 = max(x, 0.0)
    x1 = min(x + w, win_w)
    y0 = max(y, scroll_y)
    y1 = min(y + h, scroll_y + win_h)
    if x1 <= x0 or y1 <= y0:
        return None, 0.0, None
    share = ((x1 - x0) * (y1 - y0)) / (win_w * win_h)
    center = ((y0 + y1) / 2.0 - scroll_y) / win_h
    return (x0, y0 - scroll_y, x1 - x0, y1 - y0), share, center


class SessionTimeline:
    """Per-second interaction state for one session, precomputed once.

    snapshot(t) is pure: the same (session, t) always yields bit-identical
    snapshots because state arrays are filled deterministically from the
    session's events.
    """

    def __init__(self, session: ReadingSession):
        self.session = session
        seconds = session.seconds()
        self.first_second = seconds.start
        n = len(seconds)
        self.scroll = [0.0] * n
        self.win_w = [DEFAULT_WIN_W] * n
        self.win_h = [DEFAULT_WIN_H] * n
        self.mouse: list[tuple[float, float] | None] = [None] * n
        self.viewport_defaulted = [True] * n

        scroll = 0.0
        win = None
        mouse = None
        idx = 0
        events = session.events
        for i, s in enumerate(seconds):
            while idx < len(events) and events[idx].t <= s:
                e = events[idx]
                if e.kind == "scroll":
                    scroll = e.scroll_y
                elif e.kind == "viewport":
                    win = (e.win_w, e.win_h)
                elif e.kind == "move":
                    mouse = (e.x, e.y)
                idx += 1
            self.scroll[i] = scroll
            if win is not None:
                self.win_w[i], self.win_h[i] = win
                self.viewport_defaulted[i] = False
            self.mouse[i] = mouse

    def snapshot(self, t: int) -> WindowSnapshot:
        seconds = self.session.seconds()
        if t not in seconds:
            raise SessionError(
                f"t={t} outside session seconds [{seconds.start}, {seconds.stop})"
            )
        i = t - self.first_second
        scroll, ww, wh = self.scroll[i], self.win_w[i], self.win_h[i]
        views = []
        for m in self.session.layout.messages:
            rect, share, center = clip_to_window(m.rect, scroll, ww, wh)
            views.append(MessageView(m.msg_id, rect, share, center))
        return WindowSnapshot(
            t=t,
            scroll_y=scroll,
            win_w=ww,
            win_h=wh,
            mouse=self.mouse[i],
            views=tuple(views),
            viewport_defaulted=self.viewport_defaulted[i],
        )


def snapshot_at(session: ReadingSession, t: int) -> WindowSnapshot:
    """Window state at integer second t (t0 <= t < t1)."""
    return SessionTimeline(session).snapshot(t)
