"""Adapter mapping an externally published interaction dataset into the
canonical corpus files.

The adapter consumes three CSV files; the expected columns are documented
here rather than hard-coded assumptions spread through the core:

interactions.csv
    user_id, newsletter_id, t, event, x, y, scroll_y, win_w, win_h,
    msg_id, visible
    One row per browser event. `event` accepts either the canonical kind
    names or the common browser source names (mousemove, mousedown,
    scroll, resize, visibilitychange, pageopen, pageclose). Numeric cells
    may be blank when inapplicable. `visible` is true/false.
labels.csv  (optional)
    user_id, t, msg_id
    Per-second gaze labels; a blank msg_id means gaze off content. The
    second `t` must fall inside one of the user's sessions.
messages.csv
    newsletter_id, msg_id, x, y, w, h, words
    Document-pixel geometry and word counts; doc_height is taken as the
    bottom of the lowest message.

Rows are grouped per user and sorted by time before sessionization, so
interleaved exports are accepted.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

from .corpus import Corpus, UserRun, save_corpus
from .events import (
    InteractionEvent,
    MessageGeometry,
    NewsletterLayout,
    sessionize,
)

_EVENT_NAME_MAP = {
    "open": "open",
    "pageopen": "open",
    "page_open": "open",
    "close": "close",
    "pageclose": "close",
    "page_close": "close",
    "move": "move",
    "mousemove": "move",
    "scroll": "scroll",
    "click": "click",
    "mousedown": "click",
    "mouseclick": "click",
    "viewport": "viewport",
    "resize": "viewport",
    "visibility": "visibility",
    "visibilitychange": "visibility",
}

_TRUTHY = {"true", "1", "yes", "visible"}
_FALSY = {"false", "0", "no", "hidden"}


class IngestError(ValueError):
    pass


def _number(row: dict, key: str) -> float | None:
    raw = (row.get(key) or "").strip()
    if not raw:
        return None
    try:
        return float(raw)
    except ValueError:
        raise IngestError(f"column {key!r}: not a number: {raw!r}") from None


def _event_from_row(row: dict, lineno: int) -> tuple[str, InteractionEvent]:
    user_id = (row.get("user_id") or "").strip()
    if not user_id:
        raise IngestError(f"interactions row {lineno}: missing user_id")
    raw_kind = (row.get("event") or "").strip().lower()
    kind = _EVENT_NAME_MAP.get(raw_kind)
    if kind is None:
        raise IngestError(f"interactions row {lineno}: unknown event {raw_kind!r}")
    t = _number(row, "t")
    if t is None:
        raise IngestError(f"interactions row {lineno}: missing t")
    fields: dict = {"t": t, "kind": kind}
    if kind == "open":
        fields["newsletter_id"] = (row.get("newsletter_id") or "").strip() or None
    elif kind in ("move", "click"):
        fields["x"] = _number(row, "x")
        fields["y"] = _number(row, "y")
        if kind == "click":
            msg = (row.get("msg_id") or "").strip()
            fields["msg_id"] = msg or None
    elif kind == "scroll":
        fields["scroll_y"] = _number(row, "scroll_y")
    elif kind == "viewport":
        fields["win_w"] = _number(row, "win_w")
        fields["win_h"] = _number(row, "win_h")
    elif kind == "visibility":
        raw = (row.get("visible") or "").strip().lower()
        if raw in _TRUTHY:
            fields["visible"] = True
        elif raw in _FALSY:
            fields["visible"] = False
        else:
            raise IngestError(f"interactions row {lineno}: bad visible value {raw!r}")
    try:
        return user_id, InteractionEvent(**fields)
    except ValueError as exc:
        raise IngestError(f"interactions row {lineno}: {exc}") from exc


def _read_layouts(messages_csv: Path) -> dict[str, NewsletterLayout]:
    by_newsletter: dict[str, list[MessageGeometry]] = defaultdict(list)
    with open(messages_csv, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                by_newsletter[row["newsletter_id"].strip()].append(
                    MessageGeometry(
                        msg_id=row["msg_id"].strip(),
                        x=float(row["x"]), y=float(row["y"]),
                        w=float(row["w"]), h=float(row["h"]),
                        words=int(row["words"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise IngestError(f"messages row {lineno}: {exc}") from exc
    layouts = {}
    for nl_id, messages in by_newsletter.items():
        messages.sort(key=lambda m: (m.y, m.x))
        doc_height = max(m.y + m.h for m in messages)
        layouts[nl_id] = NewsletterLayout(nl_id, tuple(messages), doc_height)
    return layouts


def _read_labels(labels_csv: Path) -> dict[str, dict[int, str | None]]:
    by_user: dict[str, dict[int, str | None]] = defaultdict(dict)
    with open(labels_csv, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                user_id = row["user_id"].strip()
                t = int(row["t"])
                msg = (row.get("msg_id") or "").strip()
            except (KeyError, ValueError) as exc:
                raise IngestError(f"labels row {lineno}: {exc}") from exc
            if t in by_user[user_id]:
                raise IngestError(f"labels row {lineno}: duplicate second {t} for {user_id}")
            by_user[user_id][t] = msg or None
    return by_user


def ingest_dataset(
    interactions_csv: str | Path,
    messages_csv: str | Path,
    labels_csv: str | Path | None = None,
) -> Corpus:
    layouts = _read_layouts(Path(messages_csv))
    events_by_user: dict[str, list[InteractionEvent]] = defaultdict(list)
    with open(interactions_csv, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            user_id, event = _event_from_row(row, lineno)
            events_by_user[user_id].append(event)

    label_map = _read_labels(Path(labels_csv)) if labels_csv else {}

    runs = []
    for user_id in sorted(events_by_user):
        events = sorted(events_by_user[user_id], key=lambda e: e.t)
        sessions = sessionize(events, layouts, user_id=user_id)
        user_labels = label_map.get(user_id, {})
        labeled = []
        for session in sessions:
            if user_labels:
                window = {
                    t: user_labels.get(t) for t in session.seconds()
                }
                missing = [t for t in session.seconds() if t not in user_labels]
                if missing:
                    raise IngestError(
                        f"user {user_id}: labels missing for seconds {missing[:5]} "
                        f"of session {session.session_id}"
                    )
                labeled.append(session.with_labels(window))
            else:
                labeled.append(session)
        runs.append(UserRun(user_id=user_id, events=tuple(events), sessions=tuple(labeled)))
    meta = {"generator": "readmeter-ingest", "source": str(interactions_csv)}
    return Corpus(layouts=layouts, runs=tuple(runs), meta=meta)


def ingest_to_dir(
    interactions_csv: str | Path,
    messages_csv: str | Path,
    out_dir: str | Path,
    labels_csv: str | Path | None = None,
) -> Corpus:
    corpus = ingest_dataset(interactions_csv, messages_csv, labels_csv)
    save_corpus(corpus, out_dir)
    return corpus
