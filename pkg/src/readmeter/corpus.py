"""Corpus container and on-disk layout.

A corpus directory holds layouts/, one event JSONL per user under events/,
per-session label files under labels/<user>/, and a manifest.json tying
them together. Loading always re-derives sessions from the event stream,
so every corpus read exercises sessionization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .events import (
    InteractionEvent,
    NewsletterLayout,
    ReadingSession,
    parse_event_log,
    parse_labels,
    parse_layout,
    serialize_events,
    serialize_labels,
    sessionize,
)

MANIFEST_NAME = "manifest.json"
CORPUS_FORMAT = "readmeter-corpus-v1"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class UserRun:
    """One user's full event stream and its labeled sessions."""

    user_id: str
    events: tuple[InteractionEvent, ...]
    sessions: tuple[ReadingSession, ...]


@dataclass(frozen=True)
class Corpus:
    layouts: Mapping[str, NewsletterLayout]
    runs: tuple[UserRun, ...]
    meta: dict

    @property
    def sessions(self) -> list[ReadingSession]:
        return [s for run in self.runs for s in run.sessions]

    def sessions_by_user(self) -> dict[str, list[str]]:
        return {run.user_id: [s.session_id for s in run.sessions] for run in self.runs}

    def session_lookup(self) -> dict[str, ReadingSession]:
        return {s.session_id: s for s in self.sessions}


def save_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "layouts").mkdir(parents=True, exist_ok=True)
    (out / "events").mkdir(exist_ok=True)
    manifest: dict = {
        "format": CORPUS_FORMAT,
        "meta": corpus.meta,
        "newsletters": {},
        "users": [],
    }
    for nl_id in sorted(corpus.layouts):
        rel = f"layouts/{nl_id}.json"
        (out / rel).write_text(corpus.layouts[nl_id].to_json() + "\n", encoding="utf-8")
        manifest["newsletters"][nl_id] = rel
    for run in corpus.runs:
        events_rel = f"events/{run.user_id}.jsonl"
        (out / events_rel).write_text(serialize_events(run.events), encoding="utf-8")
        label_dir = out / "labels" / run.user_id
        label_dir.mkdir(parents=True, exist_ok=True)
        labels = {}
        for i, session in enumerate(run.sessions):
            if session.labels is None:
                continue
            rel = f"labels/{run.user_id}/{i}.jsonl"
            (out / rel).write_text(serialize_labels(session.labels), encoding="utf-8")
            labels[session.session_id] = rel
        manifest["users"].append(
            {"user_id": run.user_id, "events": events_rel, "labels": labels}
        )
    (out / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_corpus(corpus_dir: str | Path) -> Corpus:
    root = Path(corpus_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise CorpusError(f"{manifest_path}: no corpus manifest found")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != CORPUS_FORMAT:
        raise CorpusError(f"{manifest_path}: unsupported format {manifest.get('format')!r}")

    layouts = {}
    for nl_id, rel in manifest["newsletters"].items():
        layouts[nl_id] = parse_layout((root / rel).read_text(encoding="utf-8"))

    runs = []
    for user in manifest["users"]:
        user_id = user["user_id"]
        with open(root / user["events"], "r", encoding="utf-8") as fh:
            events = parse_event_log(fh)
        sessions = sessionize(events, layouts, user_id=user_id)
        label_map = user.get("labels", {})
        labeled = []
        for session in sessions:
            rel = label_map.get(session.session_id)
            if rel is None:
                labeled.append(session)
                continue
            with open(root / rel, "r", encoding="utf-8") as fh:
                labels = parse_labels(fh)
            labeled.append(session.with_labels(labels))
        runs.append(UserRun(user_id=user_id, events=tuple(events), sessions=tuple(labeled)))
    return Corpus(layouts=layouts, runs=tuple(runs), meta=manifest.get("meta", {}))
