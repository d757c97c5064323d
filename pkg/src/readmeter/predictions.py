"""Prediction dump format: one JSONL record per estimate.

Baselines and trained models all emit the same records, so evaluation can
score any of them identically. Per-timestamp records carry (t, p); session
records carry a reading time or a class distribution.
"""

from __future__ import annotations

import json
from typing import IO, Iterable

from .aggregate import READ_LEVELS, classify_read_level
from .evaluate import MessageEstimate

_KEYS = ("user_id", "session_id", "msg_id", "t", "p", "time", "class_probs")


class PredictionFormatError(ValueError):
    pass


def timestamp_record(user_id: str, session_id: str, msg_id: str, t: int, p: float) -> dict:
    return {"user_id": user_id, "session_id": session_id, "msg_id": msg_id,
            "t": int(t), "p": float(p)}


def time_record(user_id: str, session_id: str, msg_id: str, time: float) -> dict:
    return {"user_id": user_id, "session_id": session_id, "msg_id": msg_id,
            "time": float(time)}


def class_record(user_id: str, session_id: str, msg_id: str, class_probs) -> dict:
    return {"user_id": user_id, "session_id": session_id, "msg_id": msg_id,
            "class_probs": [float(v) for v in class_probs]}


def serialize_predictions(records: Iterable[dict]) -> str:
    lines = []
    for record in records:
        unknown = set(record) - set(_KEYS)
        if unknown:
            raise PredictionFormatError(f"unknown keys {sorted(unknown)}")
        ordered = {k: record[k] for k in _KEYS if k in record}
        lines.append(json.dumps(ordered, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def parse_predictions(stream: IO | Iterable[str]) -> list[dict]:
    records = []
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record must be an object")
            unknown = set(record) - set(_KEYS)
            if unknown:
                raise ValueError(f"unknown keys {sorted(unknown)}")
            for key in ("user_id", "session_id", "msg_id"):
                if not isinstance(record.get(key), str):
                    raise ValueError(f"missing or non-string {key!r}")
            payload = [k for k in ("p", "time", "class_probs") if k in record]
            if len(payload) != 1:
                raise ValueError("record needs exactly one of p / time / class_probs")
        except ValueError as exc:
            raise PredictionFormatError(f"line {lineno}: {exc}") from exc
        records.append(record)
    return records


def estimates_from_records(records: Iterable[dict], words_by_key) -> list[MessageEstimate]:
    """Collapse dump records into per-(session, message) estimates.

    Per-timestamp records are summed into reading times; class records take
    the argmax with ties resolved toward the lower-comprehension level.
    """
    sums: dict[tuple[str, str], float] = {}
    out: list[MessageEstimate] = []
    for record in records:
        key = (record["session_id"], record["msg_id"])
        if "p" in record:
            sums[key] = sums.get(key, 0.0) + record["p"]
        elif "time" in record:
            time = record["time"]
            out.append(MessageEstimate(
                key[0], key[1], time, classify_read_level(time, words_by_key[key])))
        else:
            probs = record["class_probs"]
            best = max(range(len(probs)), key=lambda i: (probs[i], -i))
            out.append(MessageEstimate(key[0], key[1], None, READ_LEVELS[best]))
    for key, time in sums.items():
        out.append(MessageEstimate(
            key[0], key[1], time, classify_read_level(time, words_by_key[key])))
    return out
