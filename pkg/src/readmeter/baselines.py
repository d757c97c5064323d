"""The three heuristic per-timestamp read-probability estimators.

All three consume a WindowSnapshot and never recompute geometry, so
baseline 1 is bit-identical to the snapshot's window share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .events import WindowSnapshot


@dataclass(frozen=True)
class TimestampPrediction:
    msg_id: str
    t: int
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability out of range: {self.p}")


def baseline_window_share(snapshot: WindowSnapshot, msg_id: str) -> float:
    """p = the message's current share of the window area."""
    return snapshot.view(msg_id).window_share


def _center_weights(snapshot: WindowSnapshot) -> list[float]:
    # Weight = share / (1 + d/diag): bounded substitute for a raw inverse
    # distance, which is singular when the message sits dead center.
    diag = math.hypot(snapshot.win_w, snapshot.win_h)
    cx, cy = snapshot.win_w / 2.0, snapshot.win_h / 2.0
    weights = []
    for view in snapshot.views:
        if view.visible_rect is None:
            weights.append(0.0)
            continue
        x, y, w, h = view.visible_rect
        d = math.hypot(x + w / 2.0 - cx, y + h / 2.0 - cy)
        weights.append(view.window_share / (1.0 + d / diag))
    return weights


def baseline_center_distance(snapshot: WindowSnapshot, msg_id: str) -> float:
    """Window share weighted by closeness to the window center, normalized
    over the currently visible messages (0 when nothing is visible)."""
    snapshot.view(msg_id)
    weights = _center_weights(snapshot)
    total = sum(weights)
    if total == 0.0:
        return 0.0
    idx = next(i for i, v in enumerate(snapshot.views) if v.msg_id == msg_id)
    return weights[idx] / total


def _point_rect_distance(px: float, py: float, rect: tuple[float, float, float, float]) -> float:
    x, y, w, h = rect
    dx = max(x - px, 0.0, px - (x + w))
    dy = max(y - py, 0.0, py - (y + h))
    return math.hypot(dx, dy)


def mouse_proximity_winner(snapshot: WindowSnapshot) -> str | None:
    """msg_id of the visible message closest to the mouse, or None.

    Returns None when the mouse is unknown or nothing is visible. Ties are
    broken by document order, so invisible messages can never win.
    """
    if snapshot.mouse is None:
        return None
    mx, my = snapshot.mouse
    best: tuple[float, int] | None = None
    for i, view in enumerate(snapshot.views):
        if view.visible_rect is None:
            continue
        x, y, w, h = view.visible_rect
        doc_rect = (x, y + snapshot.scroll_y, w, h)
        d = _point_rect_distance(mx, my, doc_rect)
        if best is None or d < best[0]:
            best = (d, i)
    if best is None:
        return None
    return snapshot.views[best[1]].msg_id


def baseline_mouse_proximity(snapshot: WindowSnapshot, msg_id: str) -> float:
    """p = 1 for the visible message whose clipped rect is nearest the last
    known mouse position, 0 for everything else (all 0 if mouse unknown)."""
    snapshot.view(msg_id)
    winner = mouse_proximity_winner(snapshot)
    return 1.0 if winner == msg_id else 0.0


def baseline_vector(snapshot: WindowSnapshot, msg_id: str) -> tuple[float, float, float]:
    """(p1, p2, p3) for one message at one snapshot."""
    return (
        baseline_window_share(snapshot, msg_id),
        baseline_center_distance(snapshot, msg_id),
        baseline_mouse_proximity(snapshot, msg_id),
    )


def baseline_matrix(snapshot: WindowSnapshot) -> list[tuple[float, float, float]]:
    """(p1, p2, p3) rows for every message in layout order, sharing one
    geometry pass so bulk extraction matches the per-message entry points."""
    weights = _center_weights(snapshot)
    total = sum(weights)
    winner = mouse_proximity_winner(snapshot)
    rows = []
    for view, weight in zip(snapshot.views, weights):
        p2 = weight / total if total > 0.0 else 0.0
        rows.append((view.window_share, p2, 1.0 if view.msg_id == winner else 0.0))
    return rows
