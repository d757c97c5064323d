"""Deterministic synthetic corpus generator with per-second gaze labels.

Readers walk a newsletter top to bottom: each message gets a dwell drawn
from an interest-banded log-normal, the scroll keeps the gazed message at
the reader's window anchor (upper part of the window by default, with a
lag), and the mouse follows one of three policies. Events and labels come
from the same trajectory, so a labeled message is always visible at that
second and the aggregation oracle identity holds end to end. Identical
seeds give byte-identical corpora.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
import numpy as np

from .corpus import Corpus, UserRun
from .events import InteractionEvent, MessageGeometry, NewsletterLayout, sessionize

MOUSE_POLICIES = ("tracks-gaze", "parked", "sporadic")

PAGE_WIDTH = 960.0
WIN_W = 1280.0
MESSAGE_GAP = 120.0
PARKED_X = 1024.0  # right of the content column


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ReaderArchetype:
    name: str
    mouse_policy: str
    mouse_noise_px: float = 0.0
    mouse_move_prob: float = 0.25     # sporadic policy only
    scroll_lag_px: float = 600.0      # max scroll movement per second
    click_prob: float = 0.2           # per read (skim/detail) message
    gaze_null_prob: float = 0.10
    peek_prob: float = 0.0            # per-second chance of glancing at a visible neighbor
    revisit_prob: float = 0.0         # chance a read message gets scrolled back to later
    scan_prob: float = 0.0            # chance the session starts with an orientation scan
    dwell_mix: tuple[float, float, float] = (0.40, 0.28, 0.32)  # skip/skim/detail
    dwell_sigma: float = 0.5          # log-normal spread within a dwell band
    read_anchor: float = 0.15         # window height fraction where the gazed message sits
    anchor_jitter: float = 0.025       # per-session spread of the anchor

    def __post_init__(self):
        if self.mouse_policy not in MOUSE_POLICIES:
            raise SimConfigError(f"unknown mouse policy {self.mouse_policy!r}")
        for name in ("mouse_move_prob", "click_prob", "gaze_null_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimConfigError(f"{name} must be in [0, 1]")
        if self.mouse_noise_px < 0 or self.scroll_lag_px <= 0:
            raise SimConfigError("mouse noise must be >= 0 and scroll lag > 0")
        if len(self.dwell_mix) != 3 or any(w < 0 for w in self.dwell_mix) \
                or abs(sum(self.dwell_mix) - 1.0) > 1e-9:
            raise SimConfigError("dwell_mix must be 3 non-negative weights summing to 1")
        if not 0.0 <= self.peek_prob <= 1.0 or self.peek_prob + self.gaze_null_prob >= 1.0:
            raise SimConfigError("peek and null probabilities must leave room for reading")
        if not 0.0 <= self.revisit_prob <= 1.0:
            raise SimConfigError("revisit_prob must be in [0, 1]")
        if not 0.05 <= self.read_anchor <= 0.95 or self.anchor_jitter < 0:
            raise SimConfigError("read_anchor must be in [0.05, 0.95] with jitter >= 0")


TRACKS_GAZE = ReaderArchetype("tracks-gaze", "tracks-gaze", mouse_noise_px=80.0, click_prob=0.45)
PARKED = ReaderArchetype("parked", "parked", click_prob=0.0)
SPORADIC = ReaderArchetype("sporadic", "sporadic", mouse_noise_px=0.0, click_prob=0.35)


@dataclass(frozen=True)
class SimConfig:
    n_users: int = 9
    newsletters_per_user: int = 8
    n_newsletters: int = 12
    messages_range: tuple[int, int] = (10, 20)
    words_range: tuple[int, int] = (30, 200)
    session_seconds_range: tuple[int, int] = (110, 170)
    archetypes: tuple[tuple[ReaderArchetype, float], ...] = (
        (TRACKS_GAZE, 0.6),
        (PARKED, 0.25),
        (SPORADIC, 0.15),
    )
    gap_seconds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.newsletters_per_user < 1:
            raise SimConfigError("need at least one user and one newsletter per user")
        if self.newsletters_per_user > self.n_newsletters:
            raise SimConfigError("newsletter pool smaller than newsletters per user")
        for name in ("messages_range", "words_range", "session_seconds_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise SimConfigError(f"{name} must be a non-empty positive range")
        if self.messages_range[0] < 1:
            raise SimConfigError("newsletters need at least one message")
        weights = [w for _, w in self.archetypes]
        if not weights or any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise SimConfigError("archetype mixture must be non-negative and sum to 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["archetypes"] = [
            {"archetype": asdict(a), "weight": w} for a, w in self.archetypes
        ]
        return d


def default_sim_config(seed: int = 0) -> SimConfig:
    return SimConfig(seed=seed)


def mixed_mouse_sim_config(
    n_users: int = 8,
    newsletters_per_user: int = 4,
    seed: int = 0,
) -> SimConfig:
    """Half precise mouse-trackers, half parked mice: the corpus where the
    mouse-proximity heuristic is excellent for some users and misleading
    for others, which pattern features can arbitrate."""
    tracker = ReaderArchetype("tracks-gaze", "tracks-gaze", mouse_noise_px=10.0, click_prob=0.25)
    return SimConfig(
        n_users=n_users,
        newsletters_per_user=newsletters_per_user,
        n_newsletters=max(6, newsletters_per_user),
        messages_range=(10, 20),
        session_seconds_range=(60, 100),
        archetypes=((tracker, 0.5), (PARKED, 0.5)),
        seed=seed,
    )


def _user_rng(seed: int, user_index: int) -> np.random.Generator:
    # independent per-user streams so generation can run in any order
    return np.random.default_rng([seed, 1, user_index])


def _make_layouts(config: SimConfig) -> dict[str, NewsletterLayout]:
    rng = np.random.default_rng([config.seed, 0])
    layouts = {}
    for j in range(config.n_newsletters):
        nl_id = f"nl{j:02d}"
        n_msgs = int(rng.integers(config.messages_range[0], config.messages_range[1] + 1))
        y = 0.0
        messages = []
        for k in range(n_msgs):
            words = int(rng.integers(config.words_range[0], config.words_range[1] + 1))
            # text density varies (images, headlines, tight paragraphs), so
            # height tracks words only loosely; geometry alone cannot rank
            # reading effort
            density = rng.uniform(0.5, 2.0)
            height = float(np.clip(30.0 + 1.5 * words * density, 100.0, 400.0))
            messages.append(
                MessageGeometry(
                    msg_id=f"{nl_id}-m{k:02d}", x=0.0, y=y, w=PAGE_WIDTH, h=height, words=words
                )
            )
            y += height + MESSAGE_GAP
        layouts[nl_id] = NewsletterLayout(
            newsletter_id=nl_id, messages=tuple(messages), doc_height=y
        )
    return layouts


def _dwell_seconds(rng, archetype: ReaderArchetype, words: int) -> int:
    """Interest-banded log-normal dwell in seconds.

    Interest picks a skip/skim/detail band; within the band the dwell is a
    log-normal multiple of the message's 200 wpm reading time (0.3 s/word),
    clamped so the planned band and the realized read level agree. Session
    truncation can still demote later messages to skips, which mirrors
    readers abandoning the tail of a newsletter.
    """
    interest = rng.random()
    skim_floor = math.ceil(0.15 * words)
    detail_floor = math.ceil(0.30 * words)
    p_skip, p_skim, _ = archetype.dwell_mix
    if interest < p_skip:
        glance = round(math.exp(rng.normal(math.log(1.2), 0.6)))
        return int(min(glance, max(skim_floor - 1, 0)))
    base = 0.3 * words * math.exp(rng.normal(0.0, archetype.dwell_sigma))
    if interest < p_skip + p_skim:
        return int(min(max(round(0.7 * base), skim_floor), detail_floor - 1))
    return int(min(max(round(1.1 * base), detail_floor), round(0.85 * words)))


def _reading_queue(rng, archetype, layout) -> list[str]:
    """Planned reading walk: each message repeated for its dwell seconds,
    plus scroll-back revisits of already-read messages spliced in later.

    Revisits decouple a message's visible span from its own reading time:
    scrolling back drags neighbors through the window without reading them.
    """
    queue: list[str] = []
    revisits: list[tuple[int, str, int]] = []
    for m in layout.messages:
        dwell = _dwell_seconds(rng, archetype, m.words)
        queue.extend([m.msg_id] * dwell)
        if dwell >= math.ceil(0.15 * m.words) and rng.random() < archetype.revisit_prob:
            revisits.append((len(queue), m.msg_id, int(rng.integers(3, 10))))
    for block_end, msg_id, duration in reversed(revisits):
        if block_end >= len(queue):
            continue
        at = int(rng.integers(block_end, len(queue) + 1))
        queue[at:at] = [msg_id] * duration
    return queue


def _visible(m: MessageGeometry, scroll: float, win_h: float) -> bool:
    return m.y < scroll + win_h and m.y + m.h > scroll


def _scroll_target(m: MessageGeometry, doc_height: float, win_h: float, anchor: float) -> float:
    # places the gazed message's center at `anchor` of the window height
    top = m.y + m.h / 2.0 - anchor * win_h
    return min(max(top, 0.0), max(doc_height - win_h, 0.0))


def _visible_center(m: MessageGeometry, scroll: float, win_w: float, win_h: float):
    x0, x1 = max(m.x, 0.0), min(m.x + m.w, win_w)
    y0, y1 = max(m.y, scroll), min(m.y + m.h, scroll + win_h)
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


def _simulate_session(rng, archetype, layout, t_open: float, win_h: float, max_seconds: int):
    """One newsletter visit: events, labels, starting at t_open.

    Each second the reader either advances the planned walk, peeks at some
    other visible message, or looks off content; the scroll chases the walk
    position only, so peeks are invisible to geometry aggregates.
    """
    anchor = float(
        np.clip(archetype.read_anchor + rng.normal(0.0, archetype.anchor_jitter), 0.05, 0.9)
    )
    queue = _reading_queue(rng, archetype, layout)
    events = [
        InteractionEvent(t=t_open, kind="open", newsletter_id=layout.newsletter_id),
        InteractionEvent(t=t_open, kind="viewport", win_w=WIN_W, win_h=win_h),
    ]
    labels: dict[int, str | None] = {}

    # click plans keyed on planned-read messages (entry order = layout order)
    dwell_by_msg: dict[str, int] = {}
    for msg_id in queue:
        dwell_by_msg[msg_id] = dwell_by_msg.get(msg_id, 0) + 1
    click_offset: dict[str, int] = {}
    for m in layout.messages:
        dwell = dwell_by_msg.get(m.msg_id, 0)
        if dwell >= math.ceil(0.15 * m.words) and rng.random() < archetype.click_prob:
            click_offset[m.msg_id] = int(rng.integers(0, min(dwell, 5)))

    scroll = 0.0
    mouse: tuple[float, float] | None = None
    seen_for: dict[str, int] = {}
    pos = 0
    s = 0

    # orientation scan: most readers first drift down the page to see what
    # the newsletter holds, then jump back up and actually read. Scan speed
    # varies by session, so every message collects a session-specific amount
    # of off-content visible time that aggregates cannot separate out.
    if rng.random() < archetype.scan_prob:
        speed = float(rng.uniform(120.0, 350.0))
        budget = min(int(0.25 * max_seconds), 25)
        bottom = max(layout.doc_height - win_h, 0.0)
        while s < budget and scroll < bottom:
            t = t_open + s
            scroll = min(scroll + speed, bottom)
            events.append(InteractionEvent(t=t, kind="scroll", scroll_y=scroll))
            if archetype.mouse_policy == "parked":
                mouse = (PARKED_X, scroll + 0.7 * win_h)
                events.append(InteractionEvent(t=t, kind="move", x=mouse[0], y=mouse[1]))
            elif archetype.mouse_policy == "sporadic" and rng.random() < archetype.mouse_move_prob:
                mouse = (float(rng.uniform(0.0, WIN_W)), float(rng.uniform(scroll, scroll + win_h)))
                events.append(InteractionEvent(t=t, kind="move", x=mouse[0], y=mouse[1]))
            labels[s + int(t_open)] = None
            s += 1

    while s < max_seconds and (pos < len(queue) or s < 10):
        t = t_open + s
        current = layout.message(queue[pos]) if pos < len(queue) else None
        if current is not None:
            target = _scroll_target(current, layout.doc_height, win_h, anchor)
            step = min(max(target - scroll, -archetype.scroll_lag_px), archetype.scroll_lag_px)
            new_scroll = scroll + step
            if not _visible(current, new_scroll, win_h):
                new_scroll = target
        else:
            new_scroll = scroll
        if new_scroll != scroll:
            scroll = new_scroll
            events.append(InteractionEvent(t=t, kind="scroll", scroll_y=scroll))

        r = rng.random()
        if current is None or r < archetype.gaze_null_prob:
            gaze = None
        elif r < archetype.gaze_null_prob + archetype.peek_prob:
            others = [
                m.msg_id for m in layout.messages
                if m.msg_id != current.msg_id and _visible(m, scroll, win_h)
            ]
            if others:
                gaze = others[int(rng.integers(0, len(others)))]
            else:
                gaze = current.msg_id
                pos += 1
        else:
            gaze = current.msg_id
            pos += 1

        new_mouse = mouse
        if archetype.mouse_policy == "tracks-gaze":
            if gaze is not None:
                cx, cy = _visible_center(layout.message(gaze), scroll, WIN_W, win_h)
                if archetype.mouse_noise_px > 0:
                    # the pointer stays within the physical window
                    cx = float(np.clip(cx + rng.normal(0.0, archetype.mouse_noise_px), 0.0, WIN_W - 1))
                    cy = float(np.clip(cy + rng.normal(0.0, archetype.mouse_noise_px),
                                       scroll, scroll + win_h - 1))
                new_mouse = (cx, cy)
        elif archetype.mouse_policy == "parked":
            # pointer rests at a fixed spot of the window (off the content,
            # near the scrollbar); its document position follows the scroll
            target_park = (PARKED_X, scroll + 0.7 * win_h)
            if mouse is None or target_park[1] != mouse[1]:
                new_mouse = target_park
        else:  # sporadic
            if mouse is None or rng.random() < archetype.mouse_move_prob:
                new_mouse = (
                    float(rng.uniform(0.0, WIN_W)),
                    float(rng.uniform(scroll, scroll + win_h)),
                )

        click_here = False
        if gaze is not None and gaze in click_offset:
            seen = seen_for.get(gaze, 0)
            if seen == click_offset[gaze]:
                click_here = True
            seen_for[gaze] = seen + 1
        elif gaze is not None:
            seen_for[gaze] = seen_for.get(gaze, 0) + 1

        if click_here:
            # the pointer physically travels to the message it clicks
            new_mouse = _visible_center(layout.message(gaze), scroll, WIN_W, win_h)
        if new_mouse != mouse:
            mouse = new_mouse
            events.append(InteractionEvent(t=t, kind="move", x=mouse[0], y=mouse[1]))
        if click_here:
            events.append(
                InteractionEvent(t=t, kind="click", x=mouse[0], y=mouse[1], msg_id=gaze)
            )
            del click_offset[gaze]
        labels[s + int(t_open)] = gaze
        s += 1

    # wrap-up passes: after finishing, some readers sweep the page a few
    # times without reading; aggregates see extra visible seconds, the
    # per-second gaze stays off content
    n_passes = int(rng.integers(0, 3))
    if pos >= len(queue) and n_passes > 0:
        speed = float(rng.uniform(300.0, 900.0))
        bottom = max(layout.doc_height - win_h, 0.0)
        for k in range(n_passes):
            target = 0.0 if k % 2 == 0 else bottom
            while s < max_seconds and scroll != target:
                t = t_open + s
                scroll += min(max(target - scroll, -speed), speed)
                events.append(InteractionEvent(t=t, kind="scroll", scroll_y=scroll))
                if archetype.mouse_policy == "parked":
                    new_mouse = (PARKED_X, scroll + 0.7 * win_h)
                    if new_mouse != mouse:
                        mouse = new_mouse
                        events.append(InteractionEvent(t=t, kind="move", x=mouse[0], y=mouse[1]))
                elif archetype.mouse_policy == "sporadic" and rng.random() < archetype.mouse_move_prob:
                    mouse = (
                        float(rng.uniform(0.0, WIN_W)),
                        float(rng.uniform(scroll, scroll + win_h)),
                    )
                    events.append(InteractionEvent(t=t, kind="move", x=mouse[0], y=mouse[1]))
                labels[s + int(t_open)] = None
                s += 1

    t_close = t_open + s
    events.append(InteractionEvent(t=t_close, kind="close"))
    return events, labels, t_close


def generate_corpus(config: SimConfig) -> Corpus:
    """Layouts, per-user event logs, and per-second gaze labels."""
    layouts = _make_layouts(config)
    nl_ids = sorted(layouts)
    weights = np.array([w for _, w in config.archetypes])
    runs = []
    archetype_by_user = {}
    for i in range(config.n_users):
        rng = _user_rng(config.seed, i)
        user_id = f"u{i}"
        archetype = config.archetypes[int(rng.choice(len(weights), p=weights))][0]
        archetype_by_user[user_id] = archetype.name
        win_h = float(rng.choice([720.0, 800.0, 900.0]))
        assigned = [nl_ids[j] for j in rng.choice(len(nl_ids), size=config.newsletters_per_user, replace=False)]

        events: list[InteractionEvent] = []
        session_labels: list[dict[int, str | None]] = []
        t = 0.0
        for nl_id in assigned:
            max_seconds = int(rng.integers(config.session_seconds_range[0],
                                           config.session_seconds_range[1] + 1))
            ev, labels, t_close = _simulate_session(
                rng, archetype, layouts[nl_id], t, win_h, max_seconds
            )
            events.extend(ev)
            session_labels.append(labels)
            t = t_close + config.gap_seconds

        sessions = sessionize(events, layouts, user_id=user_id)
        if len(sessions) != len(session_labels):
            raise AssertionError("generator produced inconsistent sessions")
        labeled = tuple(s.with_labels(l) for s, l in zip(sessions, session_labels))
        runs.append(UserRun(user_id=user_id, events=tuple(events), sessions=labeled))

    meta = {
        "generator": "readmeter-simulator",
        "seed": config.seed,
        "config": config.to_dict(),
        "archetype_by_user": archetype_by_user,
    }
    return Corpus(layouts=layouts, runs=tuple(runs), meta=meta)


@dataclass(frozen=True)
class CorpusStats:
    n_users: int
    n_newsletters: int
    n_sessions: int
    datapoints: int
    labeled_seconds: int
    positive_rate: float
    sessions_per_user: dict[str, int]
    read_level_counts: dict[str, int]

    def to_dict(self) -> dict:
        return asdict(self)


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Datapoint accounting: one point per message's status per second."""
    from .aggregate import classify_read_level

    datapoints = 0
    labeled = 0
    level_counts = {"skip": 0, "skim": 0, "detail": 0}
    per_user = {}
    for run in corpus.runs:
        per_user[run.user_id] = len(run.sessions)
        for session in run.sessions:
            n_seconds = len(session.seconds())
            datapoints += n_seconds * len(session.layout.messages)
            if session.labels is not None:
                labeled += sum(1 for v in session.labels.values() if v is not None)
                for msg_id, secs in session.true_reading_seconds().items():
                    words = session.layout.message(msg_id).words
                    level_counts[classify_read_level(float(secs), words).value] += 1
    return CorpusStats(
        n_users=len(corpus.runs),
        n_newsletters=len(corpus.layouts),
        n_sessions=sum(per_user.values()),
        datapoints=datapoints,
        labeled_seconds=labeled,
        positive_rate=labeled / datapoints if datapoints else 0.0,
        sessions_per_user=per_user,
        read_level_counts=level_counts,
    )
