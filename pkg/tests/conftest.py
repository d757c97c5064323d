import pytest

from readmeter.events import (
    InteractionEvent,
    MessageGeometry,
    NewsletterLayout,
    ReadingSession,
)


def make_layout(heights=(400, 400, 400), words=(100, 100, 100), width=1000.0, gap=0.0,
                newsletter_id="nl"):
    y = 0.0
    messages = []
    for i, (h, w) in enumerate(zip(heights, words)):
        messages.append(MessageGeometry(f"m{i}", 0.0, y, width, float(h), int(w)))
        y += h + gap
    return NewsletterLayout(newsletter_id, tuple(messages), doc_height=y if gap == 0 else y - gap)


def make_session(events, layout, t0=0.0, t1=None, user_id="u", labels=None):
    if t1 is None:
        t1 = max(e.t for e in events) + 1 if events else t0 + 1
    return ReadingSession(
        user_id=user_id,
        newsletter_id=layout.newsletter_id,
        t0=t0,
        t1=t1,
        events=tuple(events),
        layout=layout,
        labels=labels,
        session_id=f"{user_id}:0",
    )


@pytest.fixture
def simple_layout():
    return make_layout()


@pytest.fixture
def open_viewport_events():
    return [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=0, kind="viewport", win_w=1000.0, win_h=800.0),
    ]
