import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readmeter.events import (
    DEFAULT_WIN_H,
    DEFAULT_WIN_W,
    InteractionEvent,
    LabelError,
    LayoutError,
    LogParseError,
    MessageGeometry,
    NewsletterLayout,
    SessionError,
    clip_to_window,
    parse_event_log,
    parse_labels,
    parse_layout,
    serialize_events,
    serialize_labels,
    sessionize,
    snapshot_at,
)

from conftest import make_layout, make_session


# --- parsing ---

def test_parse_move_event_maps_fields():
    events = parse_event_log(io.StringIO('{"t":1.5,"kind":"move","x":100,"y":200}\n'))
    assert len(events) == 1
    e = events[0]
    assert (e.t, e.kind, e.x, e.y) == (1.5, "move", 100.0, 200.0)


def test_parse_empty_stream():
    assert parse_event_log(io.StringIO("")) == []


def test_parse_missing_required_field_reports_line():
    stream = io.StringIO('{"t":1,"kind":"move","x":1,"y":2}\n{"t":2,"kind":"move"}\n')
    with pytest.raises(LogParseError, match="line 2"):
        parse_event_log(stream)


def test_parse_rejects_decreasing_timestamps():
    stream = io.StringIO('{"t":5,"kind":"close"}\n{"t":4,"kind":"close"}\n')
    with pytest.raises(LogParseError, match="line 2"):
        parse_event_log(stream)


def test_parse_rejects_unknown_keys_and_inapplicable_fields():
    with pytest.raises(LogParseError):
        parse_event_log(io.StringIO('{"t":1,"kind":"move","x":1,"y":2,"bogus":3}\n'))
    with pytest.raises(LogParseError):
        parse_event_log(io.StringIO('{"t":1,"kind":"scroll","scroll_y":5,"x":9}\n'))


def test_event_constructor_enforces_schema():
    with pytest.raises(ValueError):
        InteractionEvent(t=-1, kind="close")
    with pytest.raises(ValueError):
        InteractionEvent(t=0, kind="open")  # missing newsletter_id
    with pytest.raises(ValueError):
        InteractionEvent(t=0, kind="nonsense")


def test_serialize_parse_round_trip_is_byte_identical():
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=0.5, kind="viewport", win_w=1280, win_h=800),
        InteractionEvent(t=1.25, kind="move", x=10.5, y=20),
        InteractionEvent(t=2, kind="scroll", scroll_y=140),
        InteractionEvent(t=3, kind="click", x=5, y=6, msg_id="m1"),
        InteractionEvent(t=4, kind="visibility", visible=False),
        InteractionEvent(t=9, kind="close"),
    ]
    text = serialize_events(events)
    again = serialize_events(parse_event_log(io.StringIO(text)))
    assert again == text


def test_labels_round_trip_and_validation():
    text = '{"t":0,"msg_id":"m0"}\n{"t":1,"msg_id":null}\n'
    labels = parse_labels(io.StringIO(text))
    assert labels == {0: "m0", 1: None}
    assert serialize_labels(labels) == text
    with pytest.raises(LabelError):
        parse_labels(io.StringIO('{"t":0,"msg_id":"m0"}\n{"t":0,"msg_id":"m1"}\n'))
    with pytest.raises(LabelError):
        parse_labels(io.StringIO('{"t":0.5,"msg_id":"m0"}\n'))


# --- layouts ---

def test_layout_round_trip_and_invariants():
    layout = make_layout(heights=(300, 200), words=(50, 80))
    again = parse_layout(layout.to_json())
    assert again == layout
    with pytest.raises(LayoutError):
        NewsletterLayout("x", (MessageGeometry("a", 0, 0, 10, 20, 5),
                               MessageGeometry("a", 0, 20, 10, 20, 5)), 40)
    with pytest.raises(LayoutError):
        NewsletterLayout("x", (MessageGeometry("a", 0, 0, 10, 50, 5),), 40)
    with pytest.raises(LayoutError):
        MessageGeometry("a", 0, 0, 10, 20, 0)


# --- sessionize ---

def _layouts():
    return {"nl": make_layout()}


def test_sessionize_open_close():
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=100, kind="close"),
    ]
    sessions = sessionize(events, _layouts(), user_id="u")
    assert len(sessions) == 1
    assert (sessions[0].t0, sessions[0].t1) == (0, 100)
    assert sessions[0].session_id == "u:0"


def test_sessionize_visibility_interruption_splits():
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=50, kind="visibility", visible=False),
        InteractionEvent(t=55, kind="move", x=1, y=1),
        InteractionEvent(t=60, kind="visibility", visible=True),
        InteractionEvent(t=100, kind="close"),
    ]
    sessions = sessionize(events, _layouts(), user_id="u")
    assert [(s.t0, s.t1) for s in sessions] == [(0, 50), (60, 100)]
    # the move at t=55 fell in the hidden gap and belongs to no session
    assert all(e.t != 55 for s in sessions for e in s.events)


def test_sessionize_unterminated_ends_at_last_event_inclusive():
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=80, kind="move", x=1, y=1),
    ]
    sessions = sessionize(events, _layouts())
    assert len(sessions) == 1
    assert sessions[0].t1 == 81  # second 80 is included
    assert list(sessions[0].seconds()) == list(range(0, 81))


def test_sessionize_structural_errors():
    with pytest.raises(SessionError):
        sessionize([InteractionEvent(t=1, kind="close")], _layouts())
    with pytest.raises(SessionError):
        sessionize([InteractionEvent(t=0, kind="open", newsletter_id="missing")], _layouts())
    with pytest.raises(SessionError):
        sessionize(
            [
                InteractionEvent(t=0, kind="open", newsletter_id="nl"),
                InteractionEvent(t=1, kind="open", newsletter_id="nl"),
            ],
            _layouts(),
        )


def test_sessionize_assigns_each_event_to_at_most_one_session():
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=10, kind="move", x=1, y=1),
        InteractionEvent(t=20, kind="close"),
        InteractionEvent(t=30, kind="open", newsletter_id="nl"),
        InteractionEvent(t=40, kind="scroll", scroll_y=10),
        InteractionEvent(t=50, kind="close"),
    ]
    sessions = sessionize(events, _layouts())
    seen = [e for s in sessions for e in s.events]
    assert len(seen) == len(set(id(e) for e in seen))
    for s in sessions:
        for e in s.events:
            assert s.t0 <= e.t < s.t1


# --- snapshots ---

def _session_with(events, layout=None, **kw):
    layout = layout or make_layout()
    all_events = [
        InteractionEvent(t=0, kind="open", newsletter_id=layout.newsletter_id),
        InteractionEvent(t=0, kind="viewport", win_w=1000.0, win_h=800.0),
        *events,
        InteractionEvent(t=99, kind="move", x=1, y=1),
    ]
    return make_session(all_events, layout, t0=0.0, t1=100.0, **kw)


def test_snapshot_full_window_message():
    layout = make_layout(heights=(800, 400), words=(100, 100))
    session = _session_with([], layout=layout)
    snap = snapshot_at(session, 10)
    assert snap.view("m0").window_share == pytest.approx(1.0)


def test_snapshot_message_below_fold_is_invisible():
    layout = make_layout(heights=(800, 800, 400), words=(10, 10, 10))
    session = _session_with([], layout=layout)
    snap = snapshot_at(session, 0)
    view = snap.view("m2")  # starts at y=1600, window ends at 800
    assert view.window_share == 0.0
    assert view.visible_rect is None


def test_snapshot_clipping_arithmetic():
    layout = make_layout(heights=(600, 400), words=(10, 10))
    session = _session_with([], layout=layout)
    snap = snapshot_at(session, 5)
    # m1 occupies y in [600, 1000); visible part 1000x200 of an 800k window
    view = snap.view("m1")
    assert view.window_share == pytest.approx((1000 * 200) / (1000 * 800))
    assert view.visible_rect == (0.0, 600.0, 1000.0, 200.0)
    assert view.center_offset == pytest.approx(700 / 800)


def test_snapshot_state_uses_latest_event_at_or_before_t():
    events = [
        InteractionEvent(t=4.5, kind="scroll", scroll_y=100.0),
        InteractionEvent(t=7.0, kind="scroll", scroll_y=300.0),
        InteractionEvent(t=8.2, kind="move", x=40.0, y=50.0),
    ]
    session = _session_with(events)
    assert snapshot_at(session, 4).scroll_y == 0.0  # event at 4.5 is after second 4
    assert snapshot_at(session, 5).scroll_y == 100.0
    assert snapshot_at(session, 6).scroll_y == 100.0
    assert snapshot_at(session, 7).scroll_y == 300.0
    assert snapshot_at(session, 9).mouse == (40.0, 50.0)
    assert snapshot_at(session, 8).mouse is None


def test_snapshot_defaults_before_viewport_event():
    layout = make_layout()
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=50, kind="move", x=1, y=1),
    ]
    session = make_session(events, layout, t0=0.0, t1=60.0)
    snap = snapshot_at(session, 10)
    assert (snap.win_w, snap.win_h) == (DEFAULT_WIN_W, DEFAULT_WIN_H)
    assert snap.viewport_defaulted


def test_snapshot_range_error():
    session = _session_with([])
    with pytest.raises(SessionError):
        snapshot_at(session, 100)


def test_snapshot_is_pure():
    session = _session_with([InteractionEvent(t=3, kind="scroll", scroll_y=77.0)])
    a = snapshot_at(session, 50)
    b = snapshot_at(session, 50)
    assert a == b


rects = st.tuples(
    st.floats(-500, 1500), st.floats(-500, 3000),
    st.floats(1, 1200), st.floats(1, 1200),
)


@given(rect=rects, scroll=st.floats(0, 2500), win_w=st.floats(100, 2000), win_h=st.floats(100, 1500))
@settings(max_examples=200, deadline=None)
def test_clipping_matches_shapely_oracle(rect, scroll, win_w, win_h):
    from shapely.geometry import box

    x, y, w, h = rect
    clipped, share, center = clip_to_window(rect, scroll, win_w, win_h)
    window = box(0, scroll, win_w, scroll + win_h)
    message = box(x, y, x + w, y + h)
    expected_area = window.intersection(message).area
    assert share * win_w * win_h == pytest.approx(expected_area, abs=1e-6)
    if clipped is not None:
        cx, cy, cw, ch = clipped
        assert cw > 0 and ch > 0
        assert 0 <= center <= 1


@given(
    heights=st.lists(st.floats(50, 900), min_size=1, max_size=8),
    scroll=st.floats(0, 4000),
    win_h=st.floats(200, 1200),
)
@settings(max_examples=150, deadline=None)
def test_disjoint_layout_shares_sum_below_one(heights, scroll, win_h):
    layout = make_layout(heights=tuple(heights), words=tuple([10] * len(heights)))
    events = [
        InteractionEvent(t=0, kind="open", newsletter_id="nl"),
        InteractionEvent(t=0, kind="viewport", win_w=900.0, win_h=win_h),
        InteractionEvent(t=0, kind="scroll", scroll_y=scroll),
    ]
    session = make_session(events, layout, t0=0.0, t1=2.0)
    snap = snapshot_at(session, 1)
    assert sum(v.window_share for v in snap.views) <= 1 + 1e-9
