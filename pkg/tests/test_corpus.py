import json

import pytest

from readmeter.corpus import CorpusError, load_corpus, save_corpus
from readmeter.simulate import SimConfig, generate_corpus


def _config(seed=0):
    return SimConfig(n_users=2, newsletters_per_user=2, n_newsletters=3,
                     messages_range=(3, 5), words_range=(30, 60),
                     session_seconds_range=(20, 30), seed=seed)


def test_save_load_round_trip(tmp_path):
    corpus = generate_corpus(_config(seed=1))
    save_corpus(corpus, tmp_path)
    again = load_corpus(tmp_path)
    assert set(again.layouts) == set(corpus.layouts)
    assert len(again.runs) == len(corpus.runs)
    for a, b in zip(again.runs, corpus.runs):
        assert a.user_id == b.user_id
        assert a.events == b.events
        assert len(a.sessions) == len(b.sessions)
        for sa, sb in zip(a.sessions, b.sessions):
            assert (sa.t0, sa.t1, sa.session_id) == (sb.t0, sb.t1, sb.session_id)
            assert sa.labels == sb.labels


def test_load_requires_manifest(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_load_rejects_unknown_format(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"format": "other"}))
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_sessions_by_user_lists_ids_in_order(tmp_path):
    corpus = generate_corpus(_config(seed=2))
    by_user = corpus.sessions_by_user()
    assert by_user == {"u0": ["u0:0", "u0:1"], "u1": ["u1:0", "u1:1"]}
