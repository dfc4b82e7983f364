import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from deanon.channels import BinaryChannel
from deanon.errors import ParameterError, ProtocolError
from deanon.graph_model import BipartiteGraph, generate_graph
from deanon.oracle import GM, UID, Query, new_session

NOISELESS = BinaryChannel()


def small_graph():
    return BipartiteGraph([[1, 0], [1, 0], [0, 1]])


def test_single_user_victim():
    g = BipartiteGraph([[1, 0]])
    for seed in range(5):
        s = new_session(g, g, NOISELESS, np.random.default_rng(seed))
        assert s.query_uid(0) == 1
        assert s.victim == 0


def test_fresh_session_state():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0))
    assert s.q == 0 and not s.terminated and s.transcript == []


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        new_session(small_graph(), BipartiteGraph([[1, 0]]), NOISELESS, np.random.default_rng())


def test_victim_uniform():
    g = generate_graph(1000, 1, 0.5, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    victims = [new_session(g, g, NOISELESS, rng)._victim for _ in range(100_000)]
    counts = np.bincount(victims, minlength=1000)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_victim_hidden_until_termination():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0), victim=1)
    with pytest.raises(ProtocolError):
        _ = s.victim
    s.query_uid(1)
    assert s.victim == 1


def test_gm_noiseless_and_certain_miss():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0), victim=0)
    assert s.query_gm(0) == 1
    assert s.query_gm(1) == 0
    s = new_session(g, g, BinaryChannel(1.0, 0.0), np.random.default_rng(0), victim=0)
    assert all(s.query_gm(0) == 0 for _ in range(20))


def test_gm_noise_rate():
    g = small_graph()
    rng = np.random.default_rng(5)
    ys = [new_session(g, g, BinaryChannel(0.1, 0.0), rng, victim=0).query_gm(0)
          for _ in range(10_000)]
    assert abs(np.mean(ys) - 0.9) <= 3 * math.sqrt(0.9 * 0.1 / 10_000)


def test_gm_uses_true_graph():
    g0 = BipartiteGraph([[0, 0], [1, 1]])
    g1 = BipartiteGraph([[1, 0], [1, 1]])  # spurious edge (0, 0) in the attacker's copy
    s = new_session(g0, g1, NOISELESS, np.random.default_rng(0), victim=0)
    assert s.query_gm(0) == 0
    assert s.transcript[-1].z == 0


def test_uid_semantics():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0), victim=2)
    assert s.query_uid(0) == 0 and not s.terminated
    assert s.query_uid(2) == 1 and s.terminated
    assert s.q == 2
    with pytest.raises(ProtocolError):
        s.query_uid(1)
    with pytest.raises(ProtocolError):
        s.query_gm(0)


def test_first_query_uid_victim():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0), victim=1)
    s.query(Query(UID, 1))
    assert s.q == 1 and s.terminated


def test_out_of_range_queries():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0))
    with pytest.raises(ParameterError):
        s.query_gm(2)
    with pytest.raises(ParameterError):
        s.query_uid(3)
    with pytest.raises(ParameterError):
        s.query(Query("XX", 0))


def test_repeated_gm_draws_fresh_noise():
    g = small_graph()
    s = new_session(g, g, BinaryChannel(0.5, 0.5), np.random.default_rng(3), victim=0)
    ys = {s.query_gm(0) for _ in range(50)}
    assert ys == {0, 1}


def test_session_replays_from_seed():
    g = generate_graph(30, 20, 0.5, np.random.default_rng(0))

    def play():
        s = new_session(g, g, BinaryChannel(0.2, 0.1), np.random.default_rng(42))
        for j in range(20):
            s.query_gm(j)
        s.uid_sweep(range(30))
        return s.dump_transcript()

    assert play() == play()


def test_dump_transcript_format():
    g = small_graph()
    s = new_session(g, g, NOISELESS, np.random.default_rng(0), victim=1)
    s.query_gm(0)
    s.query_uid(0)
    s.query_uid(1)
    assert s.dump_transcript() == "1 GM 0 1 1\n2 UID 0 0 0\n3 UID 1 1 1\n"


@settings(max_examples=150)
@given(st.integers(1, 12), st.integers(0, 11),
       st.lists(st.tuples(st.booleans(), st.integers(0, 11)), max_size=20),
       st.lists(st.integers(0, 11), max_size=15))
def test_sweep_equals_sequential(m, victim, prefix, sweep):
    victim %= m
    g = BipartiteGraph(np.ones((m, 3), dtype=bool))

    def fresh():
        return new_session(g, g, NOISELESS, np.random.default_rng(0), victim=victim)

    a, b = fresh(), fresh()
    for is_uid, idx in prefix:
        for s in (a, b):
            if s.terminated:
                continue
            if is_uid:
                s.query_uid(idx % m)
            else:
                s.query_gm(idx % 3)
    if a.terminated:
        return
    users = [u % m for u in sweep]
    a.uid_sweep(users)
    for u in users:
        if b.terminated:
            break
        b.query_uid(u)
    assert a.transcript == b.transcript
    assert (a.q, a.gm_count, a.uid_count, a.terminated) == (b.q, b.gm_count, b.uid_count, b.terminated)
    assert a.q == len(a.transcript) == a.gm_count + a.uid_count
    assert a.last_entry == (a.transcript[-1] if a.transcript else None)
    if a.terminated:
        hits = [i for i, e in enumerate(a.transcript) if e.kind == UID and e.index == victim]
        assert hits == [len(a.transcript) - 1]
        assert a.transcript[-1].y == 1
    assert all(e.kind in (GM, UID) for e in a.transcript)
