import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import line, make_graph
from meshsched.errors import ConfigError
from meshsched.net import (UNREACHABLE, ChannelModel, FlowSpec, NetworkGraph, dbm_to_mw,
                           graph_from_dict, hop_distance, interference_field, load_topology,
                           regenerate_channel)
from meshsched.topology import generate


def three_node():
    g2 = np.zeros((3, 3))
    g2[0, 1] = g2[1, 0] = 0.02
    g2[0, 2] = g2[2, 0] = 0.0005
    return make_graph(3, [(0, 1), (1, 2)], g2, detect_threshold=1.0)


def test_field_threshold_example():
    # 100 mW * 0.02 = 2 mW hears; 100 mW * 0.0005 = 0.05 mW does not
    assert interference_field(three_node(), 0, 100.0) == {1}


def test_field_zero_gain_is_empty():
    g = make_graph(3, [(0, 1)], np.zeros((3, 3)))
    assert interference_field(g, 0, 100.0) == frozenset()


def test_field_zero_threshold_takes_every_positive_gain():
    g = three_node()
    g.detect_threshold = 0.0
    assert interference_field(g, 0, 100.0) == {1, 2}


def test_field_unknown_node():
    with pytest.raises(ValueError):
        interference_field(three_node(), 7, 10.0)


@given(p1=st.floats(0.1, 100.0), p2=st.floats(0.1, 100.0), seed=st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_field_monotone_in_power(p1, p2, seed):
    r = np.random.default_rng(seed)
    g2 = r.uniform(0, 0.05, size=(5, 5))
    g2 = (g2 + g2.T) / 2
    g = make_graph(5, [(0, 1)], g2)
    lo, hi = sorted((p1, p2))
    for i in range(5):
        assert interference_field(g, i, lo) <= interference_field(g, i, hi)


def test_hop_distance_line():
    g = line(4)
    assert hop_distance(g, 0, 3) == 3
    assert hop_distance(g, 2, 2) == 0


def test_hop_distance_unreachable():
    g = make_graph(3, [(0, 1)], np.zeros((3, 3)))
    assert hop_distance(g, 2, 0) is UNREACHABLE
    assert g.hop_table(0)[2] == -1


def _bfs(n, links, dest):
    dist = {dest: 0}
    frontier = [dest]
    while frontier:
        nxt = []
        for v in frontier:
            for i, j in links:
                if j == v and i not in dist:
                    dist[i] = dist[v] + 1
                    nxt.append(i)
        frontier = nxt
    return dist


@given(st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))))
@settings(max_examples=80, deadline=None)
def test_hops_match_naive_bfs_and_triangle(case):
    n, pairs = case
    pairs = [(i, j) for i, j in pairs if i != j]
    g = make_graph(n, pairs, np.zeros((n, n)))
    for dest in range(n):
        ref = _bfs(n, g.links, dest)
        for i in range(n):
            assert hop_distance(g, i, dest) == ref.get(i, UNREACHABLE)
        for i, j in g.links:
            di, dj = hop_distance(g, i, dest), hop_distance(g, j, dest)
            if di is not None and dj is not None:
                assert abs(di - dj) <= 1


def test_graph_validation():
    with pytest.raises(ConfigError):
        NetworkGraph(2, frozenset({(0, 0)}), np.zeros((2, 2)))
    with pytest.raises(ConfigError):
        NetworkGraph(2, frozenset(), np.full((2, 2), 1.5))
    with pytest.raises(ConfigError):
        NetworkGraph(2, frozenset(), np.zeros((2, 2)), num_subcarriers=0)
    with pytest.raises(ConfigError):
        NetworkGraph(2, frozenset(), np.zeros((2, 2)), max_power=0)


def test_flow_validation():
    with pytest.raises(ConfigError):
        FlowSpec(0, 1, 1)
    with pytest.raises(ConfigError):
        FlowSpec(0, 0, 1, deadline=0)
    with pytest.raises(ConfigError):
        FlowSpec(0, 0, 1, arrival_rate=-0.1)


def test_dbm_conversion():
    assert dbm_to_mw(20) == pytest.approx(100.0)


def test_static_channel_never_changes():
    ch = ChannelModel(mode="static")
    g = graph_from_dict(generate("mesh", 9), ch)
    before = g.gain.copy()
    for t in range(50):
        regenerate_channel(ch, g, t)
    assert np.array_equal(before, g.gain)


def test_block_fading_redraws_on_boundaries_only():
    ch = ChannelModel(mode="block_fading", coherence_slots=20, rng_seed=3)
    g = graph_from_dict(generate("mesh", 9), ch)
    seen = []
    for t in range(41):
        before = g.gain.copy()
        regenerate_channel(ch, g, t)
        seen.append(not np.array_equal(before, g.gain))
    assert [t for t, c in enumerate(seen) if c] == [0, 20, 40]
    assert g.gain.min() >= 0 and g.gain.max() <= 1


def test_fading_is_seed_reproducible():
    def trace(seed):
        ch = ChannelModel(mode="block_fading", coherence_slots=3, rng_seed=seed)
        g = graph_from_dict(generate("mesh", 9), ch)
        out = []
        for t in range(12):
            regenerate_channel(ch, g, t)
            out.append(g.gain.copy())
        return np.array(out)
    assert np.array_equal(trace(5), trace(5))
    assert not np.array_equal(trace(5), trace(6))


def test_channel_validation():
    with pytest.raises(ConfigError):
        ChannelModel(mode="bogus")
    with pytest.raises(ConfigError):
        ChannelModel(coherence_slots=0)
    with pytest.raises(ValueError):
        regenerate_channel(ChannelModel(), line(2), -1)


@pytest.mark.parametrize("kind,n", [("mesh", 16), ("grid", 16), ("tree", 16), ("star", 17)])
def test_generators_round_trip(tmp_path, kind, n):
    doc = generate(kind, n)
    path = tmp_path / "topo.json"
    path.write_text(json.dumps(doc))
    g = load_topology(path)
    assert g.n_nodes == n
    assert all((j, i) in g.links for i, j in g.links)
    # connected
    assert (g.hop_table(0) >= 0).all()
    again = graph_from_dict(g.to_dict())
    assert again.links == g.links
    assert np.allclose(again.gain, g.gain)


def test_generator_link_counts():
    assert len(generate("mesh", 16)["links"]) == 2 * 24
    assert len(generate("grid", 16)["links"]) == 2 * (24 + 18)
    assert len(generate("tree", 16)["links"]) == 2 * 15
    assert len(generate("star", 17)["links"]) == 2 * 16


def test_generator_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        generate("mesh", 10)
    with pytest.raises(ConfigError):
        generate("star", 8)
    with pytest.raises(ConfigError):
        generate("ring", 8)


def test_default_geometry_only_full_power_reaches_neighbours():
    g = graph_from_dict(generate("mesh", 16))
    assert interference_field(g, 5, 75.0) == frozenset()
    assert interference_field(g, 5, 100.0) == {1, 4, 6, 9}
