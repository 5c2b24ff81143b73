import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netgee.errors import DataFormatError
from netgee.graph import UNREACHABLE, Network, bfs_distances, connected_components, degrees

from conftest import floyd_warshall, random_network, reachability_classes


def test_degrees_triangle():
    net = Network.from_edges(0, 3, [(0, 1), (1, 2), (0, 2)])
    assert degrees(net).tolist() == [2, 2, 2]


def test_degrees_path():
    net = Network.from_edges(0, 3, [(0, 1), (1, 2)])
    assert degrees(net).tolist() == [1, 2, 1]


def test_degrees_empty_graph():
    net = Network.from_edges(0, 4, [])
    assert degrees(net).tolist() == [0, 0, 0, 0]


def test_network_rejects_self_loop_and_duplicates():
    with pytest.raises(DataFormatError):
        Network.from_edges(0, 3, [(1, 1)])
    with pytest.raises(DataFormatError):
        Network.from_edges(0, 3, [(0, 1), (1, 0)])
    with pytest.raises(DataFormatError):
        Network.from_edges(0, 2, [(0, 5)])


def test_components_triangle_plus_isolate():
    net = Network.from_edges(0, 4, [(0, 1), (1, 2), (0, 2)])
    lab = connected_components(net)
    assert lab.sizes.tolist() == [3, 1]
    assert lab.component_of[3] == 2


def test_components_empty_graph():
    net = Network.from_edges(0, 3, [])
    lab = connected_components(net)
    assert lab.sizes.tolist() == [1, 1, 1]
    # ties broken by smallest node id
    assert lab.component_of.tolist() == [1, 2, 3]


def test_components_two_five_cycles():
    cyc = lambda off: [(off + i, off + (i + 1) % 5) for i in range(5)]
    net = Network.from_edges(0, 10, cyc(0) + cyc(5))
    lab = connected_components(net)
    assert lab.sizes.tolist() == [5, 5]
    assert lab.component_of[0] == 1
    classes = reachability_classes(net)
    for grp in classes:
        labels = {lab.component_of[j] for j in grp}
        assert len(labels) == 1


def test_components_match_transitive_closure_random(rng):
    for _ in range(60):
        net = random_network(rng, n_max=12)
        lab = connected_components(net)
        classes = {frozenset(grp) for grp in reachability_classes(net)}
        ours = {}
        for j in range(net.n):
            ours.setdefault(lab.component_of[j], set()).add(j)
        assert {frozenset(grp) for grp in ours.values()} == classes
        assert int(lab.sizes.sum()) == net.n
        assert sorted(lab.sizes.tolist(), reverse=True) == lab.sizes.tolist()


def test_bfs_path():
    net = Network.from_edges(0, 4, [(0, 1), (1, 2), (2, 3)])
    assert bfs_distances(net, [0]).tolist() == [0, 1, 2, 3]


def test_bfs_unreachable_component():
    net = Network.from_edges(0, 4, [(0, 1), (2, 3)])
    d = bfs_distances(net, [0])
    assert d.tolist() == [0, 1, UNREACHABLE, UNREACHABLE]


def test_bfs_multi_source_cycle():
    net = Network.from_edges(0, 4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert bfs_distances(net, [0, 2]).tolist() == [0, 1, 0, 1]


def test_bfs_empty_sources():
    net = Network.from_edges(0, 3, [(0, 1)])
    assert bfs_distances(net, []).tolist() == [UNREACHABLE] * 3


def test_bfs_matches_floyd_warshall(rng):
    for _ in range(40):
        net = random_network(rng, n_max=12)
        k = int(rng.integers(1, net.n + 1))
        sources = rng.choice(net.n, size=k, replace=False).tolist()
        ours = bfs_distances(net, sources)
        fw = floyd_warshall(net)[sources].min(axis=0)
        for j in range(net.n):
            if np.isinf(fw[j]):
                assert ours[j] == UNREACHABLE
            else:
                assert ours[j] == int(fw[j])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_handshake_and_triangle_property(data):
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    net = random_network(rng, n_max=10)
    deg = degrees(net)
    assert int(deg.sum()) == 2 * net.n_edges
    if net.n_edges:
        src = [int(rng.integers(net.n))]
        d = bfs_distances(net, src)
        for u, v in net.edges:
            if d[u] != UNREACHABLE and d[v] != UNREACHABLE:
                assert abs(int(d[u]) - int(d[v])) <= 1
