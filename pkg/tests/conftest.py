"""Shared helpers: tiny random graphs and brute-force oracles.

The oracles here deliberately use naive all-pairs constructions (adjacency
matrices, matrix powers, explicit loops) so they stay independent of the
library's sparse/incremental code paths.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from netgee.graph import Network


def random_network(rng: np.random.Generator, n_max: int = 8, p: float | None = None,
                   blocks_of: int | None = None, cluster_id: int = 0) -> Network:
    n = int(rng.integers(2, n_max + 1))
    prob = rng.uniform(0.1, 0.7) if p is None else p
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < prob]
    blocks = None
    if blocks_of is not None:
        blocks = rng.integers(1, blocks_of + 1, size=n)
    return Network.from_edges(cluster_id, n, edges, blocks)


def adjacency_matrix(net: Network) -> np.ndarray:
    a = np.zeros((net.n, net.n), dtype=int)
    for u, v in net.edges:
        a[u, v] = a[v, u] = 1
    return a


def floyd_warshall(net: Network) -> np.ndarray:
    n = net.n
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v in net.edges:
        d[u, v] = d[v, u] = 1.0
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def reachability_classes(net: Network) -> list[set[int]]:
    """Connected components via boolean transitive closure."""
    a = adjacency_matrix(net).astype(bool) | np.eye(net.n, dtype=bool)
    closure = a.copy()
    for _ in range(net.n):
        closure = closure | (closure @ a)
    classes = []
    seen: set[int] = set()
    for j in range(net.n):
        if j in seen:
            continue
        grp = set(np.flatnonzero(closure[j]).tolist())
        classes.append(grp)
        seen |= grp
    return classes


def naive_features(net: Network, affected: set[int], connected_blocks=(1, 5)) -> dict[str, np.ndarray]:
    """Direct per-definition feature computation on an adjacency matrix."""
    n = net.n
    e = adjacency_matrix(net)
    deg = e.sum(axis=1).astype(float)
    d = floyd_warshall(net)
    comps = reachability_classes(net)
    comps_sorted = sorted(comps, key=lambda grp: (-len(grp), min(grp)))
    comp_of = np.zeros(n, dtype=int)
    for label, grp in enumerate(comps_sorted, start=1):
        for j in grp:
            comp_of[j] = label
    sizes = np.array([len(g) for g in comps_sorted], dtype=float)

    x = {}
    x["X1"] = deg.copy()
    x["X2"] = np.array(
        [e[j] @ deg / deg[j] if deg[j] > 0 else 0.0 for j in range(n)]
    )
    # assortativity: Pearson over both orientations of every edge
    pairs = [(deg[u], deg[v]) for u, v in net.edges] + [
        (deg[v], deg[u]) for u, v in net.edges
    ]
    if pairs:
        xs = np.array([p[0] for p in pairs])
        ys = np.array([p[1] for p in pairs])
        denom = xs.std() * ys.std()
        r = float(((xs - xs.mean()) * (ys - ys.mean())).mean() / denom) if denom > 1e-12 else 0.0
    else:
        r = 0.0
    x["X3"] = np.full(n, r)
    if net.blocks is not None:
        x["X4"] = np.isin(net.blocks, connected_blocks).astype(float)
    x["X5"] = np.full(n, sizes.max() if sizes.size else 0.0)
    x["X6"] = np.full(n, n / len(comps_sorted))
    x["X7"] = np.full(n, float(len(comps_sorted)))
    x["X8"] = sizes[comp_of - 1]
    aff = np.zeros(n)
    for j in affected:
        aff[j] = 1.0
    x["X9"] = e @ aff
    x["X10"] = np.array(
        [sum(aff[k] for k in range(n) if comp_of[k] == comp_of[j]) for j in range(n)]
    )
    x11 = np.zeros(n)
    x12 = np.zeros(n)
    for j in range(n):
        dists = [d[j, k] for k in affected if k != j and math.isfinite(d[j, k])]
        if dists:
            x11[j] = 1.0 / min(dists)
            x12[j] = sum(1.0 / dk for dk in dists)
    x["X11"] = x11
    x["X12"] = x12
    return x


def all_small_graphs(max_n: int = 5):
    """Every simple graph on 2..max_n nodes (exhaustive)."""
    for n in range(2, max_n + 1):
        slots = list(itertools.combinations(range(n), 2))
        for mask in range(2 ** len(slots)):
            edges = [slots[k] for k in range(len(slots)) if mask >> k & 1]
            yield Network.from_edges(0, n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
