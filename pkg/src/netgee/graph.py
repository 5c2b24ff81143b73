"""Simple undirected graph storage and structural primitives.

A :class:`Network` is one cluster's contact graph: a fixed node set
``0..n-1``, an edge set with no self-loops or parallel edges, and an
optional block label per node. Instances are treated as immutable after
construction; all operations here are pure functions of their inputs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DataFormatError

UNREACHABLE = -1


def _canonical_edges(edges: Iterable[Sequence[int]], n: int) -> np.ndarray:
    arr = np.asarray(list(edges), dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataFormatError("edge list must be pairs of node ids")
    if arr.min() < 0 or arr.max() >= n:
        raise DataFormatError(f"edge endpoint outside [0, {n})")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise DataFormatError("self-loops are not allowed")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    arr = np.stack([lo, hi], axis=1)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    if arr.shape[0] > 1 and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
        raise DataFormatError("duplicate edges are not allowed")
    return arr


@dataclass
class Network:
    """One cluster's simple undirected graph.

    ``edges`` is an (m, 2) int array with each row ``u < v``, sorted
    lexicographically. ``blocks`` holds 1-based block labels per node, or
    None when the data carries none (empirical ingestion).
    """

    cluster_id: int
    n: int
    edges: np.ndarray
    blocks: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 0:
            raise DataFormatError("node count must be nonnegative")
        self.edges = np.asarray(self.edges, dtype=np.int64)
        if self.edges.size:
            if self.edges.ndim != 2 or self.edges.shape[1] != 2:
                raise DataFormatError("edges must be an (m, 2) array")
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise DataFormatError(f"edge endpoint outside [0, {self.n})")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise DataFormatError("edge rows must satisfy u < v (no self-loops)")
            keys = self.edges[:, 0].astype(np.int64) * self.n + self.edges[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise DataFormatError("edges must be sorted and free of duplicates")
        else:
            self.edges = self.edges.reshape(0, 2)
        if self.blocks is not None:
            self.blocks = np.asarray(self.blocks, dtype=np.int64)
            if self.blocks.shape != (self.n,):
                raise DataFormatError(
                    f"blocks must label exactly the {self.n} nodes of cluster "
                    f"{self.cluster_id}"
                )
            if self.blocks.size and self.blocks.min() < 1:
                raise DataFormatError("block labels are 1-based")
            self.blocks.flags.writeable = False
        self.edges.flags.writeable = False

    @classmethod
    def from_edges(
        cls,
        cluster_id: int,
        n: int,
        edges: Iterable[Sequence[int]],
        blocks: Sequence[int] | None = None,
    ) -> "Network":
        """Validate and canonicalize an edge list into a Network."""
        return cls(cluster_id, n, _canonical_edges(edges, n), blocks)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> list[np.ndarray]:
        """Sorted neighbor array per node."""
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return [np.array(sorted(a), dtype=np.int64) for a in nbrs]

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        m = self.n_edges
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * m, dtype=np.int8)
        return sparse.csr_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(self.n, self.n),
        )


@dataclass(frozen=True)
class ComponentLabeling:
    """Connected components, 1-based and ordered largest-first.

    ``component_of[j]`` is the component index of node j; ties in size are
    broken by the smallest node id contained in the component.
    """

    component_of: np.ndarray
    sizes: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.sizes.size)


def degrees(net: Network) -> np.ndarray:
    """Per-node degree; sums to twice the edge count."""
    if net.n == 0:
        return np.zeros(0, dtype=np.int64)
    return np.bincount(net.edges.ravel(), minlength=net.n).astype(np.int64)


def connected_components(net: Network) -> ComponentLabeling:
    """Label maximal path-connected node sets, largest first."""
    if net.n == 0:
        return ComponentLabeling(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    _, raw = csgraph.connected_components(net.csr, directed=False)
    counts = np.bincount(raw)
    first_node = np.full(counts.size, net.n, dtype=np.int64)
    # np.minimum.at gives the smallest node id per raw label
    np.minimum.at(first_node, raw, np.arange(net.n))
    order = np.lexsort((first_node, -counts))
    rank = np.empty_like(order)
    rank[order] = np.arange(1, counts.size + 1)
    component_of = rank[raw]
    sizes = counts[order]
    return ComponentLabeling(component_of, sizes.astype(np.int64))


def bfs_distances(net: Network, sources: Iterable[int]) -> np.ndarray:
    """Shortest unweighted distance from the nearest source to every node.

    Unreachable nodes (including everything when ``sources`` is empty) get
    :data:`UNREACHABLE`.
    """
    src = sorted(set(int(s) for s in sources))
    dist = np.full(net.n, UNREACHABLE, dtype=np.int64)
    if not src:
        return dist
    if src[0] < 0 or src[-1] >= net.n:
        raise DataFormatError(f"source node outside [0, {net.n})")
    adj = net.adjacency
    q: deque[int] = deque()
    for s in src:
        dist[s] = 0
        q.append(s)
    while q:
        u = q.popleft()
        du = dist[u]
        for v in adj[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = du + 1
                q.append(v)
    return dist
