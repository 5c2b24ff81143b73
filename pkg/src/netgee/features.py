"""Per-node covariates summarizing network position and baseline contagion.

Twelve standard columns (X1..X12) are computed per cluster: degree and
neighborhood structure, component summaries, block membership, and
distance-based exposure to the baseline-affected set. Cluster-level
columns are broadcast to every node and flagged as such.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import DataFormatError, DegenerateVarianceError
from .graph import Network, connected_components, degrees
from .netgen import degree_correlation

ALL_COLUMNS = ("X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10", "X11", "X12")
CLUSTER_LEVEL = frozenset({"X3", "X5", "X6", "X7"})
_PATH_COLUMNS = frozenset({"X11", "X12"})


@dataclass
class FeatureMatrix:
    """Covariate values for one cluster, one row per node."""

    cluster_id: int
    values: np.ndarray
    names: tuple[str, ...]
    level: tuple[str, ...]
    degenerate_assortativity: bool = False

    def __post_init__(self):
        if self.values.shape[1] != len(self.names) or len(self.names) != len(self.level):
            raise DataFormatError("feature matrix columns and labels disagree")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"no feature column {name!r}") from None

    def with_column(self, name: str, values: np.ndarray, level: str = "node") -> "FeatureMatrix":
        vals = np.column_stack([self.values, np.asarray(values, dtype=np.float64)])
        return FeatureMatrix(
            self.cluster_id,
            vals,
            self.names + (name,),
            self.level + (level,),
            self.degenerate_assortativity,
        )


def assortativity(net: Network) -> float:
    """Pearson correlation of excess degrees over both orientations of each edge.

    Raises :class:`DegenerateVarianceError` when the excess-degree variance
    vanishes (e.g. regular graphs); callers that need a finite value
    substitute 0 and flag it.
    """
    # Excess degree is degree minus one; correlation is shift-invariant, so
    # the endpoint-degree correlation is the same number.
    return degree_correlation(degrees(net), net.edges)


def _affected_bool(net: Network, baseline_affected) -> np.ndarray:
    aff = np.zeros(net.n, dtype=bool)
    idx = np.asarray(sorted(set(int(v) for v in baseline_affected)), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= net.n:
            raise DataFormatError(f"baseline node outside [0, {net.n})")
        aff[idx] = True
    return aff


def compute_features(
    net: Network,
    baseline_affected,
    columns: tuple[str, ...] | None = None,
    connected_blocks: tuple[int, ...] = (1, 5),
) -> FeatureMatrix:
    """Compute the requested covariate columns for one cluster.

    ``baseline_affected`` is an iterable of node ids (or a boolean mask)
    affected at baseline. X11 and X12 measure proximity to *other*
    affected nodes: the affected node itself is excluded from its own
    minimum and sum, and unreachable pairs contribute 0.
    """
    cols = ALL_COLUMNS if columns is None else tuple(columns)
    unknown = [c for c in cols if c not in ALL_COLUMNS]
    if unknown:
        raise DataFormatError(f"unknown feature columns {unknown}")
    if isinstance(baseline_affected, np.ndarray) and baseline_affected.dtype == bool:
        if baseline_affected.shape != (net.n,):
            raise DataFormatError("baseline mask length must equal node count")
        aff = baseline_affected.copy()
    else:
        aff = _affected_bool(net, baseline_affected)

    n = net.n
    deg = degrees(net).astype(np.float64)
    out: dict[str, np.ndarray] = {}
    degenerate = False

    if "X1" in cols:
        out["X1"] = deg
    if "X2" in cols:
        nbr_deg_sum = np.zeros(n)
        if net.n_edges:
            u, v = net.edges[:, 0], net.edges[:, 1]
            np.add.at(nbr_deg_sum, u, deg[v])
            np.add.at(nbr_deg_sum, v, deg[u])
        with np.errstate(invalid="ignore", divide="ignore"):
            x2 = np.where(deg > 0, nbr_deg_sum / np.maximum(deg, 1), 0.0)
        out["X2"] = x2
    if "X3" in cols:
        try:
            r = assortativity(net) if net.n_edges else 0.0
            if net.n_edges == 0:
                degenerate = True
        except DegenerateVarianceError:
            warnings.warn(
                f"cluster {net.cluster_id}: degenerate degree variance, assortativity set to 0",
                stacklevel=2,
            )
            r = 0.0
            degenerate = True
        out["X3"] = np.full(n, r)
    if "X4" in cols:
        if net.blocks is None:
            raise DataFormatError("X4 requires block labels; drop it for unlabeled data")
        out["X4"] = np.isin(net.blocks, connected_blocks).astype(np.float64)

    need_comp = bool({"X5", "X6", "X7", "X8", "X10"} & set(cols))
    if need_comp:
        lab = connected_components(net)
        comp_sizes = lab.sizes.astype(np.float64)
        if "X5" in cols:
            out["X5"] = np.full(n, comp_sizes[0] if comp_sizes.size else 0.0)
        if "X6" in cols:
            out["X6"] = np.full(n, n / lab.n_components if lab.n_components else 0.0)
        if "X7" in cols:
            out["X7"] = np.full(n, float(lab.n_components))
        if "X8" in cols:
            out["X8"] = comp_sizes[lab.component_of - 1]
        if "X10" in cols:
            aff_per_comp = np.bincount(
                lab.component_of[aff], minlength=lab.n_components + 1
            ).astype(np.float64)
            out["X10"] = aff_per_comp[lab.component_of]

    if "X9" in cols:
        x9 = np.zeros(n)
        if net.n_edges:
            u, v = net.edges[:, 0], net.edges[:, 1]
            np.add.at(x9, u, aff[v].astype(np.float64))
            np.add.at(x9, v, aff[u].astype(np.float64))
        out["X9"] = x9

    if _PATH_COLUMNS & set(cols):
        x11, x12 = _path_features(net, aff)
        if "X11" in cols:
            out["X11"] = x11
        if "X12" in cols:
            out["X12"] = x12

    values = np.column_stack([out[c] for c in cols]) if cols else np.zeros((n, 0))
    level = tuple("cluster" if c in CLUSTER_LEVEL else "node" for c in cols)
    return FeatureMatrix(net.cluster_id, values, cols, level, degenerate)


def _path_features(net: Network, aff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse nearest-affected distance and summed inverse distances.

    Distances run from each baseline-affected node to every other node;
    a node's own affected status is ignored so both columns describe
    exposure to other cases.
    """
    n = net.n
    sources = np.flatnonzero(aff)
    x11 = np.zeros(n)
    x12 = np.zeros(n)
    if sources.size == 0 or net.n_edges == 0:
        return x11, x12
    dist = csgraph.dijkstra(net.csr, directed=False, unweighted=True, indices=sources)
    dist = np.atleast_2d(dist)
    for row, s in enumerate(sources):
        d = dist[row]
        ok = np.isfinite(d) & (d > 0)
        inv = np.zeros(n)
        inv[ok] = 1.0 / d[ok]
        x12 += inv
        x11 = np.maximum(x11, inv)
    return x11, x12
