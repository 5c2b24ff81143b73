"""Empirical-data ingestion and the village-style analysis pipeline.

A dataset directory holds the network pair (``edges.tsv``/``nodes.tsv``),
a node covariate table ``covariates.csv`` (numeric sociodemographics plus
optional ``leader``/``saver``/``baseline_affected``/``household`` flags),
and ``outcomes.csv`` with the binary endpoint per node. Exposure is
derived per cluster, by default as membership in the top quartile of a
flag's within-cluster fraction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import read_networks
from .errors import ConfigError, DataFormatError
from .features import ALL_COLUMNS, FeatureMatrix, compute_features
from .gee import EffectEstimate, Strategy, estimate_effect
from .graph import Network

EMPIRICAL_STRATEGIES = ("crude", "gee", "dr_network", "dr_network_socio")
_RESERVED = ("baseline_affected", "household")


@dataclass
class EmpiricalDataset:
    """Loaded empirical study: networks plus aligned node tables."""

    networks: list[Network]
    covariates: dict[str, list[np.ndarray]]
    baseline: list[np.ndarray]
    outcomes: list[np.ndarray]
    household: list[np.ndarray] | None = None

    @property
    def m(self) -> int:
        return len(self.networks)

    def socio_names(self) -> tuple[str, ...]:
        return tuple(k for k in self.covariates if k not in _RESERVED)

    def cluster_fraction(self, column: str) -> np.ndarray:
        if column not in self.covariates:
            raise ConfigError(f"no covariate column {column!r}")
        return np.array([float(v.mean()) for v in self.covariates[column]])


def _read_node_table(path: Path, nets: list[Network]) -> dict[str, list[np.ndarray]]:
    if not path.exists():
        raise DataFormatError("missing covariates file", path=str(path))
    sizes = {net.cluster_id: net.n for net in nets}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [c for c in (reader.fieldnames or []) if c not in ("cluster_id", "node_id")]
        if reader.fieldnames is None or "cluster_id" not in reader.fieldnames:
            raise DataFormatError("covariates need cluster_id,node_id columns", path=str(path), line=1)
        store = {
            c: {cid: np.full(n, np.nan) for cid, n in sizes.items()} for c in cols
        }
        seen = {cid: np.zeros(n, dtype=bool) for cid, n in sizes.items()}
        for lineno, row in enumerate(reader, 2):
            try:
                cid = int(row["cluster_id"]) - 1
                nid = int(row["node_id"]) - 1
            except (TypeError, ValueError):
                raise DataFormatError("bad id", path=str(path), line=lineno) from None
            if cid not in sizes or not 0 <= nid < sizes[cid]:
                raise DataFormatError(
                    f"row references unknown node ({cid + 1}, {nid + 1})",
                    path=str(path),
                    line=lineno,
                )
            seen[cid][nid] = True
            for c in cols:
                try:
                    store[c][cid][nid] = float(row[c])
                except (TypeError, ValueError):
                    raise DataFormatError(
                        f"non-numeric value in column {c!r}", path=str(path), line=lineno
                    ) from None
        for cid, mask in seen.items():
            if not mask.all():
                raise DataFormatError(
                    f"cluster {cid + 1}: covariates missing for {int((~mask).sum())} nodes",
                    path=str(path),
                )
    return {c: [store[c][net.cluster_id] for net in nets] for c in cols}


def load_empirical(directory: str | Path) -> EmpiricalDataset:
    """Load and cross-check the four dataset files."""
    directory = Path(directory)
    nets = read_networks(directory / "edges.tsv", directory / "nodes.tsv")
    covs = _read_node_table(directory / "covariates.csv", nets)

    out_path = directory / "outcomes.csv"
    if not out_path.exists():
        raise DataFormatError("missing outcomes file", path=str(out_path))
    y_cols = _read_node_table(out_path, nets)
    if "Y" not in y_cols:
        raise DataFormatError("outcomes.csv must have a Y column", path=str(out_path), line=1)
    outcomes = y_cols["Y"]
    for ci, v in enumerate(outcomes):
        bad = ~np.isin(v, (0.0, 1.0))
        if bad.any():
            raise DataFormatError(
                f"cluster {ci + 1}: non-binary outcome values", path=str(out_path)
            )

    if "baseline_affected" in covs:
        baseline = [v.astype(bool) for v in covs["baseline_affected"]]
    else:
        baseline = [np.zeros(net.n, dtype=bool) for net in nets]
    household = None
    if "household" in covs:
        household = [v.astype(np.int64) for v in covs["household"]]
    return EmpiricalDataset(nets, covs, baseline, outcomes, household)


def define_exposure_quartile(cluster_fractions: np.ndarray) -> np.ndarray:
    """Exposure = strictly above the 75th percentile of cluster fractions."""
    x = np.asarray(cluster_fractions, dtype=np.float64)
    if x.size < 4:
        raise ConfigError("need at least four clusters for a quartile exposure")
    if x.min() == x.max():
        raise ConfigError("cluster fractions are constant; no exposure contrast")
    threshold = np.quantile(x, 0.75)  # type-7 linear interpolation
    return (x > threshold).astype(np.int64)


def aggregate_households(dataset: EmpiricalDataset) -> EmpiricalDataset:
    """Collapse nodes to households: outcome by any-member, covariates by mean.

    Household units keep their cluster's graph-derived features through the
    mean as well; the contact network itself stays at the individual level,
    so this returns a dataset whose "nodes" are households with edge lists
    dropped from the analysis tables.
    """
    if dataset.household is None:
        raise ConfigError("dataset has no household column")
    networks, covs, base, outs = [], {c: [] for c in dataset.covariates}, [], []
    for ci, net in enumerate(dataset.networks):
        hh = dataset.household[ci]
        uniq, inv = np.unique(hh, return_inverse=True)
        k = uniq.size
        outs.append(
            np.array([float(dataset.outcomes[ci][inv == h].max()) for h in range(k)])
        )
        base.append(
            np.array([bool(dataset.baseline[ci][inv == h].max()) for h in range(k)])
        )
        for c in dataset.covariates:
            col = dataset.covariates[c][ci]
            covs[c].append(np.array([float(col[inv == h].mean()) for h in range(k)]))
        networks.append(Network(net.cluster_id, k, np.empty((0, 2), dtype=np.int64)))
    return EmpiricalDataset(networks, covs, base, outs, None)


def _strategy_for(name: str, socio: tuple[str, ...], has_blocks: bool) -> Strategy:
    network_cols = tuple(
        c for c in ALL_COLUMNS[:10] if has_blocks or c != "X4"
    )
    if name == "crude":
        return Strategy("crude", name="crude")
    if name == "gee":
        return Strategy("gee", name="gee")
    if name == "dr_network":
        return Strategy("dr", network_cols, stepwise=True, name="dr_network")
    if name == "dr_network_socio":
        return Strategy("dr", network_cols + socio, stepwise=True, name="dr_network_socio")
    raise ConfigError(f"unknown empirical strategy {name!r}; known: {EMPIRICAL_STRATEGIES}")


def analyze_empirical(
    dataset: EmpiricalDataset,
    exposure: np.ndarray,
    strategies: Sequence[str] = EMPIRICAL_STRATEGIES,
) -> dict[str, EffectEstimate]:
    """Estimate the exposure effect under each requested adjustment strategy.

    Doubly-robust strategies select outcome models per arm and a
    cluster-level propensity model by stepwise search over network (and
    optionally sociodemographic) covariates.
    """
    exposure = np.asarray(exposure, dtype=np.int64)
    if exposure.shape != (dataset.m,):
        raise ConfigError("exposure must have one value per cluster")
    has_blocks = all(net.blocks is not None for net in dataset.networks)
    socio = dataset.socio_names()
    needed = tuple(c for c in ALL_COLUMNS[:10] if has_blocks or c != "X4")
    feats: list[FeatureMatrix] = []
    for ci, net in enumerate(dataset.networks):
        fm = compute_features(net, dataset.baseline[ci], columns=needed)
        for c in socio:
            fm = fm.with_column(c, dataset.covariates[c][ci])
        feats.append(fm)
    results: dict[str, EffectEstimate] = {}
    for name in strategies:
        strat = _strategy_for(name, socio, has_blocks)
        results[name] = estimate_effect(
            dataset.networks, dataset.outcomes, exposure, feats, strat
        )
    return results


def nuisance_model_tables(results: dict[str, EffectEstimate]) -> list[dict]:
    """Flatten OM/PS fits into report rows for the model-table CSV."""
    rows = []
    for name, est in results.items():
        for label, fit in (
            (f"{name}:om_exposed", est.om_exposed),
            (f"{name}:om_unexposed", est.om_unexposed),
            (f"{name}:ps", est.ps),
        ):
            if fit is None:
                continue
            for k, pname in enumerate(fit.names):
                rows.append(
                    {
                        "model": label,
                        "parameter": pname,
                        "estimate": float(fit.coefficients[k]),
                        "std_error": float(fit.standard_errors[k]),
                        "t_value": float(fit.tvalues[k]),
                        "p_value": float(fit.pvalues[k]),
                    }
                )
    return rows
