"""File formats: edge lists, CSV tables, and fit reports.

Node and cluster ids are 1-based in every file and 0-based in memory.
General numeric output uses 6 significant digits; the per-replicate
estimate log keeps 17 so downstream metric recomputation is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError
from .features import FeatureMatrix
from .gee import GeeFit
from .graph import Network


def _fmt6(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".6g")


def _fmt17(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Edge-list / node-list network format


def write_networks(nets: Sequence[Network], edges_path: str | Path, nodes_path: str | Path) -> None:
    """Dump clusters as tab-separated edge and node lists (1-based ids)."""
    with open(edges_path, "w") as fh:
        fh.write("# cluster_id\tu\tv\n")
        for net in nets:
            for u, v in net.edges:
                fh.write(f"{net.cluster_id + 1}\t{u + 1}\t{v + 1}\n")
    with open(nodes_path, "w") as fh:
        fh.write("# cluster_id\tnode_id[\tblock]\n")
        for net in nets:
            for j in range(net.n):
                if net.blocks is not None:
                    fh.write(f"{net.cluster_id + 1}\t{j + 1}\t{net.blocks[j]}\n")
                else:
                    fh.write(f"{net.cluster_id + 1}\t{j + 1}\n")


def _parse_int(tok: str, path, lineno, what) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DataFormatError(f"bad {what} {tok!r}", path=path, line=lineno) from None


def read_networks(edges_path: str | Path, nodes_path: str | Path) -> list[Network]:
    """Load clusters from the edge/node list pair, enforcing integrity."""
    nodes_path = Path(nodes_path)
    edges_path = Path(edges_path)
    for p in (nodes_path, edges_path):
        if not p.exists():
            raise DataFormatError("missing network file", path=str(p))
    nodes: dict[int, dict[int, int | None]] = {}
    with open(nodes_path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise DataFormatError("expected cluster\\tnode[\\tblock]", path=str(nodes_path), line=lineno)
            cid = _parse_int(parts[0], str(nodes_path), lineno, "cluster id")
            nid = _parse_int(parts[1], str(nodes_path), lineno, "node id")
            block = _parse_int(parts[2], str(nodes_path), lineno, "block") if len(parts) == 3 else None
            cluster = nodes.setdefault(cid, {})
            if nid in cluster:
                raise DataFormatError(f"duplicate node {nid}", path=str(nodes_path), line=lineno)
            cluster[nid] = block

    edges: dict[int, list[tuple[int, int]]] = {cid: [] for cid in nodes}
    with open(edges_path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError("expected cluster\\tu\\tv", path=str(edges_path), line=lineno)
            cid = _parse_int(parts[0], str(edges_path), lineno, "cluster id")
            u = _parse_int(parts[1], str(edges_path), lineno, "node id")
            v = _parse_int(parts[2], str(edges_path), lineno, "node id")
            if cid not in nodes:
                raise DataFormatError(f"edge references unknown cluster {cid}", path=str(edges_path), line=lineno)
            if u not in nodes[cid] or v not in nodes[cid]:
                raise DataFormatError(
                    f"edge ({u}, {v}) references undeclared node", path=str(edges_path), line=lineno
                )
            if u == v:
                raise DataFormatError(f"self-loop at node {u}", path=str(edges_path), line=lineno)
            edges[cid].append((u, v))

    nets = []
    for cid in sorted(nodes):
        ids = sorted(nodes[cid])
        if ids != list(range(1, len(ids) + 1)):
            raise DataFormatError(
                f"cluster {cid}: node ids must be 1..n, got {ids[:5]}...", path=str(nodes_path)
            )
        blocks_raw = [nodes[cid][i] for i in ids]
        has_blocks = any(b is not None for b in blocks_raw)
        if has_blocks and any(b is None for b in blocks_raw):
            raise DataFormatError(f"cluster {cid}: some nodes lack block labels", path=str(nodes_path))
        pairs = [(u - 1, v - 1) for u, v in edges[cid]]
        seen = set()
        for u, v in pairs:
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise DataFormatError(
                    f"duplicate edge ({key[0] + 1}, {key[1] + 1}) in cluster {cid}",
                    path=str(edges_path),
                )
            seen.add(key)
        nets.append(
            Network.from_edges(cid - 1, len(ids), pairs, blocks_raw if has_blocks else None)
        )
    return nets


# ---------------------------------------------------------------------------
# Feature and outcome tables


def write_features_csv(path: str | Path, features: Sequence[FeatureMatrix]) -> None:
    if not features:
        raise DataFormatError("nothing to write")
    names = features[0].names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", *names])
        for fm in features:
            if fm.names != names:
                raise DataFormatError("feature matrices have inconsistent columns")
            for j in range(fm.n):
                w.writerow(
                    [fm.cluster_id + 1, j + 1, *(_fmt6(v) for v in fm.values[j])]
                )


def write_outcomes_csv(
    path: str | Path,
    nets: Sequence[Network],
    exposure: np.ndarray,
    baseline: Sequence[np.ndarray],
    outcomes: Sequence[np.ndarray],
) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", "exposed", "baseline_affected", "Y"])
        for ci, net in enumerate(nets):
            for j in range(net.n):
                w.writerow(
                    [
                        net.cluster_id + 1,
                        j + 1,
                        int(exposure[ci]),
                        int(baseline[ci][j]),
                        int(outcomes[ci][j]),
                    ]
                )


def read_outcomes_csv(path: str | Path):
    """Returns (cluster_ids, exposure, baseline, outcomes) keyed by cluster order."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError("missing outcomes file", path=str(path))
    per_cluster: dict[int, dict[int, tuple[int, int, int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"cluster_id", "node_id", "exposed", "baseline_affected", "Y"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataFormatError(
                f"outcomes header must contain {sorted(required)}", path=str(path), line=1
            )
        for lineno, row in enumerate(reader, 2):
            try:
                cid = int(row["cluster_id"]) - 1
                nid = int(row["node_id"]) - 1
                vals = (int(row["exposed"]), int(row["baseline_affected"]), int(row["Y"]))
            except (TypeError, ValueError):
                raise DataFormatError("bad outcome row", path=str(path), line=lineno) from None
            if vals[2] not in (0, 1):
                raise DataFormatError(f"non-binary outcome {vals[2]}", path=str(path), line=lineno)
            per_cluster.setdefault(cid, {})[nid] = vals
    cluster_ids = sorted(per_cluster)
    exposure, baseline, outcomes = [], [], []
    for cid in cluster_ids:
        rows = per_cluster[cid]
        n = max(rows) + 1
        if sorted(rows) != list(range(n)):
            raise DataFormatError(f"cluster {cid + 1}: node ids must be 1..n", path=str(path))
        exp = {rows[j][0] for j in range(n)}
        if len(exp) != 1:
            raise DataFormatError(
                f"cluster {cid + 1}: mixed exposure values", path=str(path)
            )
        exposure.append(exp.pop())
        baseline.append(np.array([bool(rows[j][1]) for j in range(n)]))
        outcomes.append(np.array([float(rows[j][2]) for j in range(n)]))
    return cluster_ids, np.array(exposure), baseline, outcomes


# ---------------------------------------------------------------------------
# Fit reports


def fit_report_rows(fits: dict[str, GeeFit]) -> list[dict]:
    rows = []
    for label, fit in fits.items():
        for rec in fit.report_rows():
            rows.append({"strategy": label, **rec})
    return rows


def write_fit_report(path: str | Path, fits: dict[str, GeeFit], fmt: str = "csv") -> None:
    rows = fit_report_rows(fits)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "parameter", "estimate", "std_error", "wald", "p_value"])
        for r in rows:
            w.writerow(
                [
                    r["strategy"],
                    r["parameter"],
                    _fmt6(r["estimate"]),
                    _fmt6(r["std_error"]),
                    _fmt6(r["wald"]),
                    _fmt6(r["p_value"]),
                ]
            )


def write_model_table(path: str | Path, tables: list[dict]) -> None:
    """Nuisance-model coefficient tables (one row per model term)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "parameter", "estimate", "std_error", "t_value", "p_value"])
        for t in tables:
            w.writerow(
                [
                    t["model"],
                    t["parameter"],
                    _fmt6(t["estimate"]),
                    _fmt6(t["std_error"]),
                    _fmt6(t["t_value"]),
                    _fmt6(t["p_value"]),
                ]
            )


# ---------------------------------------------------------------------------
# Study tables


def write_estimates_csv(path: str | Path, rows: Iterable[dict]) -> None:
    from .study import ESTIMATE_COLUMNS

    float_cols = {"beta0", "beta_a", "se_beta_a"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATE_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    _fmt17(r[c]) if c in float_cols else r[c]
                    for c in ESTIMATE_COLUMNS
                ]
            )


def read_estimates_csv(path: str | Path) -> list[dict]:
    from .study import ESTIMATE_COLUMNS

    path = Path(path)
    if not path.exists():
        raise DataFormatError("missing estimates file", path=str(path))
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ESTIMATE_COLUMNS:
            raise DataFormatError("unexpected estimates header", path=str(path), line=1)
        for row in reader:
            rec = dict(row)
            rec["replicate"] = int(rec["replicate"])
            rec["converged"] = int(rec["converged"])
            rec["attempts"] = int(rec["attempts"])
            for c in ("beta0", "beta_a", "se_beta_a"):
                rec[c] = float(rec[c]) if rec[c] else math.nan
            out.append(rec)
    return out


def write_metrics_csv(path: str | Path, rows: Iterable[dict]) -> None:
    from .study import METRIC_COLUMNS

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r[c] if c in ("scenario", "strategy") else _fmt6(r[c])
                    for c in METRIC_COLUMNS
                ]
            )


def write_inclusion_csv(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "arm", "covariate", "frequency"])
        for r in rows:
            w.writerow([r["scenario"], r["arm"], r["covariate"], _fmt6(r["frequency"])])


def write_sensitivity_csv(path: str | Path, rows: list[dict]) -> None:
    if not rows:
        raise DataFormatError("empty sensitivity table")
    strategies = [k for k in rows[0] if k != "term"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["term", *strategies])
        for r in rows:
            w.writerow([r["term"], *(_fmt6(r[s]) for s in strategies)])
