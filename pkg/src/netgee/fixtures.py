"""Small synthetic datasets for demos, smoke tests, and pipeline validation."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dataio import write_networks
from .graph import Network
from .netgen import DegreeSpec, MixingSpec, generate_cluster_set


def write_two_village(directory: str | Path) -> Path:
    """A 2-cluster, 6-node dataset exercising every file format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nets = [
        Network.from_edges(0, 3, [(0, 1), (1, 2)], blocks=[1, 1, 2]),
        Network.from_edges(1, 3, [(0, 2)], blocks=[1, 2, 2]),
    ]
    write_networks(nets, directory / "edges.tsv", directory / "nodes.tsv")
    with open(directory / "covariates.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", "age", "sex", "leader", "baseline_affected"])
        rows = [
            (1, 1, 34, 1, 1, 1),
            (1, 2, 41, 0, 0, 0),
            (1, 3, 28, 1, 0, 0),
            (2, 1, 55, 0, 1, 0),
            (2, 2, 23, 1, 1, 0),
            (2, 3, 37, 0, 0, 1),
        ]
        w.writerows(rows)
    with open(directory / "outcomes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", "Y"])
        w.writerows([(1, 1, 1), (1, 2, 1), (1, 3, 0), (2, 1, 0), (2, 2, 1), (2, 3, 0)])
    return directory


def write_synthetic_study(
    directory: str | Path,
    m: int = 49,
    size_range: tuple[int, int] = (80, 140),
    beta0: float = 0.35,
    beta_a: float = -0.15,
    seed: int = 7,
) -> dict:
    """A closed-loop dataset with a known exposure effect.

    Cluster leader fractions are independent of everything else, so the
    top-quartile exposure rule is unconfounded and the marginal effect of
    exposure equals ``beta_a`` by construction. Outcomes depend mildly on
    degree and age so adjustment strategies have signal to use.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    nets = generate_cluster_set(
        m,
        size_range,
        DegreeSpec(distribution="poisson", mean_degree=6.0),
        MixingSpec(n_blocks=8),
        None,
        np.random.SeedSequence(seed),
    )
    leader_rate = rng.uniform(0.05, 0.30, size=m)
    fractions = np.empty(m)
    leader, age, sex, baseline = [], [], [], []
    for ci, net in enumerate(nets):
        lv = (rng.random(net.n) < leader_rate[ci]).astype(int)
        if lv.sum() == 0:
            lv[rng.integers(net.n)] = 1
        leader.append(lv)
        fractions[ci] = lv.mean()
        age.append(np.round(rng.normal(35, 10, size=net.n)).clip(16, 90))
        sex.append(rng.integers(0, 2, size=net.n))
        baseline.append((rng.random(net.n) < 0.05).astype(int))
    exposure = (fractions > np.quantile(fractions, 0.75)).astype(int)

    outcomes = []
    for ci, net in enumerate(nets):
        deg = np.bincount(net.edges.ravel(), minlength=net.n) if net.n_edges else np.zeros(net.n)
        p = (
            beta0
            + beta_a * exposure[ci]
            + 0.02 * (deg - 6.0)
            - 0.004 * (age[ci] - 35.0)
        )
        p = np.clip(p, 0.02, 0.98)
        outcomes.append((rng.random(net.n) < p).astype(int))

    write_networks(nets, directory / "edges.tsv", directory / "nodes.tsv")
    with open(directory / "covariates.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", "age", "sex", "leader", "baseline_affected"])
        for ci, net in enumerate(nets):
            for j in range(net.n):
                w.writerow(
                    [ci + 1, j + 1, int(age[ci][j]), int(sex[ci][j]), int(leader[ci][j]),
                     int(baseline[ci][j])]
                )
    with open(directory / "outcomes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cluster_id", "node_id", "Y"])
        for ci, net in enumerate(nets):
            for j in range(net.n):
                w.writerow([ci + 1, j + 1, int(outcomes[ci][j])])
    truth = {
        "beta0": beta0,
        "beta_a": beta_a,
        "m": m,
        "exposure_rule": "quartile:leader",
        "n_exposed": int(exposure.sum()),
    }
    with open(directory / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")
    return truth


SMOKE_CONFIG = """\
[study]
master_seed = 31337
scenarios = ["000001"]
replicates = 4
strategies = ["none", "x9"]
threads = 1

[netgen]
m_clusters = 8
size_min = 40
size_max = 60
"""

FULL_GRID_CONFIG = """\
# Full 64-scenario grid: 48 clusters of 120-280 nodes, 500 replicates each.
[study]
master_seed = 20260801
scenarios = "all"
replicates = 500
strategies = ["none", "x9", "all", "stepwise"]
threads = 8

[netgen]
m_clusters = 48
size_min = 120
size_max = 280
"""


def write_config_samples(directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "smoke.toml").write_text(SMOKE_CONFIG)
    (directory / "full64.toml").write_text(FULL_GRID_CONFIG)
    return directory
