import math

import numpy as np
import pytest

from netgee import dataio
from netgee.errors import DataFormatError
from netgee.graph import Network

from conftest import random_network


def test_network_roundtrip(tmp_path, rng):
    nets = [random_network(rng, n_max=12, blocks_of=4, cluster_id=c) for c in range(3)]
    dataio.write_networks(nets, tmp_path / "edges.tsv", tmp_path / "nodes.tsv")
    back = dataio.read_networks(tmp_path / "edges.tsv", tmp_path / "nodes.tsv")
    assert len(back) == 3
    for a, b in zip(nets, back):
        assert a.n == b.n
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.blocks, b.blocks)


def test_network_roundtrip_without_blocks(tmp_path):
    nets = [Network.from_edges(0, 4, [(0, 1), (2, 3)])]
    dataio.write_networks(nets, tmp_path / "e.tsv", tmp_path / "n.tsv")
    back = dataio.read_networks(tmp_path / "e.tsv", tmp_path / "n.tsv")
    assert back[0].blocks is None
    assert np.array_equal(back[0].edges, nets[0].edges)


def test_isolated_nodes_survive_roundtrip(tmp_path):
    nets = [Network.from_edges(0, 5, [(0, 1)])]
    dataio.write_networks(nets, tmp_path / "e.tsv", tmp_path / "n.tsv")
    back = dataio.read_networks(tmp_path / "e.tsv", tmp_path / "n.tsv")
    assert back[0].n == 5


def test_missing_node_file_and_dangling_reference(tmp_path):
    (tmp_path / "e.tsv").write_text("1\t1\t2\n")
    with pytest.raises(DataFormatError, match="nodes"):
        dataio.read_networks(tmp_path / "e.tsv", tmp_path / "nodes.tsv")
    (tmp_path / "nodes.tsv").write_text("1\t1\n1\t2\n")
    (tmp_path / "e2.tsv").write_text("1\t1\t3\n")
    with pytest.raises(DataFormatError, match="undeclared"):
        dataio.read_networks(tmp_path / "e2.tsv", tmp_path / "nodes.tsv")


def test_duplicate_edge_rejected_with_location(tmp_path):
    (tmp_path / "nodes.tsv").write_text("1\t1\n1\t2\n")
    (tmp_path / "e.tsv").write_text("1\t1\t2\n1\t2\t1\n")
    with pytest.raises(DataFormatError, match="duplicate"):
        dataio.read_networks(tmp_path / "e.tsv", tmp_path / "nodes.tsv")


def test_comments_and_blank_lines_ok(tmp_path):
    (tmp_path / "nodes.tsv").write_text("# header\n1\t1\n\n1\t2\n")
    (tmp_path / "e.tsv").write_text("# header\n1\t1\t2\n")
    nets = dataio.read_networks(tmp_path / "e.tsv", tmp_path / "nodes.tsv")
    assert nets[0].n == 2 and nets[0].n_edges == 1


def test_outcomes_roundtrip(tmp_path):
    nets = [Network.from_edges(0, 3, [(0, 1)]), Network.from_edges(1, 2, [])]
    exposure = np.array([1, 0])
    baseline = [np.array([True, False, False]), np.array([False, True])]
    outcomes = [np.array([1.0, 1.0, 0.0]), np.array([0.0, 1.0])]
    dataio.write_outcomes_csv(tmp_path / "o.csv", nets, exposure, baseline, outcomes)
    _, exp, base, outs = dataio.read_outcomes_csv(tmp_path / "o.csv")
    assert exp.tolist() == [1, 0]
    assert all(np.array_equal(a, b) for a, b in zip(base, baseline))
    assert all(np.array_equal(a, b) for a, b in zip(outs, outcomes))


def test_outcomes_nonbinary_rejected(tmp_path):
    (tmp_path / "o.csv").write_text(
        "cluster_id,node_id,exposed,baseline_affected,Y\n1,1,0,0,2\n"
    )
    with pytest.raises(DataFormatError, match="non-binary"):
        dataio.read_outcomes_csv(tmp_path / "o.csv")


def test_estimates_roundtrip_and_precision(tmp_path):
    rows = [
        {
            "scenario": "000000",
            "replicate": 0,
            "strategy": "none",
            "beta0": 1 / 3,
            "beta_a": -0.12345678901234567,
            "se_beta_a": 2e-3,
            "converged": 1,
            "attempts": 1,
            "om_selected_exposed": "X1|X9",
            "om_selected_unexposed": "",
            "ps_selected": "sum(X9)",
            "error": "",
        },
        {
            "scenario": "000000",
            "replicate": 1,
            "strategy": "none",
            "beta0": math.nan,
            "beta_a": math.nan,
            "se_beta_a": math.nan,
            "converged": 0,
            "attempts": 3,
            "om_selected_exposed": "",
            "om_selected_unexposed": "",
            "ps_selected": "",
            "error": "StallError",
        },
    ]
    dataio.write_estimates_csv(tmp_path / "est.csv", rows)
    back = dataio.read_estimates_csv(tmp_path / "est.csv")
    assert back[0]["beta_a"] == rows[0]["beta_a"]  # bit-exact through 17 digits
    assert back[0]["beta0"] == rows[0]["beta0"]
    assert math.isnan(back[1]["beta_a"])
    assert back[1]["error"] == "StallError"


def test_features_csv_layout(tmp_path, rng):
    from netgee.features import compute_features

    nets = [random_network(rng, n_max=5, blocks_of=8, cluster_id=c) for c in range(2)]
    feats = [compute_features(net, []) for net in nets]
    dataio.write_features_csv(tmp_path / "f.csv", feats)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "cluster_id,node_id," + ",".join(feats[0].names)
    assert len(lines) == 1 + sum(net.n for net in nets)


def test_fit_report_formats(tmp_path):
    from netgee.gee import GeeFit

    fit = GeeFit(
        beta=np.array([0.25, -0.07]),
        covariance=np.array([[0.001, 0.0], [0.0, 0.002]]),
        converged=True,
        iterations=3,
        working="independence",
        alpha=None,
        phi=1.0,
        kind="classical",
        n_clusters=10,
    )
    dataio.write_fit_report(tmp_path / "r.csv", {"gee": fit})
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "strategy,parameter,estimate,std_error,wald,p_value"
    assert text[1].startswith("gee,intercept,0.25,")
    dataio.write_fit_report(tmp_path / "r.json", {"gee": fit}, fmt="json")
    import json

    rows = json.loads((tmp_path / "r.json").read_text())
    assert rows[1]["parameter"] == "exposure"
    assert rows[1]["estimate"] == pytest.approx(-0.07)
