import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netgee.errors import ConfigError
from netgee.graph import Network, degrees
from netgee.netgen import (
    DegreeSpec,
    MixingSpec,
    RewireSpec,
    build_mixing_matrix,
    degree_correlation,
    generate_cluster_set,
    rewire_assortative,
    sample_dcsbm,
    sample_degree_sequence,
)

from conftest import random_network


# ---------------------------------------------------------------------------
# Degree sequences


def test_poisson_mean_within_three_sigma(rng):
    n = 10_000
    ks = sample_degree_sequence(DegreeSpec("poisson", 10.0), n, rng)
    sigma = np.sqrt(10.0 / n)
    assert abs(ks.mean() - 10.0) < 3 * sigma + 1.0 / n  # parity repair adds <= 1/n


def test_degree_sum_even(rng):
    for _ in range(25):
        ks = sample_degree_sequence(DegreeSpec("poisson", 3.0), 11, rng)
        assert ks.sum() % 2 == 0


def test_powerlaw_ccdf_slope(rng):
    ks = sample_degree_sequence(DegreeSpec("powerlaw", 2.0), 100_000, rng)
    # CCDF of an exponent-g law decays with log-log slope 1-g over the body
    ks_sorted = np.sort(ks)
    lo, hi = 1, np.quantile(ks, 0.995)
    grid = np.unique(ks_sorted[(ks_sorted >= lo) & (ks_sorted <= hi)])
    ccdf = np.array([(ks >= k).mean() for k in grid])
    slope = np.polyfit(np.log(grid), np.log(ccdf), 1)[0]
    assert -1.8 < slope < -1.2


def test_powerlaw_mean_is_tuned(rng):
    ks = sample_degree_sequence(DegreeSpec("powerlaw", 10.0), 200_000, rng)
    assert abs(ks.mean() - 10.0) < 0.15
    assert ks.min() >= 1


def test_zero_mean_rejected():
    with pytest.raises(ConfigError):
        DegreeSpec("poisson", 0.0)


def test_tiny_n_rejected(rng):
    with pytest.raises(ConfigError):
        sample_degree_sequence(DegreeSpec("poisson", 2.0), 1, rng)


# ---------------------------------------------------------------------------
# Mixing matrices


def test_mixing_community_is_diagonal():
    om = build_mixing_matrix(np.array([4.0, 6.0]), MixingSpec(2, 1.0, 0.0))
    assert np.allclose(om, np.diag([4.0, 6.0]))


def test_mixing_random_hand_value():
    om = build_mixing_matrix(np.array([4.0, 6.0]), MixingSpec(2, 0.0, 0.0))
    assert np.allclose(om, [[1.6, 2.4], [2.4, 3.6]])


def test_mixing_blend_row_sums_paper_settings():
    kappa = np.arange(1.0, 9.0) * 2
    for lam, mu in ((0.0, 0.0), (0.3, 0.3)):
        om = build_mixing_matrix(kappa, MixingSpec(8, lam, mu))
        assert np.allclose(om.sum(axis=1), kappa)
        assert np.allclose(om, om.T)


def test_mixing_invalid_blend():
    with pytest.raises(ConfigError):
        MixingSpec(8, 0.7, 0.4)


@settings(max_examples=40, deadline=None)
@given(
    lam=st.floats(0, 1),
    mu=st.floats(0, 1),
    seed=st.integers(0, 2**31 - 1),
)
def test_mixing_row_sum_property(lam, mu, seed):
    if lam + mu > 1:
        lam, mu = lam / 2, mu / 2
    rng = np.random.default_rng(seed)
    kappa = rng.integers(0, 40, size=8).astype(float) * 2
    om = build_mixing_matrix(kappa, MixingSpec(8, lam, mu))
    assert np.allclose(om.sum(axis=1), kappa, atol=1e-9)
    assert np.allclose(om, om.T)
    assert om.min() > -1e-9


# ---------------------------------------------------------------------------
# DC-SBM sampling


def test_dcsbm_all_zero_theta(rng):
    net = sample_dcsbm(np.zeros(5), np.zeros((1, 1)), np.ones(5, dtype=int), rng)
    assert net.n_edges == 0


def test_dcsbm_diagonal_mixing_no_cross_edges(rng):
    n = 100
    blocks = np.repeat([1, 2], n // 2)
    theta = np.full(n, 1.0 / (n // 2))
    om = np.diag([120.0, 120.0])
    net = sample_dcsbm(theta, om, blocks, rng)
    b = blocks[net.edges]
    assert np.all(b[:, 0] == b[:, 1])


def test_dcsbm_single_block_mean_degree(rng):
    n = 500
    means = []
    for _ in range(100):
        ks = sample_degree_sequence(DegreeSpec("poisson", 10.0), n, rng)
        kappa = np.array([float(ks.sum())])
        theta = ks / kappa[0]
        om = build_mixing_matrix(kappa, MixingSpec(1, 0.0, 0.0))
        net = sample_dcsbm(theta, om, np.ones(n, dtype=int), rng)
        means.append(degrees(net).mean())
    assert abs(np.mean(means) - 10.0) / 10.0 < 0.05


def test_dcsbm_dimension_mismatch(rng):
    with pytest.raises(ConfigError):
        sample_dcsbm(np.ones(3) / 3, np.ones((2, 2)), np.ones(4, dtype=int), rng)


def test_dcsbm_block_pair_totals(rng):
    # expected edge totals: omega_rs off-diagonal, omega_rr/2 within
    n = 2000
    blocks = np.repeat([1, 2], n // 2)
    theta = np.where(blocks == 1, 1.0 / (n // 2), 1.0 / (n // 2))
    om = np.array([[800.0, 400.0], [400.0, 600.0]])
    counts = np.zeros(3)
    reps = 40
    for _ in range(reps):
        net = sample_dcsbm(theta, om, blocks, rng)
        b = blocks[net.edges]
        counts[0] += np.sum((b[:, 0] == 1) & (b[:, 1] == 1))
        counts[1] += np.sum(b[:, 0] != b[:, 1])
        counts[2] += np.sum((b[:, 0] == 2) & (b[:, 1] == 2))
    counts /= reps
    # collapsing multi-edges loses ~nu/2 per pair; generous 5% tolerance
    assert abs(counts[0] - 400.0) < 0.05 * 400
    assert abs(counts[1] - 400.0) < 0.05 * 400
    assert abs(counts[2] - 300.0) < 0.05 * 300


def test_dcsbm_random_mixing_edge_prob_proportional_to_theta_product(rng):
    # chi-square goodness of fit on binned theta products
    n = 10_000
    ks = sample_degree_sequence(DegreeSpec("poisson", 8.0), n, rng)
    kappa = np.array([float(ks.sum())])
    theta = ks / kappa[0]
    om = build_mixing_matrix(kappa, MixingSpec(1, 0.0, 0.0))
    net = sample_dcsbm(theta, om, np.ones(n, dtype=int), rng)
    prod = theta[net.edges[:, 0]] * theta[net.edges[:, 1]]
    # bin realized edges by deciles of the product of endpoint rates among a
    # random sample of candidate pairs, compare against expectation
    pairs = rng.integers(0, n, size=(400_000, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    cand = theta[pairs[:, 0]] * theta[pairs[:, 1]]
    qs = np.quantile(cand[cand > 0], np.linspace(0, 1, 11))
    qs[0], qs[-1] = 0, np.inf
    rates = cand * om[0, 0]
    exp_counts = np.array(
        [rates[(cand >= qs[k]) & (cand < qs[k + 1])].sum() for k in range(10)]
    )
    # scale candidate-sample expectation to the full pair population
    n_pairs_total = n * (n - 1) / 2
    exp_counts *= n_pairs_total / len(cand)
    obs_counts = np.array(
        [np.sum((prod >= qs[k]) & (prod < qs[k + 1])) for k in range(10)]
    )
    keep = exp_counts > 15
    chi2 = float(np.sum((obs_counts[keep] - exp_counts[keep]) ** 2 / exp_counts[keep]))
    dof = int(keep.sum()) - 1
    from scipy.stats import chi2 as chi2_dist

    assert chi2 < chi2_dist.ppf(0.999, dof)


# ---------------------------------------------------------------------------
# Rewiring


def _block_pair_counts(net: Network) -> dict:
    blocks = net.blocks if net.blocks is not None else np.ones(net.n, dtype=int)
    out: dict = {}
    for u, v in net.edges:
        key = tuple(sorted((int(blocks[u]), int(blocks[v]))))
        out[key] = out.get(key, 0) + 1
    return out


def test_rewire_already_at_target(rng):
    net = Network.from_edges(0, 4, [(0, 1), (1, 2), (2, 3)])
    r0 = degree_correlation(degrees(net), net.edges)
    res = rewire_assortative(
        net, RewireSpec(r0, 0.05), "increase", rng, record_trace=True
    )
    assert res.accepted == 0 and res.converged
    assert res.trace == []


def test_rewire_two_edge_cross_pair_swap(rng):
    # blocks: {0, 2, 4} in 1 and {1, 3, 5} in 2; the only eligible pair is
    # the cross pair carrying edges (0,1) and (2,3) whose swap evens degrees
    net = Network.from_edges(
        0, 6, [(0, 1), (2, 3), (0, 4), (3, 5)], blocks=[1, 2, 1, 2, 1, 2]
    )
    res = rewire_assortative(net, RewireSpec(0.9, 0.001, max_sweeps=100), "increase", rng)
    got = {tuple(e) for e in map(tuple, res.network.edges)}
    assert (0, 3) in got and (1, 2) in got
    assert res.accepted == 1
    assert res.assortativity > res.initial_assortativity


def test_rewire_200_node_poisson_reaches_target(rng):
    ks = sample_degree_sequence(DegreeSpec("poisson", 8.0), 200, rng)
    kappa = np.array([float(ks.sum())])
    om = build_mixing_matrix(kappa, MixingSpec(1, 0.0, 0.0))
    net = sample_dcsbm(ks / kappa[0], om, np.ones(200, dtype=int), rng)
    spec = RewireSpec(0.3, 0.02)
    res = rewire_assortative(net, spec, "increase", rng, record_trace=True)
    direct = degree_correlation(degrees(res.network), res.network.edges)
    assert abs(direct - res.assortativity) < 1e-9
    assert res.converged and abs(direct - 0.3) <= 0.02
    trace = np.array(res.trace)
    assert np.all(np.diff(trace) > -1e-12)


@pytest.mark.parametrize("direction,target", [("increase", 0.25), ("decrease", -0.25)])
def test_rewire_preserves_structure_and_monotone(rng, direction, target):
    for _ in range(30):
        net = random_network(rng, n_max=40, p=0.15, blocks_of=3)
        if net.n_edges < 4:
            continue
        res = rewire_assortative(
            net, RewireSpec(target, 0.02), direction, rng, record_trace=True
        )
        assert sorted(degrees(net).tolist()) == sorted(degrees(res.network).tolist())
        assert _block_pair_counts(net) == _block_pair_counts(res.network)
        if res.trace:
            diffs = np.diff([res.initial_assortativity] + res.trace)
            if direction == "increase":
                assert np.all(diffs > -1e-12)
            else:
                assert np.all(diffs < 1e-12)


def test_rewire_regular_graph_degenerate(rng):
    net = Network.from_edges(0, 4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    res = rewire_assortative(net, RewireSpec(0.3, 0.02), "increase", rng)
    assert not res.converged and res.accepted == 0


# ---------------------------------------------------------------------------
# Cluster sets


def test_generate_cluster_set_paper_scale():
    nets = generate_cluster_set(
        48,
        (120, 280),
        DegreeSpec("poisson", 2.0),
        MixingSpec(8, 0.0, 0.0),
        RewireSpec(-0.3, 0.02, patience_factor=5.0),
        np.random.SeedSequence(77),
    )
    assert len(nets) == 48
    total = sum(net.n for net in nets)
    assert total == 9600
    assert all(120 <= net.n <= 280 for net in nets)
    for net in nets:
        deg = degrees(net)
        assert int(deg.sum()) == 2 * net.n_edges
        assert net.blocks is not None and net.blocks.min() >= 1 and net.blocks.max() <= 8


def test_generate_single_fixed_size_cluster():
    nets = generate_cluster_set(
        1, (5, 5), DegreeSpec("poisson", 2.0), MixingSpec(2, 0.0, 0.0), None,
        np.random.SeedSequence(3),
    )
    assert len(nets) == 1 and nets[0].n == 5


def test_generate_cluster_set_deterministic():
    args = (
        3,
        (30, 50),
        DegreeSpec("poisson", 4.0),
        MixingSpec(4, 0.3, 0.3),
        RewireSpec(0.2, 0.05),
    )
    a = generate_cluster_set(*args, np.random.SeedSequence(9))
    b = generate_cluster_set(*args, np.random.SeedSequence(9))
    for x, y in zip(a, b):
        assert np.array_equal(x.edges, y.edges)
        assert np.array_equal(x.blocks, y.blocks)


def test_generate_zero_clusters_rejected():
    with pytest.raises(ConfigError):
        generate_cluster_set(
            0, (5, 5), DegreeSpec(), MixingSpec(), None, np.random.SeedSequence(1)
        )
