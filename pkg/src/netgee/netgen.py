"""Clustered network generation.

Samples networks from a degree-corrected stochastic block model whose
block mixing blends three patterns (pure community, core-periphery around
block 1, and degree-proportional random mixing), then tunes degree
assortativity by degree-preserving edge rewiring within block pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import optimize

from .errors import ConfigError, DegenerateVarianceError
from .graph import Network, degrees

Direction = Literal["increase", "decrease"]


# ---------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class DegreeSpec:
    """Target degree distribution for one cluster.

    For ``powerlaw``, ``powerlaw_exponent`` is the starting exponent; when
    ``min_degree`` is None a minimum degree is chosen automatically and the
    exponent is then adjusted numerically so the distribution mean equals
    ``mean_degree`` (an integer minimum alone cannot hit an arbitrary mean).
    """

    distribution: Literal["poisson", "powerlaw"] = "poisson"
    mean_degree: float = 10.0
    powerlaw_exponent: float = 2.5
    min_degree: int | None = None

    def __post_init__(self):
        if self.mean_degree <= 0:
            raise ConfigError("mean_degree must be positive")
        if self.distribution not in ("poisson", "powerlaw"):
            raise ConfigError(f"unknown degree distribution {self.distribution!r}")
        if self.distribution == "powerlaw":
            if self.powerlaw_exponent <= 2:
                raise ConfigError("powerlaw exponent must exceed 2 for a finite mean")
            if self.min_degree is not None and self.min_degree < 1:
                raise ConfigError("min_degree must be a positive integer")


@dataclass(frozen=True)
class MixingSpec:
    """Blend weights for the block mixing matrix.

    ``lam`` weights the pure-community matrix, ``mu`` the block-1 core
    matrix, and the remainder the degree-proportional random matrix.
    """

    n_blocks: int = 8
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0 or self.lam + self.mu > 1 + 1e-12:
            raise ConfigError("require lam, mu >= 0 and lam + mu <= 1")
        if self.n_blocks < 1:
            raise ConfigError("need at least one block")


@dataclass(frozen=True)
class RewireSpec:
    """Stopping rule for assortativity rewiring.

    ``max_sweeps`` bounds the total number of swap attempts (default
    ``50 * n_edges``). ``patience`` optionally stops early after that many
    consecutive rejected attempts, once improving swaps have become rare.
    """

    target_assortativity: float = 0.3
    tolerance: float = 0.02
    max_sweeps: int | None = None
    patience: int | None = None
    patience_factor: float | None = None

    def __post_init__(self):
        if not -1 < self.target_assortativity < 1:
            raise ConfigError("target assortativity must lie strictly inside (-1, 1)")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be positive")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be positive")
        if self.patience_factor is not None and self.patience_factor <= 0:
            raise ConfigError("patience_factor must be positive")

    def patience_for(self, n_edges: int) -> int | None:
        if self.patience is not None:
            return self.patience
        if self.patience_factor is not None:
            return max(1, int(self.patience_factor * n_edges))
        return None


@dataclass
class RewireResult:
    network: Network
    assortativity: float
    initial_assortativity: float
    accepted: int
    attempts: int
    converged: bool
    trace: list[float] | None = None


# ---------------------------------------------------------------------------
# Degree sequences


@lru_cache(maxsize=256)
def _powerlaw_pmf(exponent: float, min_degree: int, max_degree: int):
    ks = np.arange(min_degree, max_degree + 1, dtype=np.float64)
    w = ks ** (-exponent)
    p = w / w.sum()
    return ks.astype(np.int64), p


def _truncated_zeta_mean(exponent: float, min_degree: int, max_degree: int) -> float:
    ks, p = _powerlaw_pmf(exponent, min_degree, max_degree)
    return float((ks * p).sum())


@lru_cache(maxsize=256)
def tune_powerlaw(
    mean_degree: float, exponent: float, max_degree: int, min_degree: int | None = None
) -> tuple[float, int]:
    """Pick (exponent, min_degree) so the truncated power law has the given mean.

    The minimum degree, when not forced, is the integer whose mean at the
    requested exponent is closest to the target; the exponent is then
    solved on (2.01, 6) to match the mean exactly.
    """
    if min_degree is None:
        cands = range(1, max(2, int(mean_degree) + 1))
        min_degree = min(
            cands,
            key=lambda k: abs(_truncated_zeta_mean(exponent, k, max_degree) - mean_degree),
        )

    def gap(g: float) -> float:
        return _truncated_zeta_mean(g, min_degree, max_degree) - mean_degree

    lo, hi = 2.01, 6.0
    if gap(lo) < 0 or gap(hi) > 0:
        raise ConfigError(
            f"cannot reach mean degree {mean_degree} with min_degree {min_degree} "
            f"and support up to {max_degree}"
        )
    tuned = optimize.brentq(gap, lo, hi, xtol=1e-10)
    return float(tuned), int(min_degree)


def sample_degree_sequence(spec: DegreeSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw expected degrees for ``n`` nodes; the sum is repaired to be even."""
    if n < 2:
        raise ConfigError("need at least two nodes")
    if spec.distribution == "poisson":
        ks = rng.poisson(spec.mean_degree, size=n).astype(np.int64)
    else:
        max_degree = n - 1
        exponent, kmin = tune_powerlaw(
            spec.mean_degree, spec.powerlaw_exponent, max_degree, spec.min_degree
        )
        support, pmf = _powerlaw_pmf(exponent, kmin, max_degree)
        ks = rng.choice(support, size=n, p=pmf)
    if ks.sum() % 2 == 1:
        ks[rng.integers(n)] += 1
    return ks


# ---------------------------------------------------------------------------
# Mixing matrices


def build_mixing_matrix(kappa: np.ndarray, spec: MixingSpec) -> np.ndarray:
    """Blend community/core/random mixing for the given block degree totals.

    The result is symmetric with row sums equal to ``kappa``, so every
    edge endpoint is accounted to some block pair.
    """
    kappa = np.asarray(kappa, dtype=np.float64)
    if kappa.ndim != 1 or kappa.size != spec.n_blocks:
        raise ConfigError("kappa length must equal the block count")
    if np.any(kappa < 0):
        raise ConfigError("block degree totals must be nonnegative")
    two_m = kappa.sum()
    if round(two_m) % 2 != 0:
        raise ConfigError("total degree must be even")
    community = np.diag(kappa)
    if two_m > 0:
        random_mix = np.outer(kappa, kappa) / two_m
    else:
        random_mix = np.zeros_like(community)
    core = np.zeros_like(community)
    if two_m > 0:
        core[0, :] = kappa[0] * kappa / two_m
        core[:, 0] = core[0, :]
        b = spec.n_blocks
        idx = np.arange(1, b)
        core[idx, idx] = kappa[1:] - kappa[0] * kappa[1:] / two_m
    omega = spec.lam * community + spec.mu * core + (1 - spec.lam - spec.mu) * random_mix
    return omega


# ---------------------------------------------------------------------------
# Degree-corrected stochastic block model


def sample_dcsbm(
    theta: np.ndarray,
    omega: np.ndarray,
    blocks: np.ndarray,
    rng: np.random.Generator,
    cluster_id: int = 0,
) -> Network:
    """Sample a simple network with Poisson edge counts theta_j*theta_j'*omega.

    ``theta`` must be normalized to sum to one within each block, making
    ``omega[r, s]`` the expected edge total between blocks r and s (with the
    usual convention that the diagonal counts each within-block edge twice).
    Multi-edges and self-edges implied by the Poisson draws are collapsed.
    """
    theta = np.asarray(theta, dtype=np.float64)
    blocks = np.asarray(blocks, dtype=np.int64)
    omega = np.asarray(omega, dtype=np.float64)
    n = theta.size
    if blocks.size != n:
        raise ConfigError("theta and blocks must have equal length")
    b = omega.shape[0]
    if omega.shape != (b, b):
        raise ConfigError("omega must be square")
    if blocks.size and (blocks.min() < 1 or blocks.max() > b):
        raise ConfigError("block labels must lie in 1..B")
    if np.any(theta < 0):
        raise ConfigError("theta must be nonnegative")

    members = [np.flatnonzero(blocks == r + 1) for r in range(b)]
    probs = []
    for r in range(b):
        t = theta[members[r]]
        s = t.sum()
        probs.append(t / s if s > 0 else None)

    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    for r in range(b):
        if probs[r] is None:
            continue
        for s in range(r, b):
            if probs[s] is None:
                continue
            rate = omega[r, s] if r != s else omega[r, r] / 2.0
            if rate <= 0:
                continue
            m_rs = rng.poisson(rate)
            if m_rs == 0:
                continue
            us.append(rng.choice(members[r], size=m_rs, p=probs[r]))
            vs.append(rng.choice(members[s], size=m_rs, p=probs[s]))

    if not us:
        return Network(cluster_id, n, np.empty((0, 2), dtype=np.int64), blocks)
    u = np.concatenate(us)
    v = np.concatenate(vs)
    keep = u != v
    u, v = u[keep], v[keep]
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return Network(cluster_id, n, edges, blocks)


# ---------------------------------------------------------------------------
# Assortativity and degree-preserving rewiring


def degree_correlation(deg: np.ndarray, edges: np.ndarray) -> float:
    """Pearson correlation of endpoint degrees over both edge orientations."""
    if edges.shape[0] == 0:
        raise DegenerateVarianceError("assortativity is undefined without edges")
    d = deg.astype(np.float64)
    du = d[edges[:, 0]]
    dv = d[edges[:, 1]]
    m = edges.shape[0]
    mean = (du.sum() + dv.sum()) / (2 * m)
    second = (np.square(du).sum() + np.square(dv).sum()) / (2 * m)
    var = second - mean * mean
    if var <= 1e-12 * max(second, 1.0):
        raise DegenerateVarianceError("degenerate excess-degree variance")
    cov = (du * dv).sum() / m - mean * mean
    return float(cov / var)


def _swap_improves(a: int, b: int, c: int, d: int, increase: bool) -> bool:
    # Endpoint degrees of edges (N1,N2) and (N3,N4); accepted swaps replace
    # them with (N1,N4) and (N2,N3).
    lhs = abs(a - b) + abs(c - d)
    rhs = abs(a - d) + abs(b - c)
    return lhs > rhs if increase else lhs < rhs


def rewire_assortative(
    net: Network,
    spec: RewireSpec,
    direction: Direction,
    rng: np.random.Generator,
    record_trace: bool = False,
) -> RewireResult:
    """Move degree assortativity toward the target by within-pair edge swaps.

    Two edges are drawn from one block pair and their endpoints exchanged
    when that strictly shrinks (increase mode) or grows (decrease mode)
    the within-edge degree gaps, which provably moves the correlation in
    the requested direction. The degree sequence and the per-block-pair
    edge counts are preserved exactly; swaps that would introduce a
    self-loop or duplicate edge are rejected.
    """
    if direction not in ("increase", "decrease"):
        raise ConfigError(f"unknown direction {direction!r}")
    increase = direction == "increase"
    deg = degrees(net)
    m = net.n_edges
    blocks = net.blocks if net.blocks is not None else np.ones(net.n, dtype=np.int64)

    try:
        r0 = degree_correlation(deg, net.edges)
    except DegenerateVarianceError:
        return RewireResult(net, math.nan, math.nan, 0, 0, False, [] if record_trace else None)

    target, tol = spec.target_assortativity, spec.tolerance
    max_attempts = spec.max_sweeps if spec.max_sweeps is not None else 50 * max(m, 1)
    patience = spec.patience_for(m)
    trace: list[float] | None = [] if record_trace else None
    if abs(r0 - target) <= tol:
        return RewireResult(net, r0, r0, 0, 0, True, trace)

    # Group edges by unordered block pair; counts per pair never change, so
    # eligibility (>= 2 edges) is static.
    pair_key = {}
    pair_u: list[list[int]] = []
    pair_v: list[list[int]] = []
    for u, v in net.edges:
        bu, bv = int(blocks[u]), int(blocks[v])
        if bu > bv:
            u, v, bu, bv = v, u, bv, bu
        key = (bu, bv)
        idx = pair_key.get(key)
        if idx is None:
            idx = len(pair_u)
            pair_key[key] = idx
            pair_u.append([])
            pair_v.append([])
        pair_u[idx].append(int(u))
        pair_v[idx].append(int(v))
    eligible = [i for i in range(len(pair_u)) if len(pair_u[i]) >= 2]
    if not eligible:
        return RewireResult(net, r0, r0, 0, 0, False, trace)
    within = {idx: key[0] == key[1] for key, idx in pair_key.items()}

    edge_set = set()
    for u, v in net.edges:
        edge_set.add((int(u), int(v)) if u < v else (int(v), int(u)))

    deg_l = deg.tolist()
    # Degree-at-edge moments are swap-invariant; only the endpoint product sum moves.
    mean_e = float(sum(deg_l[u] + deg_l[v] for u, v in edge_set)) / (2 * m)
    second_e = float(sum(deg_l[u] ** 2 + deg_l[v] ** 2 for u, v in edge_set)) / (2 * m)
    var_e = second_e - mean_e * mean_e
    s_prod = float(sum(deg_l[u] * deg_l[v] for u, v in edge_set))

    def corr_from_s(s: float) -> float:
        return (s / m - mean_e * mean_e) / var_e

    r = corr_from_s(s_prod)
    accepted = 0
    attempts = 0
    converged = False
    batch = 4096
    n_eligible = len(eligible)
    pair_len = [len(pair_u[i]) for i in eligible]  # static: swaps stay in-pair
    any_within = any(within[i] for i in eligible)
    # Progress checkpoints: with patience set, stop once a full window of
    # attempts moved r by less than a small slice of the tolerance.
    min_progress = tol * 0.25
    next_check = patience if patience is not None else None
    r_at_check = r

    while attempts < max_attempts:
        todo = min(batch, max_attempts - attempts)
        pick_idx = rng.integers(0, n_eligible, size=todo).tolist()
        pick_f = rng.random(size=(todo, 2)).tolist()
        pick_orient = (
            rng.integers(0, 2, size=(todo, 2)).tolist() if any_within else None
        )
        done = False
        for t in range(todo):
            attempts += 1
            if next_check is not None and attempts >= next_check:
                if abs(r - r_at_check) < min_progress:
                    done = True
                    break
                r_at_check = r
                next_check = attempts + patience
            sel = pick_idx[t]
            pi = eligible[sel]
            ulist = pair_u[pi]
            vlist = pair_v[pi]
            k = pair_len[sel]
            f1, f2 = pick_f[t]
            e1 = int(f1 * k)
            e2 = int(f2 * (k - 1))
            if e2 >= e1:
                e2 += 1
            n1, n2 = ulist[e1], vlist[e1]
            n3, n4 = ulist[e2], vlist[e2]
            if within[pi]:
                # Within a block either endpoint may sit on either side.
                o1, o2 = pick_orient[t]
                if o1:
                    n1, n2 = n2, n1
                if o2:
                    n3, n4 = n4, n3
            a, b_, c, d = deg_l[n1], deg_l[n2], deg_l[n3], deg_l[n4]
            # Inline acceptance rule (hot loop): compare within-edge degree
            # gaps before and after the proposed endpoint exchange.
            lhs = (a - b_ if a > b_ else b_ - a) + (c - d if c > d else d - c)
            rhs = (a - d if a > d else d - a) + (b_ - c if b_ > c else c - b_)
            if (lhs <= rhs) if increase else (lhs >= rhs):
                continue
            if n1 == n4 or n2 == n3 or n1 == n3 or n2 == n4:
                continue
            new1 = (n1, n4) if n1 < n4 else (n4, n1)
            new2 = (n2, n3) if n2 < n3 else (n3, n2)
            if new1 in edge_set or new2 in edge_set:
                continue
            old1 = (n1, n2) if n1 < n2 else (n2, n1)
            old2 = (n3, n4) if n3 < n4 else (n4, n3)
            edge_set.discard(old1)
            edge_set.discard(old2)
            edge_set.add(new1)
            edge_set.add(new2)
            # Keep block sides: n1, n3 came from the u side, n2, n4 from v.
            ulist[e1], vlist[e1] = n1, n4
            ulist[e2], vlist[e2] = n3, n2
            s_prod += a * d + b_ * c - a * b_ - c * d
            accepted += 1
            if accepted % 10_000 == 0:
                # Full recomputation bounds float drift from incremental updates.
                s_prod = float(sum(deg_l[x] * deg_l[y] for x, y in edge_set))
            r = corr_from_s(s_prod)
            if trace is not None:
                trace.append(r)
            if abs(r - target) <= tol:
                converged = True
                done = True
                break
        if done:
            break

    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    rewired = Network(net.cluster_id, net.n, edges, net.blocks)
    return RewireResult(rewired, r, r0, accepted, attempts, converged, trace)


# ---------------------------------------------------------------------------
# Cluster set generation


def _cluster_sizes(m: int, size_range: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    lo, hi = size_range
    if lo > hi:
        raise ConfigError("size range minimum exceeds maximum")
    half = m // 2
    draws = rng.integers(lo, hi + 1, size=half)
    sizes = np.empty(m, dtype=np.int64)
    sizes[0 : 2 * half : 2] = draws
    sizes[1 : 2 * half : 2] = lo + hi - draws  # mirrored partner keeps the mean at the midpoint
    if m % 2 == 1:
        sizes[-1] = (lo + hi) // 2
    return sizes


def _spawn(rng_seed: np.random.SeedSequence, key: int) -> np.random.Generator:
    child = np.random.SeedSequence(
        entropy=rng_seed.entropy, spawn_key=tuple(rng_seed.spawn_key) + (key,)
    )
    return np.random.default_rng(child)


def generate_cluster_set(
    m: int,
    size_range: tuple[int, int],
    degree: DegreeSpec,
    mixing: MixingSpec,
    rewire: RewireSpec | None,
    rng: np.random.SeedSequence | int,
) -> list[Network]:
    """Generate ``m`` clusters; each cluster owns an independent RNG stream.

    Sizes are drawn uniformly on the range with mirrored pairing so the
    realized mean sits at the midpoint. Blocks split each cluster into
    near-equal groups. The rewiring direction is chosen toward the target
    from each cluster's initial assortativity.
    """
    if m < 1:
        raise ConfigError("need at least one cluster")
    seed = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    sizes = _cluster_sizes(m, size_range, _spawn(seed, 0))
    nets: list[Network] = []
    for cid in range(m):
        crng = _spawn(seed, cid + 1)
        n = int(sizes[cid])
        b = mixing.n_blocks
        base = np.repeat(np.arange(1, b + 1), np.diff(np.linspace(0, n, b + 1).astype(int)))
        blocks = base[crng.permutation(n)]
        ks = sample_degree_sequence(degree, n, crng)
        kappa = np.bincount(blocks, weights=ks, minlength=b + 1)[1:]
        theta = np.zeros(n)
        nz = kappa[blocks - 1] > 0
        theta[nz] = ks[nz] / kappa[blocks - 1][nz]
        omega = build_mixing_matrix(kappa, mixing)
        net = sample_dcsbm(theta, omega, blocks, crng, cluster_id=cid)
        if rewire is not None and net.n_edges >= 2:
            try:
                r_init = degree_correlation(degrees(net), net.edges)
            except DegenerateVarianceError:
                nets.append(net)
                continue
            direction: Direction = (
                "increase" if r_init < rewire.target_assortativity else "decrease"
            )
            net = rewire_assortative(net, rewire, direction, crng).network
        nets.append(net)
    return nets
