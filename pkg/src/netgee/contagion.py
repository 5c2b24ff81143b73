"""Stochastic susceptible-infectious process on a cluster set.

One process runs over all clusters pooled: seeds are drawn across the
whole study population, spread continues under a common transmission
probability until pooled prevalence reaches the baseline fraction, a
confounded binary exposure is assigned per cluster, and spread continues
for a fixed number of steps under arm-specific probabilities. Affected
nodes never recover.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import expit, logit

from .errors import ConfigError, ConstantConfounderError, StallError
from .graph import Network, degrees

Affectivity = Literal["unit", "degree"]


@dataclass(frozen=True)
class ContagionConfig:
    """Process parameters.

    ``seed_frac`` of all nodes start affected; spread continues until the
    pooled prevalence reaches ``baseline_frac``, then ``steps`` further
    steps run with per-arm transmission probabilities ``p0``/``p1``.
    ``affectivity`` sets how many neighbors an affected node contacts per
    step: one (unit) or all of them (degree).
    """

    seed_frac: float = 0.01
    baseline_frac: float = 0.02
    steps: int = 5
    p0: float = 0.3
    p1: float = 0.1
    affectivity: Affectivity = "unit"

    def __post_init__(self):
        if not 0 < self.seed_frac < 1:
            raise ConfigError("seed fraction must lie in (0, 1)")
        if not self.seed_frac < self.baseline_frac < 1:
            raise ConfigError("baseline fraction must lie in (seed_frac, 1)")
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        for p in (self.p0, self.p1):
            if not 0 <= p <= 1:
                raise ConfigError("transmission probabilities must lie in [0, 1]")
        if self.affectivity not in ("unit", "degree"):
            raise ConfigError(f"unknown affectivity {self.affectivity!r}")


@dataclass
class ContagionState:
    """Mutable process state across clusters."""

    affected: list[np.ndarray]
    baseline: list[np.ndarray] | None = None
    exposure: np.ndarray | None = None
    time: int = 0
    baseline_time: int | None = None
    exposure_probs: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_total(self) -> int:
        return sum(a.size for a in self.affected)

    @property
    def n_affected(self) -> int:
        return sum(int(a.sum()) for a in self.affected)

    @property
    def prevalence(self) -> float:
        return self.n_affected / self.n_total

    def baseline_counts(self) -> np.ndarray:
        if self.baseline is None:
            raise ConfigError("baseline snapshot not taken yet")
        return np.array([int(b.sum()) for b in self.baseline])


def seed_initial(nets: Sequence[Network], seed_frac: float, rng: np.random.Generator) -> ContagionState:
    """Mark round(seed_frac * N) nodes affected, uniformly across all clusters."""
    if not 0 < seed_frac < 1:
        raise ConfigError("seed fraction must lie in (0, 1)")
    sizes = [net.n for net in nets]
    total = sum(sizes)
    k = round(seed_frac * total)
    if k == 0:
        raise ConfigError("seed fraction rounds to zero nodes; process cannot start")
    pooled = rng.choice(total, size=k, replace=False)
    affected = [np.zeros(n, dtype=bool) for n in sizes]
    offsets = np.cumsum([0] + sizes)
    cluster_of = np.searchsorted(offsets, pooled, side="right") - 1
    for g, ci in zip(pooled, cluster_of):
        affected[ci][g - offsets[ci]] = True
    return ContagionState(affected=affected)


def step(
    state: ContagionState,
    nets: Sequence[Network],
    p: np.ndarray,
    affectivity: Affectivity,
    rng: np.random.Generator,
) -> int:
    """Advance the process one step; returns the number of new cases.

    Nodes affected at the start of the step are visited in a single random
    order pooled over clusters. Each draws its contacts uniformly without
    replacement and infects susceptible contacts with the cluster's
    probability. Nodes infected during the step transmit only from the
    next step onward.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ConfigError("transmission probabilities must lie in [0, 1]")
    snapshot = [np.flatnonzero(a) for a in state.affected]
    order_cluster = np.concatenate(
        [np.full(s.size, ci, dtype=np.int64) for ci, s in enumerate(snapshot)]
    ) if snapshot else np.zeros(0, dtype=np.int64)
    order_node = np.concatenate(snapshot) if snapshot else np.zeros(0, dtype=np.int64)
    perm = rng.permutation(order_node.size)
    new_cases = 0
    for idx in perm:
        ci = int(order_cluster[idx])
        j = int(order_node[idx])
        nbrs = nets[ci].adjacency[j]
        k = nbrs.size
        if k == 0:
            continue
        aff = state.affected[ci]
        pc = p[ci]
        if affectivity == "unit":
            t = int(nbrs[rng.integers(k)])
            if not aff[t] and rng.random() < pc:
                aff[t] = True
                new_cases += 1
        else:
            u = rng.random(k)
            for pos in rng.permutation(k):
                t = int(nbrs[pos])
                if not aff[t] and u[pos] < pc:
                    aff[t] = True
                    new_cases += 1
    state.time += 1
    return new_cases


def run_to_baseline(
    state: ContagionState,
    nets: Sequence[Network],
    cfg: ContagionConfig,
    rng: np.random.Generator,
) -> ContagionState:
    """Spread with p0 everywhere until pooled prevalence reaches the baseline.

    Raises :class:`StallError` when a whole step produces no new case
    before the target prevalence; such replicates are redrawn upstream.
    """
    p = np.full(len(nets), cfg.p0)
    while state.prevalence < cfg.baseline_frac:
        if step(state, nets, p, cfg.affectivity, rng) == 0:
            raise StallError(
                f"no new cases at prevalence {state.prevalence:.4f} "
                f"(target {cfg.baseline_frac})"
            )
    state.baseline = [a.copy() for a in state.affected]
    state.baseline_time = state.time
    return state


def cluster_confounders(state: ContagionState, nets: Sequence[Network]) -> np.ndarray:
    """Per-cluster sum of baseline-affected neighbor counts over all nodes.

    Summing each node's affected-neighbor count equals summing the degree
    of every affected node, which is how it is computed here.
    """
    if state.baseline is None:
        raise ConfigError("baseline snapshot not taken yet")
    out = np.zeros(len(nets))
    for ci, net in enumerate(nets):
        deg = degrees(net)
        out[ci] = float(deg[state.baseline[ci]].sum())
    return out


def calibrate_psi(confounder: np.ndarray) -> tuple[float, float]:
    """Logistic coefficients mapping the confounder range onto [0.1, 0.9].

    The smallest observed value maps to exposure probability 0.1 and the
    largest to 0.9.
    """
    x = np.asarray(confounder, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        raise ConstantConfounderError("confounder is constant across clusters")
    psi_a = (logit(0.9) - logit(0.1)) / (hi - lo)
    psi_0 = logit(0.1) - psi_a * lo
    return float(psi_0), float(psi_a)


def assign_exposure(
    state: ContagionState,
    nets: Sequence[Network],
    psi: tuple[float, float],
    rng: np.random.Generator,
    mode: Literal["probabilistic", "balanced"] = "probabilistic",
    confounder: np.ndarray | None = None,
) -> ContagionState:
    """Assign per-cluster binary exposure from the logistic propensity.

    ``probabilistic`` draws independent Bernoulli exposures; ``balanced``
    ranks clusters by propensity and exposes the top half (deterministic
    ties broken by cluster order).
    """
    conf = cluster_confounders(state, nets) if confounder is None else np.asarray(confounder)
    psi_0, psi_a = psi
    probs = expit(psi_0 + psi_a * conf)
    m = len(nets)
    if mode == "probabilistic":
        exposure = (rng.random(m) < probs).astype(np.int64)
    elif mode == "balanced":
        order = np.lexsort((np.arange(m), -probs))
        exposure = np.zeros(m, dtype=np.int64)
        exposure[order[: m // 2]] = 1
    else:
        raise ConfigError(f"unknown exposure mode {mode!r}")
    state.exposure = exposure
    state.exposure_probs = probs
    return state


def run_post_exposure(
    state: ContagionState,
    nets: Sequence[Network],
    cfg: ContagionConfig,
    rng: np.random.Generator,
) -> tuple[ContagionState, list[np.ndarray]]:
    """Run the remaining steps under arm-specific probabilities; returns outcomes.

    The outcome per node is affected status at the end of the process.
    """
    if state.exposure is None:
        raise ConfigError("exposure must be assigned before the post-exposure phase")
    p = np.where(state.exposure == 1, cfg.p1, cfg.p0)
    for _ in range(cfg.steps):
        step(state, nets, p, cfg.affectivity, rng)
    outcomes = [a.copy() for a in state.affected]
    return state, outcomes
