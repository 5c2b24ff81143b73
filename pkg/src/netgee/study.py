"""Monte Carlo study harness.

Enumerates the 64-scenario grid (six binary design flags), runs the
generate/spread/expose/estimate pipeline per replicate with every
strategy sharing the same realized data, aggregates the performance
metrics, and regresses RMSE improvement on the scenario flags. Replicate
RNG streams are keyed by (master seed, scenario, replicate, attempt) so
the grid parallelizes deterministically.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Iterable, Sequence

import numpy as np

from .config import StudyConfig
from .contagion import (
    ContagionConfig,
    assign_exposure,
    calibrate_psi,
    cluster_confounders,
    run_post_exposure,
    run_to_baseline,
    seed_initial,
)
from .errors import (
    ConfigError,
    ConstantConfounderError,
    DegenerateVarianceError,
    EstimationError,
    PositivityError,
    SeparationError,
    StallError,
)
from .features import ALL_COLUMNS, compute_features
from .gee import Strategy, estimate_effect
from .glm import fit_linear
from .netgen import DegreeSpec, MixingSpec, RewireSpec, generate_cluster_set

FLAG_NAMES = (
    "high_degree",
    "powerlaw",
    "assortative",
    "heterogeneous_blocks",
    "degree_affectivity",
    "high_baseline",
)

NETWORK_COVARIATES = tuple(f"X{k}" for k in range(1, 11))
ALL_CANDIDATES = tuple(f"X{k}" for k in range(1, 13))

# Simulation strategies vary the outcome-model covariate set; the propensity
# regression always includes the cluster-level covariate that actually drives
# exposure (summed affected-neighbor counts), which keeps it correctly
# specified. Free-form propensity sets remain available through Strategy.
_TRUE_PS = ("sum(X9)",)

# The oracle pairs the exposure mechanism's exact probabilities (known only
# in simulation) with an outcome model rich enough to track the process:
# per-node baseline exposure summaries plus the cluster-level confounder,
# baseline prevalence, and the true propensity as regressors.
_ORACLE_OM = ("X1", "X9", "X10", "X11", "X12", "sum(X9)", "baseline_prev", "true_ps")

STRATEGIES: dict[str, Strategy] = {
    "crude": Strategy("crude", name="crude"),
    "none": Strategy("gee", name="none"),
    "x9": Strategy("dr", ("X9",), ps_covariates=_TRUE_PS, name="x9"),
    "all": Strategy("dr", NETWORK_COVARIATES, ps_covariates=_TRUE_PS, name="all"),
    "stepwise": Strategy(
        "dr", ALL_CANDIDATES, ps_covariates=_TRUE_PS, stepwise=True,
        ps_stepwise=False, name="stepwise",
    ),
    "oracle": Strategy("dr", _ORACLE_OM, ps_from_column="true_ps", name="oracle"),
    # Deliberately half-broken specifications for double-robustness checks.
    "dr_oracle_ps": Strategy("dr", ("noise",), ps_from_column="true_ps", name="dr_oracle_ps"),
    "dr_oracle_om": Strategy(
        "dr", _ORACLE_OM, ps_covariates=("mean(noise)",), name="dr_oracle_om"
    ),
    "dr_ps_x9om": Strategy("dr", ("X9",), ps_from_column="true_ps", name="dr_ps_x9om"),
}

ESTIMATE_COLUMNS = (
    "scenario",
    "replicate",
    "strategy",
    "beta0",
    "beta_a",
    "se_beta_a",
    "converged",
    "attempts",
    "om_selected_exposed",
    "om_selected_unexposed",
    "ps_selected",
    "error",
)

METRIC_COLUMNS = (
    "scenario",
    "strategy",
    "bias",
    "est_se",
    "emp_se",
    "rmse",
    "improvement",
    "power",
    "coverage",
)


@dataclass(frozen=True)
class Scenario:
    """One cell of the 2^6 design grid."""

    high_degree: bool
    powerlaw: bool
    assortative: bool
    heterogeneous_blocks: bool
    degree_affectivity: bool
    high_baseline: bool

    @classmethod
    def from_bits(cls, bits: str) -> "Scenario":
        if len(bits) != 6 or any(c not in "01" for c in bits):
            raise ConfigError(f"scenario id must be a 6-bit string, got {bits!r}")
        return cls(*(c == "1" for c in bits))

    @property
    def bits(self) -> str:
        return "".join(
            "1" if getattr(self, name) else "0" for name in FLAG_NAMES
        )

    @property
    def scenario_int(self) -> int:
        return int(self.bits, 2)

    def degree_spec(self, config: StudyConfig) -> DegreeSpec:
        return DegreeSpec(
            distribution="powerlaw" if self.powerlaw else "poisson",
            mean_degree=10.0 if self.high_degree else 2.0,
            powerlaw_exponent=config.powerlaw_exponent,
            min_degree=config.min_degree,
        )

    def mixing_spec(self, config: StudyConfig) -> MixingSpec:
        lam = mu = 0.3 if self.heterogeneous_blocks else 0.0
        return MixingSpec(n_blocks=config.block_count, lam=lam, mu=mu)

    def rewire_spec(self, config: StudyConfig) -> RewireSpec:
        return RewireSpec(
            target_assortativity=0.3 if self.assortative else -0.3,
            tolerance=config.rewire_tolerance,
            max_sweeps=None,
            patience_factor=config.rewire_patience_factor,
        )

    def contagion_config(self, config: StudyConfig) -> ContagionConfig:
        if self.high_baseline:
            seed_frac, baseline_frac = 0.10, 0.25
        else:
            seed_frac, baseline_frac = 0.01, 0.02
        return ContagionConfig(
            seed_frac=config.seed_frac if config.seed_frac is not None else seed_frac,
            baseline_frac=(
                config.baseline_frac if config.baseline_frac is not None else baseline_frac
            ),
            steps=config.steps,
            p0=config.p0,
            p1=config.p1,
            affectivity="degree" if self.degree_affectivity else "unit",
        )


def all_scenarios() -> tuple[Scenario, ...]:
    return tuple(Scenario.from_bits(format(k, "06b")) for k in range(64))


# ---------------------------------------------------------------------------
# Replicate pipeline


def _resolve_strategies(names: Sequence[str]) -> list[Strategy]:
    out = []
    for name in names:
        if name not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {name!r}; known: {sorted(STRATEGIES)}"
            )
        out.append(STRATEGIES[name])
    return out


# Cluster-level truth columns injectable into replicate feature matrices:
# the realized exposure probability and the baseline prevalence. They are
# known only inside the simulation and power the oracle specifications.
TRUTH_COLUMNS = ("true_ps", "baseline_prev")


def _needed_columns(strategies: Iterable[Strategy]) -> tuple[tuple[str, ...], set[str]]:
    base: set[str] = set()
    extras: set[str] = set()
    for strat in strategies:
        tokens = strat.om_covariates + (strat.ps_covariates or ())
        for token in tokens:
            name = token.split("(")[-1].rstrip(")")
            if name == "noise" or name in TRUTH_COLUMNS:
                extras.add(name)
            else:
                base.add(name)
    cols = tuple(c for c in ALL_COLUMNS if c in base)
    return cols, extras


def _seedseq(master_seed: int, scenario: Scenario, replicate: int, attempt: int, lane: int):
    return np.random.SeedSequence(
        entropy=master_seed,
        spawn_key=(scenario.scenario_int, replicate, attempt, lane),
    )


def _failed_rows(scenario, replicate, strategies, attempts, tag):
    return [
        {
            "scenario": scenario.bits,
            "replicate": replicate,
            "strategy": strat.label(),
            "beta0": math.nan,
            "beta_a": math.nan,
            "se_beta_a": math.nan,
            "converged": 0,
            "attempts": attempts,
            "om_selected_exposed": "",
            "om_selected_unexposed": "",
            "ps_selected": "",
            "error": tag,
        }
        for strat in strategies
    ]


def run_replicate(
    scenario: Scenario,
    replicate_id: int,
    strategies: Sequence[str] | Sequence[Strategy],
    master_seed: int,
    config: StudyConfig | None = None,
) -> list[dict]:
    """Run one full pipeline pass; every strategy sees the same realized data.

    Stalled contagion, a constant confounder, or a single-arm exposure draw
    redraw the replicate under an incremented attempt sub-seed (bounded);
    per-strategy estimation failures are recorded, not retried, so failed
    strategies never bias the shared realization.
    """
    config = config or StudyConfig()
    if not strategies:
        raise ConfigError("need at least one strategy")
    strats = (
        _resolve_strategies(strategies)
        if isinstance(strategies[0], str)
        else list(strategies)
    )
    degree = scenario.degree_spec(config)
    mixing = scenario.mixing_spec(config)
    rewire = scenario.rewire_spec(config)
    ccfg = scenario.contagion_config(config)
    columns, extras = _needed_columns(strats)

    for attempt in range(config.max_redraws):
        net_seed = _seedseq(master_seed, scenario, replicate_id, attempt, 0)
        rng_sim = np.random.default_rng(
            _seedseq(master_seed, scenario, replicate_id, attempt, 1)
        )
        rng_noise = np.random.default_rng(
            _seedseq(master_seed, scenario, replicate_id, attempt, 2)
        )
        nets = generate_cluster_set(
            config.m_clusters,
            (config.size_min, config.size_max),
            degree,
            mixing,
            rewire,
            net_seed,
        )
        try:
            state = seed_initial(nets, ccfg.seed_frac, rng_sim)
            run_to_baseline(state, nets, ccfg, rng_sim)
            conf = cluster_confounders(state, nets)
            psi = calibrate_psi(conf)
            assign_exposure(state, nets, psi, rng_sim, mode=config.exposure_mode)
            if state.exposure.min() == state.exposure.max():
                raise StallError("single-arm exposure draw")
            _, outcomes = run_post_exposure(state, nets, ccfg, rng_sim)
        except (StallError, ConstantConfounderError):
            continue

        features = None
        if any(s.kind == "dr" for s in strats):
            features = [
                compute_features(net, state.baseline[ci], columns=columns)
                for ci, net in enumerate(nets)
            ]
            if "noise" in extras:
                features = [
                    f.with_column("noise", rng_noise.standard_normal(f.n))
                    for f in features
                ]
            if "true_ps" in extras:
                features = [
                    f.with_column("true_ps", np.full(f.n, state.exposure_probs[ci]), "cluster")
                    for ci, f in enumerate(features)
                ]
            if "baseline_prev" in extras:
                features = [
                    f.with_column(
                        "baseline_prev", np.full(f.n, state.baseline[ci].mean()), "cluster"
                    )
                    for ci, f in enumerate(features)
                ]
        rows = []
        for strat in strats:
            row = {
                "scenario": scenario.bits,
                "replicate": replicate_id,
                "strategy": strat.label(),
                "beta0": math.nan,
                "beta_a": math.nan,
                "se_beta_a": math.nan,
                "converged": 0,
                "attempts": attempt + 1,
                "om_selected_exposed": "",
                "om_selected_unexposed": "",
                "ps_selected": "",
                "error": "",
            }
            try:
                est = estimate_effect(
                    nets, outcomes, state.exposure, features, strat
                )
            except (
                SeparationError,
                PositivityError,
                EstimationError,
                DegenerateVarianceError,
            ) as exc:
                row["error"] = f"{type(exc).__name__}"
            else:
                row["beta0"] = float(est.fit.beta[0])
                row["beta_a"] = float(est.fit.beta[1])
                row["se_beta_a"] = float(est.fit.se[1])
                row["converged"] = int(est.fit.converged)
                if est.om_exposed is not None:
                    row["om_selected_exposed"] = "|".join(est.om_exposed.selected)
                    row["om_selected_unexposed"] = "|".join(est.om_unexposed.selected)
                if est.ps is not None:
                    row["ps_selected"] = "|".join(est.ps.selected)
            rows.append(row)
        return rows
    return _failed_rows(scenario, replicate_id, strats, config.max_redraws, "exhausted_redraws")


# ---------------------------------------------------------------------------
# Metrics


def compute_metrics(
    rows: Sequence[dict], beta_star: dict[str, float] | None = None
) -> tuple[list[dict], dict[str, float]]:
    """Aggregate per-replicate estimates into the per-scenario metric table.

    The reference effect per scenario defaults to the mean of the oracle
    strategy's estimates over the same replicates. All error-style metrics
    are reported in percentage points; improvement is the percent RMSE
    reduction against the unadjusted GEE strategy.
    """
    by_scenario: dict[str, dict[str, list[dict]]] = {}
    requested: dict[str, set[str]] = {}
    for row in rows:
        requested.setdefault(row["scenario"], set()).add(row["strategy"])
        if row.get("error"):
            continue
        if not np.isfinite(row["beta_a"]):
            continue
        by_scenario.setdefault(row["scenario"], {}).setdefault(row["strategy"], []).append(row)

    if beta_star is None:
        beta_star = {}
        for scen, per_strat in by_scenario.items():
            oracle = per_strat.get("oracle")
            if oracle:
                beta_star[scen] = float(np.mean([r["beta_a"] for r in oracle]))
            elif "oracle" in requested.get(scen, ()):
                # requested but every replicate failed: metrics that need the
                # reference effect degrade to NaN instead of aborting the run
                beta_star[scen] = math.nan
            else:
                raise ConfigError(
                    f"scenario {scen}: no oracle estimates to define the true effect"
                )

    metric_rows: list[dict] = []
    for scen in sorted(by_scenario):
        per_strat = by_scenario[scen]
        star = beta_star[scen]
        rmse_none = None
        prelim: list[dict] = []
        for strat in sorted(per_strat):
            sub = per_strat[strat]
            est = np.array([r["beta_a"] for r in sub])
            ses = np.array([r["se_beta_a"] for r in sub])
            bias = float(np.mean(star - est)) * 100
            est_se = float(np.mean(ses)) * 100
            emp_se = float(np.std(est, ddof=1)) * 100 if est.size > 1 else 0.0
            rmse = math.sqrt(bias * bias + emp_se * emp_se)
            lo, hi = est - 1.96 * ses, est + 1.96 * ses
            coverage = float(np.mean((lo <= star) & (star <= hi))) * 100
            power = float(np.mean((lo > 0) | (hi < 0))) * 100
            prelim.append(
                {
                    "scenario": scen,
                    "strategy": strat,
                    "bias": bias,
                    "est_se": est_se,
                    "emp_se": emp_se,
                    "rmse": rmse,
                    "improvement": math.nan,
                    "power": power,
                    "coverage": coverage,
                }
            )
            if strat == "none":
                rmse_none = rmse
        for row in prelim:
            if row["strategy"] == "none":
                row["improvement"] = 0.0
            elif rmse_none is not None and rmse_none > 0:
                row["improvement"] = 100.0 * (1.0 - row["rmse"] / rmse_none)
            metric_rows.append(row)
    return metric_rows, beta_star


def true_effect(
    scenario: Scenario,
    replicates: int,
    master_seed: int,
    config: StudyConfig | None = None,
) -> float:
    """Reference effect: mean of oracle-specified estimates over replicates."""
    if replicates < 100:
        raise ConfigError("true-effect estimation needs at least 100 replicates")
    vals = []
    for rep in range(replicates):
        rows = run_replicate(scenario, rep, ("oracle",), master_seed, config)
        for row in rows:
            if not row["error"] and np.isfinite(row["beta_a"]):
                vals.append(row["beta_a"])
    if not vals:
        raise EstimationError("no successful oracle replicates")
    return float(np.mean(vals))


def covariate_inclusion_frequency(
    rows: Sequence[dict],
    strategy: str = "stepwise",
    candidates: Sequence[str] = ALL_CANDIDATES,
) -> list[dict]:
    """Share of replicates whose selected outcome model includes each covariate.

    Returns per (scenario, arm, covariate) frequencies plus cross-scenario
    quartile summary rows (scenario column ``summary:<stat>``).
    """
    per_key: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        if row["strategy"] != strategy or row.get("error"):
            continue
        per_key.setdefault((row["scenario"], "exposed"), []).append(row)
        per_key.setdefault((row["scenario"], "unexposed"), []).append(row)
    out: list[dict] = []
    freq_by_cov: dict[tuple[str, str], list[float]] = {}
    for (scen, arm), sub in sorted(per_key.items()):
        field = "om_selected_exposed" if arm == "exposed" else "om_selected_unexposed"
        for cov in candidates:
            hits = sum(1 for r in sub if cov in r[field].split("|")) / len(sub)
            out.append(
                {"scenario": scen, "arm": arm, "covariate": cov, "frequency": hits}
            )
            freq_by_cov.setdefault((arm, cov), []).append(hits)
    for (arm, cov), vals in sorted(freq_by_cov.items()):
        arr = np.array(vals)
        for stat, val in (
            ("min", arr.min()),
            ("q25", np.quantile(arr, 0.25)),
            ("median", np.quantile(arr, 0.5)),
            ("q75", np.quantile(arr, 0.75)),
            ("max", arr.max()),
        ):
            out.append(
                {
                    "scenario": f"summary:{stat}",
                    "arm": arm,
                    "covariate": cov,
                    "frequency": float(val),
                }
            )
    return out


def sensitivity_regression(metric_rows: Sequence[dict]) -> list[dict]:
    """Regress RMSE improvement on the six scenario flags per strategy.

    Requires the full 64-scenario grid; rows are (term, one column per
    adjusted strategy).
    """
    scenarios = sorted({r["scenario"] for r in metric_rows})
    expected = [format(k, "06b") for k in range(64)]
    missing = sorted(set(expected) - set(scenarios))
    if missing:
        raise ConfigError(f"sensitivity regression needs all 64 scenarios; missing {missing}")
    strategies = sorted(
        {r["strategy"] for r in metric_rows if r["strategy"] not in ("none", "oracle", "crude")}
    )
    flags = np.array([[int(c) for c in s] for s in expected], dtype=np.float64)
    terms = ("intercept",) + FLAG_NAMES
    table = {t: {} for t in terms}
    for strat in strategies:
        vals = {r["scenario"]: r["improvement"] for r in metric_rows if r["strategy"] == strat}
        if set(vals) != set(expected) or any(not np.isfinite(v) for v in vals.values()):
            raise ConfigError(f"strategy {strat}: improvement missing for some scenarios")
        yv = np.array([vals[s] for s in expected])
        fit = fit_linear(flags, yv, names=FLAG_NAMES)
        for name, coef in zip(fit.names, fit.coefficients):
            table[name][strat] = float(coef)
    rows = []
    for term in terms:
        row = {"term": term}
        row.update({s: table[term].get(s, math.nan) for s in strategies})
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Parallel study runner


_WORKER_STATE: dict = {}


def _worker_init(config_dict: dict, strategies: tuple[str, ...], master_seed: int) -> None:
    cfg = dict(config_dict)
    cfg.pop("threads", None)
    cfg["scenarios"] = tuple(cfg.get("scenarios", ())) or "all"
    _WORKER_STATE["config"] = StudyConfig(**cfg)
    _WORKER_STATE["strategies"] = strategies
    _WORKER_STATE["master_seed"] = master_seed


def _worker_run(task: tuple[str, int]) -> list[dict]:
    bits, replicate = task
    return run_replicate(
        Scenario.from_bits(bits),
        replicate,
        _WORKER_STATE["strategies"],
        _WORKER_STATE["master_seed"],
        _WORKER_STATE["config"],
    )


@dataclass
class StudyResult:
    estimates: list[dict]
    metrics: list[dict]
    beta_star: dict[str, float]
    inclusion: list[dict]
    sensitivity: list[dict] | None


def run_study(config: StudyConfig, out_dir: str | None = None) -> StudyResult:
    """Run the configured scenario grid and write the output tables.

    Every replicate is computed in a spawned worker with BLAS threading
    pinned, so results are bit-identical for any worker count.
    """
    from . import dataio  # local import to keep module load light
    from .config import write_resolved_config

    strategies = tuple(config.strategies)
    if "none" not in strategies:
        strategies = ("none",) + strategies
    if "oracle" not in strategies:
        strategies = strategies + ("oracle",)
    _resolve_strategies(strategies)

    bits = config.scenario_bits()
    tasks = [(b, rep) for b in bits for rep in range(config.replicates)]
    threads = config.resolved_threads()

    # Workers are spawned fresh so BLAS loads under the pinned thread env,
    # keeping replicate arithmetic identical for any worker count. Spawned
    # workers re-import the caller's __main__: scripts calling run_study must
    # keep the call under the usual ``if __name__ == "__main__":`` guard.
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    ctx = get_context("spawn")
    chunk = max(1, len(tasks) // (threads * 8))
    results: list[list[dict]] = []
    with ProcessPoolExecutor(
        max_workers=threads,
        mp_context=ctx,
        initializer=_worker_init,
        initargs=(config.to_dict(), strategies, config.master_seed),
    ) as pool:
        for rows in pool.map(_worker_run, tasks, chunksize=chunk):
            results.append(rows)

    order = {name: k for k, name in enumerate(strategies)}
    estimates = [row for rows in results for row in rows]
    estimates.sort(key=lambda r: (r["scenario"], r["replicate"], order[r["strategy"]]))
    metrics, beta_star = compute_metrics(estimates)
    inclusion = (
        covariate_inclusion_frequency(estimates) if "stepwise" in strategies else []
    )
    sensitivity = None
    if len(bits) == 64 and len(set(bits)) == 64:
        sensitivity = sensitivity_regression(metrics)

    target = out_dir if out_dir is not None else config.out_dir
    if target is not None:
        write_resolved_config(config, target)
        dataio.write_estimates_csv(os.path.join(target, "estimates.csv"), estimates)
        dataio.write_metrics_csv(os.path.join(target, "metrics.csv"), metrics)
        if inclusion:
            dataio.write_inclusion_csv(os.path.join(target, "inclusion.csv"), inclusion)
        if sensitivity is not None:
            dataio.write_sensitivity_csv(
                os.path.join(target, "sensitivity.csv"), sensitivity
            )
    return StudyResult(estimates, metrics, beta_star, inclusion, sensitivity)
