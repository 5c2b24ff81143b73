"""Command-line surface.

Subcommands cover each stage of the pipeline (generate, spread, featurize,
estimate) plus the full study grid, the empirical analysis, and fixture
emission. Exit codes: 0 success, 2 configuration error, 3 data error.
With ``--format json`` errors go to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, empirical, fixtures
from .config import StudyConfig, load_config, write_resolved_config
from .contagion import (
    assign_exposure,
    calibrate_psi,
    cluster_confounders,
    run_post_exposure,
    run_to_baseline,
    seed_initial,
)
from .errors import ConfigError, DataFormatError, NetgeeError
from .features import ALL_COLUMNS, compute_features
from .gee import estimate_effect
from .netgen import generate_cluster_set
from .study import STRATEGIES, Scenario, run_study

_DEF_SCENARIO = "000000"


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="netgee", description=__doc__)
    top.add_argument("--config", type=Path, help="TOML study config")
    top.add_argument("--seed", type=int, help="master seed override")
    top.add_argument("--threads", type=int, help="worker process count")
    top.add_argument("--out", type=Path, default=Path("."), help="output directory")
    top.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("netgen", help="generate a cluster set")
    p.add_argument("--scenario", default=_DEF_SCENARIO, help="6-bit scenario id")

    p = sub.add_parser("contagion", help="run one contagion process over loaded networks")
    p.add_argument("--data", type=Path, required=True, help="directory with edges.tsv/nodes.tsv")
    p.add_argument("--scenario", default=_DEF_SCENARIO, help="6-bit scenario id")

    p = sub.add_parser("features", help="compute node covariates for loaded networks")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--baseline", type=Path, help="outcomes.csv carrying baseline_affected")

    p = sub.add_parser("estimate", help="estimate exposure effects on one dataset")
    p.add_argument("--data", type=Path, required=True, help="directory with networks + outcomes.csv")
    p.add_argument(
        "--strategy",
        action="append",
        default=None,
        help=f"strategy name (repeatable); known: {sorted(STRATEGIES)}",
    )

    p = sub.add_parser("study", help="run the configured scenario grid")

    p = sub.add_parser("analyze", help="empirical analysis pipeline")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument(
        "--exposure",
        default="quartile:leader",
        help="'quartile:<column>' or 'column:<column>'",
    )
    p.add_argument(
        "--strategies",
        nargs="+",
        default=list(empirical.EMPIRICAL_STRATEGIES),
    )
    p.add_argument("--households", action="store_true", help="aggregate nodes to households")

    p = sub.add_parser("fixtures", help="emit toy datasets and config samples")
    return top


def _config_from_args(args) -> StudyConfig:
    config = load_config(args.config) if args.config else StudyConfig()
    if args.seed is not None:
        config.master_seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    return config


def _load_networks(directory: Path):
    return dataio.read_networks(directory / "edges.tsv", directory / "nodes.tsv")


def _cmd_netgen(args, config: StudyConfig) -> int:
    scenario = Scenario.from_bits(args.scenario)
    nets = generate_cluster_set(
        config.m_clusters,
        (config.size_min, config.size_max),
        scenario.degree_spec(config),
        scenario.mixing_spec(config),
        scenario.rewire_spec(config),
        np.random.SeedSequence(config.master_seed),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.write_networks(nets, args.out / "edges.tsv", args.out / "nodes.tsv")
    write_resolved_config(config, args.out)
    return 0


def _cmd_contagion(args, config: StudyConfig) -> int:
    scenario = Scenario.from_bits(args.scenario)
    nets = _load_networks(args.data)
    ccfg = scenario.contagion_config(config)
    rng = np.random.default_rng(np.random.SeedSequence(config.master_seed))
    state = seed_initial(nets, ccfg.seed_frac, rng)
    run_to_baseline(state, nets, ccfg, rng)
    psi = calibrate_psi(cluster_confounders(state, nets))
    assign_exposure(state, nets, psi, rng, mode=config.exposure_mode)
    _, outcomes = run_post_exposure(state, nets, ccfg, rng)
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.write_outcomes_csv(
        args.out / "outcomes.csv", nets, state.exposure, state.baseline, outcomes
    )
    write_resolved_config(config, args.out)
    return 0


def _cmd_features(args, config: StudyConfig) -> int:
    nets = _load_networks(args.data)
    if args.baseline:
        _, _, baseline, _ = dataio.read_outcomes_csv(args.baseline)
        if len(baseline) != len(nets):
            raise DataFormatError("baseline file covers a different cluster count")
    else:
        baseline = [np.zeros(net.n, dtype=bool) for net in nets]
    has_blocks = all(net.blocks is not None for net in nets)
    columns = tuple(c for c in ALL_COLUMNS if has_blocks or c != "X4")
    feats = [
        compute_features(net, baseline[ci], columns=columns)
        for ci, net in enumerate(nets)
    ]
    args.out.mkdir(parents=True, exist_ok=True)
    dataio.write_features_csv(args.out / "features.csv", feats)
    return 0


def _cmd_estimate(args, config: StudyConfig) -> int:
    names = args.strategy or ["none", "x9"]
    unknown = [s for s in names if s not in STRATEGIES]
    if unknown:
        raise ConfigError(f"unknown strategy names {unknown}; known: {sorted(STRATEGIES)}")
    nets = _load_networks(args.data)
    _, exposure, baseline, outcomes = dataio.read_outcomes_csv(args.data / "outcomes.csv")
    if len(outcomes) != len(nets):
        raise DataFormatError("outcomes cover a different cluster count than the networks")
    has_blocks = all(net.blocks is not None for net in nets)
    columns = tuple(c for c in ALL_COLUMNS if has_blocks or c != "X4")
    feats = [
        compute_features(net, baseline[ci], columns=columns)
        for ci, net in enumerate(nets)
    ]
    fits = {}
    for name in names:
        est = estimate_effect(nets, outcomes, exposure, feats, STRATEGIES[name])
        fits[name] = est.fit
    args.out.mkdir(parents=True, exist_ok=True)
    suffix = "json" if args.format == "json" else "csv"
    dataio.write_fit_report(args.out / f"fit_report.{suffix}", fits, fmt=args.format)
    return 0


def _cmd_study(args, config: StudyConfig) -> int:
    run_study(config, out_dir=str(args.out))
    return 0


def _cmd_analyze(args, config: StudyConfig) -> int:
    dataset = empirical.load_empirical(args.data)
    if args.households:
        dataset = empirical.aggregate_households(dataset)
    kind, _, column = args.exposure.partition(":")
    if kind == "quartile":
        exposure = empirical.define_exposure_quartile(dataset.cluster_fraction(column))
    elif kind == "column":
        if column not in dataset.covariates:
            raise ConfigError(f"no covariate column {column!r}")
        vals = [np.unique(v) for v in dataset.covariates[column]]
        if any(u.size != 1 or u[0] not in (0, 1) for u in vals):
            raise DataFormatError(f"column {column!r} is not a constant 0/1 per cluster")
        exposure = np.array([int(u[0]) for u in vals])
    else:
        raise ConfigError("exposure must be 'quartile:<col>' or 'column:<col>'")
    results = empirical.analyze_empirical(dataset, exposure, args.strategies)
    args.out.mkdir(parents=True, exist_ok=True)
    suffix = "json" if args.format == "json" else "csv"
    dataio.write_fit_report(
        args.out / f"report.{suffix}", {k: v.fit for k, v in results.items()}, fmt=args.format
    )
    dataio.write_model_table(args.out / "model_tables.csv", empirical.nuisance_model_tables(results))
    return 0


def _cmd_fixtures(args, config: StudyConfig) -> int:
    base = args.out
    fixtures.write_two_village(base / "toy_2village")
    fixtures.write_synthetic_study(base / "synthetic49")
    fixtures.write_config_samples(base / "configs")
    return 0


_COMMANDS = {
    "netgen": _cmd_netgen,
    "contagion": _cmd_contagion,
    "features": _cmd_features,
    "estimate": _cmd_estimate,
    "study": _cmd_study,
    "analyze": _cmd_analyze,
    "fixtures": _cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        _emit_error(args, "ConfigError", exc)
        return 2
    except DataFormatError as exc:
        _emit_error(args, "DataFormatError", exc)
        return 3
    except NetgeeError as exc:
        _emit_error(args, type(exc).__name__, exc)
        return 1


def _emit_error(args, kind: str, exc: Exception) -> None:
    if getattr(args, "format", "csv") == "json":
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    else:
        print(f"netgee: {kind}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
