"""Study configuration: defaults, TOML loading, and resolved-config echo."""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

THREADS_ENV = "NETGEE_THREADS"


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return 1


@dataclass
class StudyConfig:
    """Resolved knobs for a simulation study run.

    Scenario-level settings (degree law, assortativity sign, mixing,
    affectivity, baseline level) come from each scenario's flags; the
    fields here override the shared process constants and generator
    tolerances.
    """

    master_seed: int = 20260801
    scenarios: tuple[str, ...] | str = "all"
    replicates: int = 500
    strategies: tuple[str, ...] = ("none", "x9", "all", "stepwise")
    threads: int = 0  # 0 means: resolve from NETGEE_THREADS, else 1
    out_dir: str | None = None
    # cluster generation
    m_clusters: int = 48
    size_min: int = 120
    size_max: int = 280
    block_count: int = 8
    powerlaw_exponent: float = 2.5
    min_degree: int | None = None
    rewire_tolerance: float = 0.02
    rewire_max_factor: float = 50.0
    rewire_patience_factor: float | None = 5.0
    # contagion overrides (None -> scenario defaults)
    seed_frac: float | None = None
    baseline_frac: float | None = None
    steps: int = 5
    p0: float = 0.3
    p1: float = 0.1
    exposure_mode: str = "probabilistic"
    max_redraws: int = 20

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be positive")
        if self.m_clusters < 1:
            raise ConfigError("m_clusters must be positive")
        if self.size_min > self.size_max:
            raise ConfigError("size_min exceeds size_max")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative")
        if self.exposure_mode not in ("probabilistic", "balanced"):
            raise ConfigError(f"unknown exposure mode {self.exposure_mode!r}")
        if isinstance(self.scenarios, (list, tuple)):
            self.scenarios = tuple(str(s) for s in self.scenarios)
            for s in self.scenarios:
                if len(s) != 6 or any(c not in "01" for c in s):
                    raise ConfigError(f"scenario id must be a 6-bit string, got {s!r}")
        elif self.scenarios != "all":
            raise ConfigError("scenarios must be 'all' or a list of 6-bit strings")
        self.strategies = tuple(self.strategies)

    def resolved_threads(self) -> int:
        return self.threads if self.threads >= 1 else _default_threads()

    def scenario_bits(self) -> tuple[str, ...]:
        if self.scenarios == "all":
            return tuple(format(k, "06b") for k in range(64))
        return tuple(self.scenarios)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scenarios"] = list(self.scenario_bits())
        d["threads"] = self.resolved_threads()
        return d


_SECTION_FIELDS = {
    "study": {
        "master_seed", "scenarios", "replicates", "strategies", "threads", "out_dir",
        "exposure_mode", "max_redraws",
    },
    "netgen": {
        "m_clusters", "size_min", "size_max", "block_count", "powerlaw_exponent",
        "min_degree", "rewire_tolerance", "rewire_max_factor", "rewire_patience_factor",
    },
    "contagion": {"seed_frac", "baseline_frac", "steps", "p0", "p1"},
}


def load_config(path: str | Path) -> StudyConfig:
    """Read a TOML study config; unknown keys are rejected loudly."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    kwargs: dict = {}
    for section, keys in _SECTION_FIELDS.items():
        body = raw.pop(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kwargs[key] = value
    if raw:
        raise ConfigError(f"unknown config sections: {sorted(raw)}")
    try:
        return StudyConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def write_resolved_config(config: StudyConfig, out_dir: str | Path) -> Path:
    """Echo every resolved setting so outputs are reproducible from artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "resolved_config.json"
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
