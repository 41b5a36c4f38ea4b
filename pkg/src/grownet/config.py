"""Run configuration: a strict JSON schema with flag overrides and an
emitted effective-config snapshot for reproducibility audits.

The config file is a JSON object with the top-level keys

    encoding      one of ndp | ndp_no_intrinsic | direct | one_shot
    env           one of cartpole | pendulum | point_reacher
    master_seed   integer
    run_dir       path (created on demand)
    workers       positive integer, candidate-evaluation processes
    policy_neurons  network size for the direct/one_shot encodings
    growth        object: growth_steps, inhibition_steps, inhibition_enabled,
                  intrinsic_enabled, max_cells
    es            object: population_size, learning_rate, sigma_init,
                  sigma_decay, generations, eval_episodes, target_return,
                  checkpoint_every

Unknown keys are rejected. Flags override file values. The ``intrinsic_enabled``
growth flag must agree with the encoding when both are given; when omitted it
is derived from the encoding.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import DEFAULT_POLICY_NEURONS, ENCODING_NAMES
from .envs import ENV_NAMES
from .es import EsConfig
from .ndp import GrowthConfig


class ConfigError(Exception):
    """Malformed or inconsistent run configuration (CLI exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    encoding: str = "ndp"
    env: str = "cartpole"
    master_seed: int = 0
    run_dir: str = "runs/run"
    workers: int = 1
    policy_neurons: int = DEFAULT_POLICY_NEURONS
    growth: GrowthConfig = field(default_factory=GrowthConfig)
    es: EsConfig = field(default_factory=EsConfig)


_TOP_KEYS = {"encoding", "env", "master_seed", "run_dir", "workers",
             "policy_neurons", "growth", "es"}


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _coerce(section: dict, cls, where: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(section, fields, where)
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} section: {exc}")


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read, merge and validate a run configuration. ``overrides`` maps
    top-level keys (from command-line flags) over the file values."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    _check_keys(merged, _TOP_KEYS, "config")

    encoding = merged.get("encoding", "ndp")
    if encoding not in ENCODING_NAMES:
        raise ConfigError(f"encoding must be one of {ENCODING_NAMES}, got {encoding!r}")
    env = merged.get("env", "cartpole")
    if env not in ENV_NAMES:
        raise ConfigError(f"env must be one of {ENV_NAMES}, got {env!r}")

    growth_section = dict(merged.get("growth", {}))
    if not isinstance(growth_section, dict):
        raise ConfigError("growth section must be an object")
    # Reconcile the intrinsic ablation with the encoding name.
    if encoding in ("ndp", "ndp_no_intrinsic"):
        want = encoding == "ndp"
        stated = growth_section.get("intrinsic_enabled")
        if stated is not None and bool(stated) != want:
            raise ConfigError(
                f"growth.intrinsic_enabled={stated} contradicts encoding {encoding!r}"
            )
        growth_section["intrinsic_enabled"] = want
    growth = _coerce(growth_section, GrowthConfig, "growth")

    es_section = merged.get("es", {})
    if not isinstance(es_section, dict):
        raise ConfigError("es section must be an object")
    es = _coerce(dict(es_section), EsConfig, "es")

    try:
        master_seed = int(merged.get("master_seed", 0))
        workers = int(merged.get("workers", 1))
        policy_neurons = int(merged.get("policy_neurons", DEFAULT_POLICY_NEURONS))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scalar config value: {exc}")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if policy_neurons < 1:
        raise ConfigError("policy_neurons must be >= 1")
    run_dir = merged.get("run_dir", "runs/run")
    if not isinstance(run_dir, str) or not run_dir:
        raise ConfigError("run_dir must be a non-empty string")

    return RunConfig(encoding=encoding, env=env, master_seed=master_seed,
                     run_dir=run_dir, workers=workers,
                     policy_neurons=policy_neurons, growth=growth, es=es)


def config_to_dict(config: RunConfig) -> dict:
    return {
        "encoding": config.encoding,
        "env": config.env,
        "master_seed": config.master_seed,
        "run_dir": config.run_dir,
        "workers": config.workers,
        "policy_neurons": config.policy_neurons,
        "growth": dataclasses.asdict(config.growth),
        "es": dataclasses.asdict(config.es),
    }


def config_hash(config: RunConfig) -> bytes:
    """Digest of the search-relevant fields; run_dir and workers are
    excluded so runs can move directories and change parallelism without
    invalidating their checkpoints."""
    payload = config_to_dict(config)
    payload.pop("run_dir")
    payload.pop("workers")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).digest()


def write_snapshot(config: RunConfig, run_dir=None) -> Path:
    """Write the effective config next to the run's outputs."""
    target = Path(run_dir if run_dir is not None else config.run_dir)
    target.mkdir(parents=True, exist_ok=True)
    path = target / "config.json"
    path.write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")
    return path
