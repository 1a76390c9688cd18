"""Experiment configuration: strict JSON in, canonical JSON out.

Unknown keys are rejected, every value is range-checked with the offending
key named, and `canonical_form` gives a byte-stable serialization whose
SHA-256 digest identifies the run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import MalformedJson, RangeViolation, UnknownKey

EXPERIMENT_KINDS = (
    "verify-db",
    "evolve",
    "hitting",
    "spectral",
    "rlvr-identities",
    "rlvr-flow",
    "entropy-trace",
)

# `all` is accepted as a config value so one file can drive `lab all`.
ACCEPTED_EXPERIMENTS = EXPERIMENT_KINDS + ("all",)

_DEFAULTS = {
    "seed": 0,
    "n_states": 32,
    "n_prompts": 16,
    "n_responses": 12,
    "beta": 1.0,
    "steps": 200,
    "threshold_b": None,
    "lambda_grid": (),
    "output_path": "out",
}

_KNOWN_KEYS = frozenset(_DEFAULTS) | {"experiment"}

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters with defaults applied."""

    experiment: str
    seed: int
    n_states: int
    n_prompts: int
    n_responses: int
    beta: float
    steps: int
    threshold_b: float | None
    lambda_grid: tuple[float, ...]
    output_path: str


def _require_int(raw: dict, key: str, lo: int, hi: int) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise RangeViolation(f"{key}: expected an integer")
    if not (lo <= value <= hi):
        raise RangeViolation(f"{key}: {value} outside [{lo}, {hi}]")
    return value


def _require_real(raw: dict, key: str) -> float:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RangeViolation(f"{key}: expected a real number")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise RangeViolation(f"{key}: must be finite")
    return value


def validate_config(raw: dict) -> ExperimentConfig:
    """Apply defaults and range checks to a parsed JSON object."""
    if not isinstance(raw, dict):
        raise MalformedJson("config must be a JSON object")
    for key in raw:
        if key not in _KNOWN_KEYS:
            raise UnknownKey(f"unknown config key: {key}")
    merged = dict(_DEFAULTS)
    merged.update(raw)

    if "experiment" not in merged:
        raise RangeViolation("experiment: missing")
    experiment = merged["experiment"]
    if experiment not in ACCEPTED_EXPERIMENTS:
        raise RangeViolation(
            f"experiment: {experiment!r} not one of {sorted(ACCEPTED_EXPERIMENTS)}"
        )

    seed = _require_int(merged, "seed", 0, _U64_MAX)
    n_states = _require_int(merged, "n_states", 2, 1024)
    n_prompts = _require_int(merged, "n_prompts", 1, 4096)
    n_responses = _require_int(merged, "n_responses", 2, 4096)
    steps = _require_int(merged, "steps", 1, 1_000_000)
    beta = _require_real(merged, "beta")
    if beta <= 0:
        raise RangeViolation(f"beta: {beta} must be > 0")

    threshold_b = merged["threshold_b"]
    if threshold_b is not None:
        merged["threshold_b"] = threshold_b
        threshold_b = _require_real(merged, "threshold_b")

    grid_raw = merged["lambda_grid"]
    if not isinstance(grid_raw, (list, tuple)):
        raise RangeViolation("lambda_grid: expected a list of reals")
    grid = []
    for i, value in enumerate(grid_raw):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RangeViolation(f"lambda_grid: entry {i} is not a real")
        if float(value) < 0:
            raise RangeViolation(f"lambda_grid: entry {i} is negative")
        grid.append(float(value))

    output_path = merged["output_path"]
    if not isinstance(output_path, str) or not output_path:
        raise RangeViolation("output_path: expected a nonempty string")

    return ExperimentConfig(
        experiment=experiment,
        seed=seed,
        n_states=n_states,
        n_prompts=n_prompts,
        n_responses=n_responses,
        beta=beta,
        steps=steps,
        threshold_b=threshold_b,
        lambda_grid=tuple(grid),
        output_path=output_path,
    )


def parse_config(path: str, expected_experiment: str | None = None) -> ExperimentConfig:
    """Read, parse, and validate a JSON config file.

    When a subcommand name is supplied, the config's experiment must match
    it (the `all` subcommand accepts any experiment value).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MalformedJson(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(f"config is not valid JSON: {exc}") from exc
    cfg = validate_config(raw)
    if expected_experiment is not None and expected_experiment != "all":
        if cfg.experiment != expected_experiment:
            raise RangeViolation(
                f"experiment: config says {cfg.experiment!r}, "
                f"subcommand is {expected_experiment!r}"
            )
    return cfg


def canonical_form(cfg: ExperimentConfig) -> str:
    """Byte-stable JSON serialization (sorted keys, explicit defaults)."""
    payload = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "n_states": cfg.n_states,
        "n_prompts": cfg.n_prompts,
        "n_responses": cfg.n_responses,
        "beta": cfg.beta,
        "steps": cfg.steps,
        "threshold_b": cfg.threshold_b,
        "lambda_grid": list(cfg.lambda_grid),
        "output_path": cfg.output_path,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_form(cfg).encode("utf-8")).hexdigest()
