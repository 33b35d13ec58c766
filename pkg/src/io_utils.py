"""I/O utilities: configuration, run descriptions, initial-state parsing and artifact writers."""

import copy
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from .errors import InvalidStateError, ValidationError
from .qubit_core import BlochVector, DensityMatrix, from_bloch

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "config/project.yaml"
SCHEMA_VERSION = "1.0"

DEFAULT_CONFIG: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "grid": {"t_max": 5.0, "steps": 100},
    "monte_carlo": {"samples": 100_000, "chunk_size": 20_000, "seed": 0},
    "tolerances": {"deterministic_compare": 1e-6},
    "kernel": "rederived",
    "classify": {"n_pairs": 1000},
    "triangle": {"resolution": 200},
    "area": {"samples": 1_000_000},
    "violate": {"n_random": 200, "points": 8, "s_max": 2.0, "t_max": 3.0},
    "output": {"format": "csv", "float_format": "%.12g"},
}

NAMED_STATES: dict[str, tuple[float, float, float]] = {
    "zero": (0.0, 0.0, 1.0),
    "one": (0.0, 0.0, -1.0),
    "plus": (1.0, 0.0, 0.0),
    "minus": (-1.0, 0.0, 0.0),
    "plus-i": (0.0, 1.0, 0.0),
    "minus-i": (0.0, -1.0, 0.0),
    "mixed": (0.0, 0.0, 0.0),
}

FORMATS = ("csv", "json")


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: str | Path = DEFAULT_CONFIG_PATH) -> dict[str, Any]:
    """
    Load project configuration from YAML, layered over the built-in defaults.

    A missing file yields the defaults unchanged.

    Raises:
        ValidationError: If the file is not a YAML mapping
    """
    path = Path(config_path)
    if not path.exists():
        logger.debug(f"Config {path} not found, using built-in defaults")
        return copy.deepcopy(DEFAULT_CONFIG)

    with open(path) as f:
        loaded = yaml.safe_load(f) or {}
    if not isinstance(loaded, dict):
        raise ValidationError(f"Config {path} must be a mapping, got {type(loaded).__name__}")
    logger.debug(f"Loaded config from {path}")
    return _merge(DEFAULT_CONFIG, loaded)


def parse_initial_state(text: str) -> DensityMatrix:
    """
    Qubit state from ``bloch:a,b,c`` or a named state (zero, one, plus, minus, plus-i, minus-i,
    mixed).

    Raises:
        InvalidStateError: If the text names no state or the Bloch vector is longer than 1
    """
    text = text.strip()
    if text in NAMED_STATES:
        return from_bloch(BlochVector(*NAMED_STATES[text]))
    if not text.startswith("bloch:"):
        raise InvalidStateError(
            f"Invalid initial state: {text!r}. Use bloch:a,b,c or one of {sorted(NAMED_STATES)}"
        )
    try:
        values = [float(v) for v in text.removeprefix("bloch:").split(",")]
    except ValueError as e:
        raise InvalidStateError(f"Bloch components must be numbers, got {text!r}") from e
    if len(values) != 3:
        raise InvalidStateError(f"Bloch vector needs 3 components, got {len(values)}")
    return from_bloch(BlochVector(*values))


@dataclass(frozen=True)
class RunConfig:
    """
    Fully resolved description of one CLI run.

    Fields a command does not use stay None and are left out of ``to_argv``.
    """

    command: str
    x: str | None = None
    method: str | None = None
    against: str | None = None
    t: float | None = None
    t_max: float | None = None
    s_max: float | None = None
    steps: int | None = None
    points: int | None = None
    resolution: int | None = None
    rho0: str | None = None
    seed: int | None = None
    samples: int | None = None
    kernel: str | None = None
    direction: str | None = None
    ru_mode: str | None = None
    extended: bool | None = None
    boundary_out: str | None = None
    format: str = "csv"
    out: str | None = None

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValidationError(f"Invalid output format: {self.format}. Must be one of {FORMATS}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"Unknown run config keys: {sorted(unknown)}")
        return cls(**data)

    def to_argv(self) -> list[str]:
        """Command line that reproduces this run."""
        argv = [self.command]
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "command" or value is None or value is False:
                continue
            flag = f"--{f.name.replace('_', '-')}"
            argv += [flag] if value is True else [flag, str(value)]
        return argv


def ensure_output_dir(path: str | Path) -> Path:
    """
    Ensure output directory exists, creating if necessary.

    Args:
        path: Directory path

    Returns:
        Path object for directory
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    logger.debug(f"Ensured directory exists: {path}")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def render_csv(df: pd.DataFrame, float_format: str = "%.12g") -> str:
    return df.to_csv(index=False, float_format=float_format, lineterminator="\n")


def render_json(config: RunConfig, results: Any, version: str = SCHEMA_VERSION) -> str:
    """Artifact with top-level ``config``, ``results`` and ``version`` keys."""
    payload = {"config": config.to_dict(), "results": results, "version": version}
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def render_artifact(
    config: RunConfig,
    table: pd.DataFrame | None = None,
    summary: dict[str, Any] | None = None,
    float_format: str = "%.12g",
) -> str:
    """
    Serialize results in the run's format.

    JSON results hold the summary keys plus the table under ``rows``. CSV holds the table, or the
    summary as a single row when there is no table.
    """
    if table is None and summary is None:
        raise ValidationError("Nothing to write: need a table or a summary")
    if config.format == "json":
        results = dict(summary or {})
        if table is not None:
            results["rows"] = table.to_dict(orient="records")
        return render_json(config, results)
    return render_csv(table if table is not None else pd.DataFrame([summary]), float_format)


def write_text(text: str, out: str | Path) -> Path:
    """
    Write an artifact, creating parent directories.

    Raises:
        ValidationError: If the output path is empty
    """
    if not str(out).strip():
        raise ValidationError("Output path must not be empty")
    path = Path(out)
    ensure_output_dir(path.parent)
    path.write_text(text)
    logger.info(f"Wrote {path}")
    return path
