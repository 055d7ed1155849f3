"""Flat key-value run configuration: parsing, validation, presets.

One file configures one pipeline run.  The format is deliberately plain:
``key = value`` lines, ``#`` comments, optional quotes around strings.
Unknown keys are hard errors so typos never silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .errors import ConfigError

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class RunConfig:
    model: str
    n: int
    horizon_T: float
    mu: float
    sigma: float
    regularization_L: float
    segments: int = 10
    steps_per_segment: int = 10
    w_bar: float = 0.0
    feas_tol: float = 1e-6
    restarts: int = 5
    workers: int = 1
    calibration: str = "strict"
    delta: float = 1e-6
    kkt_tol: float = 1e-3
    max_passes: int = 200_000
    seed: int = 0
    robust: bool = False
    start_index: int = 1
    boundary_resolution: int = 128
    grid_resolution: int = 200
    out_dir: str = "feasmap_run"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_REQUIRED = ("model", "n", "horizon_T", "mu", "sigma", "regularization_L")

_PARSERS = {
    "model": str,
    "n": int,
    "horizon_T": float,
    "mu": float,
    "sigma": float,
    "regularization_L": float,
    "segments": int,
    "steps_per_segment": int,
    "w_bar": float,
    "feas_tol": float,
    "restarts": int,
    "workers": int,
    "calibration": str,
    "delta": float,
    "kkt_tol": float,
    "max_passes": int,
    "seed": int,
    "robust": bool,
    "start_index": int,
    "boundary_resolution": int,
    "grid_resolution": int,
    "out_dir": str,
}

_RANGE_CHECKS = {
    "n": (lambda v: v > 0, "n must be positive"),
    "horizon_T": (lambda v: v > 0.0, "horizon_T must be positive"),
    "mu": (lambda v: 0.0 < v < 1.0, "mu must lie in (0,1)"),
    "sigma": (lambda v: v > 0.0, "sigma must be positive"),
    "regularization_L": (lambda v: v > 0.0, "regularization_L must be positive"),
    "segments": (lambda v: v > 0, "segments must be positive"),
    "steps_per_segment": (lambda v: v > 0, "steps_per_segment must be positive"),
    "w_bar": (lambda v: v >= 0.0, "w_bar must be nonnegative"),
    "feas_tol": (lambda v: v > 0.0, "feas_tol must be positive"),
    "restarts": (lambda v: v > 0, "restarts must be positive"),
    "workers": (lambda v: v > 0, "workers must be positive"),
    "calibration": (
        lambda v: v in ("strict", "margin"),
        "calibration must be 'strict' or 'margin'",
    ),
    "delta": (lambda v: v > 0.0, "delta must be positive"),
    "kkt_tol": (lambda v: v > 0.0, "kkt_tol must be positive"),
    "max_passes": (lambda v: v > 0, "max_passes must be positive"),
    "start_index": (lambda v: v >= 0, "start_index must be nonnegative"),
    "boundary_resolution": (lambda v: v >= 2, "boundary_resolution must be >= 2"),
    "grid_resolution": (lambda v: v >= 2, "grid_resolution must be >= 2"),
}


def _parse_scalar(key: str, raw: str):
    kind = _PARSERS[key]
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in ("'", '"'):
        text = text[1:-1]
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(
            f"key '{key}' expects {kind.__name__}, got '{raw.strip()}'"
        ) from None


def parse_config_text(text: str) -> dict:
    """Raw key-value text to a typed dict; every problem is named."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{stripped}'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ConfigError(f"unknown key '{key}'")
        if key in values:
            raise ConfigError(f"duplicate key '{key}'")
        values[key] = _parse_scalar(key, raw)
    return values


def validate_config(text: str) -> RunConfig:
    """Parse and range-check a full run configuration."""
    values = parse_config_text(text)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError("missing required key(s): " + ", ".join(missing))
    for key, value in values.items():
        check = _RANGE_CHECKS.get(key)
        if check and not check[0](value):
            raise ConfigError(check[1])
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return validate_config(p.read_text())


PRESET_NAMES = ("fig1", "fig2", "fig3")


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(
            f"unknown preset '{name}' (available: {', '.join(PRESET_NAMES)})"
        )
    return resources.files("feasmap.presets").joinpath(f"{name}.cfg").read_text()


def load_preset(name: str) -> RunConfig:
    return validate_config(preset_text(name))
