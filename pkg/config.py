# config.py
"""Configuration settings and experiment-file loading for the dynamic RCM toolkit."""

import json
from pathlib import Path
from typing import Any, Dict, Tuple

from errors import ConfigError
from models import ExperimentConfig, RegimeSpec


class Config:
    """Application configuration."""

    VERSION = "0.3.0"

    # Paths
    OUTPUT_FOLDER = Path("output")
    LOG_FOLDER = Path("logs")
    CONFIG_FOLDER = Path("configs")

    # Model guards
    MAX_MOTIF_VERTICES = 8
    MAX_DIMENSION = 3
    MAX_PARTITION_ELEMENTS = 12
    MAX_ORACLE_ATOMS = 4
    MAX_ORACLE_ELEMENTS = 10

    # Profiles: pairs with phi below this are never edges
    EPS_CUT = 1e-6

    # Integration
    MC_SAMPLES = 400_000
    MC_BATCHES = 8
    QUAD_EPSABS = 1e-11
    QUAD_EPSREL = 1e-10
    MAX_QUADRATURE_VERTICES = 6
    AUTO_QUADRATURE_VERTICES = 4

    # Verification defaults; every threshold shows up in the report next to its value
    DEFAULT_TOLERANCES = {
        "z": 3.0,
        "covariance_rel": 0.10,
        "lag_rel": 0.15,
        "ks_alpha": 0.01,
        "correlation_min": 0.9,
        "null_variance_ratio": 0.05,
        "slope_center": -0.5,
        "slope_halfwidth": 0.3,
        "diagram_rel": 1e-9,
        "ratio_rel": 0.25,
        "degenerate_fraction": 0.01,
    }

    # Logging
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - [seed=%(seed)s rep=%(replication)s] - %(message)s'
    LOG_LEVEL = 'INFO'


REQUIRED_SECTIONS = ("model", "profile", "motifs", "ladder", "seed")


def load_experiment_config(path: Path) -> Tuple[ExperimentConfig, str]:
    """Load and validate a JSON experiment file; returns the config and its raw text."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    raw_text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(raw_text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno, column=e.colno)

    return parse_experiment_config(data), raw_text


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    for section in REQUIRED_SECTIONS:
        if section not in data:
            raise ConfigError("missing section", field=section)

    model = _section(data, "model")
    d = _int(model, "d", "model.d", low=1, high=Config.MAX_DIMENSION)
    mu = _positive(model, "mu", "model.mu")
    lam = _positive(model, "lambda", "model.lambda")
    horizon = _positive(model, "horizon", "model.horizon", default=1.0)

    profile = _section(data, "profile")
    if profile.get("kind") not in ("indicator", "exponential", "table"):
        raise ConfigError("kind must be one of indicator, exponential, table", field="profile.kind")

    motifs = data["motifs"]
    if not isinstance(motifs, list) or not motifs:
        raise ConfigError("expected a non-empty list", field="motifs")

    ladder = []
    if not isinstance(data["ladder"], list) or not data["ladder"]:
        raise ConfigError("expected a non-empty list", field="ladder")
    for idx, rung in enumerate(data["ladder"]):
        ladder.append(_rung(rung, f"ladder[{idx}]"))

    grid = data.get("grid", [0.0])
    if not isinstance(grid, list) or not grid:
        raise ConfigError("expected a non-empty list of times", field="grid")
    grid = [float(t) for t in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("times must be sorted", field="grid")
    if grid[0] < 0 or grid[-1] > horizon:
        raise ConfigError(f"times must lie in [0, {horizon}]", field="grid")

    replications = int(data.get("replications", 2))
    if replications < 2:
        raise ConfigError("need at least 2 replications", field="replications")

    seed = data["seed"]
    if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")

    tolerances = dict(Config.DEFAULT_TOLERANCES)
    for key, value in data.get("tolerances", {}).items():
        if key not in tolerances:
            raise ConfigError("unknown tolerance", field=f"tolerances.{key}")
        if not isinstance(value, (int, float)) or (value < 0 and not key.startswith("slope")):
            raise ConfigError("expected a non-negative number", field=f"tolerances.{key}")
        tolerances[key] = float(value)

    ratio = data.get("ratio")
    if ratio is not None:
        if not isinstance(ratio, dict):
            raise ConfigError("expected an object", field="ratio")
        for key in ("numerator", "denominator"):
            if not isinstance(ratio.get(key), str):
                raise ConfigError("expected a motif name", field=f"ratio.{key}")
        if ratio["numerator"] == ratio["denominator"]:
            raise ConfigError("numerator and denominator must differ", field="ratio")

    return ExperimentConfig(
        d=d, mu=mu, lam=lam, horizon=horizon, profile=profile, motifs=motifs,
        ladder=ladder, grid=grid, replications=replications, seed=seed,
        tolerances=tolerances, verify=data.get("verify", {}),
        threads=int(data.get("threads", 1)),
        ratio=None if ratio is None else {"numerator": ratio["numerator"], "denominator": ratio["denominator"]},
    )


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data[name]
    if not isinstance(value, dict):
        raise ConfigError("expected an object", field=name)
    return value


def _int(section, key, field, low=None, high=None):
    value = section.get(key)
    if not isinstance(value, int):
        raise ConfigError("expected an integer", field=field)
    if (low is not None and value < low) or (high is not None and value > high):
        raise ConfigError(f"must lie in [{low}, {high}]", field=field)
    return value


def _positive(section, key, field, default=None):
    value = section.get(key, default)
    if not isinstance(value, (int, float)) or value <= 0:
        raise ConfigError("expected a positive number", field=field)
    return float(value)


def _rung(rung: Dict[str, Any], field: str) -> RegimeSpec:
    if not isinstance(rung, dict) or "n" not in rung:
        raise ConfigError("expected an object with 'n'", field=field)
    n = _positive(rung, "n", f"{field}.n")
    gamma = rung.get("gamma")
    c = float(rung.get("c", 1.0))
    if "nu" in rung:
        nu = _positive(rung, "nu", f"{field}.nu")
    elif gamma is not None:
        nu = c * n ** float(gamma)
    else:
        raise ConfigError("need 'nu' or 'gamma'", field=field)

    regime = rung.get("regime")
    if regime is None:
        if gamma is None:
            raise ConfigError("regime must be explicit when nu is given directly", field=f"{field}.regime")
        regime = "dense" if gamma > -1 else "sparse"
    if regime not in ("dense", "sparse"):
        raise ConfigError("must be 'dense' or 'sparse'", field=f"{field}.regime")
    return RegimeSpec(n=n, nu=nu, regime=regime, gamma=None if gamma is None else float(gamma), c=c)
