# modules/app/config_manager.py
import collections.abc
import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import yaml

from modules.errors import ConfigError
from utils.utils import get_base_path

logger = logging.getLogger(__name__)

# Shipped defaults, relative to the project root
CONFIG_FILE_PATH = Path(get_base_path()) / "config" / "config.yaml"

PNSG_MODES = ("pnsg", "noise", "dropout_only", "vi_only", "unshifted")
ESCE_VARIANTS = ("literal", "focal")
ACTIVATIONS = ("elu", "relu", "leaky_relu", "tanh", "identity")
DTYPES = ("float32", "float64")

# sweepable parameters and the config key each one drives
SWEEP_KEYS = {
    "kappa": "pnsg.kappa",
    "hidden_dim": "model.hidden_dim",
    "num_negatives": "pnsg.num_negatives",
}


def get_default_config():
    """
    Returns a dictionary containing the default configuration.
    This structure is the canonical source for all config keys.
    """
    return {
        "runtime": {"seed": 0, "dtype": "float32", "threads": 1},
        "mask": {"rate": 0.5, "rate_final": None, "seed_stream": 1},
        "model": {
            "hidden_dim": 256,
            "heads": 1,
            "dropout": 0.5,
            "activation": "elu",
            "semantic_dim": 128,
            "negative_slope": 0.2,
        },
        "vi": {"norm_eps": 1e-5, "logvar_clamp": 10.0, "head_activation": "identity"},
        "pnsg": {"kappa": 2.0, "num_negatives": 20, "dropout_rate": 0.1, "mode": "pnsg"},
        "loss": {
            "alpha": 0.01,
            "beta": 1.0,
            "gamma": 1.0,
            "tau": 0.5,
            "delta": 3.0,
            "esce_variant": "focal",
            "denominator_includes_positive": False,
        },
        "train": {
            "epochs": 200,
            "lr": 1e-3,
            "weight_decay": 0.0,
            "checkpoint_every": 50,
            "early_stopping": {"enabled": False, "patience": 50, "eval_every": 10, "split": 20},
        },
        "eval": {
            "splits": [20, 40, 60],
            "repeats": 5,
            "probe_l2": [1e-3, 1e-2, 1e-1, 1.0],
            "probe_max_iter": 1000,
            "kmeans_restarts": 10,
        },
        "logging": {
            "directory": "logs",
            "level": "INFO",
            "json_enabled": True,
            "rotation": {"max_bytes": 2000000, "backup_count": 5},
        },
    }


def _deep_merge(user_config, defaults):
    """
    Recursively merges user_config into defaults.
    User's values take precedence.
    """
    if not isinstance(user_config, collections.abc.Mapping):
        return user_config

    merged = copy.deepcopy(defaults)
    for key, value in user_config.items():
        if key in merged and isinstance(merged[key], collections.abc.Mapping):
            if not isinstance(value, collections.abc.Mapping):
                raise ConfigError(f"config section '{key}' must be a mapping, got {type(value).__name__}")
            merged[key] = _deep_merge(value, merged[key])
        else:
            merged[key] = value
    return merged


def _unknown_keys(user: Mapping, defaults: Mapping, prefix: str = "") -> list:
    out = []
    for key, value in user.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            out.append(dotted)
        elif isinstance(value, Mapping) and isinstance(defaults[key], Mapping):
            out.extend(_unknown_keys(value, defaults[key], dotted + "."))
    return out


def load_config(path: Optional[Path] = None) -> dict:
    """
    Load a YAML (or JSON) config file and merge it over the defaults.

    Without a path the shipped ``config/config.yaml`` is used when present,
    otherwise the in-memory defaults. Unknown keys are rejected.
    """
    defaults = get_default_config()
    if path is None:
        if not CONFIG_FILE_PATH.exists():
            return defaults
        path = CONFIG_FILE_PATH
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            user_config = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"failed to parse config file {path}: {e}") from e
    if not isinstance(user_config, Mapping):
        raise ConfigError(f"config file {path} must contain a mapping at the top level")

    unknown = _unknown_keys(user_config, defaults)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    config = _deep_merge(user_config, defaults)
    validate_config(config)
    logger.debug("Loaded config from %s", path)
    return config


def get_key(cfg: Mapping, dotted: str) -> Any:
    node: Any = cfg
    for part in dotted.split("."):
        if not isinstance(node, Mapping) or part not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    return node


def set_key(cfg: dict, dotted: str, value: Any) -> dict:
    """Return a copy of ``cfg`` with ``dotted`` set to ``value``."""
    out = copy.deepcopy(cfg)
    parts = dotted.split(".")
    node = out
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    if isinstance(node[parts[-1]], dict) and not isinstance(value, Mapping):
        raise ConfigError(f"config key {dotted} is a section and needs a mapping")
    node[parts[-1]] = value
    return out


def apply_overrides(cfg: dict, overrides: Iterable[str]) -> dict:
    """Apply ``key.path=value`` overrides; values are parsed as YAML scalars."""
    out = cfg
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse override value {raw!r}: {e}") from e
        out = set_key(out, key.strip(), value)
    validate_config(out)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: Mapping) -> None:
    """Raise ``ConfigError`` for any missing, mistyped or out-of-range value."""
    try:
        _validate(cfg)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {type(e).__name__}: {e}") from e


def _validate(cfg: Mapping) -> None:
    rt, mask, model, vi = cfg["runtime"], cfg["mask"], cfg["model"], cfg["vi"]
    pnsg, loss, train = cfg["pnsg"], cfg["loss"], cfg["train"]

    _require(rt["dtype"] in DTYPES, f"runtime.dtype must be one of {DTYPES}")
    _require(int(rt["threads"]) >= 1, "runtime.threads must be >= 1")
    _require(0.0 <= float(mask["rate"]) <= 1.0, "mask.rate must lie in [0, 1]")
    if mask["rate_final"] is not None:
        _require(0.0 <= float(mask["rate_final"]) <= 1.0, "mask.rate_final must lie in [0, 1]")

    _require(int(model["hidden_dim"]) >= 1, "model.hidden_dim must be >= 1")
    _require(int(model["heads"]) >= 1, "model.heads must be >= 1")
    _require(
        int(model["hidden_dim"]) % int(model["heads"]) == 0,
        "model.hidden_dim must be divisible by model.heads",
    )
    _require(0.0 <= float(model["dropout"]) < 1.0, "model.dropout must lie in [0, 1)")
    _require(model["activation"] in ACTIVATIONS, f"model.activation must be one of {ACTIVATIONS}")
    _require(vi["head_activation"] in ACTIVATIONS, f"vi.head_activation must be one of {ACTIVATIONS}")
    _require(float(vi["norm_eps"]) > 0, "vi.norm_eps must be > 0")
    _require(float(vi["logvar_clamp"]) > 0, "vi.logvar_clamp must be > 0")

    _require(pnsg["mode"] in PNSG_MODES, f"pnsg.mode must be one of {PNSG_MODES}")
    _require(int(pnsg["num_negatives"]) >= 1, "pnsg.num_negatives must be >= 1")
    _require(0.0 < float(pnsg["dropout_rate"]) < 1.0, "pnsg.dropout_rate must lie in (0, 1)")

    for w in ("alpha", "beta", "gamma"):
        _require(float(loss[w]) >= 0, f"loss.{w} must be >= 0")
    _require(float(loss["tau"]) > 0, "loss.tau must be > 0")
    _require(float(loss["delta"]) >= 1, "loss.delta must be >= 1")
    _require(loss["esce_variant"] in ESCE_VARIANTS, f"loss.esce_variant must be one of {ESCE_VARIANTS}")

    _require(int(train["epochs"]) >= 1, "train.epochs must be >= 1")
    _require(float(train["lr"]) > 0, "train.lr must be > 0")
    _require(int(train["checkpoint_every"]) >= 0, "train.checkpoint_every must be >= 0")
    es = train["early_stopping"]
    _require(isinstance(es["enabled"], bool), "train.early_stopping.enabled must be true or false")
    _require(int(es["eval_every"]) >= 1, "train.early_stopping.eval_every must be >= 1")
    _require(int(es["patience"]) >= 1, "train.early_stopping.patience must be >= 1")
    _require(int(es["split"]) >= 1, "train.early_stopping.split must be >= 1")
    if not 2e-4 <= float(train["lr"]) <= 2e-3:
        logger.warning("train.lr=%g lies outside the recommended range 2e-4..2e-3", float(train["lr"]))

    ev = cfg["eval"]
    _require(int(ev["repeats"]) >= 1, "eval.repeats must be >= 1")
    _require(all(int(s) >= 1 for s in ev["splits"]), "eval.splits must be positive integers")
    _require(len(ev["probe_l2"]) > 0 and all(float(c) > 0 for c in ev["probe_l2"]), "eval.probe_l2 must be non-empty and > 0")
    _require(int(ev["kmeans_restarts"]) >= 1, "eval.kmeans_restarts must be >= 1")


def config_hash(cfg: Mapping) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def save_resolved_config(cfg: Mapping, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(dict(cfg), f, sort_keys=False, indent=2, allow_unicode=True)
    return path
