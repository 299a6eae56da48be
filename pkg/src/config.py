"""JSON experiment configs, dotted overrides and the experiment manifest.

A training config is one JSON object with sections
``{dataset, model, objective, sc, optimizer, run}``; an evaluation config has
optional sections ``{parzen, fid, factor}``. Every section maps onto a
dataclass from ``src.models``. Unknown keys raise ``ConfigurationError``
naming the dotted key.
"""

import dataclasses
import json
import logging
import typing
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type

from .errors import ConfigurationError
from .helpers import content_hash, to_jsonable
from .models import (
    DatasetConfig,
    FactorConfig,
    FIDConfig,
    ModelConfig,
    ObjectiveConfig,
    OptimizerConfig,
    ParzenConfig,
    RunConfig,
    SCConfig,
    TrainConfig,
)
from .settings import VERSION

logger = logging.getLogger(__name__)

TRAIN_SECTIONS: Dict[str, Type] = {
    "dataset": DatasetConfig,
    "model": ModelConfig,
    "objective": ObjectiveConfig,
    "sc": SCConfig,
    "optimizer": OptimizerConfig,
    "run": RunConfig,
}


@dataclass
class EvalConfig:
    parzen: ParzenConfig = field(default_factory=ParzenConfig)
    fid: FIDConfig = field(default_factory=FIDConfig)
    factor: FactorConfig = field(default_factory=FactorConfig)


EVAL_SECTIONS: Dict[str, Type] = {"parzen": ParzenConfig, "fid": FIDConfig, "factor": FactorConfig}


# ---------------------------------------------------------------------------
# Dataclass builder
# ---------------------------------------------------------------------------

def _coerce(value: Any, hint: Any, key: str) -> Any:
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], key)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigurationError(f"'{key}' must be a list", key=key)
        (item,) = typing.get_args(hint) or (Any,)
        return [_coerce(v, item, f"{key}[{i}]") for i, v in enumerate(value)]
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError:
            allowed = ", ".join(repr(m.value) for m in hint)
            raise ConfigurationError(f"'{key}' must be one of {allowed}, got {value!r}", key=key) from None
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigurationError(f"'{key}' must be an object", key=key)
        return build_dataclass(hint, value, key)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"'{key}' must be true or false, got {value!r}", key=key)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"'{key}' must be an integer, got {value!r}", key=key)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"'{key}' must be a number, got {value!r}", key=key)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"'{key}' must be a string, got {value!r}", key=key)
        return value
    return value


def build_dataclass(cls: Type, data: Dict[str, Any], prefix: str, skip: Sequence[str] = (),
                    extra: Optional[Dict[str, Any]] = None) -> Any:
    """Instantiate ``cls`` from a JSON object, rejecting unknown keys.

    ``skip`` names fields the JSON object may not set; ``extra`` supplies them.
    """
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init and f.name not in skip}
    for key in data:
        if key not in names:
            raise ConfigurationError(f"Unknown configuration key '{prefix}.{key}'", key=f"{prefix}.{key}")
    kwargs = {key: _coerce(value, hints[key], f"{prefix}.{key}") for key, value in data.items()}
    kwargs.update(extra or {})
    try:
        return cls(**kwargs)
    except ConfigurationError as e:
        if e.key is None:
            e.key = prefix
        raise


# ---------------------------------------------------------------------------
# Overrides
# ---------------------------------------------------------------------------

def parse_override(text: str) -> tuple:
    """Split ``section.key=value``; the value is JSON, or the raw string if not JSON."""
    if "=" not in text:
        raise ConfigurationError(f"Override '{text}' is not of the form section.key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if "." not in key:
        raise ConfigurationError(f"Override key '{key}' must name a section and a field", key=key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Return a copy of ``data`` with each dotted override set."""
    result = json.loads(json.dumps(data))
    for text in overrides:
        key, value = parse_override(text)
        parts = key.split(".")
        node = result
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigurationError(f"Override '{key}' descends into a non-object value", key=key)
            node = child
        node[parts[-1]] = value
    return result


# ---------------------------------------------------------------------------
# Train / eval configs
# ---------------------------------------------------------------------------

def _check_sections(data: Dict[str, Any], allowed: Dict[str, Type]) -> None:
    if not isinstance(data, dict):
        raise ConfigurationError("Configuration must be a JSON object")
    for section, value in data.items():
        if section not in allowed:
            raise ConfigurationError(f"Unknown configuration section '{section}'", key=section)
        if not isinstance(value, dict):
            raise ConfigurationError(f"Section '{section}' must be an object", key=section)


def train_config_from_dict(data: Dict[str, Any]) -> TrainConfig:
    _check_sections(data, TRAIN_SECTIONS)
    sc = build_dataclass(SCConfig, data["sc"], "sc") if "sc" in data else None
    objective = build_dataclass(
        ObjectiveConfig, data.get("objective", {}), "objective", skip=("sc",), extra={"sc": sc}
    )
    return TrainConfig(
        dataset=build_dataclass(DatasetConfig, data.get("dataset", {}), "dataset"),
        model=build_dataclass(ModelConfig, data.get("model", {}), "model"),
        objective=objective,
        optimizer=build_dataclass(OptimizerConfig, data.get("optimizer", {}), "optimizer"),
        run=build_dataclass(RunConfig, data.get("run", {}), "run"),
    )


def train_config_to_dict(cfg: TrainConfig) -> Dict[str, Any]:
    objective = to_jsonable(cfg.objective)
    sc = objective.pop("sc")
    data = {
        "dataset": to_jsonable(cfg.dataset),
        "model": to_jsonable(cfg.model),
        "objective": objective,
        "optimizer": to_jsonable(cfg.optimizer),
        "run": to_jsonable(cfg.run),
    }
    if sc is not None:
        data["sc"] = sc
    return data


def eval_config_from_dict(data: Dict[str, Any]) -> EvalConfig:
    _check_sections(data, EVAL_SECTIONS)
    return EvalConfig(**{
        name: build_dataclass(cls, data.get(name, {}), name) for name, cls in EVAL_SECTIONS.items()
    })


def read_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {e}") from None


def load_train_config(path: Path, overrides: Sequence[str] = ()) -> TrainConfig:
    data = apply_overrides(read_json(Path(path)), overrides)
    return train_config_from_dict(data)


def load_eval_config(path: Optional[Path], overrides: Sequence[str] = ()) -> EvalConfig:
    data = read_json(Path(path)) if path else {}
    return eval_config_from_dict(apply_overrides(data, overrides))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class ExperimentManifest:
    """Resolved snapshot of a run, written before the first training step."""
    config_path: str
    output_dir: str
    snapshot: Dict[str, Any]
    content_hash: str
    overrides: List[str] = field(default_factory=list)
    created_at: str = ""
    version: str = VERSION

    @classmethod
    def build(cls, cfg: TrainConfig, config_path: Path, output_dir: Path,
              overrides: Sequence[str] = ()) -> "ExperimentManifest":
        snapshot = train_config_to_dict(cfg)
        return cls(
            config_path=str(config_path),
            output_dir=str(output_dir),
            snapshot=snapshot,
            content_hash=content_hash(snapshot),
            overrides=list(overrides),
            created_at=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, path: Path) -> Path:
        path.write_text(json.dumps(to_jsonable(self), indent=2, sort_keys=True))
        logger.info("Manifest written to %s (hash %s)", path, self.content_hash[:12])
        return path

    @classmethod
    def read(cls, path: Path) -> "ExperimentManifest":
        data = read_json(path)
        return cls(**data)

    def train_config(self, overrides: Sequence[str] = ()) -> TrainConfig:
        """The snapshot as a config, with dotted ``overrides`` applied on top."""
        return train_config_from_dict(apply_overrides(self.snapshot, overrides))
