from __future__ import annotations
from typing import Any, Literal, Mapping, Optional, Union
from pathlib import Path
import logging

import yaml
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from .embedding import DEFAULT_BUCKETS, DEFAULT_DIM, DEFAULT_SEED, MAX_N, MIN_N
from .encoder import DEFAULT_FILTER_COUNTS, DEFAULT_KERNEL_WIDTHS
from .lexicalizer import DEFAULT_WORDS, FEATURE_MAPS
from .model import ModelConfig
from .trainer import TrainConfig

logger = logging.getLogger("semtext.config")


class ConfigLoadError(Exception):
    """Raised when a YAML config cannot be loaded or validated."""


class BaseConfig(BaseModel):
    """Base model that normalizes Paths."""
    model_config = {"validate_default": True, "extra": "forbid"}

    @staticmethod
    def _norm_path(p: Optional[Path]) -> Optional[Path]:
        return p.expanduser().resolve() if isinstance(p, Path) else p

    @staticmethod
    def _must_exist_file(p: Path, field_name: str) -> Path:
        if not p.exists():
            logger.error("%s does not exist: %s", field_name, p)
            raise ValueError(f"'{field_name}' does not exist: {p}")
        if not p.is_file():
            logger.error("%s must be a file: %s", field_name, p)
            raise ValueError(f"'{field_name}' must be a file: {p}")
        return p

    @staticmethod
    def _must_exist_dir(p: Path, field_name: str) -> Path:
        if not p.exists():
            logger.error("%s directory does not exist: %s", field_name, p)
            raise ValueError(f"'{field_name}' directory does not exist: {p}")
        if not p.is_dir():
            logger.error("%s must be a directory: %s", field_name, p)
            raise ValueError(f"'{field_name}' must be a directory: {p}")
        return p


class SemTextConfig(BaseConfig):
    """
    Flat settings file. Command-line flags override file values,
    file values override these defaults.
    """
    # training
    n: int = DEFAULT_WORDS
    m: int = 85
    batch_size: int = 64
    learning_rate: float = 0.01
    epochs: int = 30
    seed: int = 7
    validation_split: float = 0.25
    momentum: float = 0.0
    clip_grad_norm: Optional[float] = None
    # network
    embed_dim: int = DEFAULT_DIM
    kernel_widths: list[int] = list(DEFAULT_KERNEL_WIDTHS)
    filter_counts: list[int] = list(DEFAULT_FILTER_COUNTS)
    hidden_size: int = 512
    feature_maps: list[str] = list(FEATURE_MAPS)
    conv_relu: bool = False
    precision: Literal["float32", "float64"] = "float64"
    # lexicon
    include_ids: bool = False
    data_dir: Optional[Path] = None
    # embeddings
    embeddings: Optional[Path] = None
    subword_buckets: int = DEFAULT_BUCKETS
    subword_seed: int = DEFAULT_SEED
    subword_min_n: int = MIN_N
    subword_max_n: int = MAX_N

    @field_validator("n", "m", "batch_size", "epochs", "embed_dim", "hidden_size",
                     "subword_buckets", "subword_min_n", "subword_max_n")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("learning_rate", "momentum")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("validation_split")
    @classmethod
    def _split_ratio(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("must be strictly between 0 and 1")
        return v

    @field_validator("kernel_widths", "filter_counts")
    @classmethod
    def _positive_list(cls, v: list[int]) -> list[int]:
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a non-empty list of positive integers")
        return v

    @field_validator("feature_maps")
    @classmethod
    def _feature_maps(cls, v: list[str]) -> list[str]:
        v = [name.strip().lower() for name in v]
        if not v:
            raise ValueError("at least one feature map is required")
        unknown = sorted(set(v) - set(FEATURE_MAPS))
        if unknown:
            raise ValueError(f"unknown feature maps {unknown}; choose from {list(FEATURE_MAPS)}")
        if len(set(v)) != len(v):
            raise ValueError("feature maps must not repeat")
        return v

    @field_validator("embeddings", "data_dir")
    @classmethod
    def _normalize_paths(cls, v: Optional[Path]) -> Optional[Path]:
        return BaseConfig._norm_path(v)

    @model_validator(mode="after")
    def _check_consistency(self) -> "SemTextConfig":
        if len(self.kernel_widths) != len(self.filter_counts):
            raise ValueError("kernel_widths and filter_counts must have the same length")
        if self.subword_min_n > self.subword_max_n:
            raise ValueError("subword_min_n must not exceed subword_max_n")
        if self.embeddings is not None:
            BaseConfig._must_exist_file(self.embeddings, "embeddings")
        if self.data_dir is not None:
            BaseConfig._must_exist_dir(self.data_dir, "data_dir")
        return self

    def train_settings(self) -> TrainConfig:
        return TrainConfig(
            n=self.n, m=self.m, batch_size=self.batch_size, learning_rate=self.learning_rate,
            epochs=self.epochs, seed=self.seed, validation_split=self.validation_split,
            momentum=self.momentum, clip_grad_norm=self.clip_grad_norm,
        )

    def model_settings(self, embed_dim: Optional[int] = None) -> ModelConfig:
        return ModelConfig(
            embed_dim=embed_dim or self.embed_dim, n=self.n, m=self.m,
            kernel_widths=tuple(self.kernel_widths), filter_counts=tuple(self.filter_counts),
            hidden_size=self.hidden_size, feature_maps=tuple(self.feature_maps),
            conv_relu=self.conv_relu, precision=self.precision, include_ids=self.include_ids,
            embeddings=str(self.embeddings) if self.embeddings else None,
            subword_buckets=self.subword_buckets, subword_seed=self.subword_seed,
            subword_min_n=self.subword_min_n, subword_max_n=self.subword_max_n,
        )


def _load_yaml(config_path: Union[str, Path]) -> dict:
    """
    Read YAML file, returning a dict.
    """
    path = Path(config_path).expanduser()
    if not path.exists():
        logger.error("Config file not found: %s", path)
        raise FileNotFoundError(f"Config file not found: {path}")
    with path.open("r") as file_obj:
        data = yaml.safe_load(file_obj) or {}
    if not isinstance(data, dict):
        logger.error("Top-level YAML must be a mapping/object (got %s)", type(data).__name__)
        raise ValueError("Top-level YAML must be a mapping/object.")
    nested = sorted(str(k) for k, v in data.items() if isinstance(v, dict))
    if nested:
        raise ValueError(f"Config must be flat; nested sections found: {', '.join(nested)}")
    logger.debug("Top-level keys: %s", ", ".join(sorted(map(str, data.keys()))))
    return data


def build_config(
    config_path: Union[str, Path, None] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SemTextConfig:
    """
    Merge defaults, the optional YAML file and command-line overrides (None means unset).
    Raises ConfigLoadError on failure.
    """
    try:
        raw: dict = _load_yaml(config_path) if config_path is not None else {}
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        logger.debug("Validating SemTextConfig (%d keys set)", len(raw))
        return SemTextConfig.model_validate(raw)
    except (ValidationError, ValueError, FileNotFoundError, yaml.YAMLError) as error:
        msg = _format_config_error(error)
        logger.error("Config validation failed:\n%s", msg)
        raise ConfigLoadError(msg) from error


def load_config(config_path: Union[str, Path]) -> SemTextConfig:
    return build_config(config_path)


def _format_config_error(error: Exception) -> str:
    header = "Configuration error:\n"
    if isinstance(error, ValidationError):
        lines = []
        for issue in error.errors():
            location = ".".join(str(p) for p in issue.get("loc", []))
            message = issue.get("msg", "Invalid value")
            lines.append(f"  - {location}: {message}")
        return header + "\n".join(lines)
    return header + str(error)


def app_config_json_schema() -> dict:
    """
    Return a pydantic JSON Schema for SemTextConfig.
    """
    return SemTextConfig.model_json_schema()
