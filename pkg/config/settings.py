import os
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

load_dotenv()


class Architecture(str, Enum):
    """Supported recognizer layouts."""
    I2C2W = "i2c2w"
    I2W = "i2w"


class MatchCost(str, Enum):
    """How predicted probabilities enter the bipartite matching cost."""
    PROBABILITY = "prob"
    LOG_PROBABILITY = "log_prob"


# ==================== HYPER-PARAMETERS ====================

class ModelConfig(BaseModel):
    """Network shape. Echoed into every checkpoint."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_queries: int = Field(25, ge=3)
    d_model: int = Field(128, gt=0)
    num_heads: int = Field(8, gt=0)
    ffn_dim: int = Field(256, gt=0)
    encoder_layers: int = Field(3, ge=1)
    i2c_decoder_layers: int = Field(1, ge=1)
    c2w_decoder_layers: int = Field(1, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    backbone_channels: Tuple[int, ...] = (32, 64, 128, 128)
    backbone_strides: Tuple[int, ...] = (2, 2, 2, 1)
    canvas_height: int = Field(32, gt=0)
    canvas_width: int = Field(128, gt=0)
    arch: Architecture = Architecture.I2C2W

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelConfig":
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by num_heads={self.num_heads}")
        if self.d_model % 4:
            raise ValueError(f"d_model={self.d_model} must be divisible by 4 (2D positional encoding)")
        if len(self.backbone_channels) != len(self.backbone_strides) or not self.backbone_channels:
            raise ValueError("backbone_channels and backbone_strides must be non-empty and equally long")
        factor = self.downsample_factor
        if self.canvas_height % factor or self.canvas_width % factor:
            raise ValueError(f"canvas {self.canvas_height}x{self.canvas_width} not divisible by {factor}")
        return self

    @property
    def downsample_factor(self) -> int:
        factor = 1
        for stride in self.backbone_strides:
            factor *= stride
        return factor

    @property
    def feature_size(self) -> Tuple[int, int]:
        """(H, W) of the backbone feature map."""
        factor = self.downsample_factor
        return self.canvas_height // factor, self.canvas_width // factor

    @property
    def max_word_length(self) -> int:
        return self.n_queries - 2


class TrainConfig(BaseModel):
    """Optimisation settings. Defaults are the desk-scale ones."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lr_backbone: float = Field(1e-5, gt=0)
    lr_transformer: float = Field(1e-4, gt=0)
    batch_size: int = Field(16, gt=0)
    steps: int = Field(2000, ge=0)
    weight_decay: float = Field(1e-4, ge=0)
    grad_clip: float = Field(0.1, gt=0)
    seed: int = 0
    beta: float = Field(1.0, ge=0)
    null_weight: float = Field(0.1, gt=0, le=1.0)
    match_cost: MatchCost = MatchCost.PROBABILITY
    log_every: int = Field(50, gt=0)
    checkpoint_every: int = Field(500, ge=0)
    num_workers: int = Field(0, ge=0)
    truncate_long_words: bool = False


# ==================== RUNTIME SETTINGS ====================

@dataclass(frozen=True)
class LogSettings:
    """Logger configuration."""
    LEVEL: str = field(
        default_factory=lambda: os.getenv("I2C2W_LOG_LEVEL", "INFO").upper()
    )
    TO_FILE: bool = field(
        default_factory=lambda: os.getenv("I2C2W_LOG_TO_FILE", "true").lower() == "true"
    )
    DIR: Optional[str] = field(default_factory=lambda: os.getenv("I2C2W_LOG_DIR"))


@dataclass(frozen=True)
class RuntimeSettings:
    """Torch runtime knobs."""
    # 0 keeps torch's own default
    NUM_THREADS: int = field(
        default_factory=lambda: int(os.getenv("I2C2W_NUM_THREADS", "0"))
    )
    DETERMINISTIC: bool = field(
        default_factory=lambda: os.getenv("I2C2W_DETERMINISTIC", "true").lower() == "true"
    )


@dataclass(frozen=True)
class ArtifactNames:
    """File names inside dataset and run directories."""
    MANIFEST: str = "manifest.txt"
    IMAGES_DIR: str = "images"
    CHECKPOINT: str = "checkpoint.bin"
    METRICS: str = "metrics.csv"
    RUN_LOG: str = "train.log"


class Settings:
    def __init__(self):
        self.project_root = Path(__file__).parent.parent

        self.logging = LogSettings()
        self.runtime = RuntimeSettings()
        self.artifacts = ArtifactNames()

    @property
    def log_dir(self) -> Path:
        return Path(self.logging.DIR) if self.logging.DIR else self.project_root / "logs"

    def get_current_timestamp(self) -> str:
        """Get current timestamp for filenames."""
        return datetime.now().strftime("%Y-%m-%d_%H-%M-%S")


settings = Settings()


# ==================== CONFIG FILES ====================

MODEL_KEYS = frozenset(ModelConfig.model_fields)
TRAIN_KEYS = frozenset(TrainConfig.model_fields)


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_").lower()


def load_config_file(path: Path) -> Dict[str, str]:
    """
    Read a UTF-8 key=value file.

    Keys are normalised (``lr-backbone`` == ``lr_backbone``); values stay strings
    and are coerced by the pydantic models.
    """
    values = dotenv_values(path, encoding="utf-8")
    return {normalize_key(k): v for k, v in values.items() if v is not None}


def _coerce(key: str, value: Any) -> Any:
    # Tuples arrive as "32,64,128" from files
    if key in ("backbone_channels", "backbone_strides") and isinstance(value, str):
        return tuple(int(v) for v in value.split(",") if v.strip())
    return value


def build_configs(
    overrides: Mapping[str, Any],
    base_model: Optional[ModelConfig] = None,
    base_train: Optional[TrainConfig] = None,
) -> Tuple[ModelConfig, TrainConfig]:
    """
    Split a flat override map into ModelConfig / TrainConfig.

    Raises:
        KeyError: for keys neither config knows.
        pydantic.ValidationError: for out-of-range values.
    """
    model_values: Dict[str, Any] = dict(base_model.model_dump()) if base_model else {}
    train_values: Dict[str, Any] = dict(base_train.model_dump()) if base_train else {}
    for raw_key, value in overrides.items():
        key = normalize_key(raw_key)
        if key in MODEL_KEYS:
            model_values[key] = _coerce(key, value)
        elif key in TRAIN_KEYS:
            train_values[key] = value
        else:
            raise KeyError(raw_key)
    return ModelConfig.model_validate(model_values), TrainConfig.model_validate(train_values)
