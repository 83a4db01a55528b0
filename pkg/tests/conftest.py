from pathlib import Path

import pytest
import torch

from config.settings import ModelConfig, TrainConfig, settings
from core.charset import CharSet, PositionSet
from core.logger import get_logger
from synth.dataset import Manifest, generate_dataset
from synth.render import DegradationRanges
from trainer.engine import TrainResult, Trainer

logger = get_logger()

TINY_VOCAB = ["cat", "dog", "ab", "zoo", "a1"]

# ==================== HOOKS ====================

def pytest_configure(config):
    """Start-up Hook"""
    logger.info(
        f"🚀 TEST SESSION STARTING | torch {torch.__version__} | "
        f"deterministic={settings.runtime.DETERMINISTIC}"
    )

# ==================== ALPHABETS ====================

@pytest.fixture(scope="session")
def charset() -> CharSet:
    return CharSet()


@pytest.fixture(scope="session")
def positions() -> PositionSet:
    return PositionSet(25)

# ==================== CONFIGS ====================

@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    """Small enough for double-precision forward/backward in milliseconds."""
    return ModelConfig(
        n_queries=6,
        d_model=16,
        num_heads=2,
        ffn_dim=32,
        encoder_layers=1,
        dropout=0.0,
        backbone_channels=(4, 8, 8),
        backbone_strides=(2, 2, 2),
    )


@pytest.fixture(scope="session")
def tiny_train_config() -> TrainConfig:
    return TrainConfig(steps=3, batch_size=4, log_every=1, checkpoint_every=0, seed=0)

# ==================== DATA / RUN FIXTURES ====================

@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Manifest:
    out_dir: Path = tmp_path_factory.mktemp("tiny_dataset")
    return generate_dataset(8, TINY_VOCAB, DegradationRanges(), seed=1, out_dir=out_dir)


@pytest.fixture(scope="session")
def trained_run(tmp_path_factory, tiny_model_config, tiny_train_config, tiny_dataset) -> TrainResult:
    out_dir = tmp_path_factory.mktemp("trained_run")
    result = Trainer(tiny_model_config, tiny_train_config, out_dir, dtype=torch.float64).train(tiny_dataset)
    logger.info(f"[SETUP] 💾 Tiny run ready: {result.checkpoint_path}")
    return result
