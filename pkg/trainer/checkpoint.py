"""
Checkpoint store.

File layout: a fixed header ``magic(6) | version(u16) | payload length(u64) |
sha256(payload)(32)`` followed by a ``torch.save`` payload holding the config
echo, the parameters, the optimizer state, the step counter and RNG state.
"""
import hashlib
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import torch
from pydantic import ValidationError

from config.settings import ModelConfig, TrainConfig
from core.exceptions import BadMagic, CorruptBlob, IOFailure, VersionMismatch
from core.logger import get_logger
from models.recognizer import Recognizer

logger = get_logger()

MAGIC = b"I2C2W1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<6sHQ32s")


@dataclass
class TrainingState:
    model_config: ModelConfig
    train_config: TrainConfig
    model_state: Dict[str, torch.Tensor]
    step: int = 0
    optimizer_state: Optional[Dict[str, Any]] = None
    rng_state: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def capture(
        cls,
        model: Recognizer,
        train_config: TrainConfig,
        step: int = 0,
        optimizer: Optional[torch.optim.Optimizer] = None,
        loader_generator: Optional[torch.Generator] = None,
    ) -> "TrainingState":
        rng = {"torch": torch.get_rng_state()}
        if loader_generator is not None:
            rng["loader"] = loader_generator.get_state()
        return cls(
            model_config=model.cfg,
            train_config=train_config,
            model_state={k: v.detach().clone() for k, v in model.state_dict().items()},
            step=step,
            optimizer_state=optimizer.state_dict() if optimizer is not None else None,
            rng_state=rng,
        )

    def build_model(self) -> Recognizer:
        """Fresh recognizer carrying the stored parameters (dtype included)."""
        model = Recognizer(self.model_config)
        first = next(iter(self.model_state.values()), None)
        if first is not None and first.is_floating_point():
            model = model.to(first.dtype)
        model.load_state_dict(self.model_state)
        return model


def save_checkpoint(state: TrainingState, path: Path) -> Path:
    """
    Raises:
        IOFailure: ``path`` is not writable.
    """
    path = Path(path)
    buffer = io.BytesIO()
    torch.save(
        {
            "model_config": state.model_config.model_dump(mode="json"),
            "train_config": state.train_config.model_dump(mode="json"),
            "model_state": state.model_state,
            "optimizer_state": state.optimizer_state,
            "step": state.step,
            "rng_state": state.rng_state,
        },
        buffer,
    )
    payload = buffer.getvalue()
    header = HEADER.pack(MAGIC, FORMAT_VERSION, len(payload), hashlib.sha256(payload).digest())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + payload)
    except OSError as e:
        logger.error(f"❌ Could not write checkpoint {path}: {e}")
        raise IOFailure(f"Could not write checkpoint {path}: {e}", path) from e
    logger.info(f"💾 Checkpoint saved: {path} (step {state.step})")
    return path


def load_checkpoint(path: Path, expected: Optional[ModelConfig] = None) -> TrainingState:
    """
    Raises:
        IOFailure: file missing or unreadable.
        BadMagic: not a checkpoint of this format.
        CorruptBlob: truncated file or checksum mismatch.
        VersionMismatch: unknown format version, or config echo differs from ``expected``.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        logger.error(f"❌ Could not read checkpoint {path}: {e}")
        raise IOFailure(f"Could not read checkpoint {path}: {e}", path) from e

    if len(blob) < len(MAGIC) or blob[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path} is not an I2C2W checkpoint")
    if len(blob) < HEADER.size:
        raise CorruptBlob(f"{path}: header truncated")
    _, version, length, digest = HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    payload = blob[HEADER.size:]
    if len(payload) != length:
        raise CorruptBlob(f"{path}: payload has {len(payload)} bytes, header says {length}")
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptBlob(f"{path}: checksum mismatch")

    try:
        data = torch.load(io.BytesIO(payload), map_location="cpu", weights_only=False)
        model_config = ModelConfig.model_validate(data["model_config"])
        train_config = TrainConfig.model_validate(data["train_config"])
    except (KeyError, ValidationError) as e:
        raise VersionMismatch(f"{path}: config echo not understood: {e}") from e
    except Exception as e:
        raise CorruptBlob(f"{path}: payload unreadable: {e}") from e

    if expected is not None and expected != model_config:
        diff = {
            k: (v, getattr(expected, k))
            for k, v in model_config.model_dump().items()
            if getattr(expected, k) != v
        }
        raise VersionMismatch(f"{path}: config echo differs (stored, expected): {diff}")

    logger.info(f"📂 Checkpoint loaded: {path} (step {data['step']})")
    return TrainingState(
        model_config=model_config,
        train_config=train_config,
        model_state=data["model_state"],
        step=int(data["step"]),
        optimizer_state=data.get("optimizer_state"),
        rng_state=data.get("rng_state") or {},
    )
