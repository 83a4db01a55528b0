"""
End-to-end training: backbone, I2C and C2W optimised jointly.

AdamW over two named parameter groups (backbone / transformer) at their own
learning rates, gradient-norm clipping, one metrics CSV row per step.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import torch
from torch.utils.data import DataLoader

from config.settings import ModelConfig, TrainConfig, settings
from core.charset import PositionSet
from core.exceptions import DivergenceDetected, IOFailure, NonFinite, VersionMismatch
from core.logger import get_logger, run_log
from losses.total import LossBreakdown, total_loss
from models.recognizer import Recognizer, build_model
from synth.dataset import Manifest, WordImageDataset, collate_samples
from trainer.checkpoint import TrainingState, load_checkpoint, save_checkpoint

logger = get_logger()

METRICS_HEADER = ("step", "det_char", "det_pos", "recog", "total")


@dataclass
class TrainResult:
    checkpoint_path: Path
    metrics_path: Path
    steps_run: int
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def final_loss(self) -> Optional[float]:
        return self.history[-1]["total"] if self.history else None


def configure_runtime() -> None:
    if settings.runtime.NUM_THREADS > 0:
        torch.set_num_threads(settings.runtime.NUM_THREADS)
    if settings.runtime.DETERMINISTIC:
        torch.use_deterministic_algorithms(True, warn_only=True)


class Trainer:
    def __init__(
        self,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        out_dir: Path,
        dtype: torch.dtype = torch.float32,
    ):
        configure_runtime()
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.out_dir = Path(out_dir)
        self.dtype = dtype

        self.model: Recognizer = build_model(model_cfg, seed=train_cfg.seed).to(dtype)
        groups = self.model.parameter_groups()
        self.optimizer = torch.optim.AdamW(
            [
                {"name": "backbone", "params": groups["backbone"], "lr": train_cfg.lr_backbone},
                {"name": "transformer", "params": groups["transformer"], "lr": train_cfg.lr_transformer},
            ],
            weight_decay=train_cfg.weight_decay,
        )
        self.generator = torch.Generator().manual_seed(train_cfg.seed)
        self.step = 0

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / settings.artifacts.CHECKPOINT

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / settings.artifacts.METRICS

    def state(self) -> TrainingState:
        return TrainingState.capture(self.model, self.train_cfg, self.step, self.optimizer, self.generator)

    def save(self, path: Optional[Path] = None) -> Path:
        return save_checkpoint(self.state(), path or self.checkpoint_path)

    def restore(self, state: TrainingState) -> None:
        """Continue from a saved state (same ModelConfig required)."""
        if state.model_config != self.model_cfg:
            raise VersionMismatch("Checkpoint was trained with a different ModelConfig")
        self.model.load_state_dict(state.model_state)
        if state.optimizer_state is not None:
            self.optimizer.load_state_dict(state.optimizer_state)
        if "torch" in state.rng_state:
            torch.set_rng_state(state.rng_state["torch"])
        if "loader" in state.rng_state:
            self.generator.set_state(state.rng_state["loader"])
        self.step = state.step
        logger.info(f"🔁 Resuming from step {self.step}")

    def _loader(self, manifest: Manifest) -> DataLoader:
        dataset = WordImageDataset(
            manifest,
            positions=PositionSet(self.model_cfg.n_queries),
            truncate=self.train_cfg.truncate_long_words,
            dtype=self.dtype,
            height=self.model_cfg.canvas_height,
            width=self.model_cfg.canvas_width,
        )
        return DataLoader(
            dataset,
            batch_size=self.train_cfg.batch_size,
            shuffle=True,
            generator=self.generator,
            collate_fn=collate_samples,
            num_workers=self.train_cfg.num_workers,
        )

    def _loss(self, images: torch.Tensor, labels) -> LossBreakdown:
        out = self.model(images)
        return total_loss(
            out.slot_logits,
            labels,
            out.char_logits,
            out.pos_logits,
            beta=self.train_cfg.beta,
            null_weight=self.train_cfg.null_weight,
            mode=self.train_cfg.match_cost,
        )

    # ==================== TRAINING LOOP ====================

    def train(self, manifest: Manifest, resume_from: Optional[Path] = None) -> TrainResult:
        """
        Run until ``train_cfg.steps`` optimisation steps have been taken.

        Raises:
            DivergenceDetected: a loss became NaN/Inf; the parameters from
                before that step are saved to the run checkpoint first.
            IOFailure: ``out_dir`` is not writable.
        """
        if resume_from is not None:
            self.restore(load_checkpoint(resume_from, expected=self.model_cfg))
        loader = self._loader(manifest)

        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            metrics_file = open(self.metrics_path, "a" if resume_from else "w", encoding="utf-8", newline="")
        except OSError as e:
            logger.error(f"❌ Cannot write to {self.out_dir}: {e}")
            raise IOFailure(f"Cannot write to {self.out_dir}: {e}", self.out_dir) from e

        history: List[Dict[str, float]] = []
        total_steps = self.train_cfg.steps
        with metrics_file, run_log(self.out_dir):
            logger.info(
                f"🚀 Training {self.model_cfg.arch.value} for {total_steps} steps "
                f"({len(loader.dataset)} samples, {self.model.num_parameters} parameters)"
            )
            writer = csv.writer(metrics_file, lineterminator="\n")
            if not resume_from:
                writer.writerow(METRICS_HEADER)
            while self.step < total_steps:
                for images, labels in loader:
                    if self.step >= total_steps:
                        break
                    row = self._train_step(images, labels)
                    writer.writerow([self.step] + [f"{row[k]:.8g}" for k in METRICS_HEADER[1:]])
                    history.append({"step": float(self.step), **row})
                    if self.step % self.train_cfg.log_every == 0:
                        logger.info(f"📉 step {self.step}: det_char={row['det_char']:.4f} "
                                    f"det_pos={row['det_pos']:.4f} recog={row['recog']:.4f} "
                                    f"total={row['total']:.4f}")
                    self.step += 1
                    every = self.train_cfg.checkpoint_every
                    if every and self.step % every == 0 and self.step < total_steps:
                        self.save()

            path = self.save()
            logger.info(f"🏁 Training finished after {self.step} steps")
        return TrainResult(checkpoint_path=path, metrics_path=self.metrics_path, steps_run=len(history),
                           history=history)

    def _train_step(self, images: torch.Tensor, labels) -> Dict[str, float]:
        self.model.train()
        try:
            breakdown = self._loss(images, labels)
            self.optimizer.zero_grad(set_to_none=True)
            breakdown.total.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.train_cfg.grad_clip)
            self.model.check_finite(grad_norm, "gradient norm")
        except NonFinite as e:
            # Weights are still those of the last completed step
            path = self.save()
            logger.error(f"❌ Divergence at step {self.step}: {e}")
            raise DivergenceDetected(f"Training diverged at step {self.step}: {e}", self.step, path) from e

        self.optimizer.step()
        return breakdown.as_row()


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    manifest: Manifest,
    out_dir: Path,
    dtype: torch.dtype = torch.float32,
) -> TrainResult:
    return Trainer(model_cfg, train_cfg, out_dir, dtype).train(manifest)
