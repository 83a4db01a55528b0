"""Word accuracy on a manifest, in either decoding mode."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import torch

from core.charset import normalize_word
from core.exceptions import EmptyDataset, ShapeMismatch
from core.logger import get_logger
from models.recognizer import DecodeMode, Recognizer
from synth.dataset import Manifest
from trainer.checkpoint import TrainingState, load_checkpoint
from utils.image_io import load_grayscale, to_model_input

logger = get_logger()


def word_accuracy(predictions: Sequence[str], ground_truth: Sequence[str]) -> float:
    """Fraction of exact matches after normalization."""
    if not ground_truth:
        raise EmptyDataset("No samples to score")
    if len(predictions) != len(ground_truth):
        raise ShapeMismatch(f"{len(predictions)} predictions for {len(ground_truth)} samples")
    correct = sum(normalize_word(p) == normalize_word(g) for p, g in zip(predictions, ground_truth))
    return correct / len(ground_truth)


@dataclass
class EvalReport:
    mode: DecodeMode
    correct: int
    total: int
    # (prediction, ground truth) per sample, manifest order
    predictions: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def errors(self) -> List[Tuple[str, str]]:
        return [(p, g) for p, g in self.predictions if normalize_word(p) != normalize_word(g)]

    def __str__(self) -> str:
        return f"{self.mode.value} {self.accuracy:.4f} {self.correct}/{self.total}"


def run_evaluation(
    model: Recognizer,
    manifest: Manifest,
    mode: Union[DecodeMode, str] = DecodeMode.I2C2W,
    batch_size: int = 64,
) -> EvalReport:
    """
    Decode every manifest image. Parameters and train/eval mode are left as found.

    Raises:
        EmptyDataset: the manifest has no entries.
        IOFailure: an image cannot be read.
    """
    mode = DecodeMode(mode)
    if len(manifest) == 0:
        raise EmptyDataset(f"Manifest under {manifest.root} has no entries")
    dtype = next(model.parameters()).dtype
    truths = [normalize_word(t) for t in manifest.transcriptions]

    predicted: List[str] = []
    for start in range(0, len(manifest), batch_size):
        indices = range(start, min(start + batch_size, len(manifest)))
        images = torch.stack([
            to_model_input(load_grayscale(manifest.image_path(i), model.cfg.canvas_height, model.cfg.canvas_width),
                           dtype)
            for i in indices
        ])
        predicted.extend(r.word for r in model.recognize(images, mode))

    correct = sum(p == g for p, g in zip(predicted, truths))
    report = EvalReport(mode=mode, correct=correct, total=len(truths), predictions=list(zip(predicted, truths)))
    logger.info(f"🎯 {report.mode.value} word accuracy {report.accuracy:.4f} ({report.correct}/{report.total})")
    return report


def evaluate(
    checkpoint: Union[Path, str, TrainingState, Recognizer],
    manifest: Union[Manifest, Path, str],
    mode: Union[DecodeMode, str] = DecodeMode.I2C2W,
) -> float:
    """Word accuracy of a checkpoint (file, loaded state, or live model) on a manifest."""
    if isinstance(checkpoint, Recognizer):
        model = checkpoint
    else:
        state = checkpoint if isinstance(checkpoint, TrainingState) else load_checkpoint(Path(checkpoint))
        model = state.build_model()
    if not isinstance(manifest, Manifest):
        manifest = Manifest.load(Path(manifest))
    return run_evaluation(model, manifest, mode).accuracy
