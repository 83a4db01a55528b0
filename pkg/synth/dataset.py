"""
Dataset generation, the manifest file, and the torch ``Dataset`` over it.

A dataset directory holds ``manifest.txt`` and ``images/NNNNNN.png``. Each
sample's randomness derives from ``(seed, index)`` so generation is
order-independent and may fan out over worker processes.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import torch
from torch import Tensor
from torch.utils.data import Dataset

from config.settings import settings
from core.charset import (
    DEFAULT_CHARSET,
    DEFAULT_POSITIONS,
    LabelSet,
    PositionSet,
    check_ctc_fit,
    derive_labels,
    normalize_word,
)
from core.exceptions import EmptyDataset, EmptyWord, IOFailure, UnknownSymbol, WordTooLong
from core.logger import get_logger
from synth.render import DegradationRanges, SampleSpec, render_word
from utils.image_io import load_grayscale, save_grayscale_png, to_model_input

logger = get_logger()


# ==================== MANIFEST ====================

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    transcription: str


@dataclass
class Manifest:
    """``<relative-path>\\t<transcription>`` lines, paths relative to ``root``."""
    root: Path
    entries: List[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def file(self) -> Path:
        return self.root / settings.artifacts.MANIFEST

    @property
    def transcriptions(self) -> List[str]:
        return [e.transcription for e in self.entries]

    def image_path(self, index: int) -> Path:
        return self.root / self.entries[index].path

    def save(self) -> Path:
        lines = "".join(f"{e.path}\t{e.transcription}\n" for e in self.entries)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            with open(self.file, "w", encoding="utf-8", newline="\n") as f:
                f.write(lines)
        except OSError as e:
            logger.error(f"❌ Could not write manifest {self.file}: {e}")
            raise IOFailure(f"Could not write manifest {self.file}: {e}", self.file) from e
        return self.file

    @classmethod
    def load(cls, location: Path, check_paths: bool = True) -> "Manifest":
        """
        Read a manifest from a dataset directory or the manifest file itself.

        Raises:
            IOFailure: missing/unreadable manifest, malformed line or missing image.
        """
        location = Path(location)
        file = location / settings.artifacts.MANIFEST if location.is_dir() else location
        try:
            text = file.read_text(encoding="utf-8")
        except OSError as e:
            logger.error(f"❌ Could not read manifest {file}: {e}")
            raise IOFailure(f"Could not read manifest {file}: {e}", file) from e

        root = file.parent
        entries = []
        for number, line in enumerate(text.split("\n"), start=1):
            if not line:
                continue
            rel_path, sep, transcription = line.partition("\t")
            if not sep:
                raise IOFailure(f"{file}:{number}: expected '<path>\\t<transcription>'", file)
            if check_paths and not (root / rel_path).is_file():
                raise IOFailure(f"{file}:{number}: image {rel_path} does not exist", root / rel_path)
            entries.append(ManifestEntry(rel_path, transcription))
        logger.debug(f"📄 Loaded {len(entries)} manifest entries from {file}")
        return cls(root=root, entries=entries)


def load_vocab(path: Path) -> List[str]:
    """One word per line; blank lines and lines that normalize to nothing are dropped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IOFailure(f"Could not read vocabulary {path}: {e}", Path(path)) from e
    words = [line.strip() for line in lines if normalize_word(line)]
    if not words:
        raise EmptyDataset(f"Vocabulary {path} has no usable words")
    return words


# ==================== GENERATION ====================

def sample_specs(count: int, vocab: Sequence[str], ranges: DegradationRanges, seed: int) -> List[SampleSpec]:
    """Pure function of its arguments; sample i only depends on (seed, i)."""
    if not vocab:
        raise EmptyDataset("Vocabulary is empty")
    specs = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        word = vocab[int(rng.integers(0, len(vocab)))]
        specs.append(ranges.sample(word, rng))
    return specs


def _render_to(job: Tuple[SampleSpec, Path]) -> None:
    spec, path = job
    save_grayscale_png(render_word(spec), path)


def generate_dataset(
    count: int,
    vocab: Sequence[str],
    ranges: DegradationRanges,
    seed: int,
    out_dir: Path,
    workers: int = 0,
    positions: PositionSet = DEFAULT_POSITIONS,
) -> Manifest:
    """
    Render ``count`` word images into ``out_dir`` and write the manifest.

    Raises:
        IOFailure: ``out_dir`` is not writable.
        WordTooLong / EmptyWord: a vocabulary word has no valid label set or
            does not fit CTC over N slots.
    """
    out_dir = Path(out_dir)
    for word in set(vocab):
        check_ctc_fit(derive_labels(word, DEFAULT_CHARSET, positions), positions)

    image_dir = out_dir / settings.artifacts.IMAGES_DIR
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"❌ Cannot create {image_dir}: {e}")
        raise IOFailure(f"Cannot create {image_dir}: {e}", image_dir) from e

    specs = sample_specs(count, vocab, ranges, seed)
    rel_paths = [f"{settings.artifacts.IMAGES_DIR}/{i:06d}.png" for i in range(count)]
    jobs = [(spec, out_dir / rel) for spec, rel in zip(specs, rel_paths)]

    logger.info(f"🖼️ Rendering {count} images into {out_dir} (seed={seed}, workers={workers})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_render_to, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        for job in jobs:
            _render_to(job)

    manifest = Manifest(
        root=out_dir,
        entries=[ManifestEntry(rel, normalize_word(spec.word)) for rel, spec in zip(rel_paths, specs)],
    )
    manifest.save()
    logger.info(f"✅ Dataset ready: {manifest.file}")
    return manifest


# ==================== TORCH DATASET ====================

class WordImageDataset(Dataset):
    """(3×H×W image tensor, LabelSet) pairs read from a manifest."""

    def __init__(
        self,
        manifest: Manifest,
        positions: PositionSet = DEFAULT_POSITIONS,
        truncate: bool = False,
        dtype: torch.dtype = torch.float32,
        height: int = 32,
        width: int = 128,
    ):
        if len(manifest) == 0:
            raise EmptyDataset(f"Manifest under {manifest.root} has no entries")
        self.manifest = manifest
        self.dtype = dtype
        self.height = height
        self.width = width
        self.labels = [self._labels_for(i, positions, truncate) for i in range(len(manifest))]

    def _labels_for(self, index: int, positions: PositionSet, truncate: bool) -> LabelSet:
        entry = self.manifest.entries[index]
        try:
            labels = derive_labels(entry.transcription, DEFAULT_CHARSET, positions, truncate=truncate)
            check_ctc_fit(labels, positions)
        except (WordTooLong, EmptyWord, UnknownSymbol) as e:
            logger.error(f"❌ Unusable manifest entry {index} ({entry.path}): {e}")
            raise type(e)(f"{self.manifest.file} entry {index} ({entry.path}): {e}") from e
        return labels

    def __len__(self) -> int:
        return len(self.manifest)

    def __getitem__(self, index: int) -> Tuple[Tensor, LabelSet]:
        image = load_grayscale(self.manifest.image_path(index), self.height, self.width)
        return to_model_input(image, self.dtype), self.labels[index]


def collate_samples(batch: Sequence[Tuple[Tensor, LabelSet]]) -> Tuple[Tensor, List[LabelSet]]:
    images, labels = zip(*batch)
    return torch.stack(images), list(labels)
