from pathlib import Path
from typing import List, Sequence

import numpy as np
import torch
from PIL import Image
from torch import Tensor

from core.charset import DEFAULT_CHARSET, CharSet
from core.exceptions import IOFailure
from core.logger import get_logger

logger = get_logger()


def save_grayscale_png(image: np.ndarray, path: Path) -> None:
    """[0, 1] float image -> 8-bit grayscale PNG."""
    pixels = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(pixels).save(path, format="PNG")
    except OSError as e:
        logger.error(f"❌ Could not write {path}: {e}")
        raise IOFailure(f"Could not write {path}: {e}", path) from e


def load_grayscale(path: Path, height: int = 32, width: int = 128) -> np.ndarray:
    """Read any PIL-readable image as H×W float64 in [0, 1], resized to the canvas if needed."""
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            if gray.size != (width, height):
                gray = gray.resize((width, height), Image.BILINEAR)
            return np.asarray(gray, dtype=np.float64) / 255.0
    except OSError as e:
        logger.error(f"❌ Could not read {path}: {e}")
        raise IOFailure(f"Could not read {path}: {e}", path) from e


def to_model_input(image: np.ndarray, dtype: torch.dtype = torch.float32) -> Tensor:
    """H×W grayscale -> 3×H×W tensor (channel-replicated)."""
    gray = torch.as_tensor(np.asarray(image), dtype=dtype)
    return gray.unsqueeze(0).expand(3, -1, -1).contiguous()


# ==================== HEAT-MAPS ====================

def heatmap_filename(query: int, char_class: int, pos_class: int, cs: CharSet = DEFAULT_CHARSET) -> str:
    return f"attn_q{query}_{cs.symbol(char_class)}({pos_class}).png"


def export_attention_maps(
    maps: Tensor,
    char_classes: Sequence[int],
    pos_classes: Sequence[int],
    out_dir: Path,
    cs: CharSet = DEFAULT_CHARSET,
) -> List[Path]:
    """
    Write one 8-bit PNG per query, each map scaled so its maximum is 255.

    Args:
        maps: N×H0×W0 (already upsampled to image size)
    """
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOFailure(f"Cannot create {out_dir}: {e}", out_dir) from e

    written = []
    for q, heat in enumerate(maps.detach().double().cpu().numpy()):
        peak = heat.max()
        scaled = heat / peak if peak > 0 else heat
        path = out_dir / heatmap_filename(q, char_classes[q], pos_classes[q], cs)
        save_grayscale_png(scaled, path)
        written.append(path)
    logger.info(f"🗺️ Wrote {len(written)} attention maps to {out_dir}")
    return written
