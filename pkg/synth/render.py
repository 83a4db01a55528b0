"""
Word rendering and degradations.

Chain order: glyph layout -> sinusoidal curvature -> rotation -> perspective
skew -> gaussian noise -> gaussian blur -> clip to [0, 1]. Ink is bright (1)
on a dark (0) background. Every stage is skipped when its parameter is 0.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from core.charset import derive_labels, normalize_word
from synth.glyphs import DEFAULT_ATLAS, FontAtlas

CANVAS_HEIGHT = 32
CANVAS_WIDTH = 128
GLYPH_SCALE = 3
GLYPH_SPACING = 1
MARGIN = 2


@dataclass(frozen=True)
class SampleSpec:
    word: str
    curvature_amplitude: float = 0.0
    rotation: float = 0.0
    perspective_skew: float = 0.0
    noise_sigma: float = 0.0
    blur_radius: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.perspective_skew <= 1.0:
            raise ValueError(f"perspective_skew {self.perspective_skew} outside [0, 1]")
        if self.noise_sigma < 0 or self.blur_radius < 0:
            raise ValueError("noise_sigma and blur_radius must be non-negative")


@dataclass(frozen=True)
class DegradationRanges:
    """Upper bounds; curvature and rotation draw in [-max, max], the rest in [0, max]."""
    curvature: float = 0.0
    rotation: float = 0.0
    perspective: float = 0.0
    noise: float = 0.0
    blur: float = 0.0

    def sample(self, word: str, rng: np.random.Generator) -> SampleSpec:
        return SampleSpec(
            word=word,
            curvature_amplitude=float(rng.uniform(-self.curvature, self.curvature)),
            rotation=float(rng.uniform(-self.rotation, self.rotation)),
            perspective_skew=float(rng.uniform(0.0, self.perspective)),
            noise_sigma=float(rng.uniform(0.0, self.noise)),
            blur_radius=float(rng.uniform(0.0, self.blur)),
            seed=int(rng.integers(0, 2**31 - 1)),
        )


class Regime(str, Enum):
    NONE = "none"
    MILD = "mild"
    NORMAL = "normal"
    ORIENTED = "oriented"
    CURVED = "curved"
    NOISY = "noisy"


REGIME_RANGES = {
    Regime.NONE: DegradationRanges(),
    Regime.MILD: DegradationRanges(curvature=1.5, rotation=3.0, perspective=0.1, noise=0.03, blur=0.5),
    Regime.NORMAL: DegradationRanges(curvature=1.0, rotation=4.0, perspective=0.15, noise=0.05, blur=0.7),
    Regime.ORIENTED: DegradationRanges(curvature=1.0, rotation=12.0, perspective=0.3, noise=0.05, blur=0.7),
    Regime.CURVED: DegradationRanges(curvature=5.0, rotation=5.0, perspective=0.2, noise=0.05, blur=0.7),
    Regime.NOISY: DegradationRanges(curvature=2.0, rotation=5.0, perspective=0.2, noise=0.15, blur=1.0),
}


# ==================== LAYOUT ====================

def layout_word(
    word: str,
    atlas: FontAtlas = DEFAULT_ATLAS,
    height: int = CANVAS_HEIGHT,
    width: int = CANVAS_WIDTH,
) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    Place glyphs left to right, centred on the canvas.

    Words wider than the canvas are squeezed horizontally.

    Returns:
        (canvas H×W float64, per-character [start, end) column spans)
    """
    text = normalize_word(word)
    gw, gh = atlas.glyph_width, atlas.glyph_height
    cell = gw + GLYPH_SPACING
    strip = np.zeros((gh, len(text) * cell - GLYPH_SPACING), dtype=np.float64)
    for i, ch in enumerate(text):
        strip[:, i * cell:i * cell + gw] = atlas.glyph(ch)

    scale = min(GLYPH_SCALE, max(1, (height - 2 * MARGIN) // gh))
    strip = np.kron(strip, np.ones((scale, scale)))
    natural_width = strip.shape[1]
    available = width - 2 * MARGIN
    if natural_width > available:
        strip = np.clip(ndimage.zoom(strip, (1.0, available / natural_width), order=1), 0.0, 1.0)
    ratio = strip.shape[1] / natural_width

    top = (height - strip.shape[0]) // 2
    left = (width - strip.shape[1]) // 2
    canvas = np.zeros((height, width), dtype=np.float64)
    canvas[top:top + strip.shape[0], left:left + strip.shape[1]] = strip

    spans = [
        (left + int(np.floor(i * cell * scale * ratio)), left + int(np.ceil((i * cell + gw) * scale * ratio)))
        for i in range(len(text))
    ]
    return canvas, spans


# ==================== DEGRADATIONS ====================

def curvature_displacement(width: int, amplitude: float) -> np.ndarray:
    """Vertical shift of column x: amplitude·sin(2πx / width)."""
    return amplitude * np.sin(2.0 * np.pi * np.arange(width) / width)


def _curve(image: np.ndarray, amplitude: float) -> np.ndarray:
    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = curvature_displacement(w, amplitude)
    return ndimage.map_coordinates(image, [yy - dy[None, :], xx], order=1, mode="constant", cval=0.0)


def _rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    return ndimage.rotate(image, degrees, reshape=False, order=1, mode="constant", cval=0.0)


def _perspective(image: np.ndarray, skew: float) -> np.ndarray:
    # Right edge shrinks vertically towards the centre row
    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy = (h - 1) / 2.0
    scale = 1.0 - 0.5 * skew * xx / max(w - 1, 1)
    return ndimage.map_coordinates(image, [cy + (yy - cy) / scale, xx], order=1, mode="constant", cval=0.0)


def augment_image(image: np.ndarray, spec: SampleSpec) -> np.ndarray:
    """Apply ``spec``'s degradations; output keeps the input shape and lies in [0, 1]."""
    out = np.asarray(image, dtype=np.float64)
    if spec.curvature_amplitude:
        out = _curve(out, spec.curvature_amplitude)
    if spec.rotation:
        out = _rotate(out, spec.rotation)
    if spec.perspective_skew:
        out = _perspective(out, spec.perspective_skew)
    if spec.noise_sigma:
        rng = np.random.default_rng(spec.seed)
        out = out + rng.normal(0.0, spec.noise_sigma, size=out.shape)
    if spec.blur_radius:
        out = ndimage.gaussian_filter(out, sigma=spec.blur_radius)
    return np.clip(out, 0.0, 1.0)


def render_word(spec: SampleSpec, atlas: FontAtlas = DEFAULT_ATLAS) -> np.ndarray:
    """
    Deterministic 32×128 rendering of ``spec``.

    Raises:
        WordTooLong / EmptyWord: from label derivation.
    """
    derive_labels(spec.word)
    canvas, _ = layout_word(spec.word, atlas)
    return augment_image(canvas, spec)

