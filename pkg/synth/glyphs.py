"""Embedded 5×7 bitmap font for the 36-symbol alphabet."""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from core.charset import DEFAULT_CHARSET, CharSet

GLYPH_ROWS: Dict[str, Tuple[str, ...]] = {
    "0": (" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "),
    "1": ("  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "),
    "2": (" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"),
    "3": ("#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "),
    "4": ("   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "),
    "5": ("#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "),
    "6": ("  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "),
    "7": ("#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "),
    "8": (" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "),
    "9": (" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "),
    "a": (" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"),
    "b": ("#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "),
    "c": (" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "),
    "d": ("###  ", "#  # ", "#   #", "#   #", "#   #", "#  # ", "###  "),
    "e": ("#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"),
    "f": ("#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "),
    "g": (" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"),
    "h": ("#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"),
    "i": (" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "),
    "j": ("  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "),
    "k": ("#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"),
    "l": ("#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"),
    "m": ("#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"),
    "n": ("#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"),
    "o": (" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "),
    "p": ("#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "),
    "q": (" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"),
    "r": ("#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"),
    "s": (" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "),
    "t": ("#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "),
    "u": ("#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "),
    "v": ("#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "),
    "w": ("#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "),
    "x": ("#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"),
    "y": ("#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "),
    "z": ("#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"),
}


def _bitmap(rows: Tuple[str, ...]) -> np.ndarray:
    return np.array([[ch == "#" for ch in row] for row in rows], dtype=np.uint8)


@dataclass(frozen=True)
class FontAtlas:
    glyphs: Mapping[str, np.ndarray] = field(
        default_factory=lambda: {s: _bitmap(rows) for s, rows in GLYPH_ROWS.items()}
    )
    charset: CharSet = DEFAULT_CHARSET

    def __post_init__(self):
        missing = [s for s in self.charset.chars if s not in self.glyphs]
        if missing:
            raise ValueError(f"Atlas has no glyph for {missing}")
        shapes = {g.shape for g in self.glyphs.values()}
        if len(shapes) != 1:
            raise ValueError(f"Glyphs differ in size: {shapes}")

    @property
    def glyph_height(self) -> int:
        return next(iter(self.glyphs.values())).shape[0]

    @property
    def glyph_width(self) -> int:
        return next(iter(self.glyphs.values())).shape[1]

    def glyph(self, symbol: str) -> np.ndarray:
        return self.glyphs[symbol.lower()]


DEFAULT_ATLAS = FontAtlas()
