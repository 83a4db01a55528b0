"""
Character and position alphabets, plus the pure label transformations.

* ``CharSet``: 36 symbols (0-9, a-z) and the "not a character" class (36),
  which doubles as the CTC blank.
* ``PositionSet``: N in-word positions and the "not belongs to word" class (N).
"""
import re
import string
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from core.exceptions import EmptyWord, UnknownSymbol, WordTooLong
from core.logger import get_logger

logger = get_logger()

NULL_SYMBOL = "-"
_NON_ALNUM = re.compile(r"[^0-9a-z]")


@dataclass(frozen=True)
class CharSet:
    chars: Tuple[str, ...] = tuple(string.digits + string.ascii_lowercase)
    null_char_index: int = 36

    def __post_init__(self):
        if len(self.chars) != self.null_char_index or len(set(self.chars)) != len(self.chars):
            raise ValueError("CharSet needs distinct symbols followed by the null index")

    @property
    def size(self) -> int:
        return len(self.chars) + 1

    @property
    def blank(self) -> int:
        return self.null_char_index

    def symbol(self, index: int) -> str:
        if index == self.null_char_index:
            return NULL_SYMBOL
        return self.chars[index]


@dataclass(frozen=True)
class PositionSet:
    N: int = 25

    @property
    def null_pos_index(self) -> int:
        return self.N

    @property
    def size(self) -> int:
        return self.N + 1

    @property
    def max_word_length(self) -> int:
        return self.N - 2


@dataclass(frozen=True)
class LabelSet:
    """Ground truth for one image: N (char, position) slots."""
    char_classes: Tuple[int, ...]
    pos_classes: Tuple[int, ...]
    word: str
    # Transcription before truncation (equals ``word`` unless truncated)
    full_word: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.char_classes)


DEFAULT_CHARSET = CharSet()
DEFAULT_POSITIONS = PositionSet()


def normalize_word(word: str) -> str:
    """Lowercase, then drop everything outside [0-9a-z]."""
    return _NON_ALNUM.sub("", word.lower())


def char_index(symbol: str, cs: CharSet = DEFAULT_CHARSET) -> int:
    if symbol == NULL_SYMBOL:
        return cs.null_char_index
    if len(symbol) != 1:
        raise UnknownSymbol(f"Expected one character, got {symbol!r}")
    lowered = symbol.lower()
    try:
        return cs.chars.index(lowered)
    except ValueError:
        raise UnknownSymbol(f"Symbol {symbol!r} is not in the alphabet") from None


def min_ctc_slots(seq: Sequence) -> int:
    """Shortest CTC path for ``seq``: one slot per label plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(seq, seq[1:]) if a == b)
    return len(seq) + repeats


def _trainable_prefix(text: str, ps: PositionSet) -> str:
    end = min(len(text), ps.max_word_length)
    while end > 1 and min_ctc_slots(text[:end]) > ps.N:
        end -= 1
    return text[:end]


def check_ctc_fit(labels: LabelSet, ps: PositionSet = DEFAULT_POSITIONS) -> None:
    """
    Raises:
        WordTooLong: the word has no CTC path over N slots (each repeated
            letter pair needs a blank between them).
    """
    needed = min_ctc_slots(labels.word)
    if needed > ps.N:
        raise WordTooLong(f"{labels.word!r} needs {needed} CTC slots; N={ps.N} has {ps.N}")


def derive_labels(
    word: str,
    cs: CharSet = DEFAULT_CHARSET,
    ps: PositionSet = DEFAULT_POSITIONS,
    truncate: bool = False,
) -> LabelSet:
    """
    Build the N-slot ground truth of a transcription.

    Slot i < len(word) holds (char_index(word[i]), i); the rest hold the null pair.
    With ``truncate`` the word is cut to its longest prefix that has at most
    N-2 characters and fits CTC over N slots.

    Raises:
        EmptyWord: normalization leaves nothing.
        WordTooLong: more than N-2 characters (unless ``truncate``).
    """
    full = normalize_word(word)
    if not full:
        raise EmptyWord(f"Transcription {word!r} has no alphanumeric characters")
    normalized = full
    if truncate:
        normalized = _trainable_prefix(full, ps)
        if normalized != full:
            logger.warning(f"✂️ Truncated '{full}' to '{normalized}' for N={ps.N}")
    elif len(full) > ps.max_word_length:
        raise WordTooLong(f"{full!r} has {len(full)} characters; at most {ps.max_word_length} fit N={ps.N}")

    length = len(normalized)
    pad = ps.N - length
    chars = tuple(char_index(c, cs) for c in normalized) + (cs.null_char_index,) * pad
    positions = tuple(range(length)) + (ps.null_pos_index,) * pad
    return LabelSet(char_classes=chars, pos_classes=positions, word=normalized, full_word=full)


def labels_to_word(labels: LabelSet, cs: CharSet = DEFAULT_CHARSET) -> str:
    """Recover the word by sorting non-null slots by position class."""
    slots = [
        (pos, char)
        for char, pos in zip(labels.char_classes, labels.pos_classes)
        if char != cs.null_char_index
    ]
    return "".join(cs.symbol(char) for _, char in sorted(slots))


def ctc_collapse(seq: Sequence[int], blank: int) -> List[int]:
    """CTC map B: merge adjacent duplicates, then drop blanks."""
    out: List[int] = []
    prev = None
    for token in seq:
        if token != prev and token != blank:
            out.append(token)
        prev = token
    return out


def indices_to_word(indices: Sequence[int], cs: CharSet = DEFAULT_CHARSET) -> str:
    return "".join(cs.symbol(i) for i in indices if i != cs.null_char_index)
