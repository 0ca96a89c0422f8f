"""Integer <-> English number-word lexicon used by copy realization.

Word forms are single tokens (compounds hyphenated, e.g. "twenty-one") so a
copy step can always emit a value in one token.  The lexicon covers 0..100
plus multiples of ten up to 200; values outside it are rendered as digits
regardless of the requested style.
"""

from __future__ import annotations

import logging
from typing import Optional

logger = logging.getLogger(__name__)

_ONES = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen"
).split()
_TENS = "twenty thirty forty fifty sixty seventy eighty ninety".split()


def _compose(value: int) -> str:
    if value < 20:
        return _ONES[value]
    if value < 100:
        tens, ones = divmod(value, 10)
        word = _TENS[tens - 2]
        return word if ones == 0 else f"{word}-{_ONES[ones]}"
    if value == 100:
        return "one-hundred"
    if value == 200:
        return "two-hundred"
    return f"one-hundred-{_TENS[(value - 100) // 10 - 2]}"


WORD_FOR_VALUE: dict[int, str] = {
    v: _compose(v) for v in [*range(0, 101), *range(110, 201, 10)]
}
VALUE_FOR_WORD: dict[str, int] = {w: v for v, w in WORD_FOR_VALUE.items()}


def number_to_word(value: int) -> Optional[str]:
    """Single-token word form, or None when the value is out of range."""
    return WORD_FOR_VALUE.get(value)


def parse_number_word(token: str) -> Optional[int]:
    """Inverse of number_to_word; None for anything that is not a known word."""
    return VALUE_FOR_WORD.get(token.lower())


def render_number(value: int, as_word: bool) -> str:
    """Render an integer as digits (as_word=False) or as an English word.

    Values without a single-token word form fall back to digits.
    """
    if not as_word:
        return str(value)
    word = number_to_word(value)
    if word is None:
        logger.warning("value %d has no word form; rendering digits", value)
        return str(value)
    return word
