"""
Index words: products of a generator list, written as (index, sign) pairs.

Private keys, attack candidates and affine words all use this form; the
index is 0-based internally and printed 1-based (``g1 g3^-1``).
"""

import re
from typing import Iterable, List, Sequence, Tuple

from .errors import WordSyntaxError


IndexLetter = Tuple[int, int]
IndexWord = Tuple[IndexLetter, ...]

_TOKEN = re.compile(r"\s*([A-Za-z]+)(\d+)\s*(\^-1|⁻¹|')?\s*")


def reduce_index_word(letters: Iterable[IndexLetter]) -> IndexWord:
    """Free reduction: cancel adjacent (i, +1)(i, -1) pairs."""
    stack: List[IndexLetter] = []
    for index, sign in letters:
        if sign not in (1, -1):
            raise WordSyntaxError(f"sign must be +1 or -1, got {sign}")
        if stack and stack[-1] == (index, -sign):
            stack.pop()
        else:
            stack.append((index, sign))
    return tuple(stack)


def invert_index_word(word: Sequence[IndexLetter]) -> IndexWord:
    return tuple((index, -sign) for index, sign in reversed(word))


def has_adjacent_cancellation(word: Sequence[IndexLetter]) -> bool:
    return any(word[i][0] == word[i + 1][0] and word[i][1] == -word[i + 1][1] for i in range(len(word) - 1))


def format_index_word(word: Sequence[IndexLetter], prefix: str = "g") -> str:
    if not word:
        return "e"
    return " ".join(f"{prefix}{index + 1}" + ("^-1" if sign < 0 else "") for index, sign in word)


def parse_index_word(text: str, count: int) -> IndexWord:
    """Parse ``"g1 g2^-1 g1"`` (any letter prefix) over ``count`` generators."""
    source = text.strip()
    if source in ("", "e", "ε"):
        return ()
    letters: List[IndexLetter] = []
    pos = 0
    while pos < len(source):
        match = _TOKEN.match(source, pos)
        if not match or match.end() == pos:
            raise WordSyntaxError(f"cannot parse index word at position {pos}: {text!r}")
        index = int(match.group(2)) - 1
        if not 0 <= index < count:
            raise WordSyntaxError(f"generator index {index + 1} outside 1..{count}")
        letters.append((index, -1 if match.group(3) else 1))
        pos = match.end()
    return reduce_index_word(letters)
