"""Word segmentation, unit counting, and sentence-greedy chunking.

Every stage of the pipeline counts whitespace-delimited words. Using one
unit everywhere (budgets, labels, ratios) keeps the pipeline independent
of any particular subword tokenizer.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

_WORD_RE = re.compile(r"\S+")
_SENTENCE_END = (".", "!", "?")


@dataclass(frozen=True)
class WordSeq:
    """A text decomposed into words with byte offsets into the UTF-8 source.

    Offsets are strictly increasing and non-overlapping, and slicing the
    encoded source by ``offsets[i]`` reproduces ``words[i]`` exactly.
    """

    words: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]
    source_len: int

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class Chunk:
    """A contiguous run of words packed by :func:`chunk_document`.

    ``ends_with_period`` reports whether the final word ends a sentence;
    it is false for force-split pieces and for an unterminated document
    tail. ``span`` is the (byte_start, byte_end) range in the source.
    """

    text: str
    unit_count: int
    ends_with_period: bool
    span: tuple[int, int]


def split_words(text: str) -> WordSeq:
    """Split text into maximal runs of non-whitespace characters.

    Punctuation stays attached to its word. Empty or all-whitespace text
    yields an empty sequence.
    """
    words: list[str] = []
    offsets: list[tuple[int, int]] = []
    byte_pos = 0
    char_pos = 0
    for m in _WORD_RE.finditer(text):
        byte_pos += len(text[char_pos : m.start()].encode("utf-8"))
        word = m.group()
        nbytes = len(word.encode("utf-8"))
        words.append(word)
        offsets.append((byte_pos, byte_pos + nbytes))
        byte_pos += nbytes
        char_pos = m.end()
    byte_pos += len(text[char_pos:].encode("utf-8"))
    return WordSeq(tuple(words), tuple(offsets), byte_pos)


def count_units(seq: WordSeq) -> int:
    """Number of words in the sequence."""
    return len(seq.words)


def ends_sentence(word: str) -> bool:
    return word.endswith(_SENTENCE_END)


def sentence_ranges(words: tuple[str, ...] | list[str]) -> list[tuple[int, int]]:
    """[start, end) word-index ranges of sentences.

    A sentence ends at a word ending in '.', '!' or '?'; a trailing run
    without such a word forms a final unterminated sentence.
    """
    ranges: list[tuple[int, int]] = []
    start = 0
    for i, w in enumerate(words):
        if ends_sentence(w):
            ranges.append((start, i + 1))
            start = i + 1
    if start < len(words):
        ranges.append((start, len(words)))
    return ranges


def chunk_document(text: str, max_units: int) -> list[Chunk]:
    """Partition a document into chunks of at most ``max_units`` words.

    Whole sentences are packed greedily in order. A single sentence longer
    than ``max_units`` is force-split into consecutive ``max_units``-sized
    pieces, each emitted as its own chunk.
    """
    if max_units < 1:
        raise ValueError("max_units must be >= 1")
    seq = split_words(text)
    if not seq.words:
        return []
    encoded = text.encode("utf-8")

    ranges: list[tuple[int, int]] = []
    acc: tuple[int, int] | None = None
    for s, e in sentence_ranges(seq.words):
        n = e - s
        if n > max_units:
            if acc is not None:
                ranges.append(acc)
                acc = None
            for piece in range(s, e, max_units):
                ranges.append((piece, min(piece + max_units, e)))
        elif acc is None:
            acc = (s, e)
        elif (acc[1] - acc[0]) + n <= max_units:
            acc = (acc[0], e)
        else:
            ranges.append(acc)
            acc = (s, e)
    if acc is not None:
        ranges.append(acc)

    chunks = []
    for s, e in ranges:
        byte_start = seq.offsets[s][0]
        byte_end = seq.offsets[e - 1][1]
        chunks.append(
            Chunk(
                text=encoded[byte_start:byte_end].decode("utf-8"),
                unit_count=e - s,
                ends_with_period=ends_sentence(seq.words[e - 1]),
                span=(byte_start, byte_end),
            )
        )
    return chunks


def normalize_word(word: str) -> str:
    """Lowercase and strip leading/trailing Unicode punctuation.

    Used only for matching and vocabulary lookup, never for output text.
    An all-punctuation word normalizes to the empty string.
    """
    start, end = 0, len(word)
    while start < end and unicodedata.category(word[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(word[end - 1]).startswith("P"):
        end -= 1
    return word[start:end].lower()
