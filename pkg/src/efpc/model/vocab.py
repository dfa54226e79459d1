"""Word-level vocabulary with reserved padding/unknown/separator ids.

One id per normalized word; no subword pieces. Ids 0-2 are reserved and
never reassigned. Regular words get ids from 3 upward in order of
descending frequency, ties broken lexicographically, so the same corpus
always produces the same table.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..align import LabeledExample
from ..errors import EmptyDataset
from ..text_core import normalize_word

PAD_ID = 0
UNK_ID = 1
SEP_ID = 2
_NUM_RESERVED = 3


@dataclass(frozen=True)
class Vocab:
    """Injective map from normalized words to ids ≥ 3."""

    word_to_id: dict[str, int]

    @property
    def size(self) -> int:
        return _NUM_RESERVED + len(self.word_to_id)

    @property
    def words(self) -> list[str]:
        """Words ordered by id, for serialization."""
        return sorted(self.word_to_id, key=self.word_to_id.__getitem__)

    def encode_word(self, word: str) -> int:
        key = normalize_word(word)
        if not key:
            return UNK_ID
        return self.word_to_id.get(key, UNK_ID)

    def encode_words(self, words: Sequence[str]) -> list[int]:
        return [self.encode_word(w) for w in words]


def vocab_from_word_list(words: Sequence[str]) -> Vocab:
    """Rebuild a vocabulary from its serialized id-ordered word list."""
    return Vocab(word_to_id={w: _NUM_RESERVED + i for i, w in enumerate(words)})


def vocab_from_words(words: Iterable[str]) -> Vocab:
    """Assign ids by (frequency desc, word asc) over normalized forms."""
    counts = Counter()
    for word in words:
        key = normalize_word(word)
        if key:
            counts[key] += 1
    ordered = sorted(counts, key=lambda w: (-counts[w], w))
    return Vocab(word_to_id={w: _NUM_RESERVED + i for i, w in enumerate(ordered)})


def build_vocab(dataset: Sequence[LabeledExample]) -> Vocab:
    """Vocabulary over every word of every example, instructions included."""
    if not dataset:
        raise EmptyDataset("cannot build a vocabulary from no examples")
    return vocab_from_words(w for ex in dataset for w in ex.words)
