"""Turn labeled word examples into id sequences the encoder accepts.

An instruction, when present, is followed by one SEP token; the boundary
index of the first original word is therefore M+1 (or 0 with no
instruction). Inputs longer than the model's sequence limit are cut into
non-overlapping windows of original words, each window re-prefixed with
the instruction and SEP, so label/probability positions always line up
with original words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..align import LabeledExample
from ..errors import InstructionTooLong, LengthMismatch
from .vocab import SEP_ID, Vocab


@dataclass(frozen=True)
class TokenizedExample:
    """Encoder input ids with labels for the original-word positions."""

    token_ids: tuple[int, ...]
    labels: tuple[int, ...]
    boundary: int

    def __post_init__(self):
        if self.boundary + len(self.labels) != len(self.token_ids):
            raise LengthMismatch(
                f"boundary {self.boundary} + {len(self.labels)} labels "
                f"!= {len(self.token_ids)} tokens"
            )


def tokenize_words(
    vocab: Vocab,
    instruction_words: Sequence[str],
    original_words: Sequence[str],
    labels: Sequence[int],
) -> TokenizedExample:
    """Encode one window: [instruction ids, SEP] + original ids."""
    if len(original_words) != len(labels):
        raise LengthMismatch("one label per original word required")
    ids: list[int] = []
    if instruction_words:
        ids.extend(vocab.encode_words(instruction_words))
        ids.append(SEP_ID)
    boundary = len(ids)
    ids.extend(vocab.encode_words(original_words))
    return TokenizedExample(
        token_ids=tuple(ids), labels=tuple(labels), boundary=boundary
    )


def window_example(
    vocab: Vocab,
    example: LabeledExample,
    max_seq_len: int,
    include_instruction: bool = True,
) -> list[TokenizedExample]:
    """Split one example into windows that each fit max_seq_len.

    Every window carries the full instruction prefix; the original words
    are partitioned so concatenating the windows' label positions gives
    back the example's original words in order.
    """
    instr = example.words[: example.boundary_m] if include_instruction else ()
    prefix_len = len(instr) + 1 if instr else 0
    if prefix_len >= max_seq_len:
        raise InstructionTooLong(
            f"{len(instr)}-word instruction leaves no room in {max_seq_len}"
        )
    capacity = max_seq_len - prefix_len
    originals = example.words[example.boundary_m :]
    labels = example.labels[example.boundary_m :]
    windows = []
    for start in range(0, len(originals), capacity):
        windows.append(
            tokenize_words(
                vocab,
                instr,
                originals[start : start + capacity],
                labels[start : start + capacity],
            )
        )
    return windows
