"""The (config, vocab, params) triple that moves through the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..align import LabeledExample
from .config import ModelConfig
from .params import ModelParams, init_params
from .vocab import Vocab, build_vocab


@dataclass(frozen=True)
class Model:
    config: ModelConfig
    vocab: Vocab
    params: ModelParams

    def with_params(self, params: ModelParams) -> Model:
        return replace(self, params=params)


def new_model(
    dataset: Sequence[LabeledExample],
    config: ModelConfig | None = None,
    dtype=np.float32,
    **config_overrides,
) -> Model:
    """Fresh model whose vocabulary covers the dataset.

    With no explicit config, defaults are used and vocab_size is derived;
    overrides (embed_dim=..., seed=..., etc.) apply on top.
    """
    vocab = build_vocab(dataset)
    if config is None:
        config = ModelConfig(vocab_size=vocab.size, **config_overrides)
    return Model(config=config, vocab=vocab, params=init_params(config, dtype))
