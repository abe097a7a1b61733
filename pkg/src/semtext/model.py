"""
The assembled network (CNN encoder -> Bi-LSTM -> CRF) and block featurization.
"""
from __future__ import annotations
from pathlib import Path
from typing import Literal, Optional, Sequence
import logging

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from torch import Tensor, nn

from .embedding import (
    DEFAULT_BUCKETS, DEFAULT_DIM, DEFAULT_SEED, MAX_N, MIN_N,
    DimensionError, EmbeddingStore, embed_pages, load_embeddings,
)
from .encoder import DEFAULT_FILTER_COUNTS, DEFAULT_KERNEL_WIDTHS, ConvFilterBank
from .labeler import BiLstm, CrfParams, Label, marginals, path_score, log_partition, viterbi, LengthMismatch
from .lexicalizer import DEFAULT_WORDS, FEATURE_MAPS, Lexicalizer
from .segmenter import TextBlock

logger = logging.getLogger("semtext.model")

Precision = Literal["float32", "float64"]
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class ModelConfig(BaseModel):
    """Everything inference needs; stored in the model file header."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    embed_dim: int = DEFAULT_DIM
    n: int = DEFAULT_WORDS
    m: int = 85
    kernel_widths: tuple[int, ...] = DEFAULT_KERNEL_WIDTHS
    filter_counts: tuple[int, ...] = DEFAULT_FILTER_COUNTS
    hidden_size: int = 512
    feature_maps: tuple[str, ...] = FEATURE_MAPS
    conv_relu: bool = False
    precision: Precision = "float64"
    include_ids: bool = False
    embeddings: Optional[str] = None
    subword_buckets: int = DEFAULT_BUCKETS
    subword_seed: int = DEFAULT_SEED
    subword_min_n: int = MIN_N
    subword_max_n: int = MAX_N

    @field_validator("embed_dim", "n", "m", "hidden_size", "subword_buckets", "subword_min_n", "subword_max_n")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v

    @field_validator("kernel_widths", "filter_counts")
    @classmethod
    def _positive_items(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a non-empty list of positive integers")
        return v

    @field_validator("feature_maps")
    @classmethod
    def _known_maps(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if not v:
            raise ValueError("at least one feature map is required")
        unknown = [name for name in v if name not in FEATURE_MAPS]
        if unknown:
            raise ValueError(f"unknown feature maps {unknown}; choose from {list(FEATURE_MAPS)}")
        if len(set(v)) != len(v):
            raise ValueError("feature maps must not repeat")
        return v

    @model_validator(mode="after")
    def _shapes(self) -> "ModelConfig":
        if len(self.kernel_widths) != len(self.filter_counts):
            raise ValueError("kernel_widths and filter_counts must have the same length")
        if self.subword_min_n > self.subword_max_n:
            raise ValueError("subword_min_n must not exceed subword_max_n")
        return self

    @property
    def dtype(self) -> torch.dtype:
        return _DTYPES[self.precision]


class SemTextModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = ConvFilterBank(
            config.embed_dim, config.n, config.kernel_widths, config.filter_counts,
            config.feature_maps, relu=config.conv_relu,
        )
        self.bilstm = BiLstm(self.encoder.output_size, config.hidden_size)
        self.crf = CrfParams(config.hidden_size)
        self.to(config.dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.config.dtype

    def states(self, tensors: Tensor) -> Tensor:
        """(m, maps, n, k) block tensors -> (m, 2h) Bi-LSTM states."""
        return self.bilstm(self.encoder(torch.as_tensor(tensors, dtype=self.dtype)))

    def emissions(self, tensors: Tensor) -> Tensor:
        return self.crf.emissions(self.states(tensors))

    def nll(self, tensors: Tensor, gold: Sequence[int]) -> Tensor:
        if len(gold) != len(tensors):
            raise LengthMismatch(f"{len(gold)} gold labels for {len(tensors)} blocks")
        e = self.emissions(tensors)
        return log_partition(e, *self.crf.potentials()) - path_score(e, gold, *self.crf.potentials())

    def decode(self, tensors: Tensor) -> tuple[list[Label], list[float]]:
        """Viterbi labels and the MAIN posterior of every block."""
        with torch.no_grad():
            e = self.emissions(tensors)
            labels, _ = viterbi(e, *self.crf.potentials())
            main = marginals(e, *self.crf.potentials())[:, Label.MAIN]
        return labels, [float(x) for x in main]


def build_model(config: ModelConfig, seed: int = 0) -> SemTextModel:
    torch.manual_seed(seed)
    model = SemTextModel(config)
    logger.info("Built model: %d parameters, encoder output %d, hidden %d",
                sum(p.numel() for p in model.parameters()), model.encoder.output_size, config.hidden_size)
    return model


def build_store(config: ModelConfig) -> EmbeddingStore:
    subword = dict(
        buckets=config.subword_buckets, seed=config.subword_seed,
        min_n=config.subword_min_n, max_n=config.subword_max_n,
    )
    if config.embeddings is None:
        return EmbeddingStore.empty(config.embed_dim, **subword)
    store = load_embeddings(Path(config.embeddings), default_dim=config.embed_dim, **subword)
    if store.dim != config.embed_dim:
        raise DimensionError(f"embeddings have dimension {store.dim}, model expects {config.embed_dim}")
    return store


def build_lexicalizer(config: ModelConfig, store: EmbeddingStore, data_dir: Optional[Path] = None) -> Lexicalizer:
    # an empty store would mark every class name opaque
    return Lexicalizer.from_data(n=config.n, data_dir=data_dir, vocabulary=store if len(store) else None)


def featurize(
    blocks: Sequence[TextBlock],
    lexicalizer: Lexicalizer,
    store: EmbeddingStore,
    config: ModelConfig,
) -> Tensor:
    """(blocks, maps, n, k) input tensor for a block sequence."""
    words = [lexicalizer.lexicalize_block(b) for b in blocks]
    array = embed_pages(store, words, config.n, config.feature_maps)
    return torch.from_numpy(np.ascontiguousarray(array)).to(config.dtype)
