"""
Depthwise 1-D CNN over a block's feature maps.

Each feature map (tags, classes, text) has its own filters; there is no
cross-map mixing. For every filter the valid convolution along the word axis
is max-pooled to one number, and the pooled values are flattened map by map,
width by width.
"""
from __future__ import annotations
from typing import Sequence, Union
import logging, math

import numpy as np
import torch
from torch import Tensor, nn
import torch.nn.functional as F

from .lexicalizer import FEATURE_MAPS

logger = logging.getLogger("semtext.encoder")

DEFAULT_KERNEL_WIDTHS = (3, 5, 7)
DEFAULT_FILTER_COUNTS = (128, 128, 256)


class ShapeError(ValueError):
    """Raised when tensor shapes do not fit the network."""


def conv_feature(M: Union[Tensor, np.ndarray], W: Union[Tensor, np.ndarray], b: Union[Tensor, float]) -> Tensor:
    """
    One filter over one n x k matrix: c_j = sum(W * M[j:j+v]) + b for j in 0..n-v.
    """
    M = torch.as_tensor(M)
    W = torch.as_tensor(W, dtype=M.dtype)
    if M.dim() != 2 or W.dim() != 2:
        raise ShapeError(f"expected 2-d matrix and filter, got {tuple(M.shape)} and {tuple(W.shape)}")
    n, k = M.shape
    v, width = W.shape
    if width != k:
        raise ShapeError(f"filter width {width} does not match embedding dimension {k}")
    if v > n:
        raise ShapeError(f"kernel height {v} exceeds {n} rows")
    windows = M.unfold(0, v, 1)  # (n-v+1, k, v)
    return torch.einsum("jkv,vk->j", windows, W) + b


class ConvFilterBank(nn.Module):
    def __init__(
        self,
        embed_dim: int,
        n: int,
        kernel_widths: Sequence[int] = DEFAULT_KERNEL_WIDTHS,
        filter_counts: Sequence[int] = DEFAULT_FILTER_COUNTS,
        feature_maps: Sequence[str] = FEATURE_MAPS,
        relu: bool = False,
    ):
        super().__init__()
        if len(kernel_widths) != len(filter_counts):
            raise ShapeError(f"{len(kernel_widths)} kernel widths but {len(filter_counts)} filter counts")
        usable = []
        for v, count in zip(kernel_widths, filter_counts):
            if v > n:
                logger.warning("Skipping kernel width %d: longer than %d words per string", v, n)
                continue
            usable.append((v, count))
        if not usable:
            raise ShapeError(f"no kernel width fits n={n}")

        self.embed_dim = embed_dim
        self.n = n
        self.feature_maps = tuple(feature_maps)
        self.widths = tuple(v for v, _ in usable)
        self.counts = tuple(c for _, c in usable)
        self.relu = relu
        self.convs = nn.ModuleList(
            nn.ModuleList(nn.Conv1d(embed_dim, count, v) for v, count in usable)
            for _ in self.feature_maps
        )
        self.reset_parameters()

    @property
    def filters_per_map(self) -> int:
        return sum(self.counts)

    @property
    def output_size(self) -> int:
        return len(self.feature_maps) * self.filters_per_map

    def flatten_order(self) -> list[str]:
        return [f"{name}:w{v}x{c}" for name in self.feature_maps for v, c in zip(self.widths, self.counts)]

    def reset_parameters(self) -> None:
        for convs in self.convs:
            for conv, v in zip(convs, self.widths):
                bound = math.sqrt(6.0 / (v * self.embed_dim + 1))
                nn.init.uniform_(conv.weight, -bound, bound)
                nn.init.zeros_(conv.bias)

    def forward(self, t: Tensor) -> Tensor:
        """(..., maps, n, k) -> (..., maps * filters)"""
        if t.dim() < 3 or t.shape[-3] != len(self.feature_maps) or t.shape[-1] != self.embed_dim:
            raise ShapeError(
                f"expected (..., {len(self.feature_maps)}, n, {self.embed_dim}) block tensor, got {tuple(t.shape)}"
            )
        if t.shape[-2] < max(self.widths):
            raise ShapeError(f"kernel height {max(self.widths)} exceeds {t.shape[-2]} rows")
        lead = t.shape[:-3]
        batch = t.reshape(-1, *t.shape[-3:])
        pooled = []
        for i, convs in enumerate(self.convs):
            x = batch[:, i].transpose(1, 2)  # (B, k, n)
            for conv in convs:
                c = conv(x)
                if self.relu:
                    c = F.relu(c)
                pooled.append(c.max(dim=2).values)
        return torch.cat(pooled, dim=1).reshape(*lead, -1)


def encode_block(bank: ConvFilterBank, t: Union[Tensor, np.ndarray]) -> Tensor:
    """Encode one (maps, n, k) block tensor into its flat feature vector."""
    p = next(bank.parameters())
    return bank(torch.as_tensor(t, dtype=p.dtype))
