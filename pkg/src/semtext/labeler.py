"""
Bi-LSTM over block feature vectors and a two-label linear-chain CRF.

Path score: start[y_1] + sum_i e_i[y_i] + sum_i T[y_{i-1}, y_i] + stop[y_m].
"""
from __future__ import annotations
from enum import IntEnum
from typing import Sequence, Union
import logging

import numpy as np
import torch
from torch import Tensor, nn

from .encoder import ShapeError

logger = logging.getLogger("semtext.labeler")


class LengthMismatch(ValueError):
    """Raised when label and block sequences differ in length."""


class Label(IntEnum):
    BOILERPLATE = 0
    MAIN = 1

    @classmethod
    def parse(cls, value: Union[str, int, "Label"]) -> "Label":
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown label {value!r}; expected 'main' or 'boilerplate'") from None
        return cls(value)

    def __str__(self) -> str:
        return self.name.lower()


NUM_LABELS = len(Label)
LabelSequence = Sequence[Label]


class BiLstm(nn.Module):
    """Forward and backward LSTMs with independent weights, zero initial states."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.lstm = nn.LSTM(input_size, hidden_size, batch_first=True, bidirectional=True)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        h = self.hidden_size
        self.lstm.reset_parameters()  # uniform +-1/sqrt(h)
        with torch.no_grad():
            for suffix in ("l0", "l0_reverse"):
                # gate order is input, forget, cell, output
                getattr(self.lstm, f"bias_ih_{suffix}")[h:2 * h].fill_(1.0)
                getattr(self.lstm, f"bias_hh_{suffix}")[h:2 * h].zero_()

    def forward(self, xs: Tensor) -> Tensor:
        """(m, input) -> (m, 2h), or batched (B, m, input) -> (B, m, 2h)."""
        if xs.shape[-1] != self.input_size:
            raise ShapeError(f"expected block features of size {self.input_size}, got {xs.shape[-1]}")
        if xs.dim() == 2:
            if xs.shape[0] == 0:
                raise ShapeError("empty block sequence")
            return self.lstm(xs.unsqueeze(0))[0].squeeze(0)
        return self.lstm(xs)[0]


def bilstm_forward(params: BiLstm, xs: Union[Tensor, np.ndarray]) -> Tensor:
    p = params.lstm.weight_ih_l0
    return params(torch.as_tensor(xs, dtype=p.dtype))


class CrfParams(nn.Module):
    def __init__(self, hidden_size: int):
        super().__init__()
        self.emission = nn.Linear(2 * hidden_size, NUM_LABELS)
        # transitions[i, j]: score of moving from label i to label j
        self.transitions = nn.Parameter(torch.zeros(NUM_LABELS, NUM_LABELS))
        self.start = nn.Parameter(torch.zeros(NUM_LABELS))
        self.stop = nn.Parameter(torch.zeros(NUM_LABELS))

    def emissions(self, H: Tensor) -> Tensor:
        return self.emission(H)

    def potentials(self) -> tuple[Tensor, Tensor, Tensor]:
        return self.transitions, self.start, self.stop


# ---------------------------------------------------------------------------
# Chain algorithms over an (m, 2) emission matrix
# ---------------------------------------------------------------------------
def _forward_scores(emissions: Tensor, transitions: Tensor, start: Tensor) -> list[Tensor]:
    alpha = start + emissions[0]
    alphas = [alpha]
    for i in range(1, emissions.shape[0]):
        alpha = torch.logsumexp(alpha.unsqueeze(1) + transitions, dim=0) + emissions[i]
        alphas.append(alpha)
    return alphas


def log_partition(emissions: Tensor, transitions: Tensor, start: Tensor, stop: Tensor) -> Tensor:
    if emissions.shape[0] == 0:
        raise ShapeError("empty block sequence")
    return torch.logsumexp(_forward_scores(emissions, transitions, start)[-1] + stop, dim=0)


def path_score(emissions: Tensor, labels: Sequence[int], transitions: Tensor, start: Tensor, stop: Tensor) -> Tensor:
    if len(labels) != emissions.shape[0]:
        raise LengthMismatch(f"{len(labels)} labels for {emissions.shape[0]} blocks")
    y = torch.as_tensor([int(v) for v in labels], dtype=torch.long)
    score = start[y[0]] + stop[y[-1]] + emissions[torch.arange(len(y)), y].sum()
    if len(y) > 1:
        score = score + transitions[y[:-1], y[1:]].sum()
    return score


def viterbi(emissions, transitions, start, stop) -> tuple[list[Label], float]:
    """Best path; every argmax keeps the first (lower) label on ties."""
    e = np.asarray(torch.as_tensor(emissions).detach().cpu(), dtype=np.float64)
    T = np.asarray(torch.as_tensor(transitions).detach().cpu(), dtype=np.float64)
    s = np.asarray(torch.as_tensor(start).detach().cpu(), dtype=np.float64)
    p = np.asarray(torch.as_tensor(stop).detach().cpu(), dtype=np.float64)
    if e.shape[0] == 0:
        raise ShapeError("empty block sequence")

    score = s + e[0]
    backpointers = []
    for i in range(1, e.shape[0]):
        candidates = score[:, None] + T
        backpointers.append(candidates.argmax(axis=0))
        score = candidates.max(axis=0) + e[i]
    score = score + p

    best = int(score.argmax())
    path = [best]
    for bp in reversed(backpointers):
        path.append(int(bp[path[-1]]))
    path.reverse()
    return [Label(y) for y in path], float(score[best])


def marginals(emissions: Tensor, transitions: Tensor, start: Tensor, stop: Tensor) -> Tensor:
    """Per-position label posteriors by forward-backward, shape (m, 2)."""
    alphas = _forward_scores(emissions, transitions, start)
    log_z = torch.logsumexp(alphas[-1] + stop, dim=0)
    beta = stop
    betas = [beta]
    for i in range(emissions.shape[0] - 1, 0, -1):
        beta = torch.logsumexp(transitions + (emissions[i] + beta).unsqueeze(0), dim=1)
        betas.append(beta)
    betas.reverse()
    return torch.exp(torch.stack(alphas) + torch.stack(betas) - log_z)


# ---------------------------------------------------------------------------
# Operations over Bi-LSTM states
# ---------------------------------------------------------------------------
def crf_log_partition(crf: CrfParams, H: Tensor) -> Tensor:
    return log_partition(crf.emissions(H), *crf.potentials())


def viterbi_decode(crf: CrfParams, H: Tensor) -> tuple[list[Label], float]:
    with torch.no_grad():
        return viterbi(crf.emissions(H), *crf.potentials())


def sequence_nll(crf: CrfParams, H: Tensor, gold: Sequence[int]) -> Tensor:
    """log Z(H) - score(H, gold); non-negative up to rounding."""
    if len(gold) != H.shape[0]:
        raise LengthMismatch(f"{len(gold)} gold labels for {H.shape[0]} blocks")
    e = crf.emissions(H)
    return log_partition(e, *crf.potentials()) - path_score(e, gold, *crf.potentials())


def crf_marginals(crf: CrfParams, H: Tensor) -> Tensor:
    with torch.no_grad():
        return marginals(crf.emissions(H), *crf.potentials())
