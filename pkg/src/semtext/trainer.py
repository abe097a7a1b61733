"""
Training: sequence splitting, mini-batch SGD with validation-F1 checkpointing,
and the binary model file.

Model file layout (little-endian):

    b"SEMT" | version <H | header length <I | JSON header
            | payload length <Q | tensor bytes | CRC32 of payload <I
"""
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union
import copy, json, logging, math, struct, zlib

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, field_validator
from torch import Tensor

from .embedding import EmbeddingStore
from .labeler import Label, LengthMismatch
from .lexicalizer import Lexicalizer
from .metrics import evaluate
from .model import ModelConfig, SemTextModel, build_model, featurize
from .segmenter import BlockSequence

logger = logging.getLogger("semtext.trainer")

MAGIC = b"SEMT"
FORMAT_VERSION = 1
_DTYPE_CODES = {torch.float32: "<f4", torch.float64: "<f8"}


class TrainingError(RuntimeError):
    """Base error for training runs."""

class EmptyCorpus(TrainingError):
    """Raised when there is nothing to train on."""

class DivergenceError(TrainingError):
    """Raised when the loss stops being finite."""


class ModelFileError(RuntimeError):
    """Base error for model files."""

class VersionError(ModelFileError):
    """Raised when the file's format version is not supported."""

class ChecksumError(ModelFileError):
    """Raised when the file is truncated or its payload is corrupt."""

class ModelNotFound(ModelFileError):
    """Raised when the model path does not exist."""


@dataclass(frozen=True)
class LabeledPage:
    blocks: BlockSequence
    labels: tuple[Label, ...]
    source_id: str = ""

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.blocks):
            raise LengthMismatch(f"page {self.source_id!r}: {len(self.labels)} labels for {len(self.blocks)} blocks")

    def __len__(self) -> int:
        return len(self.blocks)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = 50
    m: int = 85
    batch_size: int = 64
    learning_rate: float = 0.01
    epochs: int = 30
    seed: int = 7
    validation_split: float = 0.25
    momentum: float = 0.0
    clip_grad_norm: Optional[float] = None

    @field_validator("n", "m", "batch_size", "epochs")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v

    @field_validator("learning_rate", "momentum")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0 or not math.isfinite(v):
            raise ValueError("must be a finite non-negative number")
        return v

    @field_validator("validation_split")
    @classmethod
    def _open_unit(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("must be strictly between 0 and 1")
        return v

    @field_validator("clip_grad_norm")
    @classmethod
    def _positive_clip(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v


class EpochRecord(BaseModel):
    epoch: int
    loss: float
    f1: float
    precision: float
    recall: float


@dataclass
class TrainResult:
    model: SemTextModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def write_history(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps([r.model_dump() for r in self.history], indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------
def chunk_sizes(count: int, m: int) -> list[int]:
    """ceil(count/m) chunk sizes differing by at most one, larger chunks first."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if count <= 0:
        return []
    chunks = -(-count // m)
    size, extra = divmod(count, chunks)
    return [size + 1 if i < extra else size for i in range(chunks)]


def split_sequence(page: LabeledPage, m: int) -> list[LabeledPage]:
    out: list[LabeledPage] = []
    start = 0
    for i, size in enumerate(chunk_sizes(len(page), m)):
        end = start + size
        blocks = BlockSequence(page.blocks.blocks[start:end], page.blocks.source_id)
        out.append(LabeledPage(blocks, page.labels[start:end], f"{page.source_id}#{i}"))
        start = end
    return out


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------
@dataclass
class _Example:
    tensors: Tensor
    gold: tuple[Label, ...]


def _prepare(
    pages: Iterable[LabeledPage],
    m: int,
    lexicalizer: Lexicalizer,
    store: EmbeddingStore,
    config: ModelConfig,
) -> list[_Example]:
    return [
        _Example(featurize(chunk.blocks.blocks, lexicalizer, store, config), chunk.labels)
        for page in pages
        for chunk in split_sequence(page, m)
    ]


def _validate(model: SemTextModel, examples: Sequence[_Example]):
    model.eval()
    preds = [model.decode(ex.tensors)[0] for ex in examples]
    # pooled over all blocks: one pseudo-page
    pooled_pred = [y for p in preds for y in p]
    pooled_gold = [y for ex in examples for y in ex.gold]
    return evaluate([pooled_pred], [pooled_gold])


def train(
    corpus: Sequence[LabeledPage],
    config: TrainConfig,
    *,
    store: EmbeddingStore,
    lexicalizer: Lexicalizer,
    model_config: Optional[ModelConfig] = None,
    init_from: Optional[SemTextModel] = None,
) -> TrainResult:
    """
    Seeded shuffle, train/validation split, per-epoch SGD over batches of
    sub-sequences, and selection of the epoch with the highest validation F1
    (earliest on ties).
    """
    pages = [p for p in corpus if len(p)]
    if not pages:
        raise EmptyCorpus("corpus contains no labeled blocks")

    if init_from is not None:
        model = init_from
    elif model_config is not None:
        model = build_model(model_config, seed=config.seed)
    else:
        raise TrainingError("either model_config or init_from is required")
    mcfg = model.config
    if mcfg.n != config.n:
        raise TrainingError(f"model uses n={mcfg.n} words per string but training requests n={config.n}")
    if mcfg.embed_dim != store.dim:
        raise TrainingError(f"model expects {mcfg.embed_dim}-d embeddings, store has {store.dim}")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(pages))
    shuffled = [pages[i] for i in order]
    if len(shuffled) == 1:
        logger.warning("Single-page corpus: validating on the training page")
        train_pages, val_pages = shuffled, shuffled
    else:
        n_val = min(max(round(len(shuffled) * config.validation_split), 1), len(shuffled) - 1)
        val_pages, train_pages = shuffled[:n_val], shuffled[n_val:]
    logger.info("Training on %d pages, validating on %d", len(train_pages), len(val_pages))

    train_set = _prepare(train_pages, config.m, lexicalizer, store, mcfg)
    val_set = _prepare(val_pages, config.m, lexicalizer, store, mcfg)

    optimizer = torch.optim.SGD(model.parameters(), lr=config.learning_rate, momentum=config.momentum)
    result = TrainResult(model=model)
    best_f1 = -1.0
    best_state = copy.deepcopy(model.state_dict())

    for epoch in range(1, config.epochs + 1):
        model.train()
        perm = rng.permutation(len(train_set))
        total = 0.0
        for b, start in enumerate(range(0, len(perm), config.batch_size)):
            batch = [train_set[i] for i in perm[start:start + config.batch_size]]
            optimizer.zero_grad()
            loss = torch.stack([model.nll(ex.tensors, ex.gold) for ex in batch]).mean()
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"loss became {loss.item()} at epoch {epoch}, batch {b} "
                    f"(lr={config.learning_rate}, clip={config.clip_grad_norm})"
                )
            loss.backward()
            if config.clip_grad_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_grad_norm)
            optimizer.step()
            total += loss.item() * len(batch)

        report = _validate(model, val_set)
        record = EpochRecord(epoch=epoch, loss=total / len(train_set), f1=report.f1,
                             precision=report.precision, recall=report.recall)
        result.history.append(record)
        logger.info("Epoch %d: loss %.4f, validation P %.4f R %.4f F1 %.4f",
                    epoch, record.loss, record.precision, record.recall, record.f1)
        if record.f1 > best_f1:
            best_f1 = record.f1
            best_state = copy.deepcopy(model.state_dict())
            result.best_epoch = epoch

    model.load_state_dict(best_state)
    model.eval()
    logger.info("Selected epoch %d (validation F1 %.4f)", result.best_epoch, best_f1)
    return result


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------
def save_model(path: Union[str, Path], model: SemTextModel) -> None:
    manifest = []
    chunks = []
    offset = 0
    for name, tensor in model.state_dict().items():
        code = _DTYPE_CODES[tensor.dtype]
        data = tensor.detach().cpu().contiguous().numpy().astype(code).tobytes()
        manifest.append({"name": name, "shape": list(tensor.shape), "dtype": code,
                         "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = json.dumps({
        "format_version": FORMAT_VERSION,
        "config": model.config.model_dump(mode="json"),
        "flatten_order": model.encoder.flatten_order(),
        "labels": [str(label) for label in Label],
        "tensors": manifest,
    }, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", FORMAT_VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(struct.pack("<Q", len(payload)))
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))
    logger.info("Saved model (%d tensors, %d bytes) to %s", len(manifest), len(payload), path)


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise ChecksumError(f"{self.path}: truncated while reading {what}")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]


def read_model_header(path: Union[str, Path]) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise ModelNotFound(f"model not found: {path}") from e
    except IsADirectoryError as e:
        raise ModelNotFound(f"model path is a directory: {path}") from e

    r = _Reader(data, path)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise ModelFileError(f"{path}: not a model file (bad magic)")
    version = r.unpack("<H", "version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, this build reads version {FORMAT_VERSION}")
    header_bytes = r.take(r.unpack("<I", "header length"), "header")
    payload = r.take(r.unpack("<Q", "payload length"), "payload")
    crc = r.unpack("<I", "checksum")
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    if r.pos != len(data):
        raise ChecksumError(f"{path}: {len(data) - r.pos} trailing bytes after checksum")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFileError(f"{path}: unreadable header ({e})") from e
    return header, payload


def load_model(path: Union[str, Path]) -> SemTextModel:
    header, payload = read_model_header(path)
    try:
        config = ModelConfig.model_validate(header["config"])
    except Exception as e:
        raise ModelFileError(f"{path}: invalid model configuration ({e})") from e

    model = SemTextModel(config)
    state = {}
    for entry in header.get("tensors", []):
        end = entry["offset"] + entry["nbytes"]
        if end > len(payload):
            raise ChecksumError(f"{path}: tensor {entry['name']} extends past the payload")
        array = np.frombuffer(payload[entry["offset"]:end], dtype=entry["dtype"]).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(array.copy())
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise ModelFileError(f"{path}: tensors do not match the configured network ({e})") from e
    model.eval()
    logger.info("Loaded model from %s (n=%d, m=%d, maps=%s)", path, config.n, config.m, ",".join(config.feature_maps))
    return model
