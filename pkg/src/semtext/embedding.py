"""
Word vectors for the three word strings of a block.

Known words come from a text vector file (`COUNT DIM` header, then
`word v1 ... vk` per line). Unknown words get the mean of hashed character
n-gram bucket vectors, computed with gensim's fastText hashing so the bucket
assignment matches fastText's own.
"""
from __future__ import annotations
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union
import logging, math

import numpy as np
from gensim.models.fasttext import ft_ngram_hashes

from .lexicalizer import FEATURE_MAPS, WordStrings

logger = logging.getLogger("semtext.embedding")

DEFAULT_DIM = 50
DEFAULT_BUCKETS = 2 ** 20
DEFAULT_SEED = 0
MIN_N = 3
MAX_N = 6

# shape (feature maps, n, k); zero rows pad short word lists
BlockTensor = np.ndarray


class EmbeddingError(RuntimeError):
    """Base error for embedding files and lookups."""

class FormatError(EmbeddingError):
    """Raised on ragged or unparsable rows."""

class DimensionError(EmbeddingError):
    """Raised when the header dimension disagrees with the rows."""


@lru_cache(maxsize=1 << 16)
def _bucket_vector(seed: int, bucket: int, dim: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(dim)
    vec = np.random.default_rng((seed, bucket)).uniform(-bound, bound, dim)
    vec.setflags(write=False)
    return vec


class EmbeddingStore:
    """
    Immutable word -> vector table with a subword fallback.
    Every token, known or not, maps to a `dim`-vector.
    """

    def __init__(
        self,
        words: Sequence[str],
        matrix: np.ndarray,
        *,
        buckets: int = DEFAULT_BUCKETS,
        seed: int = DEFAULT_SEED,
        min_n: int = MIN_N,
        max_n: int = MAX_N,
        path: Optional[Path] = None,
    ):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise DimensionError(f"matrix shape {matrix.shape} does not match {len(words)} words")
        if buckets < 1:
            raise EmbeddingError(f"subword bucket count must be positive, got {buckets}")
        if not 1 <= min_n <= max_n:
            raise EmbeddingError(f"invalid subword n-gram range [{min_n}, {max_n}]")
        self._index: dict[str, int] = {w: i for i, w in enumerate(words)}
        self._matrix = matrix.copy()
        self._matrix.setflags(write=False)
        self.buckets = buckets
        self.seed = seed
        self.min_n = min_n
        self.max_n = max_n
        self.path = path

    @classmethod
    def empty(cls, dim: int = DEFAULT_DIM, **subword) -> "EmbeddingStore":
        """A store without vocabulary: every lookup goes through the subword path."""
        if dim < 1:
            raise DimensionError(f"dimension must be positive, got {dim}")
        return cls([], np.zeros((0, dim)), **subword)

    @classmethod
    def from_mapping(cls, vectors: Mapping[str, Sequence[float]], **subword) -> "EmbeddingStore":
        words = list(vectors)
        matrix = np.array([vectors[w] for w in words], dtype=np.float64)
        return cls(words, matrix, **subword)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._index)

    def subword_vector(self, token: str) -> np.ndarray:
        # "<token>" always yields at least one n-gram
        min_n = min(self.min_n, len(token) + 2)
        hashes = ft_ngram_hashes(token, min_n, max(min_n, self.max_n), self.buckets)
        return np.mean([_bucket_vector(self.seed, h, self.dim) for h in hashes], axis=0)

    def embed_word(self, token: str) -> np.ndarray:
        if not token:
            raise EmbeddingError("cannot embed an empty token")
        idx = self._index.get(token)
        if idx is not None:
            return self._matrix[idx]
        return self.subword_vector(token)


def load_embeddings(
    path: Union[str, Path],
    *,
    buckets: int = DEFAULT_BUCKETS,
    seed: int = DEFAULT_SEED,
    min_n: int = MIN_N,
    max_n: int = MAX_N,
    default_dim: int = DEFAULT_DIM,
) -> EmbeddingStore:
    """
    Load a text vector file. Duplicate words keep the last vector.
    Raises FormatError on ragged/unparsable rows and DimensionError when the
    header dimension disagrees with the rows. An empty file yields an empty store.
    """
    path = Path(path).expanduser()
    subword = dict(buckets=buckets, seed=seed, min_n=min_n, max_n=max_n, path=path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise EmbeddingError(f"embeddings file not found: {path}") from e
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: not valid UTF-8 ({e.reason} at byte {e.start})") from e

    lines = [(no, line) for no, line in enumerate(lines, 1) if line.strip()]
    if not lines:
        logger.warning("Embeddings file %s is empty; all words will use subword vectors", path)
        return EmbeddingStore.empty(default_dim, **subword)

    header_no, header = lines[0]
    try:
        count, dim = (int(v) for v in header.split())
    except ValueError as e:
        raise FormatError(f"{path}:{header_no}: header must be 'COUNT DIM', got {header!r}") from e
    if dim < 1:
        raise DimensionError(f"{path}: header dimension must be positive, got {dim}")

    index: dict[str, int] = {}
    rows: list[np.ndarray] = []
    width: Optional[int] = None
    for no, line in lines[1:]:
        parts = line.split()
        word, values = parts[0], parts[1:]
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise FormatError(f"{path}:{no}: row for {word!r} has {len(values)} values, expected {width}")
        try:
            vec = np.array(values, dtype=np.float64)
        except ValueError as e:
            raise FormatError(f"{path}:{no}: non-numeric value in row for {word!r}") from e
        if not np.isfinite(vec).all():
            raise FormatError(f"{path}:{no}: non-finite value in row for {word!r}")
        if word in index:
            logger.warning("%s:%d: duplicate word %r; keeping the last vector", path, no, word)
            rows[index[word]] = vec
        else:
            index[word] = len(rows)
            rows.append(vec)

    if width is not None and width != dim:
        raise DimensionError(f"{path}: header declares dimension {dim} but rows have {width}")
    if count != len(rows):
        logger.warning("%s: header declares %d words, found %d", path, count, len(rows))

    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    logger.info("Loaded %d word vectors of dimension %d from %s", len(rows), dim, path)
    return EmbeddingStore(list(index), matrix, **subword)


def embed_block(
    store: EmbeddingStore,
    words: WordStrings,
    n: int,
    feature_maps: Sequence[str] = FEATURE_MAPS,
) -> BlockTensor:
    """Stack one zero-padded n x k matrix per selected word string."""
    out = np.zeros((len(feature_maps), n, store.dim), dtype=np.float64)
    for i, tokens in enumerate(words.select(feature_maps)):
        if len(tokens) > n:
            logger.debug("Truncating %d words to %d", len(tokens), n)
        for j, token in enumerate(tokens[:n]):
            out[i, j] = store.embed_word(token)
    if not np.isfinite(out).all():
        raise EmbeddingError("non-finite value in block tensor")
    return out


def embed_pages(
    store: EmbeddingStore,
    blocks: Iterable[WordStrings],
    n: int,
    feature_maps: Sequence[str] = FEATURE_MAPS,
) -> np.ndarray:
    """Shape (blocks, feature maps, n, k)."""
    tensors = [embed_block(store, w, n, feature_maps) for w in blocks]
    if not tensors:
        return np.zeros((0, len(feature_maps), n, store.dim), dtype=np.float64)
    return np.stack(tensors)
