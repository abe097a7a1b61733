"""
HTML in, labeled blocks out: parse -> segment -> lexicalize -> embed -> encode -> decode.
"""
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union
import logging, sys

from .dom import EmptyDocument, TagGroupTable, default_tag_groups, parse_html
from .embedding import EmbeddingStore
from .labeler import Label
from .lexicalizer import Lexicalizer
from .model import SemTextModel, build_lexicalizer, build_store, featurize
from .segmenter import BlockSequence, TextBlock, segment
from .trainer import LabeledPage, chunk_sizes

logger = logging.getLogger("semtext.pipeline")

STDIN = "-"
HTML_SUFFIXES = (".html", ".htm")


@dataclass(frozen=True)
class LabeledBlock:
    block: TextBlock
    label: Optional[Label] = None
    score: Optional[float] = None  # posterior probability of MAIN

    @property
    def is_main(self) -> bool:
        return self.label == Label.MAIN


@dataclass(frozen=True)
class PageResult:
    source_id: str
    blocks: tuple[LabeledBlock, ...] = ()

    def main_text(self) -> list[str]:
        return [b.block.text for b in self.blocks if b.is_main]


@dataclass(frozen=True)
class InputDocument:
    source_id: str
    data: bytes


def iter_inputs(path: Union[str, Path]) -> Iterator[InputDocument]:
    """A file, a directory of `*.html`/`*.htm` files in name order, or `-` for standard input."""
    if str(path) == STDIN:
        yield InputDocument("<stdin>", sys.stdin.buffer.read())
        return
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() in HTML_SUFFIXES)
        if not files:
            logger.warning("No HTML files in %s", path)
        for p in files:
            yield InputDocument(str(p), p.read_bytes())
        return
    if not path.is_file():
        raise FileNotFoundError(f"input not found: {path}")
    yield InputDocument(str(path), path.read_bytes())


def segment_document(
    data: Union[bytes, str],
    source_id: str = "",
    *,
    include_ids: bool = False,
    table: Optional[TagGroupTable] = None,
    encoding_hint: Optional[str] = None,
) -> BlockSequence:
    """Segment a document; an empty document yields no blocks and a warning."""
    try:
        root = parse_html(data, encoding_hint)
    except EmptyDocument:
        logger.warning("%s: empty document", source_id or "document")
        return BlockSequence((), source_id)
    return segment(root, include_ids=include_ids, table=table, source_id=source_id)


def segment_page(
    data: Union[bytes, str],
    source_id: str = "",
    *,
    include_ids: bool = False,
    table: Optional[TagGroupTable] = None,
) -> PageResult:
    """Unlabeled blocks of a document, for segmentation-only output."""
    blocks = segment_document(data, source_id, include_ids=include_ids, table=table)
    return PageResult(source_id, tuple(LabeledBlock(b) for b in blocks))


class Extractor:
    """A frozen model with its embeddings and lexicon; safe to share across threads."""

    def __init__(
        self,
        model: SemTextModel,
        store: Optional[EmbeddingStore] = None,
        lexicalizer: Optional[Lexicalizer] = None,
        table: Optional[TagGroupTable] = None,
    ):
        self.model = model.eval()
        self.config = model.config
        self.store = store or build_store(self.config)
        self.lexicalizer = lexicalizer or build_lexicalizer(self.config, self.store)
        self.table = table or default_tag_groups()

    def label_blocks(self, blocks: Sequence[TextBlock]) -> list[LabeledBlock]:
        """Long sequences are cut into chunks of at most m blocks, as in training."""
        out: list[LabeledBlock] = []
        start = 0
        for size in chunk_sizes(len(blocks), self.config.m):
            chunk = blocks[start:start + size]
            labels, scores = self.model.decode(featurize(chunk, self.lexicalizer, self.store, self.config))
            out.extend(LabeledBlock(b, y, s) for b, y, s in zip(chunk, labels, scores))
            start += size
        return out

    def extract(self, data: Union[bytes, str], source_id: str = "") -> PageResult:
        blocks = segment_document(data, source_id, include_ids=self.config.include_ids, table=self.table)
        labeled = self.label_blocks(blocks.blocks)
        logger.debug("%s: %d blocks, %d main", source_id, len(labeled), sum(b.is_main for b in labeled))
        return PageResult(source_id, tuple(labeled))

    def predict_page(self, page: LabeledPage) -> list[Label]:
        return [b.label for b in self.label_blocks(page.blocks.blocks)]
