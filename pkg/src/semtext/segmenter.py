"""
Search-and-combine segmentation of a DOM tree into text blocks.

The search phase walks the tree depth-first and cuts the text at every
GROUP3 boundary (opening or closing). The combine phase merges leaf siblings
that share tag and class paths, and a parent with its leaf single child when
the paths line up.
"""
from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence
import logging

from .dom import DomNode, ROOT_TAG, TagGroup, TagGroupTable, default_tag_groups

logger = logging.getLogger("semtext.segmenter")

SEPARATOR = " "
_LINE_BREAKS = frozenset({"br"})


@dataclass(frozen=True, slots=True)
class TextBlock:
    tag_seq: tuple[str, ...]
    class_seq: tuple[str, ...]
    text: str
    origin_span: tuple[int, int] = (0, 1)
    # provenance for the combine phase; -1 is the document root
    owner: int = -1
    parent: int = -1
    leaf: bool = True
    sole_child: bool = False

    @property
    def depth(self) -> int:
        return len(self.tag_seq)


@dataclass(frozen=True)
class BlockSequence:
    blocks: tuple[TextBlock, ...] = ()
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[TextBlock]:
        return iter(self.blocks)

    def __getitem__(self, idx: int) -> TextBlock:
        return self.blocks[idx]

    def texts(self) -> list[str]:
        return [b.text for b in self.blocks]


def normalize_space(text: str) -> str:
    return " ".join(text.split())


def is_valid_text(text: str) -> bool:
    """Non-empty after trimming and containing at least one letter or digit."""
    return any(ch.isalnum() for ch in text)


@dataclass
class _Element:
    parent: int
    children: int = 0


@dataclass
class _Path:
    index: int
    tag: str
    classes: tuple[str, ...]


@dataclass(frozen=True)
class _Close:
    node: DomNode


@dataclass
class _Search:
    table: TagGroupTable
    include_ids: bool
    elements: list[_Element] = field(default_factory=list)
    root_children: int = 0
    path: list[_Path] = field(default_factory=list)
    buffer: list[str] = field(default_factory=list)
    drafts: list[TextBlock] = field(default_factory=list)

    def group(self, node: DomNode) -> TagGroup:
        if node.tag == ROOT_TAG:
            return TagGroup.GROUP2
        return self.table.classify(node.tag)

    def flush(self) -> None:
        text = normalize_space("".join(self.buffer))
        self.buffer.clear()
        if not is_valid_text(text):
            return
        self.drafts.append(TextBlock(
            tag_seq=tuple(p.tag for p in self.path),
            class_seq=tuple(c for p in self.path for c in p.classes),
            text=text,
            owner=self.path[-1].index if self.path else -1,
        ))

    def open_block(self, node: DomNode) -> None:
        self.flush()
        parent = self.path[-1].index if self.path else -1
        index = len(self.elements)
        self.elements.append(_Element(parent=parent))
        if parent >= 0:
            self.elements[parent].children += 1
        else:
            self.root_children += 1
        classes = node.classes
        if self.include_ids and node.get("id"):
            classes = classes + tuple(node.get("id").split())
        self.path.append(_Path(index, node.tag, classes))

    def close_block(self) -> None:
        self.flush()
        self.path.pop()

    def run(self, root: DomNode) -> None:
        work: list[DomNode | str | _Close] = [root]
        while work:
            item = work.pop()
            if isinstance(item, str):
                self.buffer.append(item)
                continue
            if isinstance(item, _Close):
                self.close_block()
                continue
            group = self.group(item)
            if group is TagGroup.GROUP1:
                continue
            if item.tag in _LINE_BREAKS:
                self.buffer.append(SEPARATOR)
            if group is TagGroup.GROUP3:
                self.open_block(item)
                work.append(_Close(item))
            work.extend(reversed(item.contents))
        self.flush()

    def finalize(self) -> list[TextBlock]:
        out = []
        for i, draft in enumerate(self.drafts):
            if draft.owner >= 0:
                parent = self.elements[draft.owner].parent
                siblings = self.elements[parent].children if parent >= 0 else self.root_children
                leaf = self.elements[draft.owner].children == 0
                sole = siblings == 1
            else:
                parent, leaf, sole = -1, not self.elements, False
            out.append(replace(draft, origin_span=(i, i + 1), parent=parent, leaf=leaf, sole_child=sole))
        return out


def search_phase(
    root: DomNode,
    *,
    include_ids: bool = False,
    table: TagGroupTable | None = None,
    source_id: str = "",
) -> BlockSequence:
    """
    Depth-first search producing one block per valid text run between GROUP3 boundaries.
    GROUP1 subtrees are skipped; GROUP2 tags vanish but their text stays.
    """
    search = _Search(table=table or default_tag_groups(), include_ids=include_ids)
    search.run(root)
    blocks = search.finalize()

    height = root.height()
    size = root.source_length or sum(len(t) for t in root.iter_text())
    if height * height > size:
        logger.warning("DOM height %d exceeds sqrt of document size %d; linear-time bound not guaranteed",
                       height, size)
    logger.debug("Search phase: %d blocks from %d block elements", len(blocks), len(search.elements))
    return BlockSequence(tuple(blocks), source_id)


def _leaf_siblings(x: TextBlock, y: TextBlock) -> bool:
    return x.owner >= 0 and y.owner >= 0 and x.owner != y.owner and x.leaf and y.leaf and x.parent == y.parent


def _combinable(x: TextBlock, y: TextBlock) -> bool:
    # same tag and class paths on two leaf siblings
    if _leaf_siblings(x, y) and x.tag_seq == y.tag_seq and x.class_seq == y.class_seq:
        return True
    # y is the leaf single child of x, one level deeper, same classes
    return (
        x.owner >= 0
        and y.leaf
        and y.sole_child
        and y.parent == x.owner
        and x.class_seq == y.class_seq
        and len(y.tag_seq) == len(x.tag_seq) + 1
        and y.tag_seq[:-1] == x.tag_seq
    )


def _merge(x: TextBlock, y: TextBlock) -> TextBlock:
    return replace(
        x,
        text=x.text + SEPARATOR + y.text,
        origin_span=(x.origin_span[0], y.origin_span[1]),
        leaf=True,
    )


def combine_phase(blocks: BlockSequence) -> BlockSequence:
    """
    Right-to-left pass: each block is tried against the already-combined
    block that follows it, c(x, y) = c(x, c(y, z)). A freshly merged block is
    re-tried against its new right neighbour so no combinable pair survives.
    """
    out: deque[TextBlock] = deque()
    for block in reversed(blocks.blocks):
        if out and _combinable(block, out[0]):
            out[0] = _merge(block, out[0])
            while len(out) > 1 and _combinable(out[0], out[1]):
                head = out.popleft()
                out[0] = _merge(head, out[0])
        else:
            out.appendleft(block)
    logger.debug("Combine phase: %d -> %d blocks", len(blocks), len(out))
    return BlockSequence(tuple(out), blocks.source_id)


def segment(
    root: DomNode,
    *,
    include_ids: bool = False,
    table: TagGroupTable | None = None,
    source_id: str = "",
) -> BlockSequence:
    return combine_phase(search_phase(root, include_ids=include_ids, table=table, source_id=source_id))


def filtered_text(root: DomNode, table: TagGroupTable | None = None) -> str:
    """
    The GROUP1-filtered text of a document: valid fragments between GROUP3
    boundaries, whitespace-normalised and joined by single spaces.
    """
    table = table or default_tag_groups()
    fragments: list[str] = []
    current: list[str] = []

    def cut() -> None:
        text = normalize_space("".join(current))
        current.clear()
        if is_valid_text(text):
            fragments.append(text)

    work: list[DomNode | str | None] = [root]
    while work:
        item = work.pop()
        if item is None:
            cut()
            continue
        if isinstance(item, str):
            current.append(item)
            continue
        group = TagGroup.GROUP2 if item.tag == ROOT_TAG else table.classify(item.tag)
        if group is TagGroup.GROUP1:
            continue
        if item.tag in _LINE_BREAKS:
            current.append(SEPARATOR)
        if group is TagGroup.GROUP3:
            cut()
            work.append(None)
        work.extend(reversed(item.contents))
    cut()
    return SEPARATOR.join(fragments)


def joined_text(blocks: Sequence[TextBlock] | BlockSequence) -> str:
    return SEPARATOR.join(b.text for b in blocks)
