"""
HTML parsing into an immutable DOM tree, and the three-way tag grouping.

The tokenizer is the stdlib `html.parser.HTMLParser`; tree construction is a
small stack machine that repairs the usual sloppy markup (unclosed `p`/`li`,
stray closing tags) without the full HTML5 adoption-agency algorithm.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from enum import IntEnum
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union
import codecs, logging, re

from .resources import DataFiles, TAG_GROUPS, default_data_files

logger = logging.getLogger("semtext.dom")

ROOT_TAG = "#document"
SNIFF_BYTES = 1024


class HtmlParseError(RuntimeError):
    """Base error for documents that cannot be turned into a tree."""

class EncodingError(HtmlParseError):
    """Raised when the byte stream cannot be decoded under the detected encoding."""

class EmptyDocument(HtmlParseError):
    """Raised when no element remains after parsing."""


class TagGroup(IntEnum):
    GROUP1 = 1  # drop tag and enclosed content
    GROUP2 = 2  # drop tag, keep enclosed text
    GROUP3 = 3  # block-delimiting

    @classmethod
    def parse(cls, value: str) -> "TagGroup":
        v = value.strip().upper()
        if v.isdigit():
            return cls(int(v))
        if not v.startswith("GROUP"):
            v = "GROUP" + v
        return cls[v]


@dataclass(frozen=True, slots=True)
class DomNode:
    tag: str
    attributes: tuple[tuple[str, str], ...] = ()
    contents: tuple[Union["DomNode", str], ...] = ()
    source_length: int = 0

    @property
    def children(self) -> tuple["DomNode", ...]:
        return tuple(c for c in self.contents if isinstance(c, DomNode))

    @property
    def text_runs(self) -> tuple[str, ...]:
        return tuple(c for c in self.contents if isinstance(c, str))

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        for key, value in self.attributes:
            if key == name:
                return value
        return default

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple((self.get("class") or "").split())

    def iter_text(self) -> Iterator[str]:
        """All text runs of the subtree in document order."""
        stack: list[Union[DomNode, str]] = [self]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                yield item
            else:
                stack.extend(reversed(item.contents))

    def height(self) -> int:
        best = 0
        stack: list[tuple[DomNode, int]] = [(self, 0)]
        while stack:
            node, depth = stack.pop()
            best = max(best, depth)
            stack.extend((c, depth + 1) for c in node.children)
        return best


# ---------------------------------------------------------------------------
# Tag groups
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TagGroupTable:
    groups: Mapping[str, TagGroup] = field(default_factory=dict)
    default: TagGroup = TagGroup.GROUP3
    version: int | None = None

    def classify(self, tag: str) -> TagGroup:
        return self.groups.get(tag, self.default)


def load_tag_groups(path: Union[str, Path, None] = None, files: DataFiles | None = None) -> TagGroupTable:
    """
    Load a `tag<TAB>group` table. A `*` row sets the group of unknown tags.
    Without a path the packaged (or $SEMTEXT_DATA_DIR) table is used.
    """
    files = files or default_data_files()
    name = path or TAG_GROUPS
    raw = files.table(name)
    default = TagGroup.GROUP3
    groups: dict[str, TagGroup] = {}
    for tag, value in raw.items():
        try:
            group = TagGroup.parse(value)
        except (KeyError, ValueError) as e:
            raise HtmlParseError(f"invalid group {value!r} for tag {tag!r} in {name}") from e
        if tag == "*":
            default = group
        else:
            groups[tag] = group
    table = TagGroupTable(groups=groups, default=default, version=files.version(name))
    logger.debug("Tag-group table: %d tags, default %s, version %s", len(groups), default.name, table.version)
    return table


_default_table: TagGroupTable | None = None


def default_tag_groups() -> TagGroupTable:
    global _default_table
    if _default_table is None:
        _default_table = load_tag_groups()
    return _default_table


def classify_tag(tag: str, table: TagGroupTable | None = None) -> TagGroup:
    return (table or default_tag_groups()).classify(tag)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------
_META_CHARSET = re.compile(
    rb"""<meta[^>]*?charset\s*=\s*["']?\s*([A-Za-z0-9_.:\-]+)""",
    re.IGNORECASE,
)


def sniff_encoding(data: bytes, hint: Optional[str] = None) -> str:
    """BOM first, then the caller's hint, then a `<meta charset>` in the first 1024 bytes, else UTF-8."""
    if data.startswith(codecs.BOM_UTF8):
        return "utf-8-sig"
    if data.startswith((codecs.BOM_UTF16_LE, codecs.BOM_UTF16_BE)):
        return "utf-16"
    label = hint
    if label is None:
        m = _META_CHARSET.search(data[:SNIFF_BYTES])
        if m:
            label = m.group(1).decode("ascii", "replace")
    if label is None:
        return "utf-8"
    try:
        return codecs.lookup(label).name
    except LookupError:
        logger.warning("Unknown encoding label %r; decoding as UTF-8", label)
        return "utf-8"


def decode_html(data: bytes, encoding_hint: Optional[str] = None) -> str:
    encoding = sniff_encoding(data, encoding_hint)
    try:
        return data.decode(encoding)
    except UnicodeDecodeError as e:
        raise EncodingError(f"cannot decode document as {encoding}: {e.reason} at byte {e.start}") from e


# ---------------------------------------------------------------------------
# Tree construction
# ---------------------------------------------------------------------------
VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen", "link",
    "meta", "param", "source", "track", "wbr",
})

_SCOPE = frozenset({
    ROOT_TAG, "html", "body", "table", "td", "th", "caption", "object", "template",
    "applet", "marquee", "button",
})

_CLOSES_P = frozenset({
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dd", "div",
    "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "header", "hgroup", "hr", "li", "main", "menu", "nav", "ol", "p", "pre",
    "search", "section", "summary", "table", "ul",
})

# start tag -> (elements it implicitly closes, elements that stop the search)
_IMPLICIT_CLOSE: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    tag: (frozenset({"p"}), _SCOPE) for tag in _CLOSES_P
}
_IMPLICIT_CLOSE.update({
    "li": (frozenset({"li", "p"}), _SCOPE | {"ul", "ol", "menu"}),
    "dd": (frozenset({"dd", "dt", "p"}), _SCOPE | {"dl"}),
    "dt": (frozenset({"dd", "dt", "p"}), _SCOPE | {"dl"}),
    "tr": (frozenset({"tr", "td", "th"}), {ROOT_TAG, "table", "tbody", "thead", "tfoot"}),
    "td": (frozenset({"td", "th"}), {ROOT_TAG, "tr", "table"}),
    "th": (frozenset({"td", "th"}), {ROOT_TAG, "tr", "table"}),
    "thead": (frozenset({"thead", "tbody", "tfoot", "tr", "td", "th"}), {ROOT_TAG, "table"}),
    "tbody": (frozenset({"thead", "tbody", "tfoot", "tr", "td", "th"}), {ROOT_TAG, "table"}),
    "tfoot": (frozenset({"thead", "tbody", "tfoot", "tr", "td", "th"}), {ROOT_TAG, "table"}),
    "option": (frozenset({"option"}), {ROOT_TAG, "select", "datalist", "optgroup"}),
})

_KNOWN_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'", "nbsp": " "}


@dataclass
class _OpenElement:
    tag: str
    attributes: tuple[tuple[str, str], ...]
    contents: list[Union[DomNode, str]] = field(default_factory=list)

    def append_text(self, text: str) -> None:
        if not text:
            return
        if self.contents and isinstance(self.contents[-1], str):
            self.contents[-1] += text
        else:
            self.contents.append(text)

    def freeze(self, source_length: int = 0) -> DomNode:
        return DomNode(self.tag, self.attributes, tuple(self.contents), source_length)


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        # entity handling is done here so unknown named entities pass through literally
        super().__init__(convert_charrefs=False)
        self.stack: list[_OpenElement] = [_OpenElement(ROOT_TAG, ())]
        self.elements = 0
        self._source = ""
        self._line_starts = [0]

    def feed_document(self, text: str) -> None:
        self._source = text
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self.feed(text)

    def _literal(self, reference: str) -> str:
        # getpos() points at the "&"; the terminator is kept only when the source has one
        lineno, offset = self.getpos()
        end = self._line_starts[lineno - 1] + offset + len(reference)
        return reference + ";" if self._source[end:end + 1] == ";" else reference

    def _close_top(self) -> None:
        node = self.stack.pop().freeze()
        self.stack[-1].contents.append(node)

    def _implicit_close(self, tag: str) -> None:
        rule = _IMPLICIT_CLOSE.get(tag)
        if rule is None:
            return
        closable, boundary = rule
        target = None
        for idx in range(len(self.stack) - 1, 0, -1):
            open_tag = self.stack[idx].tag
            if open_tag in boundary:
                break
            if open_tag in closable:
                target = idx
        if target is not None:
            while len(self.stack) > target:
                self._close_top()

    def handle_starttag(self, tag, attrs):
        self._implicit_close(tag)
        attributes = tuple((name.lower(), value if value is not None else "") for name, value in attrs)
        self.elements += 1
        if tag in VOID_ELEMENTS:
            self.stack[-1].contents.append(DomNode(tag, attributes))
        else:
            self.stack.append(_OpenElement(tag, attributes))

    def handle_startendtag(self, tag, attrs):
        self._implicit_close(tag)
        attributes = tuple((name.lower(), value if value is not None else "") for name, value in attrs)
        self.elements += 1
        self.stack[-1].contents.append(DomNode(tag, attributes))

    def handle_endtag(self, tag):
        for idx in range(len(self.stack) - 1, 0, -1):
            if self.stack[idx].tag == tag:
                while len(self.stack) > idx:
                    self._close_top()
                return
        logger.debug("Dropping stray closing tag </%s>", tag)

    def handle_data(self, data):
        self.stack[-1].append_text(data)

    def handle_entityref(self, name):
        self.stack[-1].append_text(_KNOWN_ENTITIES.get(name) or self._literal(f"&{name}"))

    def handle_charref(self, name):
        try:
            codepoint = int(name[1:], 16) if name[:1] in ("x", "X") else int(name)
            char = chr(codepoint) if 0 < codepoint <= 0x10FFFF and not 0xD800 <= codepoint <= 0xDFFF else "�"
        except ValueError:
            char = self._literal(f"&#{name}")
        self.stack[-1].append_text(char)

    def finish(self, source_length: int) -> DomNode:
        self.close()
        while len(self.stack) > 1:
            self._close_top()
        return self.stack[0].freeze(source_length)


def parse_html(data: Union[bytes, str], encoding_hint: Optional[str] = None) -> DomNode:
    """
    Parse an HTML document into a tree rooted at a `#document` node.
    Raises EncodingError for undecodable bytes and EmptyDocument when no element remains.
    """
    text = data if isinstance(data, str) else decode_html(data, encoding_hint)
    builder = _TreeBuilder()
    builder.feed_document(text)
    root = builder.finish(len(text))
    if builder.elements == 0:
        raise EmptyDocument("document contains no elements")
    logger.debug("Parsed %d elements from %d characters", builder.elements, len(text))
    return root
