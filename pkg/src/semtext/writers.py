"""
Output-format registry and dispatch.

Contract
--------
Writers implement:
- def write_page(self, page: PageResult, out: TextIO) -> None
- def finish(self, out: TextIO) -> None   (optional)

Registration:
- Use @register(name="...") to add a format; `get_writer(name)` instantiates it.
"""
from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, TextIO, Type
import json, logging

from .pipeline import PageResult

logger = logging.getLogger("semtext.writers")


class WriterError(RuntimeError):
    """Base error for output formats."""

class WriterNotFoundError(WriterError):
    """Raised when no writer is registered under the requested name."""


@dataclass(frozen=True)
class _Entry:
    cls: Type["BaseWriter"]
    name: str

_REGISTRY: List[_Entry] = []


def register(*, name: Optional[str] = None) -> Callable[[Type["BaseWriter"]], Type["BaseWriter"]]:
    def _decorator(cls: Type["BaseWriter"]) -> Type["BaseWriter"]:
        n = name or cls.__name__
        if any(e.name == n for e in _REGISTRY):
            logger.debug("Writer %s already registered; skipping duplicate.", n)
            return cls
        _REGISTRY.append(_Entry(cls=cls, name=n))
        logger.debug("Registered writer %s.", n)
        return cls
    return _decorator


def available_writers() -> list[str]:
    return [e.name for e in _REGISTRY]


def get_writer(name: str) -> "BaseWriter":
    for e in _REGISTRY:
        if e.name == name:
            return e.cls()
    raise WriterNotFoundError(f"Unknown output format {name!r}; available: {', '.join(available_writers())}")


class BaseWriter(ABC):
    @abstractmethod
    def write_page(self, page: PageResult, out: TextIO) -> None:
        raise NotImplementedError

    def finish(self, out: TextIO) -> None:
        out.flush()


@register(name="text")
class TextWriter(BaseWriter):
    """MAIN blocks one per line; pages separated by a blank line."""

    def __init__(self) -> None:
        self._pages = 0

    def write_page(self, page: PageResult, out: TextIO) -> None:
        lines = page.main_text()
        if not lines:
            return
        if self._pages:
            out.write("\n")
        out.write("".join(line + "\n" for line in lines))
        self._pages += 1


@register(name="jsonl")
class JsonlWriter(BaseWriter):
    def write_page(self, page: PageResult, out: TextIO) -> None:
        for i, lb in enumerate(page.blocks):
            out.write(json.dumps({
                "source": page.source_id,
                "i": i,
                "label": str(lb.label),
                "score": round(lb.score, 6),
                "text": lb.block.text,
                "tags": list(lb.block.tag_seq),
                "classes": list(lb.block.class_seq),
            }, ensure_ascii=False) + "\n")


@register(name="blocks")
class BlocksWriter(BaseWriter):
    """Segmentation only: every block, no labels."""

    def write_page(self, page: PageResult, out: TextIO) -> None:
        for i, lb in enumerate(page.blocks):
            out.write(json.dumps({
                "i": i,
                "tags": list(lb.block.tag_seq),
                "classes": list(lb.block.class_seq),
                "text": lb.block.text,
            }, ensure_ascii=False) + "\n")
