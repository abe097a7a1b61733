"""
JSON-Lines datasets, one page per line:

    {"id": "...", "blocks": [{"tags": [...], "classes": [...], "text": "...", "label": "main"}, ...]}
"""
from __future__ import annotations
from pathlib import Path
from typing import Iterable, Iterator, Literal, Union
import json, logging

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .labeler import Label
from .segmenter import BlockSequence, TextBlock, is_valid_text
from .trainer import LabeledPage

logger = logging.getLogger("semtext.dataset")


class DatasetError(ValueError):
    """Raised for unreadable or invalid dataset lines; messages carry `path:line`."""


class BlockRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    tags: list[str] = []
    classes: list[str] = []
    text: str
    label: Literal["main", "boilerplate"]

    @field_validator("text")
    @classmethod
    def _valid_text(cls, v: str) -> str:
        if not is_valid_text(v):
            raise ValueError("block text must contain a letter or digit")
        return v


class PageRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    id: str = ""
    blocks: list[BlockRecord]


def page_from_record(record: PageRecord) -> LabeledPage:
    blocks = tuple(
        TextBlock(tag_seq=tuple(b.tags), class_seq=tuple(b.classes), text=b.text, origin_span=(i, i + 1))
        for i, b in enumerate(record.blocks)
    )
    labels = tuple(Label.parse(b.label) for b in record.blocks)
    return LabeledPage(BlockSequence(blocks, record.id), labels, record.id)


def page_to_record(page: LabeledPage) -> dict:
    return {
        "id": page.source_id,
        "blocks": [
            {"tags": list(b.tag_seq), "classes": list(b.class_seq), "text": b.text, "label": str(label)}
            for b, label in zip(page.blocks, page.labels)
        ],
    }


def iter_dataset(path: Union[str, Path]) -> Iterator[LabeledPage]:
    path = Path(path)
    try:
        f = path.open("r", encoding="utf-8")
    except FileNotFoundError as e:
        raise DatasetError(f"dataset not found: {path}") from e
    with f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = PageRecord.model_validate(json.loads(line))
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            except ValidationError as e:
                issue = e.errors()[0]
                loc = ".".join(str(p) for p in issue.get("loc", []))
                raise DatasetError(f"{path}:{lineno}: {loc}: {issue.get('msg', 'invalid value')}") from e
            if not record.id:
                record.id = f"{path.stem}:{lineno}"
            yield page_from_record(record)


def read_dataset(path: Union[str, Path]) -> list[LabeledPage]:
    pages = list(iter_dataset(path))
    logger.info("Read %d pages (%d blocks) from %s", len(pages), sum(len(p) for p in pages), path)
    return pages


def write_dataset(path: Union[str, Path], pages: Iterable[LabeledPage]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for page in pages:
            f.write(json.dumps(page_to_record(page), ensure_ascii=False) + "\n")
            count += 1
    logger.info("Wrote %d pages to %s", count, path)
    return count
