"""
Block-level precision, recall and F1 with MAIN as the positive class.
"""
from __future__ import annotations
from pathlib import Path
from typing import Optional, Sequence, Union
import json, logging

from pydantic import BaseModel

from .labeler import Label, LengthMismatch

logger = logging.getLogger("semtext.metrics")


class Counts(BaseModel):
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class PageReport(Counts):
    source_id: str = ""
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


class EvalReport(Counts):
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    macro_f1: float = 0.0
    pages: list[PageReport] = []

    def write(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(), indent=2) + "\n", encoding="utf-8")


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """A page with no MAIN block in either sequence scores 1 everywhere."""
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
    return p, r, f1_score(p, r)


def confusion(pred: Sequence[Label], gold: Sequence[Label]) -> Counts:
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predicted labels for {len(gold)} gold labels")
    c = Counts()
    for p, g in zip(pred, gold):
        if p == Label.MAIN and g == Label.MAIN:
            c.tp += 1
        elif p == Label.MAIN:
            c.fp += 1
        elif g == Label.MAIN:
            c.fn += 1
        else:
            c.tn += 1
    return c


def evaluate(
    pred: Sequence[Sequence[Label]],
    gold: Sequence[Sequence[Label]],
    source_ids: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Micro-averaged scores over all blocks, plus a per-page breakdown."""
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predicted pages for {len(gold)} gold pages")
    source_ids = source_ids or [str(i) for i in range(len(gold))]

    pages: list[PageReport] = []
    total = Counts()
    for sid, p, g in zip(source_ids, pred, gold):
        try:
            c = confusion(p, g)
        except LengthMismatch as e:
            raise LengthMismatch(f"page {sid}: {e}") from None
        pp, pr, pf = precision_recall_f1(c.tp, c.fp, c.fn)
        pages.append(PageReport(source_id=sid, precision=pp, recall=pr, f1=pf, **c.model_dump()))
        total.tp += c.tp
        total.fp += c.fp
        total.fn += c.fn
        total.tn += c.tn

    precision, recall, f1 = precision_recall_f1(total.tp, total.fp, total.fn)
    macro = sum(p.f1 for p in pages) / len(pages) if pages else 1.0
    logger.debug("Evaluated %d pages, %d blocks: P=%.4f R=%.4f F1=%.4f",
                 len(pages), total.total, precision, recall, f1)
    return EvalReport(precision=precision, recall=recall, f1=f1, macro_f1=macro, pages=pages, **total.model_dump())
