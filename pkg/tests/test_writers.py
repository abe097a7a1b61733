from __future__ import annotations

import io
import json

import pytest

import semtext.writers as wr
from semtext.labeler import Label
from semtext.pipeline import LabeledBlock, PageResult
from semtext.segmenter import TextBlock


def page(source_id: str, *items: tuple[str, Label, float]) -> PageResult:
    return PageResult(source_id, tuple(
        LabeledBlock(TextBlock(("div", "p"), ("story",), text), label, score) for text, label, score in items
    ))


def render(name: str, pages: list[PageResult]) -> str:
    out = io.StringIO()
    writer = wr.get_writer(name)
    for p in pages:
        writer.write_page(p, out)
    writer.finish(out)
    return out.getvalue()


def test_available_writers():
    assert {"text", "jsonl", "blocks"} <= set(wr.available_writers())


def test_unknown_writer_raises():
    with pytest.raises(wr.WriterNotFoundError) as e:
        wr.get_writer("xml")
    assert "text" in str(e.value)


def test_text_writer_prints_main_lines_with_blank_line_between_pages():
    pages = [
        page("a", ("First main.", Label.MAIN, 0.9), ("Menu", Label.BOILERPLATE, 0.1), ("Second main.", Label.MAIN, 0.8)),
        page("b", ("Footer", Label.BOILERPLATE, 0.2)),
        page("c", ("Other page.", Label.MAIN, 0.7)),
    ]
    assert render("text", pages) == "First main.\nSecond main.\n\nOther page.\n"


def test_text_writer_with_no_main_blocks_writes_nothing():
    assert render("text", [page("a", ("Menu", Label.BOILERPLATE, 0.1))]) == ""


def test_jsonl_writer_emits_every_block():
    lines = render("jsonl", [page("a", ("Body.", Label.MAIN, 0.87654321), ("Menu", Label.BOILERPLATE, 0.1))])
    records = [json.loads(line) for line in lines.splitlines()]
    assert records[0] == {
        "source": "a", "i": 0, "label": "main", "score": 0.876543, "text": "Body.",
        "tags": ["div", "p"], "classes": ["story"],
    }
    assert records[1]["label"] == "boilerplate"
    assert records[1]["i"] == 1


def test_jsonl_writer_keeps_non_ascii_text():
    out = render("jsonl", [page("a", ("Café", Label.MAIN, 1.0))])
    assert "Café" in out


def test_blocks_writer_has_no_labels():
    unlabeled = PageResult("a", (LabeledBlock(TextBlock(("li",), ("menu",), "Home")),))
    [line] = render("blocks", [unlabeled]).splitlines()
    assert json.loads(line) == {"i": 0, "tags": ["li"], "classes": ["menu"], "text": "Home"}


def test_duplicate_registration_is_ignored():
    before = wr.available_writers()

    @wr.register(name="text")
    class Shadow(wr.BaseWriter):
        def write_page(self, page, out):
            out.write("shadow")

    assert wr.available_writers() == before
    assert isinstance(wr.get_writer("text"), wr.TextWriter)
