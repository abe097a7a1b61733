from __future__ import annotations

import pytest

import semtext.synthetic as sy
from semtext.labeler import Label


def ambiguous(page):
    return [b for b, y in zip(page.blocks, page.labels) if y is Label.BOILERPLATE and b.tag_seq == sy.MAIN_TAGS]


def test_same_seed_same_corpus():
    a = sy.generate_toy_corpus(pages=5, seed=3)
    b = sy.generate_toy_corpus(pages=5, seed=3)
    assert [p.source_id for p in a] == [f"toy-{i:04d}" for i in range(5)]
    assert [p.blocks.texts() for p in a] == [p.blocks.texts() for p in b]
    assert [p.labels for p in a] == [p.labels for p in b]


def test_different_seeds_differ():
    a = sy.generate_toy_corpus(pages=3, seed=1)
    b = sy.generate_toy_corpus(pages=3, seed=2)
    assert [p.blocks.texts() for p in a] != [p.blocks.texts() for p in b]


def test_pages_have_both_labels_and_spans():
    for page in sy.generate_toy_corpus(pages=10, seed=5):
        assert Label.MAIN in page.labels and Label.BOILERPLATE in page.labels
        assert [b.origin_span for b in page.blocks] == [(i, i + 1) for i in range(len(page))]
        assert all(b.text.endswith(".") for b in page.blocks)


def test_main_blocks_use_article_layout():
    for page in sy.generate_toy_corpus(pages=10, seed=5):
        main = [b for b, y in zip(page.blocks, page.labels) if y is Label.MAIN]
        assert {b.tag_seq for b in main} == {sy.MAIN_TAGS}
        assert len({b.class_seq for b in main}) == 1


def test_zero_ratio_has_no_ambiguous_blocks():
    assert all(not ambiguous(p) for p in sy.generate_toy_corpus(pages=10, seed=5, ambiguous_ratio=0.0))


def test_ambiguous_blocks_carry_sidebar_classes():
    pages = sy.generate_toy_corpus(pages=20, seed=5, ambiguous_ratio=0.5)
    blocks = [b for p in pages for b in ambiguous(p)]
    assert blocks
    assert all(b.class_seq in sy.SIDEBAR_CLASSES for b in blocks)
    # at ratio 0.5 there are as many ambiguous blocks as all the others together
    for p in pages:
        assert len(ambiguous(p)) == len(p) - len(ambiguous(p))


@pytest.mark.parametrize("kwargs", [{"pages": -1}, {"ambiguous_ratio": 1.0}, {"ambiguous_ratio": -0.1}])
def test_invalid_arguments(kwargs):
    with pytest.raises(ValueError):
        sy.generate_toy_corpus(**kwargs)


def test_empty_corpus():
    assert sy.generate_toy_corpus(pages=0) == []
