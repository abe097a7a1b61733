"""
Generated toy corpus for smoke training and ablation runs.

Main blocks draw words from a content vocabulary and sit under article-like
class names; boilerplate draws from a site-chrome vocabulary under
navigation/footer/ad class names. An ambiguous share of boilerplate blocks
reads like content and shares the main tag path, and only its sidebar class
names give it away.
"""
from __future__ import annotations
from typing import Sequence
import logging

import numpy as np

from .labeler import Label
from .segmenter import BlockSequence, TextBlock
from .trainer import LabeledPage

logger = logging.getLogger("semtext.synthetic")

CONTENT_WORDS = (
    "government", "election", "minister", "economy", "market", "inflation", "policy",
    "parliament", "budget", "reform", "climate", "research", "scientists", "hospital",
    "patients", "village", "river", "harvest", "festival", "museum", "history", "court",
    "judge", "witness", "investigation", "company", "profits", "workers", "strike",
    "school", "students", "teachers", "report", "survey", "region", "storm", "coast",
    "families", "community", "council", "announced", "reported", "increased", "declined",
    "according", "officials", "statement", "interview", "analysis", "evidence",
)
CHROME_WORDS = (
    "home", "login", "subscribe", "newsletter", "privacy", "terms", "cookies", "copyright",
    "contact", "careers", "advertise", "sitemap", "menu", "search", "account", "register",
    "share", "follow", "facebook", "twitter", "instagram", "rss", "feedback", "help",
    "faq", "settings", "language", "sponsored", "promoted", "deals", "shop", "cart",
)

MAIN_TAGS = ("div", "article", "p")
MAIN_CLASSES = (
    ("article-body",), ("story-content",), ("post-text", "entry"), ("articleBody",),
    ("main-content", "story"), ("entry-content",),
)
CHROME_LAYOUTS = (
    (("div", "nav", "ul", "li"), ("nav-menu",)),
    (("header", "div"), ("site-header", "topBar")),
    (("footer", "p"), ("site-footer",)),
    (("footer", "ul", "li"), ("footer-links", "ftr")),
    (("div", "aside", "div"), ("ad-banner", "ads")),
    (("div", "div"), ("promo-box", "sponsored")),
)
SIDEBAR_CLASSES = (
    ("sidebar", "related-questions"), ("sideBar", "question-list"),
    ("widget", "related-posts"), ("side-panel", "more-stories"),
)


def _sentence(rng: np.random.Generator, vocab: Sequence[str], low: int = 5, high: int = 14) -> str:
    words = rng.choice(vocab, size=int(rng.integers(low, high + 1)))
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def _pick(rng: np.random.Generator, options: Sequence):
    return options[int(rng.integers(len(options)))]


def generate_page(rng: np.random.Generator, source_id: str, ambiguous_ratio: float = 0.2) -> LabeledPage:
    main_classes = _pick(rng, MAIN_CLASSES)
    n_head = int(rng.integers(2, 5))
    n_main = int(rng.integers(3, 8))
    n_foot = int(rng.integers(2, 5))
    n_other = n_head + n_main + n_foot
    # ambiguous blocks make up about `ambiguous_ratio` of the page
    n_ambiguous = int(round(ambiguous_ratio * n_other / (1 - ambiguous_ratio)))

    entries: list[tuple[TextBlock, Label]] = []

    def chrome() -> tuple[TextBlock, Label]:
        tags, classes = _pick(rng, CHROME_LAYOUTS)
        return TextBlock(tags, classes, _sentence(rng, CHROME_WORDS, 1, 6)), Label.BOILERPLATE

    entries.extend(chrome() for _ in range(n_head))
    entries.extend(
        (TextBlock(MAIN_TAGS, main_classes, _sentence(rng, CONTENT_WORDS)), Label.MAIN) for _ in range(n_main)
    )
    entries.extend(chrome() for _ in range(n_foot))
    for _ in range(n_ambiguous):
        block = TextBlock(MAIN_TAGS, _pick(rng, SIDEBAR_CLASSES), _sentence(rng, CONTENT_WORDS))
        entries.insert(int(rng.integers(len(entries) + 1)), (block, Label.BOILERPLATE))

    blocks = tuple(
        TextBlock(b.tag_seq, b.class_seq, b.text, origin_span=(i, i + 1)) for i, (b, _) in enumerate(entries)
    )
    return LabeledPage(BlockSequence(blocks, source_id), tuple(y for _, y in entries), source_id)


def generate_toy_corpus(pages: int = 200, seed: int = 7, ambiguous_ratio: float = 0.2) -> list[LabeledPage]:
    if pages < 0:
        raise ValueError(f"pages must be >= 0, got {pages}")
    if not 0 <= ambiguous_ratio < 1:
        raise ValueError(f"ambiguous_ratio must be in [0, 1), got {ambiguous_ratio}")
    rng = np.random.default_rng(seed)
    corpus = [generate_page(rng, f"toy-{i:04d}", ambiguous_ratio) for i in range(pages)]
    logger.info("Generated %d toy pages (%d blocks, seed %d, ambiguous ratio %.2f)",
                len(corpus), sum(len(p) for p in corpus), seed, ambiguous_ratio)
    return corpus
