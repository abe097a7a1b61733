"""
Turn a block's tag path, class path and text into three lowercase word lists.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Container, Iterable, Mapping, Optional, Sequence, Union
import logging, re

from .resources import ABBREVIATIONS, DataFiles, STOPWORDS, TAG_PHRASES, default_data_files
from .segmenter import TextBlock

logger = logging.getLogger("semtext.lexicalizer")

DEFAULT_WORDS = 50
FEATURE_MAPS = ("tags", "classes", "text")

_DELIMITERS = re.compile(r"[\W_]+")
# acronym runs, capitalised or lowercase words, digit runs
_CAMEL_PARTS = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+|[^\W\d_]+")
_TEXT_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class WordStrings:
    tag_words: tuple[str, ...] = ()
    class_words: tuple[str, ...] = ()
    text_words: tuple[str, ...] = ()

    def feature(self, name: str) -> tuple[str, ...]:
        if name == "tags":
            return self.tag_words
        if name == "classes":
            return self.class_words
        if name == "text":
            return self.text_words
        raise KeyError(f"unknown feature map {name!r}; expected one of {FEATURE_MAPS}")

    def select(self, names: Sequence[str] = FEATURE_MAPS) -> list[tuple[str, ...]]:
        return [self.feature(n) for n in names]


def _split_words(phrase: str) -> list[str]:
    return phrase.lower().split()


def lexicalize_tags(tag_seq: Iterable[str], phrases: Optional[Mapping[str, str]] = None) -> list[str]:
    """Replace each tag by its phrase (`p` -> paragraph, `h1` -> primary headline). Unknown tags pass through."""
    phrases = default_tag_phrases() if phrases is None else phrases
    words: list[str] = []
    for tag in tag_seq:
        words.extend(_split_words(phrases.get(tag.lower(), tag)))
    return words


def _class_parts(raw: str) -> list[str]:
    parts: list[str] = []
    for piece in _DELIMITERS.split(raw):
        parts.extend(_CAMEL_PARTS.findall(piece))
    return [p.lower() for p in parts if p and not p.isdigit()]


def _lexicalize_class_token(
    raw: str,
    abbreviations: Mapping[str, str],
    vocabulary: Optional[Container[str]],
) -> tuple[list[str], bool]:
    """Return the words for one raw class token and whether they are an opaque identifier."""
    words: list[str] = []
    for part in _class_parts(raw):
        words.extend(_split_words(abbreviations.get(part, part)))

    opaque = raw.lower()
    if not words:
        # nothing survived but the token still names something
        if any(ch.isalpha() for ch in raw):
            return [opaque], True
        return [], False
    if vocabulary is not None and not any(w in vocabulary for w in words):
        return [opaque], True
    return words, False


def _lexicalize_classes(
    class_seq: Iterable[str],
    abbreviations: Mapping[str, str],
    vocabulary: Optional[Container[str]] = None,
) -> list[tuple[str, bool]]:
    out: list[tuple[str, bool]] = []
    for raw in class_seq:
        words, opaque = _lexicalize_class_token(raw, abbreviations, vocabulary)
        out.extend((w, opaque) for w in words)
    return out


def lexicalize_classes(
    class_seq: Iterable[str],
    abbreviations: Optional[Mapping[str, str]] = None,
    vocabulary: Optional[Container[str]] = None,
) -> list[str]:
    """
    Split on delimiters and camelCase, lowercase, drop numbers, expand abbreviations.

    >>> lexicalize_classes(["story-feed__item", "navBar2"])
    ['story', 'feed', 'item', 'navigation', 'bar']
    """
    abbreviations = default_abbreviations() if abbreviations is None else abbreviations
    return [w for w, _ in _lexicalize_classes(class_seq, abbreviations, vocabulary)]


def lexicalize_text(text: str, stopwords: Optional[Container[str]] = None, n: int = DEFAULT_WORDS) -> list[str]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    stopwords = default_stopwords() if stopwords is None else stopwords
    words: list[str] = []
    for token in _TEXT_TOKEN.findall(text.lower()):
        if token in stopwords:
            continue
        words.append(token)
        if len(words) == n:
            break
    return words


@dataclass(frozen=True, eq=False)
class Lexicalizer:
    phrases: Mapping[str, str] = field(default_factory=dict)
    abbreviations: Mapping[str, str] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()
    n: int = DEFAULT_WORDS
    vocabulary: Optional[Container[str]] = None

    @classmethod
    def from_data(
        cls,
        n: int = DEFAULT_WORDS,
        data_dir: Optional[Union[str, Path]] = None,
        vocabulary: Optional[Container[str]] = None,
    ) -> "Lexicalizer":
        files = DataFiles(data_dir) if data_dir else default_data_files()
        lex = cls(
            phrases=files.table(TAG_PHRASES),
            abbreviations=files.table(ABBREVIATIONS),
            stopwords=files.words(STOPWORDS),
            n=n,
            vocabulary=vocabulary,
        )
        logger.debug("Lexicalizer: %d tag phrases, %d abbreviations, %d stopwords, n=%d",
                     len(lex.phrases), len(lex.abbreviations), len(lex.stopwords), n)
        return lex

    def _finish(self, words: Iterable[tuple[str, bool]]) -> tuple[str, ...]:
        out: list[str] = []
        for word, opaque in words:
            if not opaque and word in self.stopwords:
                continue
            out.append(word)
            if len(out) == self.n:
                break
        return tuple(out)

    def tags(self, tag_seq: Iterable[str]) -> tuple[str, ...]:
        return self._finish((w, False) for w in lexicalize_tags(tag_seq, self.phrases))

    def classes(self, class_seq: Iterable[str]) -> tuple[str, ...]:
        return self._finish(_lexicalize_classes(class_seq, self.abbreviations, self.vocabulary))

    def text(self, text: str) -> tuple[str, ...]:
        return tuple(lexicalize_text(text, self.stopwords, self.n))

    def lexicalize_block(self, block: TextBlock) -> WordStrings:
        return WordStrings(
            tag_words=self.tags(block.tag_seq),
            class_words=self.classes(block.class_seq),
            text_words=self.text(block.text),
        )


@lru_cache(maxsize=1)
def default_lexicalizer() -> Lexicalizer:
    return Lexicalizer.from_data()


def default_tag_phrases() -> Mapping[str, str]:
    return default_lexicalizer().phrases


def default_abbreviations() -> Mapping[str, str]:
    return default_lexicalizer().abbreviations


def default_stopwords() -> frozenset[str]:
    return default_lexicalizer().stopwords


def lexicalize_block(block: TextBlock, lexicalizer: Optional[Lexicalizer] = None) -> WordStrings:
    return (lexicalizer or default_lexicalizer()).lexicalize_block(block)
