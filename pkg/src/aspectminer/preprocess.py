"""Normalization of raw forum HTML into clean, sentence-level text.

Forum thread items arrive as HTML fragments. Before any tokenization they go
through three rewriting passes, in a fixed order:

1. ``normalize_links``  - anchors become ``URL_<target>`` tokens,
2. ``replace_code``     - code blocks/terms become ``CODESNIPPET_*`` /
   ``CODETERM_*`` placeholders,
3. ``strip_html``       - residual markup removed, entities decoded,
   whitespace collapsed.

``preprocess`` chains the three, splits the result into sentences and
renumbers placeholders so counters are 1-based within each sentence. The
pipeline is a no-op when applied to its own output.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterable, Mapping

PLACEHOLDER_KINDS = ("URL", "CODESNIPPET", "CODETERM")

_ANCHOR_RE = re.compile(r"<a\b([^>]*)>(.*?)</a\s*>", re.IGNORECASE | re.DOTALL)
_HREF_RE = re.compile(r"""href\s*=\s*("([^"]*)"|'([^']*)'|([^\s>]+))""", re.IGNORECASE)
_PRE_BLOCK_RE = re.compile(r"<pre\b[^>]*>.*?</pre\s*>", re.IGNORECASE | re.DOTALL)
_INLINE_CODE_RE = re.compile(r"<code\b[^>]*>.*?</code\s*>", re.IGNORECASE | re.DOTALL)
_TAG_RE = re.compile(r"<[^>]*>")
_WS_RE = re.compile(r"\s+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_NUMBERED_PLACEHOLDER_RE = re.compile(r"\b(CODESNIPPET|CODETERM)_([A-Z]+?)(\d+)\b")


@dataclass(frozen=True)
class RawThreadItem:
    """One question, answer, or comment as pulled from a forum thread.

    ``tags`` carries the thread's topic tags; they only influence the
    language marker embedded in code placeholders.
    """

    source_id: str
    kind: str  # question | answer | comment
    body: str
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError("RawThreadItem.body must be non-empty")
        if self.kind not in ("question", "answer", "comment"):
            raise ValueError(f"unknown thread item kind {self.kind!r}")


@dataclass(frozen=True)
class CleanSentence:
    """A normalized plain-text sentence plus its placeholder tally.

    The tally is derived from the text, so identity/equality rest on the
    text alone.
    """

    text: str
    placeholder_count: Mapping[str, int] = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.placeholder_count is None:
            object.__setattr__(self, "placeholder_count", count_placeholders(self.text))


def count_placeholders(text: str) -> dict[str, int]:
    """Tally URL/CODESNIPPET/CODETERM tokens in normalized text."""
    counts = {kind: 0 for kind in PLACEHOLDER_KINDS}
    for token in text.split():
        for kind in PLACEHOLDER_KINDS:
            if token.startswith(kind + "_"):
                counts[kind] += 1
                break
    return counts


def normalize_links(fragment: str) -> str:
    """Replace each anchor element with a ``URL_`` token.

    The token keeps the anchor's visible text (href as fallback when the
    visible text is empty) with all internal whitespace removed; a fully
    empty anchor degrades to the bare ``URL_`` token. Must run before
    ``strip_html`` removes the anchor context.
    """

    def _replace(match: re.Match[str]) -> str:
        attrs, inner = match.group(1), match.group(2)
        visible = _WS_RE.sub("", _TAG_RE.sub("", inner))
        if not visible:
            href = _HREF_RE.search(attrs)
            if href:
                visible = _WS_RE.sub("", href.group(2) or href.group(3) or href.group(4) or "")
        return "URL_" + visible

    return _ANCHOR_RE.sub(_replace, fragment)


def replace_code(fragment: str, lang: str = "GEN") -> str:
    """Replace code markup with numbered placeholders.

    Block-level code (``<pre>...</pre>``, with or without a nested
    ``<code>``) becomes ``CODESNIPPET_<LANG><n>``; inline ``<code>`` spans
    become ``CODETERM_<LANG><n>``. Counters are 1-based per kind within the
    given fragment, and the enclosed source text is discarded. Nested code
    elements collapse into the outermost placeholder.
    """
    counters = {"CODESNIPPET": 0, "CODETERM": 0}

    def _sub(kind: str) -> str:
        counters[kind] += 1
        return f"{kind}_{lang}{counters[kind]}"

    fragment = _PRE_BLOCK_RE.sub(lambda _: _sub("CODESNIPPET"), fragment)
    fragment = _INLINE_CODE_RE.sub(lambda _: _sub("CODETERM"), fragment)
    return fragment


class _TextExtractor(HTMLParser):
    """Collects visible text, dropping script/style content."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in ("script", "style"):
            self._skip += 1
        else:
            self.chunks.append(" ")

    def handle_endtag(self, tag: str) -> None:
        if tag in ("script", "style") and self._skip:
            self._skip -= 1
        else:
            self.chunks.append(" ")

    def handle_data(self, data: str) -> None:
        if not self._skip:
            self.chunks.append(data)


def strip_html(body: str) -> str:
    """Reduce an HTML fragment to plain text.

    Element markup is removed, entity references are decoded (repeatedly,
    so double-escaped input settles), whitespace collapses to single
    spaces, and text order is preserved. Stray angle brackets never
    survive, which keeps the whole pipeline idempotent on its own output.
    Pathological input degrades to a best-effort regex strip; this
    function does not raise.
    """
    try:
        parser = _TextExtractor()
        parser.feed(body)
        parser.close()
        text = "".join(parser.chunks)
    except Exception:
        text = _TAG_RE.sub(" ", body)
    for _ in range(5):
        decoded = html.unescape(text)
        if decoded == text:
            break
        text = decoded
    text = text.replace("<", " ").replace(">", " ")
    return _WS_RE.sub(" ", text).strip()


def split_sentences(text: str) -> list[str]:
    """Split normalized text at sentence punctuation followed by whitespace.

    Placeholder tokens contain no whitespace, so a split can never land
    inside one.
    """
    return [part for part in _SENTENCE_SPLIT_RE.split(text) if part.strip()]


def _renumber_placeholders(sentence: str) -> str:
    """Restart CODESNIPPET/CODETERM counters at 1 within one sentence."""
    counters = {"CODESNIPPET": 0, "CODETERM": 0}

    def _sub(match: re.Match[str]) -> str:
        kind, lang = match.group(1), match.group(2)
        counters[kind] += 1
        return f"{kind}_{lang}{counters[kind]}"

    return _NUMBERED_PLACEHOLDER_RE.sub(_sub, sentence)


def code_language(tags: Iterable[str]) -> str:
    """`JAVA` for threads tagged java, `GEN` otherwise."""
    for tag in tags:
        lowered = tag.lower()
        if lowered == "java" or lowered.startswith("java-"):
            return "JAVA"
    return "GEN"


def preprocess(item: RawThreadItem) -> list[CleanSentence]:
    """Full normalization of one thread item into clean sentences.

    Applies normalize_links, replace_code, strip_html in that order, then
    splits into sentences and renumbers placeholders per sentence. A body
    that strips to nothing yields an empty list.
    """
    text = normalize_links(item.body)
    text = replace_code(text, lang=code_language(item.tags))
    text = strip_html(text)
    return [CleanSentence(_renumber_placeholders(s)) for s in split_sentences(text)]


def clean_text(text: str, tags: Iterable[str] = ()) -> CleanSentence:
    """Normalize one string as a single sentence (no splitting).

    Used on inputs that are already sentence-per-line, where the 1:1
    input/output correspondence must be preserved.
    """
    cleaned = normalize_links(text)
    cleaned = replace_code(cleaned, lang=code_language(tags))
    cleaned = strip_html(cleaned)
    return CleanSentence(_renumber_placeholders(cleaned))
