"""Vocabulary, toy tokenizer, and Unicode-exact word segmentation.

Everything here treats text as a sequence of Unicode scalar values. No
normalization (NFC/NFD) is ever applied: the format watermarks depend on
codepoint-exact handling, so any I/O layer that touches these strings must
pass them through verbatim.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .errors import UnknownSymbol

# Codepoints classified as whitespace for segmentation purposes: the Unicode
# space separators (Zs/Zl/Zp) plus the ASCII control whitespace.
_CTRL_WHITESPACE = "\t\n\r\x0b\x0c\x85"

# Apostrophes are kept inside words so contractions segment as one word.
_APOSTROPHES = "'’"


def is_whitespace_char(ch: str) -> bool:
    return ch in _CTRL_WHITESPACE or unicodedata.category(ch) in ("Zs", "Zl", "Zp")


class Vocabulary:
    """Ordered token list with dense integer ids.

    ``tokens[i]`` renders id ``i``; ``lookup`` inverts it. The on-disk format
    is one token per line (UTF-8), line index = token id, so tokens may not
    contain newlines but may carry leading/trailing spaces.
    """

    def __init__(self, tokens: list[str]):
        if any("\n" in t or t == "" for t in tokens):
            raise ValueError("vocabulary tokens must be non-empty and newline-free")
        self.tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate vocabulary entries")
        # Trie over token strings for longest-match scanning. Nodes are
        # {char: node}; a node holds the id of the token ending there, if any.
        self._trie: dict = {}
        for tok, idx in self._ids.items():
            node = self._trie
            for ch in tok:
                node = node.setdefault(ch, {})
            node[None] = idx

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self._ids[token]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def render(self, token_id: int) -> str:
        return self.tokens[token_id]

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8", newline="") as f:
            raw = f.read()
        lines = raw.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            for tok in self.tokens:
                f.write(tok)
                f.write("\n")


@dataclass(frozen=True)
class TokenSeq:
    """Immutable sequence of token ids over a specific vocabulary."""

    ids: tuple
    vocab: Vocabulary = field(repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __getitem__(self, i):
        return self.ids[i]


def tokenize(text: str, vocab: Vocabulary) -> TokenSeq:
    """Longest-match tokenization over the vocabulary.

    At each position the longest vocabulary entry is consumed; a character
    not starting any entry must itself be a single-character entry
    (the fallback alphabet), otherwise UnknownSymbol is raised.
    """
    ids = []
    trie = vocab._trie
    i, n = 0, len(text)
    while i < n:
        node = trie
        best_id = -1
        best_end = i
        j = i
        while j < n:
            nxt = node.get(text[j])
            if nxt is None:
                break
            node = nxt
            j += 1
            tid = node.get(None)
            if tid is not None:
                best_id = tid
                best_end = j
        if best_id < 0:
            raise UnknownSymbol(f"no vocabulary entry covers {text[i]!r} at offset {i}")
        ids.append(best_id)
        i = best_end
    return TokenSeq(tuple(ids), vocab)


def detokenize(seq: TokenSeq) -> str:
    """Exact concatenation of the rendered tokens."""
    render = seq.vocab.tokens
    return "".join(render[i] for i in seq.ids)


@dataclass(frozen=True)
class WordSpan:
    """Half-open character span [start, end) with a coarse kind."""

    start: int
    end: int
    kind: str  # "word" | "whitespace" | "punctuation"

    def text(self, source: str) -> str:
        return source[self.start : self.end]


def _char_kind(ch: str) -> str:
    if is_whitespace_char(ch):
        return "whitespace"
    if ch.isalnum():
        return "word"
    return "punctuation"


def segment_words(text: str) -> list[WordSpan]:
    """Tile the text into word / whitespace / punctuation spans.

    Runs of same-kind characters form one span. An apostrophe flanked by
    word characters counts as a word character, so "don't" is one span.
    """
    if not text:
        return []
    kinds = [_char_kind(ch) for ch in text]
    for i, ch in enumerate(text):
        if ch in _APOSTROPHES and 0 < i < len(text) - 1:
            if kinds[i - 1] == "word" and _char_kind(text[i + 1]) == "word":
                kinds[i] = "word"
    spans = []
    start = 0
    for i in range(1, len(text)):
        if kinds[i] != kinds[start]:
            spans.append(WordSpan(start, i, kinds[start]))
            start = i
    spans.append(WordSpan(start, len(text), kinds[start]))
    return spans


def word_texts(text: str) -> list[str]:
    """Convenience: the text of every word span, in order."""
    return [s.text(text) for s in segment_words(text) if s.kind == "word"]
