"""Loaders for the bundled toy dataset and rule tables.

File formats double as the package's external interfaces:

* vocabulary: one token per line, UTF-8, line index = token id;
* corpus: plain UTF-8 text, one document per line;
* prompt dataset: JSON list of {id, instruction} records;
* synonym table: ``word<TAB>candidate<TAB>similarity`` rows;
* contraction table: ``expanded<TAB>contracted`` rows;
* misspelling table: ``word<TAB>variant`` rows (repeat a word for variants).

Readers never normalize Unicode; texts pass through codepoint-exact.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

from .posttext import SynonymTable
from .text import Vocabulary, segment_words

_DATA_DIR = Path(__file__).parent / "data"

BUILTIN = "builtin"


def data_path(name: str) -> Path:
    return _DATA_DIR / name


def _resolve(path, builtin_name: str) -> Path:
    if path in (None, "", BUILTIN) or str(path).startswith("builtin"):
        return data_path(builtin_name)
    return Path(path)


def load_corpus(path=None) -> list[str]:
    p = _resolve(path, "corpus_toy.txt")
    with open(p, encoding="utf-8", newline="") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


def load_vocab(path=None) -> Vocabulary:
    return Vocabulary.from_file(_resolve(path, "vocab_toy.txt"))


def load_prompts_file(path=None) -> list[dict]:
    import json

    p = _resolve(path, "prompts_toy.json")
    with open(p, encoding="utf-8") as f:
        return json.load(f)


def load_contractions(path=None) -> list[tuple[str, str]]:
    pairs = []
    with open(_resolve(path, "contractions.tsv"), encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                expanded, contracted = line.split("\t")
                pairs.append((expanded, contracted))
    return pairs


def load_misspellings(path=None) -> dict:
    table: dict = {}
    with open(_resolve(path, "misspellings.tsv"), encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                word, variant = line.split("\t")
                table.setdefault(word, []).append(variant)
    return table


def load_synonyms(path=None, max_candidates: int = 8) -> SynonymTable:
    return SynonymTable.from_file(_resolve(path, "synonyms.tsv"), max_candidates)


def corpus_lexicon(corpus) -> set:
    """Lowercased word forms seen anywhere in the corpus."""
    lex = set()
    for doc in corpus:
        for span in segment_words(doc):
            if span.kind == "word":
                lex.add(span.text(doc).lower())
    return lex


def modify_lexicon(corpus, top: int = 1000) -> list[str]:
    """The most frequent corpus words, for Modify-attack replacements."""
    counts = Counter()
    for doc in corpus:
        for span in segment_words(doc):
            if span.kind == "word":
                counts[span.text(doc).lower()] += 1
    return [w for w, _ in counts.most_common(top)]
