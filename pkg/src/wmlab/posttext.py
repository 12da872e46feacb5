"""Post-text watermarks: WHITEMARK, UniSpaCh, and the Linguistic scheme.

All three operate on finished text. The format schemes rewrite only
whitespace codepoints (the word-character subsequence is untouched); the
lexical scheme swaps words for synonyms carrying the opposite keyed bit and
never touches whitespace. No Unicode normalization may be applied anywhere
on the I/O path or the format watermarks are destroyed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, Undecidable
from .keyed import SecretKey, derive_seed, word_bit
from .pretext import DetectionReport
from .text import is_whitespace_char, segment_words

SPACE = " "

# Whitespace codepoints the UniSpaCh scheme cycles through by default.
UNISPACH_CODEPOINTS = (
    " ",
    " ",
    " ",
    " ",
    " ",
    " ",
    " ",
    " ",
)

# A detection needs at least this many marked spaces before it may fire;
# guards short texts against single-codepoint false positives.
MIN_MARK_COUNT = 3


def _rng(seed: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, label)))


def linguistic_z(ones: int, n: int) -> float:
    """One-sided binomial z of the bit-1 fraction against 0.5."""
    return (ones - 0.5 * n) / (0.5 * math.sqrt(n))


# ---------------------------------------------------------------------------
# WHITEMARK
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhitemarkParams:
    mark_codepoint: str = " "
    replace_prob: float = 0.6
    rng_seed: int = 0

    def __post_init__(self):
        if self.mark_codepoint == SPACE or not is_whitespace_char(self.mark_codepoint):
            raise ValueError("mark_codepoint must be a whitespace codepoint other than U+0020")
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ValueError("replace_prob must lie in [0, 1]")


class WhitemarkScheme:
    """Replace U+0020 with a different whitespace codepoint at rate p.

    Detection measures the marked fraction among {mark, U+0020}. Ordinary
    text contains no mark codepoints, so the calibrated null statistic is
    identically zero; the decision is statistic > 0 with the minimum-count
    guard.
    """

    id = "whitemark"
    kind = "posttext"

    def __init__(self, params: WhitemarkParams):
        self.params = params

    def inject(self, text: str) -> str:
        p = self.params.replace_prob
        if p == 0.0:
            return text
        rng = _rng(self.params.rng_seed, "whitemark")
        mark = self.params.mark_codepoint
        out = []
        for ch in text:
            if ch == SPACE and rng.random() < p:
                out.append(mark)
            else:
                out.append(ch)
        return "".join(out)

    def statistic(self, text: str) -> tuple[float, int]:
        marks = text.count(self.params.mark_codepoint)
        spaces = text.count(SPACE)
        if marks + spaces == 0:
            raise Undecidable("text has no countable whitespace")
        return marks / (marks + spaces), marks + spaces

    def detect(self, text: str, calibration=None) -> DetectionReport:
        marks = text.count(self.params.mark_codepoint)
        spaces = text.count(SPACE)
        if marks + spaces == 0:
            raise Undecidable("text has no countable whitespace")
        stat = marks / (marks + spaces)
        decision = marks >= MIN_MARK_COUNT and stat > 0.0
        return DetectionReport(
            scheme=self.id,
            statistic=stat,
            cutoff=0.0,
            decision=decision,
            length=marks + spaces,
        )


# ---------------------------------------------------------------------------
# UniSpaCh
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnispachParams:
    codepoint_set: tuple = UNISPACH_CODEPOINTS
    replace_prob: float = 0.6
    rng_seed: int = 0

    def __post_init__(self):
        if not self.codepoint_set:
            raise ValueError("codepoint_set must be non-empty")
        for cp in self.codepoint_set:
            if cp == SPACE or not is_whitespace_char(cp):
                raise ValueError("codepoint_set entries must be non-U+0020 whitespace")
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ValueError("replace_prob must lie in [0, 1]")


class UnispachScheme:
    """Like WHITEMARK but each replacement draws from a codepoint set."""

    id = "unispach"
    kind = "posttext"

    def __init__(self, params: UnispachParams):
        self.params = params
        self._set = set(params.codepoint_set)

    def inject(self, text: str) -> str:
        p = self.params.replace_prob
        if p == 0.0:
            return text
        rng = _rng(self.params.rng_seed, "unispach")
        cps = self.params.codepoint_set
        out = []
        for ch in text:
            if ch == SPACE and rng.random() < p:
                out.append(cps[rng.integers(len(cps))])
            else:
                out.append(ch)
        return "".join(out)

    def statistic(self, text: str) -> tuple[float, int]:
        marks = sum(1 for ch in text if ch in self._set)
        spaces = text.count(SPACE)
        if marks + spaces == 0:
            raise Undecidable("text has no countable whitespace")
        return marks / (marks + spaces), marks + spaces

    def detect(self, text: str, calibration=None) -> DetectionReport:
        marks = sum(1 for ch in text if ch in self._set)
        spaces = text.count(SPACE)
        if marks + spaces == 0:
            raise Undecidable("text has no countable whitespace")
        stat = marks / (marks + spaces)
        decision = marks >= MIN_MARK_COUNT and stat > 0.0
        return DetectionReport(
            scheme=self.id,
            statistic=stat,
            cutoff=0.0,
            decision=decision,
            length=marks + spaces,
        )


# ---------------------------------------------------------------------------
# Linguistic
# ---------------------------------------------------------------------------


class SynonymTable:
    """word -> [(candidate, similarity), ...] loaded from a TSV file.

    File format: ``word<TAB>candidate<TAB>similarity`` per line, UTF-8,
    lowercase single-word entries. Candidates are kept sorted by
    descending similarity and capped at ``max_candidates``.
    """

    def __init__(self, entries: dict, max_candidates: int = 8):
        self.entries = {}
        for word, cands in entries.items():
            ranked = sorted(cands, key=lambda ws: (-ws[1], ws[0]))[:max_candidates]
            self.entries[word] = ranked

    def __len__(self):
        return len(self.entries)

    def candidates(self, word: str):
        return self.entries.get(word, ())

    @classmethod
    def from_file(cls, path, max_candidates: int = 8) -> "SynonymTable":
        entries: dict = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                word, cand, sim = line.split("\t")
                if " " in word or " " in cand:
                    raise ConfigError(f"synonym table entries must be single words: {line!r}")
                entries.setdefault(word, []).append((cand, float(sim)))
        return cls(entries, max_candidates)


@dataclass(frozen=True)
class LinguisticParams:
    key: SecretKey
    synonym_table: SynonymTable = field(compare=False)
    similarity_threshold: float = 0.5
    max_candidates: int = 8
    rng_seed: int = 0  # reserved; the replacement rule itself is deterministic


def _match_case(template: str, replacement: str) -> str:
    if template.isupper() and len(template) > 1:
        return replacement.upper()
    if template[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _encodable(word: str) -> bool:
    return any(ch.isalpha() for ch in word)


class LinguisticScheme:
    """Lexical watermark: push word bits toward 1 via synonym swaps.

    The encoder bit of a word is the keyed parity of its lowercased form.
    Injection replaces each bit-0 word that has a bit-1 synonym above the
    similarity threshold with the highest-similarity such candidate.
    Detection applies a binomial z-test of the bit-1 fraction against 0.5
    over all encodable words, thresholded against the empirical null.
    """

    id = "linguistic"
    kind = "posttext"

    def __init__(self, params: LinguisticParams):
        self.params = params
        self._bit_cache: dict = {}

    def _bit(self, lowered: str) -> int:
        b = self._bit_cache.get(lowered)
        if b is None:
            b = word_bit(self.params.key, lowered)
            self._bit_cache[lowered] = b
        return b

    def inject(self, text: str) -> str:
        table = self.params.synonym_table
        if len(table) == 0:
            raise ConfigError("linguistic injection needs a non-empty synonym table")
        thr = self.params.similarity_threshold
        out = []
        for span in segment_words(text):
            chunk = span.text(text)
            if span.kind == "word" and _encodable(chunk):
                lowered = chunk.lower()
                if self._bit(lowered) == 0:
                    best = None
                    for cand, sim in table.candidates(lowered):
                        if sim >= thr and self._bit(cand) == 1:
                            best = cand
                            break  # candidates are pre-sorted by similarity
                    if best is not None:
                        chunk = _match_case(chunk, best)
            out.append(chunk)
        return "".join(out)

    def word_bits(self, text: str) -> list[int]:
        return [
            self._bit(span.text(text).lower())
            for span in segment_words(text)
            if span.kind == "word" and _encodable(span.text(text))
        ]

    def statistic_from_bits(self, bits) -> tuple[float, int]:
        n = len(bits)
        if n == 0:
            raise Undecidable("no encodable words")
        return linguistic_z(int(sum(bits)), n), n

    def statistic(self, text: str) -> tuple[float, int]:
        return self.statistic_from_bits(self.word_bits(text))

    # The z statistic is already standardized.
    def standardize(self, raw: float, length: int) -> float:
        return raw

    def unstandardize(self, std: float, length: int) -> float:
        return std

    def null_statistic(self, model, n_words: int, rng) -> float:
        """One null draw: n_words of unwatermarked model text, then z.

        Sampling real model text (instead of fair coin flips) keeps the
        keyed parity bias of frequent words inside the null distribution.
        """
        from .lm import GenerationConfig, generate
        from .text import TokenSeq, detokenize

        words: list[str] = []
        budget = max(16, int(n_words * 2))
        while len(words) < n_words:
            seq = generate(
                model,
                GenerationConfig(
                    prompt=TokenSeq((), model.vocab),
                    max_tokens=budget,
                    seed=int(rng.integers(2**62)),
                ),
            )
            text = detokenize(seq)
            words.extend(
                s.text(text) for s in segment_words(text) if s.kind == "word" and _encodable(s.text(text))
            )
        bits = [self._bit(w.lower()) for w in words[:n_words]]
        z, _ = self.statistic_from_bits(bits)
        return z

    def detect(self, text: str, calibration) -> DetectionReport:
        bits = self.word_bits(text)
        z, n = self.statistic_from_bits(bits)
        if calibration is None:
            cutoff = math.inf
        elif isinstance(calibration, (int, float)):
            cutoff = float(calibration)
        else:
            cutoff = calibration.cutoff_std(self, n)
        return DetectionReport(
            scheme=self.id,
            statistic=z,
            cutoff=cutoff,
            decision=z > cutoff,
            length=n,
            per_token_evidence=bits,
        )

    def calibration_fingerprint(self) -> str:
        import hashlib

        p = self.params
        keyfp = hashlib.blake2b(p.key.key, digest_size=6).hexdigest()
        tablefp = hashlib.blake2b(
            repr(sorted(p.synonym_table.entries.items())).encode(), digest_size=6
        ).hexdigest()
        return f"{self.id}:thr={p.similarity_threshold}:key={keyfp}:table={tablefp}"
