"""Quality, watermark-rate, robustness, judging, and imperceptibility.

The three scalar metrics are exact closed forms. Quality judging is a hook:
the built-in proxy is a deterministic blend of reference-model likelihood,
lexicon coverage, and word well-formedness; an external command can take
its place and receives the standard grading prompt on stdin.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import JudgeFailed
from .text import is_whitespace_char, segment_words, tokenize

# Prompt template handed verbatim to external judge hooks.
JUDGE_PROMPT_TEMPLATE = (
    "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n"
    "You are given a question and a response, and you provide a grade ranging "
    "from [0,1] measuring the quality of the response, in terms of accuracy, "
    "level of detail, and typographical, grammatical, and lexical correctness. "
    "Remove points as soon as one of the criteria is missed. \n"
    "### Question: {question}\n"
    "### Response: {response}\n"
    "<|eot_id|><|start_header_id|>user<|end_header_id|>\n"
    "Please provide a grade.\n"
    "### Grade: \n"
    "<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n"
)


def quality_combine(q_clean: float, q_attack: float) -> float:
    """Q = 0.5 * q_clean + 0.5 * clamp(q_attack / q_clean, 0, 1)."""
    ratio = 0.0 if q_clean == 0.0 else q_attack / q_clean
    return 0.5 * q_clean + 0.5 * max(0.0, min(ratio, 1.0))


def watermark_rate(reports) -> float:
    """Fraction of positive detections; undecidable counts as negative."""
    decisions = []
    for rep in reports:
        if rep is None:
            decisions.append(False)
        elif isinstance(rep, bool):
            decisions.append(rep)
        else:
            decisions.append(bool(rep.decision) and not getattr(rep, "undecidable", False))
    if not decisions:
        raise ValueError("watermark_rate needs at least one report")
    return sum(decisions) / len(decisions)


def robustness(q: float, w: float) -> float:
    """R = 0.5 * Q + 0.5 * W."""
    return 0.5 * q + 0.5 * w


def robustness_mean(values) -> float:
    values = list(values)
    if not values:
        raise ValueError("robustness_mean needs at least one score")
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# Quality judging
# ---------------------------------------------------------------------------

_PROXY_WEIGHTS = (0.5, 0.3, 0.2)  # likelihood, lexicon coverage, well-formedness
_MAX_WORD_LEN = 24


def _well_formed(word: str) -> bool:
    return len(word) <= _MAX_WORD_LEN and all(ch.isalpha() or ch in "'’" for ch in word)


@dataclass
class QualityJudge:
    """Grades a (question, response) pair in [0, 1].

    The built-in proxy scores 0.5 * likelihood + 0.3 * lexicon + 0.2 * shape:
    * likelihood: length-normalized log-probability of the response under a
      clean reference model, scaled so uniform-noise text maps to 0;
    * lexicon: fraction of words found in the reference lexicon;
    * shape: fraction of words free of mid-word non-letters.
    """

    reference_model: object = None
    lexicon: set = None
    external_command: str | None = None
    timeout_s: float = 60.0

    def grade(self, question: str, response: str) -> float:
        if self.external_command:
            return self._external(question, response)
        return self._proxy(response)

    def _proxy(self, response: str) -> float:
        if not response.strip():
            return 0.0
        model = self.reference_model
        vocab = model.vocab
        try:
            seq = tokenize(response, vocab)
        except Exception:
            return 0.0
        if len(seq) == 0:
            return 0.0
        ll = 0.0
        ids = seq.ids
        for i, tok in enumerate(ids):
            probs = model.distribution(ids[:i])
            ll += math.log(max(float(probs[tok]), 1e-300))
        ll /= len(ids)
        floor = math.log(1.0 / vocab.size)
        likelihood = min(1.0, max(0.0, 1.0 - ll / floor))

        words = [s.text(response) for s in segment_words(response) if s.kind == "word"]
        if words:
            coverage = sum(1 for w in words if w.lower() in self.lexicon) / len(words)
            shape = sum(1 for w in words if _well_formed(w)) / len(words)
        else:
            coverage = shape = 0.0
        w1, w2, w3 = _PROXY_WEIGHTS
        return w1 * likelihood + w2 * coverage + w3 * shape

    def _external(self, question: str, response: str) -> float:
        prompt = JUDGE_PROMPT_TEMPLATE.format(question=question, response=response)
        try:
            proc = subprocess.run(
                shlex.split(self.external_command),
                input=prompt.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout_s,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise JudgeFailed(f"judge hook failed: {exc}") from exc
        if proc.returncode != 0:
            raise JudgeFailed(f"judge hook exited with {proc.returncode}")
        try:
            grade = float(proc.stdout.decode("utf-8").strip())
        except ValueError as exc:
            raise JudgeFailed(f"judge hook returned non-numeric output") from exc
        if not 0.0 <= grade <= 1.0:
            raise JudgeFailed(f"judge grade {grade} outside [0, 1]")
        return grade


# ---------------------------------------------------------------------------
# Imperceptibility probe
# ---------------------------------------------------------------------------

_PLAIN_WHITESPACE = {" ", "\t", "\n", "\r"}


def steganographic_codepoints(text: str) -> bool:
    return any(is_whitespace_char(ch) and ch not in _PLAIN_WHITESPACE for ch in text)


@dataclass
class ImperceptibilityHeuristic:
    """Flags watermark-suspicious text.

    A text is flagged if it carries steganographic whitespace or if its
    rare-word fraction sits more than ``z_threshold`` standard deviations
    above the reference baseline. Baseline statistics come from
    unwatermarked reference texts of the same source so ordinary model
    noise does not trip the detector; only words of at least
    ``min_word_len`` characters count as rare-word candidates.
    """

    lexicon: set
    baseline_mean: float
    baseline_std: float
    z_threshold: float = 3.0
    min_word_len: int = 2

    @classmethod
    def fit(cls, lexicon: set, reference_texts, z_threshold: float = 3.0, min_word_len: int = 2):
        fracs = [
            _rare_fraction(t, lexicon, min_word_len)
            for t in reference_texts
        ]
        if not fracs:
            raise ValueError("need at least one reference text")
        mean = float(np.mean(fracs))
        std = max(float(np.std(fracs)), 0.01)
        return cls(lexicon, mean, std, z_threshold, min_word_len)

    def flags(self, text: str) -> bool:
        if steganographic_codepoints(text):
            return True
        z = (_rare_fraction(text, self.lexicon, self.min_word_len) - self.baseline_mean) / self.baseline_std
        return z > self.z_threshold


def _rare_fraction(text: str, lexicon: set, min_word_len: int) -> float:
    words = [
        s.text(text)
        for s in segment_words(text)
        if s.kind == "word" and len(s.text(text)) >= min_word_len
    ]
    if not words:
        return 0.0
    return sum(1 for w in words if w.lower() not in lexicon) / len(words)


def imperceptibility_probe(texts, classifier) -> float:
    """Fraction of the watermarked texts the classifier flags."""
    texts = list(texts)
    if not texts:
        raise ValueError("imperceptibility probe needs a non-empty text set")
    flag = classifier.flags if hasattr(classifier, "flags") else classifier
    return sum(1 for t in texts if flag(t)) / len(texts)
