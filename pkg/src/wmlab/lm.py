"""Pluggable next-token-distribution backends and the generation loop.

Two built-in backends: an add-alpha smoothed n-gram model (trainable, cheap
to re-train for distillation) and a fixture model with hand-set
distributions for tests. Watermark schemes plug into ``generate`` at exactly
two points: a logit transform applied to the next-token distribution, and a
sampler override replacing the default multinomial draw.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCorpus, InvalidDistribution
from .keyed import derive_seed
from .text import TokenSeq, Vocabulary, tokenize

# Default generation budget; callers normally configure something smaller.
DEFAULT_MAX_TOKENS = 1024

_SUM_TOL = 1e-9


def check_distribution(probs: np.ndarray, vocab_size: int) -> np.ndarray:
    """Validate a next-token distribution; returns it unchanged."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (vocab_size,):
        raise InvalidDistribution(f"expected shape ({vocab_size},), got {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise InvalidDistribution("distribution has non-finite entries")
    if np.any(probs < 0):
        raise InvalidDistribution("distribution has negative entries")
    if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
        raise InvalidDistribution(f"distribution sums to {probs.sum()!r}")
    return probs


class NgramModel:
    """Add-alpha smoothed n-gram over token ids.

    ``distribution(context)`` conditions on the last ``order - 1`` ids.
    Smoothed vectors are cached per context; the cache is read-only after
    warm-up so concurrent generate calls stay safe.
    """

    backend = "ngram"

    def __init__(self, vocab: Vocabulary, order: int, alpha: float = 0.1):
        if not 1 <= order <= 5:
            raise ValueError("order must be in [1, 5]")
        self.vocab = vocab
        self.order = order
        self.alpha = float(alpha)
        self.context_limit = 4096
        self._counts: dict = defaultdict(Counter)
        self._dist_cache: dict = {}

    def observe(self, ids, weight: float = 1.0) -> None:
        ctx_len = self.order - 1
        ids = tuple(ids)
        for i, tok in enumerate(ids):
            ctx = ids[max(0, i - ctx_len) : i]
            if len(ctx) == ctx_len:
                self._counts[ctx][tok] += weight
        self._dist_cache.clear()

    def set_context_distribution(self, ctx, probs, weight: float = 1000.0) -> None:
        """Overwrite one context's counts with pseudo-counts (distillation)."""
        ctx = tuple(ctx)
        probs = np.asarray(probs, dtype=np.float64)
        self._counts[ctx] = Counter(
            {i: float(probs[i]) * weight for i in np.nonzero(probs)[0]}
        )
        self._dist_cache.pop(ctx, None)

    def contexts(self):
        return list(self._counts.keys())

    def distribution(self, context) -> np.ndarray:
        ctx_len = self.order - 1
        ctx = tuple(context[-ctx_len:]) if ctx_len else ()
        if len(ctx) < ctx_len:
            ctx = ("<pad>",) * (ctx_len - len(ctx)) + ctx
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        v = self.vocab.size
        probs = np.full(v, self.alpha, dtype=np.float64)
        counts = self._counts.get(ctx)
        total = self.alpha * v
        if counts:
            for tok, c in counts.items():
                probs[tok] += c
            total += sum(counts.values())
        probs /= total
        self._dist_cache[ctx] = probs
        return probs


def train_ngram(corpus, vocab: Vocabulary, order: int, alpha: float = 0.1) -> NgramModel:
    """Train the toy n-gram on a list of document strings."""
    docs = list(corpus)
    if not docs:
        raise EmptyCorpus("cannot train on an empty corpus")
    model = NgramModel(vocab, order, alpha)
    for doc in docs:
        model.observe(tokenize(doc, vocab).ids)
    return model


class FixtureModel:
    """Deterministic test backend: fixed per-context distributions.

    ``table`` maps a context tuple (or () for the default) to a probability
    vector. Unknown contexts fall back to the default.
    """

    backend = "fixture"

    def __init__(self, vocab: Vocabulary, table: dict):
        self.vocab = vocab
        self.context_limit = 4096
        self._table = {tuple(k): np.asarray(v, dtype=np.float64) for k, v in table.items()}
        if () not in self._table:
            raise ValueError("fixture table needs a () default entry")

    def distribution(self, context) -> np.ndarray:
        context = tuple(context)
        for span in range(min(len(context), 4), 0, -1):
            hit = self._table.get(context[-span:])
            if hit is not None:
                return hit
        return self._table[()]


@dataclass
class GenerationConfig:
    """Everything `generate` needs besides the model."""

    prompt: TokenSeq
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: int = 0
    logit_transform: object = None  # callable(generated_ids, probs) -> probs
    sampler: object = None  # callable(generated_ids, probs, rng) -> token id
    terminator: int | None = None
    context_hook: object = None  # callable(generated_ids) -> ids the model conditions on

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def default_sampler(generated_ids, probs: np.ndarray, rng: np.random.Generator) -> int:
    """Multinomial draw via inverse CDF on the seeded stream."""
    u = rng.random()
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(probs) - 1))


def generate(model, cfg: GenerationConfig) -> TokenSeq:
    """Run the generation loop with optional watermark hooks.

    Pure function of (model, cfg): the RNG stream is derived from cfg.seed
    and each call owns it. Hooks see the generated-only id sequence, never
    the prompt, so detection-side reconstruction matches by construction.
    """
    vocab = model.vocab
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, "generate")))
    generated: list[int] = []
    context = list(cfg.prompt.ids)
    for _ in range(cfg.max_tokens):
        model_ctx = context if cfg.context_hook is None else list(cfg.prompt.ids) + list(
            cfg.context_hook(generated)
        )
        probs = model.distribution(tuple(model_ctx[-model.context_limit :]))
        if cfg.logit_transform is not None:
            probs = check_distribution(cfg.logit_transform(tuple(generated), probs), vocab.size)
        if cfg.sampler is not None:
            tok = int(cfg.sampler(tuple(generated), probs, rng))
        else:
            tok = default_sampler(tuple(generated), probs, rng)
        generated.append(tok)
        context.append(tok)
        if cfg.terminator is not None and tok == cfg.terminator:
            break
    return TokenSeq(tuple(generated), vocab)
