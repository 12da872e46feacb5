"""Empirical-null detection thresholds.

Every scheme shares one decision semantic: the standardized detection
statistic must exceed a cutoff calibrated on unwatermarked text. The null
distribution for a (scheme, length bucket) pair is built by running the
scheme's detection statistic on ``null_count`` seeded unwatermarked model
generations of the bucket length, so text-distribution effects (repeated
n-grams, keyed word-frequency bias) are baked into the null.

The cutoff is the empirical ``quantile`` order statistic pushed up by the
one-sided Dvoretzky-Kiefer-Wolfowitz margin for the sample size, so the
false-positive contract (at most 1 - quantile) holds with confidence
``confidence`` instead of only on average. Draws are cached in memory and,
when a cache directory is configured, on disk; ``wmlab calibrate`` warms
that cache.
"""

from __future__ import annotations

import hashlib
import math
import os

import numpy as np

from .keyed import derive_seed
from .lm import GenerationConfig, generate
from .text import TokenSeq


def model_fingerprint(model) -> str:
    """Cheap stable digest of a backend's identity and training state."""
    h = hashlib.blake2b(digest_size=8)
    h.update(getattr(model, "backend", "unknown").encode())
    h.update(repr(len(model.vocab)).encode())
    counts = getattr(model, "_counts", None)
    if counts is not None:
        h.update(repr((model.order, model.alpha, len(counts))).encode())
        total = 0.0
        acc = 0
        for ctx, counter in counts.items():
            acc ^= hash(ctx) & 0xFFFFFFFF
            total += sum(counter.values())
        h.update(repr((acc, total)).encode())
    table = getattr(model, "_table", None)
    if table is not None:
        for k in sorted(table, key=repr):
            h.update(repr(k).encode())
            h.update(np.asarray(table[k]).tobytes())
    return h.hexdigest()


def dkw_cutoff_index(n: int, quantile: float, confidence: float) -> int:
    """0-based order-statistic index for the adjusted quantile."""
    eps = math.sqrt(math.log(1.0 / (1.0 - confidence)) / (2.0 * n))
    q_adj = min(quantile + eps, 1.0)
    return min(n - 1, max(0, math.ceil(q_adj * n) - 1))


class NullCalibration:
    """Per-(scheme, length bucket) cutoff provider with caching."""

    def __init__(
        self,
        model,
        null_count: int = 1000,
        quantile: float = 0.95,
        confidence: float = 0.95,
        bucket_size: int = 32,
        seed: int = 0,
        cache_dir: str | None = None,
    ):
        if not 0 < quantile < 1:
            raise ValueError("quantile must lie strictly between 0 and 1")
        self.model = model
        self.null_count = int(null_count)
        self.quantile = float(quantile)
        self.confidence = float(confidence)
        self.bucket_size = int(bucket_size)
        self.seed = int(seed)
        self.cache_dir = cache_dir
        self._model_fp = model_fingerprint(model)
        self._draws: dict = {}

    def bucket_of(self, length: int) -> int:
        return self.bucket_size * max(1, math.ceil(length / self.bucket_size))

    def _cache_key(self, scheme, bucket: int) -> str:
        raw = f"{scheme.calibration_fingerprint()}|{self._model_fp}|b={bucket}|n={self.null_count}|s={self.seed}"
        return hashlib.blake2b(raw.encode(), digest_size=12).hexdigest()

    def _null_rng(self, cache_key: str, i: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(derive_seed(self.seed, "null", cache_key, i)))

    def _draw_one(self, scheme, bucket: int, rng: np.random.Generator) -> float:
        null_fn = getattr(scheme, "null_statistic", None)
        if null_fn is not None:
            return float(null_fn(self.model, bucket, rng))
        seq = generate(
            self.model,
            GenerationConfig(
                prompt=TokenSeq((), self.model.vocab),
                max_tokens=bucket,
                seed=int(rng.integers(2**62)),
            ),
        )
        raw, length = scheme.statistic(seq)
        return float(scheme.standardize(raw, length))

    def null_draws(self, scheme, length: int) -> np.ndarray:
        bucket = self.bucket_of(length)
        key = self._cache_key(scheme, bucket)
        draws = self._draws.get(key)
        if draws is not None:
            return draws
        path = None
        if self.cache_dir:
            path = os.path.join(self.cache_dir, f"null_{key}.npy")
            if os.path.exists(path):
                draws = np.load(path)
                self._draws[key] = draws
                return draws
        draws = np.sort(
            [self._draw_one(scheme, bucket, self._null_rng(key, i)) for i in range(self.null_count)]
        )
        self._draws[key] = draws
        if path is not None:
            os.makedirs(self.cache_dir, exist_ok=True)
            np.save(path, draws)
        return draws

    def cutoff_std(self, scheme, length: int) -> float:
        draws = self.null_draws(scheme, length)
        return float(draws[dkw_cutoff_index(len(draws), self.quantile, self.confidence)])

    def warm(self, schemes, lengths) -> None:
        for scheme in schemes:
            if getattr(scheme, "calibration_fingerprint", None) is None:
                continue  # degenerate-null schemes need no cache
            for length in lengths:
                self.null_draws(scheme, length)
