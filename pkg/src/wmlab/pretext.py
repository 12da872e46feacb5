"""The five pre-text watermark schemes, each as an (inject, detect) pair.

KGW and Unigram bias green-list logits; Exponential, Inverse, and Convert
override token sampling. Injection plugs into the generation loop through
``logit_transform`` / ``make_sampler``; detection reconstructs the keyed
values from the observed token sequence alone. Prefix windows are built
from generated tokens only (never the prompt), sentinel-padded at the
start, so both sides always agree.

Decision semantics are shared: the scheme's standardized statistic must
exceed a cutoff calibrated on an empirical null (see calibrate.py). The
reported ``DetectionReport.statistic`` stays in the raw formula units; the
cutoff is mapped into the same units so ``decision == statistic > cutoff``
holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, KeyExhausted
from .keyed import (
    PrefixContext,
    SecretKey,
    green_mask,
    keyed_bits,
    prefix_uniform,
    sample_key_sequence,
    uniform_vector,
)
from .text import TokenSeq

_LOG_EPS = 1e-300


@dataclass
class DetectionReport:
    """Common detection outcome for every scheme."""

    scheme: str
    statistic: float
    cutoff: float
    decision: bool
    length: int
    per_token_evidence: list | None = None
    undecidable: bool = False

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "statistic": self.statistic,
            "cutoff": self.cutoff,
            "decision": self.decision,
            "length": self.length,
        }


@dataclass(frozen=True)
class ZScoreReport:
    """KGW/Unigram detection detail: the green-count z-test."""

    green_count: int
    length: int
    z: float
    decision: bool


def kgw_z_score(green_count: int, length: int, gamma: float) -> float:
    """z = (|s|_G - gamma * L) / sqrt(L * gamma * (1 - gamma))."""
    return (green_count - gamma * length) / math.sqrt(length * gamma * (1.0 - gamma))


def exp_statistic_from_r(r_values) -> float:
    """Sum of ln(1 / (1 - r)) over the recomputed per-token uniforms."""
    r = np.asarray(r_values, dtype=np.float64)
    return float(-np.log1p(-np.minimum(r, 1.0 - 1e-16)).sum())


def convert_score_terms(bits, u_values) -> np.ndarray:
    """Per-token scores: ln(1/u) for bit-1 tokens, ln(1/(1-u)) for bit-0."""
    u = np.clip(np.asarray(u_values, dtype=np.float64), _LOG_EPS, 1.0 - 1e-16)
    bits = np.asarray(bits)
    return np.where(bits == 1, -np.log(u), -np.log1p(-u))


def inv_phi_terms(xi_rows, token_ids) -> np.ndarray:
    """Raw per-position terms -log(1 - xi[t, x_t])."""
    vals = xi_rows[np.arange(len(token_ids)), token_ids]
    return -np.log1p(-np.minimum(vals, 1.0 - 1e-16))


def _gumbel_argmax(r: np.ndarray, probs: np.ndarray) -> int:
    """argmax_i r_i^(1/p_i) over tokens with positive probability."""
    scores = np.full(len(probs), -np.inf)
    pos = probs > 0
    np.divide(np.log(np.maximum(r, _LOG_EPS)), probs, out=scores, where=pos)
    scores[~pos] = -np.inf
    return int(np.argmax(scores))


# ---------------------------------------------------------------------------
# KGW / Unigram: green-list logit bias
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KgwParams:
    key: SecretKey
    gamma: float = 0.25
    delta: float = 2.0
    prefix_h: int = 1
    fixed_prefix: bool = False  # Unigram mode: one constant green list

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie strictly between 0 and 1")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.prefix_h < 1:
            raise ValueError("prefix_h must be >= 1")


class KgwScheme:
    """Green-list logit bias with z-score detection."""

    kind = "pretext"

    def __init__(self, params: KgwParams, vocab_size: int, scheme_id: str | None = None):
        self.params = params
        self.vocab_size = vocab_size
        self.id = scheme_id or ("unigram" if params.fixed_prefix else "kgw")
        self._const_mask = (
            green_mask(params.key, PrefixContext.constant(), params.gamma, vocab_size)
            if params.fixed_prefix
            else None
        )
        self._bias = math.exp(params.delta)

    def _mask(self, generated_ids) -> np.ndarray:
        if self._const_mask is not None:
            return self._const_mask
        ctx = PrefixContext.from_ids(generated_ids, self.params.prefix_h)
        return green_mask(self.params.key, ctx, self.params.gamma, self.vocab_size)

    def transform(self, generated_ids, probs: np.ndarray) -> np.ndarray:
        """Multiply green-token mass by e^delta and renormalize.

        Equivalent to adding delta to green logits before the softmax; red
        tokens keep their relative ratios.
        """
        if self.params.delta == 0.0:
            return probs
        w = np.where(self._mask(generated_ids), probs * self._bias, probs)
        return w / w.sum()

    def logit_transform(self):
        return self.transform

    def make_sampler(self):
        return None

    def green_flags(self, seq: TokenSeq) -> np.ndarray:
        ids = seq.ids
        if self._const_mask is not None:
            return self._const_mask[np.asarray(ids, dtype=np.int64)]
        flags = np.empty(len(ids), dtype=bool)
        for i, tok in enumerate(ids):
            flags[i] = self._mask(ids[:i])[tok]
        return flags

    def statistic(self, seq: TokenSeq) -> tuple[float, int]:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        flags = self.green_flags(seq)
        return kgw_z_score(int(flags.sum()), len(seq), self.params.gamma), len(seq)

    # z is already length-standardized.
    def standardize(self, raw: float, length: int) -> float:
        return raw

    def unstandardize(self, std: float, length: int) -> float:
        return std

    def detect(self, seq: TokenSeq, calibration) -> DetectionReport:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        flags = self.green_flags(seq)
        length = len(seq)
        z = kgw_z_score(int(flags.sum()), length, self.params.gamma)
        cutoff = _resolve_cutoff(self, calibration, length)
        return DetectionReport(
            scheme=self.id,
            statistic=z,
            cutoff=cutoff,
            decision=z > cutoff,
            length=length,
            per_token_evidence=flags.tolist(),
        )

    def z_report(self, seq: TokenSeq, calibration) -> ZScoreReport:
        rep = self.detect(seq, calibration)
        return ZScoreReport(
            green_count=int(sum(rep.per_token_evidence)),
            length=rep.length,
            z=rep.statistic,
            decision=rep.decision,
        )

    def calibration_fingerprint(self) -> str:
        p = self.params
        import hashlib

        keyfp = hashlib.blake2b(p.key.key, digest_size=6).hexdigest()
        return (
            f"{self.id}:g={p.gamma}:d={p.delta}:h={p.prefix_h}"
            f":fixed={p.fixed_prefix}:key={keyfp}:V={self.vocab_size}"
        )


def unigram_scheme(key: SecretKey, vocab_size: int, gamma: float = 0.25, delta: float = 2.0) -> KgwScheme:
    return KgwScheme(
        KgwParams(key=key, gamma=gamma, delta=delta, prefix_h=1, fixed_prefix=True),
        vocab_size,
        scheme_id="unigram",
    )


# ---------------------------------------------------------------------------
# Exponential: keyed Gumbel-style sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpParams:
    key: SecretKey
    prefix_h: int = 4

    def __post_init__(self):
        if self.prefix_h < 1:
            raise ValueError("prefix_h must be >= 1")


class ExponentialScheme:
    """Select argmax r_i^(1/p_i); detect by summing ln(1/(1-r)) terms."""

    id = "exponential"
    kind = "pretext"

    def __init__(self, params: ExpParams, vocab_size: int):
        self.params = params
        self.vocab_size = vocab_size

    def logit_transform(self):
        return None

    def sample(self, generated_ids, probs: np.ndarray) -> int:
        ctx = PrefixContext.from_ids(generated_ids, self.params.prefix_h)
        r = uniform_vector(self.params.key, ctx, self.vocab_size)
        return _gumbel_argmax(r, probs)

    def make_sampler(self):
        return lambda generated_ids, probs, rng: self.sample(generated_ids, probs)

    def r_values(self, seq: TokenSeq) -> np.ndarray:
        ids = seq.ids
        out = np.empty(len(ids))
        for i, tok in enumerate(ids):
            ctx = PrefixContext.from_ids(ids[:i], self.params.prefix_h)
            out[i] = prefix_uniform(self.params.key, ctx, tok)
        return out

    def statistic(self, seq: TokenSeq) -> tuple[float, int]:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        return exp_statistic_from_r(self.r_values(seq)), len(seq)

    # Null terms are Exp(1): mean 1, variance 1 per token.
    def standardize(self, raw: float, length: int) -> float:
        return (raw - length) / math.sqrt(length)

    def unstandardize(self, std: float, length: int) -> float:
        return length + std * math.sqrt(length)

    def detect(self, seq: TokenSeq, calibration) -> DetectionReport:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        r = self.r_values(seq)
        length = len(seq)
        raw = exp_statistic_from_r(r)
        cutoff = _resolve_cutoff(self, calibration, length)
        return DetectionReport(
            scheme=self.id,
            statistic=raw,
            cutoff=cutoff,
            decision=raw > cutoff,
            length=length,
            per_token_evidence=r.tolist(),
        )

    def calibration_fingerprint(self) -> str:
        import hashlib

        keyfp = hashlib.blake2b(self.params.key.key, digest_size=6).hexdigest()
        return f"{self.id}:h={self.params.prefix_h}:key={keyfp}:V={self.vocab_size}"


# ---------------------------------------------------------------------------
# Inverse: position-keyed sampling with alignment-based detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvParams:
    key: SecretKey
    m: int
    shifts: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("key length m must be >= 1")
        if self.shifts < 1:
            raise ValueError("shifts must be >= 1")


class InverseScheme:
    """Inverse-transform sampling against a fixed key matrix xi.

    The sampling rule depends only on the number of tokens generated so
    far, not their identities. Detection aligns the observed tokens against
    xi with a Levenshtein-style maximum-score recursion, trying ``shifts``
    cyclic row offsets; insertion/deletion contributes the median null cell
    score so gaps are rate-neutral.
    """

    id = "inverse"
    kind = "pretext"

    def __init__(self, params: InvParams, vocab_size: int):
        self.params = params
        self.vocab_size = vocab_size
        self.xi = sample_key_sequence(params.key, params.m, vocab_size).xi
        self._cells = -np.log1p(-np.minimum(self.xi, 1.0 - 1e-16))
        self.gap_score = float(np.median(self._cells))

    def logit_transform(self):
        return None

    def sample(self, generated_ids, probs: np.ndarray) -> int:
        t = len(generated_ids)
        if t >= self.params.m:
            raise KeyExhausted(f"generation length {t} reached key length m={self.params.m}")
        return _gumbel_argmax(self.xi[t], probs)

    def make_sampler(self):
        return lambda generated_ids, probs, rng: self.sample(generated_ids, probs)

    def phi(self, seq: TokenSeq) -> float:
        """Raw unaligned statistic over the first min(L, m) positions."""
        ids = np.asarray(seq.ids[: self.params.m], dtype=np.int64)
        if len(ids) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        return float(self._cells[np.arange(len(ids)), ids].sum())

    def _align_score(self, ids: np.ndarray, shift: int) -> float:
        """Max-score global alignment of tokens against xi rows."""
        m = self.params.m
        g = self.gap_score
        rows = np.roll(np.arange(m), -shift)
        cells = self._cells[rows][:, ids]  # shape (m, L) -> cells[j, t]
        L = len(ids)
        steps = g * np.arange(m + 1)
        prev = steps.copy()  # D[0, j] = j gaps
        for t in range(1, L + 1):
            diag = prev[:-1] + cells[:, t - 1]
            up = prev[1:] + g
            cand = np.maximum(diag, up)
            cur = np.empty(m + 1)
            cur[0] = prev[0] + g
            # cur[j] = max(cand[j], cur[j-1] + g) via a running prefix max
            shifted = np.maximum.accumulate(
                np.concatenate(([cur[0] - steps[0]], cand - steps[1:]))
            )
            cur = shifted + steps
            prev = cur
        return float(prev[-1])

    def aligned_statistic(self, seq: TokenSeq) -> float:
        ids = np.asarray(seq.ids, dtype=np.int64)
        if len(ids) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        return max(self._align_score(ids, s) for s in range(self.params.shifts))

    def statistic(self, seq: TokenSeq) -> tuple[float, int]:
        return self.aligned_statistic(seq), len(seq)

    # Alignment score grows linearly with text length.
    def standardize(self, raw: float, length: int) -> float:
        return raw / length

    def unstandardize(self, std: float, length: int) -> float:
        return std * length

    def detect(self, seq: TokenSeq, calibration) -> DetectionReport:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        length = len(seq)
        raw = self.aligned_statistic(seq)
        cutoff = _resolve_cutoff(self, calibration, length)
        return DetectionReport(
            scheme=self.id,
            statistic=raw,
            cutoff=cutoff,
            decision=raw > cutoff,
            length=length,
            per_token_evidence=[self.phi(seq)],
        )

    def calibration_fingerprint(self) -> str:
        import hashlib

        p = self.params
        keyfp = hashlib.blake2b(p.key.key, digest_size=6).hexdigest()
        return f"{self.id}:m={p.m}:s={p.shifts}:key={keyfp}:V={self.vocab_size}"


# ---------------------------------------------------------------------------
# Convert: keyed bit-channel sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvertParams:
    key: SecretKey
    prefix_h: int = 4

    def __post_init__(self):
        if self.prefix_h < 1:
            raise ValueError("prefix_h must be >= 1")


class ConvertScheme:
    """Bit-string sampling: bias emission toward tokens hashing to 1.

    Each token id carries a keyed bit. Per step, the keyed coin u (index 0
    of the context's uniforms) picks the bit class to emit: 1 iff
    u <= mass(bit-1 tokens); the token is then drawn from the class by
    inverse CDF on a second keyed uniform (index 1). If the chosen class
    has zero mass the step falls back to unrestricted sampling and the
    sampler's ``fallbacks`` counter is bumped.
    """

    id = "convert"
    kind = "pretext"

    def __init__(self, params: ConvertParams, vocab_size: int):
        self.params = params
        self.vocab_size = vocab_size
        self.bit_map = keyed_bits(params.key, "bitmap", vocab_size)

    @property
    def bit_one_fraction(self) -> float:
        return float(self.bit_map.mean())

    def logit_transform(self):
        return None

    def sample(self, generated_ids, probs: np.ndarray, fallback_counter=None) -> int:
        ctx = PrefixContext.from_ids(generated_ids, self.params.prefix_h)
        u = prefix_uniform(self.params.key, ctx, 0)
        p1 = float(probs[self.bit_map == 1].sum())
        bit = 1 if u <= p1 else 0
        restricted = np.where(self.bit_map == bit, probs, 0.0)
        total = restricted.sum()
        if total <= 0.0:
            restricted = probs
            total = probs.sum()
            if fallback_counter is not None:
                fallback_counter.append(len(generated_ids))
        u2 = prefix_uniform(self.params.key, ctx, 1)
        cdf = np.cumsum(restricted / total)
        return int(np.searchsorted(cdf, u2, side="right").clip(0, len(probs) - 1))

    def make_sampler(self):
        fallbacks: list[int] = []

        def sampler(generated_ids, probs, rng):
            return self.sample(generated_ids, probs, fallback_counter=fallbacks)

        sampler.fallbacks = fallbacks
        return sampler

    def score_terms(self, seq: TokenSeq) -> np.ndarray:
        ids = seq.ids
        u = np.empty(len(ids))
        for i, _tok in enumerate(ids):
            ctx = PrefixContext.from_ids(ids[:i], self.params.prefix_h)
            u[i] = prefix_uniform(self.params.key, ctx, 0)
        bits = self.bit_map[np.asarray(ids, dtype=np.int64)]
        return convert_score_terms(bits, u)

    def statistic(self, seq: TokenSeq) -> tuple[float, int]:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        return float(self.score_terms(seq).sum()), len(seq)

    # Null terms are Exp(1) under either bit branch.
    def standardize(self, raw: float, length: int) -> float:
        return (raw - length) / math.sqrt(length)

    def unstandardize(self, std: float, length: int) -> float:
        return length + std * math.sqrt(length)

    def detect(self, seq: TokenSeq, calibration) -> DetectionReport:
        if len(seq) == 0:
            raise EmptyInput("cannot detect on an empty sequence")
        terms = self.score_terms(seq)
        length = len(seq)
        raw = float(terms.sum())
        cutoff = _resolve_cutoff(self, calibration, length)
        return DetectionReport(
            scheme=self.id,
            statistic=raw,
            cutoff=cutoff,
            decision=raw > cutoff,
            length=length,
            per_token_evidence=terms.tolist(),
        )

    def calibration_fingerprint(self) -> str:
        import hashlib

        keyfp = hashlib.blake2b(self.params.key.key, digest_size=6).hexdigest()
        return f"{self.id}:h={self.params.prefix_h}:key={keyfp}:V={self.vocab_size}"


def _resolve_cutoff(scheme, calibration, length: int) -> float:
    """Map a calibration (object or fixed standardized cutoff) to raw units."""
    if calibration is None:
        std = math.inf
    elif isinstance(calibration, (int, float)):
        std = float(calibration)
    else:
        std = calibration.cutoff_std(scheme, length)
    return scheme.unstandardize(std, length)
