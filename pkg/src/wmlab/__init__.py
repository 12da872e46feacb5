"""wmlab: a desk-scale laboratory for machine-generated-text watermarking.

Eight watermark schemes (five pre-text, three post-text), twelve removal
attacks, pluggable toy language models, empirical-null detection
calibration, and a reproducible benchmark harness with CSV/JSONL reports
and rendered figures.
"""

from .attacks import ATTACK_IDS, AttackSpec, applicable, apply_attack
from .errors import (
    AttackFailed,
    ConfigError,
    EmptyCorpus,
    EmptyInput,
    InvalidDistribution,
    JudgeFailed,
    KeyExhausted,
    ScenarioSkipped,
    Undecidable,
    UnknownSymbol,
    Unsupported,
    WmlabError,
)
from .keyed import PrefixContext, SecretKey
from .lm import FixtureModel, GenerationConfig, NgramModel, generate, train_ngram
from .metrics import quality_combine, robustness, robustness_mean, watermark_rate
from .pretext import DetectionReport
from .text import TokenSeq, Vocabulary, detokenize, segment_words, tokenize

__version__ = "0.1.0"

__all__ = [
    "ATTACK_IDS",
    "AttackFailed",
    "AttackSpec",
    "ConfigError",
    "DetectionReport",
    "EmptyCorpus",
    "EmptyInput",
    "FixtureModel",
    "GenerationConfig",
    "InvalidDistribution",
    "JudgeFailed",
    "KeyExhausted",
    "NgramModel",
    "PrefixContext",
    "ScenarioSkipped",
    "SecretKey",
    "TokenSeq",
    "Undecidable",
    "UnknownSymbol",
    "Unsupported",
    "Vocabulary",
    "WmlabError",
    "applicable",
    "apply_attack",
    "detokenize",
    "generate",
    "quality_combine",
    "robustness",
    "robustness_mean",
    "segment_words",
    "tokenize",
    "train_ngram",
    "watermark_rate",
]
