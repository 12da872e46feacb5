"""TOML configuration loading and object wiring.

``load_config`` merges a user file over the bundled defaults;
``build_session`` turns the merged dict into trained models, scheme
instances, attack specs, and shared resources for the harness and CLI.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import data as datamod
from .attacks import ATTACK_IDS, AttackResources, AttackSpec, EmojiWrapper, ExternalRewriteHook
from .calibrate import NullCalibration
from .keyed import SecretKey
from .lm import train_ngram
from .metrics import ImperceptibilityHeuristic, QualityJudge
from .posttext import (
    LinguisticParams,
    LinguisticScheme,
    UnispachParams,
    UnispachScheme,
    WhitemarkParams,
    WhitemarkScheme,
)
from .pretext import (
    ConvertParams,
    ConvertScheme,
    ExpParams,
    ExponentialScheme,
    InvParams,
    InverseScheme,
    KgwParams,
    KgwScheme,
)

SCHEME_IDS = ("kgw", "unigram", "exponential", "inverse", "convert", "whitemark", "unispach", "linguistic")


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None) -> dict:
    with open(datamod.data_path("default_config.toml"), "rb") as f:
        cfg = tomllib.load(f)
    if path:
        with open(path, "rb") as f:
            cfg = _deep_merge(cfg, tomllib.load(f))
    return cfg


@dataclass
class Session:
    """Everything a run needs, built once from a config dict."""

    cfg: dict
    vocab: object
    corpus: list
    model: object
    schemes: dict
    attack_specs: dict
    resources: AttackResources
    calibration: NullCalibration
    judge: QualityJudge
    lexicon: set
    prompts: list
    emoji: EmojiWrapper | None
    master_seed: int
    max_tokens: int


def build_schemes(cfg: dict, vocab_size: int, max_tokens: int, synonyms) -> dict:
    sc = cfg["schemes"]
    emoji_mult = int(cfg.get("emoji", {}).get("repeat", 2)) + 1
    schemes: dict = {}
    if sc["kgw"].get("enabled", True):
        schemes["kgw"] = KgwScheme(
            KgwParams(
                key=SecretKey.from_hex(sc["kgw"]["key"]),
                gamma=float(sc["kgw"].get("gamma", 0.25)),
                delta=float(sc["kgw"].get("delta", 2.0)),
                prefix_h=int(sc["kgw"].get("prefix_h", 1)),
            ),
            vocab_size,
        )
    if sc["unigram"].get("enabled", True):
        schemes["unigram"] = KgwScheme(
            KgwParams(
                key=SecretKey.from_hex(sc["unigram"]["key"]),
                gamma=float(sc["unigram"].get("gamma", 0.25)),
                delta=float(sc["unigram"].get("delta", 2.0)),
                prefix_h=1,
                fixed_prefix=True,
            ),
            vocab_size,
            scheme_id="unigram",
        )
    if sc["exponential"].get("enabled", True):
        schemes["exponential"] = ExponentialScheme(
            ExpParams(
                key=SecretKey.from_hex(sc["exponential"]["key"]),
                prefix_h=int(sc["exponential"].get("prefix_h", 4)),
            ),
            vocab_size,
        )
    if sc["inverse"].get("enabled", True):
        m = int(sc["inverse"].get("m", 0))
        if m <= 0:
            m = emoji_mult * max_tokens + 64
        schemes["inverse"] = InverseScheme(
            InvParams(
                key=SecretKey.from_hex(sc["inverse"]["key"]),
                m=m,
                shifts=int(sc["inverse"].get("shifts", 2)),
            ),
            vocab_size,
        )
    if sc["convert"].get("enabled", True):
        schemes["convert"] = ConvertScheme(
            ConvertParams(
                key=SecretKey.from_hex(sc["convert"]["key"]),
                prefix_h=int(sc["convert"].get("prefix_h", 4)),
            ),
            vocab_size,
        )
    if sc["whitemark"].get("enabled", True):
        schemes["whitemark"] = WhitemarkScheme(
            WhitemarkParams(
                mark_codepoint=sc["whitemark"].get("mark_codepoint", " "),
                replace_prob=float(sc["whitemark"].get("replace_prob", 0.6)),
                rng_seed=int(sc["whitemark"].get("seed", 0)),
            )
        )
    if sc["unispach"].get("enabled", True):
        kwargs = dict(
            replace_prob=float(sc["unispach"].get("replace_prob", 0.6)),
            rng_seed=int(sc["unispach"].get("seed", 0)),
        )
        if sc["unispach"].get("codepoints"):
            kwargs["codepoint_set"] = tuple(sc["unispach"]["codepoints"])
        schemes["unispach"] = UnispachScheme(UnispachParams(**kwargs))
    if sc["linguistic"].get("enabled", True):
        schemes["linguistic"] = LinguisticScheme(
            LinguisticParams(
                key=SecretKey.from_hex(sc["linguistic"]["key"]),
                synonym_table=synonyms,
                similarity_threshold=float(sc["linguistic"].get("similarity_threshold", 0.5)),
                max_candidates=int(sc["linguistic"].get("max_candidates", 8)),
            )
        )
    return schemes


def build_attack_specs(cfg: dict) -> dict:
    out: dict = {}
    for attack_id in ATTACK_IDS:
        acfg = dict(cfg.get("attacks", {}).get(attack_id, {}))
        if not acfg.pop("enabled", True):
            continue
        acfg.pop("command", None)
        params = {k: v for k, v in acfg.items()}
        out[attack_id] = AttackSpec(id=attack_id, params=params)
    return out


def build_session(cfg: dict) -> Session:
    vocab = datamod.load_vocab(cfg["model"].get("vocab"))
    corpus = datamod.load_corpus(cfg["model"].get("corpus"))
    model = train_ngram(
        corpus,
        vocab,
        order=int(cfg["model"].get("order", 2)),
        alpha=float(cfg["model"].get("alpha", 0.1)),
    )
    max_tokens = int(cfg["run"].get("max_tokens", 128))
    synonyms = datamod.load_synonyms(
        cfg["schemes"]["linguistic"].get("synonyms"),
        int(cfg["schemes"]["linguistic"].get("max_candidates", 8)),
    )
    schemes = build_schemes(cfg, vocab.size, max_tokens, synonyms)

    hooks = {}
    for attack_id in ("paraphrase", "translation"):
        cmd = cfg.get("attacks", {}).get(attack_id, {}).get("command", "")
        hooks[attack_id] = ExternalRewriteHook(command=cmd or None, stub_id=attack_id)
    resources = AttackResources(
        vocab=vocab,
        contractions=datamod.load_contractions(),
        misspellings=datamod.load_misspellings(),
        synonyms=synonyms,
        modify_lexicon=datamod.modify_lexicon(corpus),
        hooks=hooks,
    )

    cal_cfg = cfg.get("calibration", {})
    calibration = NullCalibration(
        model,
        null_count=int(cal_cfg.get("null_count", 1000)),
        quantile=float(cal_cfg.get("quantile", 0.95)),
        confidence=float(cal_cfg.get("confidence", 0.95)),
        bucket_size=int(cal_cfg.get("bucket_size", 32)),
        seed=int(cal_cfg.get("seed", 7)),
        cache_dir=cal_cfg.get("cache_dir") or None,
    )

    lexicon = datamod.corpus_lexicon(corpus)
    judge_cmd = cfg.get("judge", {}).get("command", "")
    judge = QualityJudge(
        reference_model=model,
        lexicon=lexicon,
        external_command=judge_cmd or None,
    )

    prompts = datamod.load_prompts_file(cfg["dataset"].get("path"))
    limit = int(cfg["dataset"].get("limit", 0))
    if limit:
        prompts = prompts[:limit]

    emoji = None
    emoji_cfg = cfg.get("emoji", {})
    token = emoji_cfg.get("token", "\U0001f600")
    if token in vocab:
        emoji = EmojiWrapper.for_vocab(vocab, token, int(emoji_cfg.get("repeat", 2)))

    return Session(
        cfg=cfg,
        vocab=vocab,
        corpus=corpus,
        model=model,
        schemes=schemes,
        attack_specs=build_attack_specs(cfg),
        resources=resources,
        calibration=calibration,
        judge=judge,
        lexicon=lexicon,
        prompts=prompts,
        emoji=emoji,
        master_seed=int(cfg["run"].get("master_seed", 0)),
        max_tokens=max_tokens,
    )
