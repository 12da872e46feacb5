"""The twelve watermark-removal attacks.

Ten post-text attacks share the text -> text interface of
``apply_attack``; the two pre-text attacks are a generation wrapper
(emoji) and a toy-model distillation procedure (distill) that the harness
wires in at the generation stage.

Contract notes:
* every attack is a pure function of (input, spec.seed) - bit-exact reruns;
* strength 0 (or an empty rule table) is the identity transform;
* lowercase, misspelling, synonym, contraction, and expansion never alter
  existing whitespace codepoints (contraction only collapses plain U+0020
  gaps, expansion only inserts new U+0020), which is what makes the
  format-watermark orthogonality checks meaningful.
"""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .errors import AttackFailed, ConfigError, Unsupported
from .keyed import derive_seed
from .lm import GenerationConfig, NgramModel, generate
from .text import TokenSeq, Vocabulary, detokenize, segment_words, tokenize

ATTACK_IDS = (
    "contraction",
    "expansion",
    "lowercase",
    "misspelling",
    "typo",
    "modify",
    "synonym",
    "paraphrase",
    "translation",
    "token",
    "emoji",
    "distill",
)

GENERATION_STAGE_ATTACKS = frozenset({"emoji", "distill"})

# Which schemes each attack can meaningfully target. Post-text attacks hit
# every scheme; emoji needs prefix-keyed sampling to scramble and distill
# needs a distillable generation-time watermark.
_ALL_SCHEMES = frozenset(
    {"kgw", "unigram", "inverse", "exponential", "convert", "whitemark", "linguistic", "unispach"}
)
_APPLICABILITY = {attack: _ALL_SCHEMES for attack in ATTACK_IDS}
_APPLICABILITY["emoji"] = frozenset({"kgw", "unigram", "inverse", "exponential"})
_APPLICABILITY["distill"] = frozenset({"kgw", "inverse", "exponential"})


def applicable(attack_id: str, scheme_id: str) -> bool:
    return scheme_id in _APPLICABILITY[attack_id]


@dataclass(frozen=True)
class AttackSpec:
    id: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.id not in ATTACK_IDS:
            raise ValueError(f"unknown attack id {self.id!r}")
        for name, value in self.params.items():
            if name.startswith("p") and isinstance(value, (int, float)):
                if not 0.0 <= float(value) <= 1.0:
                    raise ValueError(f"{self.id}: parameter {name}={value} outside [0, 1]")
        if self.id == "modify":
            total = sum(float(self.params.get(k, 0.0)) for k in ("p_dup", "p_del", "p_repl"))
            if total > 1.0 + 1e-12:
                raise ValueError("modify: p_dup + p_del + p_repl must not exceed 1")

    def label(self) -> str:
        if not self.params:
            return self.id
        inner = ",".join(f"{k}={self.params[k]!r}".replace("'", "") for k in sorted(self.params))
        return f"{self.id}({inner})"

    def rng(self, *extra) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(derive_seed(self.seed, "attack", self.id, *extra)))


@dataclass(frozen=True)
class ExternalRewriteHook:
    """Rewrite delegate: a child-process command or the built-in stub."""

    command: str | None = None
    stub_id: str = "paraphrase"
    timeout_s: float = 60.0


@dataclass
class AttackResources:
    """Shared material the post-text attacks draw on."""

    vocab: Vocabulary
    contractions: list  # [(expanded, contracted), ...]
    misspellings: dict  # word -> [variant, ...]
    synonyms: object  # SynonymTable
    modify_lexicon: list  # frequent replacement words
    hooks: dict = field(default_factory=dict)  # attack id -> ExternalRewriteHook
    qwerty: dict = field(default_factory=lambda: dict(_QWERTY_NEIGHBORS))


# ---------------------------------------------------------------------------
# Rule-table rewrites: contraction / expansion
# ---------------------------------------------------------------------------


def _match_case(template: str, replacement: str) -> str:
    if template.isupper() and len(template) > 1:
        return replacement.upper()
    if template[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _table_regex(forms) -> re.Pattern:
    ordered = sorted(forms, key=len, reverse=True)
    alt = "|".join(re.escape(f) for f in ordered)
    return re.compile(rf"(?<![\w'])(?:{alt})(?![\w'])", re.IGNORECASE)


def attack_contraction(text: str, resources: AttackResources) -> str:
    """Contract verb phrases ("is not" -> "isn't"); plain-space gaps only."""
    table = {exp.lower(): con for exp, con in resources.contractions}
    if not table:
        return text
    pattern = _table_regex(table.keys())
    return pattern.sub(lambda m: _match_case(m.group(0), table[m.group(0).lower()]), text)


def attack_expansion(text: str, resources: AttackResources) -> str:
    """Expand contractions ("don't" -> "do not"); inserts plain U+0020."""
    table = {con.lower(): exp for exp, con in resources.contractions}
    if not table:
        return text
    pattern = _table_regex(table.keys())
    return pattern.sub(lambda m: _match_case(m.group(0), table[m.group(0).lower()]), text)


def attack_lowercase(text: str) -> str:
    return text.lower()


# ---------------------------------------------------------------------------
# Per-word stochastic rewrites
# ---------------------------------------------------------------------------


def _rewrite_words(text: str, fn) -> str:
    """Apply fn(word_text, index) to every word span; whitespace untouched."""
    out = []
    widx = 0
    for span in segment_words(text):
        chunk = span.text(text)
        if span.kind == "word":
            chunk = fn(chunk, widx)
            widx += 1
        out.append(chunk)
    return "".join(out)


def attack_misspelling(text: str, p: float, seed_rng: np.random.Generator, resources: AttackResources) -> str:
    """Swap table-covered words for a common misspelling with probability p."""

    def fn(word, _i):
        hit = seed_rng.random() < p
        variants = resources.misspellings.get(word.lower())
        if hit and variants:
            choice = variants[int(seed_rng.integers(len(variants)))] if len(variants) > 1 else variants[0]
            return _match_case(word, choice)
        return word

    return _rewrite_words(text, fn)


_QWERTY_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")
_QWERTY_NEIGHBORS = {}
for _row_i, _row in enumerate(_QWERTY_ROWS):
    for _col, _ch in enumerate(_row):
        _nbrs = []
        if _col > 0:
            _nbrs.append(_row[_col - 1])
        if _col + 1 < len(_row):
            _nbrs.append(_row[_col + 1])
        for _other in (_row_i - 1, _row_i + 1):
            if 0 <= _other < len(_QWERTY_ROWS) and _col < len(_QWERTY_ROWS[_other]):
                _nbrs.append(_QWERTY_ROWS[_other][_col])
        _QWERTY_NEIGHBORS[_ch] = "".join(_nbrs)


def _one_typo(word: str, rng: np.random.Generator, qwerty: dict) -> str:
    ops = ["insert"]
    if len(word) >= 2:
        ops += ["swap", "drop"]
    op = ops[int(rng.integers(len(ops)))]
    if op == "swap":
        i = int(rng.integers(len(word) - 1))
        return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
    if op == "drop":
        i = int(rng.integers(len(word)))
        return word[:i] + word[i + 1 :]
    i = int(rng.integers(len(word)))
    nbrs = qwerty.get(word[i].lower(), word[i])
    ch = nbrs[int(rng.integers(len(nbrs)))] if nbrs else word[i]
    return word[: i + 1] + ch + word[i + 1 :]


def attack_typo(text: str, p: float, seed_rng: np.random.Generator, resources: AttackResources) -> str:
    """Apply one seeded character-level edit per hit word."""

    def fn(word, _i):
        if seed_rng.random() < p:
            return _one_typo(word, seed_rng, resources.qwerty)
        return word

    return _rewrite_words(text, fn)


@dataclass(frozen=True)
class ModifyParams:
    p_dup: float = 0.0
    p_del: float = 0.0
    p_repl: float = 0.0

    def __post_init__(self):
        if min(self.p_dup, self.p_del, self.p_repl) < 0:
            raise ValueError("modify probabilities must be non-negative")
        if self.p_dup + self.p_del + self.p_repl > 1.0 + 1e-12:
            raise ValueError("p_dup + p_del + p_repl must not exceed 1")


def attack_modify(text: str, params: ModifyParams, seed_rng: np.random.Generator, resources: AttackResources) -> str:
    """Per word: duplicate, delete, or replace with a lexicon word."""
    spans = segment_words(text)
    pieces = []
    skip_next_ws = False
    for idx, span in enumerate(spans):
        chunk = span.text(text)
        if span.kind == "whitespace" and skip_next_ws:
            skip_next_ws = False
            continue
        if span.kind != "word":
            pieces.append(chunk)
            continue
        u = seed_rng.random()
        if u < params.p_dup:
            pieces.append(chunk + " " + chunk)
        elif u < params.p_dup + params.p_del:
            # drop the word plus the gap that followed it
            if idx + 1 < len(spans) and spans[idx + 1].kind == "whitespace":
                skip_next_ws = True
            elif pieces and pieces[-1] and pieces[-1][-1] == " ":
                pieces[-1] = pieces[-1][:-1]
        elif u < params.p_dup + params.p_del + params.p_repl:
            lex = resources.modify_lexicon
            pieces.append(lex[int(seed_rng.integers(len(lex)))] if lex else chunk)
        else:
            pieces.append(chunk)
    return "".join(pieces)


def attack_synonym(text: str, p: float, seed_rng: np.random.Generator, resources: AttackResources) -> str:
    """Replace table-covered words with a random candidate synonym."""

    def fn(word, _i):
        hit = seed_rng.random() < p
        cands = resources.synonyms.candidates(word.lower())
        if hit and cands:
            cand = cands[int(seed_rng.integers(len(cands)))][0]
            return _match_case(word, cand)
        return word

    return _rewrite_words(text, fn)


# ---------------------------------------------------------------------------
# Token-level attack
# ---------------------------------------------------------------------------


def attack_token(
    text: str,
    p: float,
    mode: str,
    seed_rng: np.random.Generator,
    vocab: Vocabulary,
) -> str:
    """Re-encode the text and hit round(p * L) token positions with one op."""
    if mode not in ("replace", "delete", "insert"):
        raise ValueError(f"token attack mode must be replace|delete|insert, got {mode!r}")
    seq = tokenize(text, vocab)
    ids = list(seq.ids)
    k = round(p * len(ids))
    if k == 0:
        return detokenize(seq)
    positions = sorted(int(i) for i in seed_rng.choice(len(ids), size=k, replace=False))
    if mode == "replace":
        for pos in positions:
            ids[pos] = int(seed_rng.integers(vocab.size))
    elif mode == "delete":
        for pos in reversed(positions):
            del ids[pos]
    else:
        for pos in reversed(positions):
            ids.insert(pos, int(seed_rng.integers(vocab.size)))
    return detokenize(TokenSeq(tuple(ids), vocab))


# ---------------------------------------------------------------------------
# Paraphrase / Translation via rewrite hooks
# ---------------------------------------------------------------------------

_SENTENCE_SPLIT = re.compile(r"([.!?]+\s*)")


def rewrite_stub(text: str, seed: int, resources: AttackResources, stub_id: str = "paraphrase") -> str:
    """Deterministic stand-in for an external paraphrase/translation model.

    Three passes per sentence: rotate comma-separated clauses, swap words
    for synonyms at rate 0.3, then normalize contractions to their
    expanded forms.
    """
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "rewrite-stub", stub_id)))
    parts = _SENTENCE_SPLIT.split(text)
    out = []
    for i, part in enumerate(parts):
        if i % 2 == 1 or part == "":
            out.append(part)
            continue
        sentence = part
        clauses = sentence.split(", ")
        if len(clauses) > 1:
            shift = int(rng.integers(len(clauses)))
            clauses = clauses[shift:] + clauses[:shift]
            sentence = ", ".join(clauses)

        def syn(word, _i):
            hit = rng.random() < 0.3
            cands = resources.synonyms.candidates(word.lower())
            if hit and cands:
                return _match_case(word, cands[int(rng.integers(len(cands)))][0])
            return word

        sentence = _rewrite_words(sentence, syn)
        sentence = attack_expansion(sentence, resources)
        out.append(sentence)
    result = "".join(out)
    return result if result.strip() else text


def run_rewrite_hook(text: str, hook: ExternalRewriteHook, seed: int, resources: AttackResources) -> str:
    if hook.command:
        try:
            proc = subprocess.run(
                shlex.split(hook.command),
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=hook.timeout_s,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AttackFailed(f"rewrite hook failed: {exc}") from exc
        if proc.returncode != 0:
            raise AttackFailed(f"rewrite hook exited with {proc.returncode}")
        rewritten = proc.stdout.decode("utf-8")
        if not rewritten.strip():
            raise AttackFailed("rewrite hook produced empty output")
        return rewritten
    return rewrite_stub(text, seed, resources, hook.stub_id)


# ---------------------------------------------------------------------------
# Dispatch for the ten post-text attacks
# ---------------------------------------------------------------------------


def apply_attack(text: str, spec: AttackSpec, resources: AttackResources) -> str:
    """Run one post-text attack; generation-stage attacks are rejected."""
    if spec.id in GENERATION_STAGE_ATTACKS:
        raise ValueError(f"{spec.id} is a generation-stage attack, not a text transform")
    if spec.id == "contraction":
        return attack_contraction(text, resources)
    if spec.id == "expansion":
        return attack_expansion(text, resources)
    if spec.id == "lowercase":
        return attack_lowercase(text)
    if spec.id == "misspelling":
        return attack_misspelling(text, float(spec.params.get("p", 0.05)), spec.rng(), resources)
    if spec.id == "typo":
        return attack_typo(text, float(spec.params.get("p", 0.05)), spec.rng(), resources)
    if spec.id == "modify":
        params = ModifyParams(
            p_dup=float(spec.params.get("p_dup", 0.0)),
            p_del=float(spec.params.get("p_del", 0.0)),
            p_repl=float(spec.params.get("p_repl", 0.0)),
        )
        return attack_modify(text, params, spec.rng(), resources)
    if spec.id == "synonym":
        return attack_synonym(text, float(spec.params.get("p", 0.05)), spec.rng(), resources)
    if spec.id == "token":
        return attack_token(
            text,
            float(spec.params.get("p", 0.05)),
            str(spec.params.get("mode", "replace")),
            spec.rng(),
            resources.vocab,
        )
    if spec.id in ("paraphrase", "translation"):
        hook = resources.hooks.get(spec.id, ExternalRewriteHook(stub_id=spec.id))
        return run_rewrite_hook(text, hook, spec.seed, resources)
    raise ValueError(f"unhandled attack id {spec.id!r}")


# ---------------------------------------------------------------------------
# Emoji attack: generation wrapper
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmojiWrapper:
    """Force-emit the emoji token after every real token, then strip.

    The model keeps conditioning on the emoji-free history (a capable LLM
    stays coherent under the emoji prompt), while watermark hooks see the
    raw history with emojis, which scrambles every prefix window. Each
    real token is followed by ``repeat`` forced emojis, so budgets must be
    multiplied by (repeat + 1).
    """

    emoji_id: int
    repeat: int = 2

    @classmethod
    def for_vocab(cls, vocab: Vocabulary, emoji_token: str = "\U0001f600", repeat: int = 2) -> "EmojiWrapper":
        if emoji_token not in vocab:
            raise ConfigError(f"vocabulary lacks the emoji token {emoji_token!r}")
        return cls(vocab.lookup(emoji_token), repeat)

    @property
    def budget_multiplier(self) -> int:
        return self.repeat + 1

    def _is_forced(self, position: int) -> bool:
        return position % (self.repeat + 1) != 0

    def wrap_sampler(self, inner):
        def sampler(generated_ids, probs, rng):
            if self._is_forced(len(generated_ids)):
                return self.emoji_id
            if inner is not None:
                return inner(generated_ids, probs, rng)
            from .lm import default_sampler

            return default_sampler(generated_ids, probs, rng)

        return sampler

    def context_hook(self, generated_ids):
        return [t for t in generated_ids if t != self.emoji_id]

    def strip(self, seq: TokenSeq) -> TokenSeq:
        return TokenSeq(tuple(t for t in seq.ids if t != self.emoji_id), seq.vocab)


# ---------------------------------------------------------------------------
# Distill attack: train a student on the watermarked teacher
# ---------------------------------------------------------------------------


def attack_distill(
    teacher,
    scheme,
    mode: str = "logit-match",
    prompts=(),
    max_tokens: int = 128,
    seed: int = 0,
    pseudo_count: float = 10000.0,
) -> NgramModel:
    """Fit a student n-gram to the watermarked teacher.

    ``logit-match`` copies the teacher's watermark-transformed next-token
    distribution at every known context (scheme may be None to distill an
    unwatermarked teacher). ``sample-finetune`` regenerates a watermarked
    corpus from the teacher and retrains on it.
    """
    if not isinstance(teacher, NgramModel):
        raise Unsupported("distill is only defined for the toy n-gram backend")
    if mode not in ("logit-match", "sample-finetune"):
        raise ValueError("mode must be logit-match or sample-finetune")
    student = NgramModel(teacher.vocab, teacher.order, teacher.alpha)
    if mode == "logit-match":
        transform = scheme.logit_transform() if scheme is not None else None
        for ctx in teacher.contexts():
            dist = teacher.distribution(ctx)
            if transform is not None:
                # the context window doubles as the generated-ids tail
                dist = transform(tuple(ctx), dist)
            student.set_context_distribution(ctx, dist, weight=pseudo_count)
        return student
    sampler = scheme.make_sampler() if scheme is not None else None
    transform = scheme.logit_transform() if scheme is not None else None
    for i, prompt in enumerate(prompts):
        seq = generate(
            teacher,
            GenerationConfig(
                prompt=prompt,
                max_tokens=max_tokens,
                seed=derive_seed(seed, "distill", i),
                logit_transform=transform,
                sampler=sampler,
            ),
        )
        student.observe(seq.ids)
    return student
