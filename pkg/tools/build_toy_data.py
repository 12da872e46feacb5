#!/usr/bin/env python3
"""Regenerate the bundled toy dataset under src/wmlab/data/.

Deterministic: a fixed seed drives every choice, so reruns are
byte-identical. The corpus, prompt set, vocabulary, synonym table, and
misspelling table are built from one shared set of word lists, which keeps
the synonym/misspelling attacks and the lexical watermark well-covered on
generated text.
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from wmlab.text import Vocabulary, detokenize, segment_words, tokenize  # noqa: E402

OUT = ROOT / "src" / "wmlab" / "data"

SEED = 20240731
N_DOCS = 12000
N_PROMPTS = 300

# --- synonym groups: every member is used by the corpus generator ---------

ADJ_GROUPS = [
    ("big", "large", "huge", "vast"),
    ("small", "little", "tiny"),
    ("quick", "fast", "rapid", "swift"),
    ("slow", "sluggish", "unhurried"),
    ("happy", "glad", "cheerful", "joyful"),
    ("sad", "gloomy", "mournful"),
    ("bright", "brilliant", "radiant"),
    ("dark", "dim", "shadowy"),
    ("old", "ancient", "aged"),
    ("new", "fresh", "recent"),
    ("quiet", "silent", "hushed"),
    ("loud", "noisy", "thunderous"),
    ("strange", "odd", "peculiar", "curious"),
    ("beautiful", "lovely", "gorgeous"),
    ("angry", "furious", "irate"),
    ("calm", "serene", "tranquil"),
    ("brave", "bold", "fearless"),
    ("afraid", "scared", "fearful"),
    ("smart", "clever", "wise"),
    ("strong", "mighty", "powerful"),
    ("weak", "feeble", "frail"),
    ("cold", "chilly", "frosty"),
    ("warm", "mild", "balmy"),
    ("wet", "damp", "soggy"),
    ("dry", "arid", "parched"),
    ("clean", "spotless", "tidy"),
    ("dirty", "grimy", "filthy"),
    ("rich", "wealthy", "prosperous"),
    ("poor", "needy", "destitute"),
    ("empty", "vacant", "hollow"),
    ("full", "crowded", "packed"),
    ("heavy", "weighty", "hefty"),
    ("light", "airy", "weightless"),
    ("rough", "coarse", "jagged"),
    ("smooth", "sleek", "polished"),
    ("steep", "sheer", "abrupt"),
    ("gentle", "tender", "soft"),
    ("distant", "remote", "faraway"),
    ("near", "close", "nearby"),
    ("early", "prompt", "punctual"),
]

VERB_GROUPS = [
    ("walked", "strolled", "wandered", "marched"),
    ("ran", "sprinted", "dashed", "raced"),
    ("said", "stated", "declared", "remarked"),
    ("looked", "gazed", "stared", "glanced"),
    ("made", "built", "crafted", "assembled"),
    ("took", "grabbed", "seized", "snatched"),
    ("found", "discovered", "located", "spotted"),
    ("kept", "held", "retained", "guarded"),
    ("began", "started", "commenced"),
    ("ended", "finished", "concluded"),
    ("moved", "shifted", "drifted"),
    ("jumped", "leaped", "vaulted"),
    ("shouted", "yelled", "hollered"),
    ("whispered", "murmured", "muttered"),
    ("watched", "observed", "studied"),
    ("carried", "hauled", "lugged"),
    ("opened", "unlocked", "unsealed"),
    ("closed", "shut", "sealed"),
    ("grew", "expanded", "swelled"),
    ("fell", "dropped", "tumbled"),
    ("crossed", "traversed", "forded"),
    ("climbed", "scaled", "ascended"),
    ("followed", "trailed", "pursued"),
    ("reached", "attained", "gained"),
    ("left", "departed", "abandoned"),
    ("returned", "reappeared", "resurfaced"),
    ("waited", "lingered", "paused"),
    ("searched", "hunted", "scoured"),
    ("repaired", "mended", "fixed"),
    ("painted", "decorated", "adorned"),
]

NOUN_GROUPS = [
    ("house", "home", "dwelling", "cottage"),
    ("road", "path", "trail", "lane"),
    ("river", "stream", "brook", "creek"),
    ("forest", "woods", "grove", "thicket"),
    ("mountain", "peak", "summit", "ridge"),
    ("storm", "tempest", "squall", "gale"),
    ("ship", "boat", "vessel", "craft"),
    ("journey", "voyage", "trek", "expedition"),
    ("story", "tale", "account", "yarn"),
    ("friend", "companion", "ally", "comrade"),
    ("enemy", "foe", "rival", "adversary"),
    ("city", "town", "village", "settlement"),
    ("field", "meadow", "pasture", "clearing"),
    ("sound", "noise", "clamor", "racket"),
    ("lamp", "lantern", "torch", "beacon"),
    ("rock", "stone", "boulder", "pebble"),
    ("child", "youngster", "kid"),
    ("dog", "hound", "mutt"),
    ("bird", "fowl", "songbird"),
    ("teacher", "instructor", "tutor"),
    ("doctor", "physician", "healer"),
    ("farmer", "grower", "rancher"),
    ("sailor", "mariner", "seafarer"),
    ("soldier", "warrior", "fighter"),
    ("merchant", "trader", "vendor"),
    ("letter", "note", "message", "dispatch"),
    ("garden", "orchard", "plot"),
    ("bridge", "span", "crossing"),
    ("castle", "fortress", "citadel", "stronghold"),
    ("harbor", "port", "anchorage"),
    ("market", "bazaar", "fair"),
    ("window", "pane", "casement"),
    ("door", "gate", "portal"),
    ("coat", "jacket", "cloak"),
    ("box", "crate", "chest"),
    ("map", "chart", "plan"),
    ("book", "volume", "tome"),
    ("song", "tune", "melody", "ballad"),
    ("rain", "drizzle", "downpour"),
    ("wind", "breeze", "gust"),
]

ADVERBS = [
    "slowly", "quickly", "quietly", "loudly", "carefully", "eagerly",
    "calmly", "boldly", "gently", "firmly", "suddenly", "gradually",
    "happily", "sadly", "wearily", "bravely", "nervously", "patiently",
    "barely", "nearly", "almost", "often", "rarely", "always",
]

PREPOSITIONS = [
    "near", "under", "over", "beside", "behind", "across", "through",
    "toward", "within", "beyond", "around", "past", "along", "above",
]

BASE_VERBS = [
    "follow", "reach", "cross", "climb", "carry", "open", "close",
    "repair", "paint", "watch", "find", "keep", "move", "leave",
]

NEGATIONS = ["did not", "didn't", "would not", "wouldn't", "could not", "couldn't"]

CONTRACTION_PAIRS = [
    ("is not", "isn't"),
    ("are not", "aren't"),
    ("was not", "wasn't"),
    ("were not", "weren't"),
    ("do not", "don't"),
    ("does not", "doesn't"),
    ("did not", "didn't"),
    ("have not", "haven't"),
    ("has not", "hasn't"),
    ("had not", "hadn't"),
    ("will not", "won't"),
    ("would not", "wouldn't"),
    ("could not", "couldn't"),
    ("should not", "shouldn't"),
    ("must not", "mustn't"),
    ("cannot", "can't"),
    ("it is", "it's"),
    ("that is", "that's"),
    ("there is", "there's"),
    ("they are", "they're"),
    ("we are", "we're"),
    ("you are", "you're"),
    ("he is", "he's"),
    ("she is", "she's"),
    ("let us", "let's"),
    ("they will", "they'll"),
    ("we will", "we'll"),
    ("they have", "they've"),
    ("we have", "we've"),
]

CLASSIC_MISSPELLINGS = {
    "believe": ["beleive"],
    "receive": ["recieve"],
    "separate": ["seperate"],
    "definitely": ["definately"],
    "weird": ["wierd"],
    "until": ["untill"],
    "beginning": ["begining"],
    "friend": ["freind"],
    "beautiful": ["beutiful"],
    "tomorrow": ["tommorow"],
}


def flatten(groups):
    return [w for g in groups for w in g]


ADJS = flatten(ADJ_GROUPS)
VERBS = flatten(VERB_GROUPS)
NOUNS = flatten(NOUN_GROUPS)


def pick(rng, xs):
    return xs[int(rng.integers(len(xs)))]


def make_sentence(rng) -> str:
    t = int(rng.integers(10))
    adj = lambda: pick(rng, ADJS)  # noqa: E731
    noun = lambda: pick(rng, NOUNS)  # noqa: E731
    verb = lambda: pick(rng, VERBS)  # noqa: E731
    adv = lambda: pick(rng, ADVERBS)  # noqa: E731
    prep = lambda: pick(rng, PREPOSITIONS)  # noqa: E731
    if t == 0:
        s = f"the {adj()} {noun()} {verb()} {prep()} the {adj()} {noun()}"
    elif t == 1:
        s = f"a {adj()} {noun()} {verb()} {adv()} and the {noun()} {verb()}"
    elif t == 2:
        s = f"when the {noun()} {verb()}, the {adj()} {noun()} {verb()} {adv()}"
    elif t == 3:
        s = f"the {noun()} {pick(rng, NEGATIONS)} {pick(rng, BASE_VERBS)} the {adj()} {noun()}"
    elif t == 4:
        s = f"it was a {adj()} {noun()} that {verb()} {prep()} the {noun()}"
    elif t == 5:
        s = f"every {noun()} {prep()} the {adj()} {noun()} {verb()} {adv()}"
    elif t == 6:
        s = f"the {adj()} {noun()} and the {adj()} {noun()} {verb()} {prep()} the {noun()}"
    elif t == 7:
        s = f"some {noun()} {verb()} while the {noun()} {verb()} {prep()} the {adj()} {noun()}"
    elif t == 8:
        s = f"that {noun()} {verb()} the {noun()}, and it {verb()} {adv()}"
    else:
        s = f"after the {adj()} {noun()} {verb()}, a {adj()} {noun()} {verb()} {prep()} the {noun()}"
    s = s[0].upper() + s[1:]
    end = "." if rng.random() < 0.9 else ("!" if rng.random() < 0.5 else "?")
    return s + end


def make_corpus(rng) -> list[str]:
    docs = []
    for _ in range(N_DOCS):
        n = int(rng.integers(2, 5))
        docs.append(" ".join(make_sentence(rng) for _ in range(n)))
    return docs


def make_prompts(rng) -> list[dict]:
    prompts = []
    for i in range(N_PROMPTS):
        kind = i % 3
        if kind == 0:
            ins = f"Write a book report about the {pick(rng, ADJS)} {pick(rng, NOUNS)} and the {pick(rng, NOUNS)}."
        elif kind == 1:
            ins = f"Write a short story about a {pick(rng, ADJS)} {pick(rng, NOUNS)} near the {pick(rng, NOUNS)}."
        else:
            ins = f"Write a news article about the {pick(rng, NOUNS)} that {pick(rng, VERBS)} the {pick(rng, NOUNS)}."
        prompts.append({"id": f"p{i:03d}", "instruction": ins})
    return prompts


def pair_similarity(a: str, b: str) -> float:
    """Deterministic pseudo-similarity in [0.42, 0.95], symmetric."""
    import hashlib

    lo, hi = sorted((a, b))
    digest = hashlib.blake2b(f"{lo}|{hi}".encode(), digest_size=4).digest()
    frac = int.from_bytes(digest, "big") / 2**32
    return round(0.42 + 0.53 * frac, 3)


def make_synonyms() -> list[tuple[str, str, float]]:
    rows = []
    for group in ADJ_GROUPS + VERB_GROUPS + NOUN_GROUPS:
        for a in group:
            for b in group:
                if a != b:
                    rows.append((a, b, pair_similarity(a, b)))
    return rows


def misspell(word: str) -> str:
    if len(word) >= 5:
        i = 2
        if word[i] != word[i + 1]:
            cand = word[:i] + word[i + 1] + word[i] + word[i + 2 :]
        else:
            cand = word[:i] + word[i] + word[i:]
        if cand != word:
            return cand
    return word + word[-1]


def make_misspellings(all_words) -> dict:
    table = dict(CLASSIC_MISSPELLINGS)
    for w in sorted(all_words):
        if len(w) >= 5 and w.isalpha() and w not in table:
            table[w] = [misspell(w)]
    return table


FALLBACK_CHARS = (
    [chr(c) for c in range(ord("a"), ord("z") + 1)]
    + [chr(c) for c in range(ord("A"), ord("Z") + 1)]
    + [chr(c) for c in range(ord("0"), ord("9") + 1)]
    + list(" .,!?;:'\"()-")
    + ["’"]
    + ["\U0001f600"]
    + [" ", " ", " ", " ", " ", " ", " ",
       " ", " ", " ", " ", " ", "　"]
)


def build_vocab(docs, prompts, synonym_rows) -> Vocabulary:
    surfaces = set()
    texts = list(docs) + [p["instruction"] for p in prompts]
    for text in texts:
        for span in segment_words(text):
            if span.kind == "word":
                surfaces.add(span.text(text))
    for _w, cand, _s in synonym_rows:
        surfaces.add(cand)
        surfaces.add(cand[0].upper() + cand[1:])
    tokens = []
    for s in sorted(surfaces):
        tokens.append(s)
        tokens.append(" " + s)
    for ch in FALLBACK_CHARS:
        if ch not in surfaces:
            tokens.append(ch)
    # dedupe preserving order (single chars may collide with surfaces)
    seen = set()
    uniq = [t for t in tokens if not (t in seen or seen.add(t))]
    return Vocabulary(uniq)


def main() -> None:
    rng = np.random.Generator(np.random.PCG64(SEED))
    OUT.mkdir(parents=True, exist_ok=True)

    docs = make_corpus(rng)
    prompts = make_prompts(rng)
    synonym_rows = make_synonyms()
    vocab = build_vocab(docs, prompts, synonym_rows)

    all_words = {w for doc in docs for s in segment_words(doc) if s.kind == "word" for w in [s.text(doc).lower()]}
    missp = make_misspellings(all_words)

    for doc in docs[:200]:
        assert detokenize(tokenize(doc, vocab)) == doc, doc

    (OUT / "corpus_toy.txt").write_text("\n".join(docs) + "\n", encoding="utf-8")
    vocab.to_file(OUT / "vocab_toy.txt")
    (OUT / "prompts_toy.json").write_text(
        json.dumps(prompts, indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    with open(OUT / "synonyms.tsv", "w", encoding="utf-8") as f:
        for w, c, s in synonym_rows:
            f.write(f"{w}\t{c}\t{s}\n")
    with open(OUT / "contractions.tsv", "w", encoding="utf-8") as f:
        for exp, con in CONTRACTION_PAIRS:
            f.write(f"{exp}\t{con}\n")
    with open(OUT / "misspellings.tsv", "w", encoding="utf-8") as f:
        for w in sorted(missp):
            for variant in missp[w]:
                f.write(f"{w}\t{variant}\n")

    counts = Counter(w for doc in docs for s in segment_words(doc) if s.kind == "word" for w in [s.text(doc)])
    print(f"docs={len(docs)} prompts={len(prompts)} vocab={vocab.size} "
          f"distinct_words={len(counts)} synonym_rows={len(synonym_rows)} misspellings={len(missp)}")


if __name__ == "__main__":
    main()
