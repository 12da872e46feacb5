"""Scenario orchestration: generate, attack, detect, judge, aggregate.

A scenario is (scheme, ordered attack chain) run over the prompt dataset.
Generation-stage attacks (emoji, distill) take effect at generation time;
post-text attacks apply to the finished text in chain order. Every stage
seeds its randomness from hash(master_seed, prompt_id, stage), so any
scenario is independently reproducible and two runs with the same master
seed emit byte-identical CSV/JSONL reports. Wall-clock timings are kept
out of those files (timings.csv carries them) so the determinism contract
can hold byte-for-byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field

from .attacks import (
    GENERATION_STAGE_ATTACKS,
    AttackSpec,
    apply_attack,
    applicable,
    attack_distill,
)
from .errors import AttackFailed, ConfigError, JudgeFailed, ScenarioSkipped, Undecidable
from .keyed import derive_seed
from .lm import GenerationConfig, generate
from .metrics import quality_combine, robustness, watermark_rate
from .text import TokenSeq, detokenize, tokenize


@dataclass(frozen=True)
class PromptItem:
    id: str
    instruction: str


class PromptDataset:
    """Instruction records with unique ids; JSON list of {id, instruction}."""

    def __init__(self, items, name: str = "dataset"):
        self.items = [
            it if isinstance(it, PromptItem) else PromptItem(str(it["id"]), str(it["instruction"]))
            for it in items
        ]
        self.name = name
        if not self.items:
            raise ValueError("prompt dataset must be non-empty")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("prompt ids must be unique")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @classmethod
    def from_records(cls, records, name: str = "dataset", limit: int = 0):
        if limit:
            records = list(records)[:limit]
        return cls(records, name)


@dataclass
class StageTimings:
    inject_s: float = 0.0
    attack_s: float = 0.0
    detect_s: float = 0.0
    judge_s: float = 0.0

    def add(self, other: "StageTimings") -> None:
        self.inject_s += other.inject_s
        self.attack_s += other.attack_s
        self.detect_s += other.detect_s
        self.judge_s += other.judge_s


@dataclass
class EvalRecord:
    prompt_id: str
    clean_text: str
    watermarked_text: str
    attacked_text: str
    q_clean: float
    q_attack: float
    decision: bool
    statistic: float
    undecidable: bool = False


@dataclass
class ScenarioResult:
    scheme_id: str
    chain: tuple
    records: list
    q_clean: float
    q_attack: float
    quality: float
    rate: float
    score: float
    timings: StageTimings
    seed: int

    @property
    def chain_label(self) -> str:
        return chain_label(self.chain)


@dataclass
class SkippedScenario:
    scheme_id: str
    chain_label: str
    reason: str


def chain_label(chain) -> str:
    if not chain:
        return "none"
    return "+".join(spec.label() for spec in chain)


class RunContext:
    """Session plus per-run caches shared across scenarios."""

    def __init__(self, session, dataset: PromptDataset | None = None, max_tokens: int | None = None):
        self.session = session
        self.dataset = dataset or PromptDataset.from_records(session.prompts)
        self.max_tokens = max_tokens or session.max_tokens
        self._baseline: dict = {}
        self._wm_cache: dict = {}
        self._students: dict = {}
        self._prompt_seqs: dict = {}

    # -- generation helpers -------------------------------------------------

    def prompt_seq(self, item: PromptItem) -> TokenSeq:
        seq = self._prompt_seqs.get(item.id)
        if seq is None:
            seq = tokenize(item.instruction, self.session.vocab)
            self._prompt_seqs[item.id] = seq
        return seq

    def baseline_text(self, item: PromptItem) -> str:
        """Unwatermarked generation from the clean model."""
        text = self._baseline.get(item.id)
        if text is None:
            seq = generate(
                self.session.model,
                GenerationConfig(
                    prompt=self.prompt_seq(item),
                    max_tokens=self.max_tokens,
                    seed=derive_seed(self.session.master_seed, item.id, "generate"),
                ),
            )
            text = detokenize(seq)
            self._baseline[item.id] = text
        return text

    def student_model(self, scheme, spec: AttackSpec):
        mode = str(spec.params.get("mode", self.session.cfg.get("distill", {}).get("mode", "logit-match")))
        key = (scheme.id, mode)
        student = self._students.get(key)
        if student is None:
            dcfg = self.session.cfg.get("distill", {})
            n_prompts = int(spec.params.get("prompts", dcfg.get("prompts", 500)))
            prompt_seqs = [self.prompt_seq(it) for it in list(self.dataset)[:n_prompts]]
            student = attack_distill(
                self.session.model,
                scheme,
                mode=mode,
                prompts=prompt_seqs,
                max_tokens=int(dcfg.get("prompt_tokens", 96)),
                seed=derive_seed(self.session.master_seed, "distill", scheme.id),
            )
            self._students[key] = student
        return student

    def _generate_once(self, scheme, item: PromptItem, gen_attacks) -> str:
        """One watermarked (or attacker-model) generation for this prompt."""
        model = self.session.model
        emoji = None
        watermark_hooks = True
        for spec in gen_attacks:
            if spec.id == "distill":
                model = self.student_model(scheme, spec)
                watermark_hooks = False  # the attacker's student runs bare
            elif spec.id == "emoji":
                emoji = self.session.emoji
                if emoji is None:
                    raise ConfigError("emoji attack requested but no emoji token configured")
        seed = derive_seed(self.session.master_seed, item.id, "generate")
        if scheme.kind == "posttext":
            return scheme.inject(self.baseline_text(item))
        transform = scheme.logit_transform() if watermark_hooks else None
        sampler = scheme.make_sampler() if watermark_hooks else None
        max_tokens = self.max_tokens
        context_hook = None
        if emoji is not None:
            sampler = emoji.wrap_sampler(sampler)
            context_hook = emoji.context_hook
            max_tokens *= emoji.budget_multiplier
        seq = generate(
            model,
            GenerationConfig(
                prompt=self.prompt_seq(item),
                max_tokens=max_tokens,
                seed=seed,
                logit_transform=transform,
                sampler=sampler,
                context_hook=context_hook,
            ),
        )
        if emoji is not None:
            seq = emoji.strip(seq)
        return detokenize(seq)

    def watermarked(self, scheme, item: PromptItem, gen_attacks=()) -> str:
        """Cached generation output for (scheme, generation-stage attacks)."""
        genmode = tuple(spec.label() for spec in gen_attacks)
        key = (scheme.id, genmode)
        per_prompt = self._wm_cache.setdefault(key, {})
        text = per_prompt.get(item.id)
        if text is None:
            text = self._generate_once(scheme, item, gen_attacks)
            per_prompt[item.id] = text
        return text

    # -- detection ----------------------------------------------------------

    def detect_text(self, scheme, text: str):
        if getattr(scheme, "kind", "pretext") == "posttext":
            return scheme.detect(text, self.session.calibration)
        seq = tokenize(text, self.session.vocab)
        return scheme.detect(seq, self.session.calibration)


def run_scenario(ctx: RunContext, scheme, chain, judge=None) -> ScenarioResult:
    """Full pipeline for one (scheme, attack chain) over the dataset."""
    chain = tuple(chain)
    for spec in chain:
        if not applicable(spec.id, scheme.id):
            raise ScenarioSkipped(f"attack {spec.id} is not applicable to scheme {scheme.id}")
    judge = judge or ctx.session.judge
    gen_attacks = tuple(s for s in chain if s.id in GENERATION_STAGE_ATTACKS)
    post_attacks = tuple(s for s in chain if s.id not in GENERATION_STAGE_ATTACKS)

    master = ctx.session.master_seed
    timings = StageTimings()
    records = []
    q_cleans = []
    q_attacks = []
    reports = []
    for item in ctx.dataset:
        t0 = time.perf_counter()
        wm_text = ctx.watermarked(scheme, item, ())
        timings.inject_s += time.perf_counter() - t0

        t0 = time.perf_counter()
        q_clean = judge.grade(item.instruction, wm_text)
        timings.judge_s += time.perf_counter() - t0

        # generation-stage attacks replace the generation itself
        if gen_attacks:
            t0 = time.perf_counter()
            attacked = ctx.watermarked(scheme, item, gen_attacks)
            timings.attack_s += time.perf_counter() - t0
        else:
            attacked = wm_text

        t0 = time.perf_counter()
        for pos, spec in enumerate(post_attacks):
            seeded = dataclasses.replace(
                spec, seed=derive_seed(master, item.id, "attack", pos, spec.id)
            )
            attacked = apply_attack(attacked, seeded, ctx.session.resources)
        timings.attack_s += time.perf_counter() - t0

        t0 = time.perf_counter()
        undecidable = False
        try:
            report = ctx.detect_text(scheme, attacked)
            decision = report.decision
            statistic = report.statistic
        except Undecidable:
            report = None
            decision = False
            statistic = math.nan
            undecidable = True
        timings.detect_s += time.perf_counter() - t0
        reports.append(decision)

        t0 = time.perf_counter()
        q_attack = q_clean if attacked == wm_text else judge.grade(item.instruction, attacked)
        timings.judge_s += time.perf_counter() - t0

        q_cleans.append(q_clean)
        q_attacks.append(q_attack)
        records.append(
            EvalRecord(
                prompt_id=item.id,
                clean_text=ctx.baseline_text(item),
                watermarked_text=wm_text,
                attacked_text=attacked,
                q_clean=q_clean,
                q_attack=q_attack,
                decision=decision,
                statistic=statistic,
                undecidable=undecidable,
            )
        )

    q_clean_mean = sum(q_cleans) / len(q_cleans)
    q_attack_mean = sum(q_attacks) / len(q_attacks)
    quality = quality_combine(q_clean_mean, q_attack_mean)
    rate = watermark_rate(reports)
    return ScenarioResult(
        scheme_id=scheme.id,
        chain=chain,
        records=records,
        q_clean=q_clean_mean,
        q_attack=q_attack_mean,
        quality=quality,
        rate=rate,
        score=robustness(quality, rate),
        timings=timings,
        seed=master,
    )


def build_chains(attack_specs, pairs: bool = False) -> list:
    """The scenario chain list: none, every single, then ordered pairs."""
    specs = list(attack_specs)
    chains = [()]
    chains += [(a,) for a in specs]
    if pairs:
        chains += [(a, b) for a in specs for b in specs]
    return chains


def run_matrix(ctx: RunContext, schemes, attack_specs, pairs: bool = False, progress=None):
    """All (scheme, chain) scenarios; skipped/invalid ones are collected."""
    results = []
    skipped = []
    chains = build_chains(attack_specs, pairs)
    for scheme in schemes:
        for chain in chains:
            label = chain_label(chain)
            try:
                result = run_scenario(ctx, scheme, chain)
            except ScenarioSkipped as exc:
                skipped.append(SkippedScenario(scheme.id, label, str(exc)))
                continue
            except (AttackFailed, JudgeFailed) as exc:
                skipped.append(SkippedScenario(scheme.id, label, f"invalid: {exc}"))
                continue
            results.append(result)
            if progress is not None:
                progress(result)
    return results, skipped


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_scenarios_csv(results, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scheme", "attack_chain", "q_clean", "q_attack", "Q", "W", "R"])
        for r in results:
            writer.writerow(
                [r.scheme_id, r.chain_label]
                + [_fmt(v) for v in (r.q_clean, r.q_attack, r.quality, r.rate, r.score)]
            )


def write_timings_csv(results, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scheme", "attack_chain", "inject_s", "attack_s", "detect_s", "judge_s"])
        for r in results:
            t = r.timings
            writer.writerow(
                [r.scheme_id, r.chain_label]
                + [f"{v:.4f}" for v in (t.inject_s, t.attack_s, t.detect_s, t.judge_s)]
            )


def write_records_jsonl(results, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        for r in results:
            for rec in r.records:
                row = {
                    "scheme": r.scheme_id,
                    "attack_chain": r.chain_label,
                    "prompt_id": rec.prompt_id,
                    "clean_text": rec.clean_text,
                    "watermarked_text": rec.watermarked_text,
                    "attacked_text": rec.attacked_text,
                    "q_clean": rec.q_clean,
                    "q_attack": rec.q_attack,
                    "decision": rec.decision,
                    "statistic": None if math.isnan(rec.statistic) else rec.statistic,
                    "undecidable": rec.undecidable,
                }
                f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
                f.write("\n")


def write_matrix_csvs(results, out_dir) -> None:
    """Heatmap-ready tables: rows = first attack, columns = second attack."""
    singles: dict = {}
    pairs: dict = {}
    unattacked: dict = {}
    labels: dict = {}
    schemes = []
    for r in results:
        if r.scheme_id not in schemes:
            schemes.append(r.scheme_id)
        per_scheme_labels = labels.setdefault(r.scheme_id, [])
        if len(r.chain) == 0:
            unattacked[r.scheme_id] = r
        elif len(r.chain) == 1:
            lbl = r.chain[0].label()
            singles[(r.scheme_id, lbl)] = r
            if lbl not in per_scheme_labels:
                per_scheme_labels.append(lbl)
        elif len(r.chain) == 2:
            first, second = (s.label() for s in r.chain)
            pairs[(r.scheme_id, first, second)] = r
            for lbl in (first, second):
                if lbl not in per_scheme_labels:
                    per_scheme_labels.append(lbl)

    for metric, fname in (("quality", "matrix_Q.csv"), ("rate", "matrix_W.csv")):
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            all_labels = []
            for scheme in schemes:
                for lbl in labels.get(scheme, []):
                    if lbl not in all_labels:
                        all_labels.append(lbl)
            writer.writerow(["scheme", "first_attack"] + ["none"] + all_labels)
            for scheme in schemes:
                base = unattacked.get(scheme)
                row = [scheme, "none", _fmt(getattr(base, metric)) if base else ""]
                row += ["" for _ in all_labels]
                writer.writerow(row)
                for first in labels.get(scheme, []):
                    single = singles.get((scheme, first))
                    row = [scheme, first, _fmt(getattr(single, metric)) if single else ""]
                    for second in all_labels:
                        pair = pairs.get((scheme, first, second))
                        row.append(_fmt(getattr(pair, metric)) if pair else "")
                    writer.writerow(row)


def write_skipped_csv(skipped, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scheme", "attack_chain", "reason"])
        for s in skipped:
            writer.writerow([s.scheme_id, s.chain_label, s.reason])


def write_summary_csv(results, path) -> None:
    """Per-scheme mean robustness over single attacks (Table-style rollup)."""
    from .attacks import GENERATION_STAGE_ATTACKS

    rows = []
    schemes = []
    for r in results:
        if r.scheme_id not in schemes:
            schemes.append(r.scheme_id)
    for scheme in schemes:
        post = [r.score for r in results if r.scheme_id == scheme and len(r.chain) == 1 and r.chain[0].id not in GENERATION_STAGE_ATTACKS]
        pre = [r.score for r in results if r.scheme_id == scheme and len(r.chain) == 1 and r.chain[0].id in GENERATION_STAGE_ATTACKS]
        all_single = post + pre
        rows.append(
            [
                scheme,
                _fmt(sum(post) / len(post)) if post else "",
                _fmt(sum(pre) / len(pre)) if pre else "",
                _fmt(sum(all_single) / len(all_single)) if all_single else "",
            ]
        )
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scheme", "R_post_text", "R_pre_text", "R_all"])
        writer.writerows(rows)


def write_imperceptibility_csv(rates: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scheme", "flag_rate"])
        for scheme, rate in rates.items():
            writer.writerow([scheme, _fmt(rate)])


def write_outputs(results, skipped, out_dir, imperceptibility: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_scenarios_csv(results, os.path.join(out_dir, "scenarios.csv"))
    write_timings_csv(results, os.path.join(out_dir, "timings.csv"))
    write_records_jsonl(results, os.path.join(out_dir, "records.jsonl"))
    write_matrix_csvs(results, out_dir)
    write_skipped_csv(skipped, os.path.join(out_dir, "skipped.csv"))
    write_summary_csv(results, os.path.join(out_dir, "summary.csv"))
    if imperceptibility is not None:
        write_imperceptibility_csv(imperceptibility, os.path.join(out_dir, "imperceptibility.csv"))
