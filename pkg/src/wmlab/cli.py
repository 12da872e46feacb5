"""Command-line interface: wmlab run | calibrate | report."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import figures
from .config import build_session, load_config
from .harness import PromptDataset, RunContext, run_matrix, write_outputs
from .metrics import ImperceptibilityHeuristic, imperceptibility_probe


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file layered over the bundled defaults")
    parser.add_argument("--seed", type=int, help="override run.master_seed")


def _session_from_args(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg["run"]["master_seed"] = args.seed
    if getattr(args, "out", None):
        cfg["run"]["out_dir"] = args.out
    if getattr(args, "prompts", None):
        cfg["dataset"]["limit"] = args.prompts
    if getattr(args, "max_tokens", None):
        cfg["run"]["max_tokens"] = args.max_tokens
    return build_session(cfg)


def _select(mapping: dict, names, what: str):
    if not names:
        return list(mapping.values())
    out = []
    for name in names:
        if name not in mapping:
            raise SystemExit(f"unknown {what} {name!r}; known: {', '.join(mapping)}")
        out.append(mapping[name])
    return out


def cmd_run(args) -> int:
    session = _session_from_args(args)
    schemes = _select(session.schemes, args.schemes, "scheme")
    specs = _select(session.attack_specs, args.attacks, "attack")
    ctx = RunContext(session)
    out_dir = session.cfg["run"]["out_dir"]

    t0 = time.perf_counter()
    print(f"running {len(schemes)} schemes x {len(specs)} attacks"
          f"{' (+pairs)' if args.pairs else ''} on {len(ctx.dataset)} prompts", flush=True)
    results, skipped = run_matrix(
        ctx,
        schemes,
        specs,
        pairs=args.pairs,
        progress=lambda r: print(f"  {r.scheme_id:<12} {r.chain_label:<40} W={r.rate:.3f} Q={r.quality:.3f}", flush=True),
    )

    imperceptibility = None
    if not args.no_imperceptibility:
        reference = [ctx.baseline_text(item) for item in ctx.dataset]
        heuristic = ImperceptibilityHeuristic.fit(session.lexicon, reference)
        imperceptibility = {}
        for scheme in schemes:
            texts = [ctx.watermarked(scheme, item, ()) for item in ctx.dataset]
            imperceptibility[scheme.id] = imperceptibility_probe(texts, heuristic)

    write_outputs(results, skipped, out_dir, imperceptibility)
    if not args.no_figures:
        for path in figures.render_all(out_dir):
            print(f"  figure: {path}")
    print(f"wrote {out_dir} ({len(results)} scenarios, {len(skipped)} skipped) "
          f"in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_calibrate(args) -> int:
    session = _session_from_args(args)
    cal = session.calibration
    if cal.cache_dir is None:
        print("calibration.cache_dir is unset; caching in memory only", file=sys.stderr)
    lengths = args.lengths or [session.max_tokens]
    schemes = _select(session.schemes, args.schemes, "scheme")
    calibratable = [s for s in schemes if hasattr(s, "calibration_fingerprint")]
    t0 = time.perf_counter()
    for scheme in calibratable:
        for length in lengths:
            cutoff = cal.cutoff_std(scheme, length)
            print(f"  {scheme.id:<12} length~{cal.bucket_of(length):<5} cutoff_std={cutoff:.4f}", flush=True)
    print(f"calibrated {len(calibratable)} schemes in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_report(args) -> int:
    run_dir = args.run
    scen = os.path.join(run_dir, "scenarios.csv")
    if not os.path.exists(scen):
        raise SystemExit(f"no scenarios.csv under {run_dir!r}; run `wmlab run` first")
    if args.format == "json":
        import csv as _csv

        with open(scen, encoding="utf-8", newline="") as f:
            rows = list(_csv.DictReader(f))
        out = {"scenarios": rows}
        imp = os.path.join(run_dir, "imperceptibility.csv")
        if os.path.exists(imp):
            with open(imp, encoding="utf-8", newline="") as f:
                out["imperceptibility"] = list(_csv.DictReader(f))
        print(json.dumps(out, indent=2, ensure_ascii=False))
    else:
        with open(scen, encoding="utf-8") as f:
            sys.stdout.write(f.read())
    if not args.no_figures:
        for path in figures.render_all(run_dir):
            print(f"figure: {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wmlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute watermark x attack scenarios")
    _add_common(p_run)
    p_run.add_argument("--schemes", nargs="*", help="scheme ids (default: all enabled)")
    p_run.add_argument("--attacks", nargs="*", help="attack ids (default: all enabled)")
    p_run.add_argument("--pairs", action="store_true", help="also run every ordered attack pair")
    p_run.add_argument("--out", help="output directory (default from config)")
    p_run.add_argument("--prompts", type=int, help="cap the prompt count")
    p_run.add_argument("--max-tokens", type=int, dest="max_tokens", help="generation budget per prompt")
    p_run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_run.add_argument("--no-imperceptibility", action="store_true", help="skip the imperceptibility probe")
    p_run.set_defaults(fn=cmd_run)

    p_cal = sub.add_parser("calibrate", help="warm the detection null caches")
    _add_common(p_cal)
    p_cal.add_argument("--schemes", nargs="*", help="scheme ids (default: all enabled)")
    p_cal.add_argument("--lengths", nargs="*", type=int, help="sequence lengths to calibrate")
    p_cal.set_defaults(fn=cmd_calibrate)

    p_rep = sub.add_parser("report", help="re-emit tables and render figures for a run")
    p_rep.add_argument("--run", required=True, help="run directory to report on")
    p_rep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_rep.add_argument("--no-figures", action="store_true")
    p_rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
