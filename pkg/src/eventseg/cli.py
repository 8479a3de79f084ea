"""Command-line entry point.

Every subcommand writes its artifacts into ``--out`` together with a
``metrics.json`` that holds no wall-clock values, so reruns with the same
seed and config produce identical bytes. Timings live in the artifact
files (for example ``segmentation.json``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .core import DEFAULT_VOCABULARY, dataset_stats, load_events
from .harness import (
    ABLATION_COLUMNS,
    ExperimentSpec,
    ablation_grid,
    fit,
    load_corpus,
    rows_to_csv,
    run_experiment,
    score,
    weight_sweep,
    write_json,
)
from .lstm import LstmModel
from .segmenter import SegmentationResult, segment
from .simgen import GeneratorConfig, corpus_report, save_corpus
from .validator import ValidatorConfig, validate

log = logging.getLogger("eventseg")


def load_spec(args: argparse.Namespace) -> ExperimentSpec:
    spec = ExperimentSpec.load(args.config) if args.config else ExperimentSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if getattr(args, "augmentation", None) is not None:
        spec = replace(spec, augmentation=args.augmentation)
    if getattr(args, "no_validator", False):
        spec = replace(spec, validator=False)
    if getattr(args, "events", None):
        spec = replace(spec, corpus={"path": str(args.events)})
    return spec


def _labeled(stream) -> bool:
    return all(e.activity_id is not None for e in stream.events)


# --- subcommands -----------------------------------------------------------


def cmd_generate(args, out: Path) -> dict:
    spec = load_spec(args)
    gen = dict(spec.corpus.get("generator", {}))
    gen.setdefault("seed", spec.seed)
    config = GeneratorConfig.from_dict(gen)
    n = args.n_activities if args.n_activities is not None else int(spec.corpus.get("n_activities", 436))
    stream = load_corpus(replace(spec, corpus={"generator": config.to_dict(), "n_activities": n}))
    sidecar = save_corpus(stream, config, out, n)
    DEFAULT_VOCABULARY.dump(out / "vocabulary.json")
    stats = dataset_stats(stream)
    return {
        "command": "generate",
        "seed": config.seed,
        "n_activities": n,
        "e_total": stats.e_total,
        "e_boundary": stats.e_boundary,
        "report": sidecar["report"],
    }


def cmd_train(args, out: Path) -> dict:
    spec = load_spec(args)
    stream = load_corpus(spec)
    model, res, omega, formula = fit(spec, stream)
    model.save(out / "model.json")
    return {
        "command": "train",
        "spec_hash": spec.hash(),
        "seed": spec.seed,
        "spec": spec.to_dict(),
        "omega": omega,
        "omega_formula": formula,
        "initial_cost": res.initial_cost,
        "final_cost": res.final_cost,
        "best_epoch": res.best_epoch,
        "cost_curve": res.cost_curve,
        "val_f1_curve": res.val_curve,
    }


def cmd_segment(args, out: Path) -> dict:
    model = LstmModel.load(args.model)
    stream = load_events(args.events)
    spec = load_spec(args)
    t0 = time.perf_counter()
    result = segment(model, stream, args.augmentation, spec.max_people, spec.max_seats, spec.aggregation,
                     spec.state_before)
    result = replace(result, timing={"segment_s": time.perf_counter() - t0, "n_events": len(stream)})
    result.save(out / "segmentation.json")
    summary = {"command": "segment", "n_events": len(stream), "boundaries": list(result.boundaries),
               "augmentation": args.augmentation if args.augmentation is not None else model.augmentation}
    if _labeled(stream):
        summary["metrics"] = score(result.boundaries, stream.true_boundaries).to_dict()
    return summary


def cmd_validate(args, out: Path) -> dict:
    stream = load_events(args.events)
    spec = load_spec(args)
    raw = SegmentationResult.load(args.segmentation)
    checked = validate(stream, raw, ValidatorConfig(spec.min_activity_length))
    checked.save(out / "segmentation_validated.json")
    summary = {
        "command": "validate",
        "raw_boundaries": list(raw.boundaries),
        "boundaries": list(checked.boundaries),
        "audit": list(checked.audit),
    }
    if _labeled(stream):
        summary["raw_metrics"] = score(raw.boundaries, stream.true_boundaries).to_dict()
        summary["metrics"] = score(checked.boundaries, stream.true_boundaries).to_dict()
    return summary


def cmd_evaluate(args, out: Path) -> dict:
    spec = load_spec(args)
    res = run_experiment(spec, out)
    return {"command": "evaluate", **res.summary()}


def cmd_ablate(args, out: Path) -> dict:
    spec = load_spec(args)
    rows = ablation_grid(spec)
    (out / "ablation.csv").write_text(rows_to_csv(rows, ABLATION_COLUMNS))
    return {"command": "ablate", "spec_hash": spec.hash(), "seed": spec.seed, "rows": rows}


def cmd_sweep(args, out: Path) -> dict:
    spec = load_spec(args)
    omegas = [float(w) for w in args.omegas.split(",")]
    res = weight_sweep(spec, omegas)
    lines = ["omega,f1"] + [f"{p['omega']!r},{p['f1']!r}" for p in res["pairs"]]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return {"command": "sweep-weight", **res}


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "segment": cmd_segment,
    "validate": cmd_validate,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "sweep-weight": cmd_sweep,
}


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the copy attached to subcommands must not overwrite values given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(None), help="overrides the seed in --config")
    common.add_argument("--config", type=Path, default=d(None), help="experiment spec JSON")
    common.add_argument("--out", type=Path, default=d(None), help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    p = argparse.ArgumentParser(prog="eventseg", description="LSTM activity segmentation of smart-room event streams",
                                parents=[_global_flags(suppress=False)])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic labeled event log")
    g.add_argument("--n-activities", type=int, default=None)

    t = sub.add_parser("train", parents=[common], help="train a model on an event log (or the generated corpus)")
    t.add_argument("--events", type=Path, default=None)
    t.add_argument("--augmentation", default=None, help='object status to append, e.g. "people+light"; "" for none')

    s = sub.add_parser("segment", parents=[common], help="predict boundaries with a trained model")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--events", type=Path, required=True)
    s.add_argument("--augmentation", default=None, help="defaults to the augmentation stored in the model")

    v = sub.add_parser("validate", parents=[common], help="time-interval validation of a raw segmentation")
    v.add_argument("--segmentation", type=Path, required=True)
    v.add_argument("--events", type=Path, required=True)

    e = sub.add_parser("evaluate", parents=[common], help="split, train, segment, validate and score")
    e.add_argument("--events", type=Path, default=None)
    e.add_argument("--augmentation", default=None)
    e.add_argument("--no-validator", action="store_true")

    sub.add_parser("ablate", parents=[common], help="augmentation grid with and without the validator")

    w = sub.add_parser("sweep-weight", parents=[common], help="F1 as a function of the target weight")
    w.add_argument("--omegas", default="1,2,3,4,5")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = COMMANDS[args.command](args, out)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"eventseg {args.command}: {exc}", file=sys.stderr)
        return 1
    write_json(out / "metrics.json", summary)
    print(json.dumps({k: summary[k] for k in summary if k in ("command", "metrics", "spec_hash", "seed")}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
