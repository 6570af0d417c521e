"""Command-line interface.

Subcommands cover each pipeline stage (prepare, detect, objstats, build-tems,
train, evaluate, compare) plus `run` for a full experiment.  A flat key=value
config file can prefill any experiment option; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .corpus import (
    JOINT_POLICIES,
    STRICT_EQUAL,
    derive_joint_labels,
    filter_english_text,
    load_manifest,
    save_manifest,
    summarize,
)
from .detect import (
    DetectionCache,
    append_cache_record,
    build_adapter,
    detect_objects,
    load_image,
    object_count_histogram,
)
from .eval.report import compare_experiments, emit_plots, write_report_json
from .expctl import (
    EXPERIMENTS,
    ExperimentConfig,
    evaluate_checkpoint,
    run_experiment,
    tems_rows,
    train_experiment,
)
from .records import load_records
from .tems import POLICIES

_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")

_CONFIG_COERCERS = {
    "experiment": int,
    "seed": int,
    "batch_size": int,
    "epochs": int,
    "embed_dim": int,
    "hidden_units": int,
    "split_ratio": float,
    "learning_rate": float,
    "dropout": float,
    "pretrained": "bool",
    "augment": "bool",
    "model": str,
    "manifest_path": str,
    "out_dir": str,
    "dataset": str,
    "cache_path": str,
    "joint_policy": str,
    "averaging": str,
    "embeddings_path": str,
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    raw: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(),
                                   start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def _coerce(key: str, value):
    if key not in _CONFIG_COERCERS:
        raise ValueError(f"unknown config key {key!r}")
    coercer = _CONFIG_COERCERS[key]
    if not isinstance(value, str):
        return value
    if coercer == "bool":
        low = value.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ValueError(f"config key {key!r} expects a boolean, got {value!r}")
    return coercer(value)


def build_experiment_config(config_path: str | None, overrides: dict) -> ExperimentConfig:
    raw: dict = {}
    if config_path:
        raw.update(parse_config_file(config_path))
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    typed = {k: _coerce(k, v) for k, v in raw.items()}
    missing = [k for k in ("experiment", "model", "manifest_path", "out_dir")
               if k not in typed]
    if missing:
        raise ValueError(f"missing required config keys: {', '.join(missing)}")
    return ExperimentConfig(**typed)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    out = {
        "experiment": args.experiment,
        "model": args.model,
        "manifest_path": args.manifest,
        "out_dir": args.out,
        "dataset": args.dataset,
        "cache_path": args.cache,
        "seed": args.seed,
        "split_ratio": args.split_ratio,
        "joint_policy": args.joint_policy,
        "averaging": args.averaging,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "embed_dim": args.embed_dim,
        "hidden_units": args.hidden_units,
        "dropout": args.dropout,
        "embeddings_path": args.embeddings,
    }
    if args.pretrained:
        out["pretrained"] = True
    if args.no_augment:
        out["augment"] = False
    return out


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--experiment", type=int, choices=EXPERIMENTS)
    parser.add_argument("--model")
    parser.add_argument("--manifest", help="sample manifest CSV/TSV")
    parser.add_argument("--cache", help="detection cache JSONL")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--dataset", choices=tuple(POLICIES))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--split-ratio", type=float, dest="split_ratio")
    parser.add_argument("--joint-policy", choices=JOINT_POLICIES, dest="joint_policy")
    parser.add_argument("--averaging", choices=("macro", "weighted"))
    parser.add_argument("--lr", type=float, dest="learning_rate")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--embed-dim", type=int, dest="embed_dim")
    parser.add_argument("--hidden-units", type=int, dest="hidden_units")
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--embeddings", help="pretrained word embedding file")
    parser.add_argument("--pretrained", action="store_true",
                        help="load published backbone/encoder weights")
    parser.add_argument("--no-augment", action="store_true", dest="no_augment")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def _cmd_prepare(args) -> int:
    dataset = load_manifest(args.manifest)
    if args.english_filter:
        dataset = filter_english_text(dataset)
    if args.derive_joint:
        dataset = derive_joint_labels(dataset, policy=args.joint_policy)
    save_manifest(dataset, args.out)
    stats = summarize(dataset)
    print(f"wrote {len(dataset)} samples to {args.out}")
    for name, pos, neg, neu, total in stats.rows():
        print(f"  {name}: pos={pos} neg={neg} neut={neu} total={total}")
    return 0


def _cmd_detect(args) -> int:
    dataset = load_manifest(args.manifest)
    kwargs = {}
    if args.detector == "vg":
        kwargs = {"checkpoint_path": args.checkpoint, "labels_path": args.labels}
    elif args.detector == "coco" and args.checkpoint:
        kwargs = {"checkpoint": args.checkpoint}
    elif args.detector == "fixture" and args.source:
        kwargs = {"source": args.source}
    adapter = build_adapter(args.detector, threshold=args.threshold, **kwargs)
    source = getattr(adapter, "source", adapter.adapter_id)
    n_det = 0
    for sample in dataset:
        image = load_image(sample.image_ref)
        det = detect_objects(adapter, image, sample.id)
        append_cache_record(args.cache, det, source=source,
                            threshold=adapter.threshold)
        n_det += len(det)
    print(f"cached {n_det} detections for {len(dataset)} samples "
          f"(source={source}) in {args.cache}")
    return 0


def _cmd_objstats(args) -> int:
    cache = DetectionCache.load(args.cache)
    hist = object_count_histogram(cache.by_sample(), source_filter=args.source)
    rows = hist.csv_rows()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(rows)
        print(f"wrote {args.out}")
    for row in rows:
        print("\t".join(row))
    return 0


def _cmd_build_tems(args) -> int:
    dataset = load_manifest(args.manifest, dataset_name=args.dataset)
    cache = DetectionCache.load(args.cache)
    rows = tems_rows(dataset, cache, POLICIES[args.dataset], "merged")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {len(rows)} fused sequences to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = build_experiment_config(args.config, _overrides_from_args(args))
    ckpt = train_experiment(cfg)
    print(f"checkpoint written to {ckpt}")
    return 0


def _cmd_evaluate(args) -> int:
    report = evaluate_checkpoint(args.checkpoint, out_dir=args.out,
                                 split=args.split, manifest_path=args.manifest)
    m = report["metrics"]
    print(f"exp{report['experiment']} {report['model']} on {report['dataset']} "
          f"({args.split}): acc={m['accuracy']:.4f} pre={m['precision']:.4f} "
          f"f1={m['f1']:.4f} rec={m['recall']:.4f} [{m['averaging']}]")
    for row in report["wilcoxon"]:
        if "p_value" in row:
            print(f"  wilcoxon {row['a']} vs {row['b']}: p={row['p_value']:.6f} "
                  f"({row['method']}, n={row['n_effective']})")
        else:
            print(f"  wilcoxon {row['a']} vs {row['b']}: {row['note']}")
    return 0


def _cmd_compare(args) -> int:
    records = load_records(args.reports)
    report = compare_experiments(records, alpha=args.alpha)
    if args.plots:
        written = emit_plots(report, args.plots)
        print(f"wrote {len(written)} figures to {args.plots}")
    if args.out:
        payload = {
            "alpha": report.alpha,
            "rows": list(report.rows),
            "group_means": list(report.group_means),
            "wilcoxon": list(report.wilcoxon),
        }
        write_report_json(payload, args.out)
        print(f"wrote {args.out}")
    for row in report.wilcoxon:
        if "p_value" in row:
            verdict = "significant" if row["significant"] else "not significant"
            print(f"{row['a']} vs {row['b']} on {row['dataset']}: "
                  f"p={row['p_value']:.6f} ({verdict} at alpha={report.alpha})")
        else:
            print(f"{row['a']} vs {row['b']} on {row['dataset']}: {row['note']}")
    return 0


def _run_one(config_path: str) -> str:
    cfg = build_experiment_config(config_path, {})
    record = run_experiment(cfg)
    return f"exp{record.experiment} {record.model}: " \
           f"accuracy={record.metrics['accuracy']:.4f} -> {cfg.out_dir}"


def _cmd_run(args) -> int:
    if args.configs and len(args.configs) > 1:
        if args.parallel:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor() as pool:
                for line in pool.map(_run_one, args.configs):
                    print(line)
        else:
            for path in args.configs:
                print(_run_one(path))
        return 0
    config = args.configs[0] if args.configs else args.config
    cfg = build_experiment_config(config, _overrides_from_args(args))
    record = run_experiment(cfg)
    m = record.metrics
    print(f"exp{record.experiment} {record.model} on {record.dataset}: "
          f"acc={m['accuracy']:.4f} pre={m['precision']:.4f} "
          f"f1={m['f1']:.4f} rec={m['recall']:.4f}")
    print(f"record written to {Path(cfg.out_dir) / 'record.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temsa",
        description="Multimodal sentiment pipeline: fuse caption text with "
                    "detected object names and classify the result.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter a manifest and derive joint labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--english-filter", action="store_true", dest="english_filter")
    p.add_argument("--derive-joint", action="store_true", dest="derive_joint")
    p.add_argument("--joint-policy", choices=JOINT_POLICIES, default=STRICT_EQUAL,
                   dest="joint_policy")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("detect", help="run a detector over manifest images "
                                      "and append to the cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--detector", required=True, choices=("fixture", "coco", "vg"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--checkpoint", help="detector checkpoint (coco name or vg path)")
    p.add_argument("--labels", help="labels file for the vg detector")
    p.add_argument("--source", help="cache source tag override (fixture only)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("objstats", help="object-count histogram from a cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--source", default="all",
                   choices=("all", "coco", "vg", "fixture"))
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=_cmd_objstats)

    p = sub.add_parser("build-tems", help="write fused token sequences as JSONL")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--dataset", required=True, choices=tuple(POLICIES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_tems)

    p = sub.add_parser("train", help="train one experiment and write a checkpoint")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on its split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--out", help="directory for report.json / metrics.csv")
    p.add_argument("--manifest", help="override the manifest path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="compare result records and plot")
    p.add_argument("--reports", nargs="+", required=True,
                   help="record.json files from runs")
    p.add_argument("--plots", help="directory for comparison figures")
    p.add_argument("--out", help="comparison JSON output path")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("run", help="run a full experiment end to end")
    _add_experiment_flags(p)
    p.add_argument("--configs", nargs="+",
                   help="run several config files (see --parallel)")
    p.add_argument("--parallel", action="store_true",
                   help="run multiple configs concurrently")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
