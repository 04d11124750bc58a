"""Command-line entry point: ``qmal <command> [options]``.

Every command exits 0 on success. Failures print one JSON line
``{"error": <ExceptionName>, "message": ...}`` to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import SECTION_KEYS, plotting
from .corpus import SPLITS, CorpusConfig, Manifest
from .ensemble import SCORER_KINDS, metrics, predict, read_vectors, train_scorer, write_vectors
from .errors import QmalError
from .imaging import read_records, write_records
from .optim import TrainConfig
from .pipeline import (RunArtifacts, RunOptions, evaluate, extract, generate, load_scorer,
                       load_section_models, predict_file, run_all, save_scorer,
                       save_section_model, train_baseline, train_sections, vectorize)
from .serialize import artifacts_lock, save_json

log = logging.getLogger("qmal")


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig.from_json(args.config).to_dict() if args.config else TrainConfig().to_dict()
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.shared_params is not None:
        cfg["shared_params"] = args.shared_params
    return TrainConfig.from_dict(cfg)


def _corpus_config(args) -> CorpusConfig:
    cfg = CorpusConfig.from_json(args.corpus_config) if args.corpus_config else CorpusConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n_benign is not None:
        cfg.n_benign = args.n_benign
    if args.n_malware is not None:
        cfg.n_malware = args.n_malware
    return cfg


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> None:
    out = Path(args.out)
    with artifacts_lock(out):
        manifest = generate(out, _corpus_config(args), split_seed=args.split_seed)
    counts = {s: len(manifest.select(s)) for s in SPLITS}
    _print({"manifest": str(out / "manifest.csv"), "files": len(manifest.rows), "splits": counts})


def cmd_extract(args) -> None:
    manifest = Manifest.read(args.manifest)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with artifacts_lock(out.parent):
        records = extract(manifest, args.threads)
        write_records(out, records)
    _print({"records": str(out), "count": len(records)})


def cmd_train_sections(args) -> None:
    art = RunArtifacts(args.out).ensure()
    config = _train_config(args)
    sections = args.sections.split(",") if args.sections else list(SECTION_KEYS)
    unknown = set(sections) - set(SECTION_KEYS)
    if unknown:
        raise ValueError(f"unknown sections {sorted(unknown)}")
    with artifacts_lock(art.root):
        records = read_records(args.records)
        models, histories, report = train_sections(records, config, sections)
        for key, model in models.items():
            save_section_model(art, key, model, config)
            histories[key].to_csv(art.reports / f"{key}.history.csv")
        save_json(art.reports / "sections.json", report)
        plotting.loss_curves(histories, art.figures / "section_loss_curves.png")
    _print({k: {"n_train": v["n_train"], "train_accuracy": v["train"]["accuracy"],
                "val_accuracy": v["val"].get("accuracy")} for k, v in report.items()})


def cmd_vectorize(args) -> None:
    art = RunArtifacts(args.models)
    records = [r for r in read_records(args.records)
               if r.split == args.split and (args.fold is None or r.fold == args.fold)]
    X, y = vectorize(records, load_section_models(art))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_vectors(out, X, y)
    _print({"vectors": str(out), "rows": len(y)})


def cmd_train_scorer(args) -> None:
    art = RunArtifacts(args.out).ensure()
    X, y = read_vectors(args.vectors)
    with artifacts_lock(art.root):
        model = train_scorer(X, y, args.scorer, seed=args.seed)
        path = save_scorer(art, args.scorer, model, args.seed)
    _print({"scorer": str(path), "train": evaluate(model, X, y)})


def cmd_eval(args) -> None:
    X, y = read_vectors(args.vectors)
    scorer_path = Path(args.scorer_file) if args.scorer_file else \
        RunArtifacts(args.artifacts).scorer(args.scorer)
    model = load_scorer(scorer_path)
    _, preds = predict(model, X)
    result = {"scorer": model.to_dict()["kind"], "vectors": Path(args.vectors).name,
              **metrics(preds, y)}
    out = Path(args.out)
    save_json(out, result)
    if args.figure:
        plotting.confusion_plot(result["confusion"], result["scorer"],
                                out.with_suffix(".confusion.png"))
    _print(result)


def cmd_baseline(args) -> None:
    art = RunArtifacts(args.out).ensure()
    config = _train_config(args)
    with artifacts_lock(art.root):
        records = read_records(args.records)
        model, history, report = train_baseline(records, config)
        save_section_model(art, "full", model, config)
        history.to_csv(art.reports / "full.history.csv")
        save_json(art.reports / "baseline.json", report)
        plotting.loss_curves({"full": history}, art.figures / "baseline_loss_curve.png")
    _print({"train": report["train"], "test": report["test"]})


def cmd_predict(args) -> None:
    _print(predict_file(args.file, RunArtifacts(args.artifacts), args.scorer))


def cmd_run(args) -> None:
    options = RunOptions(corpus=_corpus_config(args), train=_train_config(args),
                         scorer_seed=args.seed if args.seed is not None else 0,
                         figures=not args.no_figures)
    with artifacts_lock(args.out):
        report = run_all(args.out, options)
    _print({
        "scorers": {k: {"test_accuracy": v["test"]["accuracy"], "test_f1": v["test"]["f1"]}
                    for k, v in report["scorers"].items()},
        "baseline": {"test_accuracy": report["baseline"]["test"]["accuracy"],
                     "test_f1": report["baseline"]["test"]["f1"]},
    })


# ------------------------------------------------------------------ parser


def _add_train_flags(p) -> None:
    p.add_argument("--config", help="training config JSON (TrainConfig fields)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, help="default: the config's seed (0)")
    p.add_argument("--shared-params", dest="shared_params", action="store_true", default=None)
    p.add_argument("--no-shared-params", dest="shared_params", action="store_false")


def _add_corpus_flags(p) -> None:
    p.add_argument("--corpus-config", help="corpus config JSON (CorpusConfig fields)")
    p.add_argument("--n-benign", type=int)
    p.add_argument("--n-malware", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic PE corpus and split manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="default: the corpus config's seed (0)")
    p.add_argument("--split-seed", type=int, help="default: the corpus seed")
    _add_corpus_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("extract", help="image every manifest file into records.jsonl")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, help="defaults to $QMAL_THREADS or 1")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-sections", help="fit PCA, scaler and QCNN for each section")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="artifacts directory")
    p.add_argument("--sections", help=f"comma list, default {','.join(SECTION_KEYS)}")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_sections)

    p = sub.add_parser("vectorize", help="score records into a five-score CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--models", required=True, help="artifacts directory holding models/")
    p.add_argument("--split", choices=SPLITS, default="scorer_train")
    p.add_argument("--fold", choices=("train", "val"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("train-scorer", help="fit a scoring function on score vectors")
    p.add_argument("--vectors", required=True)
    p.add_argument("--scorer", choices=SCORER_KINDS, default="gbt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="artifacts directory")
    p.set_defaults(func=cmd_train_scorer)

    p = sub.add_parser("eval", help="accuracy/precision/recall/F1 of a scorer on vectors")
    p.add_argument("--vectors", required=True)
    p.add_argument("--scorer", choices=SCORER_KINDS, default="gbt")
    p.add_argument("--artifacts", default=".")
    p.add_argument("--scorer-file", help="explicit scorer JSON (overrides --artifacts/--scorer)")
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--figure", action="store_true", help="also render a confusion-matrix PNG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="single QCNN on full-file 64x64 images")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="artifacts directory")
    _add_train_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("predict", help="per-section scores and fused verdict for one file")
    p.add_argument("file")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--scorer", choices=SCORER_KINDS, default="gbt")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("run", help="whole experiment: gen, extract, train, score, baseline")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_corpus_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (QmalError, OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
