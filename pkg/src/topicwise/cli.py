"""Command-line entry point wiring the pipeline stages into subcommands.

Every run writes a ``config_echo.json`` beside its outputs with all
parameters, seeds, and the tool version, so any stage can be re-run
bit-identically. Exit codes: 0 success, 1 usage, 2 bad input, 3 pipeline
invariant violation, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, defaults
from .corpus import load_dataset
from .errors import InputError, InvariantError, PipelineError
from .eval import EvalConfig, EvalReport, format_report_table, run_cv, run_holdout, stratified_folds
from .features import (
    context_unaware_table,
    featurize_dataset,
    load_key_topic_rules,
    load_vectors,
    load_word_categories,
    save_vectors,
)
from .model import (
    FOREST_GRID_SIZES,
    RegressorSpec,
    grid_search,
    save_model,
    train,
)
from .select import TwoStepSelector
from .synth import PlantedFeature, SynthSpec, generate_corpus
from .topic import draft_dictionary, load_topic_dictionary, segment_interview


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _write_echo(out_dir: Path, command: str, args) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    payload = {"command": command, "version": __version__, "parameters": params}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_echo.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=str), encoding="utf-8"
    )


def _parse_hyper(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep:
            raise InputError(f"--hyper expects key=value, got {pair!r}")
        value: object
        lowered = raw.lower()
        if lowered in ("true", "false"):
            value = lowered == "true"
        elif lowered == "none":
            value = None
        else:
            try:
                value = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    value = raw
        out[key.strip()] = value
    return out


def _parse_k_range(raw: str) -> list[int]:
    if ":" in raw:
        lo, hi = raw.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(k) for k in raw.split(",") if k.strip()]


def _load_selected(path):
    report = json.loads(Path(path).read_text(encoding="utf-8"))
    selected = report["selected"]
    return [s["index"] if isinstance(s, dict) else int(s) for s in selected]


def _model_spec(args) -> RegressorSpec:
    return RegressorSpec(kind=args.model, hyper=_parse_hyper(args.hyper), seed=args.seed)


def _eval_config(args) -> EvalConfig:
    return EvalConfig(
        model=_model_spec(args),
        selection_mode=args.mode,
        top_k=args.k,
        patience=args.patience,
        folds=getattr(args, "folds", 10),
        seed=args.seed,
        clamp=args.clamp,
        jobs=args.jobs,
    )


def _write_report(out: Path, label: str, report: EvalReport) -> None:
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    table = format_report_table([(label, report)])
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)


# --- subcommand handlers ----------------------------------------------------


def _cmd_synth(args) -> int:
    out = Path(args.out)
    overrides = {}
    if args.spec:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        planted = raw.pop("planted", None)
        overrides.update(raw)
        if planted is not None:
            overrides["planted"] = tuple(PlantedFeature(**p) for p in planted)
        for key in ("common_topics", "split_fractions"):
            if key in overrides:
                overrides[key] = tuple(overrides[key])
    spec = SynthSpec(sessions=args.sessions, seed=args.seed, **overrides)
    _write_echo(out, "synth", args)
    dataset, truth = generate_corpus(spec, out)
    planted_named = [n for n in truth.names if n]
    print(f"wrote {len(dataset)} sessions to {out} "
          f"({len(planted_named)} planted features)")
    return 0


def _cmd_build_dict(args) -> int:
    dataset = load_dataset(args.manifest)
    draft = draft_dictionary(dataset, max_dist=args.max_dist)
    out_file = Path(args.out)
    _write_echo(out_file.parent, "build-dict", args)
    out_file.write_text(json.dumps(draft, indent=2, sort_keys=True), encoding="utf-8")
    print(f"drafted {len(draft['topics'])} sentence clusters into {out_file}")
    return 0


def _cmd_segment(args) -> int:
    dataset = load_dataset(args.manifest)
    dictionary = load_topic_dictionary(args.dict)
    out = Path(args.out)
    _write_echo(out, "segment", args)
    seg_dir = out / "segments"
    seg_dir.mkdir(parents=True, exist_ok=True)
    for session in dataset:
        lines = ["topic_index\tt_start\tt_end\ttext"]
        for seg in segment_interview(dictionary, session.transcript):
            lines.append(
                f"{seg.topic_index}\t{seg.t_start!r}\t{seg.t_end!r}\t{seg.participant_text}"
            )
        (seg_dir / f"{session.meta.session_id}.tsv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    print(f"segmented {len(dataset)} sessions into {seg_dir}")
    return 0


def _cmd_featurize(args) -> int:
    dataset = load_dataset(args.manifest)
    if args.split:
        dataset = dataset.subset(args.split.split(","))
    word_dict = load_word_categories(args.word_dict)
    out = Path(args.out)
    _write_echo(out, "featurize", args)
    if args.whole_interview:
        table = context_unaware_table(dataset, word_dict)
    else:
        dictionary = load_topic_dictionary(args.dict)
        rules = load_key_topic_rules(args.rules)
        table = featurize_dataset(dataset, dictionary, word_dict, rules)
    save_vectors(table, out / "vectors.csv", out / "layout.json")
    print(f"wrote {len(table)} x {table.X.shape[1]} vectors to {out / 'vectors.csv'}")
    return 0


def _cmd_select(args) -> int:
    table = load_vectors(args.vectors, args.layout)
    out = Path(args.out)
    _write_echo(out, "select", args)
    selector = TwoStepSelector(mode=args.mode, patience=args.patience, top_k=args.max_k)
    selector.fit(table.X, table.y)
    report = selector.report_
    (out / "selection.json").write_text(
        json.dumps(report.to_dict(names=table.names), indent=2), encoding="utf-8"
    )
    print(f"mode={report.mode} subset={len(report.cfs_subset)} "
          f"ranked={len(report.f_ranked)} chosen_k={report.chosen_k}")
    return 0


def _cmd_train(args) -> int:
    table = load_vectors(args.vectors, args.layout)
    out = Path(args.out)
    _write_echo(out, "train", args)
    indices = _load_selected(args.selection) if args.selection else list(range(table.X.shape[1]))
    spec = _model_spec(args)
    fitted = train(spec, table.X[:, indices], table.y, feature_indices=indices)
    save_model(fitted, out / "model.json")
    print(f"trained {spec.label()} on {len(table)} sessions, {len(indices)} features")
    return 0


def _cmd_grid(args) -> int:
    table = load_vectors(args.vectors, args.layout)
    out = Path(args.out)
    _write_echo(out, "grid", args)
    X = table.X
    if args.selection:
        indices = _load_selected(args.selection)
        X = X[:, indices]
    grid = []
    for kind in args.models.split(","):
        kind = kind.strip()
        if kind == "random_forest":
            grid.extend(
                RegressorSpec("random_forest", hyper={"tree_count": t}, seed=args.seed)
                for t in FOREST_GRID_SIZES
            )
        else:
            grid.append(RegressorSpec(kind, seed=args.seed))
    folds = list(stratified_folds(table.y, k=args.folds, seed=args.seed).splits())
    result = grid_search(grid, _parse_k_range(args.k_range), X, table.y, folds,
                         global_seed=args.seed, jobs=args.jobs)
    pd.DataFrame(list(result.table)).to_csv(out / "grid_table.csv", index=False)
    best = {"model": result.best_spec.label(), "kind": result.best_spec.kind,
            "hyper": result.best_spec.hyper, "k": result.best_k}
    (out / "grid_best.json").write_text(json.dumps(best, indent=2, sort_keys=True),
                                        encoding="utf-8")
    print(f"grid of {len(result.table)} cells; best: {best['model']} k={best['k']}")
    return 0


def _cmd_cv(args) -> int:
    table = load_vectors(args.vectors, args.layout)
    out = Path(args.out)
    _write_echo(out, "cv", args)
    report = run_cv(table, _eval_config(args))
    _write_report(out, args.model, report)
    return 0


def _cmd_holdout(args) -> int:
    train_table = load_vectors(args.train_vectors, args.layout)
    test_table = load_vectors(args.test_vectors, args.layout)
    out = Path(args.out)
    _write_echo(out, "holdout", args)
    report = run_holdout(train_table, test_table, _eval_config(args), protocol=args.protocol)
    _write_report(out, args.model, report)
    return 0


# --- parser -----------------------------------------------------------------


def _add_model_args(p, with_folds=True):
    p.add_argument("--model", default="sgd_squared",
                   choices=("sgd_squared", "svr_linear", "random_forest", "mean"))
    p.add_argument("--hyper", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--k", type=int, default=None,
                   help="feature count after ranking (default: keep all survivors)")
    p.add_argument("--mode", default="two_step", choices=("two_step", "step2_only"))
    p.add_argument("--patience", type=int, default=5)
    if with_folds:
        p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--clamp", action="store_true",
                   help="clip predictions into [0, 24] before scoring")
    p.add_argument("--jobs", type=int, default=1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="topicwise",
                     description="Topic-slotted multi-modal score regression pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted signal")
    p.add_argument("--out", required=True)
    p.add_argument("--sessions", type=int, default=150)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--spec", default=None, help="JSON file overriding generator fields")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-dict", help="draft a topic dictionary from a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-dist", type=int, default=3)
    p.set_defaults(func=_cmd_build_dict)

    p = sub.add_parser("segment", help="emit per-session topic segment tables")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dict", default=str(defaults.data_path("topics_83.json")))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("featurize", help="assemble topic-slotted feature vectors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dict", default=str(defaults.data_path("topics_83.json")))
    p.add_argument("--word-dict", default=str(defaults.data_path("word_categories_93.txt")))
    p.add_argument("--rules", default=str(defaults.data_path("key_topic_rules.json")))
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None, help="comma list of splits to keep")
    p.add_argument("--whole-interview", action="store_true",
                   help="emit 391-dim context-unaware vectors instead")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("select", help="two-step feature selection")
    p.add_argument("--vectors", required=True)
    p.add_argument("--layout", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="two_step", choices=("two_step", "step2_only"))
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--max-k", type=int, default=None)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("train", help="train one regressor")
    p.add_argument("--vectors", required=True)
    p.add_argument("--layout", default=None)
    p.add_argument("--selection", default=None, help="selection.json restricting features")
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="sgd_squared",
                   choices=("sgd_squared", "svr_linear", "random_forest", "mean"))
    p.add_argument("--hyper", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid", help="(model, k) grid search by pooled CV RMSE")
    p.add_argument("--vectors", required=True)
    p.add_argument("--layout", default=None)
    p.add_argument("--selection", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--models", default="sgd_squared,svr_linear,random_forest")
    p.add_argument("--k-range", default="1:46")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("cv", help="stratified cross-validation protocol")
    p.add_argument("--vectors", required=True)
    p.add_argument("--layout", default=None)
    p.add_argument("--out", required=True)
    _add_model_args(p)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("holdout", help="train on one table, test on another")
    p.add_argument("--train-vectors", required=True)
    p.add_argument("--test-vectors", required=True)
    p.add_argument("--layout", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", default="dev", choices=("dev", "test"))
    _add_model_args(p, with_folds=False)
    p.set_defaults(func=_cmd_holdout)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except InvariantError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
