"""Batch pipeline entry point.

Stages communicate only via files: simulate/ingest produce corpus
directories, features produces matrix files, train produces checkpoints,
evaluate produces per-round metric reports, compare produces the pairwise
comparison table. Every artifact directory gets a resolved-config copy.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import features as ft
from .corpus import load_corpus, save_corpus
from .estimators import (
    HEURISTIC_KINDS,
    KIND_INPUTS,
    EstimatorKind,
    build_estimator,
    granularity_of,
    save_estimator,
)
from .evaluate import (
    METRIC_NAMES,
    mean_metric,
    paired_comparisons,
    render_comparison_table,
)
from .ingest import ingest_to_dir
from .nnet import TrainConfig
from .pipeline import (
    DEFAULT_QUESTION_PAIRS,
    GROUND_TRUTH_KIND,
    ExperimentResult,
    run_experiment,
)
from .simulate import (
    SimConfig,
    corpus_stats,
    default_sim_config,
    generate_corpus,
    mixed_mouse_sim_config,
)

_CONFIG_SECTIONS = {
    "simulate": {
        "seed", "preset", "n_users", "newsletters_per_user", "n_newsletters",
        "messages_min", "messages_max", "words_min", "words_max",
        "session_min", "session_max", "gap_seconds",
    },
    "train": {
        "batch_size", "max_epochs", "lr", "positive_weight", "patience", "seed",
    },
    "evaluate": {"rounds", "seed", "kinds", "threads"},
    "compare": {"metrics"},
}


class CliError(ValueError):
    pass


def _load_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        read = parser.read(path)
        if not read:
            raise CliError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _CONFIG_SECTIONS:
                raise CliError(f"{path}: unknown config section [{section}]")
            unknown = set(parser[section]) - _CONFIG_SECTIONS[section]
            if unknown:
                raise CliError(f"{path}: unknown key(s) in [{section}]: {sorted(unknown)}")
    return parser


def _write_resolved(out_dir: Path, section: str, values: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    parser = configparser.ConfigParser()
    parser["readmeter"] = {"version": __version__}
    parser[section] = {k: str(v) for k, v in sorted(values.items())}
    with open(out_dir / "resolved-config.ini", "w", encoding="utf-8") as fh:
        parser.write(fh)


def _cfg_get(cfg, section: str, key: str, fallback=None, cast=str):
    if cfg.has_option(section, key):
        return cast(cfg.get(section, key))
    return fallback


def _sim_config(args, cfg) -> SimConfig:
    preset = args.preset or _cfg_get(cfg, "simulate", "preset", "default")
    seed = args.seed if args.seed is not None else _cfg_get(cfg, "simulate", "seed", 0, int)
    if preset == "default":
        base = default_sim_config(seed=seed)
    elif preset == "mixed-mouse":
        base = mixed_mouse_sim_config(seed=seed)
    else:
        raise CliError(f"unknown simulate preset {preset!r}")
    overrides = {}
    for field, (lo_key, hi_key) in {
        "messages_range": ("messages_min", "messages_max"),
        "words_range": ("words_min", "words_max"),
        "session_seconds_range": ("session_min", "session_max"),
    }.items():
        lo = _cfg_get(cfg, "simulate", lo_key, None, int)
        hi = _cfg_get(cfg, "simulate", hi_key, None, int)
        if (lo is None) != (hi is None):
            raise CliError(f"config must set both {lo_key} and {hi_key}")
        if lo is not None:
            overrides[field] = (lo, hi)
    for key in ("n_users", "newsletters_per_user", "n_newsletters", "gap_seconds"):
        v = _cfg_get(cfg, "simulate", key, None, int)
        if v is not None:
            overrides[key] = v
    if args.users is not None:
        overrides["n_users"] = args.users
    if overrides:
        from dataclasses import replace
        base = replace(base, **overrides)
    return base


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim = _sim_config(args, cfg)
    corpus = generate_corpus(sim)
    out = Path(args.out)
    save_corpus(corpus, out)
    _write_resolved(out, "simulate", {"seed": sim.seed, "preset": args.preset or "default",
                                      "n_users": sim.n_users})
    stats = corpus_stats(corpus)
    print(json.dumps(stats.to_dict(), sort_keys=True))
    return 0


def _cmd_ingest(args) -> int:
    out = Path(args.out)
    corpus = ingest_to_dir(args.interactions, args.messages, out, labels_csv=args.labels)
    _write_resolved(out, "simulate", {"source": args.interactions})
    print(json.dumps(corpus_stats(corpus).to_dict(), sort_keys=True))
    return 0


def _cmd_features(args) -> int:
    corpus = load_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labeled = not args.unlabeled
    written = {}
    for granularity in ("timestamp", "session"):
        if args.granularity not in ("both", granularity):
            continue
        matrix = ft.build_dataset(corpus.runs, granularity=granularity, labeled=labeled)
        path = out / f"{granularity}.tsv"
        ft.save_matrix(matrix, path)
        written[granularity] = {"path": path.name, "rows": matrix.n_rows,
                                "schema": matrix.schema}
    _write_resolved(out, "evaluate", {"granularity": args.granularity, "labeled": labeled})
    print(json.dumps(written, sort_keys=True))
    return 0


def _train_config(args, cfg) -> TrainConfig:
    kwargs = {}
    for key, cast in (
        ("batch_size", int), ("max_epochs", int), ("lr", float),
        ("positive_weight", float), ("patience", int), ("seed", int),
    ):
        v = _cfg_get(cfg, "train", key, None, cast)
        if v is not None:
            kwargs[key] = v
    if args.seed is not None:
        kwargs["seed"] = args.seed
    return TrainConfig(**kwargs)


def _kind(value: str) -> EstimatorKind:
    try:
        return EstimatorKind(value)
    except ValueError:
        raise CliError(
            f"unknown estimator kind {value!r}; choose from "
            f"{', '.join(k.value for k in EstimatorKind)}"
        ) from None


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    config = _train_config(args, cfg)
    kind = _kind(args.kind)
    corpus = load_corpus(args.corpus)
    if kind in HEURISTIC_KINDS:
        est = build_estimator(kind, None, None)
    else:
        granularity = granularity_of(kind)
        matrix = ft.build_dataset(corpus.runs, granularity=granularity)
        sessions = sorted(set(matrix.session_ids))
        rng = np.random.default_rng(config.seed)
        n_val = max(1, math.ceil(len(sessions) / 8))
        val = {sessions[i] for i in rng.choice(len(sessions), size=n_val, replace=False)}
        val_mask = matrix.rows_for_sessions(val)
        from .pipeline import _subset
        est = build_estimator(kind, _subset(matrix, ~val_mask), _subset(matrix, val_mask), config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_estimator(est, out)
    _write_resolved(out.parent, "train", {"kind": kind.value, "seed": config.seed})
    print(json.dumps({"kind": kind.value, "checkpoint": str(out)}))
    return 0


def _parse_kinds(raw: str | None) -> list:
    if not raw or raw == "all":
        return list(EstimatorKind)
    kinds = []
    for value in raw.split(","):
        value = value.strip()
        if not value:
            continue
        kinds.append(value if value == GROUND_TRUTH_KIND else _kind(value))
    return kinds


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    config = _train_config(args, cfg)
    corpus = load_corpus(args.corpus)
    kinds = _parse_kinds(args.kinds or _cfg_get(cfg, "evaluate", "kinds"))
    rounds = args.rounds if args.rounds is not None else _cfg_get(cfg, "evaluate", "rounds", None, int)
    seed = args.seed if args.seed is not None else _cfg_get(cfg, "evaluate", "seed", 0, int)
    threads = args.threads if args.threads is not None else _cfg_get(cfg, "evaluate", "threads", 1, int)

    ts_matrix = sess_matrix = None
    if args.features:
        fdir = Path(args.features)
        ts_path, sess_path = fdir / "timestamp.tsv", fdir / "session.tsv"
        if ts_path.exists():
            ts_matrix = ft.load_matrix(ts_path)
        if sess_path.exists():
            sess_matrix = ft.load_matrix(sess_path)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_experiment(
        corpus, kinds, n_rounds=rounds, seed=seed, base_config=config,
        threads=threads, ts_matrix=ts_matrix, sess_matrix=sess_matrix,
        dump_dir=str(out / "predictions") if args.dump_predictions else None,
    )
    with open(out / "rounds.json", "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    summary = {
        kind: {m: mean_metric(reports, m) for m in METRIC_NAMES}
        for kind, reports in result.per_round.items()
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_resolved(out, "evaluate", {
        "seed": seed, "rounds": len(result.plan.rounds),
        "kinds": ",".join(result.kinds), "threads": threads,
    })
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    rounds_path = Path(args.eval)
    if rounds_path.is_dir():
        rounds_path = rounds_path / "rounds.json"
    if not rounds_path.exists():
        raise CliError(f"no evaluation results at {rounds_path}")
    result = ExperimentResult.from_dict(json.loads(rounds_path.read_text(encoding="utf-8")))
    report = paired_comparisons(result.per_round, DEFAULT_QUESTION_PAIRS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparisons.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dicts(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    table = render_comparison_table(report)
    (out / "table.txt").write_text(table, encoding="utf-8")
    _write_resolved(out, "compare", {"source": str(rounds_path)})
    print(table, end="")
    return 0


def _cmd_report(args) -> int:
    if args.corpus:
        corpus = load_corpus(args.corpus)
        print(json.dumps(corpus_stats(corpus).to_dict(), sort_keys=True, indent=1))
        return 0
    if args.eval:
        path = Path(args.eval)
        if path.is_dir():
            path = path / "rounds.json"
        result = ExperimentResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
        print(f"rounds: {len(result.plan.rounds)}")
        header = ["model"] + list(METRIC_NAMES)
        rows = [header]
        for kind in result.kinds:
            reports = result.per_round[kind]
            row = [kind]
            for metric in METRIC_NAMES:
                value = mean_metric(reports, metric)
                if value is None:
                    row.append("\\")
                elif metric == "abs_error":
                    row.append(f"{value:.2f}s")
                else:
                    row.append(f"{100 * value:.1f}%")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        for row in rows:
            print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return 0
    raise CliError("report needs --corpus or --eval")


def _cmd_schema(args) -> int:
    doc = {
        "timestamp": {
            "version": ft.TS_SCHEMA_VERSION,
            "columns": list(ft.TS_COLUMNS),
            "blocks": {k: list(v) for k, v in ft.BLOCK_COLUMNS.items() if k.startswith("ts_")},
        },
        "session": {
            "version": ft.SESS_SCHEMA_VERSION,
            "columns": list(ft.SESS_COLUMNS),
            "blocks": {k: list(v) for k, v in ft.BLOCK_COLUMNS.items() if k.startswith("sess_")},
        },
        "estimator_inputs": {
            kind.value: {
                "tower_a": list(cols_a),
                "tower_b": list(cols_b) if cols_b else None,
            }
            for kind, (cols_a, cols_b) in KIND_INPUTS.items()
        },
    }
    if args.granularity != "both":
        doc = doc[args.granularity]
    print(json.dumps(doc, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readmeter",
        description="Estimate per-message reading time and read level from browser interaction logs.",
    )
    parser.add_argument("--version", action="version", version=f"readmeter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--preset", choices=["default", "mixed-mouse"])
    p.add_argument("--users", type=int)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="convert an external dataset into canonical corpus files")
    p.add_argument("--interactions", required=True)
    p.add_argument("--messages", required=True)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("features", help="extract feature matrices from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--granularity", choices=["both", "timestamp", "session"], default="both")
    p.add_argument("--unlabeled", action="store_true")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train one estimator kind on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="leave-one-user-out evaluation of estimator kinds")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinds", help="comma-separated kinds, or 'all'")
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--features", help="directory with precomputed matrices")
    p.add_argument("--dump-predictions", action="store_true",
                   help="also write per-round test-set prediction dumps (JSONL)")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="pairwise model comparisons with Holm-Sidak adjustment")
    p.add_argument("--eval", required=True, help="evaluate output dir or rounds.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="human-readable summary of a corpus or evaluation")
    p.add_argument("--corpus")
    p.add_argument("--eval")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("schema", help="print the versioned feature column listing")
    p.add_argument("--granularity", choices=["both", "timestamp", "session"], default="both")
    p.set_defaults(func=_cmd_schema)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        print(f"readmeter: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
