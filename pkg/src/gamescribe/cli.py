"""Command-line entry point.

Subcommands: prepare (synthesize or ingest a corpus), annotate, train,
generate, evaluate, gradcheck.  Failures exit nonzero with a one-line error
JSON on stderr (exit 2 for configuration/path problems, 1 for runtime
failures); artifacts embed the hash of the configuration that produced
them.  The GAMESCRIBE_LOG env var sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .records import (
    DataError,
    Dataset,
    load_dataset,
    save_dataset,
)


class CliError(Exception):
    def __init__(self, message: str, code: str = "invalid-arguments", exit_code: int = 2):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise CliError(f"{what} {p} does not exist", code="missing-path")
    return p


def _split_pairs(dataset: Dataset, split: str):
    if split not in dataset.splits:
        raise CliError(f"unknown split {split!r}", code="missing-path")
    return dataset.splits[split]


# --------------------------------------------------------------------------


def cmd_prepare(args: argparse.Namespace) -> int:
    from .synth import synth_corpus

    out = Path(args.out)
    if args.synth:
        writers = tuple(w.strip() for w in args.writers.split(",") if w.strip())
        dataset = synth_corpus(
            seed=args.seed,
            n_games=args.games,
            n_players=args.players,
            writers=writers,
            paired_writers=args.paired_writers,
            dev_frac=args.dev_frac,
            test_frac=args.test_frac,
        )
    elif args.ingest:
        dataset = load_dataset(_require_dir(args.ingest, "ingest directory"))
    else:
        raise CliError("prepare needs --synth or --ingest")
    save_dataset(out, dataset)
    _emit({"out": str(out), "counts": dataset.counts(), "writers": dataset.writers})
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    from .annotator import annotate
    from .records import save_labels, validate_labels

    dataset = load_dataset(_require_dir(args.data_dir, "data directory"))
    pairs = _split_pairs(dataset, args.split)
    labeled = []
    for game, _ in pairs:
        if game.summary is None:
            raise CliError(f"game {game.game_id} has no summary to annotate", code="missing-summary")
        labels = annotate(game, game.summary)
        problems = validate_labels(game, labels)
        if problems:
            raise CliError(problems[0], code="unsound-labels", exit_code=1)
        labeled.append(labels)
    save_labels(Path(args.out), labeled)
    n_links = sum(sum(lab.z) for lab in labeled)
    _emit({"out": args.out, "games": len(labeled), "record_links": n_links})
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from .model import config_hash
    from .trainer import TrainConfig, TrainingDiverged, train

    overrides = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise CliError(f"config file {cfg_path} does not exist", code="missing-path")
        overrides = json.loads(cfg_path.read_text())
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        config = TrainConfig.from_dict(overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad train config: {exc}", code="invalid-config") from None

    dataset = load_dataset(_require_dir(args.data_dir, "data directory"))
    try:
        result = train(
            dataset,
            config,
            out_dir=Path(args.out),
            log_fn=lambda entry: print(json.dumps(entry), flush=True),
        )
    except TrainingDiverged as exc:
        raise CliError(str(exc), code="diverged", exit_code=1) from None
    _emit(
        {
            "out": args.out,
            "config_sha256": config_hash(config.as_dict()),
            "best_epoch": result.best_epoch,
            "best_dev_bleu": round(result.best_dev_bleu, 4),
        }
    )
    return 0


def _find_game(dataset: Dataset, game_id: str):
    for pairs in dataset.splits.values():
        for game, _ in pairs:
            if game.game_id == game_id:
                return game
    raise CliError(f"game {game_id!r} not found in any split", code="missing-path")


def cmd_generate(args: argparse.Namespace) -> int:
    from .decoder import save_trace, trace_to_json
    from .model import ModelParams, config_hash

    dataset = load_dataset(_require_dir(args.data_dir, "data directory"))
    game = _find_game(dataset, args.game_id)
    meta = {"max_len": args.max_len, "writer": args.writer, "game_id": args.game_id}
    if args.template:
        from .synth import TEMPLATE_STYLE, template_summary

        labels = template_summary(game)
        tokens = labels.tokens
        trace_obj = {
            "game_id": game.game_id,
            "writer": TEMPLATE_STYLE.name,
            "tokens": list(tokens),
            "truncated": False,
            "template": True,
            "config_sha256": config_hash(meta),
        }
        if args.trace:
            Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
            Path(args.trace).write_text(json.dumps(trace_obj, indent=2))
    else:
        if not args.ckpt:
            raise CliError("generate needs --ckpt (or --template)")
        ckpt = _require_dir(args.ckpt, "checkpoint directory")
        from .decoder import generate

        params = ModelParams.load(ckpt)
        trace = generate(params, game, writer=args.writer, max_len=args.max_len)
        trace_obj = trace_to_json(trace, extra={"config_sha256": config_hash(meta)})
        tokens = trace.tokens
        if args.trace:
            save_trace(Path(args.trace), trace, extra={"config_sha256": config_hash(meta)})
    print(" ".join(tokens))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .metrics import evaluate_corpus
    from .model import config_hash

    dataset = load_dataset(_require_dir(args.data_dir, "data directory"))
    pairs = _split_pairs(dataset, args.split)
    games = {g.game_id: g for g, _ in pairs}
    refs = {}
    for game, labels in pairs:
        tokens = labels.tokens if labels is not None else game.summary
        if tokens:
            refs[game.game_id] = list(tokens)
    if args.reference:
        for line in Path(args.reference).read_text().splitlines():
            if line.strip():
                obj = json.loads(line)
                refs[obj["game_id"]] = list(obj["tokens"])

    gen_path = Path(args.generated)
    if not gen_path.is_file():
        raise CliError(f"generated file {gen_path} does not exist", code="missing-path")
    gen_tokens, ref_tokens, game_list = [], [], []
    for line in gen_path.read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        gid = obj["game_id"]
        if gid not in games:
            raise CliError(f"generated summary for unknown game {gid!r}", code="missing-path")
        if gid not in refs:
            raise CliError(f"no reference summary for game {gid!r}", code="missing-path")
        gen_tokens.append(list(obj["tokens"]))
        ref_tokens.append(refs[gid])
        game_list.append(games[gid])
    if not game_list:
        raise CliError("generated file holds no summaries", code="missing-path")

    report = evaluate_corpus(gen_tokens, ref_tokens, game_list, dld_variant=args.dld_variant)
    out_obj = report.as_dict()
    out_obj["config_sha256"] = config_hash(
        {"split": args.split, "dld_variant": args.dld_variant, "generated": str(gen_path)}
    )

    if args.pca_ckpt:
        import csv

        from .metrics import pca_project
        from .model import ModelParams

        params = ModelParams.load(_require_dir(args.pca_ckpt, "checkpoint directory"))
        table = params.entity_table.data
        names = params.vocabs.entities.tokens
        coords, explained = pca_project(table, k=2)
        out_csv = Path(args.pca_out or "entity_pca.csv")
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with out_csv.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entity", "pc1", "pc2"])
            for name, row in zip(names, coords):
                writer.writerow([name, f"{row[0]:.6f}", f"{row[1]:.6f}"])
        out_obj["pca"] = {
            "out": str(out_csv),
            "explained_variance_ratio": [round(float(v), 6) for v in explained],
        }

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(out_obj, indent=2, sort_keys=True))
    _emit(out_obj)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    from .gradcheck import run_all

    report = run_all(epsilon=args.epsilon, tolerance=args.tolerance)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True))
    _emit(report)
    return 0 if report["passed"] else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamescribe", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="synthesize or ingest a corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--synth", action="store_true")
    p.add_argument("--ingest", metavar="SRC_DIR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--games", type=int, default=10)
    p.add_argument("--players", type=int, default=4)
    p.add_argument("--writers", default="alex")
    p.add_argument("--paired-writers", action="store_true")
    p.add_argument("--dev-frac", type=float, default=0.0)
    p.add_argument("--test-frac", type=float, default=0.0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("annotate", help="label summaries against their games")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train on a labeled corpus")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file of TrainConfig fields")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="greedy decode one game")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--game-id", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--template", action="store_true", help="template baseline, no model")
    p.add_argument("--writer")
    p.add_argument("--max-len", type=int, default=700)
    p.add_argument("--trace", help="write the decision trace JSON here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="extractive metrics + BLEU")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--generated", required=True, help="JSONL of {game_id, tokens}")
    p.add_argument("--reference", help="JSONL overriding the split's summaries")
    p.add_argument("--dld-variant", choices=["osa", "full"], default="osa")
    p.add_argument("--out")
    p.add_argument("--pca-ckpt", help="also dump entity-embedding PCA from this checkpoint")
    p.add_argument("--pca-out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("GAMESCRIBE_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(json.dumps({"error": {"code": exc.code, "message": str(exc)}}) + "\n")
        return exc.exit_code
    except DataError as exc:
        sys.stderr.write(json.dumps({"error": {"code": "data-error", "message": str(exc)}}) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort machine-readable error
        sys.stderr.write(
            json.dumps({"error": {"code": type(exc).__name__, "message": str(exc)}}) + "\n"
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
