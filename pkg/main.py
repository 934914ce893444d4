# main.py
"""
relprobe command line.

    relprobe run      --config PATH [--out DIR] [--seed N] [--jobs N] [--timeout S] [--only NAME]
    relprobe generate --kind KIND [--p P] [--index I] [--combo LABEL] --out DIR [--dump-trees]
    relprobe check    --data PATH
    relprobe train    --data DIR --model NAME --rank K [--lam L] --checkpoint PATH [--log PATH]
    relprobe eval     --checkpoint PATH --data PATH
    relprobe plot     --results PATH --out DIR [--config PATH]

Environment (.env is honoured): RELPROBE_SEED, RELPROBE_OUTPUT_DIR, RELPROBE_JOBS,
RELPROBE_CELL_TIMEOUT, RELPROBE_DEBUG.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from checkpoint import load_checkpoint, save_checkpoint
from experiment_runner import DEFAULT_CELL_TIMEOUT, emit_plot_data, generate_dataset, load_config, run
from family_data import dump_tree, generate_families, to_dot
from kg_core import (
    SPLIT_FILES,
    InvalidArgument,
    LabeledFact,
    RelprobeError,
    SplitKind,
    SplitSpec,
    load_dataset,
    read_facts,
    read_vocab,
    save_dataset,
    vocab_for_facts,
)
from models import ModelConfig
from property_data import PropertyCombo, check_properties, facts_to_matrix, report_matches
from trainer import TrainConfig, evaluate_ap, train

log = logging.getLogger("relprobe")


# ============================
# Console output helpers
# ============================

def _line(label: str, result: str, note: str = "") -> None:
    # Example: "Cells:       OK (120 run, 0 failed)"
    msg = f"{label:<12} {result}"
    if note:
        msg += f" {note}"
    print(msg)


def _result(ok: bool) -> None:
    print(f"Result:      {'SUCCESS ✔' if ok else 'DONE (check WARN/FAIL)'}")


def _env(name: str, default: Optional[str] = None) -> Optional[str]:
    v = os.getenv(name)
    return v if v not in ("", None) else default


def _env_int(name: str, default: Optional[int] = None) -> Optional[int]:
    v = _env(name)
    if v is None:
        return default
    try:
        return int(v)
    except ValueError:
        raise InvalidArgument(f"{name} must be an integer, got {v!r}") from None


def _debug_enabled() -> bool:
    return (_env("RELPROBE_DEBUG", "") or "").strip().lower() in ("1", "true", "yes")


def _facts_from(path: Path, name: str) -> List[LabeledFact]:
    """A TSV file, or the named split of a dataset directory."""
    path = Path(path)
    if path.is_dir():
        return list(read_facts(path / name, read_vocab(path)))
    return list(read_facts(path))


# ============================
# Verbs
# ============================

def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else _env_int("RELPROBE_SEED")
    out_dir = args.out or _env("RELPROBE_OUTPUT_DIR") or config.output_dir
    jobs = args.jobs if args.jobs is not None else _env_int("RELPROBE_JOBS", 1)
    timeout = args.timeout if args.timeout is not None else float(_env("RELPROBE_CELL_TIMEOUT", str(DEFAULT_CELL_TIMEOUT)))

    print(f"relprobe run | config={args.config} seed={config.seed if seed is None else seed}\n")
    summary = run(config, out_dir=out_dir, seed=seed, jobs=jobs, cell_timeout=timeout or None, only=args.only)

    _line("Cells:", "OK" if summary.ok else "WARN", f"({summary.completed} run, {summary.skipped} skipped, {len(summary.failed)} failed)")
    for row in summary.failed[:10]:
        _line("Failed:", row.status.upper(), f"{row.experiment}/{row.split}/p={row.p}/{row.model}/K={row.K}/run={row.run}: {row.error}")
    print("")
    _line("Results:", "OK", str(summary.out_dir))
    _result(summary.ok)
    return 0 if summary.ok else 1


def cmd_generate(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _env_int("RELPROBE_SEED", 0)
    try:
        kind = SplitKind(args.kind)
    except ValueError:
        raise InvalidArgument(f"unknown split kind {args.kind!r}") from None
    p = args.p if args.p is not None else "0.8"
    spec = SplitSpec(kind, p, index=args.index, seed=seed)
    dataset = generate_dataset(spec, combo=args.combo, entities=args.entities, folds=args.folds)
    out = save_dataset(Path(args.out), dataset)

    tr, va, te = dataset.sizes()
    _line("Dataset:", "OK", f"{kind.value} p={spec.p} seed={seed} -> {out}")
    _line("Sizes:", f"train={tr} valid={va} test={te}")
    if args.dump_trees:
        if kind.value.startswith("family"):
            trees_dir = out / "trees"
            trees_dir.mkdir(parents=True, exist_ok=True)
            for tree in generate_families(seed):
                (trees_dir / f"family_{tree.family}.txt").write_text(dump_tree(tree), encoding="utf-8")
                (trees_dir / f"family_{tree.family}.dot").write_text(to_dot(tree), encoding="utf-8")
            _line("Trees:", "OK", str(trees_dir))
        else:
            _line("Trees:", "SKIP", "(only family datasets have trees)")
    _result(True)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    path = Path(args.data)
    combos = []
    if path.is_dir():
        dataset = load_dataset(path)
        facts = list(dataset.all_facts)
        vocab = dataset.vocab
        combos = list(dataset.provenance.get("combos") or [])
    else:
        facts = list(read_facts(path))
        vocab = read_vocab(path.parent) or vocab_for_facts(facts)

    n = vocab.entity_count
    all_ok = True
    for r in range(vocab.relation_count):
        Y = facts_to_matrix(facts, n, relation=r)
        if np.any(Y == 0):
            raise InvalidArgument(f"relation {vocab.relation_name(r)!r} is not fully observed ({int(np.sum(Y == 0))} of {n * n} cells missing)")
        report = check_properties(Y)
        note = " ".join(f"{k}={'yes' if v else 'no'}" for k, v in report.items())
        status = "OK"
        if r < len(combos) and not report_matches(report, PropertyCombo.parse(combos[r])):
            status = "FAIL"
            all_ok = False
        _line(f"{vocab.relation_name(r)}:", status, note)
    print("")
    _result(all_ok)
    return 0 if all_ok else 1


def cmd_train(args: argparse.Namespace) -> int:
    dataset = load_dataset(Path(args.data))
    seed = args.seed if args.seed is not None else _env_int("RELPROBE_SEED", 0)
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        batch_count=args.batches,
        max_epochs=args.max_epochs,
        eval_every=args.eval_every,
        seed=seed,
    )
    model_cfg = ModelConfig(args.model, args.rank, args.lam)
    store, history = train(model_cfg, train_cfg, dataset, log_path=Path(args.log) if args.log else None)
    valid_ap = evaluate_ap(store, dataset.valid)
    test_ap = evaluate_ap(store, dataset.test) if any(f.label == 1 for f in dataset.test) else None
    save_checkpoint(Path(args.checkpoint), store)

    _line("Model:", model_cfg.kind.name, f"K={model_cfg.rank} lambda={model_cfg.lam} seed={seed}")
    _line("Last eval:", f"epoch {history[-1][0]}" if history else "none", f"({len(history)} evaluations)")
    _line("Valid AP:", f"{valid_ap:.6f}")
    if test_ap is not None:
        _line("Test AP:", f"{test_ap:.6f}")
    _line("Checkpoint:", "OK", str(args.checkpoint))
    _result(True)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    store = load_checkpoint(Path(args.checkpoint))
    facts = _facts_from(Path(args.data), SPLIT_FILES[2])
    for f in facts:
        store.check_fact(f.relation, f.subject, f.object)
    ap = evaluate_ap(store, facts)
    _line("Checkpoint:", store.kind.name, f"K={store.rank}")
    _line("AP:", f"{ap:.6f}", f"({len(facts)} facts)")
    _result(True)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else None
    out = emit_plot_data(Path(args.results), Path(args.out), config=config)
    _line("Tables:", "OK", f"({len(out.tables)} written to {args.out})")
    if out.missing:
        _line("Missing:", "WARN", f"({len(out.missing)} cells emitted blank)")
    _result(not out.missing)
    return 0 if not out.missing else 1


# ============================
# Parser
# ============================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relprobe", description="Latent factor models vs. relation properties and kinship")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run the experiment grid of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--timeout", type=float, help="per-cell budget in seconds (0 disables)")
    p.add_argument("--only", action="append", help="experiment name; repeatable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write one dataset directory")
    p.add_argument("--kind", required=True, choices=[k.value for k in SplitKind])
    p.add_argument("--p")
    p.add_argument("--index", type=int, default=0, help="fold index for individual-tenfold")
    p.add_argument("--combo", help="property combo label, e.g. antisymmetric-transitive")
    p.add_argument("--entities", type=int, default=50)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-trees", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="brute-force property check of a fully observed TSV or dataset")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("train", help="train one (model, K, lambda) cell")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=5000)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="AP of a checkpoint on a TSV (or a dataset's test split)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="aggregate results.csv into per-(experiment, split, p) tables")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=logging.DEBUG if _debug_enabled() else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    log.debug(f"[CLI] {args.verb} {vars(args)}")
    try:
        return args.func(args)
    except RelprobeError as e:
        print(f"relprobe {args.verb} | {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"relprobe {args.verb} | {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
