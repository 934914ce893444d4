# experiment_runner.py
"""
Experiment sweeps: config loading, cell expansion, the resumable run loop and
plot-data tables.

Output directory of a run:
    run_status.json      status / started_utc / finished_utc / counters / error
    results.csv          one ResultRow per finished cell (append-only, header once)
    completed_cells.txt  one JSON cell key per line; these cells are skipped on rerun
    failures.csv         cells that failed in the latest attempt (retried next time)
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from family_data import FamilySplit, FamilySplitKind, DEFAULT_P_GRID, build_family_dataset
from kg_core import (
    CellTimeout,
    Dataset,
    InvalidArgument,
    SplitKind,
    SplitSpec,
    UndefinedMetric,
    aggregate_runs,
    derive_seed,
    to_fraction,
)
from logic_oracle import PropertyOracle, oracle_ap, oracle_for_dataset
from models import ModelKind
from property_data import PropertyCombo, build_individual_datasets, build_joint_dataset, valid_combos
from trainer import DEFAULT_LAMBDAS, DEFAULT_RANKS, GridSpec, TrainConfig, grid_search

log = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
COMPLETED_FILE = "completed_cells.txt"
FAILURES_FILE = "failures.csv"
STATUS_FILE = "run_status.json"

DEFAULT_CELL_TIMEOUT = 900.0
INDIVIDUAL_P = Fraction(4, 5)
# family cells train on more, smaller batches and stop earlier
FAMILY_TRAIN_DEFAULTS: Dict[str, Any] = {"batch_count": 100, "max_epochs": 1000}

RESULT_COLUMNS = (
    "experiment", "split", "p", "model", "variant", "K", "lambda", "run",
    "valid_ap", "test_ap", "oracle_ap", "seconds", "seed", "status",
)
FAILURE_COLUMNS = ("experiment", "split", "p", "model", "K", "run", "status", "error")
PLOT_COLUMNS = ("model", "K", "mean_ap", "std_ap", "oracle_ap", "runs")


# ----------------------------
# Helpers
# ----------------------------
def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(p: Path, obj: Any) -> None:
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(obj, indent=2), encoding="utf-8")


def _read_json(p: Path) -> Optional[Dict[str, Any]]:
    if not p.exists():
        return None
    return json.loads(p.read_text(encoding="utf-8"))


def _fmt_p(p: Fraction) -> str:
    return repr(float(p))


def _fmt_float(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


# ----------------------------
# Config
# ----------------------------
class ExperimentKind(str, Enum):
    PROPERTY_INDIVIDUAL = "property-individual"
    PROPERTY_JOINT = "property-joint"
    FAMILY = "family"


def resolve_model(name: str) -> Tuple[str, Tuple[ModelKind, ...]]:
    """Display name and the model kinds trained for it; plain `TransE` trains both norms."""
    raw = (name or "").strip()
    low = raw.lower()
    if low == "transe":
        return "TransE", (ModelKind.parse("TransE-L1"), ModelKind.parse("TransE-L2"))
    if low in ("f", "fmodel"):
        return "F", (ModelKind.parse("F"),)
    kind = ModelKind.parse(raw)
    return kind.name, (kind,)


_EXPERIMENT_KEYS = {
    "name", "kind", "models", "ranks", "lambdas", "p_grid", "runs", "folds",
    "combos", "splits", "entities", "train",
}
_TOP_KEYS = {"seed", "output_dir", "experiments"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: ExperimentKind
    models: Tuple[str, ...]
    ranks: Tuple[int, ...] = DEFAULT_RANKS
    lambdas: Tuple[float, ...] = DEFAULT_LAMBDAS
    p_grid: Tuple[Fraction, ...] = ()
    runs: int = 10
    folds: int = 10
    combos: Tuple[str, ...] = ()
    splits: Tuple[str, ...] = ()
    entities: int = 50
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", ExperimentKind(self.kind))
        except ValueError:
            raise InvalidArgument(f"unknown experiment kind {self.kind!r}") from None
        if not self.name or not re.fullmatch(r"[\w.-]+", self.name):
            raise InvalidArgument(f"experiment name must be a non-empty word, got {self.name!r}")
        if not self.models:
            raise InvalidArgument(f"{self.name}: models must not be empty")
        object.__setattr__(self, "models", tuple(resolve_model(m)[0] for m in self.models))
        GridSpec(tuple(self.lambdas), tuple(self.ranks))
        object.__setattr__(self, "ranks", tuple(int(k) for k in self.ranks))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if int(self.runs) < 1:
            raise InvalidArgument(f"{self.name}: runs must be >= 1")
        if int(self.entities) < 2:
            raise InvalidArgument(f"{self.name}: entities must be >= 2")

        if self.kind is ExperimentKind.PROPERTY_INDIVIDUAL:
            p_grid = tuple(to_fraction(p) for p in self.p_grid) or (INDIVIDUAL_P,)
            if p_grid != (INDIVIDUAL_P,):
                raise InvalidArgument(f"{self.name}: individual relations always train on 0.8")
            combos = self.combos or ("all",)
            if tuple(combos) == ("all",):
                combos = tuple(c.label for c in valid_combos())
            object.__setattr__(self, "combos", tuple(PropertyCombo.parse(c).label for c in combos))
            if int(self.folds) < 3:
                raise InvalidArgument(f"{self.name}: folds must be >= 3")
        else:
            p_grid = tuple(to_fraction(p) for p in self.p_grid) or DEFAULT_P_GRID
            if self.combos:
                raise InvalidArgument(f"{self.name}: combos only apply to property-individual")

        if self.kind is ExperimentKind.PROPERTY_JOINT:
            for p in p_grid:
                if not (0 < p <= Fraction(9, 10)):
                    raise InvalidArgument(f"{self.name}: joint p must lie in (0, 0.9], got {p}")
        if self.kind is ExperimentKind.FAMILY:
            splits = tuple(self.splits) or tuple(s.value for s in FamilySplitKind)
            unknown = [s for s in splits if s not in {k.value for k in FamilySplitKind}]
            if unknown:
                raise InvalidArgument(f"{self.name}: unknown family splits {unknown}")
            object.__setattr__(self, "splits", tuple(FamilySplitKind(s).value for s in splits))
            for p in p_grid:
                for s in self.splits:
                    if p == 0 and s != FamilySplitKind.FAMILY.value:
                        continue
                    FamilySplit(FamilySplitKind(s), p)
        elif self.splits:
            raise InvalidArgument(f"{self.name}: splits only apply to family experiments")
        if not p_grid:
            raise InvalidArgument(f"{self.name}: p grid must not be empty")
        object.__setattr__(self, "p_grid", p_grid)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        unknown = set(raw) - _EXPERIMENT_KEYS
        if unknown:
            raise InvalidArgument(f"unknown experiment keys: {sorted(unknown)}")
        for key in ("name", "kind", "models"):
            if key not in raw:
                raise InvalidArgument(f"experiment is missing {key!r}")
        kwargs = dict(raw)
        for key in ("models", "ranks", "lambdas", "p_grid", "splits"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "combos" in kwargs:
            combos = kwargs["combos"]
            kwargs["combos"] = ("all",) if combos == "all" else tuple(combos)
        defaults = FAMILY_TRAIN_DEFAULTS if raw["kind"] == ExperimentKind.FAMILY.value else {}
        kwargs["train"] = TrainConfig.from_dict(raw.get("train"), **defaults)
        return cls(**kwargs)


@dataclass(frozen=True)
class RunConfigFile:
    seed: int = 0
    output_dir: Optional[str] = None
    experiments: Tuple[ExperimentConfig, ...] = ()

    def __post_init__(self) -> None:
        names = [e.name for e in self.experiments]
        if len(set(names)) != len(names):
            raise InvalidArgument(f"experiment names must be unique: {names}")


def parse_config(raw: Mapping[str, Any]) -> RunConfigFile:
    if not isinstance(raw, Mapping):
        raise InvalidArgument("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
    experiments = raw.get("experiments") or []
    if not isinstance(experiments, list) or not experiments:
        raise InvalidArgument("config needs a non-empty 'experiments' list")
    try:
        seed = int(raw.get("seed", 0))
    except (TypeError, ValueError) as e:
        raise InvalidArgument(f"seed must be an integer, got {raw.get('seed')!r}") from e
    return RunConfigFile(
        seed=seed,
        output_dir=raw.get("output_dir"),
        experiments=tuple(ExperimentConfig.from_dict(e) for e in experiments),
    )


def load_config(path: Path) -> RunConfigFile:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidArgument(f"{path}: not valid JSON ({e})") from e
    return parse_config(raw)


# ----------------------------
# Cells
# ----------------------------
@dataclass(frozen=True)
class Cell:
    experiment: str
    kind: ExperimentKind
    split: str
    p: Fraction
    model: str
    rank: int
    run: int

    @property
    def key(self) -> Tuple[str, str, str, str, int, int]:
        return (self.experiment, self.split, _fmt_p(self.p), self.model, self.rank, self.run)


def expand_cells(exp: ExperimentConfig) -> List[Cell]:
    """Every (split, p, model, K, run) cell of an experiment, in grid order."""
    groups: List[Tuple[str, Fraction]] = []
    count = int(exp.runs)
    if exp.kind is ExperimentKind.PROPERTY_INDIVIDUAL:
        groups = [(label, INDIVIDUAL_P) for label in exp.combos]
        count = int(exp.folds)
    elif exp.kind is ExperimentKind.PROPERTY_JOINT:
        groups = [("joint", p) for p in exp.p_grid]
    else:
        for split in exp.splits:
            for p in exp.p_grid:
                # p = 0 exists only for the family split
                if p == 0 and split != FamilySplitKind.FAMILY.value:
                    continue
                groups.append((split, p))
    return [
        Cell(exp.name, exp.kind, split, p, model, rank, run)
        for split, p in groups
        for model in exp.models
        for rank in exp.ranks
        for run in range(count)
    ]


# ----------------------------
# Datasets (cached per process)
# ----------------------------
@lru_cache(maxsize=16)
def _individual_folds(label: str, n: int, folds: int, seed: int) -> Tuple[Dataset, ...]:
    return tuple(build_individual_datasets(PropertyCombo.parse(label), n=n, folds=folds, seed=seed))


@lru_cache(maxsize=16)
def _joint_dataset(p: Fraction, n: int, seed: int) -> Dataset:
    return build_joint_dataset(p, n=n, seed=seed)


@lru_cache(maxsize=16)
def _family_dataset(split: str, p: Fraction, seed: int) -> Dataset:
    return build_family_dataset(FamilySplit(FamilySplitKind(split), p), seed=seed)


def dataset_for(cell: Cell, master_seed: int, entities: int = 50, folds: int = 10) -> Dataset:
    if cell.kind is ExperimentKind.PROPERTY_INDIVIDUAL:
        return _individual_folds(cell.split, entities, folds, derive_seed(master_seed, cell.kind.value))[cell.run]
    seed = derive_seed(master_seed, cell.kind.value, cell.run)
    if cell.kind is ExperimentKind.PROPERTY_JOINT:
        return _joint_dataset(cell.p, entities, seed)
    return _family_dataset(cell.split, cell.p, seed)


def _oracle_ap(dataset: Dataset) -> Optional[float]:
    try:
        value = oracle_ap(dataset, oracle_for_dataset(dataset))
    except UndefinedMetric as e:
        log.warning(f"[ORACLE] oracle AP undefined: {e}")
        return None
    prov = dataset.provenance
    combos = [PropertyCombo.parse(c) for c in prov.get("combos", [])]
    if any(c.transitive for c in combos):
        plain = oracle_ap(dataset, PropertyOracle(combos, contrapositive=False))
        log.info(f"[ORACLE] {prov.get('generator')} {','.join(c.label for c in combos)}: ap={value:.6f} without_contrapositive={plain:.6f}")
    if prov.get("split") == FamilySplitKind.RANDOM.value:
        log.info(f"[ORACLE] family random split p={prov.get('p')}: ap={value:.6f} (informational)")
    return value


@lru_cache(maxsize=64)
def _cached_oracle_ap(
    kind: ExperimentKind, split: str, p: Fraction, run: int, master_seed: int, entities: int, folds: int
) -> Optional[float]:
    # keyed like the dataset: model and K do not enter
    cell = Cell("", kind, split, p, "", 0, run)
    return _oracle_ap(dataset_for(cell, master_seed, entities, folds))


# ----------------------------
# Running one cell
# ----------------------------
@dataclass(frozen=True)
class CellTask:
    cell: Cell
    lambdas: Tuple[float, ...]
    train: TrainConfig
    master_seed: int
    entities: int = 50
    folds: int = 10
    timeout: Optional[float] = DEFAULT_CELL_TIMEOUT


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    split: str
    p: str
    model: str
    variant: str
    K: int
    lambda_: Optional[float]
    run: int
    valid_ap: Optional[float]
    test_ap: Optional[float]
    oracle_ap: Optional[float]
    seconds: float
    seed: int
    status: str
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def key(self) -> Tuple[str, str, str, str, int, int]:
        return (self.experiment, self.split, self.p, self.model, self.K, self.run)

    def as_csv(self) -> List[str]:
        return [
            self.experiment, self.split, self.p, self.model, self.variant, str(self.K),
            _fmt_float(self.lambda_), str(self.run), _fmt_float(self.valid_ap),
            _fmt_float(self.test_ap), _fmt_float(self.oracle_ap), f"{self.seconds:.3f}",
            str(self.seed), self.status,
        ]


def train_seed(master_seed: int, cell: Cell) -> int:
    # model and K enter later, through the grid-search cell seed
    return derive_seed(master_seed, "train", cell.kind.value, cell.split, _fmt_p(cell.p), cell.run)


def _run_cell(task: CellTask) -> ResultRow:
    cell = task.cell
    started = time.monotonic()
    deadline = started + task.timeout if task.timeout else None
    seed = train_seed(task.master_seed, cell)
    base = dict(
        experiment=cell.experiment, split=cell.split, p=_fmt_p(cell.p), model=cell.model,
        K=cell.rank, run=cell.run, seed=seed,
    )
    try:
        data = dataset_for(cell, task.master_seed, task.entities, task.folds)
        oracle_value = _cached_oracle_ap(cell.kind, cell.split, cell.p, cell.run, task.master_seed, task.entities, task.folds)
        display, kinds = resolve_model(cell.model)
        grid = GridSpec(task.lambdas, (cell.rank,))
        best = None
        for kind in kinds:
            row = grid_search(kind, grid, task.train.with_seed(seed), data, deadline=deadline)[0]
            # strict > keeps the first variant (L1) on ties
            if row.status == "ok" and (best is None or row.valid_ap > best[1].valid_ap):
                best = (kind, row)
        elapsed = time.monotonic() - started
        if best is None:
            return ResultRow(variant="", lambda_=None, valid_ap=None, test_ap=None, oracle_ap=oracle_value,
                             seconds=elapsed, status="diverged", error="every lambda diverged", **base)
        kind, row = best
        log.debug(f"[RUN] {cell.key} -> {kind.name} lam={row.best_lambda} valid={row.valid_ap:.4f} test={row.test_ap:.4f}")
        return ResultRow(variant=kind.name, lambda_=row.best_lambda, valid_ap=row.valid_ap, test_ap=row.test_ap,
                         oracle_ap=oracle_value, seconds=elapsed, status="ok", **base)
    except CellTimeout as e:
        status, message = "timeout", str(e)
    except Exception as e:
        status, message = "error", f"{type(e).__name__}: {e}"
    return ResultRow(variant="", lambda_=None, valid_ap=None, test_ap=None, oracle_ap=None,
                     seconds=time.monotonic() - started, status=status, error=message, **base)


# ----------------------------
# Persistence
# ----------------------------
def read_completed(out_dir: Path) -> set:
    path = Path(out_dir) / COMPLETED_FILE
    if not path.exists():
        return set()
    done = set()
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                done.add(tuple(json.loads(line)))
    return done


def _append_result(out_dir: Path, row: ResultRow) -> None:
    results = out_dir / RESULTS_FILE
    fresh = not results.exists() or results.stat().st_size == 0
    with open(results, "a", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if fresh:
            w.writerow(RESULT_COLUMNS)
        w.writerow(row.as_csv())
    with open(out_dir / COMPLETED_FILE, "a", encoding="utf-8") as f:
        f.write(json.dumps(list(row.key)) + "\n")


def _write_failures(out_dir: Path, rows: Sequence[ResultRow]) -> None:
    with open(out_dir / FAILURES_FILE, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(FAILURE_COLUMNS)
        for r in rows:
            w.writerow([r.experiment, r.split, r.p, r.model, r.K, r.run, r.status, r.error])


def read_results(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


# ----------------------------
# Run
# ----------------------------
@dataclass
class RunSummary:
    out_dir: Path
    total: int = 0
    skipped: int = 0
    completed: int = 0
    failed: List[ResultRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def _tasks(
    config: RunConfigFile,
    seed: int,
    cell_timeout: Optional[float],
    only: Optional[Iterable[str]],
) -> List[CellTask]:
    wanted = set(only) if only else None
    tasks = []
    for exp in config.experiments:
        if wanted is not None and exp.name not in wanted:
            continue
        for cell in expand_cells(exp):
            tasks.append(CellTask(cell, exp.lambdas, exp.train, seed, exp.entities, exp.folds, cell_timeout))
    return tasks


def run(
    config: RunConfigFile,
    *,
    out_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
    cell_timeout: Optional[float] = DEFAULT_CELL_TIMEOUT,
    only: Optional[Iterable[str]] = None,
) -> RunSummary:
    """
    Run every cell of `config` not yet listed in completed_cells.txt.

    Rows are appended in grid order by this process only, whatever `jobs` is.
    A failing cell never stops the sweep; it lands in failures.csv instead.
    """
    target = out_dir or config.output_dir
    if not target:
        raise InvalidArgument("no output directory (use --out, RELPROBE_OUTPUT_DIR or output_dir in the config)")
    out = Path(target)
    os.makedirs(out, exist_ok=True)
    master = config.seed if seed is None else int(seed)
    if int(jobs) < 1:
        raise InvalidArgument(f"jobs must be >= 1, got {jobs}")

    tasks = _tasks(config, master, cell_timeout, only)
    done = read_completed(out)
    pending = [t for t in tasks if t.cell.key not in done]
    summary = RunSummary(out_dir=out, total=len(tasks), skipped=len(tasks) - len(pending))
    status_path = out / STATUS_FILE
    started = _utc_now()
    previous = _read_json(status_path)
    if previous and previous.get("status") == "running":
        log.warning(f"[RUN] previous run started {previous.get('started_utc')} did not finish; resuming")

    def _status(state: str, error: Optional[str] = None) -> None:
        payload = {
            "status": state,
            "started_utc": started,
            "seed": master,
            "cells_total": summary.total,
            "cells_skipped": summary.skipped,
            "cells_done": summary.completed,
            "cells_failed": len(summary.failed),
        }
        if state != "running":
            payload["finished_utc"] = _utc_now()
        if error:
            payload["error"] = error
        _write_json(status_path, payload)

    _status("running")
    log.info(f"[RUN] {len(pending)} cells to run, {summary.skipped} already complete, jobs={jobs}")

    def _record(row: ResultRow) -> None:
        if row.ok:
            _append_result(out, row)
            summary.completed += 1
        else:
            log.warning(f"[RUN] cell {row.key} {row.status}: {row.error}")
            summary.failed.append(row)
        _status("running")

    try:
        if int(jobs) == 1 or len(pending) <= 1:
            for task in pending:
                _record(_run_cell(task))
        else:
            with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
                for row in pool.map(_run_cell, pending):
                    _record(row)
    except Exception as e:
        _write_failures(out, summary.failed)
        _status("failed", str(e))
        raise

    _write_failures(out, summary.failed)
    _status("succeeded" if summary.ok else "failed", None if summary.ok else f"{len(summary.failed)} cells failed")
    return summary


# ----------------------------
# Plot data
# ----------------------------
@dataclass
class PlotOutput:
    tables: List[Path] = field(default_factory=list)
    missing: List[Tuple[str, str, str, str, int]] = field(default_factory=list)


def _table_name(experiment: str, split: str, p: str) -> str:
    safe = re.sub(r"[^\w.-]+", "_", f"{experiment}__{split}__p{p}")
    return f"{safe}.csv"


def _parse_float(text: str) -> Optional[float]:
    return float(text) if text not in ("", None) else None


def emit_plot_data(results_path: Path, out_dir: Path, config: Optional[RunConfigFile] = None) -> PlotOutput:
    """
    One CSV per (experiment, split, p) with mean and population std of test AP over
    runs for every (model, K). With a config, expected cells without rows are emitted
    blank and reported.
    """
    rows = [r for r in read_results(results_path) if r.get("status", "ok") == "ok"]
    groups: Dict[Tuple[str, str, str], Dict[Tuple[str, int], List[Dict[str, str]]]] = {}
    for r in rows:
        g = groups.setdefault((r["experiment"], r["split"], r["p"]), {})
        g.setdefault((r["model"], int(r["K"])), []).append(r)

    expected: Dict[Tuple[str, str, str], List[Tuple[str, int]]] = {}
    if config is not None:
        for exp in config.experiments:
            for cell in expand_cells(exp):
                cells = expected.setdefault((cell.experiment, cell.split, _fmt_p(cell.p)), [])
                if (cell.model, cell.rank) not in cells:
                    cells.append((cell.model, cell.rank))

    out = PlotOutput()
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    for gkey in sorted(set(groups) | set(expected)):
        present = groups.get(gkey, {})
        cells = list(expected.get(gkey, []))
        for mk in sorted(present):
            if mk not in cells:
                cells.append(mk)
        path = out_dir / _table_name(*gkey)
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            for model, rank in cells:
                members = present.get((model, rank), [])
                if not members:
                    out.missing.append((*gkey, model, rank))
                    w.writerow([model, rank, "", "", "", 0])
                    continue
                mean, std = aggregate_runs([float(m["test_ap"]) for m in members])
                oracle = [v for v in (_parse_float(m.get("oracle_ap", "")) for m in members) if v is not None]
                oracle_mean = repr(sum(oracle) / len(oracle)) if oracle else ""
                w.writerow([model, rank, repr(mean), repr(std), oracle_mean, len(members)])
        out.tables.append(path)

    if out.missing:
        listed = ", ".join(f"{e}/{s}/p={p}/{m}/K={k}" for e, s, p, m, k in out.missing[:20])
        more = f" (+{len(out.missing) - 20} more)" if len(out.missing) > 20 else ""
        log.warning(f"[PLOT] {len(out.missing)} missing cells emitted blank: {listed}{more}")
    return out


# ----------------------------
# Single datasets (generate verb)
# ----------------------------
_FAMILY_SPLITS = {
    SplitKind.FAMILY_RANDOM: FamilySplitKind.RANDOM,
    SplitKind.FAMILY_EVIDENCE: FamilySplitKind.EVIDENCE,
    SplitKind.FAMILY_FAMILY: FamilySplitKind.FAMILY,
}


def generate_dataset(spec: SplitSpec, combo: Optional[str] = None, entities: int = 50, folds: int = 10) -> Dataset:
    """The dataset a SplitSpec names; spec.index is the fold for individual relations."""
    if spec.kind is SplitKind.INDIVIDUAL_TENFOLD:
        if not combo:
            raise InvalidArgument("individual-tenfold needs a property combo")
        if spec.index >= folds:
            raise InvalidArgument(f"fold index {spec.index} out of range for {folds} folds")
        return build_individual_datasets(PropertyCombo.parse(combo), n=entities, folds=folds, seed=spec.seed)[spec.index]
    if spec.kind is SplitKind.JOINT_FRACTION:
        return build_joint_dataset(spec.p, n=entities, seed=spec.seed)
    return build_family_dataset(FamilySplit(_FAMILY_SPLITS[spec.kind], spec.p), seed=spec.seed)
