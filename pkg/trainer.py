# trainer.py
"""
Mini-batch SGD with per-fact AdaGrad updates, early stopping on validation AP,
and the (K, lambda) grid-search driver.

Design:
- A single train() call is strictly sequential; SGD order is part of the result.
- Each epoch shuffles the training set once and slices it into batch_count batches.
- Every fact of a batch updates the parameters immediately (no batch averaging);
  the per-fact loop runs in the compiled kernels of kernels.py.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import kernels
from kg_core import (
    CellTimeout,
    Dataset,
    InvalidArgument,
    LabeledFact,
    TrainingDiverged,
    average_precision,
    derive_seed,
    facts_to_arrays,
)
from models import (
    EmbeddingStore,
    ModelConfig,
    ModelFamily,
    ModelKind,
    init_store,
    project_transe_entities,
    score_facts,
)

log = logging.getLogger(__name__)

DEFAULT_LAMBDAS: Tuple[float, ...] = (0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0)
DEFAULT_RANKS: Tuple[int, ...] = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)


# ----------------------------
# Configs
# ----------------------------
@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_count: int = 10
    max_epochs: int = 5000
    eval_every: int = 50
    adagrad_epsilon: float = 1e-8
    # False reproduces the update without the square root over the accumulator
    adagrad_sqrt: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0):
            raise InvalidArgument(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (self.adagrad_epsilon > 0):
            raise InvalidArgument(f"adagrad_epsilon must be > 0, got {self.adagrad_epsilon}")
        if int(self.batch_count) < 1:
            raise InvalidArgument(f"batch_count must be >= 1, got {self.batch_count}")
        if int(self.eval_every) < 1:
            raise InvalidArgument(f"eval_every must be >= 1, got {self.eval_every}")
        if int(self.max_epochs) < 0:
            raise InvalidArgument(f"max_epochs must be >= 0, got {self.max_epochs}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    @classmethod
    def from_dict(cls, raw: Optional[Mapping[str, Any]], **defaults: Any) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        merged = dict(defaults)
        for key, value in (raw or {}).items():
            if key not in known:
                raise InvalidArgument(f"unknown train setting {key!r}")
            merged[key] = value
        return cls(**merged)


@dataclass(frozen=True)
class GridSpec:
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDAS
    rank_grid: Tuple[int, ...] = DEFAULT_RANKS

    def __post_init__(self) -> None:
        lams = tuple(float(x) for x in self.lambda_grid)
        ranks = tuple(int(k) for k in self.rank_grid)
        if not lams or not ranks:
            raise InvalidArgument("grid search needs non-empty lambda and rank grids")
        if any((not math.isfinite(x)) or x < 0 for x in lams):
            raise InvalidArgument(f"lambda values must be finite and non-negative: {lams}")
        if any(k < 1 for k in ranks):
            raise InvalidArgument(f"ranks must be positive: {ranks}")
        object.__setattr__(self, "lambda_grid", lams)
        object.__setattr__(self, "rank_grid", ranks)


# ----------------------------
# Training state
# ----------------------------
@dataclass
class TrainState:
    store: EmbeddingStore
    accum: Dict[str, np.ndarray]
    # F model: pair rows live in one table so the kernels can update them in place;
    # store.pairs entries are views into it
    pair_slots: Dict[Tuple[int, int], int] = field(default_factory=dict)
    pair_table: Optional[np.ndarray] = None
    pair_accum: Optional[np.ndarray] = None
    epoch: int = 0
    best_ap: float = 0.0
    history: List[Tuple[int, float]] = field(default_factory=list)
    _arrays: Optional[Tuple[Any, ...]] = field(default=None, repr=False)

    @classmethod
    def fresh(cls, store: EmbeddingStore) -> "TrainState":
        return cls(store=store, accum={k: np.zeros_like(v) for k, v in store.blocks.items()})

    def _pair_rows(self, s: np.ndarray, o: np.ndarray) -> np.ndarray:
        keys = list(zip(s.tolist(), o.tolist()))
        new = [k for k in dict.fromkeys(keys) if k not in self.pair_slots]
        if new:
            k = self.store.rank
            old = len(self.pair_slots)
            table = np.empty((old + len(new), k))
            acc = np.zeros((old + len(new), k))
            if old:
                table[:old] = self.pair_table
                acc[:old] = self.pair_accum
            for i, key in enumerate(new, start=old):
                table[i] = self.store.pair_row(*key)
                self.pair_slots[key] = i
            self.pair_table, self.pair_accum = table, acc
            for key, i in self.pair_slots.items():
                self.store.pairs[key] = table[i]
        return np.fromiter((self.pair_slots[key] for key in keys), dtype=np.int64, count=len(keys))

    def _steps(self, r: np.ndarray, s: np.ndarray, o: np.ndarray, y: np.ndarray, lam: float, cfg: TrainConfig) -> float:
        b, a = self.store.blocks, self.accum
        kind = self.store.kind
        opts = (float(lam), float(cfg.learning_rate), float(cfg.adagrad_epsilon), bool(cfg.adagrad_sqrt))
        fam = kind.family
        if fam is ModelFamily.CP:
            return kernels.cp_steps(b["U"], b["V"], b["W"], a["U"], a["V"], a["W"], r, s, o, y, *opts)
        if fam is ModelFamily.RESCAL:
            return kernels.rescal_steps(b["E"], b["W"], a["E"], a["W"], r, s, o, y, *opts)
        if fam is ModelFamily.TRANSE:
            return kernels.transe_steps(b["E"], b["W"], a["E"], a["W"], r, s, o, y, int(kind.q), *opts)
        if fam is ModelFamily.DISTMULT:
            return kernels.distmult_steps(b["E"], b["W"], a["E"], a["W"], r, s, o, y, *opts)
        if fam is ModelFamily.F:
            p = self._pair_rows(s, o)
            return kernels.f_steps(b["W"], self.pair_table, a["W"], self.pair_accum, r, p, y, *opts)
        if fam is ModelFamily.COMPLEX:
            return kernels.complex_steps(
                b["E_re"], b["E_im"], b["W_re"], b["W_im"],
                a["E_re"], a["E_im"], a["W_re"], a["W_im"],
                r, s, o, y, *opts,
            )
        raise InvalidArgument(f"unsupported model {kind}")

    def _fact_arrays(self, facts: Sequence[LabeledFact]) -> Tuple[np.ndarray, ...]:
        if self._arrays is None or self._arrays[0] is not facts:
            r, s, o, y = facts_to_arrays(facts)
            self._arrays = (facts, r, s, o, y.astype(np.float64))
        return self._arrays[1:]

    def apply_fact(self, fact: LabeledFact, lam: float, cfg: TrainConfig) -> float:
        self.store.check_fact(fact.relation, fact.subject, fact.object)
        r, s, o, y = (np.array([v], dtype=np.int64) for v in fact)
        return float(self._steps(r, s, o, y.astype(np.float64), lam, cfg))

    def run_epoch(
        self,
        facts: Sequence[LabeledFact],
        lam: float,
        cfg: TrainConfig,
        rng: np.random.Generator,
    ) -> float:
        """One pass over `facts` in batch_count shuffled batches; returns the mean fact loss."""
        epoch = self.epoch + 1
        transe = self.store.kind.family is ModelFamily.TRANSE
        r, s, o, y = self._fact_arrays(facts)
        order = rng.permutation(len(facts))
        total = 0.0
        for batch in np.array_split(order, int(cfg.batch_count)):
            if batch.size:
                total += self._steps(r[batch], s[batch], o[batch], y[batch], lam, cfg)
            if transe:
                project_transe_entities(self.store)
        mean_loss = total / max(len(facts), 1)
        if not math.isfinite(mean_loss) or not self.store.is_finite():
            raise TrainingDiverged(epoch)
        self.epoch = epoch
        return mean_loss


# ----------------------------
# Evaluation
# ----------------------------
def evaluate_ap(store: EmbeddingStore, facts: Sequence[LabeledFact]) -> float:
    r, s, o, y = facts_to_arrays(facts)
    scores = score_facts(store, r, s, o)
    return average_precision(list(zip(scores.tolist(), y.tolist())), keys=list(zip(r.tolist(), s.tolist(), o.tolist())))


def _write_training_log(path: Path, rows: List[Tuple[int, float, Optional[float]]]) -> None:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_train_loss", "valid_ap"])
        for epoch, loss, ap in rows:
            w.writerow([epoch, repr(float(loss)), "" if ap is None else repr(float(ap))])


# ----------------------------
# Training
# ----------------------------
def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    data: Dataset,
    *,
    log_path: Optional[Path] = None,
    deadline: Optional[float] = None,
) -> Tuple[EmbeddingStore, List[Tuple[int, float]]]:
    """
    Fit one model; returns (parameters at the best validation evaluation, history).

    history is the list of (epoch, validation AP) evaluation points. Training stops at
    the first evaluation whose AP does not beat the previous one. `deadline` is a
    time.monotonic() value checked after every epoch.
    """
    if not data.train:
        raise InvalidArgument("training set is empty")
    if not any(f.label == 1 for f in data.valid):
        raise InvalidArgument("validation set needs at least one positive fact")

    store = init_store(model_cfg.kind, data.vocab, model_cfg.rank, train_cfg.seed)
    state = TrainState.fresh(store)
    rng = np.random.default_rng(derive_seed(train_cfg.seed, "batches"))
    lam = float(model_cfg.lam)

    log_rows: List[Tuple[int, float, Optional[float]]] = []
    best: Optional[EmbeddingStore] = None
    previous = 0.0
    try:
        for epoch in range(1, int(train_cfg.max_epochs) + 1):
            mean_loss = state.run_epoch(data.train, lam, train_cfg, rng)
            ap: Optional[float] = None
            if epoch % train_cfg.eval_every == 0:
                ap = evaluate_ap(store, data.valid)
                state.history.append((epoch, ap))
                log.debug(f"[TRAIN] {model_cfg.kind} K={model_cfg.rank} lam={lam} epoch={epoch} loss={mean_loss:.6f} valid_ap={ap:.6f}")
            log_rows.append((epoch, mean_loss, ap))
            if ap is not None:
                if ap <= previous:
                    break
                previous = ap
                state.best_ap = ap
                best = store.copy()
            if deadline is not None and time.monotonic() > deadline:
                raise CellTimeout(f"deadline passed at epoch {epoch}")
    finally:
        if log_path is not None:
            _write_training_log(log_path, log_rows)

    return (best if best is not None else store), list(state.history)


# ----------------------------
# Grid search
# ----------------------------
@dataclass(frozen=True)
class GridRow:
    rank: int
    best_lambda: Optional[float]
    valid_ap: float
    test_ap: float
    seed: Optional[int]
    seeds: Tuple[Tuple[float, int], ...] = ()
    diverged: Tuple[float, ...] = ()

    @property
    def status(self) -> str:
        return "ok" if self.best_lambda is not None else "diverged"


def cell_seed(master: int, kind: ModelKind, rank: int, lam: float) -> int:
    return derive_seed(master, kind.name, int(rank), float(lam))


def _fit_cell(
    kind: ModelKind,
    rank: int,
    lam: float,
    train_cfg: TrainConfig,
    data: Dataset,
    deadline: Optional[float] = None,
) -> Tuple[float, float]:
    store, _ = train(ModelConfig(kind, rank, lam), train_cfg, data, deadline=deadline)
    return evaluate_ap(store, data.valid), evaluate_ap(store, data.test)


def lambdas_for(kind: ModelKind, grid: GridSpec) -> Tuple[float, ...]:
    # TransE is constrained by unit-norm entities instead of regularized
    if kind.family is ModelFamily.TRANSE:
        return (0.0,)
    return grid.lambda_grid


def grid_search(
    kind: ModelKind,
    grid: GridSpec,
    train_cfg: TrainConfig,
    data: Dataset,
    *,
    deadline: Optional[float] = None,
) -> List[GridRow]:
    """
    One row per rank: the lambda with the highest validation AP (ties -> smaller lambda)
    and its test AP. Diverged lambdas are listed on the row instead of aborting the sweep.
    """
    kind = ModelKind.parse(kind)
    rows: List[GridRow] = []
    for rank in grid.rank_grid:
        results: List[Tuple[float, float, float, int]] = []
        seeds: List[Tuple[float, int]] = []
        diverged: List[float] = []
        for lam in lambdas_for(kind, grid):
            seed = cell_seed(train_cfg.seed, kind, rank, lam)
            seeds.append((lam, seed))
            try:
                valid_ap, test_ap = _fit_cell(kind, rank, lam, train_cfg.with_seed(seed), data, deadline)
            except TrainingDiverged as e:
                log.warning(f"[GRID] {kind} K={rank} lam={lam} diverged at epoch {e.epoch}")
                diverged.append(lam)
                continue
            results.append((valid_ap, lam, test_ap, seed))

        if not results:
            rows.append(GridRow(rank, None, float("nan"), float("nan"), None, tuple(seeds), tuple(diverged)))
            continue
        valid_ap, lam, test_ap, seed = max(results, key=lambda t: (t[0], -t[1]))
        rows.append(GridRow(rank, lam, valid_ap, test_ap, seed, tuple(seeds), tuple(diverged)))
    return rows
