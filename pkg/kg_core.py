# kg_core.py
"""
Shared substrate for every other module.

Provides:
- Error hierarchy (RelprobeError and friends)
- Vocab / LabeledFact / Dataset / SplitSpec types
- Seed derivation, subset sampling and three-way splits
- Average precision and run aggregation
- TSV fact files and dataset directories

Everything here is immutable after construction and pure given (inputs, seed).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)


# ----------------------------
# Errors
# ----------------------------
class RelprobeError(Exception):
    """Base class of every error raised on purpose by this package."""


class InvalidArgument(RelprobeError, ValueError):
    pass


class UndefinedMetric(RelprobeError):
    pass


class InvalidState(RelprobeError):
    pass


class GenerationFailed(RelprobeError):
    pass


class InconsistentInput(RelprobeError):
    pass


class TrainingDiverged(RelprobeError):
    def __init__(self, epoch: int, message: str = "") -> None:
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class CellTimeout(RelprobeError):
    def __init__(self, message: str = "cell exceeded its time budget", seconds: Optional[float] = None) -> None:
        self.seconds = seconds
        super().__init__(message)


# ----------------------------
# Types
# ----------------------------
@dataclass(frozen=True)
class Vocab:
    entity_count: int
    relation_count: int
    entity_names: Optional[Tuple[str, ...]] = None
    relation_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.entity_count < 1 or self.relation_count < 1:
            raise InvalidArgument(
                f"vocab needs at least one entity and one relation (got {self.entity_count}, {self.relation_count})"
            )
        if self.entity_names is not None and len(self.entity_names) != self.entity_count:
            raise InvalidArgument("entity name table does not match entity_count")
        if self.relation_names is not None and len(self.relation_names) != self.relation_count:
            raise InvalidArgument("relation name table does not match relation_count")

    def entity_name(self, idx: int) -> str:
        return self.entity_names[idx] if self.entity_names else str(idx)

    def relation_name(self, idx: int) -> str:
        return self.relation_names[idx] if self.relation_names else str(idx)

    def check_fact(self, r: int, s: int, o: int) -> None:
        if not (0 <= r < self.relation_count):
            raise InvalidArgument(f"relation index {r} out of range [0, {self.relation_count})")
        if not (0 <= s < self.entity_count) or not (0 <= o < self.entity_count):
            raise InvalidArgument(f"entity index ({s}, {o}) out of range [0, {self.entity_count})")


class LabeledFact(NamedTuple):
    relation: int
    subject: int
    object: int
    label: int

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.relation, self.subject, self.object)


def make_fact(r: int, s: int, o: int, label: int) -> LabeledFact:
    if label not in (-1, 1):
        raise InvalidArgument(f"label must be -1 or +1, got {label!r}")
    return LabeledFact(int(r), int(s), int(o), int(label))


def canonical(facts: Iterable[LabeledFact]) -> Tuple[LabeledFact, ...]:
    return tuple(sorted(facts))


@dataclass(frozen=True)
class Dataset:
    vocab: Vocab
    train: Tuple[LabeledFact, ...]
    valid: Tuple[LabeledFact, ...]
    test: Tuple[LabeledFact, ...]
    provenance: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)
    # train == valid style diagnostic datasets only
    allow_overlap: bool = False

    def __post_init__(self) -> None:
        keys_by_set: List[set] = []
        for name in ("train", "valid", "test"):
            facts = getattr(self, name)
            keys = set()
            for f in facts:
                if f.label not in (-1, 1):
                    raise InvalidArgument(f"{name}: label must be -1 or +1, got {f.label!r}")
                self.vocab.check_fact(f.relation, f.subject, f.object)
                if f.key in keys:
                    raise InvalidArgument(f"{name}: duplicate triple {f.key}")
                keys.add(f.key)
            keys_by_set.append(keys)
        if not self.allow_overlap:
            tr, va, te = keys_by_set
            if tr & va or tr & te or va & te:
                raise InvalidArgument("train/valid/test must be pairwise disjoint on (r, s, o)")

    @property
    def all_facts(self) -> Tuple[LabeledFact, ...]:
        return self.train + self.valid + self.test

    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.train), len(self.valid), len(self.test))


class SplitKind(str, Enum):
    INDIVIDUAL_TENFOLD = "individual-tenfold"
    JOINT_FRACTION = "joint-fraction"
    FAMILY_RANDOM = "family-random"
    FAMILY_EVIDENCE = "family-evidence"
    FAMILY_FAMILY = "family-family"


@dataclass(frozen=True)
class SplitSpec:
    kind: SplitKind
    p: Fraction
    index: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        p = to_fraction(self.p)
        object.__setattr__(self, "p", p)
        if p < 0 or p > 1:
            raise InvalidArgument(f"p must lie in [0, 1], got {p}")
        if p == 0 and self.kind is not SplitKind.FAMILY_FAMILY:
            raise InvalidArgument("p = 0 is only meaningful for the family-family split")
        if self.kind is SplitKind.INDIVIDUAL_TENFOLD and p != Fraction(4, 5):
            raise InvalidArgument("individual-tenfold uses fixed 0.8/0.1/0.1 fractions")
        if self.index < 0:
            raise InvalidArgument("fold/run index must be non-negative")


# ----------------------------
# Seeds and sampling
# ----------------------------
def derive_seed(master: int, *parts: Any) -> int:
    """Pure function of (master, parts) -> non-negative 63-bit seed."""
    payload = json.dumps([int(master)] + [str(p) for p in parts], separators=(",", ":"))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def to_fraction(p: Any) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float) and not math.isfinite(p):
        raise InvalidArgument(f"fraction must be finite, got {p!r}")
    try:
        # str() keeps 0.1 as 1/10 rather than its binary expansion
        return Fraction(str(p))
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidArgument(f"not a rational number: {p!r}") from e


def ceil_count(p: Any, n: int) -> int:
    return math.ceil(to_fraction(p) * n)


def _permuted(facts: Iterable[LabeledFact], seed: int) -> List[LabeledFact]:
    ordered = canonical(facts)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    return [ordered[i] for i in perm]


def sample_subset(facts: Iterable[LabeledFact], p: Any, seed: int) -> Tuple[LabeledFact, ...]:
    frac = to_fraction(p)
    if frac < 0 or frac > 1:
        raise InvalidArgument(f"p must lie in [0, 1], got {p}")
    shuffled = _permuted(facts, seed)
    k = ceil_count(frac, len(shuffled))
    return canonical(shuffled[:k])


def split_by_counts(
    facts: Iterable[LabeledFact], n_train: int, n_valid: int, seed: int
) -> Tuple[Tuple[LabeledFact, ...], Tuple[LabeledFact, ...], Tuple[LabeledFact, ...]]:
    shuffled = _permuted(facts, seed)
    n = len(shuffled)
    if n_train < 0 or n_valid < 0 or n_train + n_valid > n:
        raise InvalidArgument(f"cannot carve {n_train} + {n_valid} facts out of {n}")
    return (
        canonical(shuffled[:n_train]),
        canonical(shuffled[n_train:n_train + n_valid]),
        canonical(shuffled[n_train + n_valid:]),
    )


def three_way_split(
    facts: Iterable[LabeledFact], p_train: Any, p_valid: Any, seed: int
) -> Tuple[Tuple[LabeledFact, ...], Tuple[LabeledFact, ...], Tuple[LabeledFact, ...]]:
    pt, pv = to_fraction(p_train), to_fraction(p_valid)
    if pt < 0 or pv < 0 or pt + pv > 1:
        raise InvalidArgument(f"split fractions must be non-negative and sum to <= 1 (got {pt} + {pv})")
    facts = list(facts)
    n = len(facts)
    n_train = ceil_count(pt, n)
    n_valid = min(ceil_count(pv, n), n - n_train)
    return split_by_counts(facts, n_train, n_valid, seed)


# ----------------------------
# Metrics
# ----------------------------
def average_precision(
    scored: Sequence[Tuple[float, int]],
    keys: Optional[Sequence[Tuple[int, int, int]]] = None,
) -> float:
    """
    Non-interpolated AP: mean of precision@k over the ranks k of positive items.

    Ranking is by descending score; ties fall back to ascending (r, s, o) when keys
    are given, otherwise to input order.
    """
    if len(scored) == 0:
        raise UndefinedMetric("average precision of an empty list")
    scores = np.asarray([float(s) for s, _ in scored], dtype=np.float64)
    labels = np.asarray([int(y) for _, y in scored], dtype=np.int64)
    if np.any(np.isnan(scores)):
        raise InvalidArgument("scores contain NaN")
    if not np.any(labels == 1):
        raise UndefinedMetric("average precision needs at least one positive label")

    if keys is None:
        order = np.lexsort((np.arange(len(scores)), -scores))
    else:
        karr = np.asarray(keys, dtype=np.int64).reshape(len(scores), 3)
        # lexsort: last key is primary
        order = np.lexsort((karr[:, 2], karr[:, 1], karr[:, 0], -scores))

    hits = (labels[order] == 1).astype(np.float64)
    ranks = np.arange(1, len(hits) + 1, dtype=np.float64)
    precision_at_k = np.cumsum(hits) / ranks
    return float(precision_at_k[hits == 1].sum() / hits.sum())


def aggregate_runs(ap_values: Sequence[float]) -> Tuple[float, float]:
    if len(ap_values) == 0:
        raise InvalidArgument("aggregate_runs needs at least one value")
    arr = np.asarray(ap_values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def facts_to_arrays(facts: Sequence[LabeledFact]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if len(facts) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy(), empty.copy()
    arr = np.asarray(facts, dtype=np.int64).reshape(len(facts), 4)
    return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy()


# ----------------------------
# TSV fact files
# ----------------------------
ENTITIES_FILE = "entities.txt"
RELATIONS_FILE = "relations.txt"
PROVENANCE_FILE = "provenance.json"
SPLIT_FILES = ("train.tsv", "valid.tsv", "test.tsv")


def _read_names(path: Path) -> Optional[Tuple[str, ...]]:
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        names = [line.rstrip("\r\n") for line in f]
    while names and names[-1] == "":
        names.pop()
    for lineno, name in enumerate(names, start=1):
        # line number is the index; a blank line would shift every later name
        if not name.strip():
            raise InvalidArgument(f"{path.name}:{lineno}: blank name")
    return tuple(names)


def _write_lines(path: Path, lines: Iterable[str]) -> None:
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def write_vocab(directory: Path, vocab: Vocab) -> None:
    directory = Path(directory)
    _write_lines(directory / ENTITIES_FILE, (vocab.entity_name(i) for i in range(vocab.entity_count)))
    _write_lines(directory / RELATIONS_FILE, (vocab.relation_name(i) for i in range(vocab.relation_count)))


def read_vocab(directory: Path) -> Optional[Vocab]:
    directory = Path(directory)
    ents = _read_names(directory / ENTITIES_FILE)
    rels = _read_names(directory / RELATIONS_FILE)
    if ents is None or rels is None:
        return None
    return Vocab(len(ents), len(rels), entity_names=ents, relation_names=rels)


def write_facts(path: Path, facts: Iterable[LabeledFact], vocab: Optional[Vocab] = None) -> None:
    """One `relation<TAB>subject<TAB>object<TAB>label` line per fact; names when a vocab is given."""
    rows = []
    for f in facts:
        if vocab is not None:
            rows.append(
                f"{vocab.relation_name(f.relation)}\t{vocab.entity_name(f.subject)}\t"
                f"{vocab.entity_name(f.object)}\t{f.label}"
            )
        else:
            rows.append(f"{f.relation}\t{f.subject}\t{f.object}\t{f.label}")
    _write_lines(Path(path), rows)


def _resolve(token: str, table: Dict[str, int], what: str, lineno: int) -> int:
    if token in table:
        return table[token]
    try:
        return int(token)
    except ValueError:
        raise InvalidArgument(f"line {lineno}: unknown {what} {token!r}") from None


def read_facts(path: Path, vocab: Optional[Vocab] = None) -> Tuple[LabeledFact, ...]:
    """
    Parse a TSV fact file. Identifiers may be integer indices or names; names are
    resolved through `vocab` or, failing that, through the sidecar vocabulary files
    next to `path`.
    """
    path = Path(path)
    if vocab is None:
        vocab = read_vocab(path.parent)
    rel_table: Dict[str, int] = {}
    ent_table: Dict[str, int] = {}
    if vocab is not None:
        rel_table = {vocab.relation_name(i): i for i in range(vocab.relation_count)}
        ent_table = {vocab.entity_name(i): i for i in range(vocab.entity_count)}

    facts: List[LabeledFact] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InvalidArgument(f"{path.name}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            r = _resolve(parts[0], rel_table, "relation", lineno)
            s = _resolve(parts[1], ent_table, "entity", lineno)
            o = _resolve(parts[2], ent_table, "entity", lineno)
            if parts[3].strip() not in ("1", "-1", "+1"):
                raise InvalidArgument(f"{path.name}:{lineno}: label must be 1 or -1, got {parts[3]!r}")
            facts.append(make_fact(r, s, o, int(parts[3])))
    return tuple(facts)


def vocab_for_facts(facts: Sequence[LabeledFact]) -> Vocab:
    if not facts:
        raise InvalidArgument("cannot infer a vocabulary from zero facts")
    ne = 1 + max(max(f.subject, f.object) for f in facts)
    nr = 1 + max(f.relation for f in facts)
    return Vocab(ne, nr)


# ----------------------------
# Dataset directories
# ----------------------------
def save_dataset(directory: Path, dataset: Dataset) -> Path:
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    write_vocab(directory, dataset.vocab)
    for name, facts in zip(SPLIT_FILES, (dataset.train, dataset.valid, dataset.test)):
        write_facts(directory / name, facts, dataset.vocab)
    with open(directory / PROVENANCE_FILE, "w", encoding="utf-8") as f:
        json.dump(dataset.provenance, f, indent=2, sort_keys=True, default=str)
    return directory


def load_dataset(directory: Path) -> Dataset:
    directory = Path(directory)
    vocab = read_vocab(directory)
    if vocab is None:
        raise InvalidArgument(f"{directory}: missing {ENTITIES_FILE} / {RELATIONS_FILE}")
    parts = []
    for name in SPLIT_FILES:
        p = directory / name
        parts.append(canonical(read_facts(p, vocab)) if p.exists() else ())
    provenance: Dict[str, Any] = {}
    prov_path = directory / PROVENANCE_FILE
    if prov_path.exists():
        with open(prov_path, "r", encoding="utf-8") as f:
            provenance = json.load(f)
    return Dataset(vocab, parts[0], parts[1], parts[2], provenance=provenance)
