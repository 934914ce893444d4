# property_data.py
"""
Random sign matrices realizing combinations of reflexivity/irreflexivity,
symmetry/antisymmetry and transitivity, plus the individual (10-fold) and
joint (five relations) datasets built from them.

Generation: draw signs, fill the diagonal, then alternate the symmetry or
antisymmetry pass and a transitivity pass until nothing changes; accept when
the positive ratio is within 0.5 +/- tol, otherwise redraw with a fresh seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from kg_core import (
    Dataset,
    GenerationFailed,
    InvalidArgument,
    LabeledFact,
    Vocab,
    canonical,
    derive_seed,
    three_way_split,
    to_fraction,
)

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 10_000


# ----------------------------
# Property combos
# ----------------------------
class Reflexivity(str, Enum):
    NEITHER = "neither"
    REFLEXIVE = "reflexive"
    IRREFLEXIVE = "irreflexive"


class Symmetry(str, Enum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"
    NEITHER = "neither"


@dataclass(frozen=True)
class PropertyCombo:
    reflexive: Reflexivity
    symmetric: Symmetry
    transitive: bool

    @property
    def label(self) -> str:
        parts = []
        if self.reflexive is not Reflexivity.NEITHER:
            parts.append(self.reflexive.value)
        if self.symmetric is not Symmetry.NEITHER:
            parts.append(self.symmetric.value)
        if self.transitive:
            parts.append("transitive")
        return "-".join(parts) or "none"

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, label: str) -> "PropertyCombo":
        for combo in valid_combos():
            if combo.label == (label or "").strip().lower():
                return combo
        raise InvalidArgument(f"unknown or inconsistent property combination {label!r}")


def _excluded(refl: Reflexivity, sym: Symmetry, trans: bool) -> bool:
    if sym is Symmetry.NEITHER and not trans:
        # no property at all, or reflexivity alone
        return True
    if refl is Reflexivity.IRREFLEXIVE and trans and sym in (Symmetry.SYMMETRIC, Symmetry.NEITHER):
        return True
    return False


def valid_combos() -> List[PropertyCombo]:
    out = []
    for refl in (Reflexivity.NEITHER, Reflexivity.REFLEXIVE, Reflexivity.IRREFLEXIVE):
        for sym in (Symmetry.SYMMETRIC, Symmetry.ANTISYMMETRIC, Symmetry.NEITHER):
            for trans in (False, True):
                if not _excluded(refl, sym, trans):
                    out.append(PropertyCombo(refl, sym, trans))
    return out


JOINT_COMBOS: Tuple[PropertyCombo, ...] = (
    PropertyCombo(Reflexivity.NEITHER, Symmetry.SYMMETRIC, False),
    PropertyCombo(Reflexivity.NEITHER, Symmetry.ANTISYMMETRIC, False),
    PropertyCombo(Reflexivity.NEITHER, Symmetry.NEITHER, True),
    PropertyCombo(Reflexivity.NEITHER, Symmetry.SYMMETRIC, True),
    PropertyCombo(Reflexivity.NEITHER, Symmetry.ANTISYMMETRIC, True),
)


@dataclass(frozen=True, eq=False)
class SignMatrix:
    combo: PropertyCombo
    entries: np.ndarray
    seed: int
    attempts: int = 1

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def positives(self) -> int:
        return int(np.count_nonzero(self.entries == 1))


# ----------------------------
# Passes
# ----------------------------
def property_pass(Y: np.ndarray, combo: PropertyCombo) -> np.ndarray:
    """One round of diagonal fill, (anti)symmetry and transitivity; returns a new matrix."""
    Y = Y.copy()
    n = Y.shape[0]
    diag = np.arange(n)
    if combo.reflexive is Reflexivity.REFLEXIVE:
        Y[diag, diag] = 1
    elif combo.reflexive is Reflexivity.IRREFLEXIVE:
        Y[diag, diag] = -1

    iu, ju = np.triu_indices(n, 1)
    if combo.symmetric is Symmetry.SYMMETRIC:
        Y[ju, iu] = Y[iu, ju]
    elif combo.symmetric is Symmetry.ANTISYMMETRIC:
        Y[ju, iu] = -Y[iu, ju]

    if combo.transitive:
        # snapshot: demands computed from the matrix before this pass writes
        P = (Y == 1).astype(np.int32)
        Y[(P @ P) > 0] = 1
    return Y


def _close(Y: np.ndarray, combo: PropertyCombo, max_passes: int) -> Optional[np.ndarray]:
    for _ in range(max_passes):
        nxt = property_pass(Y, combo)
        if np.array_equal(nxt, Y):
            return Y
        Y = nxt
    return None


def satisfies(Y: np.ndarray, combo: PropertyCombo) -> bool:
    diag = np.diagonal(Y)
    if combo.reflexive is Reflexivity.REFLEXIVE and not np.all(diag == 1):
        return False
    if combo.reflexive is Reflexivity.IRREFLEXIVE and not np.all(diag == -1):
        return False
    P = Y == 1
    if combo.symmetric is Symmetry.SYMMETRIC and not np.array_equal(Y, Y.T):
        return False
    if combo.symmetric is Symmetry.ANTISYMMETRIC:
        both = P & P.T
        np.fill_diagonal(both, False)
        if both.any():
            return False
    if combo.transitive:
        Pi = P.astype(np.int32)
        if np.any(((Pi @ Pi) > 0) & ~P):
            return False
    return True


def balance_band(n: int, tol: Any) -> int:
    return math.ceil(to_fraction(tol) * n * n)


def is_balanced(Y: np.ndarray, tol: Any = 0.01) -> bool:
    n = Y.shape[0]
    pos = int(np.count_nonzero(Y == 1))
    # |pos - n^2/2| <= band, kept in integers
    return abs(2 * pos - n * n) <= 2 * balance_band(n, tol)


# ----------------------------
# Generation
# ----------------------------
def generate_relation(
    combo: PropertyCombo,
    n: int,
    tol: Any = 0.01,
    seed: int = 0,
    max_attempts: int = MAX_ATTEMPTS,
) -> SignMatrix:
    if combo not in valid_combos():
        raise InvalidArgument(f"inconsistent property combination {combo}")
    if n < 2:
        raise InvalidArgument(f"need at least 2 entities, got {n}")

    target = n * n / 2.0
    rho = min(0.5, 1.75 / n) if combo.transitive else 0.5
    log_rho = math.log(rho)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(derive_seed(seed, "attempt", attempt))
        draw = np.where(rng.random((n, n)) < rho, 1, -1).astype(np.int8)
        Y = _close(draw, combo, n * n)
        if Y is not None:
            pos = int(np.count_nonzero(Y == 1))
            if is_balanced(Y, tol) and satisfies(Y, combo):
                log.debug(f"[GEN] {combo.label} n={n} accepted after {attempt + 1} attempts (rho={rho:.4f}, pos={pos})")
                return SignMatrix(combo=combo, entries=Y, seed=seed, attempts=attempt + 1)
            # steer the draw density toward the balance target; step shrinks over attempts
            step = 0.5 / (1.0 + attempt / 25.0)
            log_rho -= step * (pos - target) / target
            rho = min(max(math.exp(log_rho), 1e-4), 1.0 - 1e-4)
            log_rho = math.log(rho)
    raise GenerationFailed(f"{combo.label}: no balanced matrix after {max_attempts} attempts (n={n})")


# ----------------------------
# Brute-force checker
# ----------------------------
def check_properties(Y: np.ndarray) -> Dict[str, bool]:
    """Definitional loops over pairs and triples of a fully observed sign matrix."""
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {Y.shape}")
    rows = Y.tolist()
    n = len(rows)
    for row in rows:
        for v in row:
            if v not in (-1, 1):
                raise InvalidArgument("matrix must be fully observed with entries in {-1, +1}")

    reflexive = all(rows[a][a] == 1 for a in range(n))
    irreflexive = all(rows[a][a] == -1 for a in range(n))
    symmetric = True
    antisymmetric = True
    for a in range(n):
        for b in range(n):
            if rows[a][b] != rows[b][a]:
                symmetric = False
            if a != b and rows[a][b] == 1 and rows[b][a] == 1:
                antisymmetric = False

    succ = [[b for b in range(n) if rows[a][b] == 1] for a in range(n)]
    transitive = True
    for a in range(n):
        for b in succ[a]:
            for c in succ[b]:
                if rows[a][c] != 1:
                    transitive = False
                    break
            if not transitive:
                break
        if not transitive:
            break

    return {
        "reflexive": reflexive,
        "irreflexive": irreflexive,
        "symmetric": symmetric,
        "antisymmetric": antisymmetric,
        "transitive": transitive,
    }


def report_matches(report: Dict[str, bool], combo: PropertyCombo) -> bool:
    if combo.reflexive is Reflexivity.REFLEXIVE and not report["reflexive"]:
        return False
    if combo.reflexive is Reflexivity.IRREFLEXIVE and not report["irreflexive"]:
        return False
    if combo.symmetric is Symmetry.SYMMETRIC and not report["symmetric"]:
        return False
    if combo.symmetric is Symmetry.ANTISYMMETRIC and not report["antisymmetric"]:
        return False
    if combo.transitive and not report["transitive"]:
        return False
    return True


# ----------------------------
# Matrix <-> facts
# ----------------------------
def matrix_to_facts(Y: np.ndarray, relation: int = 0) -> List[LabeledFact]:
    n = Y.shape[0]
    return [LabeledFact(relation, i, j, int(Y[i, j])) for i in range(n) for j in range(n)]


def facts_to_matrix(facts: Sequence[LabeledFact], n: int, relation: int = 0) -> np.ndarray:
    """Partial sign matrix of one relation: +1 / -1 where observed, 0 elsewhere."""
    Y = np.zeros((n, n), dtype=np.int8)
    for f in facts:
        if f.relation == relation:
            Y[f.subject, f.object] = f.label
    return Y


# ----------------------------
# Datasets
# ----------------------------
def build_individual_datasets(
    combo: PropertyCombo,
    n: int = 50,
    folds: int = 10,
    seed: int = 0,
) -> List[Dataset]:
    """Fold k is the test set of dataset k, fold k+1 (mod folds) its validation set."""
    if folds < 3:
        raise InvalidArgument(f"need at least 3 folds, got {folds}")
    matrix = generate_relation(combo, n, seed=derive_seed(seed, "relation", combo.label))
    facts = canonical(matrix_to_facts(matrix.entries))
    order = np.random.default_rng(derive_seed(seed, "folds", combo.label)).permutation(len(facts))
    parts = [[facts[i] for i in chunk] for chunk in np.array_split(order, folds)]
    vocab = Vocab(n, 1, relation_names=(combo.label,))

    out = []
    for k in range(folds):
        v = (k + 1) % folds
        train = [f for j, part in enumerate(parts) if j not in (k, v) for f in part]
        out.append(
            Dataset(
                vocab,
                canonical(train),
                canonical(parts[v]),
                canonical(parts[k]),
                provenance={
                    "generator": "property-individual",
                    "combos": [combo.label],
                    "n": n,
                    "fold": k,
                    "folds": folds,
                    "seed": seed,
                    "positives": matrix.positives,
                },
            )
        )
    return out


def build_joint_dataset(p: Any, n: int = 50, seed: int = 0) -> Dataset:
    frac = to_fraction(p)
    if not (0 < frac <= to_fraction("0.9")):
        raise InvalidArgument(f"joint train fraction must lie in (0, 0.9], got {p}")
    facts: List[LabeledFact] = []
    for r, combo in enumerate(JOINT_COMBOS):
        matrix = generate_relation(combo, n, seed=derive_seed(seed, "joint", combo.label))
        facts.extend(matrix_to_facts(matrix.entries, relation=r))
    train, valid, test = three_way_split(facts, frac, "0.1", derive_seed(seed, "joint-split", str(frac)))
    vocab = Vocab(n, len(JOINT_COMBOS), relation_names=tuple(c.label for c in JOINT_COMBOS))
    return Dataset(
        vocab,
        train,
        valid,
        test,
        provenance={
            "generator": "property-joint",
            "combos": [c.label for c in JOINT_COMBOS],
            "n": n,
            "p": str(frac),
            "seed": seed,
        },
    )
