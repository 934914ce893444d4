# family_data.py
"""
Synthetic family trees and their kinship facts.

Each family: a founding couple, their three children, the children's spouses and
the spouses' parents, and three children per middle couple (23 persons). Five
families are generated independently and never linked. Kinship is blood-only
except husband/wife; every relation is labeled over all 23 x 23 ordered pairs of
a family, so each family yields 17 * 529 = 8993 facts.

Local ids inside a family:
    0-1    founding couple            (generation 1)
    2-4    their children             (generation 2)
    5-7    spouses of 2-4             (generation 2)
    8-13   parents of 5, 6, 7         (generation 1, in-laws)
    14-22  children of (2,5) (3,6) (4,7), three each (generation 3)
Global id = (family - 1) * 23 + local id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from kg_core import (
    Dataset,
    InvalidArgument,
    LabeledFact,
    Vocab,
    canonical,
    ceil_count,
    derive_seed,
    split_by_counts,
    to_fraction,
)

log = logging.getLogger(__name__)

FAMILY_COUNT = 5
PERSONS_PER_FAMILY = 23
ENTITY_COUNT = FAMILY_COUNT * PERSONS_PER_FAMILY

RELATIONS: Tuple[str, ...] = (
    "mother", "father", "husband", "wife", "son", "daughter", "brother", "sister",
    "uncle", "aunt", "nephew", "niece", "cousin", "grandfather", "grandson",
    "grandmother", "granddaughter",
)
MAIN_RELATIONS: Tuple[str, ...] = ("mother", "father", "son", "daughter")
OTHER_RELATIONS: Tuple[str, ...] = tuple(r for r in RELATIONS if r not in MAIN_RELATIONS)
RELATION_INDEX: Dict[str, int] = {name: i for i, name in enumerate(RELATIONS)}
MAIN_INDICES = frozenset(RELATION_INDEX[r] for r in MAIN_RELATIONS)

FACTS_PER_FAMILY = len(RELATIONS) * PERSONS_PER_FAMILY ** 2


class Sex(str, Enum):
    MALE = "male"
    FEMALE = "female"

    def opposite(self) -> "Sex":
        return Sex.FEMALE if self is Sex.MALE else Sex.MALE


# subject sex required by each relation
RELATION_SEX: Dict[str, Sex] = {
    "mother": Sex.FEMALE, "father": Sex.MALE,
    "husband": Sex.MALE, "wife": Sex.FEMALE,
    "son": Sex.MALE, "daughter": Sex.FEMALE,
    "brother": Sex.MALE, "sister": Sex.FEMALE,
    "uncle": Sex.MALE, "aunt": Sex.FEMALE,
    "nephew": Sex.MALE, "niece": Sex.FEMALE,
    "cousin": None,  # type: ignore[dict-item]
    "grandfather": Sex.MALE, "grandson": Sex.MALE,
    "grandmother": Sex.FEMALE, "granddaughter": Sex.FEMALE,
}


# ----------------------------
# Tree types
# ----------------------------
@dataclass(frozen=True)
class Person:
    id: int
    sex: Sex
    father: Optional[int]
    mother: Optional[int]
    spouse: Optional[int]
    family: int
    generation: int

    @property
    def parents(self) -> Optional[Tuple[int, int]]:
        if self.father is None or self.mother is None:
            return None
        return (self.father, self.mother)


@dataclass(frozen=True)
class FamilyTree:
    family: int
    persons: Tuple[Person, ...]

    def __post_init__(self) -> None:
        if len(self.persons) != PERSONS_PER_FAMILY:
            raise InvalidArgument(f"family {self.family}: expected {PERSONS_PER_FAMILY} persons, got {len(self.persons)}")
        by_id = {p.id: p for p in self.persons}
        if len(by_id) != len(self.persons):
            raise InvalidArgument(f"family {self.family}: duplicate person ids")
        for p in self.persons:
            if p.family != self.family:
                raise InvalidArgument(f"person {p.id} belongs to family {p.family}, not {self.family}")
            if (p.father is None) != (p.mother is None):
                raise InvalidArgument(f"person {p.id}: parents must be both known or both absent")
            if p.spouse is not None:
                other = by_id.get(p.spouse)
                if other is None or other.spouse != p.id:
                    raise InvalidArgument(f"person {p.id}: spouse link is not mutual")
                if other.sex is p.sex:
                    raise InvalidArgument(f"person {p.id}: spouses must be of opposite sex")
            if p.parents is not None:
                f, m = by_id.get(p.father), by_id.get(p.mother)
                if f is None or m is None:
                    raise InvalidArgument(f"person {p.id}: parent outside the family")
                if f.sex is not Sex.MALE or m.sex is not Sex.FEMALE or f.spouse != m.id:
                    raise InvalidArgument(f"person {p.id}: parents must be a married father and mother")
        founders = [p for p in self.persons if p.parents is None and p.generation == 1 and p.spouse is not None]
        if not founders:
            raise InvalidArgument(f"family {self.family}: no founding couple")

    @property
    def base(self) -> int:
        return (self.family - 1) * PERSONS_PER_FAMILY

    def person(self, pid: int) -> Person:
        return self.persons[pid - self.base]


def family_of(entity: int) -> int:
    return entity // PERSONS_PER_FAMILY + 1


def generate_family(family_index: int, seed: int) -> FamilyTree:
    if family_index < 1:
        raise InvalidArgument(f"family index starts at 1, got {family_index}")
    rng = np.random.default_rng(derive_seed(seed, "family", family_index))
    base = (family_index - 1) * PERSONS_PER_FAMILY

    def rsex() -> Sex:
        return Sex.MALE if rng.random() < 0.5 else Sex.FEMALE

    sex: Dict[int, Sex] = {}
    father: Dict[int, int] = {}
    mother: Dict[int, int] = {}
    spouse: Dict[int, int] = {}
    generation: Dict[int, int] = {}

    def marry(a: int, b: int) -> None:
        spouse[a], spouse[b] = b, a

    def child_of(c: int, a: int, b: int) -> None:
        dad, mum = (a, b) if sex[a] is Sex.MALE else (b, a)
        father[c], mother[c] = dad, mum

    sex[0] = rsex()
    sex[1] = sex[0].opposite()
    marry(0, 1)
    generation[0] = generation[1] = 1

    for i in range(3):
        child, partner = 2 + i, 5 + i
        in_law_a, in_law_b = 8 + 2 * i, 9 + 2 * i
        sex[child] = rsex()
        child_of(child, 0, 1)
        sex[partner] = sex[child].opposite()
        marry(child, partner)
        sex[in_law_a] = rsex()
        sex[in_law_b] = sex[in_law_a].opposite()
        marry(in_law_a, in_law_b)
        child_of(partner, in_law_a, in_law_b)
        generation[child] = generation[partner] = 2
        generation[in_law_a] = generation[in_law_b] = 1

    for i in range(3):
        for j in range(3):
            grandchild = 14 + 3 * i + j
            sex[grandchild] = rsex()
            child_of(grandchild, 2 + i, 5 + i)
            generation[grandchild] = 3

    persons = tuple(
        Person(
            id=base + local,
            sex=sex[local],
            father=None if local not in father else base + father[local],
            mother=None if local not in mother else base + mother[local],
            spouse=None if local not in spouse else base + spouse[local],
            family=family_index,
            generation=generation[local],
        )
        for local in range(PERSONS_PER_FAMILY)
    )
    return FamilyTree(family=family_index, persons=persons)


def swap_sexes(tree: FamilyTree) -> FamilyTree:
    """Mirror image of a tree: every sex flipped, father/mother links exchanged."""
    return FamilyTree(
        family=tree.family,
        persons=tuple(
            replace(p, sex=p.sex.opposite(), father=p.mother, mother=p.father) for p in tree.persons
        ),
    )


# ----------------------------
# Kinship
# ----------------------------
class KinshipIndex:
    """Blood kinship (plus husband/wife) over known parent links and sexes."""

    def __init__(
        self,
        sex: Dict[int, Sex],
        father: Dict[int, int],
        mother: Dict[int, int],
        spouse: Optional[Dict[int, int]] = None,
    ) -> None:
        self.sex = dict(sex)
        self.father = dict(father)
        self.mother = dict(mother)
        if spouse is None:
            spouse = {}
            for child, dad in self.father.items():
                mum = self.mother.get(child)
                if mum is not None:
                    spouse[dad], spouse[mum] = mum, dad
        self.spouse = dict(spouse)

        self.parents: Dict[int, Set[int]] = {}
        for child, dad in self.father.items():
            self.parents.setdefault(child, set()).add(dad)
        for child, mum in self.mother.items():
            self.parents.setdefault(child, set()).add(mum)

        by_couple: Dict[Tuple[int, int], Set[int]] = {}
        for child in self.parents:
            if child in self.father and child in self.mother:
                by_couple.setdefault((self.father[child], self.mother[child]), set()).add(child)
        self.siblings: Dict[int, Set[int]] = {}
        for kids in by_couple.values():
            for k in kids:
                self.siblings[k] = kids - {k}

    @classmethod
    def from_tree(cls, tree: FamilyTree) -> "KinshipIndex":
        return cls(
            sex={p.id: p.sex for p in tree.persons},
            father={p.id: p.father for p in tree.persons if p.father is not None},
            mother={p.id: p.mother for p in tree.persons if p.mother is not None},
            spouse={p.id: p.spouse for p in tree.persons if p.spouse is not None},
        )

    def _parents(self, x: int) -> Set[int]:
        return self.parents.get(x, set())

    def _siblings(self, x: int) -> Set[int]:
        return self.siblings.get(x, set())

    def _grandparents(self, x: int) -> Set[int]:
        out: Set[int] = set()
        for p in self._parents(x):
            out |= self._parents(p)
        return out

    def _parents_siblings(self, x: int) -> Set[int]:
        out: Set[int] = set()
        for p in self._parents(x):
            out |= self._siblings(p)
        return out

    def holds(self, relation: str, x: int, y: int) -> bool:
        """True iff relation(x, y): "x is <relation> of y"."""
        want = RELATION_SEX.get(relation)
        if relation not in RELATION_SEX:
            raise InvalidArgument(f"unknown kinship relation {relation!r}")
        if want is not None and self.sex.get(x) is not want:
            return False
        if x == y:
            return False

        if relation == "father":
            return self.father.get(y) == x
        if relation == "mother":
            return self.mother.get(y) == x
        if relation in ("son", "daughter"):
            return y in self._parents(x)
        if relation in ("husband", "wife"):
            return self.spouse.get(y) == x
        if relation in ("brother", "sister"):
            return x in self._siblings(y)
        if relation in ("uncle", "aunt"):
            return x in self._parents_siblings(y)
        if relation in ("nephew", "niece"):
            return y in self._parents_siblings(x)
        if relation == "cousin":
            for p in self._parents(x):
                if self._siblings(p) & self._parents(y):
                    return True
            return False
        if relation in ("grandfather", "grandmother"):
            return x in self._grandparents(y)
        if relation in ("grandson", "granddaughter"):
            return y in self._grandparents(x)
        raise InvalidArgument(f"unknown kinship relation {relation!r}")


def label_kinship(tree: FamilyTree) -> Tuple[LabeledFact, ...]:
    """Every (relation, subject, object) cell of one family, labeled from the tree."""
    if not isinstance(tree, FamilyTree):
        raise InvalidArgument("label_kinship expects a FamilyTree")
    kin = KinshipIndex.from_tree(tree)
    ids = [p.id for p in tree.persons]
    facts = []
    for r, name in enumerate(RELATIONS):
        for s in ids:
            for o in ids:
                facts.append(LabeledFact(r, s, o, 1 if kin.holds(name, s, o) else -1))
    return tuple(facts)


# ----------------------------
# Splits
# ----------------------------
class FamilySplitKind(str, Enum):
    RANDOM = "random"
    EVIDENCE = "evidence"
    FAMILY = "family"


DEFAULT_P_GRID: Tuple[Fraction, ...] = (Fraction(4, 5), Fraction(2, 5), Fraction(1, 5), Fraction(1, 10))

# (sampled training facts, validation facts) of the published split table;
# the test set is the rest of the pool
PUBLISHED_SPLIT_SIZES: Dict[Tuple[FamilySplitKind, Fraction], Tuple[int, int]] = {
    (FamilySplitKind.RANDOM, Fraction(4, 5)): (35973, 4496),
    (FamilySplitKind.RANDOM, Fraction(2, 5)): (17987, 4496),
    (FamilySplitKind.RANDOM, Fraction(1, 5)): (8994, 4496),
    (FamilySplitKind.RANDOM, Fraction(1, 10)): (4496, 4496),
    (FamilySplitKind.EVIDENCE, Fraction(4, 5)): (27509, 3438),
    (FamilySplitKind.EVIDENCE, Fraction(2, 5)): (13754, 3438),
    (FamilySplitKind.EVIDENCE, Fraction(1, 5)): (6877, 3438),
    (FamilySplitKind.EVIDENCE, Fraction(1, 10)): (3439, 3438),
    (FamilySplitKind.FAMILY, Fraction(4, 5)): (5501, 688),
    (FamilySplitKind.FAMILY, Fraction(2, 5)): (2751, 688),
    (FamilySplitKind.FAMILY, Fraction(1, 5)): (1375, 688),
    (FamilySplitKind.FAMILY, Fraction(1, 10)): (688, 688),
    (FamilySplitKind.FAMILY, Fraction(0)): (0, 688),
}


@dataclass(frozen=True)
class FamilySplit:
    kind: FamilySplitKind
    p: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FamilySplitKind(self.kind))
        p = to_fraction(self.p)
        object.__setattr__(self, "p", p)
        if p == 0:
            if self.kind is not FamilySplitKind.FAMILY:
                raise InvalidArgument("p = 0 only makes sense for the family split")
        elif not (0 < p <= Fraction(9, 10)):
            raise InvalidArgument(f"family split fraction must lie in [0, 0.9], got {p}")


def family_vocab() -> Vocab:
    names = tuple(
        f"f{f}_p{local:02d}" for f in range(1, FAMILY_COUNT + 1) for local in range(PERSONS_PER_FAMILY)
    )
    return Vocab(ENTITY_COUNT, len(RELATIONS), entity_names=names, relation_names=RELATIONS)


def generate_families(seed: int, count: int = FAMILY_COUNT) -> List[FamilyTree]:
    return [generate_family(i, seed) for i in range(1, count + 1)]


def _split_counts(kind: FamilySplitKind, p: Fraction, pool: int) -> Tuple[int, int]:
    pinned = PUBLISHED_SPLIT_SIZES.get((kind, p))
    if pinned is not None and sum(pinned) <= pool:
        return pinned
    n_train = ceil_count(p, pool)
    return n_train, min(ceil_count(Fraction(1, 10), pool), pool - n_train)


def build_family_dataset(split: FamilySplit, seed: int, trees: Optional[Sequence[FamilyTree]] = None) -> Dataset:
    """
    random:   train = S_p(all),                        valid/test from all
    evidence: train = all 4main + S_p(13other),        valid/test from 13other
    family:   train = families 1-4 + family 5 4main + S_p(family 5 13other),
              valid/test from family 5 13other
    """
    if not isinstance(split, FamilySplit):
        raise InvalidArgument("build_family_dataset expects a FamilySplit")
    if trees is None:
        trees = generate_families(seed)
    if len(trees) != FAMILY_COUNT:
        raise InvalidArgument(f"expected {FAMILY_COUNT} trees, got {len(trees)}")

    per_family = [label_kinship(t) for t in trees]
    fixed: List[LabeledFact] = []
    pool: List[LabeledFact] = []
    if split.kind is FamilySplitKind.RANDOM:
        for facts in per_family:
            pool.extend(facts)
    elif split.kind is FamilySplitKind.EVIDENCE:
        for facts in per_family:
            for f in facts:
                (fixed if f.relation in MAIN_INDICES else pool).append(f)
    else:
        for facts in per_family[:-1]:
            fixed.extend(facts)
        for f in per_family[-1]:
            (fixed if f.relation in MAIN_INDICES else pool).append(f)

    n_train, n_valid = _split_counts(split.kind, split.p, len(pool))
    sampled, valid, test = split_by_counts(pool, n_train, n_valid, derive_seed(seed, "family-split", split.kind.value, str(split.p)))
    log.debug(f"[GEN] family split {split.kind.value} p={split.p}: fixed={len(fixed)} pool={len(pool)} sampled={n_train} valid={n_valid}")
    return Dataset(
        family_vocab(),
        canonical(list(fixed) + list(sampled)),
        valid,
        test,
        provenance={
            "generator": "family",
            "split": split.kind.value,
            "p": str(split.p),
            "seed": seed,
            "families": len(trees),
        },
    )


# ----------------------------
# Dumps
# ----------------------------
def _fmt(x: Optional[int]) -> str:
    return "-" if x is None else str(x)


def dump_tree(tree: FamilyTree) -> str:
    lines = [f"# family {tree.family}: id sex father mother spouse generation"]
    for p in tree.persons:
        lines.append(f"{p.id} {p.sex.value} {_fmt(p.father)} {_fmt(p.mother)} {_fmt(p.spouse)} {p.generation}")
    return "\n".join(lines) + "\n"


def to_dot(tree: FamilyTree) -> str:
    lines = [f"digraph family{tree.family} {{", "  rankdir=TB;"]
    for p in tree.persons:
        shape = "box" if p.sex is Sex.MALE else "ellipse"
        lines.append(f'  p{p.id} [label="{p.id}", shape={shape}];')
    seen = set()
    for p in tree.persons:
        if p.spouse is not None and (p.spouse, p.id) not in seen:
            seen.add((p.id, p.spouse))
            lines.append(f"  p{p.id} -> p{p.spouse} [dir=none, style=dashed];")
    for p in tree.persons:
        for parent in (p.father, p.mother):
            if parent is not None:
                lines.append(f"  p{parent} -> p{p.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
