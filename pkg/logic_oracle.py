# logic_oracle.py
"""
Deterministic inference baselines.

- Horn rules over binary atoms (rule files, parser, semi-naive forward chaining)
- property_closure: deductions on a partial sign matrix for a property combo
- PropertyOracle / FamilyOracle: score facts 1.0 (deduced true), 0.0 (deduced
  false) or 0.5 (unknown) from the train and validation facts
- oracle_ap: AP of an oracle on a dataset's test set
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from family_data import (
    MAIN_RELATIONS,
    PERSONS_PER_FAMILY,
    RELATION_SEX,
    RELATIONS,
    KinshipIndex,
    Sex,
    family_of,
)
from kg_core import (
    Dataset,
    InconsistentInput,
    InvalidArgument,
    LabeledFact,
    Vocab,
    average_precision,
)
from property_data import PropertyCombo, Reflexivity, Symmetry, facts_to_matrix

log = logging.getLogger(__name__)

RULES_DIR = Path(__file__).resolve().parent / "rules"
FAMILY_RULES = RULES_DIR / "family.rules"
FAMILY_EXHAUSTIVE_RULES = RULES_DIR / "family_exhaustive.rules"

NEQ = "neq"

Fact = Tuple[str, Hashable, Hashable]


# ----------------------------
# Rules
# ----------------------------
@dataclass(frozen=True)
class Atom:
    relation: str
    args: Tuple[str, str]

    @property
    def builtin(self) -> bool:
        return self.relation == NEQ

    def __str__(self) -> str:
        return f"{self.relation}({self.args[0]},{self.args[1]})"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: Tuple[Atom, ...]

    def __post_init__(self) -> None:
        if not self.body:
            raise InvalidArgument(f"rule {self.head} has an empty body")
        if self.head.builtin:
            raise InvalidArgument(f"{NEQ} cannot be a rule head")
        bound = {v for a in self.body if not a.builtin for v in a.args}
        if not bound:
            raise InvalidArgument(f"rule {self.head} needs at least one non-builtin body atom")
        missing = set(self.head.args) - bound
        if missing:
            raise InvalidArgument(f"rule {self}: head variables {sorted(missing)} do not occur in the body")
        loose = {v for a in self.body if a.builtin for v in a.args} - bound
        if loose:
            raise InvalidArgument(f"rule {self}: {NEQ} variables {sorted(loose)} are never bound")

    def __str__(self) -> str:
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."


_ATOM_RE = re.compile(r"([A-Za-z_]\w*)\s*\(\s*([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*\)")


def _parse_atoms(text: str, where: str) -> List[Atom]:
    atoms = []
    pos = 0
    for i, m in enumerate(_ATOM_RE.finditer(text)):
        gap = text[pos:m.start()].strip()
        if gap != ("," if i else ""):
            raise InvalidArgument(f"{where}: cannot parse {text.strip()!r}")
        atoms.append(Atom(m.group(1), (m.group(2), m.group(3))))
        pos = m.end()
    if text[pos:].strip() or not atoms:
        raise InvalidArgument(f"{where}: cannot parse {text.strip()!r}")
    return atoms


def parse_rule(line: str, where: str = "rule") -> Rule:
    text = line.strip()
    if text.endswith("."):
        text = text[:-1]
    if ":-" not in text:
        raise InvalidArgument(f"{where}: expected 'head :- body', got {line.strip()!r}")
    head_text, body_text = text.split(":-", 1)
    head = _parse_atoms(head_text, where)
    if len(head) != 1:
        raise InvalidArgument(f"{where}: a rule has exactly one head atom")
    return Rule(head[0], tuple(_parse_atoms(body_text, where)))


def parse_rules(text: str, source: str = "<rules>") -> List[Rule]:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rules.append(parse_rule(line, f"{source}:{lineno}"))
    return rules


def load_rules(path: Path) -> List[Rule]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        return parse_rules(f.read(), source=path.name)


# ----------------------------
# Forward chaining
# ----------------------------
class _FactIndex:
    def __init__(self) -> None:
        self.facts: Set[Fact] = set()
        self.by_rel: Dict[str, Set[Tuple[Hashable, Hashable]]] = {}
        self.by_subject: Dict[Tuple[str, Hashable], Set[Hashable]] = {}
        self.by_object: Dict[Tuple[str, Hashable], Set[Hashable]] = {}

    def add(self, fact: Fact) -> bool:
        if fact in self.facts:
            return False
        r, s, o = fact
        self.facts.add(fact)
        self.by_rel.setdefault(r, set()).add((s, o))
        self.by_subject.setdefault((r, s), set()).add(o)
        self.by_object.setdefault((r, o), set()).add(s)
        return True

    def matches(self, atom: Atom, env: Dict[str, Hashable]) -> Iterator[Dict[str, Hashable]]:
        x, y = atom.args
        if x in env and y in env:
            if (atom.relation, env[x], env[y]) in self.facts:
                yield env
        elif x in env:
            for o in self.by_subject.get((atom.relation, env[x]), ()):
                yield {**env, y: o}
        elif y in env:
            for s in self.by_object.get((atom.relation, env[y]), ()):
                yield {**env, x: s}
        else:
            for s, o in self.by_rel.get(atom.relation, ()):
                if x == y and s != o:
                    continue
                yield {**env, x: s, y: o}


def _bind(atom: Atom, fact: Fact) -> Optional[Dict[str, Hashable]]:
    x, y = atom.args
    _, s, o = fact
    if x == y and s != o:
        return None
    return {x: s, y: o}


def _join(atoms: List[Atom], env: Dict[str, Hashable], index: _FactIndex) -> Iterator[Dict[str, Hashable]]:
    pending = [a for a in atoms if not a.builtin]
    if not pending:
        if all(env[a.args[0]] != env[a.args[1]] for a in atoms if a.builtin):
            yield env
        return
    # most-bound atom first
    nxt = max(pending, key=lambda a: sum(v in env for v in a.args))
    rest = [a for a in atoms if a is not nxt]
    for env2 in index.matches(nxt, env):
        yield from _join(rest, env2, index)


def forward_chain(rules: Sequence[Rule], positives: Iterable[Fact]) -> Set[Fact]:
    """Least fixpoint of `rules` over `positives` (semi-naive: each round joins against the last round's new facts)."""
    index = _FactIndex()
    for fact in positives:
        index.add(tuple(fact))  # type: ignore[arg-type]
    delta = set(index.facts)
    while delta and rules:
        delta_by_rel: Dict[str, List[Fact]] = {}
        for fact in delta:
            delta_by_rel.setdefault(fact[0], []).append(fact)
        new: Set[Fact] = set()
        for rule in rules:
            for i, atom in enumerate(rule.body):
                if atom.builtin:
                    continue
                for fact in delta_by_rel.get(atom.relation, ()):
                    env = _bind(atom, fact)
                    if env is None:
                        continue
                    rest = [a for j, a in enumerate(rule.body) if j != i]
                    for full in _join(rest, env, index):
                        head = (rule.head.relation, full[rule.head.args[0]], full[rule.head.args[1]])
                        if head not in index.facts:
                            new.add(head)
        delta = {f for f in new if index.add(f)}
    return set(index.facts)


# ----------------------------
# Property closure
# ----------------------------
def _assign(Y: np.ndarray, mask: np.ndarray, value: int, why: str) -> None:
    clash = mask & (Y == -value)
    if clash.any():
        i, j = (int(v) for v in np.argwhere(clash)[0])
        raise InconsistentInput(f"{why} demands y[{i},{j}] = {value:+d} against an observed or deduced {-value:+d}")
    Y[mask] = value


def property_closure(
    combo: PropertyCombo,
    known: np.ndarray,
    contrapositive: bool = True,
    paired_antisymmetry: bool = True,
) -> np.ndarray:
    """
    Fixpoint of the deductions a combo allows on a partial sign matrix
    (+1 / -1 observed, 0 unknown). Returns a new matrix; `known` is untouched.

    paired_antisymmetry adds y_ij = -1 => y_ji = +1 off the diagonal, which holds
    for generated antisymmetric relations but is not part of the definition.
    """
    Y = np.array(known, dtype=np.int8, copy=True)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {Y.shape}")
    if not np.isin(Y, (-1, 0, 1)).all():
        raise InvalidArgument("known entries must be -1, 0 or +1")
    n = Y.shape[0]
    off = ~np.eye(n, dtype=bool)

    while True:
        before = Y.copy()
        if combo.reflexive is Reflexivity.REFLEXIVE:
            _assign(Y, ~off, 1, "reflexivity")
        elif combo.reflexive is Reflexivity.IRREFLEXIVE:
            _assign(Y, ~off, -1, "irreflexivity")

        if combo.symmetric is Symmetry.SYMMETRIC:
            T = Y.T.copy()
            _assign(Y, T == 1, 1, "symmetry")
            _assign(Y, T == -1, -1, "symmetry")
        elif combo.symmetric is Symmetry.ANTISYMMETRIC:
            T = Y.T.copy()
            _assign(Y, (T == 1) & off, -1, "antisymmetry")
            if paired_antisymmetry:
                _assign(Y, (T == -1) & off, 1, "paired antisymmetry")

        if combo.transitive:
            P = (Y == 1).astype(np.int32)
            _assign(Y, (P @ P) > 0, 1, "transitivity")
            if contrapositive:
                P = (Y == 1).astype(np.int32)
                N = (Y == -1).astype(np.int32)
                # y_ik = +1, y_ij = -1  =>  y_kj = -1
                _assign(Y, (P.T @ N) > 0, -1, "transitivity contrapositive")
                # y_kj = +1, y_ij = -1  =>  y_ik = -1
                _assign(Y, (N @ P.T) > 0, -1, "transitivity contrapositive")

        if np.array_equal(Y, before):
            return Y


# ----------------------------
# Oracles
# ----------------------------
class OracleVerdict(float, Enum):
    DEDUCED_TRUE = 1.0
    DEDUCED_FALSE = 0.0
    UNKNOWN = 0.5


def _observed_labels(facts: Iterable[LabeledFact]) -> Dict[Tuple[int, int, int], int]:
    out: Dict[Tuple[int, int, int], int] = {}
    for f in facts:
        prev = out.setdefault(f.key, f.label)
        if prev != f.label:
            raise InconsistentInput(f"fact {f.key} observed with both labels")
    return out


class PropertyOracle:
    """One closed sign matrix per relation, relation r following combos[r]."""

    def __init__(
        self,
        combos: Sequence[PropertyCombo],
        contrapositive: bool = True,
        paired_antisymmetry: bool = True,
    ) -> None:
        if not combos:
            raise InvalidArgument("PropertyOracle needs one combo per relation")
        self.combos = tuple(combos)
        self.contrapositive = contrapositive
        self.paired_antisymmetry = paired_antisymmetry
        self._closed: List[np.ndarray] = []

    @classmethod
    def for_dataset(cls, dataset: Dataset, **kwargs: Any) -> "PropertyOracle":
        labels = dataset.provenance.get("combos")
        if not labels:
            raise InvalidArgument("dataset provenance does not name its property combos")
        return cls([PropertyCombo.parse(x) for x in labels], **kwargs)

    def fit(self, observed: Sequence[LabeledFact], vocab: Vocab) -> "PropertyOracle":
        if vocab.relation_count != len(self.combos):
            raise InvalidArgument(f"{len(self.combos)} combos for {vocab.relation_count} relations")
        _observed_labels(observed)
        self._closed = [
            property_closure(
                combo,
                facts_to_matrix(observed, vocab.entity_count, relation=r),
                contrapositive=self.contrapositive,
                paired_antisymmetry=self.paired_antisymmetry,
            )
            for r, combo in enumerate(self.combos)
        ]
        return self

    def verdict(self, r: int, s: int, o: int) -> OracleVerdict:
        if not self._closed:
            raise InvalidArgument("oracle queried before fit()")
        v = int(self._closed[r][s, o])
        if v == 1:
            return OracleVerdict.DEDUCED_TRUE
        if v == -1:
            return OracleVerdict.DEDUCED_FALSE
        return OracleVerdict.UNKNOWN


class FamilyOracle:
    """
    Kinship oracle over mother/father/son/daughter evidence.

    A family whose 4main cells are all observed is rebuilt exactly and every query
    inside it is answered from the rebuilt tree. Otherwise facts come from forward
    chaining `rules` over the observed positives, falsity from irreflexivity, the
    subject's sex and mutual exclusion of relations on an ordered pair; the rest is
    unknown.
    """

    def __init__(self, rules: Optional[Sequence[Rule]] = None) -> None:
        self.rules = list(rules) if rules is not None else load_rules(FAMILY_EXHAUSTIVE_RULES)
        self._names: Tuple[str, ...] = ()
        self._observed: Dict[Tuple[int, int, int], int] = {}
        self._trees: Dict[int, KinshipIndex] = {}
        self._derived: Set[Tuple[int, int, int]] = set()
        self._pair_true: Dict[Tuple[int, int], Set[int]] = {}
        self._sex: Dict[int, Sex] = {}

    def _relation_names(self, vocab: Vocab) -> Tuple[str, ...]:
        names = vocab.relation_names or (RELATIONS if vocab.relation_count == len(RELATIONS) else None)
        if names is None or not set(MAIN_RELATIONS) <= set(names):
            raise InvalidArgument("FamilyOracle needs named kinship relations including mother/father/son/daughter")
        return tuple(names)

    def fit(self, observed: Sequence[LabeledFact], vocab: Vocab) -> "FamilyOracle":
        self._names = self._relation_names(vocab)
        self._observed = _observed_labels(observed)
        main = {self._names.index(r) for r in MAIN_RELATIONS}

        seen_main: Dict[int, int] = {}
        for (r, s, o) in self._observed:
            if r in main and family_of(s) == family_of(o):
                seen_main[family_of(s)] = seen_main.get(family_of(s), 0) + 1
        full_count = len(MAIN_RELATIONS) * PERSONS_PER_FAMILY ** 2

        self._trees = {}
        for fam, count in sorted(seen_main.items()):
            if count == full_count:
                self._trees[fam] = self._rebuild(fam)
        log.debug(f"[ORACLE] families rebuilt from complete evidence: {sorted(self._trees)}")
        self._fit_fallback()
        return self

    def _rebuild(self, fam: int) -> KinshipIndex:
        name = self._names
        sex: Dict[int, Sex] = {}
        father: Dict[int, int] = {}
        mother: Dict[int, int] = {}
        from_children: Set[Tuple[int, int]] = set()

        def set_sex(x: int, value: Sex) -> None:
            if sex.setdefault(x, value) is not value:
                raise InconsistentInput(f"entity {x} is typed both male and female")

        def set_parent(table: Dict[int, int], child: int, parent: int, what: str) -> None:
            if table.setdefault(child, parent) != parent:
                raise InconsistentInput(f"entity {child} has two {what}s ({table[child]}, {parent})")

        for (r, s, o), label in self._observed.items():
            if label != 1 or family_of(s) != fam or family_of(o) != fam:
                continue
            rel = name[r]
            if rel == "father":
                set_sex(s, Sex.MALE)
                set_parent(father, o, s, "father")
            elif rel == "mother":
                set_sex(s, Sex.FEMALE)
                set_parent(mother, o, s, "mother")
            elif rel in ("son", "daughter"):
                set_sex(s, Sex.MALE if rel == "son" else Sex.FEMALE)
                from_children.add((o, s))

        from_parents = {(p, c) for c, p in father.items()} | {(p, c) for c, p in mother.items()}
        if from_parents != from_children:
            diff = sorted(from_parents ^ from_children)[:3]
            raise InconsistentInput(f"family {fam}: parent facts disagree with child facts, e.g. {diff}")
        return KinshipIndex(sex, father, mother)

    def _fit_fallback(self) -> None:
        positives = [
            (self._names[r], s, o) for (r, s, o), label in self._observed.items() if label == 1
        ]
        closure = forward_chain(self.rules, positives)
        index = {n: i for i, n in enumerate(self._names)}
        self._derived = {(index[rel], s, o) for rel, s, o in closure if rel in index}

        self._pair_true = {}
        self._sex = {}
        for r, s, o in self._derived:
            if self._observed.get((r, s, o)) == -1:
                raise InconsistentInput(f"{self._names[r]}({s},{o}) is deduced true but observed false")
            self._pair_true.setdefault((s, o), set()).add(r)
            want = RELATION_SEX.get(self._names[r])
            if want is not None and self._sex.setdefault(s, want) is not want:
                raise InconsistentInput(f"entity {s} is typed both male and female")

    def verdict(self, r: int, s: int, o: int) -> OracleVerdict:
        if not self._names:
            raise InvalidArgument("oracle queried before fit()")
        rel = self._names[r]

        fam = family_of(s)
        if fam == family_of(o) and fam in self._trees:
            holds = self._trees[fam].holds(rel, s, o)
            return OracleVerdict.DEDUCED_TRUE if holds else OracleVerdict.DEDUCED_FALSE
        if fam in self._trees and family_of(o) in self._trees:
            # complete families never link to each other
            return OracleVerdict.DEDUCED_FALSE

        seen = self._observed.get((r, s, o))
        if seen is not None:
            return OracleVerdict.DEDUCED_TRUE if seen == 1 else OracleVerdict.DEDUCED_FALSE
        if (r, s, o) in self._derived:
            return OracleVerdict.DEDUCED_TRUE
        if s == o:
            return OracleVerdict.DEDUCED_FALSE
        want = RELATION_SEX.get(rel)
        if want is not None and s in self._sex and self._sex[s] is not want:
            return OracleVerdict.DEDUCED_FALSE
        if self._pair_true.get((s, o), set()) - {r}:
            return OracleVerdict.DEDUCED_FALSE
        return OracleVerdict.UNKNOWN


def oracle_for_dataset(dataset: Dataset, **kwargs: Any) -> Any:
    generator = str(dataset.provenance.get("generator", ""))
    if generator == "family":
        return FamilyOracle(**kwargs)
    if generator.startswith("property"):
        return PropertyOracle.for_dataset(dataset, **kwargs)
    raise InvalidArgument(f"no oracle for datasets produced by {generator or 'an unknown generator'!r}")


def oracle_scores(dataset: Dataset, oracle: Any) -> List[float]:
    oracle.fit(dataset.train + dataset.valid, dataset.vocab)
    return [float(oracle.verdict(f.relation, f.subject, f.object).value) for f in dataset.test]


def oracle_ap(dataset: Dataset, oracle: Any) -> float:
    """AP of the oracle's {1, 0.5, 0} scores on the test set, ties broken by (r, s, o)."""
    scores = oracle_scores(dataset, oracle)
    return average_precision(
        list(zip(scores, (f.label for f in dataset.test))),
        keys=[f.key for f in dataset.test],
    )
