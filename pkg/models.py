# models.py
"""
Scoring, loss and gradient kernels for the six latent factor models.

Convention: r(s, o) reads "s is r of o". Complex parameters are stored as paired
real blocks (`E_re`/`E_im`, `W_re`/`W_im`) and every product rule is coded out,
so each stored coordinate is a plain real number that finite differences can poke.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from kg_core import (
    InvalidArgument,
    InvalidState,
    LabeledFact,
    Vocab,
    derive_seed,
)

log = logging.getLogger(__name__)

ParamKey = Tuple[str, Any]
PAIR_BLOCK = "D"


# ----------------------------
# Kinds and configs
# ----------------------------
class ModelFamily(str, Enum):
    CP = "CP"
    RESCAL = "RESCAL"
    TRANSE = "TransE"
    F = "F"
    DISTMULT = "DistMult"
    COMPLEX = "ComplEx"


_FAMILY_ALIASES = {
    "cp": ModelFamily.CP,
    "rescal": ModelFamily.RESCAL,
    "transe": ModelFamily.TRANSE,
    "f": ModelFamily.F,
    "fmodel": ModelFamily.F,
    "distmult": ModelFamily.DISTMULT,
    "complex": ModelFamily.COMPLEX,
}


@dataclass(frozen=True)
class ModelKind:
    family: ModelFamily
    q: Optional[int] = None

    def __post_init__(self) -> None:
        if self.family is ModelFamily.TRANSE:
            if self.q not in (1, 2):
                raise InvalidArgument(f"TransE needs q in {{1, 2}}, got {self.q!r}")
        elif self.q is not None:
            raise InvalidArgument(f"{self.family.value} takes no norm parameter")

    @property
    def name(self) -> str:
        if self.family is ModelFamily.TRANSE:
            return f"TransE-L{self.q}"
        return self.family.value

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, text: Union[str, "ModelKind"]) -> "ModelKind":
        if isinstance(text, ModelKind):
            return text
        raw = (text or "").strip()
        low = raw.lower()
        if low.startswith("transe"):
            suffix = low[len("transe"):].lstrip("-_")
            if suffix in ("l1", "1"):
                return cls(ModelFamily.TRANSE, 1)
            if suffix in ("l2", "2", ""):
                return cls(ModelFamily.TRANSE, 2)
            raise InvalidArgument(f"unknown TransE norm in {raw!r}")
        fam = _FAMILY_ALIASES.get(low)
        if fam is None:
            raise InvalidArgument(f"unknown model {raw!r}")
        return cls(fam)


ALL_MODELS: Tuple[ModelKind, ...] = (
    ModelKind(ModelFamily.CP),
    ModelKind(ModelFamily.RESCAL),
    ModelKind(ModelFamily.TRANSE, 1),
    ModelKind(ModelFamily.TRANSE, 2),
    ModelKind(ModelFamily.F),
    ModelKind(ModelFamily.DISTMULT),
    ModelKind(ModelFamily.COMPLEX),
)


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind
    rank: int
    lam: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if int(self.rank) < 1:
            raise InvalidArgument(f"rank must be >= 1, got {self.rank}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidArgument(f"lambda must be a finite non-negative number, got {self.lam}")


def block_shapes(kind: ModelKind, entity_count: int, relation_count: int, rank: int) -> Dict[str, Tuple[int, ...]]:
    ne, nr, k = entity_count, relation_count, rank
    fam = kind.family
    if fam is ModelFamily.CP:
        return {"U": (ne, k), "V": (ne, k), "W": (nr, k)}
    if fam is ModelFamily.RESCAL:
        return {"E": (ne, k), "W": (nr, k, k)}
    if fam in (ModelFamily.TRANSE, ModelFamily.DISTMULT):
        return {"E": (ne, k), "W": (nr, k)}
    if fam is ModelFamily.F:
        return {"W": (nr, k)}
    if fam is ModelFamily.COMPLEX:
        return {"E_re": (ne, k), "E_im": (ne, k), "W_re": (nr, k), "W_im": (nr, k)}
    raise InvalidArgument(f"unsupported model {kind}")


# ----------------------------
# Parameter container
# ----------------------------
@dataclass
class EmbeddingStore:
    kind: ModelKind
    rank: int
    entity_count: int
    relation_count: int
    blocks: Dict[str, np.ndarray]
    pair_seed: int = 0
    pairs: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    def pair_row(self, s: int, o: int) -> np.ndarray:
        """F-model pair embedding; unseen pairs get a standard-Gaussian draw, cached."""
        key = (int(s), int(o))
        row = self.pairs.get(key)
        if row is None:
            rng = np.random.default_rng([self.pair_seed, key[0], key[1]])
            row = rng.standard_normal(self.rank)
            self.pairs[key] = row
        return row

    def row(self, key: ParamKey) -> np.ndarray:
        name, idx = key
        if name == PAIR_BLOCK:
            return self.pair_row(*idx)
        return self.blocks[name][idx]

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(
            kind=self.kind,
            rank=self.rank,
            entity_count=self.entity_count,
            relation_count=self.relation_count,
            blocks={k: v.copy() for k, v in self.blocks.items()},
            pair_seed=self.pair_seed,
            pairs={k: v.copy() for k, v in self.pairs.items()},
        )

    def is_finite(self) -> bool:
        if not all(np.all(np.isfinite(v)) for v in self.blocks.values()):
            return False
        return all(np.all(np.isfinite(v)) for v in self.pairs.values())

    def check_fact(self, r: int, s: int, o: int) -> None:
        if not (0 <= r < self.relation_count):
            raise InvalidArgument(f"relation index {r} out of range [0, {self.relation_count})")
        if not (0 <= s < self.entity_count) or not (0 <= o < self.entity_count):
            raise InvalidArgument(f"entity index ({s}, {o}) out of range [0, {self.entity_count})")


def init_store(kind: Union[str, ModelKind], vocab: Vocab, rank: int, seed: int) -> EmbeddingStore:
    kind = ModelKind.parse(kind)
    if int(rank) < 1:
        raise InvalidArgument(f"rank must be >= 1, got {rank}")
    rng = np.random.default_rng(seed)
    shapes = block_shapes(kind, vocab.entity_count, vocab.relation_count, rank)
    blocks = {name: rng.standard_normal(shape) for name, shape in shapes.items()}
    store = EmbeddingStore(
        kind=kind,
        rank=int(rank),
        entity_count=vocab.entity_count,
        relation_count=vocab.relation_count,
        blocks=blocks,
        pair_seed=derive_seed(seed, "pairs"),
    )
    if kind.family is ModelFamily.TRANSE:
        project_transe_entities(store)
    return store


def project_transe_entities(store: EmbeddingStore) -> None:
    if store.kind.family is not ModelFamily.TRANSE:
        raise InvalidState(f"unit-norm projection applies to TransE only, store is {store.kind}")
    E = store.blocks["E"]
    norms = np.linalg.norm(E, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    E /= safe[:, None]
    if np.any(zero):
        E[zero] = 0.0
        E[zero, 0] = 1.0


# ----------------------------
# Scoring
# ----------------------------
def trilinear(a: Sequence, b: Sequence, c: Sequence) -> Union[float, complex]:
    a, b, c = np.asarray(a), np.asarray(b), np.asarray(c)
    if a.ndim != 1 or a.shape != b.shape or a.shape != c.shape:
        raise InvalidArgument(f"trilinear needs equal-length vectors, got {a.shape}, {b.shape}, {c.shape}")
    total = np.sum(a * b * c)
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)


def _fact_index(fact: Any) -> Tuple[int, int, int]:
    if isinstance(fact, LabeledFact):
        return fact.relation, fact.subject, fact.object
    r, s, o = fact[:3]
    return int(r), int(s), int(o)


def _phi_partials(store: EmbeddingStore, r: int, s: int, o: int) -> Tuple[float, List[Tuple[ParamKey, np.ndarray]]]:
    """Score plus d(score)/d(row) for every row the fact touches (repeats when s == o)."""
    fam = store.kind.family
    b = store.blocks

    if fam is ModelFamily.CP:
        u, v, w = b["U"][s], b["V"][o], b["W"][r]
        phi = float(np.dot(w, u * v))
        return phi, [(("W", r), u * v), (("U", s), w * v), (("V", o), w * u)]

    if fam is ModelFamily.RESCAL:
        es, eo, M = b["E"][s], b["E"][o], b["W"][r]
        Meo = M @ eo
        phi = float(es @ Meo)
        return phi, [(("W", r), np.outer(es, eo)), (("E", s), Meo), (("E", o), M.T @ es)]

    if fam is ModelFamily.TRANSE:
        es, eo, w = b["E"][s], b["E"][o], b["W"][r]
        d = es + w - eo
        if store.kind.q == 1:
            phi = -float(np.abs(d).sum())
            g = -np.sign(d)
        else:
            n = float(np.linalg.norm(d))
            phi = -n
            g = -d / n if n > 0.0 else np.zeros_like(d)
        return phi, [(("W", r), g), (("E", s), g), (("E", o), -g)]

    if fam is ModelFamily.DISTMULT:
        es, eo, w = b["E"][s], b["E"][o], b["W"][r]
        phi = float(np.dot(w, es * eo))
        return phi, [(("W", r), es * eo), (("E", s), w * eo), (("E", o), w * es)]

    if fam is ModelFamily.F:
        w = b["W"][r]
        d = store.pair_row(s, o)
        phi = float(np.dot(d, w))
        return phi, [(("W", r), d.copy()), ((PAIR_BLOCK, (s, o)), w.copy())]

    if fam is ModelFamily.COMPLEX:
        wr, wi = b["W_re"][r], b["W_im"][r]
        sr, si = b["E_re"][s], b["E_im"][s]
        or_, oi = b["E_re"][o], b["E_im"][o]
        # Re(<w, e_s, conj(e_o)>)
        real_part = sr * or_ + si * oi
        imag_part = sr * oi - si * or_
        phi = float(np.dot(wr, real_part) + np.dot(wi, imag_part))
        return phi, [
            (("W_re", r), real_part),
            (("W_im", r), imag_part),
            (("E_re", s), wr * or_ + wi * oi),
            (("E_im", s), wr * oi - wi * or_),
            (("E_re", o), wr * sr - wi * si),
            (("E_im", o), wr * si + wi * sr),
        ]

    raise InvalidArgument(f"unsupported model {store.kind}")


def _reg_keys(store: EmbeddingStore, r: int, s: int, o: int) -> List[ParamKey]:
    fam = store.kind.family
    if fam is ModelFamily.CP:
        return [("W", r), ("U", s), ("V", o)]
    if fam is ModelFamily.F:
        return [("W", r), (PAIR_BLOCK, (s, o))]
    if fam is ModelFamily.COMPLEX:
        return [("W_re", r), ("W_im", r), ("E_re", s), ("E_im", s), ("E_re", o), ("E_im", o)]
    return [("W", r), ("E", s), ("E", o)]


def score(store: EmbeddingStore, fact: Any) -> float:
    r, s, o = _fact_index(fact)
    store.check_fact(r, s, o)
    phi, _ = _phi_partials(store, r, s, o)
    return phi


def score_facts(store: EmbeddingStore, r: np.ndarray, s: np.ndarray, o: np.ndarray) -> np.ndarray:
    """Vectorized scores for index arrays of equal length."""
    r = np.asarray(r, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    o = np.asarray(o, dtype=np.int64)
    if r.size == 0:
        return np.zeros(0, dtype=np.float64)
    if r.min() < 0 or r.max() >= store.relation_count:
        raise InvalidArgument("relation index out of range")
    if min(s.min(), o.min()) < 0 or max(s.max(), o.max()) >= store.entity_count:
        raise InvalidArgument("entity index out of range")

    fam = store.kind.family
    b = store.blocks
    if fam is ModelFamily.CP:
        return np.sum(b["W"][r] * b["U"][s] * b["V"][o], axis=1)
    if fam is ModelFamily.RESCAL:
        return np.einsum("nk,nkl,nl->n", b["E"][s], b["W"][r], b["E"][o])
    if fam is ModelFamily.TRANSE:
        d = b["E"][s] + b["W"][r] - b["E"][o]
        return -np.linalg.norm(d, ord=store.kind.q, axis=1)
    if fam is ModelFamily.DISTMULT:
        return np.sum(b["W"][r] * b["E"][s] * b["E"][o], axis=1)
    if fam is ModelFamily.F:
        D = np.stack([store.pair_row(si, oi) for si, oi in zip(s.tolist(), o.tolist())])
        return np.sum(D * b["W"][r], axis=1)
    if fam is ModelFamily.COMPLEX:
        wr, wi = b["W_re"][r], b["W_im"][r]
        sr, si = b["E_re"][s], b["E_im"][s]
        or_, oi = b["E_re"][o], b["E_im"][o]
        return np.sum(wr * (sr * or_ + si * oi) + wi * (sr * oi - si * or_), axis=1)
    raise InvalidArgument(f"unsupported model {store.kind}")


def probability(sc: float) -> float:
    return float(expit(sc))


# ----------------------------
# Loss and gradient
# ----------------------------
def loss_and_gradient(
    store: EmbeddingStore, fact: LabeledFact, lam: float
) -> Tuple[float, Dict[ParamKey, np.ndarray]]:
    """
    log(1 + exp(-y*phi)) + lam * sum of squared norms of the touched rows, and its
    exact gradient as a sparse {(block, index): array} map.
    """
    r, s, o, y = fact.relation, fact.subject, fact.object, fact.label
    phi, partials = _phi_partials(store, r, s, o)
    data_loss = float(np.logaddexp(0.0, -y * phi))
    # dL/dphi = -y * sigmoid(-y * phi)
    coef = -y * float(expit(-y * phi))

    grads: Dict[ParamKey, np.ndarray] = {}
    for key, dphi in partials:
        g = coef * dphi
        if key in grads:
            grads[key] = grads[key] + g
        else:
            grads[key] = g

    reg = 0.0
    if lam:
        for key in _reg_keys(store, r, s, o):
            row = store.row(key)
            reg += float(np.sum(row * row))
            grads[key] = grads[key] + 2.0 * lam * row
    return data_loss + lam * reg, grads


def fact_loss(store: EmbeddingStore, fact: LabeledFact, lam: float) -> float:
    if lam < 0:
        raise InvalidArgument(f"lambda must be non-negative, got {lam}")
    r, s, o = fact.relation, fact.subject, fact.object
    store.check_fact(r, s, o)
    phi, _ = _phi_partials(store, r, s, o)
    reg = 0.0
    if lam:
        for key in _reg_keys(store, r, s, o):
            row = store.row(key)
            reg += float(np.sum(row * row))
    return float(np.logaddexp(0.0, -fact.label * phi)) + lam * reg


def fact_gradient(store: EmbeddingStore, fact: LabeledFact, lam: float) -> Dict[ParamKey, np.ndarray]:
    if lam < 0:
        raise InvalidArgument(f"lambda must be non-negative, got {lam}")
    store.check_fact(fact.relation, fact.subject, fact.object)
    _, grads = loss_and_gradient(store, fact, lam)
    return grads
