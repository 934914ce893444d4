# conftest.py
import pytest

from kg_core import Dataset, LabeledFact, Vocab, canonical


def _tiny_facts():
    # two relations over 6 entities; relation 0 true when s + o is even, relation 1 when s < o
    facts = []
    for s in range(6):
        for o in range(6):
            facts.append(LabeledFact(0, s, o, 1 if (s + o) % 2 == 0 else -1))
            facts.append(LabeledFact(1, s, o, 1 if s < o else -1))
    return facts


@pytest.fixture
def tiny_dataset():
    facts = _tiny_facts()
    valid = [f for f in facts if f.subject == 5 or f.object == 5][:12]
    valid_keys = {f.key for f in valid}
    test = [f for f in facts if f.subject == 4 and f.key not in valid_keys]
    held = valid_keys | {f.key for f in test}
    train = [f for f in facts if f.key not in held]
    return Dataset(
        Vocab(6, 2, relation_names=("parity", "less")),
        canonical(train),
        canonical(valid),
        canonical(test),
        provenance={"generator": "tiny"},
    )
