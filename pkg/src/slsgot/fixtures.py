"""The three-item circular game and its restricted / weighted variants."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Item, ItemDomain, ItemSet, Question, QuestionBank, VariantConfig
from .oracles import FixedQuestions, FunctionGenerator, GameOracle, OracleCache

NAMES = ("Oppenheimer", "Alan Turing", "A Beautiful Mind")
TEXTS = ("Related to codes?", "Is it a movie?", "Is it a person?")


@dataclass
class Fixture:
    name: str
    domain: ItemDomain
    bank: QuestionBank
    questions: tuple[Question, ...]
    oracle: GameOracle
    variant: VariantConfig


def _circular(weights=(1.0, 1.0, 1.0)):
    domain = ItemDomain([Item(n, w) for n, w in zip(NAMES, weights)])
    bank = QuestionBank()
    full = domain.full()
    # q_i answers "no" exactly for item i
    qs = tuple(bank.intern(full - ItemSet(1 << i, 3), TEXTS[i]) for i in range(3))
    return domain, bank, qs


def example1() -> Fixture:
    domain, bank, qs = _circular()
    oracle = GameOracle(domain, FixedQuestions(qs), bank, m=3, cache=OracleCache())
    return Fixture("example1", domain, bank, qs, oracle, VariantConfig(restricted=False, m=3))


def example2() -> Fixture:
    domain, bank, qs = _circular()
    full = domain.full()

    def g(S: ItemSet):
        return qs[:2] if S == full else qs

    oracle = GameOracle(domain, FunctionGenerator(g), bank, m=3, cache=OracleCache())
    return Fixture("example2", domain, bank, qs, oracle, VariantConfig(restricted=True, m=3))


def example3() -> Fixture:
    domain, bank, qs = _circular((3.0, 2.0, 2.0))
    oracle = GameOracle(domain, FixedQuestions(qs), bank, m=3, cache=OracleCache())
    return Fixture("example3", domain, bank, qs, oracle, VariantConfig(weighted=True, restricted=False, m=3))


FIXTURES = {"example1": example1, "example2": example2, "example3": example3}


def load_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
