"""Domain model: items, questions, histories, consistent sets and payoffs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence


class InconsistentHistoryError(ValueError):
    """A transcript whose answers rule out every item."""


class DuplicateQuestionError(ValueError):
    pass


class NonTerminalError(ValueError):
    pass


@dataclass(frozen=True)
class Item:
    name: str
    weight: float = 1.0


class ItemDomain:
    """Ordered universe of items; positions fix the bit layout of every ItemSet."""

    def __init__(self, items: Sequence[Item | str]):
        recs = [Item(it) if isinstance(it, str) else it for it in items]
        if not recs:
            raise ValueError("empty domain")
        names = [r.name for r in recs]
        if any(not n for n in names):
            raise ValueError("item names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("item names must be unique")
        for r in recs:
            if not (r.weight > 0 and math.isfinite(r.weight)):
                raise ValueError(f"weight of {r.name!r} must be a positive real")
        self.items: tuple[Item, ...] = tuple(recs)
        self.index = {n: i for i, n in enumerate(names)}

    def __len__(self) -> int:
        return len(self.items)

    def __repr__(self) -> str:
        return f"ItemDomain({[r.name for r in self.items]})"

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.items]

    @property
    def weights(self) -> list[float]:
        return [r.weight for r in self.items]

    @property
    def weighted(self) -> bool:
        return any(r.weight != 1.0 for r in self.items)

    def full(self) -> ItemSet:
        return ItemSet((1 << len(self)) - 1, len(self))

    def subset(self, members: Iterable[int | str]) -> ItemSet:
        mask = 0
        for m in members:
            i = self.index[m] if isinstance(m, str) else m
            if not 0 <= i < len(self):
                raise IndexError(f"item index {i} out of domain")
            mask |= 1 << i
        return ItemSet(mask, len(self))

    @classmethod
    def synthetic(cls, n: int, weights: Sequence[float] | None = None) -> ItemDomain:
        ws = weights if weights is not None else [1.0] * n
        return cls([Item(f"item{i}", float(w)) for i, w in enumerate(ws)])

    @classmethod
    def from_json(cls, data: dict) -> ItemDomain:
        raw = data["items"]
        has_w = [("weight" in r) for r in raw]
        if any(has_w) and not all(has_w):
            raise ValueError("weights must be given for every item or for none")
        return cls([Item(r["name"], float(r.get("weight", 1.0))) for r in raw])

    @classmethod
    def load(cls, path: str | Path) -> ItemDomain:
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        if self.weighted:
            return {"items": [{"name": r.name, "weight": r.weight} for r in self.items]}
        return {"items": [{"name": r.name} for r in self.items]}


class ItemSet:
    """Fixed-width bit vector over domain positions."""

    __slots__ = ("mask", "width")

    def __init__(self, mask: int, width: int):
        self.mask = mask
        self.width = width

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, i: int) -> bool:
        return (self.mask >> i) & 1 == 1

    def __iter__(self) -> Iterator[int]:
        m = self.mask
        while m:
            low = m & -m
            yield low.bit_length() - 1
            m ^= low

    def __eq__(self, other) -> bool:
        return isinstance(other, ItemSet) and self.mask == other.mask and self.width == other.width

    def __hash__(self) -> int:
        return hash((self.mask, self.width))

    def __and__(self, other: ItemSet) -> ItemSet:
        return ItemSet(self.mask & other.mask, self.width)

    def __or__(self, other: ItemSet) -> ItemSet:
        return ItemSet(self.mask | other.mask, self.width)

    def __sub__(self, other: ItemSet) -> ItemSet:
        return ItemSet(self.mask & ~other.mask, self.width)

    def __le__(self, other: ItemSet) -> bool:
        return self.mask & ~other.mask == 0

    def __repr__(self) -> str:
        return f"ItemSet({sorted(self)})"

    def key(self) -> tuple[int, ...]:
        """Canonical cache key: sorted member indices."""
        return tuple(self)

    def first(self, k: int) -> ItemSet:
        """The k lowest-index members."""
        mask = 0
        for j, i in enumerate(self):
            if j == k:
                break
            mask |= 1 << i
        return ItemSet(mask, self.width)


@dataclass(frozen=True)
class Question:
    id: int
    yes_set: ItemSet
    text: str | None = field(default=None, compare=False)

    def __repr__(self) -> str:
        label = f" {self.text!r}" if self.text else ""
        return f"Question({self.id}{label}, yes={sorted(self.yes_set)})"


class QuestionBank:
    """Interns questions so equal (yes_set, text) pairs share one stable id."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[int, int, str | None], Question] = {}
        self.questions: list[Question] = []
        self.identity: set[int] = set()

    def intern(self, yes_set: ItemSet, text: str | None = None) -> Question:
        k = (yes_set.mask, yes_set.width, text)
        q = self._by_key.get(k)
        if q is None:
            q = Question(len(self.questions), yes_set, text)
            self._by_key[k] = q
            self.questions.append(q)
        return q

    def __getitem__(self, qid: int) -> Question:
        return self.questions[qid]

    def __len__(self) -> int:
        return len(self.questions)


def answer(q: Question, s: int) -> int:
    if not 0 <= s < q.yes_set.width:
        raise IndexError(f"item index {s} out of domain")
    return 1 if s in q.yes_set else 0


def split(S: ItemSet, q: Question) -> tuple[ItemSet, ItemSet]:
    yes = S & q.yes_set
    return yes, S - yes


def is_progressing(S: ItemSet, q: Question) -> bool:
    yes = S.mask & q.yes_set.mask
    return yes != 0 and yes != S.mask


@dataclass(frozen=True)
class History:
    steps: tuple[tuple[Question, int], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def question_ids(self) -> tuple[int, ...]:
        return tuple(q.id for q, _ in self.steps)

    def key(self) -> tuple[tuple[int, int], ...]:
        return tuple((q.id, a) for q, a in self.steps)


def consistent_set(domain: ItemDomain | ItemSet, H: History) -> ItemSet:
    S = domain.full() if isinstance(domain, ItemDomain) else domain
    for q, a in H.steps:
        S = S & q.yes_set if a else S - q.yes_set
        if not S:
            raise InconsistentHistoryError(f"no item agrees with history {H.key()}")
    return S


def extend_history(H: History, q: Question, a: int) -> History:
    if q.id in H.question_ids:
        raise DuplicateQuestionError(f"question {q.id} already asked")
    if a not in (0, 1):
        raise ValueError("answers are bits")
    return History(H.steps + ((q, a),))


@dataclass(frozen=True)
class VariantConfig:
    weighted: bool = False
    restricted: bool = True
    m: int = 3
    d: int = 3
    cfr_iterations: int = 1000
    seed: int = 0
    heuristic: str = "log2-optimistic"
    strict: bool = True
    cfr_plus: bool = False

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or self.cfr_iterations < 1:
            raise ValueError("m, d and cfr_iterations must be >= 1")
        if self.heuristic not in ("log2-optimistic", "weighted-max"):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")

    @classmethod
    def from_json(cls, data: dict) -> VariantConfig:
        return cls(**data)


def terminal_payoff(
    H: History, s_star: int, domain: ItemDomain, variant: VariantConfig | None = None
) -> float:
    """Item Chooser's payoff at a finished game (the Questioner pays the same)."""
    S = consistent_set(domain, H)
    if len(S) != 1:
        raise NonTerminalError(f"{len(S)} items still consistent")
    if s_star not in S:
        raise InconsistentHistoryError("history does not identify s_star")
    weighted = variant.weighted if variant is not None else False
    if weighted:
        return domain.items[s_star].weight * len(H)
    return float(len(H))
