"""Question generators (g), answerers (f) and the shared cache in front of them."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .core import ItemDomain, ItemSet, Question, QuestionBank, is_progressing
from .efg import NoProgressError, canonical_actions

SOURCES = ("synthetic", "llm", "injected", "identity-shortcut")


class CacheConflictError(RuntimeError):
    """A cache key was written twice with different values."""


class InconsistentSplitError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateSet:
    questions: tuple[Question, ...]
    source: str = "synthetic"

    def __post_init__(self):
        if not self.questions:
            raise ValueError("candidate set must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown candidate source {self.source!r}")

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)


class QuestionGenerator(Protocol):
    def generate(self, S: ItemSet, m: int, attempt: int) -> list[Question]: ...


class Answerer(Protocol):
    def split(self, S: ItemSet, q: Question) -> tuple[ItemSet, ItemSet]: ...


def _set_rng(seed: int, S: ItemSet, attempt: int = 0) -> np.random.Generator:
    """Per-set stream so g(S) does not depend on the order sets are visited."""
    words = []
    m = S.mask
    while True:
        words.append(m & 0xFFFFFFFF)
        m >>= 32
        if not m:
            break
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, attempt, S.width, *words])


def split_size(r: float, n: int) -> int:
    """round-half-up(r * n) clamped to [1, n - 1]."""
    k = int(np.floor(r * n + 0.5))
    return min(max(k, 1), n - 1)


def random_split_g(
    S: ItemSet, r: float, m: int, rng: np.random.Generator, bank: QuestionBank
) -> "CandidateSet":
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if len(S) < 2:
        raise ValueError("need at least two live items")
    members = np.fromiter(S, dtype=np.int64)
    k = split_size(r, len(members))
    # m independent uniform k-subsets: the k smallest of iid uniform keys per row
    picks = members[np.argsort(rng.random((m, len(members))), axis=1)[:, :k]]
    qs = []
    for row in picks:
        yes = ItemSet(sum(1 << int(i) for i in row), S.width)
        qs.append(bank.intern(yes))
    return CandidateSet(tuple(qs), "synthetic")


@dataclass(frozen=True)
class FeatureTable:
    values: np.ndarray  # (n_items, k) in [0, 1]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("feature table must be (n_items, k>=1)")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("features must lie in [0, 1]")

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @classmethod
    def random(cls, n: int, k: int, seed: int) -> FeatureTable:
        return cls(np.random.default_rng(seed).random((n, k)))


def feature_split_g(
    S: ItemSet, features: FeatureTable, r: float, m: int, rng: np.random.Generator, bank: QuestionBank
) -> "CandidateSet":
    if len(S) < 2:
        raise ValueError("need at least two live items")
    members = np.fromiter(S, dtype=np.int64)
    k = split_size(r, len(members))
    qs = []
    for _ in range(m):
        j = int(rng.integers(features.k))
        vals = features.values[members, j]
        # descending by feature, ties by ascending item index
        order = np.lexsort((members, -vals))
        top = members[order[:k]]
        yes = ItemSet(sum(1 << int(i) for i in top), S.width)
        qs.append(bank.intern(yes))
    return CandidateSet(tuple(qs), "synthetic")


def qinf_g(S: ItemSet, target_size: int, bank: QuestionBank | None = None) -> Question:
    """Question from the unrestricted family: yes-set = first ``target_size`` live items."""
    if not 1 <= target_size <= len(S) - 1:
        raise ValueError(f"target size {target_size} outside [1, {len(S) - 1}]")
    yes = S.first(target_size)
    if bank is None:
        return Question(-1, yes)
    return bank.intern(yes)


def two_items_shortcut(S: ItemSet, bank: QuestionBank, names: Sequence[str] | None = None) -> CandidateSet:
    """Identity questions "Is x the correct item?" for the two remaining items."""
    if len(S) != 2:
        raise ValueError("identity shortcut needs exactly two live items")
    qs = []
    for i in S:
        label = names[i] if names is not None else f"item {i}"
        q = bank.intern(ItemSet(1 << i, S.width), f"Is {label} the correct item?")
        bank.identity.add(q.id)
        qs.append(q)
    return CandidateSet(tuple(qs), "identity-shortcut")


class RandomSplitGenerator:
    def __init__(self, bank: QuestionBank, r: float, seed: int):
        self.bank, self.r, self.seed = bank, r, seed

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        return list(random_split_g(S, self.r, m, _set_rng(self.seed, S, attempt), self.bank))


class FeatureSplitGenerator:
    def __init__(self, bank: QuestionBank, features: FeatureTable, r: float, seed: int):
        self.bank, self.features, self.r, self.seed = bank, features, r, seed

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        cs = feature_split_g(S, self.features, self.r, m, _set_rng(self.seed, S, attempt), self.bank)
        return list(cs)


class QInfGenerator:
    """Even splits from the unrestricted family (one candidate per call)."""

    def __init__(self, bank: QuestionBank):
        self.bank = bank

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        return [qinf_g(S, len(S) // 2, self.bank)]


class FixedQuestions:
    """Every question in a fixed pool is offered at every set (plain SLS)."""

    def __init__(self, questions: Iterable[Question]):
        self.questions = list(questions)

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        return list(self.questions)


class FunctionGenerator:
    def __init__(self, fn: Callable[[ItemSet], Iterable[Question]]):
        self.fn = fn

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        return list(self.fn(S))


class YesSetAnswerer:
    """f(q, s) read off the question's yes-set."""

    def split(self, S: ItemSet, q: Question) -> tuple[ItemSet, ItemSet]:
        yes = S & q.yes_set
        return yes, S - yes


class OracleCache:
    """First-writer-wins store of candidate sets and splits keyed by live set.

    In memory a live set is keyed by its bit mask, which is already
    independent of listing order; the file format uses sorted item indices.
    Reads are lock-free; writes are serialised and a conflicting rewrite is
    fatal.
    """

    def __init__(self) -> None:
        self.candidates: dict[int, CandidateSet] = {}
        self.splits: dict[tuple[int, int], tuple[ItemSet, ItemSet]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def lookup_candidates(self, S: ItemSet) -> CandidateSet | None:
        cs = self.candidates.get(S.mask)
        if cs is None:
            self.misses += 1
        else:
            self.hits += 1
        return cs

    def store_candidates(self, S: ItemSet, cs: CandidateSet) -> CandidateSet:
        key = S.mask
        with self._lock:
            old = self.candidates.get(key)
            if old is not None:
                if [q.yes_set for q in old] != [q.yes_set for q in cs] or old.source != cs.source:
                    raise CacheConflictError(f"candidates for {S.key()} rewritten")
                return old
            self.candidates[key] = cs
            return cs

    def lookup_split(self, S: ItemSet, q: Question):
        return self.splits.get((S.mask, q.id))

    def store_split(self, S: ItemSet, q: Question, value: tuple[ItemSet, ItemSet]):
        yes, no = value
        if (yes | no) != S or (yes & no):
            raise InconsistentSplitError(f"split of question {q.id} does not partition {S!r}")
        key = (S.mask, q.id)
        with self._lock:
            old = self.splits.get(key)
            if old is not None:
                if old != value:
                    raise CacheConflictError(f"split of {S.key()} on question {q.id} rewritten")
                return old
            self.splits[key] = value
            return value

    def save(self, path: str | Path) -> None:
        def idx(mask: int) -> list[int]:
            return [i for i in range(mask.bit_length()) if (mask >> i) & 1]

        lines = []
        for mask in sorted(self.candidates, key=idx):
            cs = self.candidates[mask]
            qs = [{"id": q.id, "yes": list(q.yes_set), "text": q.text} for q in cs.questions]
            lines.append({"key": idx(mask), "q": None, "candidates": qs, "source": cs.source})
        for mask, qid in sorted(self.splits, key=lambda k: (idx(k[0]), k[1])):
            yes, no = self.splits[(mask, qid)]
            lines.append({"key": idx(mask), "q": qid, "split": {"yes": list(yes), "no": list(no)}})
        Path(path).write_text("".join(json.dumps(rec, sort_keys=True) + "\n" for rec in lines))

    @classmethod
    def load(cls, path: str | Path, width: int, bank: QuestionBank) -> OracleCache:
        """Read a cache file; question ids are re-interned into ``bank``."""
        cache = cls()
        id_map: dict[int, Question] = {}
        records = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]

        def iset(idx):
            return ItemSet(sum(1 << i for i in idx), width)

        for rec in records:
            if rec["q"] is None:
                qs = []
                for qr in rec["candidates"]:
                    q = bank.intern(iset(qr["yes"]), qr["text"])
                    id_map[qr["id"]] = q
                    qs.append(q)
                cache.store_candidates(iset(rec["key"]), CandidateSet(tuple(qs), rec["source"]))
        for rec in records:
            if rec["q"] is not None:
                S = iset(rec["key"])
                q = id_map.get(rec["q"]) or bank[rec["q"]]
                sp = rec["split"]
                cache.store_split(S, q, (iset(sp["yes"]), iset(sp["no"])))
        return cache


class GameOracle:
    """g and f behind one cache: what every policy queries.

    ``candidates`` enforces progress (resampling up to ``max_resamples``
    times), canonicalises duplicate splits and applies the two-item identity
    shortcut.  ``split`` returns cached splits so play-time answers always
    match what simulation saw.
    """

    def __init__(
        self,
        domain: ItemDomain,
        generator: QuestionGenerator,
        bank: QuestionBank,
        answerer: Answerer | None = None,
        cache: OracleCache | None = None,
        m: int = 3,
        strict: bool = True,
        max_resamples: int = 5,
        injected: dict[ItemSet, Sequence[Question]] | None = None,
        source: str = "synthetic",
    ):
        self.domain = domain
        self.generator = generator
        self.bank = bank
        self.answerer = answerer or YesSetAnswerer()
        self.cache = cache if cache is not None else OracleCache()
        self.m = m
        self.strict = strict
        self.max_resamples = max_resamples
        self.injected = dict(injected or {})
        self.source = source
        self.generator_calls = 0
        self._expansions: dict[tuple[int, bool], tuple] = {}

    def candidates(self, S: ItemSet, shortcut: bool = True) -> CandidateSet:
        if shortcut and len(S) == 2:
            return two_items_shortcut(S, self.bank, self.domain.names)
        cs = self.cache.lookup_candidates(S)
        if cs is not None:
            return cs
        prefix = list(self.injected.get(S, ()))
        for attempt in range(self.max_resamples + 1):
            self.generator_calls += 1
            raw = self.generator.generate(S, self.m, attempt)
            qs = canonical_actions(S, prefix + raw[: self.m], strict=self.strict)
            if any(is_progressing(S, q) for q in qs):
                break
        else:
            raise NoProgressError(f"generator gave no progressing question at {S!r}")
        source = "injected" if prefix else self.source
        return self.cache.store_candidates(S, CandidateSet(tuple(qs), source))

    def split(self, S: ItemSet, q: Question) -> tuple[ItemSet, ItemSet]:
        cached = self.cache.lookup_split(S, q)
        if cached is not None:
            return cached
        if q.id in self.bank.identity:
            yes = S & q.yes_set
            value = (yes, S - yes)
        else:
            value = self.answerer.split(S, q)
        return self.cache.store_split(S, q, value)

    def expand(self, S: ItemSet, shortcut: bool = True) -> tuple[CandidateSet, tuple]:
        """Candidates at S and their non-empty outcomes ``(q_index, answer, child_set)``.

        Both parts come from the first-writer-wins cache, so the result is
        memoised.
        """
        key = (S.mask, shortcut and len(S) == 2)
        hit = self._expansions.get(key)
        if hit is not None:
            return hit
        cs = self.candidates(S, shortcut=shortcut)
        outcomes = []
        for qi, q in enumerate(cs.questions):
            yes, no = self.split(S, q)
            if yes:
                outcomes.append((qi, 1, yes))
            if no:
                outcomes.append((qi, 0, no))
        hit = (cs, tuple(outcomes))
        self._expansions[key] = hit
        return hit

    def answer(self, S: ItemSet, q: Question, s_star: int) -> int:
        yes, no = self.split(S, q)
        if s_star in yes:
            return 1
        if s_star in no:
            return 0
        raise InconsistentSplitError(f"item {s_star} not in live set {S!r}")
