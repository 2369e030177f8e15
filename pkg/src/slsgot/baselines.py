"""Comparison policies and exact oracles.

UoT-style information-gain search, even splits, uniform random choice,
backward-induction best response to a known prior, and the exponential
minimum-isolation search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ItemSet, Question, QuestionBank, VariantConfig, is_progressing, split
from .oracles import GameOracle, qinf_g
from .search import Plan, SimulationTree, simulate

_TIE = 1e-12


def _log2(k: int) -> float:
    return math.log2(k) if k > 1 else 0.0


# ---------------------------------------------------------------- UoT


def _uot_value(sim: SimulationTree, nid: int) -> tuple[float, int]:
    """Best accumulated expected entropy reduction below ``nid`` and the maximising candidate."""
    node = sim.nodes[nid]
    if not node.candidates:
        return 0.0, -1
    n = len(node.S)
    h = _log2(n)
    best, best_q = -math.inf, -1
    for qi in range(len(node.candidates)):
        total = 0.0
        gain = h
        for ans in (1, 0):
            child = node.children.get((qi, ans))
            if child is None:
                continue
            c = sim.nodes[child]
            p = len(c.S) / n
            gain -= p * _log2(len(c.S))
            total += p * _uot_value(sim, child)[0]
        val = gain + total
        if val > best + _TIE:
            best, best_q = val, qi
    return best, best_q


def uot_step(sim: SimulationTree) -> Question:
    """Deterministic expectimax over depth-d expected entropy reduction.

    Outcome probabilities assume every live item is equally likely; ties go to
    the lowest candidate index.
    """
    _, qi = _uot_value(sim, 0)
    return sim.root.candidates[qi]


def uot_index(sim: SimulationTree) -> int:
    return _uot_value(sim, 0)[1]


def even_split_step(S: ItemSet, bank: QuestionBank | None = None) -> Question | None:
    """Question splitting S into floor/ceil halves; None once S is a singleton."""
    if len(S) < 2:
        return None
    return qinf_g(S, len(S) // 2, bank)


def random_choice_step(candidates: Sequence[Question], rng: np.random.Generator, S: ItemSet | None = None) -> Question:
    pool = [q for q in candidates if S is None or is_progressing(S, q)]
    if not pool:
        raise ValueError("no progressing candidate")
    return pool[int(rng.integers(len(pool)))]


# ---------------------------------------------------------------- players
# Each player exposes ``decide(S, asked, plan)`` in the form play_game expects.


class _Player:
    deterministic = True
    name = "policy"

    def __init__(self, oracle: GameOracle, variant: VariantConfig):
        self.oracle = oracle
        self.domain = oracle.domain
        self.variant = variant

    def play(self, s_star: int, rng: np.random.Generator, S0: ItemSet | None = None):
        from .search import play_game

        return play_game(s_star, self, rng, S0)


class UotPlayer(_Player):
    name = "uot"

    def __init__(self, oracle: GameOracle, variant: VariantConfig, shortcut: bool = True):
        super().__init__(oracle, variant)
        self.shortcut = shortcut
        self._choice: dict[int, int] = {}

    def choose(self, S: ItemSet) -> tuple[SimulationTree, int]:
        sim = simulate(S, self.oracle, self.variant.d, shortcut=self.shortcut)
        return sim, uot_index(sim)

    def decide(self, S: ItemSet, asked: int, plan: Plan | None):
        cs = self.oracle.candidates(S, shortcut=self.shortcut)
        qi = self._choice.get(S.mask)
        if qi is None:
            _, qi = self.choose(S)
            self._choice[S.mask] = qi
        probs = np.zeros(len(cs))
        probs[qi] = 1.0
        return cs.questions, probs, None, cs.source == "identity-shortcut", False


class EvenSplitPlayer(_Player):
    """Halving questions from the unrestricted family; ignores the oracle's generator."""

    name = "even-split"

    def decide(self, S: ItemSet, asked: int, plan: Plan | None):
        q = even_split_step(S, self.oracle.bank)
        return (q,), np.ones(1), None, False, False


class RandomChoicePlayer(_Player):
    deterministic = False
    name = "random"

    def decide(self, S: ItemSet, asked: int, plan: Plan | None):
        cs = self.oracle.candidates(S)
        ok = np.array([is_progressing(S, q) for q in cs.questions], dtype=float)
        if not ok.any():
            raise ValueError("no progressing candidate")
        return cs.questions, ok / ok.sum(), None, cs.source == "identity-shortcut", False


# ---------------------------------------------------------------- best response


@dataclass
class BrPolicy:
    """Deterministic Questioner policy: live-set mask -> chosen question."""

    choice: dict[int, Question] = field(default_factory=dict)
    cost: float = 0.0

    def __getitem__(self, S: ItemSet) -> Question:
        return self.choice[S.mask]


class TreeBudgetExceeded(RuntimeError):
    pass


def backward_induction_br(
    S_root: ItemSet,
    prior: Sequence[float],
    oracle: GameOracle,
    *,
    depth: int | None = None,
    shortcut: bool = True,
    max_nodes: int = 10**6,
) -> BrPolicy:
    """Optimal deterministic policy against a known prior, by backward induction.

    C(S) = min over candidates of [P(S) + C(Y) + C(N)], so the returned cost is
    sum_s P(s) |H^s|.  With ``depth`` the recursion stops there and values the
    remaining items optimistically at P(S) log2 |S|.
    """
    p = np.asarray(prior, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("prior must be a probability vector")
    outside = [i for i in np.nonzero(p > 0)[0] if int(i) not in S_root]
    if outside:
        raise ValueError(f"prior puts mass on items {outside} outside the root set")
    policy = BrPolicy()
    memo: dict[tuple[int, int], float] = {}
    visited = [0]

    def mass(S: ItemSet) -> float:
        return float(sum(p[i] for i in S))

    def cost(S: ItemSet, level: int) -> float:
        if len(S) == 1:
            return 0.0
        if depth is not None and level >= depth:
            return mass(S) * _log2(len(S))
        key = (S.mask, level if depth is not None else 0)
        if key in memo:
            return memo[key]
        visited[0] += 1
        if visited[0] > max_nodes:
            raise TreeBudgetExceeded(f"best-response tree exceeds {max_nodes} nodes")
        cs = oracle.candidates(S, shortcut=shortcut)
        best, best_q = math.inf, None
        for q in cs.questions:
            yes, no = oracle.split(S, q)
            if not yes or not no:
                continue
            c = mass(S) + cost(yes, level + 1) + cost(no, level + 1)
            if c < best - _TIE:
                best, best_q = c, q
        if best_q is None:
            raise ValueError(f"no progressing candidate at {S!r}")
        memo[key] = best
        policy.choice.setdefault(S.mask, best_q)
        return best

    policy.cost = cost(S_root, 0)
    return policy


class BrPlayer(_Player):
    name = "br"

    def __init__(self, oracle: GameOracle, variant: VariantConfig, prior: Sequence[float], S0: ItemSet | None = None):
        super().__init__(oracle, variant)
        self.policy = backward_induction_br(S0 if S0 is not None else self.domain.full(), prior, oracle)

    def decide(self, S: ItemSet, asked: int, plan: Plan | None):
        q = self.policy[S]
        return (q,), np.ones(1), None, q.id in self.oracle.bank.identity, False


# ---------------------------------------------------------------- isolation


def min_questions_isolate(
    s_star: int,
    pool: Sequence[Question],
    S: ItemSet | None = None,
    max_pool: int = 20,
) -> int | None:
    """Fewest questions from ``pool`` whose answers for ``s_star`` leave only ``s_star``.

    Iterative deepening over subsets; exponential in the pool size.  Returns
    None when even the whole pool cannot isolate ``s_star``.
    """
    if len(pool) > max_pool:
        raise ValueError(f"pool of {len(pool)} questions exceeds cap {max_pool}")
    if S is None:
        width = pool[0].yes_set.width if pool else s_star + 1
        S = ItemSet((1 << width) - 1, width)
    if s_star not in S:
        raise ValueError(f"item {s_star} not in the live set")
    if len(S) == 1:
        return 0
    sides = []
    for q in pool:
        yes, no = split(S, q)
        sides.append(yes.mask if s_star in yes else no.mask)
    target = 1 << s_star
    if not sides or (S.mask & _and_all(sides)) != target:
        return None
    for k in range(1, len(sides) + 1):
        for combo in itertools.combinations(sides, k):
            if S.mask & _and_all(combo) == target:
                return k
    return None


def _and_all(masks) -> int:
    out = -1
    for m in masks:
        out &= m
    return out


__all__ = [
    "BrPlayer",
    "BrPolicy",
    "EvenSplitPlayer",
    "RandomChoicePlayer",
    "TreeBudgetExceeded",
    "UotPlayer",
    "backward_induction_br",
    "even_split_step",
    "min_questions_isolate",
    "random_choice_step",
    "uot_step",
]
