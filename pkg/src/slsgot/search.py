"""Game-of-Thought: depth-limited simulation, gadget subgame, CFR, sampled question."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    History,
    ItemDomain,
    ItemSet,
    Question,
    VariantConfig,
    consistent_set,
    extend_history,
)
from .efg import build_subgame, history_label
from .oracles import GameOracle, InconsistentSplitError, two_items_shortcut
from .solver import EquilibriumProfile, cfr_solve

__all__ = [
    "GotPlayer",
    "PlayTranscript",
    "SimNode",
    "SimulationTree",
    "StepRecord",
    "got_step",
    "play_game",
    "simulate",
    "terminal_tree_shortcut",
    "two_items_shortcut",
]


class NonTerminationError(RuntimeError):
    pass


@dataclass(slots=True)
class SimNode:
    S: ItemSet
    depth: int
    key: tuple[tuple[int, int], ...]
    candidates: tuple[Question, ...] = ()
    children: dict[tuple[int, int], int] = field(default_factory=dict)
    source: str | None = None

    @property
    def terminal(self) -> bool:
        return len(self.S) == 1


@dataclass
class SimulationTree:
    root_set: ItemSet
    d: int
    nodes: list[SimNode]
    terminal: bool | None = None

    @property
    def root(self) -> SimNode:
        return self.nodes[0]

    def leaves(self) -> list[SimNode]:
        return [n for n in self.nodes if not n.candidates]

    def is_terminal(self) -> bool:
        """Every leaf identifies a single item, so the tree reaches the end of the game."""
        if self.terminal is None:
            self.terminal = all(n.terminal for n in self.leaves())
        return self.terminal

    def child(self, node_id: int, q_index: int, ans: int) -> int:
        return self.nodes[node_id].children[(q_index, ans)]


def simulate(S_root: ItemSet, oracle: GameOracle, d: int, shortcut: bool = True) -> SimulationTree:
    """Expand candidates and their splits breadth-first to depth ``d``."""
    if d < 1:
        raise ValueError("simulation depth must be >= 1")
    if len(S_root) < 2:
        raise ValueError("simulation needs at least two live items")
    nodes = [SimNode(S_root, 0, ())]
    frontier = [0]
    terminal = True
    while frontier:
        nxt = []
        for nid in frontier:
            node = nodes[nid]
            if len(node.S) == 1:
                continue
            if node.depth >= d:
                terminal = False
                continue
            cs, outcomes = oracle.expand(node.S, shortcut=shortcut)
            node.candidates = cs.questions
            node.source = cs.source
            for qi, ans, child_S in outcomes:
                nodes.append(SimNode(child_S, node.depth + 1, node.key + ((cs.questions[qi].id, ans),)))
                node.children[(qi, ans)] = len(nodes) - 1
                nxt.append(len(nodes) - 1)
        frontier = nxt
    return SimulationTree(S_root, d, nodes, terminal)


@dataclass
class Plan:
    """A solved subgame whose strategy is replayed until the game ends."""

    sim: SimulationTree
    profile: EquilibriumProfile
    node: int = 0

    def distribution(self) -> np.ndarray:
        return self.profile.questioner[self.sim.nodes[self.node].key]

    def advance(self, q_index: int, ans: int) -> "Plan":
        return Plan(self.sim, self.profile, self.sim.child(self.node, q_index, ans))


def terminal_tree_shortcut(sim: SimulationTree, profile: EquilibriumProfile) -> Plan | None:
    """Replay the solved strategy to the end of the game when the simulation covers it."""
    if not sim.is_terminal():
        return None
    return Plan(sim, profile)


@dataclass
class StepRecord:
    history_key: tuple[tuple[int, int], ...]
    live: int
    candidates: tuple[int, ...]
    strategy: tuple[float, ...]
    sampled_question: int
    answer: int
    shortcut: bool = False
    replayed: bool = False

    def to_json(self) -> dict:
        return {
            "history_key": history_label(self.history_key),
            "live": self.live,
            "candidates": list(self.candidates),
            "strategy": [round(float(p), 12) for p in self.strategy],
            "sampled_question": self.sampled_question,
            "answer": self.answer,
            "identity_shortcut": self.shortcut,
            "replayed": self.replayed,
        }


@dataclass
class PlayTranscript:
    s_star: int
    history: History
    steps: list[StepRecord]
    cost: float

    @property
    def questions(self) -> int:
        return len(self.history)

    def jsonl(self) -> str:
        return "".join(json.dumps(st.to_json(), sort_keys=True) + "\n" for st in self.steps)


def _realized_cost(domain: ItemDomain, s_star: int, n_questions: int, weighted: bool) -> float:
    return domain.items[s_star].weight * n_questions if weighted else float(n_questions)


class GotPlayer:
    """Plays GoT against a fixed oracle.

    Solved subgames are memoised by live set (and question count in the
    weighted variant, whose leaf values depend on it): the simulation tree at
    S is fully determined by the cached oracle, so re-solving would reproduce
    the same profile.
    """

    deterministic = False

    def __init__(
        self,
        oracle: GameOracle,
        variant: VariantConfig,
        shortcut: bool = True,
        memoize: bool = True,
    ):
        self.oracle = oracle
        self.domain = oracle.domain
        self.variant = variant
        self.use_shortcut = shortcut
        self.memoize = memoize
        self._solved: dict[tuple[int, int], tuple[SimulationTree, EquilibriumProfile]] = {}
        self.solves = 0

    @property
    def name(self) -> str:
        return "got"

    def solve(self, S: ItemSet, asked: int = 0) -> tuple[SimulationTree, EquilibriumProfile]:
        key = (S.mask, asked if self.variant.weighted else 0)
        hit = self._solved.get(key) if self.memoize else None
        if hit is not None:
            return hit
        sim = simulate(S, self.oracle, self.variant.d)
        # unweighted leaves would only shift by a constant, which the memo key ignores
        offset = asked if self.variant.weighted else 0
        efg = build_subgame(S, sim, self.variant, weights=self.domain.weights, offset=offset)
        profile = cfr_solve(efg, self.variant.cfr_iterations, seed=self.variant.seed, plus=self.variant.cfr_plus)
        self.solves += 1
        if self.memoize:
            self._solved[key] = (sim, profile)
        return sim, profile

    def decide(self, S: ItemSet, asked: int, plan: Plan | None):
        """Question distribution at the current state and the plan to carry forward."""
        if plan is not None:
            node = plan.sim.nodes[plan.node]
            return node.candidates, plan.distribution(), plan, node.source == "identity-shortcut", True
        sim, profile = self.solve(S, asked)
        new_plan = terminal_tree_shortcut(sim, profile) if self.use_shortcut else None
        return (
            sim.root.candidates,
            profile.root_strategy(),
            new_plan,
            sim.root.source == "identity-shortcut",
            False,
        )

    def play(self, s_star: int, rng: np.random.Generator, S0: ItemSet | None = None) -> PlayTranscript:
        return play_game(s_star, self, rng, S0)


def got_step(
    H_t: History,
    player: GotPlayer,
    rng: np.random.Generator,
    S0: ItemSet | None = None,
) -> tuple[Question, EquilibriumProfile]:
    """Simulate, build and solve the subgame at H_t, then sample the next question."""
    S = consistent_set(S0 if S0 is not None else player.domain, H_t)
    if len(S) < 2:
        raise ValueError("game already over")
    sim, profile = player.solve(S, len(H_t))
    probs = profile.root_strategy()
    qi = _sample(probs, rng)
    return sim.root.candidates[qi], profile


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(cdf) - 1)


def play_game(s_star: int, player, rng: np.random.Generator, S0: ItemSet | None = None) -> PlayTranscript:
    """Loop question selection until only ``s_star`` is consistent.

    Answers come from the oracle's cached splits, never from a fresh query.
    """
    domain = player.domain
    S = S0 if S0 is not None else domain.full()
    if s_star not in S:
        raise ValueError(f"item {s_star} not in the live set")
    H = History()
    steps: list[StepRecord] = []
    plan = None
    cap = len(S) - 1
    while len(S) > 1:
        if len(H) >= cap:
            raise NonTerminationError(f"more than {cap} questions for item {s_star}")
        cands, probs, plan, identity, replayed = player.decide(S, len(H), plan)
        qi = _sample(probs, rng)
        q = cands[qi]
        yes, no = player.oracle.split(S, q)
        if s_star in yes:
            a, S_next = 1, yes
        elif s_star in no:
            a, S_next = 0, no
        else:
            raise InconsistentSplitError(f"cached split at {S!r} lost item {s_star}")
        steps.append(
            StepRecord(H.key(), len(S), tuple(c.id for c in cands), tuple(probs), q.id, a, identity, replayed)
        )
        H = extend_history(H, q, a)
        S = S_next
        if plan is not None:
            plan = plan.advance(qi, a)
            if not plan.sim.nodes[plan.node].candidates:
                plan = None
    return PlayTranscript(s_star, H, steps, _realized_cost(domain, s_star, len(H), player.variant.weighted))


def expected_costs(player, S0: ItemSet | None = None, items: Sequence[int] | None = None) -> dict[int, float]:
    """Exact expected realised cost per item under a (possibly randomised) policy.

    Walks every branch of the policy that the item can reach, weighting by the
    policy's question probabilities instead of sampling.
    """
    domain = player.domain
    S0 = S0 if S0 is not None else domain.full()
    weighted = player.variant.weighted

    def walk(s: int, S: ItemSet, asked: int, plan) -> float:
        if len(S) == 1:
            return _realized_cost(domain, s, asked, weighted)
        cands, probs, plan_next, _, _ = player.decide(S, asked, plan)
        total = 0.0
        for qi, (q, p) in enumerate(zip(cands, probs)):
            if p <= 0:
                continue
            yes, no = player.oracle.split(S, q)
            a = 1 if s in yes else 0
            nxt = plan_next.advance(qi, a) if plan_next is not None else None
            if nxt is not None and not nxt.sim.nodes[nxt.node].candidates:
                nxt = None
            total += p * walk(s, yes if a else no, asked + 1, nxt)
        return total

    targets = list(items) if items is not None else list(S0)
    return {s: walk(s, S0, 0, None) for s in targets}


def worst_case(costs: dict[int, float]) -> float:
    return max(costs.values())


def root_entropy(probs: Sequence[float]) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0)
