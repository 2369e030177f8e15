"""Extensive-form game trees for SLS variants and depth-limited gadget subgames.

Every tree built here has the same shape: one Item Chooser node at the root
picking an item, then a tree of Questioner decisions.  Because the
Questioner's infoset I(H) holds exactly the states (s, H) with s in S(H), a
game is stored as its infoset table (history key, actions, live set, parent
sequence) plus a leaf table (item, parent sequence, payoff).  The explicit
node arena is derived from these on demand.  Payoffs are the Item Chooser's.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import ItemDomain, ItemSet, Question, VariantConfig, is_progressing

if TYPE_CHECKING:
    from .oracles import GameOracle
    from .search import SimulationTree

CHOOSER, DECISION, LEAF = "chooser", "decision", "leaf"

DEFAULT_NODE_BUDGET = 10**6


class NodeBudgetExceeded(RuntimeError):
    pass


class NoProgressError(RuntimeError):
    """The question generator offered nothing that splits the live set."""


def history_label(key: tuple[tuple[int, int], ...]) -> str:
    return ",".join(f"q{q}={a}" for q, a in key) or "root"


@dataclass
class Node:
    kind: str
    parent: int = -1
    item: int = -1  # chooser's root action on the path to this node
    infoset: int = -1
    children: list[int] = field(default_factory=list)
    payoff: float = 0.0


@dataclass
class Infoset:
    key: tuple[tuple[int, int], ...]
    actions: tuple[Question, ...]
    live: ItemSet
    parent_seq: int  # -1 for the empty sequence
    depth: int
    seq_start: int


class Efg:
    """Questioner infoset table plus leaf table; infosets are stored parents-first."""

    root = 0

    def __init__(self, items: Sequence[int]):
        self.items = tuple(items)
        self.item_pos = {s: j for j, s in enumerate(self.items)}
        self.infosets: list[Infoset] = []
        self._by_key: dict[tuple, int] = {}
        self.n_sequences = 0
        self._leaf_item: list[int] = []
        self._leaf_seq: list[int] = []
        self._leaf_pay: list[float] = []
        self._arrays: dict | None = None
        self._nodes: list[Node] | None = None

    # construction
    def add_infoset(self, key, actions, live: ItemSet, parent_seq: int, depth: int) -> Infoset:
        if key in self._by_key:
            raise ValueError(f"infoset {history_label(key)} added twice")
        info = Infoset(key, tuple(actions), live, parent_seq, depth, self.n_sequences)
        self._by_key[key] = len(self.infosets)
        self.infosets.append(info)
        self.n_sequences += len(info.actions)
        return info

    def add_leaf(self, item: int, parent_seq: int, payoff: float) -> None:
        self._leaf_item.append(self.item_pos[item])
        self._leaf_seq.append(parent_seq)
        self._leaf_pay.append(payoff)

    def infoset_index(self, key) -> int:
        return self._by_key[key]

    # views
    @property
    def n_leaves(self) -> int:
        return len(self._leaf_item)

    @property
    def n_decision_nodes(self) -> int:
        return sum(len(info.live) for info in self.infosets)

    @property
    def n_nodes(self) -> int:
        return 1 + self.n_decision_nodes + self.n_leaves

    @property
    def leaf_payoffs(self) -> list[float]:
        return list(self._leaf_pay)

    def arrays(self) -> dict:
        """Flat tables for the solver; the empty sequence lives in slot ``n_sequences``."""
        if self._arrays is None:
            n_seq = self.n_sequences
            parent = np.array([i.parent_seq for i in self.infosets], dtype=np.int64)
            parent[parent < 0] = n_seq
            leaf_seq = np.array(self._leaf_seq, dtype=np.int64)
            leaf_seq[leaf_seq < 0] = n_seq
            self._arrays = {
                "seq_start": np.array([i.seq_start for i in self.infosets], dtype=np.int64),
                "n_actions": np.array([len(i.actions) for i in self.infosets], dtype=np.int64),
                "parent_slot": parent,
                "leaf_item": np.array(self._leaf_item, dtype=np.int64),
                "leaf_slot": leaf_seq,
                "leaf_payoff": np.array(self._leaf_pay, dtype=np.float64),
            }
        return self._arrays

    @property
    def nodes(self) -> list[Node]:
        """Explicit node arena: chooser root, one decision node per (item, infoset), leaves."""
        if self._nodes is None:
            self._nodes = self._materialize()
        return self._nodes

    def _materialize(self) -> list[Node]:
        by_parent: dict[int, list[int]] = {}
        for i, info in enumerate(self.infosets):
            by_parent.setdefault(info.parent_seq, []).append(i)
        leaf_at: dict[tuple[int, int], float] = {}
        for j, seq, pay in zip(self._leaf_item, self._leaf_seq, self._leaf_pay):
            leaf_at[(seq, self.items[j])] = pay
        nodes = [Node(CHOOSER)]

        def place(parent: int, s: int, seq: int) -> int:
            if (seq, s) in leaf_at:
                nodes.append(Node(LEAF, parent=parent, item=s, payoff=leaf_at[(seq, s)]))
                return len(nodes) - 1
            for i in by_parent.get(seq, ()):
                info = self.infosets[i]
                if s in info.live:
                    nodes.append(Node(DECISION, parent=parent, item=s, infoset=i))
                    nid = len(nodes) - 1
                    for a in range(len(info.actions)):
                        nodes[nid].children.append(place(nid, s, info.seq_start + a))
                    return nid
            raise ValueError(f"item {s} has no continuation after sequence {seq}")

        for s in self.items:
            nodes[0].children.append(place(0, s, -1))
        return nodes

    def members(self, infoset: int) -> list[int]:
        return [nid for nid, n in enumerate(self.nodes) if n.kind == DECISION and n.infoset == infoset]

    def check_perfect_recall(self) -> bool:
        """Every infoset key extends its parent infoset's key by the parent action."""
        seq_owner = {}
        for i, info in enumerate(self.infosets):
            for a in range(len(info.actions)):
                seq_owner[info.seq_start + a] = (i, a)
        for i, info in enumerate(self.infosets):
            if info.parent_seq < 0:
                if info.key:
                    return False
                continue
            p, a = seq_owner[info.parent_seq]
            if p >= i:
                return False
            parent = self.infosets[p]
            n = len(parent.key)
            if info.key[:n] != parent.key or len(info.key) != n + 1:
                return False
            if info.key[n][0] != parent.actions[a].id or not info.live <= parent.live:
                return False
        for node in self.nodes:
            if node.kind == DECISION and node.item not in self.infosets[node.infoset].live:
                return False
        return True

    def to_json(self) -> dict:
        nodes = []
        for node in self.nodes:
            rec = {"kind": node.kind, "parent": node.parent, "children": node.children}
            if node.kind != CHOOSER:
                rec["item"] = node.item
            if node.kind == LEAF:
                rec["payoff"] = node.payoff
            if node.kind == DECISION:
                rec["infoset"] = node.infoset
            nodes.append(rec)
        infosets = [
            {
                "key": history_label(info.key),
                "actions": [q.id for q in info.actions],
                "live": list(info.live),
                "members": self.members(i),
            }
            for i, info in enumerate(self.infosets)
        ]
        return {"root": 0, "items": list(self.items), "nodes": nodes, "infosets": infosets}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def canonical_actions(S: ItemSet, questions: Sequence[Question], asked=(), strict: bool = True) -> list[Question]:
    """Drop repeats, duplicate splits at S and (strict mode) non-progressing questions."""
    seen: set[int] = set()
    out = []
    for q in questions:
        if q.id in asked:
            continue
        yes = S.mask & q.yes_set.mask
        if yes in seen:
            continue
        if strict and not is_progressing(S, q):
            continue
        seen.add(yes)
        out.append(q)
    return out


def build_full_game(
    domain: ItemDomain | ItemSet,
    oracle: "GameOracle",
    variant: VariantConfig | None = None,
    weights: Sequence[float] | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Efg:
    """The complete SLS(R)/WSLS(R) game; actions at I(H) come from g(S(H)).

    Leaves sit where one item remains or n-1 questions have been asked.
    """
    variant = variant or VariantConfig()
    S0 = domain.full() if isinstance(domain, ItemDomain) else domain
    if weights is None:
        weights = oracle.domain.weights if isinstance(domain, ItemSet) else domain.weights
    n = len(S0)
    efg = Efg(list(S0))
    count = [1]

    def actions(S: ItemSet, asked: frozenset[int]) -> list[Question]:
        raw = oracle.candidates(S, shortcut=False).questions
        acts = canonical_actions(S, raw, asked=asked, strict=variant.strict)
        if not any(is_progressing(S, q) for q in acts):
            raise NoProgressError(f"no progressing question at {S!r}")
        return acts

    def expand(S: ItemSet, key: tuple, asked: frozenset, parent_seq: int) -> None:
        hlen = len(key)
        if len(S) == 1 or hlen >= n - 1:
            for s in S:
                pay = weights[s] * hlen if variant.weighted else float(hlen)
                efg.add_leaf(s, parent_seq, pay)
            count[0] += len(S)
            return
        count[0] += len(S)
        if count[0] > node_budget:
            raise NodeBudgetExceeded(f"full game exceeds {node_budget} nodes")
        info = efg.add_infoset(key, actions(S, asked), S, parent_seq, hlen)
        for a, q in enumerate(info.actions):
            yes, no = oracle.split(S, q)
            for ans, child in ((1, yes), (0, no)):
                if child:
                    expand(child, key + ((q.id, ans),), asked | {q.id}, info.seq_start + a)

    expand(S0, (), frozenset(), -1)
    return efg


def leaf_value(
    size: int,
    questions: int,
    *,
    weights: Sequence[float] | None = None,
    offset: int = 0,
) -> float:
    """Value of a subgame leaf with ``size`` live items after ``questions`` subgame questions.

    ``offset`` counts the questions asked before the subgame root.
    Unweighted: offset + questions + log2(size).  Weighted (``weights`` of the
    live items): max weight * (offset + questions + log2(size)).
    """
    remaining = math.log2(size) if size > 1 else 0.0
    if weights is None:
        return offset + questions + remaining
    return max(weights) * (offset + questions + remaining)


def build_subgame(
    S_root: ItemSet,
    sim: "SimulationTree",
    variant: VariantConfig | None = None,
    weights: Sequence[float] | None = None,
    offset: int = 0,
) -> Efg:
    """Gadget game over a simulation tree: the Item Chooser re-chooses among S_root.

    Leaf values depend only on the leaf's live set, so no blueprint shift is
    needed.  Unweighted, ``offset`` adds the same constant to every leaf and
    leaves the equilibrium strategies unchanged.
    """
    if not S_root:
        raise ValueError("empty subgame root")
    if sim.root_set != S_root:
        raise ValueError("simulation tree is rooted elsewhere")
    variant = variant or VariantConfig()
    efg = Efg(list(S_root))
    parent_seq = {0: -1}
    for nid, node in enumerate(sim.nodes):
        pseq = parent_seq[nid]
        if node.candidates:
            info = efg.add_infoset(node.key, node.candidates, node.S, pseq, node.depth)
            for (a, _ans), child in node.children.items():
                parent_seq[child] = info.seq_start + a
            continue
        if variant.weighted:
            if len(node.S) == 1:
                (s,) = node.S
                efg.add_leaf(s, pseq, weights[s] * (offset + node.depth))
            else:
                val = leaf_value(len(node.S), node.depth, weights=[weights[s] for s in node.S], offset=offset)
                for s in node.S:
                    efg.add_leaf(s, pseq, val)
        else:
            val = leaf_value(len(node.S), node.depth, offset=offset)
            for s in node.S:
                efg.add_leaf(s, pseq, val)
    return efg
