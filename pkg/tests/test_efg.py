import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slsgot.core import Item, ItemDomain, ItemSet, QuestionBank, VariantConfig
from slsgot.efg import (
    CHOOSER,
    DECISION,
    LEAF,
    NodeBudgetExceeded,
    NoProgressError,
    build_full_game,
    build_subgame,
    canonical_actions,
    leaf_value,
)
from slsgot.fixtures import example1, example2
from slsgot.oracles import FixedQuestions, GameOracle, RandomSplitGenerator
from slsgot.search import simulate
from slsgot.solver import cfr_solve, solve_sequence_form_lp

from reference import minimax_value, pure_policy_costs


def _full(fx):
    return build_full_game(fx.domain, fx.oracle, fx.variant)


def test_example1_tree_shape():
    efg = _full(example1())
    kinds = [n.kind for n in efg.nodes]
    assert kinds.count(CHOOSER) == 1 and efg.nodes[0].kind == CHOOSER
    assert len(efg.nodes[0].children) == 3
    assert kinds.count(DECISION) == 9 == efg.n_decision_nodes
    assert kinds.count(LEAF) == 15 == efg.n_leaves
    # one infoset per non-terminal history: the root and the three "yes" answers
    assert len(efg.infosets) == 4
    assert sorted(efg.leaf_payoffs) == [1.0] * 3 + [2.0] * 12
    assert efg.check_perfect_recall()


def test_example1_infoset_members():
    efg = _full(example1())
    root = efg.infosets[0]
    assert root.key == () and len(root.actions) == 3
    assert len(efg.members(0)) == 3
    for i in range(1, 4):
        info = efg.infosets[i]
        assert len(info.actions) == 2 and len(info.live) == 2
        assert len(efg.members(i)) == 2
        for nid in efg.members(i):
            assert efg.nodes[nid].item in info.live


def test_example2_root_restricted():
    efg = _full(example2())
    assert len(efg.infosets[0].actions) == 2


def test_single_item_domain():
    domain = ItemDomain(["only"])
    bank = QuestionBank()
    oracle = GameOracle(domain, FixedQuestions([]), bank)
    efg = build_full_game(domain, oracle)
    assert [n.kind for n in efg.nodes] == [CHOOSER, LEAF]
    assert efg.leaf_payoffs == [0.0]


def test_no_progress_raises():
    domain = ItemDomain.synthetic(3)
    bank = QuestionBank()
    useless = bank.intern(domain.full())
    oracle = GameOracle(domain, FixedQuestions([useless]), bank, strict=False, max_resamples=0)
    with pytest.raises(NoProgressError):
        build_full_game(domain, oracle, VariantConfig(strict=False))


def test_node_budget():
    domain = ItemDomain.synthetic(7)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, 1), bank, m=3)
    with pytest.raises(NodeBudgetExceeded):
        build_full_game(domain, oracle, node_budget=50)


def test_tree_dump_roundtrips_as_json():
    efg = _full(example1())
    data = json.loads(efg.dumps())
    assert len(data["nodes"]) == 25 and len(data["infosets"]) == 4
    assert data["infosets"][0]["key"] == "root"
    assert sum(1 for n in data["nodes"] if n["kind"] == "leaf") == 15


def test_leaf_value_examples():
    assert leaf_value(4, 1) == 3.0
    assert leaf_value(1, 2) == 2.0
    assert leaf_value(4, 1, offset=2) == 5.0
    assert leaf_value(2, 1, weights=[3.0, 2.0]) == 6.0
    assert leaf_value(2, 1, weights=[3.0, 2.0], offset=2) == 12.0


def test_gadget_after_q2_yes():
    # live {s1, s3} with candidates {q1, q3}, one level deep
    fx = example1()
    q1, _, q3 = fx.questions
    S = fx.domain.subset([0, 2])
    oracle = GameOracle(fx.domain, FixedQuestions([q1, q3]), fx.bank)
    sim = simulate(S, oracle, 1, shortcut=False)
    efg = build_subgame(S, sim, offset=1)
    assert len(efg.nodes[0].children) == 2
    assert len(efg.infosets) == 1 and len(efg.infosets[0].actions) == 2
    # both candidates isolate each item: one question before the root, one inside
    assert efg.leaf_payoffs == [2.0] * 4
    assert build_subgame(S, sim).leaf_payoffs == [1.0] * 4


def test_gadget_depth_two_values():
    # with the identity shortcut each two-item state costs one more question
    fx = example1()
    q1, _, q3 = fx.questions
    S = fx.domain.subset([0, 2])
    oracle = GameOracle(fx.domain, FixedQuestions([q1, q3]), fx.bank)
    sim = simulate(S, oracle, 3)
    assert sim.root.source == "identity-shortcut"
    efg = build_subgame(S, sim)
    assert cfr_solve(efg, 100).value == pytest.approx(1.0)


def test_singleton_subgame():
    fx = example1()
    S = fx.domain.subset([1])

    class OneNode:
        root_set = S
        nodes = [type("N", (), {"S": S, "depth": 0, "key": (), "candidates": ()})()]

    efg = build_subgame(S, OneNode())
    assert [n.kind for n in efg.nodes] == [CHOOSER, LEAF] and efg.leaf_payoffs == [0.0]
    with pytest.raises(ValueError):
        build_subgame(ItemSet(0, 3), OneNode())


def test_subgame_full_depth_matches_full_game_example2():
    fx = example2()
    full = _full(fx)
    S = fx.domain.full()
    sim = simulate(S, fx.oracle, 2, shortcut=False)
    sub = build_subgame(S, sim)
    assert solve_sequence_form_lp(sub)[0] == pytest.approx(solve_sequence_form_lp(full)[0])
    assert cfr_solve(sub, 10_000).value == pytest.approx(2.0, abs=1e-3)


def test_weighted_subgame_offsets_terminal_and_heuristic_leaves():
    domain = ItemDomain([Item("a", 3.0), Item("b", 2.0), Item("c", 1.0), Item("d", 1.0)])
    bank = QuestionBank()
    q = bank.intern(domain.subset([0, 1]))
    r = bank.intern(domain.subset([0]))
    oracle = GameOracle(domain, FixedQuestions([q, r]), bank, m=2)
    S = domain.full()
    sim = simulate(S, oracle, 1, shortcut=False)
    efg = build_subgame(S, sim, VariantConfig(weighted=True), weights=domain.weights, offset=2)
    pays = {}
    for n in efg.nodes:
        if n.kind == LEAF:
            pays.setdefault(n.item, set()).add(round(n.payoff, 9))
    # q splits {a,b}|{c,d}: max weight 3 gives 3*(2+1+1)=12, and 1*(2+1+1)=4
    # r isolates a: 3*(2+1)=9, and {b,c,d}: 2*(2+1+log2 3)
    assert pays[0] == {12.0, 9.0}
    assert pays[1] == {12.0, round(2 * (3 + math.log2(3)), 9)}
    assert pays[2] == {4.0, round(2 * (3 + math.log2(3)), 9)}


def test_canonical_actions_drop_duplicates_and_repeats():
    fx = example1()
    q1, q2, q3 = fx.questions
    S = fx.domain.subset([1, 2])
    dup = fx.bank.intern(fx.domain.subset([2]))
    assert canonical_actions(S, [q2, q3, dup], asked={q1.id}) == [q2, q3]
    assert canonical_actions(S, [q1, q2], asked=()) == [q2]  # q1 says yes to both


# ---- properties


@given(st.integers(min_value=3, max_value=6), st.integers(min_value=0, max_value=10_000),
       st.sampled_from([0.25, 0.34, 0.5]))
def test_full_game_matches_brute_force(n, seed, r):
    domain = ItemDomain.synthetic(n)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, r, seed), bank, m=2)
    efg = build_full_game(domain, oracle, VariantConfig(m=2))
    assert efg.check_perfect_recall()

    def actions_at(mask):
        cs = oracle.candidates(ItemSet(mask, n), shortcut=False)
        return [(q.id, q.yes_set.mask) for q in cs.questions]

    rows = pure_policy_costs(domain.full().mask, actions_at, domain.weights, False, n - 1)
    assert solve_sequence_form_lp(efg)[0] == pytest.approx(minimax_value(rows), abs=1e-7)


@given(st.integers(min_value=3, max_value=7), st.integers(min_value=0, max_value=10_000),
       st.integers(min_value=1, max_value=3))
def test_subgame_leaf_payoffs(n, seed, d):
    domain = ItemDomain.synthetic(n)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, seed), bank, m=3)
    sim = simulate(domain.full(), oracle, d)
    efg = build_subgame(domain.full(), sim)
    assert efg.check_perfect_recall()
    assert sim.nodes[0].S == domain.full()
    for node in sim.nodes:
        assert node.depth <= d
        if node.candidates:
            kids = {sim.nodes[c].S.mask for c in node.children.values()}
            expected = set()
            for q in node.candidates:
                yes, no = oracle.split(node.S, q)
                expected |= {m.mask for m in (yes, no) if m}
            assert kids == expected
    # payoffs: >= depth, equal iff terminal
    for node in sim.nodes:
        if node.candidates:
            continue
        v = leaf_value(len(node.S), node.depth)
        assert v >= node.depth
        assert (v == node.depth) == (len(node.S) == 1)
    assert np.all(np.array(efg.leaf_payoffs) >= 0)
