import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slsgot.baselines import (
    BrPlayer,
    EvenSplitPlayer,
    RandomChoicePlayer,
    TreeBudgetExceeded,
    UotPlayer,
    backward_induction_br,
    even_split_step,
    min_questions_isolate,
    random_choice_step,
    uot_index,
    uot_step,
)
from slsgot.core import ItemDomain, ItemSet, QuestionBank, VariantConfig
from slsgot.fixtures import example1
from slsgot.oracles import FixedQuestions, GameOracle, RandomSplitGenerator
from slsgot.search import GotPlayer, expected_costs, play_game, simulate

from reference import min_cover


def test_br_known_prior():
    fx = example1()
    S = fx.domain.full()
    pol = backward_induction_br(S, [0.8, 0.1, 0.1], fx.oracle)
    assert pol.cost == pytest.approx(1.2)
    assert pol[S] == fx.questions[0]
    assert backward_induction_br(S, [1 / 3] * 3, fx.oracle).cost == pytest.approx(5 / 3)
    point = backward_induction_br(S, [1.0, 0.0, 0.0], fx.oracle)
    assert point.cost == pytest.approx(1.0) and point[S] == fx.questions[0]


def test_br_validation_and_budget():
    fx = example1()
    S = fx.domain.full()
    with pytest.raises(ValueError):
        backward_induction_br(S, [0.5, 0.6, 0.0], fx.oracle)
    with pytest.raises(ValueError):
        backward_induction_br(fx.domain.subset([0, 1]), [0.0, 0.0, 1.0], fx.oracle)
    domain = ItemDomain.synthetic(12)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, 0), bank)
    with pytest.raises(TreeBudgetExceeded):
        backward_induction_br(domain.full(), np.full(12, 1 / 12), oracle, max_nodes=5)


def test_br_depth_limited_is_optimistic():
    domain = ItemDomain.synthetic(10)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, 4), bank)
    prior = np.full(10, 0.1)
    full = backward_induction_br(domain.full(), prior, oracle).cost
    shallow = backward_induction_br(domain.full(), prior, oracle, depth=1).cost
    assert shallow <= full + 1e-12


def test_uot_tie_goes_to_first_candidate():
    fx = example1()
    sim = simulate(fx.domain.full(), fx.oracle, 2)
    assert uot_step(sim) == fx.questions[0]


def _four_item_oracle(order, strict=True):
    domain = ItemDomain.synthetic(4)
    bank = QuestionBank()
    qs = {
        "3:1": bank.intern(domain.subset([0, 1, 2])),
        "2:2": bank.intern(domain.subset([0, 1])),
        "4:0": bank.intern(domain.full()),
    }
    pool = [qs[k] for k in order]
    return domain, qs, GameOracle(domain, FixedQuestions(pool), bank, m=len(pool), strict=strict)


def test_uot_prefers_even_split():
    domain, qs, oracle = _four_item_oracle(["3:1", "2:2"])
    assert uot_step(simulate(domain.full(), oracle, 1)) == qs["2:2"]
    domain, qs, oracle = _four_item_oracle(["4:0", "3:1"], strict=False)
    sim = simulate(domain.full(), oracle, 1)
    assert qs["4:0"] in sim.root.candidates
    assert uot_step(sim) == qs["3:1"]


def test_even_split():
    assert even_split_step(ItemSet(1, 4)) is None
    for n in (4, 8):
        domain = ItemDomain.synthetic(n)
        bank = QuestionBank()
        oracle = GameOracle(domain, FixedQuestions([]), bank)
        player = EvenSplitPlayer(oracle, VariantConfig())
        k = int(np.log2(n))
        assert all(play_game(s, player, np.random.default_rng(0)).questions == k for s in range(n))


@pytest.mark.parametrize("k", range(1, 8))
def test_even_split_power_of_two(k):
    n = 2**k
    domain = ItemDomain.synthetic(n)
    oracle = GameOracle(domain, FixedQuestions([]), QuestionBank())
    costs = expected_costs(EvenSplitPlayer(oracle, VariantConfig()))
    assert set(costs.values()) == {float(k)}


def test_random_choice():
    fx = example1()
    rng = np.random.default_rng(0)
    assert random_choice_step([fx.questions[1]], rng) == fx.questions[1]
    counts = np.zeros(3)
    for _ in range(1000):
        counts[random_choice_step(fx.questions, rng).id] += 1
    assert np.all(np.abs(counts / 1000 - 1 / 3) < 0.05)
    full_q = fx.bank.intern(fx.domain.full())
    S = fx.domain.full()
    assert all(random_choice_step([full_q, fx.questions[2]], rng, S) == fx.questions[2] for _ in range(20))
    with pytest.raises(ValueError):
        random_choice_step([full_q], rng, S)


def test_isolator_examples():
    fx = example1()
    q1, q2, q3 = fx.questions
    assert min_questions_isolate(1, [q1, q2, q3]) == 1
    assert min_questions_isolate(2, [q1, q2]) == 2
    assert min_questions_isolate(0, [q1], S=fx.domain.subset([0])) == 0
    assert min_questions_isolate(2, [q1]) is None
    with pytest.raises(ValueError):
        min_questions_isolate(0, [q1] * 21)


@settings(max_examples=100)
@given(st.integers(min_value=2, max_value=10), st.data())
def test_isolator_matches_set_cover(n, data):
    full = (1 << n) - 1
    bank = QuestionBank()
    masks = data.draw(st.lists(st.integers(min_value=0, max_value=full), min_size=1, max_size=12))
    pool = [bank.intern(ItemSet(m, n)) for m in masks]
    s_star = data.draw(st.integers(min_value=0, max_value=n - 1))
    assert min_questions_isolate(s_star, pool) == min_cover(s_star, full, masks)


def _random_oracle(n, seed, r=0.3):
    domain = ItemDomain.synthetic(n)
    bank = QuestionBank()
    return GameOracle(domain, RandomSplitGenerator(bank, r, seed), bank, m=3)


@settings(max_examples=20)
@given(st.integers(min_value=3, max_value=9), st.integers(min_value=0, max_value=999),
       st.integers(min_value=0, max_value=999))
def test_br_is_a_lower_bound(n, seed, prior_seed):
    oracle = _random_oracle(n, seed)
    prior = np.random.default_rng(prior_seed).dirichlet(np.ones(n))
    prior /= prior.sum()
    variant = VariantConfig(d=2, cfr_iterations=200)
    br = BrPlayer(oracle, variant, prior)
    bound = br.policy.cost
    for player in (br, UotPlayer(oracle, variant), RandomChoicePlayer(oracle, variant), GotPlayer(oracle, variant)):
        costs = expected_costs(player)
        assert bound <= sum(prior[s] * c for s, c in costs.items()) + 1e-9
    assert sum(prior[s] * c for s, c in expected_costs(br).items()) == pytest.approx(bound)


@settings(max_examples=30)
@given(st.integers(min_value=4, max_value=10), st.integers(min_value=0, max_value=999), st.data())
def test_uot_reordering(n, seed, data):
    oracle = _random_oracle(n, seed)
    domain = oracle.domain
    pool = list(oracle.candidates(domain.full(), shortcut=False))
    perm = data.draw(st.permutations(range(len(pool))))
    other = GameOracle(domain, FixedQuestions([pool[i] for i in perm]), oracle.bank, m=len(pool), cache=None)
    # share every deeper candidate set so only the root order differs
    for mask, cs in oracle.cache.candidates.items():
        if mask != domain.full().mask:
            other.cache.candidates[mask] = cs
    a = simulate(domain.full(), oracle, 1)
    b = simulate(domain.full(), other, 1)
    qa, qb = uot_step(a), uot_step(b)
    if qa != qb:
        # a tie: the pick in each order is the lowest-index maximiser
        assert pool.index(qa) < pool.index(qb) and perm.index(pool.index(qb)) < perm.index(pool.index(qa))
    assert uot_index(b) == [pool[i] for i in perm].index(qb)


def test_players_decide_shapes():
    fx = example1()
    variant = VariantConfig(d=2)
    S = fx.domain.full()
    for player in (UotPlayer(fx.oracle, variant), RandomChoicePlayer(fx.oracle, variant),
                   BrPlayer(fx.oracle, variant, [1 / 3] * 3), EvenSplitPlayer(fx.oracle, variant)):
        cands, probs, plan, _, replayed = player.decide(S, 0, None)
        assert len(cands) == len(probs) and abs(sum(probs) - 1) < 1e-12
        assert plan is None and not replayed
