import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slsgot.core import ItemDomain, ItemSet, QuestionBank
from slsgot.efg import NoProgressError
from slsgot.fixtures import example1
from slsgot.oracles import (
    CacheConflictError,
    CandidateSet,
    FeatureSplitGenerator,
    FeatureTable,
    FixedQuestions,
    GameOracle,
    InconsistentSplitError,
    OracleCache,
    QInfGenerator,
    RandomSplitGenerator,
    feature_split_g,
    qinf_g,
    random_split_g,
    split_size,
    two_items_shortcut,
)


def test_split_size_rounding():
    assert split_size(0.5, 4) == 2
    assert split_size(0.25, 136) == 34
    assert split_size(0.25, 2) == 1  # 0.5 rounds up
    assert split_size(0.4, 3) == 1
    assert split_size(0.9, 3) == 2  # clamped to n - 1
    assert split_size(0.01, 64) == 1


def test_random_split_sizes_and_validation():
    bank = QuestionBank()
    S = ItemSet((1 << 64) - 1, 64)
    cs = random_split_g(S, 0.25, 5, np.random.default_rng(0), bank)
    assert len(cs) == 5 and all(len(q.yes_set) == 16 for q in cs)
    with pytest.raises(ValueError):
        random_split_g(S, 1.0, 3, np.random.default_rng(0), bank)
    with pytest.raises(ValueError):
        random_split_g(ItemSet(1, 64), 0.3, 3, np.random.default_rng(0), bank)


def test_generator_is_deterministic_per_set():
    S = ItemDomain.synthetic(20).full()
    a = RandomSplitGenerator(QuestionBank(), 0.3, 7).generate(S, 3)
    b = RandomSplitGenerator(QuestionBank(), 0.3, 7).generate(S, 3)
    c = RandomSplitGenerator(QuestionBank(), 0.3, 8).generate(S, 3)
    assert [q.yes_set for q in a] == [q.yes_set for q in b]
    assert [q.yes_set for q in a] != [q.yes_set for q in c]
    # resample attempts draw fresh subsets
    d = RandomSplitGenerator(QuestionBank(), 0.3, 7).generate(S, 3, attempt=1)
    assert [q.yes_set for q in a] != [q.yes_set for q in d]


def test_generation_independent_of_visit_order():
    domain = ItemDomain.synthetic(10)
    A, B = domain.subset(range(6)), domain.subset(range(4, 10))
    g1 = RandomSplitGenerator(QuestionBank(), 0.3, 3)
    g2 = RandomSplitGenerator(QuestionBank(), 0.3, 3)
    first = [q.yes_set for q in g1.generate(A, 3)] + [q.yes_set for q in g1.generate(B, 3)]
    second_b = [q.yes_set for q in g2.generate(B, 3)]
    second_a = [q.yes_set for q in g2.generate(A, 3)]
    assert first == second_a + second_b


def test_feature_split_ties_by_index():
    table = FeatureTable(np.array([[0.5], [0.9], [0.5], [0.5], [0.1]]))
    S = ItemSet(0b11111, 5)
    cs = feature_split_g(S, table, 0.4, 1, np.random.default_rng(0), QuestionBank())
    # top 2 by value: item 1, then the lowest-index item among the 0.5 ties
    assert sorted(cs.questions[0].yes_set) == [0, 1]
    cs = feature_split_g(S, table, 0.6, 1, np.random.default_rng(0), QuestionBank())
    assert sorted(cs.questions[0].yes_set) == [0, 1, 2]


def test_single_feature_candidates_dedup():
    domain = ItemDomain.synthetic(8)
    bank = QuestionBank()
    table = FeatureTable.random(8, 1, 0)
    oracle = GameOracle(domain, FeatureSplitGenerator(bank, table, 0.5, 0), bank, m=3)
    cs = oracle.candidates(domain.full())
    # one feature gives the same split three times
    assert len(cs) == 1
    with pytest.raises(ValueError):
        FeatureTable(np.array([[1.5]]))


def test_qinf():
    S = ItemSet(0b10110110, 8)
    q = qinf_g(S, 2)
    assert list(q.yes_set) == [1, 2]
    with pytest.raises(ValueError):
        qinf_g(S, 5)
    bank = QuestionBank()
    domain = ItemDomain.synthetic(8)
    oracle = GameOracle(domain, QInfGenerator(bank), bank, m=3)
    (only,) = oracle.candidates(domain.full()).questions
    assert len(only.yes_set) == 4


def test_identity_shortcut():
    fx = example1()
    S = fx.domain.subset([0, 2])
    cs = two_items_shortcut(S, fx.bank, fx.domain.names)
    assert cs.source == "identity-shortcut"
    assert [list(q.yes_set) for q in cs] == [[0], [2]]
    assert cs.questions[0].text == "Is Oppenheimer the correct item?"
    assert all(q.id in fx.bank.identity for q in cs)
    assert fx.oracle.candidates(S).source == "identity-shortcut"
    assert fx.oracle.candidates(S, shortcut=False).source == "synthetic"
    with pytest.raises(ValueError):
        two_items_shortcut(fx.domain.full(), fx.bank)


def test_candidate_set_validation():
    with pytest.raises(ValueError):
        CandidateSet(())
    fx = example1()
    with pytest.raises(ValueError):
        CandidateSet(tuple(fx.questions), "made-up")


def test_cache_conflict_and_consistency():
    fx = example1()
    q1, q2, _ = fx.questions
    S = fx.domain.full()
    cache = OracleCache()
    cache.store_candidates(S, CandidateSet((q1,)))
    assert cache.store_candidates(S, CandidateSet((q1,))).questions == (q1,)
    with pytest.raises(CacheConflictError):
        cache.store_candidates(S, CandidateSet((q2,)))
    good = (fx.domain.subset([1, 2]), fx.domain.subset([0]))
    cache.store_split(S, q1, good)
    with pytest.raises(CacheConflictError):
        cache.store_split(S, q1, (fx.domain.subset([2]), fx.domain.subset([0, 1])))
    with pytest.raises(InconsistentSplitError):
        cache.store_split(S, q2, (fx.domain.subset([1]), fx.domain.subset([0])))


def test_cache_roundtrip(tmp_path):
    domain = ItemDomain.synthetic(12)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, 5), bank)
    for node_set in (domain.full(), domain.subset([0, 3, 5, 7])):
        cs, _ = oracle.expand(node_set)
    path = tmp_path / "cache.jsonl"
    oracle.cache.save(path)
    text = path.read_text()
    for line in text.splitlines():
        rec = json.loads(line)
        assert rec["key"] == sorted(rec["key"])
    bank2 = QuestionBank()
    back = OracleCache.load(path, 12, bank2)
    assert set(back.candidates) == set(oracle.cache.candidates)
    for mask, cs in oracle.cache.candidates.items():
        assert [q.yes_set for q in back.candidates[mask]] == [q.yes_set for q in cs]
    assert len(back.splits) == len(oracle.cache.splits)
    # saving the reloaded cache reproduces the file
    back.save(tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_text() == text


def test_oracle_caches_generation():
    domain = ItemDomain.synthetic(16)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, 1), bank)
    a = oracle.candidates(domain.full())
    b = oracle.candidates(domain.full())
    assert a is b and oracle.generator_calls == 1


def test_no_progress_after_resamples():
    domain = ItemDomain.synthetic(3)
    bank = QuestionBank()
    useless = bank.intern(domain.full())
    oracle = GameOracle(domain, FixedQuestions([useless]), bank, max_resamples=2)
    with pytest.raises(NoProgressError):
        oracle.candidates(domain.full())
    assert oracle.generator_calls == 3


def test_injected_questions_come_first():
    fx = example1()
    q1, q2, q3 = fx.questions
    S = fx.domain.full()
    oracle = GameOracle(fx.domain, FixedQuestions([q1, q2]), fx.bank, injected={S: [q3]}, m=2)
    cs = oracle.candidates(S)
    assert cs.source == "injected" and cs.questions[0] == q3


def test_answer_outside_live_set():
    fx = example1()
    with pytest.raises(InconsistentSplitError):
        fx.oracle.answer(fx.domain.subset([0, 1]), fx.questions[0], 2)


# ---- properties


@given(st.integers(min_value=2, max_value=40), st.floats(min_value=0.01, max_value=0.99),
       st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=2**31))
def test_random_split_g_properties(n, r, m, seed):
    S = ItemDomain.synthetic(n).full()
    cs = random_split_g(S, r, m, np.random.default_rng(seed), QuestionBank())
    assert len(cs) == m
    for q in cs:
        assert q.yes_set <= S
        assert len(q.yes_set) == split_size(r, n)
        assert 1 <= len(q.yes_set) <= n - 1


@given(st.sets(st.integers(min_value=0, max_value=15), min_size=2), st.integers(min_value=0, max_value=999))
def test_candidates_make_progress(members, seed):
    domain = ItemDomain.synthetic(16)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, seed), bank)
    S = domain.subset(members)
    cs, outcomes = oracle.expand(S)
    yes_sets = [S & q.yes_set for q in cs]
    assert len(set(yes_sets)) == len(yes_sets)
    for q in cs:
        yes, no = oracle.split(S, q)
        assert yes and no and (yes | no) == S


@given(st.sets(st.integers(min_value=0, max_value=9), min_size=2), st.integers(min_value=0, max_value=99))
def test_cache_key_order_insensitive(members, seed):
    domain = ItemDomain.synthetic(10)
    bank = QuestionBank()
    oracle = GameOracle(domain, RandomSplitGenerator(bank, 0.3, seed), bank)
    a = oracle.candidates(domain.subset(sorted(members)), shortcut=False)
    b = oracle.candidates(domain.subset(sorted(members, reverse=True)), shortcut=False)
    assert a is b and oracle.generator_calls == 1
