"""Evaluation: worst-case and average-case lengths, priors, entropies and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import BrPlayer, EvenSplitPlayer, RandomChoicePlayer, UotPlayer
from .core import ItemDomain, ItemSet, QuestionBank, VariantConfig
from .efg import build_full_game
from .oracles import FeatureSplitGenerator, FeatureTable, GameOracle, OracleCache, QInfGenerator, RandomSplitGenerator
from .search import GotPlayer, PlayTranscript, StepRecord, expected_costs, play_game
from .solver import cfr_solve

SCHEMA = "slsgot.eval/1"
POLICIES = ("got", "uot", "even-split", "random", "br")
DIRICHLET_SAMPLES = 50
ADVERSARIAL_SAMPLES = 100
ORACLES = ("random-split", "feature-split", "qinf")


@dataclass
class EvalReport:
    policy: str
    items: list[str]
    per_item_means: list[float]
    l_worst: float
    repeats: int
    seed: int | None = None
    weights: list[float] | None = None
    weighted_worst: float | None = None
    l_avg: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    entropies: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    n_plays: int = 0
    schema: str = SCHEMA

    def to_json(self) -> dict:
        return _rounded(asdict(self))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "weight", "mean_length"])
        weights = self.weights or [1.0] * len(self.items)
        for name, wt, mean in zip(self.items, weights, self.per_item_means):
            w.writerow([name, f"{wt:g}", f"{mean:.6f}"])
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_csv() if path.suffix == ".csv" else self.dumps())


def _rounded(obj):
    # fixed precision keeps reports byte-stable across platforms
    if isinstance(obj, float):
        return round(obj, 10)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


# ---------------------------------------------------------------- metrics


def strategy_entropy(steps: Sequence[StepRecord]) -> list[float]:
    """Base-2 entropy of each recorded root strategy, skipping two-item identity steps."""
    out = []
    for st in steps:
        if st.shortcut:
            continue
        out.append(float(-sum(p * math.log2(p) for p in st.strategy if p > 0)))
    return out


def kl_from_uniform(prior: Sequence[float]) -> float:
    p = np.asarray(prior, dtype=float)
    n = len(p)
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] * n)))


def sample_dirichlet_prior(counts: Sequence[float], k: float, rng: np.random.Generator) -> np.ndarray:
    c = np.asarray(counts, dtype=float)
    if k <= 0 or np.any(c <= 0):
        raise ValueError("need k > 0 and positive counts")
    p = rng.dirichlet(k * c)
    return p / p.sum()


def dirichlet_priors(
    counts: Sequence[float], k: float, rng: np.random.Generator, samples: int = DIRICHLET_SAMPLES
) -> list[np.ndarray]:
    return [sample_dirichlet_prior(counts, k, rng) for _ in range(samples)]


def adversarial_priors(
    n: int, k: float, alpha0: float, rng: np.random.Generator, index: int = 0, samples: int = ADVERSARIAL_SAMPLES
) -> list[np.ndarray]:
    """Dir(k*alpha) with alpha = 1 everywhere except ``alpha0`` at ``index``: mass piles onto one item."""
    alpha = np.ones(n)
    alpha[index] = alpha0
    return dirichlet_priors(alpha, k, rng, samples)


def weighted_worst(means: Sequence[float], weights: Sequence[float]) -> float:
    return float(max(w * m for w, m in zip(weights, means)))


def eval_average_case(prior: Sequence[float], means: Sequence[float]) -> float:
    """L_avg = sum_s P(s) * mean length of s."""
    p = np.asarray(prior, dtype=float)
    m = np.asarray(means, dtype=float)
    if p.shape != m.shape:
        raise ValueError("prior support does not match the domain")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("prior must be a probability vector")
    return float(p @ m)


def play_all(policy, repeats: int, rng: np.random.Generator, S0: ItemSet | None = None) -> dict[int, list[PlayTranscript]]:
    S0 = S0 if S0 is not None else policy.domain.full()
    return {s: [play_game(s, policy, rng, S0) for _ in range(repeats)] for s in S0}


def eval_worst_case(
    policy,
    repeats: int | None = None,
    rng: np.random.Generator | None = None,
    S0: ItemSet | None = None,
    seed: int | None = None,
    keep: dict | None = None,
) -> EvalReport:
    """Play every item ``repeats`` times; L_worst is the largest per-item mean length.

    ``keep``, when given, receives the transcripts keyed by item.
    """
    if repeats is None:
        repeats = 1 if getattr(policy, "deterministic", False) else 10
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    domain: ItemDomain = policy.domain
    plays = play_all(policy, repeats, rng, S0)
    if keep is not None:
        keep.update(plays)
    items = sorted(plays)
    means = [float(np.mean([t.questions for t in plays[s]])) for s in items]
    entropies = [h for s in items for t in plays[s] for h in strategy_entropy(t.steps)]
    weights = [domain.weights[s] for s in items] if domain.weighted else None
    return EvalReport(
        policy=getattr(policy, "name", type(policy).__name__),
        items=[domain.names[s] for s in items],
        per_item_means=means,
        l_worst=max(means),
        repeats=repeats,
        seed=seed,
        weights=weights,
        weighted_worst=weighted_worst(means, weights) if weights else None,
        entropies=entropies,
        config=asdict(policy.variant),
        n_plays=repeats * len(items),
    )


def eval_weighted_worst(policy, repeats: int | None = None, rng=None, S0=None) -> float:
    rep = eval_worst_case(policy, repeats, rng, S0)
    weights = rep.weights or [1.0] * len(rep.items)
    return weighted_worst(rep.per_item_means, weights)


def add_prior_metrics(report: EvalReport, priors: Sequence[Sequence[float]]) -> EvalReport:
    report.l_avg = [eval_average_case(p, report.per_item_means) for p in priors]
    report.kl = [kl_from_uniform(p) for p in priors]
    return report


# ---------------------------------------------------------------- factories


@dataclass(frozen=True)
class GameSpec:
    """A synthetic game: domain size, oracle kind and its parameters."""

    n: int = 64
    oracle: str = "random-split"
    r: float = 0.25
    m: int = 3
    seed: int = 0
    features: int = 3
    weights: tuple[float, ...] | None = None


def make_oracle(spec: GameSpec, domain: ItemDomain | None = None) -> GameOracle:
    if spec.oracle not in ORACLES:
        raise ValueError(f"unknown oracle {spec.oracle!r}; choose from {ORACLES}")
    if domain is None:
        domain = ItemDomain.synthetic(spec.n, spec.weights)
    bank = QuestionBank()
    if spec.oracle == "random-split":
        gen = RandomSplitGenerator(bank, spec.r, spec.seed)
    elif spec.oracle == "feature-split":
        gen = FeatureSplitGenerator(bank, FeatureTable.random(len(domain), spec.features, spec.seed), spec.r, spec.seed)
    else:
        gen = QInfGenerator(bank)
    return GameOracle(domain, gen, bank, cache=OracleCache(), m=spec.m)


def make_policy(name: str, oracle: GameOracle, variant: VariantConfig, prior: Sequence[float] | None = None):
    if name == "got":
        return GotPlayer(oracle, variant)
    if name == "uot":
        return UotPlayer(oracle, variant)
    if name == "even-split":
        return EvenSplitPlayer(oracle, variant)
    if name == "random":
        return RandomChoicePlayer(oracle, variant)
    if name == "br":
        if prior is None:
            prior = np.full(len(oracle.domain), 1.0 / len(oracle.domain))
        return BrPlayer(oracle, variant, prior)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICIES}")


# ---------------------------------------------------------------- full-depth comparison


@dataclass
class FullGameRow:
    n: int
    value: float
    exploitability: float
    got_worst: float
    uot_worst: float
    nodes: int


def fullgame_comparison(spec: GameSpec, iterations: int = 10_000) -> FullGameRow:
    """Full-game CFR value against GoT and UoT run with d equal to the game depth.

    GoT's worst case is computed exactly from its question probabilities.
    """
    oracle = make_oracle(spec)
    n = len(oracle.domain)
    variant = VariantConfig(m=spec.m, d=max(n - 1, 1), cfr_iterations=iterations, seed=spec.seed)
    efg = build_full_game(oracle.domain, oracle, variant)
    prof = cfr_solve(efg, iterations)
    got = GotPlayer(oracle, variant)
    got_worst = max(expected_costs(got).values())
    uot = UotPlayer(oracle, variant)
    uot_worst = max(play_game(s, uot, np.random.default_rng(0)).questions for s in range(n))
    return FullGameRow(n, prof.value, prof.exploitability, got_worst, float(uot_worst), efg.n_nodes)
