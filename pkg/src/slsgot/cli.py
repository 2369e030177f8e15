"""Command-line entry point: solve, play, eval, br, fullgame, interactive."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .baselines import backward_induction_br
from .core import ItemDomain, VariantConfig
from .efg import build_full_game
from .fixtures import FIXTURES, load_fixture
from .harness import (
    ORACLES,
    POLICIES,
    GameSpec,
    add_prior_metrics,
    dirichlet_priors,
    eval_worst_case,
    fullgame_comparison,
    make_oracle,
    make_policy,
)
from .search import GotPlayer, play_game


def _game_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fixture", choices=sorted(FIXTURES))
    p.add_argument("--dataset", type=Path, help='JSON file {"items": [{"name", "weight"?}]}')
    p.add_argument("--oracle", choices=ORACLES, default="random-split")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--features", type=int, default=3)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="JSON VariantConfig overrides")


def _setup(args):
    """(oracle, variant) from a fixture, a dataset file or a synthetic game."""
    over = json.loads(args.config.read_text()) if args.config else {}
    if args.fixture:
        fx = load_fixture(args.fixture)
        oracle, variant = fx.oracle, fx.variant
    else:
        domain = ItemDomain.load(args.dataset) if args.dataset else None
        spec = GameSpec(n=args.n, oracle=args.oracle, r=args.r, m=args.m or 3, seed=args.seed, features=args.features)
        oracle = make_oracle(spec, domain)
        variant = VariantConfig(weighted=oracle.domain.weighted, m=spec.m, seed=args.seed)
    fields = {k: v for k, v in (("m", args.m), ("d", args.d), ("cfr_iterations", args.iterations)) if v is not None}
    variant = replace(variant, **{**over, **fields})
    oracle.m = variant.m
    return oracle, variant


def _item(domain: ItemDomain, token: str) -> int:
    if token in domain.index:
        return domain.index[token]
    try:
        i = int(token)
    except ValueError:
        raise SystemExit(f"unknown item {token!r}") from None
    if not 0 <= i < len(domain):
        raise SystemExit(f"item index {i} out of range")
    return i


def cmd_solve(args, out: TextIO) -> int:
    from .solver import cfr_solve

    oracle, variant = _setup(args)
    iters = args.iterations or 10_000
    efg = build_full_game(oracle.domain, oracle, variant)
    prof = cfr_solve(efg, iters, seed=variant.seed, plus=variant.cfr_plus)
    print(f"value {prof.value:.4f}", file=out)
    print(f"exploitability {prof.exploitability:.3e}", file=out)
    print("root " + " ".join(f"{p:.4f}" for p in prof.root_strategy()), file=out)
    if args.dump:
        args.dump.write_text(prof.questioner.dumps())
    return 0


def cmd_play(args, out: TextIO) -> int:
    oracle, variant = _setup(args)
    player = make_policy(args.policy, oracle, variant)
    s_star = _item(oracle.domain, args.item)
    tr = play_game(s_star, player, np.random.default_rng(args.seed))
    out.write(tr.jsonl())
    print(f"questions {tr.questions} cost {tr.cost:g}", file=out)
    return 0


def cmd_eval(args, out: TextIO) -> int:
    oracle, variant = _setup(args)
    player = make_policy(args.policy, oracle, variant)
    report = eval_worst_case(player, args.repeats, seed=args.seed)
    if args.dirichlet:
        rng = np.random.default_rng(args.seed)
        priors = dirichlet_priors(np.ones(len(report.items)), args.dirichlet_k, rng, args.dirichlet)
        add_prior_metrics(report, priors)
    report.config.update({"oracle": args.oracle, "r": args.r, "n": len(oracle.domain)})
    path = args.out or Path(f"eval_{args.policy}_{args.oracle}_seed{args.seed}.json")
    report.save(path)
    if args.csv:
        report.save(args.csv)
    print(f"L_worst {report.l_worst:.4f}", file=out)
    if report.weighted_worst is not None:
        print(f"weighted_worst {report.weighted_worst:.4f}", file=out)
    print(f"report {path}", file=out)
    return 0


def cmd_br(args, out: TextIO) -> int:
    oracle, variant = _setup(args)
    prior = [float(x) for x in args.prior.split(",")]
    if len(prior) != len(oracle.domain):
        raise SystemExit(f"prior has {len(prior)} entries for {len(oracle.domain)} items")
    S0 = oracle.domain.full()
    pol = backward_induction_br(S0, prior, oracle, depth=args.depth)
    q = pol[S0]
    print(f"{pol.cost:.4f}", file=out)
    print(f"first question q{q.id + 1}" + (f" {q.text!r}" if q.text else ""), file=out)
    return 0


def cmd_fullgame(args, out: TextIO) -> int:
    spec = GameSpec(n=args.n, oracle=args.oracle, r=args.r, m=args.m or 2, seed=args.seed)
    row = fullgame_comparison(spec, args.iterations or 10_000)
    print(json.dumps(asdict(row), sort_keys=True), file=out)
    return 0


def _describe(q, domain: ItemDomain, S) -> str:
    if q.text:
        return q.text
    yes = [domain.names[i] for i in S if i in q.yes_set]
    return f"Is it one of {yes}?"


def cmd_interactive(args, out: TextIO, inp: TextIO | None = None) -> int:
    """A human answers; answers steer this play only and never enter the shared cache."""
    inp = inp or sys.stdin
    oracle, variant = _setup(args)
    player = GotPlayer(oracle, variant)
    rng = np.random.default_rng(args.seed)
    domain = oracle.domain
    S, asked = domain.full(), 0
    while len(S) > 1:
        cands, probs, _, _, _ = player.decide(S, asked, None)
        cdf = np.cumsum(probs)
        q = cands[min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cands) - 1)]
        while True:
            print(f"Q{asked + 1}: {_describe(q, domain, S)} [y/n]", file=out, flush=True)
            line = inp.readline()
            if not line:
                print("aborted", file=out)
                return 1
            reply = line.strip().lower()
            if reply in ("y", "yes", "n", "no"):
                break
        yes = S & q.yes_set
        S = yes if reply.startswith("y") else S - yes
        asked += 1
    (s,) = S
    print(f"It is {domain.names[s]} ({asked} questions)", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slsgot", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="CFR on a full game")
    _game_args(p)
    p.add_argument("--dump", type=Path, help="write the Questioner strategy as JSON")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("play", help="one transcript for a chosen item")
    _game_args(p)
    p.add_argument("--policy", choices=POLICIES, default="got")
    p.add_argument("--item", required=True, help="item name or index")
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("eval", help="worst-case evaluation report")
    _game_args(p)
    p.add_argument("--policy", choices=POLICIES, default="got")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.add_argument("--dirichlet", type=int, default=0, help="number of Dirichlet priors for L_avg")
    p.add_argument("--dirichlet-k", type=float, default=1.0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("br", help="backward-induction best response to a prior")
    _game_args(p)
    p.add_argument("--prior", required=True, help="comma-separated probabilities")
    p.add_argument("--depth", type=int, default=None)
    p.set_defaults(fn=cmd_br)

    p = sub.add_parser("fullgame", help="full-depth GoT / UoT against the full-game value")
    _game_args(p)
    p.set_defaults(fn=cmd_fullgame, n=6)

    p = sub.add_parser("interactive", help="answer GoT's questions at the terminal")
    _game_args(p)
    p.set_defaults(fn=cmd_interactive)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args, out or sys.stdout)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
