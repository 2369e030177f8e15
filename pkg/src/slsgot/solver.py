"""Equilibrium computation for the chooser-then-questioner trees built in :mod:`efg`.

CFR runs on the Questioner's sequence form: the Item Chooser moves once at the
root, so counterfactual values of every Questioner sequence are a sparse
product of the chooser's mix with the leaf payoffs, and one iteration is a
few compiled passes over the infoset table.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import _kernels as _k
from .efg import DECISION, Efg, history_label


class BehavioralStrategy(dict):
    """infoset key -> probability vector over that infoset's actions."""

    def to_json(self) -> dict:
        return {history_label(k): [float(p) for p in v] for k, v in self.items()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass
class EquilibriumProfile:
    questioner: BehavioralStrategy
    chooser: np.ndarray
    value: float
    exploitability: float
    efg: Efg
    iterations: int = 0

    def root_strategy(self) -> np.ndarray:
        return self.questioner[()]


def _tables(arr: dict) -> tuple:
    return (arr["seq_start"], arr["n_actions"], arr["parent_slot"])


def _leaves(arr: dict) -> tuple:
    return (arr["leaf_item"], arr["leaf_slot"], arr["leaf_payoff"])


def _behavioral(efg: Efg, seq_weights: np.ndarray) -> BehavioralStrategy:
    strat = BehavioralStrategy()
    for info in efg.infosets:
        k = len(info.actions)
        w = seq_weights[info.seq_start : info.seq_start + k]
        tot = w.sum()
        strat[info.key] = w / tot if tot > 0 else np.full(k, 1.0 / k)
    return strat


def _sigma_from(efg: Efg, strategy: BehavioralStrategy) -> np.ndarray:
    sigma = np.empty(efg.n_sequences)
    for info in efg.infosets:
        sigma[info.seq_start : info.seq_start + len(info.actions)] = strategy[info.key]
    return sigma


def chooser_values(efg: Efg, strategy: BehavioralStrategy) -> np.ndarray:
    """Expected Item Chooser payoff for each root item against a Questioner strategy."""
    arr = efg.arrays()
    x = np.empty(efg.n_sequences + 1)
    _k.realization(_sigma_from(efg, strategy), *_tables(arr), x)
    u = np.empty(len(efg.items))
    _k.chooser_utilities(x, *_leaves(arr), u)
    return u


def _br_min(efg: Efg, chooser_mix) -> tuple[float, np.ndarray]:
    arr = efg.arrays()
    choice = np.empty(efg.n_sequences)
    y = np.asarray(chooser_mix, dtype=np.float64)
    value = _k.best_response_min(y, *_tables(arr), *_leaves(arr), choice)
    return float(value), choice


def best_response_value(efg: Efg, opponent_strategy, responder: str) -> float:
    """Exact best-response value (Item Chooser's payoff) by backward induction.

    ``responder="chooser"``: opponent_strategy is a BehavioralStrategy.
    ``responder="questioner"``: opponent_strategy is a mix over root items.
    """
    if responder == "chooser":
        return float(chooser_values(efg, opponent_strategy).max())
    if responder == "questioner":
        return _br_min(efg, opponent_strategy)[0]
    raise ValueError(f"unknown responder {responder!r}")


def best_response_policy(efg: Efg, chooser_mix) -> BehavioralStrategy:
    return _behavioral(efg, _br_min(efg, chooser_mix)[1])


def exploitability(efg: Efg, profile: EquilibriumProfile) -> float:
    hi = best_response_value(efg, profile.questioner, "chooser")
    lo = best_response_value(efg, profile.chooser, "questioner")
    return max(hi - lo, 0.0)


def cfr_solve(
    efg: Efg,
    iterations: int,
    seed: int = 0,
    plus: bool = False,
    callback=None,
    tol: float | None = None,
    check_every: int = 100,
) -> EquilibriumProfile:
    """Regret-matching CFR with linearly weighted regrets and averages, alternating updates.

    ``plus`` switches to CFR+ (regrets floored at zero).  The solve is
    deterministic; ``seed`` is accepted for interface stability only.
    With ``tol`` the run stops early once the average profile's
    exploitability is at most ``tol`` (checked every ``check_every``
    iterations); ``iterations`` stays the cap.  ``callback(t, profile)`` is
    called at each check.
    """
    del seed
    arr = efg.arrays()
    n_items = len(efg.items)
    q_regret = np.zeros(efg.n_sequences)
    c_regret = np.zeros(n_items)
    q_avg = np.zeros(efg.n_sequences)
    c_avg = np.zeros(n_items)
    step = check_every if (tol is not None or callback is not None) else iterations
    t = 0
    while t < iterations:
        n = min(step, iterations - t)
        _k.cfr_run(n, plus, *_tables(arr), *_leaves(arr), n_items, q_regret, c_regret, q_avg, c_avg, t)
        t += n
        if t < iterations:
            prof = _profile(efg, q_avg, c_avg, t)
            if callback is not None:
                callback(t, prof)
            if tol is not None and prof.exploitability <= tol:
                return prof
    prof = _profile(efg, q_avg, c_avg, t)
    if callback is not None:
        callback(t, prof)
    return prof


def _profile(efg: Efg, q_avg, c_avg, iterations) -> EquilibriumProfile:
    questioner = _behavioral(efg, q_avg)
    n = len(efg.items)
    chooser = c_avg / c_avg.sum() if c_avg.sum() > 0 else np.full(n, 1.0 / n)
    u = chooser_values(efg, questioner)
    value = float(chooser @ u)
    lo = _br_min(efg, chooser)[0]
    return EquilibriumProfile(questioner, chooser, value, max(float(u.max()) - lo, 0.0), efg, iterations)


def reduced_normal_form(efg: Efg, max_rows: int = 100_000):
    """Enumerate the Questioner's reduced pure policies.

    Returns ``(policies, matrix)`` where each policy maps infoset index to an
    action index and ``matrix[r, j]`` is the chooser payoff for item j.
    """
    children: dict[int, list[int]] = {}
    roots = []
    for i, info in enumerate(efg.infosets):
        if info.parent_seq < 0:
            roots.append(i)
        else:
            children.setdefault(info.parent_seq, []).append(i)

    def policies(iid: int) -> list[dict[int, int]]:
        info = efg.infosets[iid]
        out = []
        for a in range(len(info.actions)):
            subs = [policies(j) for j in children.get(info.seq_start + a, [])]
            for combo in itertools.product(*subs):
                pol = {iid: a}
                for part in combo:
                    pol.update(part)
                out.append(pol)
                if len(out) > max_rows:
                    raise OverflowError(f"more than {max_rows} reduced policies")
        return out

    root_sets = [policies(r) for r in roots]
    rows = []
    for combo in itertools.product(*root_sets):
        pol = {}
        for part in combo:
            pol.update(part)
        rows.append(pol)
        if len(rows) > max_rows:
            raise OverflowError(f"more than {max_rows} reduced policies")

    matrix = np.zeros((len(rows), len(efg.items)))
    for r, pol in enumerate(rows):
        for j, child in enumerate(efg.nodes[0].children):
            nid = child
            while efg.nodes[nid].kind == DECISION:
                nid = efg.nodes[nid].children[pol[efg.nodes[nid].infoset]]
            matrix[r, j] = efg.nodes[nid].payoff
    return rows, matrix


def solve_matrix_game(payoff_matrix, max_rows: int = 100_000):
    """Exact saddle point of a matrix game where rows minimise and columns maximise.

    Returns ``(row_mix, col_mix, value, duality_gap)``.
    """
    A = np.atleast_2d(np.asarray(payoff_matrix, dtype=float))
    n_rows, n_cols = A.shape
    if n_rows > max_rows:
        raise OverflowError(f"{n_rows} rows exceeds budget {max_rows}")
    # rows: min v  s.t.  A^T x <= v, sum x = 1
    c = np.zeros(n_rows + 1)
    c[-1] = 1.0
    res_x = linprog(
        c,
        A_ub=np.hstack([A.T, -np.ones((n_cols, 1))]),
        b_ub=np.zeros(n_cols),
        A_eq=np.hstack([np.ones((1, n_rows)), np.zeros((1, 1))]),
        b_eq=[1.0],
        bounds=[(0, None)] * n_rows + [(None, None)],
        method="highs",
    )
    # columns: max w  s.t.  A y >= w, sum y = 1
    res_y = linprog(
        np.r_[np.zeros(n_cols), -1.0],
        A_ub=np.hstack([-A, np.ones((n_rows, 1))]),
        b_ub=np.zeros(n_rows),
        A_eq=np.hstack([np.ones((1, n_cols)), np.zeros((1, 1))]),
        b_eq=[1.0],
        bounds=[(0, None)] * n_cols + [(None, None)],
        method="highs",
    )
    x = np.clip(res_x.x[:n_rows], 0, None)
    x /= x.sum()
    y = np.clip(res_y.x[:n_cols], 0, None)
    y /= y.sum()
    upper = float((x @ A).max())
    lower = float((A @ y).min())
    return x, y, 0.5 * (upper + lower), max(upper - lower, 0.0)


def solve_sequence_form_lp(efg: Efg) -> tuple[float, BehavioralStrategy, np.ndarray]:
    """Exact value of an Efg from the Questioner's sequence-form linear program.

    min v  s.t.  u_j(x) <= v for every root item j, x a realization plan.
    The chooser's equilibrium mix is read off the duals of the item rows.
    Returns ``(value, questioner_strategy, chooser_mix)``.
    """
    arr = efg.arrays()
    n_seq = efg.n_sequences
    n_items = len(efg.items)
    n_info = len(efg.infosets)
    # realization-plan rows: sum of an infoset's sequences equals its parent sequence
    rows, cols, vals = [], [], []
    b_eq = np.zeros(n_info)
    for i, info in enumerate(efg.infosets):
        for a in range(len(info.actions)):
            rows.append(i)
            cols.append(info.seq_start + a)
            vals.append(1.0)
        if info.parent_seq < 0:
            b_eq[i] = 1.0
        else:
            rows.append(i)
            cols.append(info.parent_seq)
            vals.append(-1.0)
    A_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(n_info, n_seq + 1))
    # item rows: u_j(x) - v <= -(payoff of leaves hanging off the empty sequence)
    U = np.zeros((n_items, n_seq + 1))
    const = np.zeros(n_items)
    for j, slot, pay in zip(arr["leaf_item"], arr["leaf_slot"], arr["leaf_payoff"]):
        if slot == n_seq:
            const[j] += pay
        else:
            U[j, slot] += pay
    U[:, n_seq] = -1.0
    c = np.zeros(n_seq + 1)
    c[n_seq] = 1.0
    res = linprog(
        c,
        A_ub=sparse.csr_matrix(U),
        b_ub=-const,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * n_seq + [(None, None)],
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"sequence-form LP failed: {res.message}")
    x = np.clip(res.x[:n_seq], 0.0, None)
    y = np.clip(-res.ineqlin.marginals, 0.0, None)
    y = y / y.sum() if y.sum() > 0 else np.full(n_items, 1.0 / n_items)
    return float(res.x[n_seq]), _behavioral(efg, x), y


def matrix_game_from_efg(efg: Efg, max_rows: int = 100_000):
    _, M = reduced_normal_form(efg, max_rows)
    return solve_matrix_game(M, max_rows)


__all__ = [
    "BehavioralStrategy",
    "EquilibriumProfile",
    "best_response_policy",
    "best_response_value",
    "cfr_solve",
    "chooser_values",
    "exploitability",
    "matrix_game_from_efg",
    "reduced_normal_form",
    "solve_matrix_game",
    "solve_sequence_form_lp",
]
