"""Compiled sequence-form passes over the infoset / leaf tables of an Efg.

Infosets are ordered parents-first.  Sequence slot ``n_seq`` is the empty
sequence.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def regret_match(regret, seq_start, n_actions, out):
    for i in range(seq_start.shape[0]):
        s, k = seq_start[i], n_actions[i]
        tot = 0.0
        for a in range(k):
            if regret[s + a] > 0.0:
                tot += regret[s + a]
        for a in range(k):
            if tot > 0.0:
                out[s + a] = max(regret[s + a], 0.0) / tot
            else:
                out[s + a] = 1.0 / k


@njit(cache=True)
def realization(sigma, seq_start, n_actions, parent_slot, x):
    x[x.shape[0] - 1] = 1.0
    for i in range(seq_start.shape[0]):
        s, k = seq_start[i], n_actions[i]
        px = x[parent_slot[i]]
        for a in range(k):
            x[s + a] = px * sigma[s + a]


@njit(cache=True)
def chooser_utilities(x, leaf_item, leaf_slot, leaf_payoff, u):
    u[:] = 0.0
    for l in range(leaf_item.shape[0]):
        u[leaf_item[l]] += x[leaf_slot[l]] * leaf_payoff[l]


@njit(cache=True)
def leaf_cfv(y, leaf_item, leaf_slot, leaf_payoff, cfv):
    cfv[:] = 0.0
    for l in range(leaf_item.shape[0]):
        cfv[leaf_slot[l]] += y[leaf_item[l]] * leaf_payoff[l]


@njit(cache=True)
def cfr_values(sigma, y, seq_start, n_actions, parent_slot, leaf_item, leaf_slot, leaf_payoff, cfv, info_val):
    leaf_cfv(y, leaf_item, leaf_slot, leaf_payoff, cfv)
    for i in range(seq_start.shape[0] - 1, -1, -1):
        s, k = seq_start[i], n_actions[i]
        v = 0.0
        for a in range(k):
            v += sigma[s + a] * cfv[s + a]
        info_val[i] = v
        cfv[parent_slot[i]] += v


@njit(cache=True)
def best_response_min(y, seq_start, n_actions, parent_slot, leaf_item, leaf_slot, leaf_payoff, choice):
    """Questioner best response to chooser mix y; ties go to the lowest action index."""
    n_seq = choice.shape[0]
    cfv = np.empty(n_seq + 1)
    leaf_cfv(y, leaf_item, leaf_slot, leaf_payoff, cfv)
    choice[:] = 0.0
    for i in range(seq_start.shape[0] - 1, -1, -1):
        s, k = seq_start[i], n_actions[i]
        best = s
        for a in range(1, k):
            if cfv[s + a] < cfv[best]:
                best = s + a
        choice[best] = 1.0
        cfv[parent_slot[i]] += cfv[best]
    return cfv[n_seq]


@njit(cache=True)
def cfr_run(iterations, plus, seq_start, n_actions, parent_slot, leaf_item, leaf_slot, leaf_payoff, n_items,
            q_regret, c_regret, q_avg, c_avg, t0):
    """Alternating-update CFR iterations t0+1 .. t0+iterations with linear weights."""
    n_seq = q_regret.shape[0]
    n_info = seq_start.shape[0]
    sigma = np.empty(n_seq)
    x = np.empty(n_seq + 1)
    cfv = np.empty(n_seq + 1)
    info_val = np.empty(n_info)
    u = np.empty(n_items)
    y = np.empty(n_items)
    for t in range(t0 + 1, t0 + iterations + 1):
        w = 1.0 if plus else float(t)
        tot = 0.0
        for j in range(n_items):
            if c_regret[j] > 0.0:
                tot += c_regret[j]
        for j in range(n_items):
            y[j] = max(c_regret[j], 0.0) / tot if tot > 0.0 else 1.0 / n_items

        # Questioner update (it minimises the chooser's payoff)
        regret_match(q_regret, seq_start, n_actions, sigma)
        cfr_values(sigma, y, seq_start, n_actions, parent_slot, leaf_item, leaf_slot, leaf_payoff, cfv, info_val)
        for i in range(n_info):
            s, k = seq_start[i], n_actions[i]
            for a in range(k):
                r = q_regret[s + a] + w * (info_val[i] - cfv[s + a])
                q_regret[s + a] = max(r, 0.0) if plus else r
        realization(sigma, seq_start, n_actions, parent_slot, x)
        for q in range(n_seq):
            q_avg[q] += t * x[q]

        # chooser responds to the updated plan
        regret_match(q_regret, seq_start, n_actions, sigma)
        realization(sigma, seq_start, n_actions, parent_slot, x)
        chooser_utilities(x, leaf_item, leaf_slot, leaf_payoff, u)
        ev = 0.0
        for j in range(n_items):
            ev += y[j] * u[j]
        for j in range(n_items):
            r = c_regret[j] + w * (u[j] - ev)
            c_regret[j] = max(r, 0.0) if plus else r
            c_avg[j] += t * y[j]
