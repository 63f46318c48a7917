"""Reference selection algorithms: greedy, random, exhaustive and NN.

Every selector returns a sorted integer array of antenna indices. Objective
values are subcarrier-averaged sum-capacities with uniform power and the
power scaled by the size of the evaluated set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, islice

import numpy as np

from ._validation import ContractError, check_channel, check_count
from .flops import FlopLedger
from .numerics import subset_capacity

EXHAUSTIVE_LIMIT = 10**6

_LOG2 = np.log(2.0)


def _user_form_capacity(K, rho, n_scale):
    """Mean capacity from user-side Grams ``K`` (..., n_sub, n_users, n_users)."""
    n_users = K.shape[-1]
    A = K * (rho / np.asarray(n_scale, dtype=float))[..., None, None, None]
    diag = np.arange(n_users)
    A[..., diag, diag] += 1.0
    L = np.linalg.cholesky(A)
    logdet = 2.0 * np.log(np.abs(L[..., diag, diag])).sum(axis=-1)
    return logdet.mean(axis=-1) / _LOG2


def greedy_select(H, n, rho, ledger=None, algorithm="greedy"):
    """Add, round by round, the antenna that maximises the augmented set's capacity.

    Ties go to the lowest antenna index. Each candidate evaluation is
    charged to ``ledger`` as a full capacity recomputation.
    """
    coeffs = check_channel(H)
    n_sub, n_tx, n_users = coeffs.shape
    n = check_count(n, "n", 1, n_tx)
    # outer products conj(h) h^T per antenna, shape (n_tx, n_sub, n_users, n_users)
    outer = np.einsum("fti,ftj->tfij", coeffs.conj(), coeffs)
    K = np.zeros((n_sub, n_users, n_users), dtype=complex)
    chosen = []
    remaining = list(range(n_tx))
    for size in range(1, n + 1):
        caps = _user_form_capacity(K[None] + outer[remaining], rho, np.full(len(remaining), size))
        if ledger is not None:
            for _ in remaining:
                ledger.charge_capacity(algorithm, "candidate", size, n_users, n_sub)
        pick = remaining[int(np.argmax(caps))]
        chosen.append(pick)
        remaining.remove(pick)
        K = K + outer[pick]
    return np.sort(np.array(chosen))


def random_select(n_total, n, seed=None):
    n_total = check_count(n_total, "n_total", 1)
    n = check_count(n, "n", 1, n_total)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_total, size=n, replace=False))


def exhaustive_select(H, n, rho, chunk=4096):
    """Capacity-maximising ``n``-subset by enumeration.

    Ties go to the lexicographically smallest subset. Refuses instances
    with more than ``EXHAUSTIVE_LIMIT`` subsets.
    """
    coeffs = check_channel(H)
    n_sub, n_tx, n_users = coeffs.shape
    n = check_count(n, "n", 1, n_tx)
    count = math.comb(n_tx, n)
    if count > EXHAUSTIVE_LIMIT:
        raise ContractError(
            f"exhaustive search over C({n_tx}, {n}) = {count} subsets exceeds "
            f"the limit of {EXHAUSTIVE_LIMIT}"
        )
    outer = np.einsum("fti,ftj->tfij", coeffs.conj(), coeffs)
    best_cap = -np.inf
    best = None
    combos = combinations(range(n_tx), n)
    while True:
        block = np.array(list(islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        K = outer[block].sum(axis=1)
        caps = _user_form_capacity(K, rho, np.full(len(block), n))
        i = int(np.argmax(caps))
        if caps[i] > best_cap:
            best_cap = caps[i]
            best = block[i]
    return np.array(best)


def nearest_neighbours(positions, k=None):
    """Map each antenna to its ``k`` nearest other antennas (default: all others)."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    k = n - 1 if k is None else check_count(k, "k", 0, n - 1)
    dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    out = {}
    for a in range(n):
        order = [b for b in np.lexsort((np.arange(n), dist[a])) if b != a]
        out[a] = tuple(int(b) for b in order[:k])
    return out


@dataclass
class NNStats:
    iterations: int = 0
    best_iteration: int = -1
    best_capacity: float = 0.0
    sizes: list = field(default_factory=list)
    flops: int = 0


def nn_select(H, neighbours, iterations, rho, seed=None, ledger=None, init_prob=0.5,
              algorithm="nn"):
    """Nearest-neighbour membership toggling.

    Each iteration visits antennas in a seeded random order; an antenna
    joins the selection iff the capacity of the currently selected antennas
    among its neighbours is higher with it than without it. The best
    full-selection capacity seen after any iteration is returned, so the
    selection size is whatever emerges.

    Returns ``(selection, NNStats)``.
    """
    coeffs = check_channel(H)
    n_sub, n_tx, n_users = coeffs.shape
    iterations = check_count(iterations, "iterations", 1)
    if neighbours is None:
        neighbours = {a: tuple(b for b in range(n_tx) if b != a) for a in range(n_tx)}
    if set(neighbours) != set(range(n_tx)):
        raise ContractError("neighbours must map every antenna index")
    rng = np.random.default_rng(seed)
    run_ledger = ledger.spawn() if ledger is not None else FlopLedger()
    flags = rng.random(n_tx) < init_prob
    hermitian = coeffs.conj().transpose(0, 2, 1)
    stats = NNStats()
    best = np.flatnonzero(flags)
    best_cap = subset_capacity(coeffs, best, rho)
    for it in range(iterations):
        for a in rng.permutation(n_tx):
            local = [b for b in neighbours[a] if flags[b]]
            m = len(local)
            K = hermitian[:, :, local] @ coeffs[:, local, :]
            h = coeffs[:, a, :]
            K_with = K + h.conj()[:, :, None] * h[:, None, :]
            if m:
                caps = _user_form_capacity(np.stack([K_with, K]), rho, np.array([m + 1, m]))
                c_with, c_without = caps
            else:
                c_with = _user_form_capacity(K_with[None], rho, np.array([1]))[0]
                c_without = 0.0
            hood = len(neighbours[a]) + 1
            run_ledger.charge_capacity(algorithm, "local", m + 1, n_users, n_sub, hood)
            run_ledger.charge_capacity(algorithm, "local", m, n_users, n_sub, hood)
            flags[a] = c_with > c_without
        current = np.flatnonzero(flags)
        cap = subset_capacity(coeffs, current, rho)
        run_ledger.charge_capacity(algorithm, "track", len(current), n_users, n_sub)
        stats.sizes.append(len(current))
        if cap > best_cap:
            best_cap = cap
            best = current
            stats.best_iteration = it
    stats.iterations = iterations
    stats.best_capacity = best_cap
    stats.flops = run_ledger.total()
    if ledger is not None:
        ledger.merge(run_ledger)
    if best.size == 0:
        raise ContractError("nn_select never selected an antenna")
    return best, stats
