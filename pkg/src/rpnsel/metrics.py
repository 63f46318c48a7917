"""Flop-count comparisons and complexity-scaling measurements.

Counts come from the analytic cost model in :mod:`rpnsel.flops`. Scaling
runs use a toroid whose neighbourhoods hold ``isqrt(n_tx)`` places,
scale the token count with the array size and keep the user count fixed
unless asked otherwise.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._validation import ContractError, DomainError, db_to_linear
from .baselines import greedy_select, nearest_neighbours, nn_select
from .channel import SceneConfig, generate_channel, normalize_channel
from .flops import FlopLedger, flops_capacity, flops_capacity_tx, flops_logdet, flops_matmul
from .rpn import race
from .topology import toroid_for

__all__ = [
    "flops_logdet",
    "flops_matmul",
    "flops_capacity",
    "flops_capacity_tx",
    "greedy_flops",
    "FlopLedger",
    "ScalingReport",
    "measure_scaling",
    "compare_flops",
    "fit_slope",
]


def fit_slope(sizes, values):
    """Least-squares slope of log(values) against log(sizes)."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 3:
        raise ContractError("a slope fit needs at least 3 sizes")
    if np.any(values <= 0):
        raise ContractError("cannot fit a log-log slope through non-positive values")
    return float(np.polyfit(np.log(sizes), np.log(values), 1)[0])


@dataclass
class ScalingReport:
    """Mean flop totals per array size plus fitted log-log slopes.

    ``per_node`` divides each run's total by its number of node
    activations (a token-holding place visited in a pass, or one antenna
    update in an NN iteration), which is the quantity the per-node
    complexity bounds describe.
    """

    algorithm: str
    sizes: list
    totals: list
    per_node: list
    slope: float = field(init=False)
    per_node_slope: float = field(init=False)

    def __post_init__(self):
        self.slope = fit_slope(self.sizes, self.totals)
        self.per_node_slope = fit_slope(self.sizes, self.per_node)

    def rows(self):
        return [
            {"algorithm": self.algorithm, "n_tx": n, "flops": t, "flops_per_node": p}
            for n, t, p in zip(self.sizes, self.totals, self.per_node)
        ]


def _scene_for(template, n_tx, users_fraction, seed, n_users=None):
    if n_users is None:
        n_users = max(1, round(n_tx * users_fraction))
    return dataclasses.replace(template, n_tx=n_tx, n_users=n_users, seed=seed)


def _run_rpn(H, n_tokens, topology, rho, seed, ledger, k=1, max_passes=20):
    result = race(topology, H, rho, n_tokens, k=k, seed=seed, max_passes=max_passes,
                  ledger=ledger)
    return sum(n_tokens * st.passes for st in result.stats)


def _run_nn(H, n_tokens, topology, rho, seed, ledger, iterations=50, n_neighbours=None):
    neighbours = None
    if H.tx_positions is not None:
        neighbours = nearest_neighbours(H.tx_positions, n_neighbours)
    nn_select(H, neighbours, iterations, rho, seed=seed, ledger=ledger)
    return H.n_tx * iterations


def _run_greedy(H, n_tokens, topology, rho, seed, ledger):
    greedy_select(H, n_tokens, rho, ledger=ledger)
    return n_tokens


_RUNNERS = {"rpn": _run_rpn, "nn": _run_nn, "greedy": _run_greedy}


def measure_scaling(algorithm, sizes=(16, 64, 256), template=None, seeds=(0,),
                    rho_db=-5.0, n_users=4, users_fraction=0.25, tokens_fraction=0.25,
                    basis="neighbourhood", **options):
    """Measure mean flops per array size for one algorithm.

    ``algorithm`` is ``"rpn"``, ``"nn"``, ``"greedy"`` or a callable
    ``f(H, n_tokens, topology, rho, seed, ledger, **options)`` returning the
    number of node activations it performed.

    ``n_users`` fixes the user count; pass ``None`` to use
    ``round(users_fraction * n_tx)`` instead. ``basis`` selects the ledger cost
    basis (see :mod:`rpnsel.flops`).
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 3:
        raise ContractError("measure_scaling needs at least 3 array sizes")
    if template is None:
        template = SceneConfig(n_subcarriers=8)
    runner = _RUNNERS.get(algorithm) if isinstance(algorithm, str) else algorithm
    if runner is None:
        raise ContractError(f"unknown algorithm {algorithm!r}")
    name = algorithm if isinstance(algorithm, str) else getattr(algorithm, "__name__", "custom")
    rho = db_to_linear(rho_db)
    totals, per_node = [], []
    for n_tx in sizes:
        try:
            topology = toroid_for(n_tx)
        except DomainError as exc:
            raise ContractError(f"no toroid layout for n_tx={n_tx}: {exc}") from exc
        n_tokens = max(1, round(n_tx * tokens_fraction))
        run_totals, run_per_node = [], []
        for seed in seeds:
            scene = _scene_for(template, n_tx, users_fraction, seed, n_users)
            H = normalize_channel(generate_channel(scene))
            ledger = FlopLedger(basis)
            nodes = runner(H, n_tokens, topology, rho, seed, ledger, **options)
            total = ledger.total()
            run_totals.append(total)
            run_per_node.append(total / max(nodes, 1))
        totals.append(float(np.mean(run_totals)))
        per_node.append(float(np.mean(run_per_node)))
    return ScalingReport(name, sizes, totals, per_node)


def compare_flops(template=None, counts=None, seeds=(0,), rho_db=-5.0, k_race=5,
                  nn_iterations=50, nn_neighbours=None, include_greedy=True, max_passes=20,
                  basis="occupied"):
    """Mean flops per selected-antenna count for RPN, NN and greedy.

    Returns a list of row dicts with keys ``n_selected``, ``rpn``, ``nn``,
    ``greedy`` (``None`` when excluded). NN's selection size is emergent, so
    its cost does not depend on ``n_selected``; it is run once per seed.
    """
    if template is None:
        template = SceneConfig()
    n_tx = template.n_tx
    if counts is None:
        counts = list(range(4, n_tx + 1, 4))
    topology = toroid_for(n_tx)
    rho = db_to_linear(rho_db)
    rpn_cost = {n: [] for n in counts}
    greedy_cost = {n: [] for n in counts}
    nn_cost = []
    for seed in seeds:
        H = normalize_channel(generate_channel(dataclasses.replace(template, seed=seed)))
        ledger = FlopLedger(basis)
        _run_nn(H, None, topology, rho, seed, ledger, nn_iterations, nn_neighbours)
        nn_cost.append(ledger.total())
        for n in counts:
            ledger = FlopLedger(basis)
            _run_rpn(H, n, topology, rho, seed, ledger, k=k_race, max_passes=max_passes)
            rpn_cost[n].append(ledger.total())
            if include_greedy:
                ledger = FlopLedger(basis)
                greedy_select(H, n, rho, ledger=ledger)
                greedy_cost[n].append(ledger.total())
    nn_mean = float(np.mean(nn_cost))
    return [
        {
            "n_selected": n,
            "rpn": float(np.mean(rpn_cost[n])),
            "nn": nn_mean,
            "greedy": float(np.mean(greedy_cost[n])) if include_greedy else None,
        }
        for n in counts
    ]


def greedy_flops(n_tx, n, n_users, n_subcarriers):
    """Closed-form greedy cost: round ``r`` evaluates ``n_tx - r + 1`` candidates of size ``r``."""
    return sum(
        (n_tx - r + 1) * flops_capacity(r, n_users, n_subcarriers) for r in range(1, n + 1)
    )
