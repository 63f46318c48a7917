"""Estimator-style wrappers around the selection algorithms.

A selector is fitted on a channel (a :class:`~rpnsel.channel.ChannelTensor`,
an ``(n_subcarriers, n_tx, n_users)`` array, or a single-subcarrier
``(n_tx, n_users)`` array) and learns ``support_``, the sorted indices of
the chosen transmit antennas. ``transform`` restricts a channel with the
same antenna count to those rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ContractError, check_channel, check_count, db_to_linear
from .baselines import (
    exhaustive_select,
    greedy_select,
    nearest_neighbours,
    nn_select,
    random_select,
)
from .flops import FlopLedger
from .numerics import subset_capacity
from .rpn import DEFAULT_MAX_PASSES, race
from .topology import toroid_for


class _SelectorBase(TransformerMixin, BaseEstimator):
    """Shared ``transform``/``get_support`` plumbing."""

    def _rho(self):
        return db_to_linear(self.rho_db)

    def _select(self, coeffs, H):
        raise NotImplementedError

    def fit(self, X, y=None):
        coeffs = check_channel(X, "X")
        self.n_tx_ = coeffs.shape[1]
        self.n_users_ = coeffs.shape[2]
        self.flops_ledger_ = FlopLedger()
        support = np.asarray(self._select(coeffs, X), dtype=int)
        self.support_ = np.sort(support)
        self.capacity_ = subset_capacity(coeffs, self.support_, self._rho())
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        if indices:
            return self.support_.copy()
        mask = np.zeros(self.n_tx_, dtype=bool)
        mask[self.support_] = True
        return mask

    def transform(self, X):
        check_is_fitted(self, "support_")
        raw = np.asarray(getattr(X, "coeffs", X))
        coeffs = check_channel(X, "X")
        if coeffs.shape[1] != self.n_tx_:
            raise ContractError(
                f"X has {coeffs.shape[1]} antennas, the selector was fitted on {self.n_tx_}"
            )
        out = coeffs[:, self.support_, :]
        return out[0] if raw.ndim == 2 else out


class RPNSelector(_SelectorBase):
    """Distributed token-passing selection of ``n_selected`` antennas.

    ``topology`` defaults to the toroid with ``isqrt(n_tx)``-place
    neighbourhoods. With ``k_race > 1`` the best of that many independently
    seeded runs is kept.
    """

    def __init__(self, n_selected=16, rho_db=-5.0, k_race=5, topology=None,
                 max_passes=DEFAULT_MAX_PASSES, guard_mode="shared", guard_scaling="local",
                 random_state=None):
        self.n_selected = n_selected
        self.rho_db = rho_db
        self.k_race = k_race
        self.topology = topology
        self.max_passes = max_passes
        self.guard_mode = guard_mode
        self.guard_scaling = guard_scaling
        self.random_state = random_state

    def _select(self, coeffs, H):
        topology = self.topology if self.topology is not None else toroid_for(self.n_tx_)
        if topology.n_places != self.n_tx_:
            raise ContractError(
                f"topology has {topology.n_places} places, channel has {self.n_tx_} antennas"
            )
        result = race(
            topology, coeffs, self._rho(), self.n_selected, k=self.k_race,
            seed=self.random_state, max_passes=self.max_passes, guard_mode=self.guard_mode,
            guard_scaling=self.guard_scaling, ledger=self.flops_ledger_,
        )
        self.topology_ = topology
        self.race_ = result
        self.n_passes_ = max(st.passes for st in result.stats)
        self.converged_ = all(st.converged for st in result.stats)
        return result.best.selected_antennas()


class GreedySelector(_SelectorBase):
    def __init__(self, n_selected=16, rho_db=-5.0):
        self.n_selected = n_selected
        self.rho_db = rho_db

    def _select(self, coeffs, H):
        return greedy_select(coeffs, self.n_selected, self._rho(), ledger=self.flops_ledger_)


class RandomSelector(_SelectorBase):
    def __init__(self, n_selected=16, rho_db=-5.0, random_state=None):
        self.n_selected = n_selected
        self.rho_db = rho_db
        self.random_state = random_state

    def _select(self, coeffs, H):
        return random_select(self.n_tx_, self.n_selected, self.random_state)


class ExhaustiveSelector(_SelectorBase):
    """Capacity-optimal subset by enumeration; small instances only."""

    def __init__(self, n_selected=4, rho_db=-5.0):
        self.n_selected = n_selected
        self.rho_db = rho_db

    def _select(self, coeffs, H):
        return exhaustive_select(coeffs, self.n_selected, self._rho())


class NNSelector(_SelectorBase):
    """Nearest-neighbour membership toggling; the selection size is emergent.

    Antenna positions are taken from a fitted ``ChannelTensor`` when it
    carries them; without positions every antenna neighbours every other.
    """

    def __init__(self, iterations=50, n_neighbours=None, rho_db=-5.0, random_state=None):
        self.iterations = iterations
        self.n_neighbours = n_neighbours
        self.rho_db = rho_db
        self.random_state = random_state

    def _select(self, coeffs, H):
        check_count(self.iterations, "iterations", 1)
        positions = getattr(H, "tx_positions", None)
        neighbours = None
        if positions is not None:
            neighbours = nearest_neighbours(positions, self.n_neighbours)
        elif self.n_neighbours is not None:
            raise ContractError("n_neighbours needs antenna positions on the fitted channel")
        selection, stats = nn_select(
            coeffs, neighbours, self.iterations, self._rho(), seed=self.random_state,
            ledger=self.flops_ledger_,
        )
        self.stats_ = stats
        return selection
