"""Analytic floating-point cost model and the ledger that accumulates it.

Costs are real flops derived from matrix dimensions:

* complex ``m x k`` times ``k x n`` product: ``8 m k n`` (one complex
  multiply-add is 8 real flops). Classical multiplication, i.e. the
  matrix-multiplication exponent is 3.
* log-determinant of an ``n x n`` Hermitian positive-definite matrix via an
  LDL^H factorisation: ``4 (n^3 - n) / 3`` flops of complex updates, then
  ``n (n - 1)`` flops scaling the sub-diagonal by the real pivots, then one
  log and one add per pivot (``2 n``).
* capacity of ``n_selected`` antennas for ``n_users`` users on one
  subcarrier, using the smaller Gram form of size ``d = min(n_selected,
  n_users)`` (``k`` the larger): Gram product ``8 d^2 k``, real scaling
  ``2 d^2``, identity shift ``d``, then the log-det of size ``d``.
  Averaging over ``n_sub`` subcarriers adds ``n_sub`` flops.

A ledger charges capacity evaluations on one of two bases:

* ``"occupied"``: the set actually evaluated (the token-holding or selected
  antennas), smaller Gram form as above.
* ``"neighbourhood"``: the worst case for a node, i.e. the full
  neighbourhood of ``s`` places evaluated in the ``s x s`` transmit-side
  form ``I + c H H^H`` regardless of how many places hold tokens. This is
  the matrix size the per-node complexity bounds are stated in. Evaluations
  without a neighbourhood (centralised ones) fall back to the occupied
  basis.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

__all__ = [
    "flops_matmul",
    "flops_logdet",
    "flops_capacity",
    "flops_capacity_tx",
    "LedgerEntry",
    "FlopLedger",
]


def flops_matmul(m, k, n):
    return 8 * m * k * n


def flops_logdet(n):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 4 * (n**3 - n) // 3 + n * (n - 1) + 2 * n


def flops_capacity(n_selected, n_users, n_subcarriers=1):
    if n_selected == 0:
        return 0
    d = min(n_selected, n_users)
    k = max(n_selected, n_users)
    per_carrier = flops_matmul(d, k, d) + 2 * d * d + d + flops_logdet(d)
    return n_subcarriers * per_carrier + n_subcarriers


def flops_capacity_tx(size, n_users, n_subcarriers=1):
    """Capacity cost in the ``size x size`` transmit-side form."""
    if size == 0:
        return 0
    per_carrier = flops_matmul(size, n_users, size) + 2 * size * size + size + flops_logdet(size)
    return n_subcarriers * per_carrier + n_subcarriers


COST_BASES = ("occupied", "neighbourhood")


@dataclass
class LedgerEntry:
    evaluations: int = 0
    factorisations: int = 0
    flops: int = 0

    def __iadd__(self, other):
        self.evaluations += other.evaluations
        self.factorisations += other.factorisations
        self.flops += other.flops
        return self


class FlopLedger:
    """Flop counters keyed by ``(algorithm, phase)``.

    Counters only grow. Each run owns one ledger; combine finished ledgers
    with :meth:`merge`.
    """

    def __init__(self, basis="occupied"):
        if basis not in COST_BASES:
            raise ValueError(f"basis must be one of {COST_BASES}, got {basis!r}")
        self.basis = basis
        self._entries = defaultdict(LedgerEntry)

    def spawn(self):
        """Empty ledger with the same cost basis."""
        return FlopLedger(self.basis)

    def charge(self, algorithm, phase, flops, evaluations=0, factorisations=0):
        if flops < 0 or evaluations < 0 or factorisations < 0:
            raise ValueError("ledger charges must be non-negative")
        entry = self._entries[(algorithm, phase)]
        entry.flops += int(flops)
        entry.evaluations += int(evaluations)
        entry.factorisations += int(factorisations)

    def charge_capacity(self, algorithm, phase, n_selected, n_users, n_subcarriers,
                        hood_size=None):
        """Record one subcarrier-averaged capacity evaluation.

        ``hood_size`` is the size of the neighbourhood the evaluation runs
        in, if any; it is only used on the neighbourhood basis.
        """
        if self.basis == "neighbourhood" and hood_size is not None:
            flops = flops_capacity_tx(hood_size, n_users, n_subcarriers)
            size = hood_size
        else:
            flops = flops_capacity(n_selected, n_users, n_subcarriers)
            size = n_selected
        self.charge(
            algorithm,
            phase,
            flops,
            evaluations=1,
            factorisations=n_subcarriers if size else 0,
        )

    def merge(self, other):
        if other.basis != self.basis:
            raise ValueError("cannot merge ledgers with different cost bases")
        for key, entry in other._entries.items():
            self._entries[key] += entry
        return self

    def entry(self, algorithm, phase):
        return self._entries.get((algorithm, phase), LedgerEntry())

    def total(self, algorithm=None, phase=None):
        return sum(
            e.flops
            for (alg, ph), e in self._entries.items()
            if (algorithm is None or alg == algorithm) and (phase is None or ph == phase)
        )

    def evaluations(self, algorithm=None, phase=None):
        return sum(
            e.evaluations
            for (alg, ph), e in self._entries.items()
            if (algorithm is None or alg == algorithm) and (phase is None or ph == phase)
        )

    def items(self):
        return sorted(self._entries.items())

    def __repr__(self):
        return f"FlopLedger(total={self.total()}, keys={len(self._entries)})"
