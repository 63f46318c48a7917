"""Input validation helpers and the package's exception types."""

from __future__ import annotations

import numbers

import numpy as np


class ContractError(ValueError):
    """Raised when a caller violates a precondition (shapes, ranges)."""


class DomainError(ValueError):
    """Raised when inputs are well-formed but mathematically infeasible."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class TopologyError(ValueError):
    """Raised when a topology fails its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def check_matrix(M, name="matrix", square=False):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ContractError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise ContractError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractError(f"{name} contains non-finite entries")
    return M.astype(complex, copy=False)


def check_channel(H, name="H"):
    """Return the (n_subcarriers, n_tx, n_users) complex array behind ``H``.

    Accepts a :class:`~rpnsel.channel.ChannelTensor`, a 3-D array, or a 2-D
    array (treated as a single subcarrier).
    """
    coeffs = getattr(H, "coeffs", H)
    coeffs = np.asarray(coeffs)
    if coeffs.ndim == 2:
        coeffs = coeffs[np.newaxis]
    if coeffs.ndim != 3 or min(coeffs.shape) < 1:
        raise ContractError(
            f"{name} must have shape (n_subcarriers, n_tx, n_users), got {coeffs.shape}"
        )
    if not np.all(np.isfinite(coeffs)):
        raise ContractError(f"{name} contains non-finite entries")
    return coeffs.astype(complex, copy=False)


def check_count(value, name, low=1, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ContractError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < low or (high is not None and value > high):
        bound = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ContractError(f"{name} must be in {bound}, got {value}")
    return value


def check_fraction(value, name, low=0.0, high=1.0, low_open=False):
    value = float(value)
    bad_low = value <= low if low_open else value < low
    if not np.isfinite(value) or bad_low or value > high:
        left = "(" if low_open else "["
        raise ContractError(f"{name} must be in {left}{low}, {high}], got {value}")
    return value


def db_to_linear(db):
    return 10.0 ** (float(db) / 10.0)
