"""Capacity objective, log-det kernel and zero-forcing water-filling.

All rates are in bits/s/Hz. The sum-capacity of a selected channel
submatrix ``H_c`` (``n_selected x n_users``) under a diagonal power split
``p`` is::

    log2 det(I + rho * (n_users / n_selected) * H_c diag(p) H_c^H)

i.e. the total transmit power is scaled down by the number of selected
antennas. Multi-carrier objectives are the arithmetic mean of the
per-subcarrier values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from ._validation import ContractError, DomainError, check_matrix, db_to_linear

__all__ = [
    "SnrConfig",
    "uniform_power",
    "logdet_hermitian_psd",
    "sum_capacity",
    "zf_gains",
    "waterfill",
    "waterfill_zf",
    "zf_sum_rate",
    "mean_capacity",
    "subset_capacity",
    "subset_zf_rate",
]

_HERMITIAN_TOL = 1e-10
_MAX_CONDITION = 1e12
_LOG2E = 1.0 / np.log(2.0)


@dataclass(frozen=True)
class SnrConfig:
    """Linear SNR plus the two counts entering the power scaling."""

    rho: float
    n_selected: int
    n_users: int

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ContractError(f"rho must be positive and finite, got {self.rho}")
        if self.n_selected < 1 or self.n_users < 1:
            raise ContractError("n_selected and n_users must be >= 1")

    @classmethod
    def from_db(cls, rho_db, n_selected, n_users):
        return cls(db_to_linear(rho_db), int(n_selected), int(n_users))

    @property
    def scale(self):
        """Effective per-unit-power SNR, ``rho * n_users / n_selected``."""
        return self.rho * self.n_users / self.n_selected


def uniform_power(n_users):
    return np.full(int(n_users), 1.0 / n_users)


def _check_power(P, n_users):
    P = np.asarray(P, dtype=float).reshape(-1)
    if P.shape[0] != n_users:
        raise ContractError(f"power vector has length {P.shape[0]}, expected {n_users}")
    if np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
        raise ContractError("power weights must be non-negative and sum to 1")
    return P


def logdet_hermitian_psd(M):
    """Base-2 log-determinant of a Hermitian positive-definite matrix.

    Uses a Cholesky factorisation, so the result stays finite where a plain
    determinant would overflow.

    Raises
    ------
    ContractError
        If ``M`` is not square or not Hermitian within 1e-10.
    DomainError
        If the factorisation breaks down; ``err.pivot`` is the 0-based index
        of the first non-positive leading minor.
    """
    M = check_matrix(M, "M", square=True)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.conj().T)) > _HERMITIAN_TOL * scale:
        raise ContractError("M is not Hermitian")
    L, info = lapack.zpotrf(M, lower=1, clean=1)
    if info > 0:
        raise DomainError(
            f"matrix is not positive definite: pivot {info - 1} is non-positive",
            pivot=info - 1,
        )
    if info < 0:
        raise ContractError(f"invalid argument {-info} passed to zpotrf")
    return float(2.0 * np.sum(np.log2(np.abs(np.diag(L)).real)))


def sum_capacity(H_c, P, snr, form="tx"):
    """Sum-capacity of one channel submatrix for fixed power weights.

    ``form="tx"`` factorises the ``n_selected x n_selected`` matrix as
    written; ``form="user"`` uses the equivalent ``n_users x n_users``
    matrix ``I + scale * diag(sqrt p) H_c^H H_c diag(sqrt p)``.
    """
    H_c = check_matrix(H_c, "H_c")
    if H_c.shape != (snr.n_selected, snr.n_users):
        raise ContractError(
            f"H_c has shape {H_c.shape}, expected ({snr.n_selected}, {snr.n_users})"
        )
    P = _check_power(P, snr.n_users)
    if form == "tx":
        A = (H_c * P) @ H_c.conj().T
    elif form == "user":
        B = H_c * np.sqrt(P)
        A = B.conj().T @ B
    else:
        raise ContractError(f"unknown form {form!r}")
    A = snr.scale * (A + A.conj().T) / 2
    A[np.diag_indices_from(A)] += 1.0
    return max(0.0, logdet_hermitian_psd(A))


def zf_gains(H_c):
    """Per-user zero-forcing gains ``1 / [(H_c^H H_c)^-1]_kk``."""
    H_c = check_matrix(H_c, "H_c")
    n_sel, n_users = H_c.shape
    if n_sel < n_users:
        raise DomainError(
            f"zero forcing needs n_selected >= n_users, got {n_sel} < {n_users}"
        )
    s = np.linalg.svd(H_c, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > _MAX_CONDITION:
        raise DomainError("H_c is rank deficient (condition number above 1e12)")
    gram_inv = np.linalg.inv(H_c.conj().T @ H_c)
    return 1.0 / np.real(np.diag(gram_inv))


def waterfill(gains, budget=1.0):
    """Water-filling over parallel channels with effective gains ``a_k``.

    Maximises ``sum log2(1 + p_k a_k)`` subject to ``sum p_k = budget``.
    Returns ``(p, mu)`` with ``p_k = max(0, mu - 1/a_k)``.
    """
    a = np.asarray(gains, dtype=float).reshape(-1)
    if a.size == 0 or np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise DomainError("water-filling gains must be positive and finite")
    order = np.argsort(-a, kind="stable")
    inv = 1.0 / a[order]
    csum = np.cumsum(inv)
    k = np.arange(1, a.size + 1)
    levels = (budget + csum) / k
    # largest active set whose weakest member still gets positive power
    active = int(np.nonzero(levels > inv)[0][-1]) + 1
    mu = levels[active - 1]
    p = np.zeros_like(a)
    p[order[:active]] = mu - inv[:active]
    return p, float(mu)


def waterfill_zf(H_c, snr):
    """Water-filling power weights for zero-forcing precoding over ``H_c``."""
    H_c = check_matrix(H_c, "H_c")
    if H_c.shape != (snr.n_selected, snr.n_users):
        raise ContractError(
            f"H_c has shape {H_c.shape}, expected ({snr.n_selected}, {snr.n_users})"
        )
    p, _ = waterfill(snr.scale * zf_gains(H_c))
    return p


def zf_sum_rate(H_c, P, snr):
    H_c = check_matrix(H_c, "H_c")
    if H_c.shape != (snr.n_selected, snr.n_users):
        raise ContractError(
            f"H_c has shape {H_c.shape}, expected ({snr.n_selected}, {snr.n_users})"
        )
    P = _check_power(P, snr.n_users)
    g = zf_gains(H_c)
    return float(np.sum(np.log2(1.0 + snr.scale * P * g)))


def mean_capacity(H_sub, rho, n_scale=None):
    """Subcarrier-averaged capacity of ``H_sub`` (n_sub, m, n_users), uniform power.

    ``n_scale`` is the antenna count in the power scaling; it defaults to
    ``m``. The smaller of the two equivalent Gram forms is factorised.
    """
    n_sub, m, n_users = H_sub.shape
    if m == 0:
        return 0.0
    if n_scale is None:
        n_scale = m
    # uniform p = 1/n_users cancels the n_users in the scaling
    c = rho / n_scale
    if m <= n_users:
        G = H_sub @ H_sub.conj().transpose(0, 2, 1)
    else:
        G = H_sub.conj().transpose(0, 2, 1) @ H_sub
    d = G.shape[-1]
    A = c * G
    A[:, np.arange(d), np.arange(d)] += 1.0
    L = np.linalg.cholesky(A)
    diag = np.abs(L[:, np.arange(d), np.arange(d)])
    return float(2.0 * np.sum(np.log(diag)) * _LOG2E / n_sub)


def subset_capacity(coeffs, antennas, rho, n_scale=None):
    """Mean capacity of the antennas ``antennas`` of a (n_sub, n_tx, n_users) array."""
    antennas = np.asarray(antennas, dtype=int).reshape(-1)
    if antennas.size == 0:
        return 0.0
    return mean_capacity(coeffs[:, antennas, :], rho, n_scale)


def subset_zf_rate(coeffs, antennas, rho):
    """Subcarrier-averaged water-filled ZF rate of a selection.

    Returns ``(rate, feasible)``. A subcarrier whose submatrix is rank
    deficient (or has fewer antennas than users) contributes zero rate and
    clears the feasibility flag.
    """
    antennas = np.asarray(antennas, dtype=int).reshape(-1)
    n_sub, _, n_users = coeffs.shape
    if antennas.size < n_users:
        return 0.0, False
    snr = SnrConfig(rho, antennas.size, n_users)
    total = 0.0
    feasible = True
    for f in range(n_sub):
        H_c = coeffs[f][antennas]
        try:
            g = zf_gains(H_c)
        except DomainError:
            feasible = False
            continue
        p, _ = waterfill(snr.scale * g)
        total += float(np.sum(np.log2(1.0 + snr.scale * p * g)))
    return total / n_sub, feasible
