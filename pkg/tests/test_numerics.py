import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpnsel import ContractError, DomainError
from rpnsel.numerics import (
    SnrConfig,
    logdet_hermitian_psd,
    mean_capacity,
    subset_capacity,
    subset_zf_rate,
    sum_capacity,
    uniform_power,
    waterfill,
    waterfill_zf,
    zf_gains,
    zf_sum_rate,
)

from conftest import RHO, random_channel, random_hpd


def eig_logdet(M):
    return float(np.sum(np.log2(np.linalg.eigvalsh(M))))


@pytest.mark.parametrize("n", [1, 2, 4, 9, 32])
def test_logdet_matches_eigenvalues(rng, n):
    for _ in range(5):
        M = random_hpd(rng, n)
        ref = eig_logdet(M)
        assert abs(logdet_hermitian_psd(M) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_logdet_identity_and_diagonal():
    assert logdet_hermitian_psd(np.eye(5)) == 0.0
    assert logdet_hermitian_psd(np.diag([2.0, 4.0, 8.0])) == pytest.approx(6.0, abs=1e-14)


def test_logdet_survives_large_determinants():
    M = np.eye(40) * 1e10
    assert logdet_hermitian_psd(M) == pytest.approx(40 * np.log2(1e10), rel=1e-12)


def test_logdet_rejects_non_hermitian():
    with pytest.raises(ContractError):
        logdet_hermitian_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_logdet_reports_pivot():
    with pytest.raises(DomainError) as err:
        logdet_hermitian_psd(np.diag([1.0, -1.0, 1.0]))
    assert err.value.pivot == 1


def test_logdet_rejects_non_square():
    with pytest.raises(ContractError):
        logdet_hermitian_psd(np.ones((2, 3)))


@pytest.mark.parametrize("n_sel,n_users", [(3, 5), (8, 4), (6, 6)])
def test_sylvester_forms_agree(rng, n_sel, n_users):
    H = random_channel(rng, 1, n_sel, n_users)[0]
    snr = SnrConfig(RHO, n_sel, n_users)
    p = rng.dirichlet(np.ones(n_users))
    assert abs(sum_capacity(H, p, snr, "tx") - sum_capacity(H, p, snr, "user")) <= 1e-9


def test_sum_capacity_uniform_power_reduces_to_rho_over_selected(rng):
    H = random_channel(rng, 1, 6, 3)[0]
    snr = SnrConfig(2.0, 6, 3)
    ref = eig_logdet(np.eye(6) + (2.0 / 6) * H @ H.conj().T)
    assert sum_capacity(H, uniform_power(3), snr) == pytest.approx(ref, abs=1e-10)


def test_sum_capacity_validates_inputs(rng):
    H = random_channel(rng, 1, 4, 2)[0]
    snr = SnrConfig(1.0, 4, 2)
    with pytest.raises(ContractError):
        sum_capacity(H, [0.7, 0.7], snr)
    with pytest.raises(ContractError):
        sum_capacity(H, [1.0], snr)
    with pytest.raises(ContractError):
        sum_capacity(H.T, uniform_power(2), snr)
    with pytest.raises(ContractError):
        sum_capacity(H, uniform_power(2), snr, form="other")


def test_snr_config():
    snr = SnrConfig.from_db(-5, 16, 4)
    assert snr.rho == pytest.approx(RHO)
    assert snr.scale == pytest.approx(RHO / 4)
    with pytest.raises(ContractError):
        SnrConfig(0.0, 1, 1)
    with pytest.raises(ContractError):
        SnrConfig(1.0, 0, 1)


def bisection_waterfill(a, budget=1.0):
    lo, hi = 0.0, budget + np.max(1 / a)
    for _ in range(200):
        mu = (lo + hi) / 2
        if np.maximum(0, mu - 1 / a).sum() > budget:
            hi = mu
        else:
            lo = mu
    return np.maximum(0, mu - 1 / a)


def kkt_residual(a, p, mu):
    active = p > 0
    r_active = np.abs(p[active] + 1 / a[active] - mu)
    r_inactive = np.maximum(0, mu - 1 / a[~active])
    return max(r_active.max(initial=0), r_inactive.max(initial=0))


def test_waterfill_kkt_and_budget(rng):
    for _ in range(50):
        a = rng.exponential(size=rng.integers(1, 12)) * 10 ** rng.uniform(-2, 2)
        p, mu = waterfill(a)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= 0)
        assert kkt_residual(a, p, mu) <= 1e-9
        np.testing.assert_allclose(p, bisection_waterfill(a), atol=1e-9)


def test_waterfill_beats_grid_search():
    a = np.array([3.0, 0.7])
    p, _ = waterfill(a)
    grid = np.linspace(0, 1, 10001)
    rates = np.log2(1 + grid * a[0]) + np.log2(1 + (1 - grid) * a[1])
    best = rates.max()
    assert np.log2(1 + p * a).sum() >= best - 1e-9


def test_waterfill_shuts_off_weak_channels():
    p, mu = waterfill(np.array([100.0, 1e-3]))
    assert p[1] == 0.0 and p[0] == pytest.approx(1.0)


def test_waterfill_rejects_bad_gains():
    for bad in ([], [1.0, 0.0], [np.inf], [-1.0]):
        with pytest.raises(DomainError):
            waterfill(np.array(bad))


def test_zf_gains_match_precoder_norms(rng):
    H = random_channel(rng, 1, 7, 3)[0]
    W = np.linalg.pinv(H.T)  # columns invert H^T: H^T W = I
    expected = 1 / np.sum(np.abs(W) ** 2, axis=0)
    np.testing.assert_allclose(zf_gains(H), expected, rtol=1e-10)


def test_zf_gains_domain_errors(rng):
    H = random_channel(rng, 1, 2, 3)[0]
    with pytest.raises(DomainError):
        zf_gains(H)
    H = random_channel(rng, 1, 4, 2)[0]
    H[:, 1] = 2 * H[:, 0]
    with pytest.raises(DomainError):
        zf_gains(H)


def test_waterfill_zf_is_optimal_over_power_splits(rng):
    H = random_channel(rng, 1, 6, 2)[0]
    snr = SnrConfig(RHO, 6, 2)
    p = waterfill_zf(H, snr)
    best = zf_sum_rate(H, p, snr)
    for q in np.linspace(0, 1, 201):
        assert zf_sum_rate(H, [q, 1 - q], snr) <= best + 1e-12


def test_mean_capacity_matches_per_carrier_average(rng):
    for m, u in ((3, 5), (9, 4)):
        H = random_channel(rng, 4, m, u)
        snr = SnrConfig(RHO, m, u)
        ref = np.mean([sum_capacity(H[f], uniform_power(u), snr) for f in range(4)])
        assert mean_capacity(H, RHO) == pytest.approx(ref, abs=1e-10)


def test_mean_capacity_n_scale(rng):
    H = random_channel(rng, 2, 3, 2)
    assert mean_capacity(H, RHO, n_scale=6) == pytest.approx(mean_capacity(H, RHO / 2), abs=1e-12)


def test_subset_capacity_empty_is_zero(rng):
    assert subset_capacity(random_channel(rng, 2, 4, 2), [], RHO) == 0.0


def test_subset_zf_rate(rng):
    H = random_channel(rng, 3, 8, 3)
    rate, ok = subset_zf_rate(H, [0, 1], RHO)
    assert (rate, ok) == (0.0, False)
    rate, ok = subset_zf_rate(H, [0, 2, 4, 6], RHO)
    assert ok and rate > 0
    snr = SnrConfig(RHO, 4, 3)
    ref = np.mean([
        zf_sum_rate(H[f][[0, 2, 4, 6]], waterfill_zf(H[f][[0, 2, 4, 6]], snr), snr)
        for f in range(3)
    ])
    assert rate == pytest.approx(ref, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 8), u=st.integers(1, 8),
       rho_db=st.floats(-20, 20))
def test_capacity_nonnegative_and_monotone_in_snr(seed, m, u, rho_db):
    H = random_channel(np.random.default_rng(seed), 2, m, u)
    rho = 10 ** (rho_db / 10)
    c1 = mean_capacity(H, rho)
    c2 = mean_capacity(H, 2 * rho)
    assert c1 >= 0
    assert c2 >= c1 - 1e-12


@settings(max_examples=40, deadline=None)
@given(gains=st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=16),
       budget=st.floats(0.01, 100))
def test_waterfill_property(gains, budget):
    a = np.array(gains)
    p, mu = waterfill(a, budget)
    assert p.sum() == pytest.approx(budget, rel=1e-12)
    assert kkt_residual(a, p, mu) <= 1e-9 * max(1.0, mu)
