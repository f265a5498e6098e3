import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfsurv import analytic
from cfsurv.analytic import MR, PZF, InvalidDesignError
from cfsurv.scenario import ColocatedStatistics

from conftest import design_for, toy_stats


def random_design(stats, seed, zf_max=0):
    rng = np.random.default_rng(seed)
    M, K, N = stats.num_mns, stats.num_pairs, stats.num_antennas
    mode = (rng.uniform(size=M) < 0.4).astype(int)
    mode[0] = 0
    share = rng.uniform(size=(M, K))
    theta = share / share.sum(axis=1, keepdims=True) / (N * stats.gamma_jam) * rng.uniform(0.1, 1.0)
    theta *= mode[:, None]
    alpha = rng.uniform(0.1, 1.0, (M, K)) * (1 - mode)[:, None]
    zf = None
    if zf_max:
        zf = np.zeros((M, K), dtype=bool)
        for m in range(M):
            zf[m, rng.choice(K, size=int(rng.integers(0, zf_max + 1)), replace=False)] = True
    return design_for(stats, mode, theta, alpha, zf)


def test_xi_without_jammers():
    stats = toy_stats(M=3, K=3, rho_ut=2.0)
    d = design_for(stats, [0, 0, 0])
    bu = stats.beta_untrusted
    for k in range(3):
        expected = 2.0 * (bu[:, k].sum() - bu[k, k]) + 1.0
        assert analytic.xi_untrusted(d, stats, k) == pytest.approx(expected)


def test_xi_single_pair_is_noise_only():
    stats = toy_stats(M=2, K=1)
    assert analytic.xi_untrusted(design_for(stats, [0, 0]), stats, 0) == 1.0


def test_xi_index_error():
    stats = toy_stats()
    with pytest.raises(IndexError):
        analytic.xi_untrusted(design_for(stats, [0, 0]), stats, 5)


def test_xi_single_antenna_hand_formula():
    # N=1, one jammer m=1: incoherent rho_J beta_1k sum_l theta gamma, coherent rho_J theta_1k gamma_1k^2
    stats = toy_stats(M=2, K=2, N=1, rho_j=3.0, rho_ut=2.0)
    theta = np.array([[0.0, 0.0], [0.2, 0.1]])
    d = design_for(stats, [0, 1], theta)
    bj, gj, bu = stats.beta_jam, stats.gamma_jam, stats.beta_untrusted
    load = 0.2 * gj[1, 0] + 0.1 * gj[1, 1]
    for k in range(2):
        expected = 2.0 * bu[1 - k, k] + 3.0 * (bj[1, k] * load + theta[1, k] * gj[1, k] ** 2) + 1.0
        assert analytic.xi_untrusted(d, stats, k) == pytest.approx(expected)


def test_sinr_untrusted_basics():
    assert analytic.sinr_untrusted(0.0, 3.0, 5.0) == 0.0
    assert analytic.sinr_untrusted(1.0, 4.0, 2.0) == pytest.approx(0.5 * analytic.sinr_untrusted(1.0, 2.0, 2.0))
    stats = toy_stats()
    d = design_for(stats, [0, 1], theta=[[0, 0], [0.1, 0.1]])
    xi = analytic.xi_untrusted(d, stats, 0)
    bkk = stats.beta_untrusted[0, 0]
    assert analytic.sinr_untrusted(bkk, xi, stats.rho_ut) == pytest.approx(stats.rho_ut * bkk / xi)


def test_mr_single_node_hand_reduction():
    stats = toy_stats(M=1, K=1, N=4, rho_ut=5.0)
    d = design_for(stats, [0])
    g, b = stats.gamma_obs[0, 0], stats.beta_obs[0, 0]
    assert analytic.sinr_observe_mr(d, stats, 0) == pytest.approx(4 * 5.0 * g / (5.0 * b + 1))


def test_mr_zero_weights_and_all_jamming_are_zero(caplog):
    stats = toy_stats()
    assert analytic.sinr_observe_mr(design_for(stats, [0, 0], alpha=np.zeros((2, 2))), stats, 0) == 0.0
    rep = analytic.evaluate(design_for(stats, [1, 1]), stats)
    assert np.all(rep.sinr_obs == 0) and rep.degenerate == (0, 1)


def test_pzf_full_zf_single_node():
    stats = toy_stats(M=1, K=2, N=5, rho_ut=3.0)
    d = design_for(stats, [0], zf_mask=np.ones((1, 2), bool))
    g, b = stats.gamma_obs[0], stats.beta_obs[0]
    dof = 5 - 2
    for k in range(2):
        expected = 3.0 * g[k] ** 2 / (3.0 * g[k] * np.sum(b - g) / dof + g[k] / dof)
        assert analytic.sinr_observe_pzf(d, stats, k) == pytest.approx(expected)


def test_pzf_rejects_oversized_group():
    stats = toy_stats(M=1, K=2, N=2)
    d = design_for(stats, [0], zf_mask=np.ones((1, 2), bool))
    with pytest.raises(InvalidDesignError):
        analytic.sinr_observe_pzf(d, stats, 0)
    with pytest.raises(InvalidDesignError):
        d.check(stats)


@given(st.integers(0, 10_000))
def test_pzf_without_groups_equals_mr(seed):
    stats = toy_stats(M=4, K=3, N=3, seed=seed % 7, rho_j=2.0, rho_ut=3.0)
    d = random_design(stats, seed)
    mr = analytic.sinr_observe_all(d, stats, MR)[0]
    pzf = analytic.sinr_observe_all(d.with_(zf_mask=np.zeros((4, 3), bool)), stats, PZF)[0]
    np.testing.assert_allclose(pzf, mr, rtol=1e-12)


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_weight_scale_invariance(seed, c):
    stats = toy_stats(M=4, K=3, N=3, seed=seed % 5, rho_j=2.0)
    d = random_design(stats, seed, zf_max=2)
    for scheme in (MR, PZF):
        base = analytic.sinr_observe_all(d, stats, scheme)[0]
        alpha = d.alpha.copy()
        alpha[:, 1] *= c
        scaled = analytic.sinr_observe_all(d.with_(alpha=alpha), stats, scheme)[0]
        np.testing.assert_allclose(scaled, base, rtol=1e-10)


@given(st.integers(0, 10_000))
def test_surrogate_is_lower_bound(seed):
    stats = toy_stats(M=5, K=3, N=2, seed=seed % 5, rho_j=4.0)
    d = random_design(stats, seed)
    exact = analytic.xi_all(d, stats)
    lower = analytic.xi_all(d, stats, surrogate=True)
    assert np.all(lower <= exact * (1 + 1e-12))
    if d.jammers.size <= 1:
        np.testing.assert_allclose(lower, exact, rtol=1e-12)


def test_surrogate_tight_cases_and_gap():
    stats = toy_stats(M=3, K=2, N=3, rho_j=2.0)
    none = design_for(stats, [0, 0, 0])
    assert analytic.xi_surrogate(none, stats, 0) == analytic.xi_untrusted(none, stats, 0)
    one = design_for(stats, [0, 1, 0], theta=[[0, 0], [0.1, 0.2], [0, 0]])
    assert analytic.xi_surrogate(one, stats, 1) == pytest.approx(analytic.xi_untrusted(one, stats, 1))
    # two jammers with equal theta * gamma on link 0: coherent 4 t^2 vs surrogate 2 t^2 (t = sqrt(theta) gamma)
    gj = stats.gamma_jam[1:, 0]
    t = 0.05
    theta = np.zeros((3, 2))
    theta[1:, 0] = t**2 / gj**2
    two = design_for(stats, [0, 1, 1], theta=theta)
    gap = analytic.xi_untrusted(two, stats, 0) - analytic.xi_surrogate(two, stats, 0)
    expected = 2.0 * 9 * (4 * t**2 - (t**2 / gj[0] ** 2 * gj[0] ** 2 + t**2 / gj[1] ** 2 * gj[1] ** 2))
    assert gap == pytest.approx(expected)


def test_msp_closed_form_properties():
    assert analytic.msp(0.0, 2.0, 1.0, 1.0) == 0.0
    assert analytic.msp(1e9, 2.0, 1.0, 1.0) == pytest.approx(1.0)
    s = np.linspace(0.1, 5, 20)
    assert np.all(np.diff(analytic.msp(s, 2.0, 1.0, 1.0)) > 0)
    assert np.all(np.diff(analytic.msp(1.0, s, 1.0, 1.0)) > 0)
    assert np.all(np.diff(analytic.msp(1.0, 2.0, s, 1.0)) < 0)
    with pytest.raises(ValueError):
        analytic.msp(1.0, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("scheme", [MR, PZF])
@pytest.mark.parametrize("exact", [True, False])
def test_moment_terms_reassemble_sinr(scheme, exact):
    stats = toy_stats(M=5, K=3, N=4, seed=2, rho_j=2.0, rho_ut=3.0)
    d = random_design(stats, 11, zf_max=2)
    sinr = analytic.sinr_observe_all(d, stats, scheme, pzf_exact=exact)[0]
    for k in range(3):
        cf = analytic.closed_form_moments(d, stats, scheme, k, pzf_exact=exact)
        assert cf.uatf_sinr() == pytest.approx(sinr[k], rel=1e-12)


def test_literal_pzf_matches_exact_with_full_groups():
    stats = toy_stats(M=3, K=2, N=4, rho_j=2.0)
    d = random_design(stats, 3).with_(zf_mask=np.ones((3, 2), bool))
    a = analytic.sinr_observe_all(d, stats, PZF, pzf_exact=True)[0]
    b = analytic.sinr_observe_all(d, stats, PZF, pzf_exact=False)[0]
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_design_check_power_budget():
    stats = toy_stats(N=2)
    theta = np.zeros((2, 2))
    theta[1] = 1.0 / stats.gamma_jam[1]
    with pytest.raises(InvalidDesignError):
        design_for(stats, [0, 1], theta).check(stats)
    design_for(stats, [0, 1], analytic.equal_power([0, 1], stats)).check(stats)


def colocated(si_gain=0.0, n=6, K=2):
    rng = np.random.default_rng(4)
    bo, bj = rng.uniform(0.5, 1.5, K), rng.uniform(0.5, 1.5, K)
    return ColocatedStatistics(
        beta_obs=bo, beta_jam=bj, beta_untrusted=rng.uniform(0.2, 1, (K, K)),
        gamma_obs=0.9 * bo, gamma_jam=0.9 * bj, si_gain=si_gain,
        rho_t=10.0, rho_j=2.0, rho_ut=3.0, num_antennas=n,
    )


def test_colocated_reductions():
    co = colocated()
    g, b = co.gamma_obs, co.beta_obs
    mr = analytic.colocated_report(np.zeros(2), co, MR)
    np.testing.assert_allclose(mr.sinr_obs, 6 * 3.0 * g**2 / (3.0 * b.sum() * g + g))
    zf = analytic.colocated_report(np.zeros(2), co, PZF)
    dof = 6 - 2
    np.testing.assert_allclose(zf.sinr_obs, 3.0 * g**2 / (3.0 * np.sum(b - g) / dof * g + g / dof))
    with pytest.raises(InvalidDesignError):
        analytic.colocated_report(np.zeros(2), colocated(n=2), PZF)


@pytest.mark.parametrize("scheme", [MR, PZF])
def test_colocated_equals_two_node_cell_free(scheme):
    co = colocated(si_gain=0.3)
    theta = np.array([0.05, 0.02])
    cf = co.as_cell_free()
    zf = None if scheme == MR else np.array([[True, True], [False, False]])
    d = design_for(cf, [0, 1], theta=np.vstack([np.zeros(2), theta]), zf_mask=zf)
    direct = analytic.colocated_report(theta, co, scheme)
    via = analytic.evaluate(d, cf, scheme)
    np.testing.assert_allclose(direct.sinr_obs, via.sinr_obs, rtol=1e-12)
    np.testing.assert_allclose(direct.xi, via.xi, rtol=1e-12)
