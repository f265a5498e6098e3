import numpy as np
import pytest
from hypothesis import settings

from cfsurv.analytic import SurveillanceDesign
from cfsurv.config import SystemConfig
from cfsurv.scenario import ScenarioStatistics, make_scenario

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def small_config():
    return SystemConfig(num_mns=6, antennas_per_mn=4, num_pairs=3, area_side=0.4)


@pytest.fixture
def small_stats(small_config):
    return make_scenario(small_config, 0)[1]


def toy_stats(M=2, K=2, N=2, seed=0, rho_j=1.0, rho_ut=1.0, untrusted=None):
    """Hand-sized statistics with O(1) gains, convenient for exact algebra."""
    rng = np.random.default_rng(seed)
    bo = rng.uniform(0.5, 2.0, (M, K))
    bj = rng.uniform(0.5, 2.0, (M, K))
    bmn = rng.uniform(0.1, 1.0, (M, M))
    np.fill_diagonal(bmn, 0.0)
    bu = rng.uniform(0.1, 1.0, (K, K)) if untrusted is None else np.asarray(untrusted, float)
    return ScenarioStatistics(
        beta_obs=bo, beta_jam=bj, beta_untrusted=bu, beta_mn=bmn,
        gamma_obs=0.8 * bo, gamma_jam=0.7 * bj,
        rho_t=10.0, rho_j=rho_j, rho_ut=rho_ut, num_antennas=N,
    )


def design_for(stats, mode, theta=None, alpha=None, zf_mask=None):
    mode = np.asarray(mode, dtype=int)
    M, K = stats.num_mns, stats.num_pairs
    if theta is None:
        theta = np.zeros((M, K))
    if alpha is None:
        alpha = np.repeat((1 - mode)[:, None], K, axis=1).astype(float)
    return SurveillanceDesign(mode=mode, theta=np.asarray(theta, float), alpha=np.asarray(alpha, float),
                              zf_mask=zf_mask)
