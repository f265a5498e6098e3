"""Closed-form performance of cell-free proactive surveillance.

Every expression here uses long-term statistics only.  Observing SINRs are
use-and-then-forget (UatF) bounds at the CPU; the untrusted-link SINR is
written as ``rho_UT |h_kk|^2 / xi_k`` with ``xi_k`` the effective noise power
at UR k.  The monitoring success probability (MSP) follows from the
exponential distribution of ``|h_kk|^2``.

Two PZF variants are offered.  ``pzf_exact=True`` (the default) keeps the
full channel variance ``beta`` for interferers that a zero-forcing MN does
not null (UTs in its MR group); ``pzf_exact=False`` applies ``beta - gamma``
to every interferer, which is exact only when each ZF group holds all UTs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .scenario import ColocatedStatistics, ScenarioStatistics

log = logging.getLogger(__name__)

MR = "MR"
PZF = "PZF"
SCHEMES = (MR, PZF)


class InvalidDesignError(ValueError):
    """A design violates a structural requirement of the chosen scheme."""


@dataclass(frozen=True)
class SurveillanceDesign:
    """Decision variables of the surveillance system.

    Attributes
    ----------
    mode : ndarray of int, shape (M,)
        1 for a jamming MN, 0 for an observing MN.
    theta : ndarray, shape (M, K)
        Jamming power-allocation coefficients.
    alpha : ndarray, shape (M, K)
        MN-weighting coefficients applied at the CPU.
    zf_mask : ndarray of bool, shape (M, K), optional
        ``zf_mask[m, k]`` is True when MN m zero-forces UT k (``k in W_m``);
        the remaining UTs form the MR group ``S_m``.  ``None`` means pure MR.
    """

    mode: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    zf_mask: np.ndarray | None = None

    @property
    def num_mns(self) -> int:
        return self.mode.shape[0]

    @property
    def jammers(self) -> np.ndarray:
        return np.flatnonzero(self.mode == 1)

    @property
    def observers(self) -> np.ndarray:
        return np.flatnonzero(self.mode == 0)

    def with_(self, **changes) -> "SurveillanceDesign":
        return replace(self, **changes)

    def check(self, stats: ScenarioStatistics, tol: float = 1e-9) -> None:
        """Raise :class:`InvalidDesignError` if any design invariant fails."""
        N = stats.num_antennas
        if np.any(self.theta < -tol):
            raise InvalidDesignError("negative power coefficient")
        if np.any(self.alpha < -tol) or np.any(self.alpha > 1 + tol):
            raise InvalidDesignError("weights must lie in [0, 1]")
        load = self.mode * np.sum(stats.gamma_jam * self.theta, axis=1)
        if np.any(load > (1.0 + tol) / N):
            raise InvalidDesignError("per-MN jamming power constraint violated")
        if self.zf_mask is not None:
            sizes = self.zf_mask.sum(axis=1)
            bad = (self.mode == 0) & (sizes > N - 1)
            if np.any(bad):
                raise InvalidDesignError(
                    f"ZF group larger than N-1={N - 1} at MN(s) {np.flatnonzero(bad).tolist()}"
                )


@dataclass(frozen=True)
class SinrReport:
    xi: np.ndarray
    sinr_obs: np.ndarray
    msp: np.ndarray
    degenerate: tuple = field(default=())

    @property
    def min_msp(self) -> float:
        return float(np.min(self.msp))


def unit_weights(mode, num_pairs: int) -> np.ndarray:
    mode = np.asarray(mode)
    return np.repeat((1 - mode)[:, None].astype(float), num_pairs, axis=1)


def equal_power(mode, stats: ScenarioStatistics) -> np.ndarray:
    """Each jamming MN spends its full budget, split evenly across URs.

    ``theta_mk = 1 / (N * sum_l gamma^J_ml)`` meets the power constraint
    with equality.
    """
    mode = np.asarray(mode)
    K = stats.num_pairs
    total = stats.gamma_jam.sum(axis=1)
    theta = np.zeros((stats.num_mns, K))
    on = (mode == 1) & (total > 0)
    theta[on] = 1.0 / (stats.num_antennas * total[on])[:, None]
    return theta


def baseline_design(mode, stats: ScenarioStatistics, zf_mask=None) -> SurveillanceDesign:
    """Equal power allocation with unit weights on observing MNs."""
    mode = np.asarray(mode, dtype=int)
    return SurveillanceDesign(
        mode=mode,
        theta=equal_power(mode, stats),
        alpha=unit_weights(mode, stats.num_pairs),
        zf_mask=None if zf_mask is None else np.asarray(zf_mask, dtype=bool),
    )


# --------------------------------------------------------------------------
# untrusted links
# --------------------------------------------------------------------------

def _jam_load(design: SurveillanceDesign, stats: ScenarioStatistics) -> np.ndarray:
    """``a_i * sum_l theta_il * gamma^J_il`` per MN."""
    return design.mode * np.sum(design.theta * stats.gamma_jam, axis=1)


def _interference_floor(stats: ScenarioStatistics) -> np.ndarray:
    bu = stats.beta_untrusted
    return stats.rho_ut * (bu.sum(axis=0) - np.diag(bu)) + 1.0


def xi_all(design: SurveillanceDesign, stats: ScenarioStatistics, *, surrogate: bool = False) -> np.ndarray:
    """Effective noise power at every UR (vector over k)."""
    N = stats.num_antennas
    a = design.mode
    incoherent = N * stats.beta_jam.T @ _jam_load(design, stats)
    if surrogate:
        coherent = N**2 * np.sum(a[:, None] * design.theta * stats.gamma_jam**2, axis=0)
    else:
        amp = np.sqrt(np.maximum(design.theta, 0.0)) * stats.gamma_jam
        coherent = N**2 * np.sum(a[:, None] * amp, axis=0) ** 2
    return _interference_floor(stats) + stats.rho_j * (incoherent + coherent)


def _check_link(stats, k):
    if not 0 <= k < stats.num_pairs:
        raise IndexError(f"link index {k} out of range for K={stats.num_pairs}")


def xi_untrusted(design: SurveillanceDesign, stats: ScenarioStatistics, k: int) -> float:
    _check_link(stats, k)
    return float(xi_all(design, stats)[k])


def xi_surrogate(design: SurveillanceDesign, stats: ScenarioStatistics, k: int) -> float:
    """Lower bound on ``xi_k`` that is linear in the power coefficients."""
    _check_link(stats, k)
    return float(xi_all(design, stats, surrogate=True)[k])


def sinr_untrusted(h_gain, xi, rho_ut):
    return rho_ut * np.asarray(h_gain) / np.asarray(xi)


# --------------------------------------------------------------------------
# observing links
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ObserveTerms:
    """Pieces of the observing SINR, vectorized over links.

    ``SINR_k = numerator[k] / (mu[k] + rho_J * N * sum_i load[i] * varrho[i, k])``
    where ``load`` is the per-MN jamming load.
    """

    numerator: np.ndarray   # (K,)
    mu: np.ndarray          # (K,)
    varrho: np.ndarray      # (M, K)


def _zf_geometry(design, stats, scheme):
    M, K = stats.num_mns, stats.num_pairs
    N = stats.num_antennas
    if scheme == MR or design.zf_mask is None:
        return np.zeros((M, K), dtype=bool), np.zeros(M, dtype=int)
    z = np.asarray(design.zf_mask, dtype=bool) & (design.mode == 0)[:, None]
    sizes = z.sum(axis=1)
    if np.any(sizes > N - 1):
        raise InvalidDesignError(f"PZF needs |W_m| <= N-1 = {N - 1}; got max {sizes.max()}")
    return z, sizes


@dataclass(frozen=True)
class PerMnTerms:
    """Weight-free contributions of each observing MN to link k.

    With weights ``alpha`` the numerator is ``(sum_m alpha_mk c_mk)^2`` and
    the denominator is ``sum_m alpha_mk^2 (u_mk + rho_J N v_mk sum_i load_i beta_mi)``.
    Jamming MNs have all-zero rows.
    """

    c: np.ndarray   # (M, K)
    u: np.ndarray   # (M, K)
    v: np.ndarray   # (M, K)


def per_mn_terms(
    design: SurveillanceDesign, stats: ScenarioStatistics, scheme: str = MR, *, pzf_exact: bool = True
) -> PerMnTerms:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown combining scheme {scheme!r}")
    N = stats.num_antennas
    go, bo = stats.gamma_obs, stats.beta_obs
    obs = (1 - design.mode)[:, None].astype(float)
    beta_sum = bo.sum(axis=1)[:, None]

    if scheme == MR:
        c = np.sqrt(N * stats.rho_ut) * go * obs
        u = obs * (stats.rho_ut * go * beta_sum + go)
        return PerMnTerms(c, u, obs * go)

    z, sizes = _zf_geometry(design, stats, scheme)
    # rows without a ZF group never use the 1/(N-|W|) factor
    zf_scale = np.where(sizes > 0, 1.0 / np.maximum(N - sizes, 1), 0.0)[:, None]
    zfac = z * zf_scale
    mrfac = (~z) * float(N)
    c = np.sqrt(stats.rho_ut) * go * (z + mrfac) * obs
    if pzf_exact:
        # nulled interferers leave only their estimation error; others keep beta
        residual = beta_sum - (z * go).sum(axis=1)[:, None]
    else:
        residual = (bo - go).sum(axis=1)[:, None]
    interference = zfac * go * residual + mrfac * go * beta_sum
    weight = zfac + mrfac
    u = obs * (stats.rho_ut * interference + weight * go)
    return PerMnTerms(c, u, obs * weight * go)


def observe_terms(
    design: SurveillanceDesign, stats: ScenarioStatistics, scheme: str = MR, *, pzf_exact: bool = True
) -> ObserveTerms:
    t = per_mn_terms(design, stats, scheme, pzf_exact=pzf_exact)
    a2 = design.alpha**2
    numerator = np.sum(design.alpha * t.c, axis=0) ** 2
    return ObserveTerms(numerator, np.sum(a2 * t.u, axis=0), stats.beta_mn.T @ (a2 * t.v))


def _observe_denominator(terms: ObserveTerms, design, stats) -> np.ndarray:
    load = _jam_load(design, stats)
    return terms.mu + stats.rho_j * stats.num_antennas * (load @ terms.varrho)


def sinr_observe_all(
    design: SurveillanceDesign, stats: ScenarioStatistics, scheme: str = MR, *, pzf_exact: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Observing SINR for every link plus a mask of degenerate links.

    A link is degenerate when no observing MN gives it positive weight; its
    SINR is defined as zero.
    """
    terms = observe_terms(design, stats, scheme, pzf_exact=pzf_exact)
    denom = _observe_denominator(terms, design, stats)
    degenerate = ~(terms.numerator > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(degenerate, 0.0, terms.numerator / np.where(denom > 0, denom, 1.0))
    return sinr, degenerate


def sinr_observe_mr(design: SurveillanceDesign, stats: ScenarioStatistics, k: int) -> float:
    _check_link(stats, k)
    sinr, degenerate = sinr_observe_all(design, stats, MR)
    if degenerate[k]:
        log.debug("link %d: no observing MN with positive weight, SINR defined as 0", k)
    return float(sinr[k])


def sinr_observe_pzf(
    design: SurveillanceDesign, stats: ScenarioStatistics, k: int, *, pzf_exact: bool = True
) -> float:
    _check_link(stats, k)
    if design.zf_mask is None:
        raise InvalidDesignError("PZF evaluation needs a grouping (zf_mask)")
    sinr, degenerate = sinr_observe_all(design, stats, PZF, pzf_exact=pzf_exact)
    if degenerate[k]:
        log.debug("link %d: no observing MN with positive weight, SINR defined as 0", k)
    return float(sinr[k])


def msp(sinr_obs, xi, beta_kk, rho_ut):
    """Monitoring success probability ``1 - exp(-SINR_O * xi / (beta_kk * rho_UT))``."""
    beta_kk = np.asarray(beta_kk, dtype=float)
    if np.any(beta_kk <= 0):
        raise ValueError("monitored link gain beta_kk must be positive")
    x = np.asarray(sinr_obs) * np.asarray(xi) / (beta_kk * rho_ut)
    return -np.expm1(-x)


def msp_exponent(sinr_obs, xi, stats: ScenarioStatistics) -> np.ndarray:
    return np.asarray(sinr_obs) * np.asarray(xi) / (np.diag(stats.beta_untrusted) * stats.rho_ut)


def evaluate(
    design: SurveillanceDesign, stats: ScenarioStatistics, scheme: str = MR, *, pzf_exact: bool = True
) -> SinrReport:
    """Full closed-form report for a design."""
    xi = xi_all(design, stats)
    sinr, degenerate = sinr_observe_all(design, stats, scheme, pzf_exact=pzf_exact)
    p = msp(sinr, xi, np.diag(stats.beta_untrusted), stats.rho_ut)
    return SinrReport(xi=xi, sinr_obs=sinr, msp=p, degenerate=tuple(np.flatnonzero(degenerate).tolist()))


def min_msp(design, stats, scheme=MR, **kw) -> float:
    return evaluate(design, stats, scheme, **kw).min_msp


# --------------------------------------------------------------------------
# UatF moments, term by term
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormMoments:
    ds_mean: float
    bu_power: float
    ui_power: np.ndarray   # (K,), zero at the observed link
    mi_power: np.ndarray   # (K,)
    an_power: float

    def uatf_sinr(self) -> float:
        noise = self.bu_power + self.ui_power.sum() + self.mi_power.sum() + self.an_power
        return self.ds_mean**2 / noise


def closed_form_moments(
    design: SurveillanceDesign,
    stats: ScenarioStatistics,
    scheme: str,
    k: int,
    *,
    pzf_exact: bool = True,
) -> ClosedFormMoments:
    """Mean desired signal and the powers of every UatF noise term for link k.

    Written per MN rather than vectorized, so that it stays a separate route
    from :func:`observe_terms`.
    """
    _check_link(stats, k)
    M, K, N = stats.num_mns, stats.num_pairs, stats.num_antennas
    rho, rho_j = stats.rho_ut, stats.rho_j
    go, bo = stats.gamma_obs, stats.beta_obs
    gj, bmn = stats.gamma_jam, stats.beta_mn
    a, th, al = design.mode, design.theta, design.alpha
    zf = np.zeros((M, K), dtype=bool) if (scheme == MR or design.zf_mask is None) else design.zf_mask

    ds = 0.0
    bu = 0.0
    an = 0.0
    ui = np.zeros(K)
    mi = np.zeros(K)
    for m in range(M):
        if a[m] == 1 or al[m, k] == 0:
            continue
        w2 = al[m, k] ** 2
        g = go[m, k]
        if zf[m, k]:
            dof = N - int(zf[m].sum())
            if dof < 1:
                raise InvalidDesignError(f"MN {m}: |W_m| >= N")
            ds += np.sqrt(rho) * al[m, k] * g
            bu += rho * w2 * g * (bo[m, k] - go[m, k]) / dof
            for l in range(K):
                if l == k:
                    continue
                nulled = zf[m, l] or not pzf_exact
                var = bo[m, l] - go[m, l] if nulled else bo[m, l]
                ui[l] += rho * w2 * g * var / dof
            an += w2 * g / dof
            for i in range(M):
                if a[i] == 1:
                    mi += rho_j * w2 * N * g * bmn[m, i] * th[i] * gj[i] / dof
        else:
            ds += np.sqrt(rho) * al[m, k] * N * g
            bu += rho * w2 * N * bo[m, k] * g
            for l in range(K):
                if l != k:
                    ui[l] += rho * w2 * N * g * bo[m, l]
            an += w2 * N * g
            for i in range(M):
                if a[i] == 1:
                    mi += rho_j * w2 * N**2 * g * bmn[m, i] * th[i] * gj[i]
    return ClosedFormMoments(ds_mean=ds, bu_power=bu, ui_power=ui, mi_power=mi, an_power=an)


# --------------------------------------------------------------------------
# co-located full-duplex baseline
# --------------------------------------------------------------------------

def colocated_report(theta, stats: ColocatedStatistics, scheme: str = MR) -> SinrReport:
    """Closed forms for the co-located FD massive MIMO monitor.

    ``theta`` holds one power coefficient per UR.  With ``scheme='PZF'`` the
    observing half applies full ZF, which needs ``N_CL >= K + 1``.
    """
    theta = np.asarray(theta, dtype=float)
    K = stats.num_pairs
    n = stats.num_antennas
    if theta.shape != (K,) or np.any(theta < 0):
        raise InvalidDesignError("theta must be a nonnegative K-vector")
    go, bo = stats.gamma_obs, stats.beta_obs
    gj, bj = stats.gamma_jam, stats.beta_jam
    rho, rho_j = stats.rho_ut, stats.rho_j

    bu = stats.beta_untrusted
    xi = (
        rho * (bu.sum(axis=0) - np.diag(bu))
        + rho_j * n * bj * np.sum(theta * gj)
        + rho_j * n**2 * theta * gj**2
        + 1.0
    )
    jam = rho_j * n * np.sum(theta * gj)
    if scheme == MR:
        mu = rho * bo.sum() * go + go
        varrho = go * stats.si_gain
        sinr = n * rho * go**2 / (mu + jam * varrho)
    elif scheme == PZF:
        if n <= K:
            raise InvalidDesignError(f"full ZF needs N_CL >= K+1; N_CL={n}, K={K}")
        mu = rho * go * np.sum(bo - go) / (n - K) + go / (n - K)
        varrho = go * stats.si_gain / (n - K)
        sinr = rho * go**2 / (mu + jam * varrho)
    else:
        raise ValueError(f"unknown combining scheme {scheme!r}")
    p = msp(sinr, xi, np.diag(bu), rho)
    return SinrReport(xi=xi, sinr_obs=sinr, msp=p)
