"""Monte Carlo oracle for the closed forms.

Channels are drawn with a leading batch axis.  Estimates and errors are drawn
independently, ``g_hat ~ CN(0, gamma I)`` and ``err ~ CN(0, (beta - gamma) I)``,
which is exactly the joint law of an MMSE estimate and its error.  Powers of
the UatF terms are averaged over channels after taking the expectation over
unit-variance data symbols and noise in closed form, which removes variance
without touching the quantity under test.

Each logical batch draws from its own counter-based stream, so estimates do
not depend on how batches are distributed over workers.  Standard errors
come from batch means.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analytic
from .analytic import MR, PZF, SurveillanceDesign
from .scenario import ScenarioStatistics, make_rng

MIN_BATCHES = 30

# stream tags keep the oracle's draws apart from each other
_TAG_MOMENTS, _TAG_NOISE, _TAG_MSP, _TAG_COMBINER = 101, 102, 103, 104


class SingularCombinerError(np.linalg.LinAlgError):
    """The estimate Gram matrix of a ZF group is numerically singular."""


@dataclass(frozen=True)
class ChannelRealization:
    """A batch of small-scale fading draws; axis 0 indexes the draw.

    ``g_obs[b, m, k]`` is the N-vector from UT k to MN m, ``g_jam[b, m, k]``
    from MN m to UR k, ``f_mn[b, m, i]`` the N x N channel from MN i to MN m
    (zero when ``i == m``) and ``h_ut[b, l, k]`` the scalar UT l -> UR k gain.
    """

    g_obs: np.ndarray
    g_jam: np.ndarray
    f_mn: np.ndarray | None
    h_ut: np.ndarray
    ghat_obs: np.ndarray
    ghat_jam: np.ndarray
    err_obs: np.ndarray
    err_jam: np.ndarray

    @property
    def num_draws(self) -> int:
        return self.g_obs.shape[0]


def _cn(rng, shape, var):
    """Circular complex normal with elementwise variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_realization(
    stats: ScenarioStatistics,
    rng: np.random.Generator,
    num_draws: int = 1,
    *,
    inter_mn: bool = True,
    mn_pairs=None,
) -> ChannelRealization:
    """Draw ``num_draws`` independent fading blocks.

    ``mn_pairs`` (M x M bool) restricts the inter-MN blocks that are drawn;
    the others stay zero.  Use it only for blocks that cannot affect the
    quantity being estimated.
    """
    B, M, K, N = num_draws, stats.num_mns, stats.num_pairs, stats.num_antennas
    shape = (B, M, K, N)
    go, bo = stats.gamma_obs[None, :, :, None], stats.beta_obs[None, :, :, None]
    gj, bj = stats.gamma_jam[None, :, :, None], stats.beta_jam[None, :, :, None]
    ghat_obs = _cn(rng, shape, go)
    err_obs = _cn(rng, shape, np.maximum(bo - go, 0.0))
    ghat_jam = _cn(rng, shape, gj)
    err_jam = _cn(rng, shape, np.maximum(bj - gj, 0.0))
    f_mn = None
    if inter_mn:
        pairs = stats.beta_mn > 0
        if mn_pairs is not None:
            pairs &= np.asarray(mn_pairs, dtype=bool)
        rows, cols = np.nonzero(pairs)
        f_mn = np.zeros((B, M, M, N, N), dtype=complex)
        f_mn[:, rows, cols] = _cn(rng, (B, rows.size, N, N), stats.beta_mn[rows, cols][None, :, None, None])
    h_ut = _cn(rng, (B, K, K), stats.beta_untrusted[None])
    return ChannelRealization(
        g_obs=ghat_obs + err_obs,
        g_jam=ghat_jam + err_jam,
        f_mn=f_mn,
        h_ut=h_ut,
        ghat_obs=ghat_obs,
        ghat_jam=ghat_jam,
        err_obs=err_obs,
        err_jam=err_jam,
    )


# --------------------------------------------------------------------------
# combiners
# --------------------------------------------------------------------------

def mr_combiner(realization: ChannelRealization, m: int, k: int) -> np.ndarray:
    """MR combiner: the channel estimate itself, shape (B, N)."""
    return realization.ghat_obs[:, m, k, :]


def _zf_block(realization, stats, m, group, cond_limit=1e12):
    """ZF combiners of MN m for every UT in ``group``, shape (B, N, |group|)."""
    G = np.swapaxes(realization.ghat_obs[:, m, group, :], 1, 2)       # (B, N, w)
    gram = np.conj(np.swapaxes(G, 1, 2)) @ G                           # (B, w, w)
    cond = np.linalg.cond(gram)
    if not np.all(np.isfinite(cond)) or np.max(cond) > cond_limit:
        raise SingularCombinerError(
            f"MN {m}: estimate Gram matrix is singular (condition number {np.max(cond):.3g})"
        )
    inv = np.linalg.inv(gram)
    return G @ inv * stats.gamma_obs[m, group][None, None, :]


def pzf_combiner(
    realization: ChannelRealization, stats: ScenarioStatistics, m: int, zf_row, k: int
) -> np.ndarray:
    """PZF combiner of MN m for UT k, shape (B, N).

    ``zf_row`` is the boolean ZF membership of MN m over UTs.  UTs outside the
    ZF group get the MR combiner.
    """
    group = np.flatnonzero(zf_row)
    if k not in group:
        return mr_combiner(realization, m, k)
    if group.size >= stats.num_antennas:
        raise analytic.InvalidDesignError(f"|W_m| = {group.size} needs N >= {group.size + 1}")
    V = _zf_block(realization, stats, m, group)
    return V[:, :, int(np.searchsorted(group, k))]


def _combiners(realization, stats, design, scheme):
    """All combiners, shape (B, M, K, N); zero rows for jamming MNs."""
    V = realization.ghat_obs.copy()
    V[:, design.mode == 1] = 0.0
    if scheme == PZF and design.zf_mask is not None:
        for m in design.observers:
            group = np.flatnonzero(design.zf_mask[m])
            if group.size == 0:
                continue
            if group.size >= stats.num_antennas:
                raise analytic.InvalidDesignError(f"MN {m}: |W_m| >= N")
            V[:, m][:, group] = np.swapaxes(_zf_block(realization, stats, m, group), 1, 2)
    return V


def zf_orthogonality_residual(realization: ChannelRealization, stats, m: int, zf_row) -> float:
    """Worst ``|v_k^H g_hat_l - gamma_k delta_kl| / gamma_k`` over the ZF group."""
    group = np.flatnonzero(zf_row)
    V = _zf_block(realization, stats, m, group)                         # (B, N, w)
    G = np.swapaxes(realization.ghat_obs[:, m, group, :], 1, 2)
    inner = np.conj(np.swapaxes(V, 1, 2)) @ G                           # (B, w, w)
    target = np.diag(stats.gamma_obs[m, group])[None]
    scale = stats.gamma_obs[m, group][None, :, None]
    return float(np.max(np.abs(inner - target) / scale))


# --------------------------------------------------------------------------
# batching
# --------------------------------------------------------------------------

def batch_plan(num_draws: int, max_batch: int = 2000) -> list[int]:
    """Split ``num_draws`` into at least ``MIN_BATCHES`` near-equal batches."""
    if num_draws < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} draws, got {num_draws}")
    count = max(MIN_BATCHES, math.ceil(num_draws / max_batch))
    base, extra = divmod(num_draws, count)
    return [base + (i < extra) for i in range(count)]


def _run_batches(fn, args, sizes, workers):
    tasks = [(args, b, n) for b, n in enumerate(sizes)]
    if workers is None or workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves task order, so accumulation order is fixed
        return list(pool.map(fn, tasks))


def _mean_se(values, weights):
    """Weighted mean and batch-means standard error along axis 0."""
    values = np.asarray(values)
    w = np.asarray(weights, dtype=float)
    w = w.reshape((-1,) + (1,) * (values.ndim - 1)) / w.sum()
    mean = np.sum(w * values, axis=0)
    nb = values.shape[0]
    se = np.sqrt(np.sum(w * np.abs(values - mean) ** 2, axis=0) / (nb - 1))
    return mean, se


# --------------------------------------------------------------------------
# observing-link moments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    """Empirical UatF moments of link k with standard errors and closed forms."""

    k: int
    num_draws: int
    ds_mean: float
    ds_mean_se: float
    bu_power: float
    bu_power_se: float
    ui_power: np.ndarray
    ui_power_se: np.ndarray
    mi_power: np.ndarray
    mi_power_se: np.ndarray
    an_power: float
    an_power_se: float
    closed_form: analytic.ClosedFormMoments

    def z_scores(self) -> dict:
        """Gap between empirical and closed-form values in standard errors."""
        cf = self.closed_form

        def z(emp, se, ref):
            emp, se, ref = np.atleast_1d(emp), np.atleast_1d(se), np.atleast_1d(ref)
            out = np.zeros_like(emp, dtype=float)
            nz = se > 0
            out[nz] = np.abs(emp[nz] - ref[nz]) / se[nz]
            out[~nz] = np.where(np.isclose(emp[~nz], ref[~nz], rtol=1e-12, atol=0.0), 0.0, np.inf)
            return out

        return {
            "ds_mean": z(self.ds_mean, self.ds_mean_se, cf.ds_mean),
            "bu_power": z(self.bu_power, self.bu_power_se, cf.bu_power),
            "ui_power": np.delete(z(self.ui_power, self.ui_power_se, cf.ui_power), self.k),
            "mi_power": z(self.mi_power, self.mi_power_se, cf.mi_power),
            "an_power": z(self.an_power, self.an_power_se, cf.an_power),
        }

    def to_dict(self) -> dict:
        cf = self.closed_form
        return {
            "k": self.k,
            "num_draws": self.num_draws,
            "empirical": {
                "ds_mean": [self.ds_mean, self.ds_mean_se],
                "bu_power": [self.bu_power, self.bu_power_se],
                "ui_power": [self.ui_power.tolist(), self.ui_power_se.tolist()],
                "mi_power": [self.mi_power.tolist(), self.mi_power_se.tolist()],
                "an_power": [self.an_power, self.an_power_se],
            },
            "closed_form": {
                "ds_mean": cf.ds_mean,
                "bu_power": cf.bu_power,
                "ui_power": cf.ui_power.tolist(),
                "mi_power": cf.mi_power.tolist(),
                "an_power": cf.an_power,
            },
        }


def _moment_batch(task):
    (stats, design, scheme, seed), b, n = task
    rng = make_rng(seed, _TAG_MOMENTS, b)
    jamming = bool(np.any(design.mode == 1))
    # only jammer -> observer blocks reach the combiner output
    pairs = np.outer(design.mode == 0, design.mode == 1)
    real = draw_realization(stats, rng, n, inter_mn=jamming, mn_pairs=pairs)
    V = _combiners(real, stats, design, scheme)                          # (B, M, K, N)
    w = design.alpha * (1 - design.mode)[:, None]                        # (M, K)
    # inner[b, m, k, l] = v_mk^H g_ml
    inner = np.conj(V) @ np.swapaxes(real.g_obs, 2, 3)
    signal = np.sqrt(stats.rho_ut) * np.sum(w[None, :, :, None] * inner, axis=1)  # (B, K, K)
    K = stats.num_pairs
    diag = np.arange(K)
    ds = signal[:, diag, diag]                                           # (B, K)
    cross = np.abs(signal) ** 2
    cross[:, diag, diag] = 0.0
    an = np.sum(w[None] ** 2 * np.sum(np.abs(V) ** 2, axis=-1), axis=1)
    mi = np.zeros((n, K, K))
    if jamming:
        # precoded jamming streams P[b, i, l] = a_i sqrt(theta_il) conj(g_hat^J_il)
        amp = design.mode[:, None] * np.sqrt(np.maximum(design.theta, 0.0))
        P = amp[None, :, :, None] * np.conj(real.ghat_jam)
        M, N = stats.num_mns, stats.num_antennas
        # U[b, m, p, l] = sum_i F_mi P_il: jamming leaked into MN m
        F = np.swapaxes(real.f_mn, 2, 3).reshape(n, M, N, M * N)
        U = F @ np.swapaxes(P, 2, 3).reshape(n, 1, M * N, K)
        Vw = np.conj(V) * w[None, :, :, None]
        leak = np.sum(Vw @ U, axis=1)                                    # (B, K, K)
        mi = stats.rho_j * np.abs(leak) ** 2
    ds_sum = ds.sum(axis=0)
    ds_sq = (np.abs(ds) ** 2).sum(axis=0)
    return ds_sum / n, ds_sq / n, cross.mean(axis=0), mi.mean(axis=0), an.mean(axis=0)


def _all_moments(stats, design, scheme, num_draws, seed, workers):
    sizes = batch_plan(num_draws)
    parts = _run_batches(_moment_batch, (stats, design, scheme, seed), sizes, workers)
    ds_b = np.array([p[0] for p in parts])            # (nb, K) complex
    sq_b = np.array([p[1] for p in parts])
    ui_b = np.array([p[2] for p in parts])            # (nb, K, K)
    mi_b = np.array([p[3] for p in parts])
    an_b = np.array([p[4] for p in parts])
    ds_mean, ds_se = _mean_se(ds_b, sizes)
    # per-batch variance around the pooled mean, then batch means
    bu_b = sq_b - 2 * np.real(np.conj(ds_mean)[None] * ds_b) + np.abs(ds_mean)[None] ** 2
    bu, bu_se = _mean_se(bu_b, sizes)
    ui, ui_se = _mean_se(ui_b, sizes)
    mi, mi_se = _mean_se(mi_b, sizes)
    an, an_se = _mean_se(an_b, sizes)
    return ds_mean, ds_se, bu, bu_se, ui, ui_se, mi, mi_se, an, an_se


def empirical_moments_all(
    stats: ScenarioStatistics,
    design: SurveillanceDesign,
    scheme: str = MR,
    num_draws: int = 200_000,
    seed: int = 0,
    *,
    workers: int | None = None,
    pzf_exact: bool = True,
) -> list[MomentReport]:
    """Moment reports for every link from one shared set of draws."""
    if num_draws < 1000:
        raise ValueError("use at least 1000 draws")
    if scheme not in (MR, PZF):
        raise ValueError(f"unknown combining scheme {scheme!r}")
    ds, ds_se, bu, bu_se, ui, ui_se, mi, mi_se, an, an_se = _all_moments(
        stats, design, scheme, num_draws, seed, workers
    )
    reports = []
    for k in range(stats.num_pairs):
        reports.append(
            MomentReport(
                k=k,
                num_draws=num_draws,
                ds_mean=float(np.real(ds[k])),
                ds_mean_se=float(ds_se[k]),
                bu_power=float(bu[k]),
                bu_power_se=float(bu_se[k]),
                ui_power=ui[k].copy(),
                ui_power_se=ui_se[k].copy(),
                mi_power=mi[k].copy(),
                mi_power_se=mi_se[k].copy(),
                an_power=float(an[k]),
                an_power_se=float(an_se[k]),
                closed_form=analytic.closed_form_moments(design, stats, scheme, k, pzf_exact=pzf_exact),
            )
        )
    return reports


def empirical_moments(stats, design, scheme, k, num_draws=200_000, seed=0, **kw) -> MomentReport:
    if not 0 <= k < stats.num_pairs:
        raise IndexError(f"link index {k} out of range")
    return empirical_moments_all(stats, design, scheme, num_draws, seed, **kw)[k]


def empirical_uatf_sinr(report: MomentReport) -> float:
    noise = report.bu_power + report.ui_power.sum() + report.mi_power.sum() + report.an_power
    if not noise > 0:
        raise ZeroDivisionError("UatF denominator is zero")
    return report.ds_mean**2 / noise


# --------------------------------------------------------------------------
# untrusted links
# --------------------------------------------------------------------------

def _noise_batch(task):
    (stats, design, seed), b, n = task
    rng = make_rng(seed, _TAG_NOISE, b)
    real = draw_realization(stats, rng, n, inter_mn=False)
    amp = design.mode[:, None] * np.sqrt(np.maximum(design.theta, 0.0))
    P = amp[None, :, :, None] * np.conj(real.ghat_jam)                   # (B, M, K, N)
    # z[b, k, l]: stream l received at UR k
    z = np.sum(real.g_jam @ np.swapaxes(P, 2, 3), axis=1)
    jam = stats.rho_j * np.sum(np.abs(z) ** 2, axis=2)
    h2 = np.abs(real.h_ut) ** 2
    K = stats.num_pairs
    ut = stats.rho_ut * (h2.sum(axis=1) - h2[:, np.arange(K), np.arange(K)])
    return (ut + jam + 1.0).mean(axis=0)


def empirical_ur_noise_all(stats, design, num_draws=200_000, seed=0, *, workers=None):
    """Mean effective noise power at every UR with its standard error."""
    sizes = batch_plan(num_draws)
    parts = _run_batches(_noise_batch, (stats, design, seed), sizes, workers)
    return _mean_se(np.array(parts), sizes)


def empirical_ur_noise(stats, design, k, num_draws=200_000, seed=0, **kw) -> float:
    if not 0 <= k < stats.num_pairs:
        raise IndexError(f"link index {k} out of range")
    mean, _ = empirical_ur_noise_all(stats, design, num_draws, seed, **kw)
    return float(mean[k])


def empirical_msp(
    stats: ScenarioStatistics,
    design: SurveillanceDesign,
    scheme: str,
    k: int,
    num_draws: int = 1_000_000,
    seed: int = 0,
    *,
    pzf_exact: bool = True,
) -> float:
    """Fraction of monitored-link gains for which SINR_O >= SINR_UR.

    ``|h_kk|^2`` is exponential with mean ``beta^U_kk``; SINR_O and the
    effective noise come from the closed forms.
    """
    report = analytic.evaluate(design, stats, scheme, pzf_exact=pzf_exact)
    rng = make_rng(seed, _TAG_MSP, k)
    gain = rng.exponential(stats.beta_untrusted[k, k], size=num_draws)
    sinr_ur = analytic.sinr_untrusted(gain, report.xi[k], stats.rho_ut)
    return float(np.mean(report.sinr_obs[k] >= sinr_ur))


# --------------------------------------------------------------------------
# large-array trends
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrendReport:
    sizes: list
    values: dict

    def decreasing(self, key: str) -> bool:
        v = self.values[key]
        return all(b < a for a, b in zip(v, v[1:]))

    def band(self, key: str) -> float:
        """Ratio of the largest to the smallest value of ``key``."""
        v = np.asarray(self.values[key], dtype=float)
        return float(v.max() / v.min()) if v.min() > 0 else math.inf


def large_m_check(
    family,
    scaling: str,
    scheme: str = MR,
    *,
    jam_energy: float | None = None,
    num_draws: int = 20_000,
    seed: int = 0,
    workers: int | None = None,
) -> TrendReport:
    """Empirical large-array trends over a family of ``(stats, design)`` points.

    ``scaling='observers'``: the worst non-DS UatF term relative to the
    squared mean desired signal, maximized over links and terms; it should
    fall as observing MNs are added.  ``scaling='jammers'``: each point's
    jamming power is set to ``jam_energy / M_J``; the report holds the mean
    untrusted-link SINR ``rho_UT beta_kk / xi_k`` (averaged over links, with
    empirical ``xi``) and the total MI power at the observers.
    """
    sizes, values = [], {}
    for idx, (stats, design) in enumerate(family):
        if scaling == "observers":
            sizes.append(int(design.observers.size))
            reports = empirical_moments_all(stats, design, scheme, num_draws, seed + idx, workers=workers)
            worst = 0.0
            for r in reports:
                terms = [r.bu_power, r.an_power, *np.delete(r.ui_power, r.k), *r.mi_power]
                worst = max(worst, max(terms) / r.ds_mean**2)
            values.setdefault("max_normalized_term", []).append(worst)
        elif scaling == "jammers":
            mj = int(design.jammers.size)
            if mj == 0 or jam_energy is None:
                raise ValueError("jammer scaling needs jamming MNs and jam_energy")
            sizes.append(mj)
            scaled = stats.with_rho_j(jam_energy / mj)
            xi, _ = empirical_ur_noise_all(scaled, design, num_draws, seed + idx, workers=workers)
            sinr = scaled.rho_ut * np.diag(scaled.beta_untrusted) / xi
            values.setdefault("mean_sinr_ur", []).append(float(np.mean(sinr)))
            reports = empirical_moments_all(scaled, design, scheme, num_draws, seed + idx, workers=workers)
            values.setdefault("mi_power", []).append(float(np.mean([r.mi_power.sum() for r in reports])))
        else:
            raise ValueError(f"unknown scaling {scaling!r}")
    return TrendReport(sizes=sizes, values=values)
