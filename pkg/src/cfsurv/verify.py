"""Oracle checks of the closed forms on seeded random instances.

Each check returns a :class:`CheckResult` with the worst observed gap and a
pass flag.  Instances are small on purpose: the oracle's cost grows with the
number of inter-MN blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import analytic, oracle
from .analytic import MR, PZF, SurveillanceDesign
from .config import SystemConfig
from .scenario import make_rng, make_scenario

_TAG_INSTANCE = 500


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    threshold: float
    details: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.4g} (threshold {self.threshold:g})"

    def to_dict(self) -> dict:
        return {
            "name": self.name, "passed": bool(self.passed), "worst": float(self.worst),
            "threshold": float(self.threshold), "details": self.details,
        }


def random_instance(
    seed: int,
    *,
    num_mns: int,
    antennas: int,
    num_pairs: int,
    zf_max: int = 0,
    area_side: float = 0.5,
):
    """Scenario plus a random valid design with mixed modes.

    At least one MN observes and at least one jams; powers use a random share
    of each jammer's budget; weights are uniform in (0, 1].  With
    ``zf_max > 0`` every observing MN zero-forces a random group of
    0..zf_max UTs.
    """
    cfg = SystemConfig(
        num_mns=num_mns, antennas_per_mn=antennas, num_pairs=num_pairs,
        area_side=area_side, rng_seed=seed,
    )
    _, stats = make_scenario(cfg, 0)
    rng = make_rng(seed, _TAG_INSTANCE)
    mode = np.zeros(num_mns, dtype=int)
    num_jam = int(rng.integers(1, num_mns))
    mode[rng.choice(num_mns, size=num_jam, replace=False)] = 1
    share = rng.uniform(0.2, 1.0, size=(num_mns, num_pairs))
    share /= share.sum(axis=1, keepdims=True)
    budget = rng.uniform(0.3, 1.0, size=num_mns)
    theta = share * budget[:, None] / (antennas * stats.gamma_jam)
    theta *= mode[:, None]
    alpha = rng.uniform(0.05, 1.0, size=(num_mns, num_pairs)) * (1 - mode)[:, None]
    zf_mask = None
    if zf_max > 0:
        zf_mask = np.zeros((num_mns, num_pairs), dtype=bool)
        for m in np.flatnonzero(mode == 0):
            size = int(rng.integers(0, zf_max + 1))
            zf_mask[m, rng.choice(num_pairs, size=size, replace=False)] = True
    design = SurveillanceDesign(mode=mode, theta=theta, alpha=alpha, zf_mask=zf_mask)
    design.check(stats)
    return stats, design


def check_ur_noise(seeds, *, num_draws=200_000, rel_tol=0.02, workers=None) -> CheckResult:
    """Empirical effective noise at every UR against its closed form."""
    worst, details = 0.0, []
    for s in seeds:
        stats, design = random_instance(s, num_mns=8, antennas=2, num_pairs=3)
        emp, _ = oracle.empirical_ur_noise_all(stats, design, num_draws, seed=s, workers=workers)
        ref = analytic.xi_all(design, stats)
        gap = np.abs(emp / ref - 1.0)
        worst = max(worst, float(gap.max()))
        details.append({"seed": s, "relative_gap": gap.tolist()})
    return CheckResult("untrusted-link effective noise", worst <= rel_tol, worst, rel_tol, details)


def moment_instance(seed: int, scheme: str):
    if scheme == MR:
        return random_instance(seed, num_mns=6, antennas=3, num_pairs=2)
    # |W_m| <= N - 2 keeps the ZF combiner's power with a finite variance
    return random_instance(seed, num_mns=6, antennas=4, num_pairs=3, zf_max=2)


def check_moments(scheme, seeds, *, num_draws=200_000, z_max=3.0, sinr_tol=0.03, workers=None):
    """Every UatF moment within ``z_max`` standard errors; SINR within ``sinr_tol``.

    Returns two results: the moment z-scores and the assembled SINR gaps.
    """
    worst_z, worst_sinr = 0.0, 0.0
    details_z, details_s = [], []
    for s in seeds:
        stats, design = moment_instance(s, scheme)
        reports = oracle.empirical_moments_all(stats, design, scheme, num_draws, seed=s, workers=workers)
        sinr, _ = analytic.sinr_observe_all(design, stats, scheme)
        for r in reports:
            zs = {name: float(np.max(v, initial=0.0)) for name, v in r.z_scores().items()}
            worst_z = max(worst_z, max(zs.values()))
            gap = abs(oracle.empirical_uatf_sinr(r) / sinr[r.k] - 1.0)
            worst_sinr = max(worst_sinr, gap)
            details_z.append({"seed": s, "k": r.k, "z": zs})
            details_s.append({"seed": s, "k": r.k, "relative_gap": gap})
    return (
        CheckResult(f"{scheme} UatF moments", worst_z <= z_max, worst_z, z_max, details_z),
        CheckResult(f"{scheme} UatF SINR", worst_sinr <= sinr_tol, worst_sinr, sinr_tol, details_s),
    )


def check_pzf_identity(seed=0, *, num_draws=10_000, antennas=8, group=3, resid_tol=1e-9, norm_tol=0.02):
    """ZF orthogonality on every draw and the mean combiner power."""
    cfg = SystemConfig(num_mns=2, antennas_per_mn=antennas, num_pairs=group + 1, area_side=0.5, rng_seed=seed)
    _, stats = make_scenario(cfg, 0)
    rng = make_rng(seed, 600)
    real = oracle.draw_realization(stats, rng, num_draws, inter_mn=False)
    row = np.zeros(cfg.num_pairs, dtype=bool)
    row[:group] = True
    resid = oracle.zf_orthogonality_residual(real, stats, 0, row)
    gaps = []
    for k in range(group):
        v = oracle.pzf_combiner(real, stats, 0, row, k)
        emp = np.mean(np.sum(np.abs(v) ** 2, axis=1))
        ref = stats.gamma_obs[0, k] / (antennas - group)
        gaps.append(abs(emp / ref - 1.0))
    return (
        CheckResult("ZF orthogonality residual", resid <= resid_tol, resid, resid_tol),
        CheckResult("ZF combiner mean power", max(gaps) <= norm_tol, max(gaps), norm_tol, [float(g) for g in gaps]),
    )


def check_msp(seeds, *, num_draws=1_000_000, abs_tol=0.005) -> CheckResult:
    worst, details = 0.0, []
    for s in seeds:
        scheme = MR if s % 2 == 0 else PZF
        stats, design = moment_instance(s, scheme)
        ref = analytic.evaluate(design, stats, scheme).msp
        for k in range(stats.num_pairs):
            emp = oracle.empirical_msp(stats, design, scheme, k, num_draws, seed=s)
            gap = abs(emp - ref[k])
            worst = max(worst, gap)
            details.append({"seed": s, "k": k, "scheme": scheme, "empirical": emp, "closed_form": float(ref[k])})
    return CheckResult("MSP closed form", worst <= abs_tol, worst, abs_tol, details)


def run_suite(seed: int = 0, *, quick: bool = False, workers=None) -> list[CheckResult]:
    """The oracle checks behind ``cfsurv verify``."""
    n_inst = 3 if quick else 10
    draws = 20_000 if quick else 200_000
    seeds = [seed + i for i in range(n_inst)]
    results = [check_ur_noise(seeds, num_draws=draws, workers=workers)]
    for scheme in (MR, PZF):
        results.extend(check_moments(scheme, seeds, num_draws=draws, workers=workers,
                                     sinr_tol=0.03 if not quick else 0.1))
    results.extend(check_pzf_identity(seed, num_draws=10_000))
    results.append(check_msp(seeds, num_draws=100_000 if quick else 1_000_000))
    return results


def suite_json(results) -> str:
    payload = {"passed": all(r.passed for r in results), "checks": [r.to_dict() for r in results]}
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"
