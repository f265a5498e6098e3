"""Max-min MSP design: mode assignment, power control, weighting, grouping.

The stages are decoupled heuristics.  Mode assignment and UT grouping are
greedy over closed-form min MSP; power control is a bisection over linear
feasibility problems built on the surrogate effective noise; weights have a
closed form for fixed powers.  :func:`solve_pipeline` chains them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .analytic import MR, PZF, SurveillanceDesign
from .config import SystemConfig
from .lp import LinearFeasibilityProblem, solve_feasibility
from .scenario import ScenarioStatistics

log = logging.getLogger(__name__)


@dataclass
class OptimizerTrace:
    """Objective history of one optimizer run.

    ``objective`` holds the value the optimizer keeps after every step and is
    non-decreasing by construction.  ``raw`` holds the value of each
    candidate that step produced, accepted or not.
    """

    objective: list = field(default_factory=list)
    raw: list = field(default_factory=list)
    moves: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "objective": [float(v) for v in self.objective],
            "raw": [float(v) for v in self.raw],
            "moves": [_plain(m) for m in self.moves],
            "reason": self.reason,
        }


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


# --------------------------------------------------------------------------
# power control
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerProblem:
    """Per-link pieces of the power-control objective for fixed modes and weights.

    The surrogate objective of link k is ``w_k * xi~_k(x) / D_k(x)`` where
    ``x_mk = N gamma^J_mk theta_mk`` are the scaled powers of jamming MNs.
    """

    jammers: np.ndarray        # (J,) MN indices
    weight: np.ndarray         # (K,) w_k
    mu: np.ndarray             # (K,)
    leak: np.ndarray           # (J, K) rho_J * varrho_jk, per unit of sum_l x_jl
    spread: np.ndarray         # (J, K) rho_J * beta^J_jk, per unit of sum_l x_jl
    focus: np.ndarray          # (J, K) rho_J * N * gamma^J_jk, per unit of x_jk
    floor: np.ndarray          # (K,)
    active: np.ndarray         # (J, K) bool, gamma^J_jk > 0

    @property
    def num_pairs(self) -> int:
        return self.mu.shape[0]

    def objective(self, x) -> np.ndarray:
        """Per-link surrogate objective at scaled powers ``x`` of shape (J, K)."""
        total = x.sum(axis=1)
        denom = self.mu + total @ self.leak
        xi = self.floor + total @ self.spread + np.sum(self.focus * x, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.weight > 0, self.weight * xi / denom, 0.0)

    def upper_bound(self) -> float:
        """``min_k w_k * max xi~_k / mu_k``: the denominator is at least ``mu_k``.

        Each jammer's best use of its unit budget for link k goes entirely to
        the stream with the largest coefficient.
        """
        xi_max = self.floor + np.sum(self.spread + self.focus * self.active, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            bounds = np.where(self.weight > 0, self.weight * xi_max / self.mu, 0.0)
        return float(np.min(bounds))


def objective_weights(design, stats: ScenarioStatistics, scheme: str, objective: str, *, pzf_exact=True):
    """Per-link weights ``w_k`` turning ``xi~/D`` into the optimized quantity.

    ``"msp"`` uses ``num_k / (beta^U_kk rho_UT)`` so that the objective is the
    MSP exponent and the max-min solution maximizes the smallest MSP.
    ``"ratio"`` uses 1, i.e. the bare ratio of effective noise to the
    observing SINR denominator.
    """
    terms = analytic.observe_terms(design, stats, scheme, pzf_exact=pzf_exact)
    if objective == "ratio":
        return np.where(terms.numerator > 0, 1.0, 0.0), terms
    if objective == "msp":
        return terms.numerator / (np.diag(stats.beta_untrusted) * stats.rho_ut), terms
    raise ValueError(f"unknown power objective {objective!r}")


def power_problem(
    design: SurveillanceDesign,
    stats: ScenarioStatistics,
    scheme: str = MR,
    *,
    objective: str = "msp",
    pzf_exact: bool = True,
) -> PowerProblem:
    jam = design.jammers
    N = stats.num_antennas
    weight, terms = objective_weights(design, stats, scheme, objective, pzf_exact=pzf_exact)
    gj = stats.gamma_jam[jam]
    return PowerProblem(
        jammers=jam,
        weight=weight,
        mu=terms.mu,
        leak=stats.rho_j * terms.varrho[jam],
        spread=stats.rho_j * stats.beta_jam[jam],
        focus=stats.rho_j * N * gj,
        floor=analytic._interference_floor(stats),
        active=gj > 0,
    )


def build_feasibility(problem: PowerProblem, zeta: float) -> LinearFeasibilityProblem:
    """Linear system whose feasibility means ``min_k objective_k >= zeta``.

    Row k reads ``zeta * D_k(x) - w_k * xi~_k(x) <= 0`` moved into ``A x <= b``
    form; one row per jammer bounds its scaled power sum by 1.  Variables are
    the active entries of ``x`` in row-major order.
    """
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    J, K = problem.active.shape
    rows_j, cols_k = np.nonzero(problem.active)
    n = rows_j.size
    w = problem.weight
    # coefficient of x_jl in row k
    per_total = zeta * problem.leak - w[None, :] * problem.spread      # (J, K)
    A_link = per_total[rows_j, :].T.copy()                             # (K, n)
    A_link[cols_k, np.arange(n)] -= w[cols_k] * problem.focus[rows_j, cols_k]
    b_link = w * problem.floor - zeta * problem.mu
    A_pow = np.zeros((J, n))
    A_pow[rows_j, np.arange(n)] = 1.0
    return LinearFeasibilityProblem(
        A=np.vstack([A_link, A_pow]), b=np.concatenate([b_link, np.ones(J)])
    )


def _theta_from_x(x, problem: PowerProblem, stats: ScenarioStatistics) -> np.ndarray:
    theta = np.zeros((stats.num_mns, stats.num_pairs))
    rows_j, cols_k = np.nonzero(problem.active)
    jam = problem.jammers
    gj = stats.gamma_jam[jam[rows_j], cols_k]
    theta[jam[rows_j], cols_k] = x / (stats.num_antennas * gj)
    # guard the per-MN budget against round-off from the solver
    load = stats.num_antennas * np.sum(theta * stats.gamma_jam, axis=1)
    over = load > 1.0
    theta[over] /= load[over][:, None]
    return theta


def bisection_power(
    design: SurveillanceDesign,
    stats: ScenarioStatistics,
    config: SystemConfig,
    scheme: str = MR,
    *,
    pzf_exact: bool = True,
    max_iter: int = 200,
):
    """Max-min power control for fixed modes and weights.

    Returns ``(theta, zeta, trace)``.  The bracket starts at
    ``[0, upper_bound]`` and halves until its width drops below
    ``bisection_tol`` times the upper end.
    """
    problem = power_problem(design, stats, scheme, objective=config.power_objective, pzf_exact=pzf_exact)
    trace = OptimizerTrace()
    J, K = problem.active.shape
    x_best = np.zeros(int(problem.active.sum()))
    if x_best.size == 0:
        zeta = float(np.min(problem.objective(np.zeros((J, K)))))
        trace.objective.append(zeta)
        trace.reason = "no jamming variables"
        return _theta_from_x(x_best, problem, stats), zeta, trace

    lo, hi = 0.0, problem.upper_bound()
    trace.moves.append((lo, hi))
    if not hi > 0:
        trace.reason = "objective identically zero"
        trace.objective.append(0.0)
        return _theta_from_x(x_best, problem, stats), 0.0, trace
    for _ in range(max_iter):
        if hi - lo <= config.bisection_tol * hi:
            trace.reason = "bracket below tolerance"
            break
        mid = 0.5 * (lo + hi)
        result = solve_feasibility(build_feasibility(problem, mid))
        if result.feasible:
            lo, x_best = mid, result.x
        else:
            hi = mid
        trace.moves.append((lo, hi))
        trace.objective.append(lo)
    else:
        trace.reason = "iteration limit"
    theta = _theta_from_x(x_best, problem, stats)
    return theta, lo, trace


# --------------------------------------------------------------------------
# weighting
# --------------------------------------------------------------------------

def optimal_weights(
    design: SurveillanceDesign, stats: ScenarioStatistics, scheme: str = MR, *, pzf_exact: bool = True
) -> np.ndarray:
    """Weights maximizing every observing SINR for fixed modes and powers.

    Each SINR is ``(c^T alpha)^2 / (alpha^T B alpha)`` with diagonal ``B``,
    so the maximizer is ``B^{-1} c`` up to scale.  Columns are normalized to
    unit norm; jamming MNs get 0.
    """
    t = analytic.per_mn_terms(design, stats, scheme, pzf_exact=pzf_exact)
    load = analytic._jam_load(design, stats)
    B = t.u + stats.rho_j * stats.num_antennas * t.v * (stats.beta_mn @ load)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(B > 0, t.c / B, 0.0)
    alpha[design.mode == 1] = 0.0
    norms = np.linalg.norm(alpha, axis=0)
    empty = norms == 0
    if np.any(empty):
        log.debug("links %s have no observing MN; weights left at zero", np.flatnonzero(empty).tolist())
    return alpha / np.where(empty, 1.0, norms)


# --------------------------------------------------------------------------
# alternating power / weight design
# --------------------------------------------------------------------------

def alternating_solve(
    stats: ScenarioStatistics,
    mode,
    config: SystemConfig,
    scheme: str = MR,
    zf_mask=None,
    *,
    max_iters: int | None = None,
    optimize_weights: bool = True,
    pzf_exact: bool = True,
    tol: float = 1e-6,
):
    """Alternate bisection power control and optimal weighting.

    Starts from equal power and unit weights.  Each super-iteration solves
    for powers under the current weights, then for weights under the new
    powers.  The design with the largest min MSP seen so far is kept, since
    the power step optimizes a lower bound of the effective noise and can
    occasionally lose true MSP.  With ``optimize_weights=False`` a single
    power step is taken and weights stay at 1.
    """
    iters = config.max_alt_iters if max_iters is None else max_iters
    current = analytic.baseline_design(mode, stats, zf_mask)
    best = current
    best_val = analytic.min_msp(best, stats, scheme, pzf_exact=pzf_exact)
    trace = OptimizerTrace(objective=[best_val], raw=[best_val])
    if not optimize_weights:
        iters = min(iters, 1)
    for _ in range(iters):
        theta, zeta, _ = bisection_power(current, stats, config, scheme, pzf_exact=pzf_exact)
        current = current.with_(theta=theta)
        if optimize_weights:
            current = current.with_(alpha=optimal_weights(current, stats, scheme, pzf_exact=pzf_exact))
        val = analytic.min_msp(current, stats, scheme, pzf_exact=pzf_exact)
        trace.raw.append(val)
        trace.moves.append(float(zeta))
        gain = val - best_val
        if val > best_val:
            best, best_val = current, val
        trace.objective.append(best_val)
        if gain < tol:
            trace.reason = "no further improvement"
            break
    else:
        trace.reason = "iteration limit" if iters else "no iterations requested"
    return best, trace


# --------------------------------------------------------------------------
# mode assignment
# --------------------------------------------------------------------------

def _fixed_rule_value(mode, stats, scheme, zf_mask, pzf_exact):
    design = analytic.baseline_design(mode, stats, zf_mask)
    return analytic.min_msp(design, stats, scheme, pzf_exact=pzf_exact)


def greedy_mode_assignment(
    stats: ScenarioStatistics,
    config: SystemConfig,
    scheme: str = MR,
    zf_mask=None,
    *,
    pzf_exact: bool = True,
):
    """Switch MNs to jamming one at a time, keeping the best assignment seen.

    Each round switches the observing MN whose move gives the largest min
    MSP (ties go to the lowest index) and stops once that value changes by
    less than ``e_min``.  A round may lower min MSP; the returned assignment
    is the best one visited, so ``trace.objective`` never decreases while
    ``trace.raw`` holds the per-round values.  Candidates are scored with
    equal power and unit weights, or with the full alternating design when
    ``config.joint_greedy`` is set.
    """
    M = stats.num_mns
    mode = np.zeros(M, dtype=int)

    def score(candidate):
        if config.joint_greedy:
            design, _ = alternating_solve(stats, candidate, config, scheme, zf_mask, pzf_exact=pzf_exact)
            return analytic.min_msp(design, stats, scheme, pzf_exact=pzf_exact)
        return _fixed_rule_value(candidate, stats, scheme, zf_mask, pzf_exact)

    current = score(mode)
    best_mode, best = mode.copy(), current
    trace = OptimizerTrace(objective=[current], raw=[current])
    while True:
        observers = np.flatnonzero(mode == 0)
        if observers.size == 0:
            trace.reason = "no observing MN left"
            break
        values = np.empty(observers.size)
        for j, m in enumerate(observers):
            candidate = mode.copy()
            candidate[m] = 1
            values[j] = score(candidate)
        j = int(np.argmax(values))          # first maximum -> lowest index
        trace.raw.append(float(values[j]))
        if abs(values[j] - current) < config.e_min:
            trace.reason = "change below e_min"
            break
        mode[observers[j]] = 1
        current = float(values[j])
        trace.moves.append(int(observers[j]))
        if current > best:
            best_mode, best = mode.copy(), current
        trace.objective.append(best)
    return best_mode, trace


def random_mode_assignment(num_mns: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform number of jammers in ``0..M``, then a uniform subset."""
    count = int(rng.integers(0, num_mns + 1))
    mode = np.zeros(num_mns, dtype=int)
    mode[rng.choice(num_mns, size=count, replace=False)] = 1
    return mode


# --------------------------------------------------------------------------
# UT grouping for PZF
# --------------------------------------------------------------------------

def full_zf_mask(stats: ScenarioStatistics) -> np.ndarray:
    return np.ones((stats.num_mns, stats.num_pairs), dtype=bool)


def lsf_grouping(stats: ScenarioStatistics) -> np.ndarray:
    """Large-scale-fading baseline: full ZF when N > K, otherwise the N-1 weakest UTs."""
    N, K = stats.num_antennas, stats.num_pairs
    if N >= K + 1:
        return full_zf_mask(stats)
    mask = np.zeros((stats.num_mns, K), dtype=bool)
    if N == 1:
        return mask
    order = np.argsort(stats.beta_obs, axis=1, kind="stable")[:, : N - 1]
    np.put_along_axis(mask, order, True, axis=1)
    return mask


def ut_grouping(
    stats: ScenarioStatistics,
    mode,
    config: SystemConfig,
    design: SurveillanceDesign | None = None,
    *,
    pzf_exact: bool = True,
    max_iters: int | None = None,
):
    """Greedy UT grouping for PZF.

    With ``N >= K + 1`` every observing MN zero-forces all UTs.  Otherwise the
    grouping starts as pure MR; each round adds the worst link ``k*`` to the
    ZF group of every observing MN, swapping out the member with the largest
    ``beta^O`` when the group already holds ``N - 1`` UTs, and stops once min
    MSP changes by less than ``e_min``.  A single ZF member nulls nothing, so
    early rounds may lower min MSP; the best grouping visited is returned and
    ``trace.objective`` records the running best.  Powers and weights come
    from ``design`` (equal power and unit weights by default).
    """
    mode = np.asarray(mode, dtype=int)
    N, K, M = stats.num_antennas, stats.num_pairs, stats.num_mns
    trace = OptimizerTrace()
    if N >= K + 1:
        trace.reason = "full ZF (N >= K+1)"
        return full_zf_mask(stats), trace
    base = analytic.baseline_design(mode, stats) if design is None else design.with_(mode=mode)
    mask = np.zeros((M, K), dtype=bool)

    def report(m):
        return analytic.evaluate(base.with_(zf_mask=m), stats, PZF, pzf_exact=pzf_exact)

    rep = report(mask)
    current = rep.min_msp
    best_mask, best = mask, current
    trace.objective.append(current)
    trace.raw.append(current)
    if N == 1:
        trace.reason = "N = 1 leaves no ZF degrees of freedom"
        return mask, trace
    limit = M * K if max_iters is None else max_iters
    for _ in range(limit):
        k_star = int(np.argmin(rep.msp))
        candidate = mask.copy()
        for m in np.flatnonzero(mode == 0):
            if candidate[m, k_star]:
                continue
            members = np.flatnonzero(candidate[m])
            if members.size >= N - 1:
                out = members[np.argmax(stats.beta_obs[m, members])]
                candidate[m, out] = False
            candidate[m, k_star] = True
        new_rep = report(candidate)
        trace.raw.append(new_rep.min_msp)
        trace.moves.append(k_star)
        change = abs(new_rep.min_msp - current)
        mask, rep, current = candidate, new_rep, new_rep.min_msp
        if current > best:
            best_mask, best = mask, current
        trace.objective.append(best)
        if change < config.e_min:
            trace.reason = "change below e_min"
            break
    else:
        trace.reason = "iteration limit"
    return best_mask, trace


# --------------------------------------------------------------------------
# full pipeline
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Strategy:
    """Which stage uses the proposed method and which uses a baseline."""

    modes: str = "greedy"        # greedy | random
    power: str = "optimized"     # optimized | equal
    weights: str = "optimal"     # optimal | unit
    grouping: str = "greedy"     # greedy | lsf  (PZF only)


@dataclass
class PipelineResult:
    design: SurveillanceDesign
    min_msp: float
    zeta: float
    traces: dict


def solve_pipeline(
    stats: ScenarioStatistics,
    config: SystemConfig,
    scheme: str = MR,
    strategy: Strategy = Strategy(),
    rng: np.random.Generator | None = None,
    *,
    pzf_exact: bool = True,
) -> PipelineResult:
    """Grouping, then modes, then regrouping, then powers and weights."""
    traces = {}
    M = stats.num_mns
    all_observe = np.zeros(M, dtype=int)

    def group(mode, key):
        if scheme == MR:
            return None
        if strategy.grouping == "lsf":
            return lsf_grouping(stats)
        if strategy.grouping != "greedy":
            raise ValueError(f"unknown grouping strategy {strategy.grouping!r}")
        mask, traces[key] = ut_grouping(stats, mode, config, pzf_exact=pzf_exact)
        return mask

    zf_mask = group(all_observe, "grouping_initial")
    if strategy.modes == "greedy":
        mode, traces["modes"] = greedy_mode_assignment(stats, config, scheme, zf_mask, pzf_exact=pzf_exact)
    elif strategy.modes == "random":
        if rng is None:
            raise ValueError("random mode assignment needs a generator")
        mode = random_mode_assignment(M, rng)
    else:
        raise ValueError(f"unknown mode strategy {strategy.modes!r}")
    if strategy.grouping == "greedy":
        zf_mask = group(mode, "grouping")

    zeta = float("nan")
    if strategy.power == "equal":
        design = analytic.baseline_design(mode, stats, zf_mask)
        if strategy.weights == "optimal":
            design = design.with_(alpha=optimal_weights(design, stats, scheme, pzf_exact=pzf_exact))
    elif strategy.power == "optimized":
        design, traces["alternating"] = alternating_solve(
            stats, mode, config, scheme, zf_mask,
            optimize_weights=strategy.weights == "optimal", pzf_exact=pzf_exact,
        )
        if traces["alternating"].moves:
            zeta = float(traces["alternating"].moves[-1])
    else:
        raise ValueError(f"unknown power strategy {strategy.power!r}")
    value = analytic.min_msp(design, stats, scheme, pzf_exact=pzf_exact)
    return PipelineResult(design=design, min_msp=value, zeta=zeta, traces=traces)
