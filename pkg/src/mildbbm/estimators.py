"""Oracles and experiments: Feynman-Kac first moment, ball exit survival,
growth rates, speed, the confinement product bound and local growth.

Every estimator takes a master seed and derives per-block or per-replicate
seeds from it, so results are independent of the thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from . import kernels
from .asymptotics import growth_constants, principal_eigenvalue_ball, speed_functions
from .bbm import DEFAULT_CAP, DEFAULT_H, simulate_free_bbm, simulate_obstacle_bbm
from .environment import ObstacleField, sample_environment
from .parallel import replicate_map
from .seeding import derive_seed, make_rng
from .stats import (Z95, EstimateWithCI, bootstrap_ci, ks_dominance_pvalue, log_mean_exp,
                    mean_estimate, proportion_estimate)

FK_BLOCK = 2000
EXIT_BLOCK = 5000


def _n_steps(t: float, h: float) -> int:
    if not h > 0:
        raise ValueError("h must be > 0")
    n = int(round(t / h))
    if abs(n * h - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t={t} is not a multiple of h={h}")
    return n


def _blocks(n: int, size: int) -> list[int]:
    return [min(size, n - s) for s in range(0, n, size)]


# ------------------------------------------------------- Feynman-Kac -------
@dataclass
class FKResult:
    estimate: EstimateWithCI
    log_mean: float
    log_se: float
    outside_paths: int


def fk_moment_estimate(field: ObstacleField, t: float, n_paths: int, h: float = DEFAULT_H,
                       seed: int = 0, antithetic: bool = False, threads: int = 1) -> FKResult:
    """E^w |Z_t| = E exp(beta2 t - (beta2 - beta1) * time in K) over Brownian paths.

    Time in K is the midpoint rule on a grid of step ``h``: each path is
    sampled exactly at times h/2, 3h/2, ...  Weights are averaged in the log
    domain.  ``outside_paths`` counts paths that touched the region outside
    the obstacle box (where K is treated as empty); ``excluded`` on the
    estimate carries the same number as a warning, those paths are kept.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    p = field.params
    n_steps = _n_steps(t, h)
    fa = field.kernel_arrays() if field.n_centers else None
    sizes = _blocks(n_paths, FK_BLOCK)

    def block(i, s):
        return kernels.fk_occupation(s, fa, field.dim, n_steps, h, sizes[i], antithetic)

    parts = replicate_map(block, len(sizes), seed, threads)
    counts = np.concatenate([c for c, _ in parts])
    outside = np.concatenate([o for _, o in parts])
    logw = p.beta2 * t - (p.beta2 - p.beta1) * h * counts
    if antithetic:
        # pairs are dependent; average within pairs before estimating spread
        m = counts.size // 2 * 2
        lw = np.logaddexp(logw[:m:2], logw[1:m:2]) - math.log(2.0)
        if counts.size % 2:
            lw = np.append(lw, logw[-1])
        logw = lw
    lm, ls = log_mean_exp(logw)
    value = math.exp(lm)
    se = math.exp(ls) if ls > -math.inf else 0.0
    n_out = int((outside > 0).sum())
    est = EstimateWithCI(value, se, int(counts.size), value - Z95 * se, value + Z95 * se, n_out)
    return FKResult(est, lm, ls, n_out)


# ----------------------------------------------------------- exit times ----
def _bessel_zeros(order: float, count: int) -> np.ndarray:
    zeros = []
    step = 0.25
    a = max(order, 0.0) + 1e-6 if order > -1 else 1e-6
    fa = special.jv(order, a)
    while len(zeros) < count:
        b = a + step
        fb = special.jv(order, b)
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0:
            zeros.append(optimize.brentq(lambda x: special.jv(order, x), a, b, xtol=1e-15))
        a, fa = b, fb
    return np.array(zeros)


def ball_survival_probability(R: float, t: float, d: int, n_terms: int = 400) -> float:
    """P_0(Brownian motion stays in the open ball B(0, R) up to time t).

    Eigenfunction expansion of the radial Dirichlet heat kernel evaluated at
    the centre: sum over zeros j_k of J_nu (nu = d/2 - 1) of
    ``j_k^(nu-1) / (2^(nu-1) Gamma(nu+1) J_(nu+1)(j_k)) * exp(-j_k^2 t / (2 R^2))``.
    """
    if not R > 0:
        raise ValueError("R must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1.0
    nu = d / 2.0 - 1.0
    tau = t / (R * R)
    # number of terms needed for exp(-j^2 tau / 2) < 1e-18
    need = int(min(n_terms, max(8, math.ceil(math.sqrt(2 * 42.0 / tau) / math.pi) + 4)))
    j = _bessel_zeros(nu, need)
    coef = j ** (nu - 1) / (2.0 ** (nu - 1) * special.gamma(nu + 1) * special.jv(nu + 1, j))
    return float(np.sum(coef * np.exp(-0.5 * j * j * tau)))


@dataclass
class ExitSurvivalResult:
    times: np.ndarray
    estimates: list


def exit_survival_curve(R: float, t_grid: Sequence[float], d: int, n: int,
                        h: float = DEFAULT_H, seed: int = 0, stage: Optional[float] = None,
                        threads: int = 1) -> ExitSurvivalResult:
    """P_0(sigma_B(0,R) > t) at each grid time by survivor resampling.

    ``n`` Brownian paths are advanced in stages; after a stage the survivors
    are resampled back up to ``n`` and the survival fraction of the stage is
    recorded.  The product of stage fractions is an unbiased estimate of the
    survival probability, which is what makes tails like 1e-13 reachable.
    The standard error uses ``Var(log S) ~ sum (1 - p_k) / (n p_k)``.
    Exits inside a step are caught with the Brownian-bridge maximum of the
    radial coordinate (exact in d = 1, half-space approximation in d >= 2).
    """
    grid = np.array(sorted(float(x) for x in t_grid))
    if grid.size == 0 or grid[0] < 0:
        raise ValueError("t_grid must be non-empty and non-negative")
    if stage is None:
        # stage length giving roughly one halving of the population
        stage = max(h, math.log(2.0) * R * R / principal_eigenvalue_ball(d))
    stage_steps = max(1, int(round(stage / h)))
    targets = [_n_steps(x, h) for x in grid]
    # resampling stream; its 4-word key cannot meet the 3-word block keys
    rng = make_rng(derive_seed(seed, 0, 0, 1))
    pos = np.zeros((n, d))
    log_s = 0.0
    var_log = 0.0
    step = 0
    stage_no = 0
    out = []
    sizes = _blocks(n, EXIT_BLOCK)
    starts = np.cumsum([0] + sizes)
    for target in targets:
        while step < target:
            m = min(stage_steps, target - step)

            def block(i, s, m=m, pos=pos):
                sl = slice(starts[i], starts[i + 1])
                return kernels.advance_paths(s, pos[sl], np.ones(sizes[i], bool), R, m, h)

            parts = replicate_map(block, len(sizes), seed, threads, stream=(stage_no,))
            new_pos = np.concatenate([p for p, _ in parts])
            alive = np.concatenate([a for _, a in parts])
            k = int(alive.sum())
            if k == 0:
                log_s = -math.inf
                pos = new_pos
                step = target
                break
            frac = k / n
            log_s += math.log(frac)
            var_log += (1.0 - frac) / (n * frac)
            idx = np.flatnonzero(alive)
            pos = new_pos[idx[rng.integers(0, k, size=n)]]
            step += m
            stage_no += 1
        if log_s == -math.inf:
            out.append(EstimateWithCI(0.0, 0.0, n, 0.0, 0.0))
            continue
        val = math.exp(log_s)
        sd = math.sqrt(var_log)
        out.append(EstimateWithCI(val, val * sd, n, val * math.exp(-Z95 * sd),
                                  val * math.exp(Z95 * sd)))
    return ExitSurvivalResult(grid, out)


def exit_survival_estimate(R: float, t: float, d: int, n: int, h: float = DEFAULT_H,
                           seed: int = 0, threads: int = 1) -> EstimateWithCI:
    if t == 0:
        return EstimateWithCI(1.0, 0.0, n, 1.0, 1.0)
    return exit_survival_curve(R, [t], d, n, h, seed, threads=threads).estimates[0]


@dataclass
class ExitSlopeResult:
    slope: float
    slope_se: float
    expected: float
    rel_error: float
    curve: ExitSurvivalResult


def exit_slope_fit(R: float, d: int, n: int, t_grid: Optional[Sequence[float]] = None,
                   h: float = DEFAULT_H, seed: int = 0, threads: int = 1) -> ExitSlopeResult:
    """Weighted least-squares slope of log survival over ``t_grid``
    (default 2R^2..6R^2), compared with ``-lambda_d / R^2``."""
    if t_grid is None:
        t_grid = np.linspace(2 * R * R, 6 * R * R, 9)
    curve = exit_survival_curve(R, t_grid, d, n, h, seed, threads=threads)
    y = np.array([math.log(e.value) for e in curve.estimates])
    w = np.array([e.value / e.std_error if e.std_error > 0 else 1e6 for e in curve.estimates])
    coef, cov = np.polyfit(curve.times, y, 1, w=w, cov="unscaled")
    expected = -principal_eigenvalue_ball(d) / (R * R)
    slope = float(coef[0])
    return ExitSlopeResult(slope, float(math.sqrt(cov[0, 0])), expected,
                           abs(slope - expected) / abs(expected), curve)


# ----------------------------------------------------------- growth (LLN) --
@dataclass
class GrowthRecord:
    t: float
    r_t: np.ndarray
    normalized: np.ndarray


@dataclass
class GrowthSummary:
    t: float
    n: int
    excluded: int
    median: float
    q25: float
    q75: float
    median_ci: tuple
    free_median_r: float
    obstacle_median_r: float
    fk_r: float
    fk_normalized: float
    reference: float
    record: GrowthRecord


def _population_at(outcome, k: int) -> int:
    return outcome.population_curve[k][1]


def growth_rate_experiment(field: ObstacleField, t_grid: Sequence[float], reps: int,
                           seed: int = 0, cap: int = DEFAULT_CAP, fk_paths: int = 0,
                           h: float = DEFAULT_H, threads: int = 1,
                           free_reps: Optional[int] = None) -> list[GrowthSummary]:
    """Distribution of ``(log t)^(2/d) (r_t - beta2)`` with ``r_t = log|Z_t| / t``.

    Each replicate is one run checkpointed at every grid time.  Capped runs
    are excluded at the checkpoints after their truncation.  A free-BBM batch
    gives the median of r_t without obstacles for comparison, and
    ``fk_paths > 0`` adds the Feynman-Kac rate ``log E^w|Z_t| / t``.
    """
    grid = sorted(float(x) for x in t_grid)
    if reps < 30:
        raise ValueError("need at least 30 replicates")
    if grid[0] <= 1:
        raise ValueError("grid times must exceed 1")
    p = field.params
    d = field.dim

    def obstacle(i, s):
        o = simulate_obstacle_bbm(field, grid[-1], s, cap=cap, checkpoints=grid,
                                  track_extent=False)
        return [math.nan if o.capped and o.trunc_time <= tt else float(_population_at(o, k))
                for k, tt in enumerate(grid)]

    def free(i, s):
        o = simulate_free_bbm(p.beta2, grid[-1], d, s, cap=cap, checkpoints=grid,
                              track_extent=False)
        return [math.nan if o.capped and o.trunc_time <= tt else float(_population_at(o, k))
                for k, tt in enumerate(grid)]

    obs = np.array(replicate_map(obstacle, reps, seed, threads, stream=(1,)))
    fr = np.array(replicate_map(free, free_reps or reps, seed, threads, stream=(2,)))
    c = growth_constants(d, p.nu).c_quenched
    out = []
    for k, t in enumerate(grid):
        col = obs[:, k]
        ok = ~np.isnan(col)
        r = np.log(col[ok]) / t
        norm = math.log(t) ** (2.0 / d) * (r - p.beta2)
        fcol = fr[:, k]
        fr_r = np.log(fcol[~np.isnan(fcol)]) / t
        fk_r = fk_norm = math.nan
        if fk_paths:
            fk = fk_moment_estimate(field, t, fk_paths, h, derive_seed(seed, k, 3),
                                    threads=threads)
            fk_r = fk.log_mean / t
            fk_norm = math.log(t) ** (2.0 / d) * (fk_r - p.beta2)
        out.append(GrowthSummary(
            t=t, n=int(ok.sum()), excluded=int((~ok).sum()),
            median=float(np.median(norm)), q25=float(np.quantile(norm, 0.25)),
            q75=float(np.quantile(norm, 0.75)),
            median_ci=bootstrap_ci(norm, np.median, reps=2000, seed=derive_seed(seed, k, 4)),
            free_median_r=float(np.median(fr_r)), obstacle_median_r=float(np.median(r)),
            fk_r=fk_r, fk_normalized=fk_norm, reference=-c,
            record=GrowthRecord(t, r, norm)))
    return out


# ------------------------------------------------------------------ speed --
@dataclass
class SpeedRow:
    t: float
    n_radius: float
    confined: EstimateWithCI
    free_radius: float
    free_exceed: EstimateWithCI
    obstacle_median_extent: float
    free_median_extent: float


def speed_experiment(field: ObstacleField, t_grid: Sequence[float], reps: int, seed: int = 0,
                     cap: int = DEFAULT_CAP, h: float = DEFAULT_H, free_margin: float = 0.1,
                     threads: int = 1, free_reps: Optional[int] = None) -> list[SpeedRow]:
    """Fraction of obstacle replicates with M(t) <= n(t), and fraction of
    free replicates with M(t) > t sqrt(2 beta2) (1 + free_margin).

    M(t) is the largest distance from the origin reached by any particle up
    to time t.  Capped replicates are excluded from the checkpoints after
    their truncation.  ``free_reps`` (default ``reps``) sets the size of the
    free batch, which dominates the cost at large t.
    """
    grid = sorted(float(x) for x in t_grid)
    p = field.params
    d = field.dim
    radii = [speed_functions(t, d, p.nu, p.beta2)[1] for t in grid]

    def extents(o):
        return [math.nan if o.capped and o.trunc_time <= tt else m
                for (tt, m) in o.extent_curve]

    def obstacle(i, s):
        return extents(simulate_obstacle_bbm(field, grid[-1], s, cap=cap, checkpoints=grid, h=h))

    def free(i, s):
        return extents(simulate_free_bbm(p.beta2, grid[-1], d, s, cap=cap, checkpoints=grid, h=h))

    obs = np.array(replicate_map(obstacle, reps, seed, threads, stream=(1,)))
    n_free = reps if free_reps is None else free_reps
    fr = np.array(replicate_map(free, n_free, seed, threads, stream=(2,)))
    rows = []
    v = math.sqrt(2.0 * p.beta2)
    for k, t in enumerate(grid):
        mo = obs[:, k][~np.isnan(obs[:, k])]
        mf = fr[:, k][~np.isnan(fr[:, k])]
        fr_rad = t * v * (1.0 + free_margin)
        rows.append(SpeedRow(
            t=t, n_radius=radii[k],
            confined=proportion_estimate(int((mo <= radii[k]).sum()), mo.size,
                                         excluded=reps - mo.size),
            free_radius=fr_rad,
            free_exceed=proportion_estimate(int((mf > fr_rad).sum()), mf.size,
                                            excluded=n_free - mf.size),
            obstacle_median_extent=float(np.median(mo)), free_median_extent=float(np.median(mf))))
    return rows


# ------------------------------------------------------------ Bramson -----
@dataclass
class BramsonResult:
    t: float
    median: float
    median_ci: tuple
    reference: float
    n: int


def bramson_experiment(t: float, reps: int, seed: int = 0, beta2: float = 1.0,
                       threads: int = 1) -> BramsonResult:
    """Median over replicates of the rightmost particle of 1-d free BBM at t."""
    from .asymptotics import bramson_median

    def one(i, s):
        o = simulate_free_bbm(beta2, t, 1, s, track_extent=False)
        return float(o.final_positions[:, 0].max())

    x = np.array(replicate_map(one, reps, seed, threads))
    return BramsonResult(t, float(np.median(x)), bootstrap_ci(x, np.median, seed=seed),
                         bramson_median(t, beta2), reps)


# ------------------------------------------------------- domination -------
@dataclass
class DominationResult:
    t: float
    violation: float
    p_value: float
    obstacle_mean: EstimateWithCI
    free_mean: EstimateWithCI


def domination_check(field: ObstacleField, t: float, reps: int, seed: int = 0,
                     cap: int = DEFAULT_CAP, threads: int = 1) -> DominationResult:
    """One-sided two-sample KS test of 'obstacle |Z_t| is stochastically
    smaller than free |Z_t|'; ``violation`` is the largest excess of the
    free EDF over the obstacle EDF."""
    p = field.params

    def obstacle(i, s):
        o = simulate_obstacle_bbm(field, t, s, cap=cap, track_extent=False)
        return math.nan if o.capped else o.population

    def free(i, s):
        o = simulate_free_bbm(p.beta2, t, field.dim, s, cap=cap, track_extent=False)
        return math.nan if o.capped else o.population

    a = np.array(replicate_map(obstacle, reps, seed, threads, stream=(1,)))
    b = np.array(replicate_map(free, reps, seed, threads, stream=(2,)))
    a_ok, b_ok = a[~np.isnan(a)], b[~np.isnan(b)]
    dstat, pval = ks_dominance_pvalue(a_ok, b_ok)
    return DominationResult(t, dstat, pval, mean_estimate(a_ok, reps - a_ok.size),
                            mean_estimate(b_ok, reps - b_ok.size))


# ------------------------------------------------------- direct moment ----
def direct_moment_estimate(field: ObstacleField, t: float, reps: int, seed: int = 0,
                           cap: int = DEFAULT_CAP, threads: int = 1) -> EstimateWithCI:
    """Mean of |Z_t| over obstacle-BBM replicates (capped ones excluded)."""
    def one(i, s):
        o = simulate_obstacle_bbm(field, t, s, cap=cap, track_extent=False)
        return math.nan if o.capped else o.population

    x = np.array(replicate_map(one, reps, seed, threads))
    ok = x[~np.isnan(x)]
    return mean_estimate(ok, reps - ok.size)


# ------------------------------------------------------ product bound -----
@dataclass
class ProductBoundResult:
    beta2: float
    t: float
    r: float
    g: int
    lhs: EstimateWithCI
    rhs: float
    single: float
    surrogate: EstimateWithCI
    surrogate_exact: float

    @property
    def holds(self) -> bool:
        return self.lhs.value >= self.rhs - 3 * self.lhs.std_error

    @property
    def surrogate_matches(self) -> bool:
        se = max(self.surrogate.std_error, 1e-300)
        return abs(self.surrogate.value - self.surrogate_exact) <= 3 * se


def default_g(beta2: float, t: float) -> int:
    return int(math.ceil(3.0 * math.exp(beta2 * t)))


def product_bound_check(beta2: float, t: float, r: float, g: Optional[int] = None,
                        reps: int = 10_000, seed: int = 0, d: int = 1,
                        h: float = DEFAULT_H, threads: int = 1) -> ProductBoundResult:
    """Confinement of the whole free BBM in B(0, r) up to t, against the
    lower bound ``q^g`` with q the single-particle confinement probability.

    The independent-particle surrogate draws ``N ~ |Z_t|`` and ``N``
    independent Brownian paths; its confinement probability is exactly
    ``E q^N = p q / (1 - (1 - p) q)``, ``p = exp(-beta2 t)``.
    """
    if g is None:
        g = default_g(beta2, t)
    if g < 1:
        raise ValueError("g must be >= 1")
    q = ball_survival_probability(r, t, d)

    def one(i, s):
        o = simulate_free_bbm(beta2, t, d, s, confine_radii=[r], h=h)
        return 0 if o.capped else int(o.confined_in[float(r)])

    hits = replicate_map(one, reps, seed, threads, stream=(1,))
    lhs = proportion_estimate(int(sum(hits)), reps)

    # surrogate: N from the Yule law, then N independent confined paths
    n_steps = _n_steps(t, h)
    rng = make_rng(derive_seed(seed, 0, 2))
    pop = rng.geometric(math.exp(-beta2 * t), size=reps)
    owner = np.repeat(np.arange(reps), pop)
    sizes = _blocks(owner.size, EXIT_BLOCK)

    def block(i, s):
        _, alive = kernels.advance_paths(s, np.zeros((sizes[i], d)), np.ones(sizes[i], bool),
                                         r, n_steps, h)
        return alive

    alive = np.concatenate(replicate_map(block, len(sizes), seed, threads, stream=(3,)))
    dead_owner = np.zeros(reps, dtype=bool)
    dead_owner[owner[~alive]] = True
    surrogate = proportion_estimate(int((~dead_owner).sum()), reps)
    p = math.exp(-beta2 * t)
    exact = p * q / (1.0 - (1.0 - p) * q)
    return ProductBoundResult(beta2, t, r, g, lhs, q ** g, q, surrogate, exact)


# ------------------------------------------------------ local growth ------
@dataclass
class LocalGrowthRow:
    t: float
    n: int
    excluded: int
    scaled_max: float
    scaled_median: float
    scaled_mean: float
    growth_max: float
    growth_median: float
    growth_positive: float


def local_growth_experiment(field: ObstacleField, center, radius: float,
                            t_grid: Sequence[float], reps: int, seed: int = 0,
                            eps: Optional[float] = None, cap: int = DEFAULT_CAP,
                            threads: int = 1) -> list[LocalGrowthRow]:
    """Summaries of ``exp(-beta2 t) Z_t(B)`` and ``exp(-(beta2 - eps) t) Z_t(B)``
    for the open ball B(center, radius).

    ``growth_positive`` is the fraction of replicates whose second statistic
    strictly increased since the previous grid time.
    """
    p = field.params
    eps = p.beta2 / 4 if eps is None else float(eps)
    grid = sorted(float(x) for x in t_grid)

    def one(i, s):
        o = simulate_obstacle_bbm(field, grid[-1], s, cap=cap, checkpoints=grid,
                                  window=(center, radius), track_extent=False)
        return [math.nan if o.capped and o.trunc_time <= tt else float(c)
                for tt, c in o.window_curve]

    z = np.array(replicate_map(one, reps, seed, threads))
    rows = []
    prev = None
    for k, t in enumerate(grid):
        col = z[:, k]
        ok = ~np.isnan(col)
        a = col[ok] * math.exp(-p.beta2 * t)
        b = col * math.exp(-(p.beta2 - eps) * t)
        grow = math.nan
        if prev is not None:
            both = ok & ~np.isnan(prev)
            grow = float((b[both] > prev[both]).mean()) if both.any() else math.nan
        rows.append(LocalGrowthRow(t, int(ok.sum()), int((~ok).sum()), float(a.max()),
                                   float(np.median(a)), float(a.mean()), float(np.nanmax(b)),
                                   float(np.nanmedian(b)), grow))
        prev = b
    return rows


# ------------------------------------------------- annealed vs quenched ---
@dataclass
class AnnealedQuenchedResult:
    annealed_log_mean: float
    quenched_median_log: float
    difference: float
    slack: float

    @property
    def consistent(self) -> bool:
        return self.difference >= -self.slack


def annealed_vs_quenched(d: int, params, box_half_width: float, t: float, n_fields: int,
                         n_paths: int, h: float = DEFAULT_H, seed: int = 0,
                         threads: int = 1) -> AnnealedQuenchedResult:
    """Sign check: log of the field-averaged first moment against the median
    over fields of the per-field log first moment (Jensen plus the slower
    annealed decay make the difference non-negative).  The slack is three
    standard errors of the annealed log mean plus the largest per-field log
    standard error."""
    logs, log_ses = [], []
    for k in range(n_fields):
        f = sample_environment(d, params, box_half_width, derive_seed(seed, k, 1))
        r = fk_moment_estimate(f, t, n_paths, h, derive_seed(seed, k, 2), threads=threads)
        logs.append(r.log_mean)
        log_ses.append(r.log_se - r.log_mean if r.log_se > -math.inf else -math.inf)
    logs = np.array(logs)
    ann, ann_se = log_mean_exp(logs)
    slack = 3.0 * math.exp(ann_se - ann) + math.exp(max(log_ses))
    return AnnealedQuenchedResult(ann, float(np.median(logs)), ann - float(np.median(logs)), slack)


# -------------------------------------------------------- KPP oracle ------
def kpp_max_cdf(t: float, beta2: float = 1.0, dx: float = 0.01, dt: float = 0.001,
                half_width: float = 40.0) -> tuple[np.ndarray, np.ndarray]:
    """P(rightmost particle of 1-d free BBM at t <= x) on a grid, from the
    KPP equation ``w_t = w_xx / 2 + beta2 (w^2 - w)``, ``w(0, x) = 1{x >= 0}``.

    Strang splitting: Crank-Nicolson diffusion between exact half-steps of
    the logistic reaction.  The step sits on a grid node holding its cell
    average 1/2, and the first two steps use four implicit-Euler half steps
    to damp the jump.  Independent of the particle simulator.
    """
    from scipy.linalg import solve_banded

    half = int(round(half_width / dx))
    x = dx * np.arange(-half, half + 1)
    n = x.size
    w = (x > 0).astype(float)
    w[half] = 0.5

    def diffuse(w, tau, theta):
        r = 0.5 * tau / dx ** 2
        ab = np.zeros((3, n))
        ab[0, 2:] = -theta * r
        ab[1] = 1 + 2 * theta * r
        ab[1, 0] = ab[1, -1] = 1.0
        ab[2, :-2] = -theta * r
        rhs = w.copy()
        rhs[1:-1] = w[1:-1] + (1 - theta) * r * (w[2:] - 2 * w[1:-1] + w[:-2])
        rhs[0], rhs[-1] = 0.0, 1.0
        return solve_banded((1, 1), ab, rhs)

    def react(w, tau):
        return w / (w + (1 - w) * math.exp(beta2 * tau))

    steps = int(round(t / dt))
    for k in range(steps):
        w = react(w, dt / 2)
        if k < 2:
            w = diffuse(diffuse(w, dt / 2, 1.0), dt / 2, 1.0)
        else:
            w = diffuse(w, dt, 0.5)
        w = react(w, dt / 2)
    return x, w


def kpp_max_median(t: float, beta2: float = 1.0, **kw) -> float:
    x, w = kpp_max_cdf(t, beta2, **kw)
    return float(np.interp(0.5, w, x))
