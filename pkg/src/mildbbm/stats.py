"""Monte Carlo summaries and goodness-of-fit statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

Z95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    std_error: float
    n: int
    ci_low: float
    ci_high: float
    excluded: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("estimate needs n >= 1")

    def contains(self, x: float) -> bool:
        return self.ci_low <= x <= self.ci_high

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n": self.n,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "excluded": self.excluded,
        }


@dataclass(frozen=True)
class StatReport:
    ks_statistic: float = math.nan
    ks_p_value: float = math.nan
    mean: float = math.nan
    std_error: float = math.nan
    wilson_ci: Optional[tuple[float, float]] = None


def mean_estimate(samples, excluded: int = 0, z: float = Z95) -> EstimateWithCI:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EstimateWithCI(m, se, n, m - z * se, m + z * se, excluded)


def log_mean_exp(logw) -> tuple[float, float]:
    """log of the sample mean of ``exp(logw)`` and the standard error of that
    mean, itself returned on the log scale (``-inf`` if zero).

    Everything is shifted by ``max(logw)`` so no exponential overflows.
    """
    lw = np.asarray(logw, dtype=float)
    n = lw.size
    top = float(lw.max())
    w = np.exp(lw - top)
    mean_w = float(w.mean())
    sd_w = float(w.std(ddof=1)) if n > 1 else math.inf
    log_mean = top + math.log(mean_w)
    log_se = top + math.log(sd_w / math.sqrt(n)) if sd_w > 0 else -math.inf
    return log_mean, log_se


def proportion_estimate(k: int, n: int, z: float = Z95, excluded: int = 0) -> EstimateWithCI:
    """Binomial proportion with a Wilson score interval."""
    p = k / n
    lo, hi = wilson_interval(k, n, z)
    return EstimateWithCI(p, math.sqrt(p * (1 - p) / n), n, lo, hi, excluded)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0 or not 0 <= k <= n:
        raise ValueError(f"invalid proportion {k}/{n}")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def ks_one_sample(samples, cdf: Callable, discrete: bool = False) -> StatReport:
    """One-sample Kolmogorov-Smirnov statistic against ``cdf`` with the
    asymptotic (Kolmogorov distribution) p-value.

    ``cdf`` must accept a numpy array.  For integer-valued laws pass
    ``discrete=True``; the left limit at an atom x is then ``cdf(x - 1)``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("no samples")
    if np.isnan(x).any():
        raise ValueError("NaN in samples")
    n = x.size
    if discrete:
        vals, counts = np.unique(x, return_counts=True)
        ecdf_hi = np.cumsum(counts) / n
        ecdf_lo = ecdf_hi - counts / n
        f_hi = np.asarray(cdf(vals), dtype=float)
        f_lo = np.asarray(cdf(vals - 1), dtype=float)
        dstat = max(np.max(np.abs(ecdf_hi - f_hi)), np.max(np.abs(ecdf_lo - f_lo)))
    else:
        f = np.asarray(cdf(x), dtype=float)
        i = np.arange(1, n + 1)
        dstat = max(np.max(i / n - f), np.max(f - (i - 1) / n))
    dstat = float(dstat)
    p = float(special.kolmogorov(math.sqrt(n) * dstat)) if dstat > 0 else 1.0
    return StatReport(ks_statistic=dstat, ks_p_value=min(max(p, 0.0), 1.0),
                      mean=float(x.mean()),
                      std_error=float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan)


def ks_dominance_pvalue(smaller, larger) -> tuple[float, float]:
    """One-sided two-sample KS test of the claim that ``smaller`` is
    stochastically dominated by ``larger``.

    Returns ``(D, p)`` where D is the largest amount by which the EDF of
    ``larger`` exceeds the EDF of ``smaller`` (the size of the violation).
    """
    res = stats.ks_2samp(np.asarray(larger, float), np.asarray(smaller, float),
                         alternative="greater", method="asymp")
    return float(res.statistic), float(res.pvalue)


def bootstrap_ci(samples, statistic: Callable = np.median, reps: int = 2000,
                 seed: int = 0, level: float = 0.95) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float)
    rng = np.random.Generator(np.random.Philox(seed))
    idx = rng.integers(0, x.size, size=(reps, x.size))
    boot = np.apply_along_axis(statistic, 1, x[idx])
    alpha = (1 - level) / 2
    return float(np.quantile(boot, alpha)), float(np.quantile(boot, 1 - alpha))


def chisquare_pvalue(observed: Sequence[int], probs: Sequence[float]) -> float:
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(probs, dtype=float)
    if obs.size == 1:
        return 1.0
    return float(stats.chisquare(obs, obs.sum() * p / p.sum()).pvalue)
