"""Acceptance suite: twelve end-to-end checks with fixed seeds.

``run_all`` prints one PASS/FAIL line per criterion.  Each check returns a
:class:`CriterionResult`; none of them raises on a failed comparison.
"""
from __future__ import annotations

import filecmp
import math
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .asymptotics import (ModelParams, growth_constants,
                          principal_eigenvalue_ball, principal_eigenvalue_fd)
from .environment import sample_environment
from .stats import chisquare_pvalue, ks_one_sample

MASTER_SEED = 20240601

# the quenched field shared by the growth, domination and speed checks
LLN_PARAMS = ModelParams(nu=1.0, a=0.5, beta1=0.0, beta2=1.0)
LLN_BOX = 40.0
LLN_FIELD_SEED = 2024
SPEED_GRID = (10.0, 11.0, 12.0)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} "
                f"[{self.name}] {self.detail} ({self.seconds:.1f}s)")


def lln_field():
    return sample_environment(1, LLN_PARAMS, LLN_BOX, LLN_FIELD_SEED)


def _timed(number: int, name: str, fn: Callable[[], tuple]) -> CriterionResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0)


# ------------------------------------------------------------- criteria ---
def criterion_1(threads: int = 1) -> CriterionResult:
    def run():
        t0 = time.perf_counter()
        errs = []
        for d in (1, 2, 3):
            lam = principal_eigenvalue_ball(d)
            errs.append(abs(lam - principal_eigenvalue_fd(d)) / lam)
        e1 = abs(principal_eigenvalue_ball(1) - math.pi ** 2 / 8) / (math.pi ** 2 / 8)
        e3 = abs(principal_eigenvalue_ball(3) - math.pi ** 2 / 2) / (math.pi ** 2 / 2)
        dt = time.perf_counter() - t0
        ok = max(errs) < 1e-6 and e1 < 1e-10 and e3 < 1e-10 and dt < 1.0
        return ok, (f"max FD rel err {max(errs):.2e}, d=1 {e1:.1e}, d=3 {e3:.1e}, "
                    f"runtime {dt:.2f}s")
    return _timed(1, "eigenvalue constants", run)


def criterion_2(threads: int = 1) -> CriterionResult:
    from .yule import CoalescenceLaw, coalescence_samples

    def run():
        t0 = time.perf_counter()
        s, _, _ = coalescence_samples(1.0, 2.0, 100_000, MASTER_SEED + 2)
        ks = ks_one_sample(s, CoalescenceLaw(2.0, 1.0).cdf)
        dt = time.perf_counter() - t0
        return ks.ks_statistic < 0.0065 and dt < 120, (
            f"KS D={ks.ks_statistic:.5f} (limit 0.0065), p={ks.ks_p_value:.3f}, {dt:.1f}s")
    return _timed(2, "MRCA coalescence law", run)


def criterion_3(threads: int = 1) -> CriterionResult:
    from .yule import coalescence_samples, yule_time_coalescent_pmf

    def run():
        ok = True
        parts = []
        for j in (2, 3, 5):
            # the law of I given Y_t = j does not involve t; t = log j makes
            # the conditioning event most likely
            _, size, _ = coalescence_samples(1.0, math.log(j), 100_000, MASTER_SEED + 30 + j,
                                             leaves=j)
            obs = np.bincount(size, minlength=j + 1)[2:]
            probs = [yule_time_coalescent_pmf(i, j) for i in range(2, j + 1)]
            if j == 2:
                good = bool(np.all(size == 2))
                parts.append(f"j=2 P(I=2)={np.mean(size == 2):.3f}")
            else:
                p = chisquare_pvalue(obs, probs)
                good = p > 0.01
                parts.append(f"j={j} chi2 p={p:.3f}")
            ok &= good
        return ok, ", ".join(parts)
    return _timed(3, "pre-coalescence size law", run)


def criterion_4(threads: int = 1) -> CriterionResult:
    from .yule import geometric_cdf, yule_batch

    def run():
        ok = True
        parts = []
        for k, t in enumerate((1.0, 2.0, 4.0)):
            y = yule_batch(1.0, t, 100_000, MASTER_SEED + 40 + k, record=False).counts
            ks = ks_one_sample(y, lambda x: geometric_cdf(x, t), discrete=True)
            w = np.exp(-t) * y
            z = (w.mean() - 1.0) / (w.std(ddof=1) / math.sqrt(w.size))
            good = ks.ks_p_value > 0.01 and abs(z) < 3
            ok &= good
            parts.append(f"t={t:g} KS p={ks.ks_p_value:.3f} mean z={z:+.2f}")
        return ok, ", ".join(parts)
    return _timed(4, "Yule population laws", run)


def criterion_5(threads: int = 1) -> CriterionResult:
    from .estimators import direct_moment_estimate, fk_moment_estimate

    def run():
        t0 = time.perf_counter()
        ok = True
        parts = []
        setups = ((1, ModelParams(1.0, 0.5, 0.0, 1.0)), (2, ModelParams(0.5, 0.5, 0.0, 1.0)))
        for d, params in setups:
            for k in range(3):
                f = sample_environment(d, params, 20.0, MASTER_SEED + 50 + 10 * d + k)
                fk = fk_moment_estimate(f, 6.0, 10_000, seed=MASTER_SEED + 500 + 10 * d + k,
                                        threads=threads).estimate
                dr = direct_moment_estimate(f, 6.0, 1000, seed=MASTER_SEED + 600 + 10 * d + k,
                                            threads=threads)
                z = (fk.value - dr.value) / math.hypot(fk.std_error, dr.std_error)
                ok &= abs(z) <= 3 and dr.excluded == 0
                parts.append(f"d={d}#{k} z={z:+.2f}")
        dt = time.perf_counter() - t0
        return ok and dt < 600, ", ".join(parts) + f", {dt:.0f}s"
    return _timed(5, "Feynman-Kac first moment", run)


def criterion_6(threads: int = 1) -> CriterionResult:
    from .estimators import domination_check

    def run():
        r = domination_check(lln_field(), 6.0, 2000, MASTER_SEED + 6, threads=threads)
        return r.p_value > 0.01, (f"violation D={r.violation:.4f} p={r.p_value:.3f}, "
                                  f"means {r.obstacle_mean.value:.1f} vs {r.free_mean.value:.1f}")
    return _timed(6, "domination by free BBM", run)


def criterion_7(threads: int = 1) -> CriterionResult:
    from .estimators import exit_slope_fit

    def run():
        ok = True
        parts = []
        for d in (1, 2, 3):
            r = exit_slope_fit(1.0, d, 100_000, seed=MASTER_SEED + 70 + d, threads=threads)
            ok &= r.rel_error < 0.05
            parts.append(f"d={d} slope {r.slope:.4f} vs {r.expected:.4f} ({100 * r.rel_error:.2f}%)")
        return ok, ", ".join(parts)
    return _timed(7, "exit-time exponent", run)


def criterion_8(threads: int = 1) -> CriterionResult:
    from .estimators import bramson_experiment, kpp_max_median

    def run():
        r = bramson_experiment(8.0, 10_000, MASTER_SEED + 8, threads=threads)
        gap = r.median - r.reference
        # the KPP median is reported to separate simulator error from the
        # finite-t gap of the two-term formula
        return abs(gap) <= 1.5, (f"median {r.median:.3f} vs m(8)={r.reference:.3f} "
                                 f"(gap {gap:+.3f}); KPP median {kpp_max_median(8.0):.3f}")
    return _timed(8, "Bramson calibration", run)


def criterion_9(threads: int = 1) -> CriterionResult:
    from .estimators import growth_rate_experiment
    from .runner import lln_checks

    def run():
        reps = 500
        res = growth_rate_experiment(lln_field(), (4.0, 6.0, 8.0, 10.0), reps,
                                     MASTER_SEED + 9, threads=threads)
        c = growth_constants(1, LLN_PARAMS.nu).c_quenched
        checks = lln_checks(res, c, reps)[:4]
        meds = " ".join(f"{s.median:.3f}" for s in res)
        failed = [n for n, ok, _ in checks if not ok]
        return not failed, f"medians {meds}; -5c={-5 * c:.2f}" + (
            f"; failed: {', '.join(failed)}" if failed else "")
    return _timed(9, "growth-rate property suite", run)


def criterion_10(threads: int = 1) -> CriterionResult:
    from .estimators import speed_experiment
    from .runner import speed_checks

    def run():
        rows = speed_experiment(lln_field(), SPEED_GRID, 1000, MASTER_SEED + 10,
                                threads=threads, free_reps=100)
        checks = speed_checks(rows)
        probs = " ".join(f"t={r.t:g}:{r.confined.value:.3f}[{r.confined.ci_low:.3f}]"
                         for r in rows)
        return all(ok for _, ok, _ in checks), (
            f"P(M<=n) {probs}; free exceed {rows[-1].free_exceed.value:.3f}")
    return _timed(10, "radial speed property suite", run)


def criterion_11(threads: int = 1) -> CriterionResult:
    from .estimators import product_bound_check

    def run():
        ok = True
        parts = []
        k = 0
        for t in (0.5, 1.0, 2.0):
            for r in (1.0, 2.0):
                res = product_bound_check(1.0, t, r, reps=10_000, seed=MASTER_SEED + 110 + k,
                                          threads=threads)
                k += 1
                ok &= res.holds and res.surrogate_matches
                zs = (res.surrogate.value - res.surrogate_exact) / max(res.surrogate.std_error,
                                                                       1e-300)
                parts.append(f"t={t:g},r={r:g}: {res.lhs.value:.4f}>={res.rhs:.2e} sur z={zs:+.2f}")
        return ok, "; ".join(parts)
    return _timed(11, "confinement product bound", run)


def determinism_configs() -> list[dict]:
    return [
        {"experiment": "simulate", "dim": 2, "t_grid": [1.0, 3.0], "reps": 40, "seed": 5,
         "box": 10.0, "params": {"nu": 0.5, "a": 0.5, "beta1": 0.2, "beta2": 1.0},
         "options": {"mode": "obstacle", "confine": [3.0]}},
        {"experiment": "fk-moment", "dim": 1, "t_grid": [2.0], "n_paths": 5000, "seed": 6,
         "box": 15.0, "options": {"direct_reps": 200}},
        {"experiment": "exit-survival", "dim": 2, "t_grid": [0.5, 1.0, 2.0], "n_paths": 20000,
         "seed": 7, "options": {"radius": 1.0}},
        {"experiment": "yule-coalescence", "t_grid": [2.0], "reps": 5000, "seed": 8},
        {"experiment": "product-bound", "t_grid": [1.0], "reps": 500, "seed": 9,
         "options": {"radii": [1.5]}},
    ]


def criterion_12(threads: int = 8) -> CriterionResult:
    from .config import load_config
    from .runner import run_experiment

    def run():
        same = []
        with tempfile.TemporaryDirectory() as tmp:
            for k, raw in enumerate(determinism_configs()):
                paths = []
                for n_threads in (1, 8):
                    out = Path(tmp) / f"{k}_{n_threads}.csv"
                    cfg = load_config(overrides={**raw, "out": str(out)})
                    run_experiment(cfg, threads=n_threads, stream=_Null())
                    paths.append(out)
                same.append(filecmp.cmp(paths[0], paths[1], shallow=False))
        names = [c["experiment"] for c in determinism_configs()]
        return all(same), ", ".join(f"{n}:{'same' if s else 'DIFFERENT'}"
                                    for n, s in zip(names, same))
    return _timed(12, "determinism across thread counts", run)


class _Null:
    def write(self, _):
        pass


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}


def run_all(threads: int = 1, only: Optional[list] = None, stream=None) -> list[CriterionResult]:
    stream = stream or sys.stdout
    out = []
    for number, fn in CRITERIA.items():
        if only and number not in only:
            continue
        res = fn() if number == 12 else fn(threads)
        stream.write(res.line() + "\n")
        stream.flush()
        out.append(res)
    return out
