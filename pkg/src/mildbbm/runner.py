"""Dispatch a validated configuration to an experiment and write its CSV.

Every CSV starts with ``#`` lines: the package version, then the echoed
configuration.  Data rows follow a single column-header row.  Floats are
written with ``repr`` (shortest round-trip form), so reruns of the same
configuration produce byte-identical files whatever the thread count.
"""
from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .asymptotics import growth_constants
from .bbm import AbsorptionSpec, simulate_absorbed_bbm, simulate_free_bbm, simulate_obstacle_bbm
from .config import ExperimentConfig
from .environment import ObstacleField, find_clearing, sample_environment
from .parallel import replicate_map
from .stats import ks_one_sample
from .yule import CoalescenceLaw, coalescence_samples


@dataclass
class Report:
    columns: list
    rows: list
    checks: list = field(default_factory=list)     # (name, passed, detail)
    plot: Optional[tuple] = None                   # (x column, y column, title)
    extra_files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def csv_text(cfg: ExperimentConfig, report: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# mildbbm {__version__}\n")
    for line in cfg.header_lines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def gnuplot_script(csv_path: str, report: Report) -> str:
    x, y, title = report.plot
    xi = report.columns.index(x) + 1
    yi = report.columns.index(y) + 1
    return (
        "set datafile separator ','\n"
        "set datafile commentschars '#'\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{x}'\nset ylabel '{y}'\nset title '{title}'\n"
        f"plot '{csv_path}' using {xi}:{yi} with linespoints\n"
    )


# ------------------------------------------------------------ helpers -----
def _field(cfg: ExperimentConfig) -> ObstacleField:
    path = cfg.options.get("field")
    if path:
        # geometry from the file, rates from the configuration
        f = ObstacleField.load(path)
        cfg.params["nu"], cfg.params["a"], cfg.dim = f.params.nu, f.params.a, f.dim
        if f.box_half_width != cfg.box:
            cfg.box = f.box_half_width
        return f.with_params(cfg.model)
    return sample_environment(cfg.dim, cfg.model, cfg.box, int(cfg.options.get("field_seed", cfg.seed)))


# -------------------------------------------------------- experiments -----
def exp_constants(cfg, threads):
    tab = growth_constants(cfg.dim, cfg.params["nu"])
    rows = [(name, float(v)) for name, v in tab.rows()]
    ok = abs(math.sqrt(tab.lambda_d / tab.c_quenched) - tab.R0) <= 1e-12 * tab.R0
    rep = Report(["name", "value"], rows, [("R0 = sqrt(lambda_d / c)", ok, "")])
    # fixed 15 significant digits for the printed table
    rep.rows = [(n, f"{v:.15g}") for n, v in rows]
    return rep


def exp_env_gen(cfg, threads):
    f = sample_environment(cfg.dim, cfg.model, cfg.box, cfg.seed)
    return Report(["dim", "box", "n_centers"], [(f.dim, f.box_half_width, f.n_centers)],
                  extra_files=[("json", f)])


def exp_env_clearing(cfg, threads):
    f = _field(cfg)
    o = cfg.options
    rep = find_clearing(f, float(o["rho"]), float(o["search_l"]), o.get("grid_step"))
    centre = list(rep.center) if rep.found else None
    checks = []
    if rep.found:
        nearest = float(f.nearest_center_distance(rep.center)[0])
        checks.append(("clearing certificate", nearest >= rep.radius + f.params.a, nearest))
    return Report(["found", "center", "radius", "search_radius"],
                  [(rep.found, centre, rep.radius, rep.search_radius)], checks)


def exp_simulate(cfg, threads):
    o = cfg.options
    mode = o.get("mode", "free")
    cps = cfg.t_grid
    radii = [float(r) for r in o.get("confine", [])]
    p = cfg.model
    if mode == "obstacle":
        fld = _field(cfg)

        def run(i, s):
            return simulate_obstacle_bbm(fld, cfg.t, s, cap=cfg.cap, checkpoints=cps,
                                         confine_radii=radii, h=cfg.h)
    elif mode == "free":
        def run(i, s):
            return simulate_free_bbm(p.beta2, cfg.t, cfg.dim, s, cap=cfg.cap, checkpoints=cps,
                                     confine_radii=radii, h=cfg.h)
    elif mode == "absorbed":
        spec = AbsorptionSpec(np.asarray(o.get("center", [0.0] * cfg.dim), float),
                              float(o["radius"]), cfg.h)

        def run(i, s):
            return simulate_absorbed_bbm(spec, p.beta2, cfg.t, s, cap=cfg.cap, checkpoints=cps)
    else:
        raise ValueError(f"unknown simulation mode {mode!r}")

    outs = replicate_map(run, cfg.reps, cfg.seed, threads)
    cols = ["replicate"] + [f"Z({t:g})" for t in cps] + ["M"] + \
        [f"confined({r:g})" for r in radii] + ["capped", "outside_fraction"]
    rows = []
    dyadic = True
    for i, out in enumerate(outs):
        rows.append([i] + [c for _, c in out.population_curve] + [out.max_radial_extent]
                    + [out.confined_in[r] for r in radii] + [out.capped, out.outside_fraction])
        if mode != "absorbed" and not out.capped:
            dyadic &= out.n_splits == out.population - 1
    checks = [("split count = |Z_t| - 1", dyadic, "")] if mode != "absorbed" else []
    return Report(cols, rows, checks, plot=("replicate", cols[len(cps)], f"{mode} BBM |Z_t|"))


def exp_yule(cfg, threads):
    b2 = cfg.params["beta2"]
    t = cfg.t
    n = cfg.reps
    s, size, y = coalescence_samples(b2, t, n, cfg.seed)
    law = CoalescenceLaw(t, b2)
    ks = ks_one_sample(s, law.cdf)
    limit = 1.5 * 1.36 / math.sqrt(n)
    rows = [(i, float(s[i]), int(size[i]), int(y[i]), None, None) for i in range(n)]
    rows.append(("summary", None, None, None, ks.ks_statistic, ks.ks_p_value))
    return Report(["sample", "mrca_time", "I", "Y_t", "ks_statistic", "ks_p_value"], rows,
                  [("KS distance to the coalescence law", ks.ks_statistic < limit,
                    f"D={ks.ks_statistic:.5g} limit={limit:.5g}")])


def exp_fk(cfg, threads):
    from .estimators import direct_moment_estimate, fk_moment_estimate
    f = _field(cfg)
    o = cfg.options
    cols = ["t", "fk_value", "fk_se", "fk_ci_low", "fk_ci_high", "n_paths", "outside_paths",
            "direct_value", "direct_se", "z"]
    rows, checks = [], []
    for k, t in enumerate(cfg.t_grid):
        fk = fk_moment_estimate(f, t, cfg.n_paths, cfg.h, cfg.seed + k,
                                antithetic=bool(o.get("antithetic", False)), threads=threads)
        e = fk.estimate
        dv = dse = z = None
        if int(o.get("direct_reps", 0)):
            dr = direct_moment_estimate(f, t, int(o["direct_reps"]), cfg.seed + 1000 + k,
                                        cfg.cap, threads)
            dv, dse = dr.value, dr.std_error
            z = (e.value - dv) / math.hypot(e.std_error, dse)
            checks.append((f"FK vs direct at t={t:g}", abs(z) <= 3, f"z={z:.3g}"))
        rows.append((t, e.value, e.std_error, e.ci_low, e.ci_high, e.n, fk.outside_paths,
                     dv, dse, z))
    return Report(cols, rows, checks, plot=("t", "fk_value", "Feynman-Kac first moment"))


def exp_exit(cfg, threads):
    from .estimators import ball_survival_probability, exit_slope_fit, exit_survival_curve
    R = float(cfg.options.get("radius", 1.0))
    d = cfg.dim
    grid = [t for t in cfg.t_grid]
    checks = []
    if len(grid) >= 2 and grid[0] > 0:
        fit = exit_slope_fit(R, d, cfg.n_paths, grid, cfg.h, cfg.seed, threads)
        curve = fit.curve
        checks.append(("exit-time slope within 5%", fit.rel_error < 0.05,
                       f"slope={fit.slope:.5g} expected={fit.expected:.5g}"))
    else:
        curve = exit_survival_curve(R, grid, d, cfg.n_paths, cfg.h, cfg.seed, threads=threads)
    rows = [(t, e.value, e.std_error, e.ci_low, e.ci_high, ball_survival_probability(R, t, d))
            for t, e in zip(curve.times, curve.estimates)]
    return Report(["t", "survival", "se", "ci_low", "ci_high", "series"], rows, checks,
                  plot=("t", "survival", "ball exit survival"))


def exp_lln(cfg, threads):
    from .estimators import growth_rate_experiment
    f = _field(cfg)
    fk_paths = int(cfg.options.get("fk_paths", 0))
    res = growth_rate_experiment(f, cfg.t_grid, cfg.reps, cfg.seed, cfg.cap, fk_paths, cfg.h,
                                 threads)
    c = growth_constants(f.dim, f.params.nu).c_quenched
    rows = [(s.t, s.n, s.excluded, s.median, s.q25, s.q75, s.median_ci[0], s.median_ci[1],
             s.obstacle_median_r, s.free_median_r, s.fk_r, s.fk_normalized, s.reference)
            for s in res]
    checks = lln_checks(res, c, cfg.reps)
    return Report(["t", "n", "excluded", "median", "q25", "q75", "median_ci_low",
                   "median_ci_high", "median_r", "free_median_r", "fk_r", "fk_normalized",
                   "minus_c"], rows, checks, plot=("t", "median", "normalized growth rate"))


def lln_checks(res, c, reps) -> list:
    checks = [
        ("medians strictly negative", all(s.median < 0 for s in res), ""),
        ("medians within [-5c, 0]", all(-5 * c <= s.median <= 0 for s in res), f"c={c:.6g}"),
        ("medians non-increasing up to CI overlap",
         all(b.median <= a.median or b.median_ci[0] <= a.median_ci[1]
             for a, b in zip(res, res[1:])), ""),
        ("capped replicates < 5%", all(s.excluded < 0.05 * reps for s in res), ""),
        ("obstacle median r_t <= free median r_t",
         all(s.obstacle_median_r <= s.free_median_r for s in res), ""),
    ]
    return checks


def exp_speed(cfg, threads):
    from .estimators import speed_experiment
    f = _field(cfg)
    rows_ = speed_experiment(f, cfg.t_grid, cfg.reps, cfg.seed, cfg.cap, cfg.h,
                             float(cfg.options.get("free_margin", 0.1)), threads,
                             cfg.options.get("free_reps"))
    rows = [(r.t, r.n_radius, r.confined.value, r.confined.ci_low, r.confined.ci_high,
             r.confined.excluded, r.obstacle_median_extent, r.free_radius, r.free_exceed.value,
             r.free_exceed.ci_low, r.free_exceed.ci_high, r.free_median_extent) for r in rows_]
    return Report(["t", "n_t", "P_confined", "ci_low", "ci_high", "excluded", "median_M",
                   "free_radius", "free_exceed", "free_ci_low", "free_ci_high", "free_median_M"],
                  rows, speed_checks(rows_), plot=("t", "P_confined", "P(M(t) <= n(t))"))


def speed_checks(rows) -> list:
    return [
        ("P(M(t) <= n(t)) >= 0.05 with CI excluding 0",
         all(r.confined.value >= 0.05 and r.confined.ci_low > 0 for r in rows),
         " ".join(f"{r.confined.value:.3g}" for r in rows)),
        ("free exceedance < 0.5 at the last grid time", rows[-1].free_exceed.value < 0.5,
         f"{rows[-1].free_exceed.value:.3g}"),
    ]


def exp_local(cfg, threads):
    from .estimators import local_growth_experiment
    f = _field(cfg)
    o = cfg.options
    centre = o.get("center", [0.0] * f.dim)
    res = local_growth_experiment(f, centre, float(o.get("radius", 1.0)), cfg.t_grid,
                                  cfg.reps, cfg.seed, o.get("eps"), cfg.cap, threads)
    rows = [(r.t, r.n, r.excluded, r.scaled_max, r.scaled_median, r.scaled_mean, r.growth_max,
             r.growth_median, r.growth_positive) for r in res]
    return Report(["t", "n", "excluded", "scaled_max", "scaled_median", "scaled_mean",
                   "growth_max", "growth_median", "growth_positive_fraction"], rows,
                  plot=("t", "scaled_mean", "exp(-beta2 t) Z_t(B)"))


def exp_product(cfg, threads):
    from .estimators import product_bound_check
    b2 = cfg.params["beta2"]
    radii = [float(r) for r in cfg.options.get("radii", [1.0, 2.0])]
    g = cfg.options.get("g")
    rows, checks = [], []
    k = 0
    for t in cfg.t_grid:
        for r in radii:
            res = product_bound_check(b2, t, r, g, cfg.reps, cfg.seed + k, cfg.dim, cfg.h, threads)
            k += 1
            rows.append((t, r, res.g, res.lhs.value, res.lhs.std_error, res.rhs, res.single,
                         res.surrogate.value, res.surrogate.std_error, res.surrogate_exact))
            checks.append((f"lhs >= rhs - 3 se (t={t:g}, r={r:g})", res.holds, ""))
            checks.append((f"surrogate = E q^N (t={t:g}, r={r:g})", res.surrogate_matches, ""))
    return Report(["t", "r", "g", "lhs", "lhs_se", "rhs", "single", "surrogate",
                   "surrogate_se", "surrogate_exact"], rows, checks)


def exp_check(cfg, threads):
    from .acceptance import run_all
    only = cfg.options.get("only")
    results = run_all(threads=threads, only=only, stream=sys.stdout)
    rows = [(r.number, r.name, r.passed, r.detail, r.seconds) for r in results]
    checks = [(f"criterion {r.number}", r.passed, r.detail) for r in results]
    return Report(["criterion", "name", "passed", "detail", "seconds"], rows, checks)


EXPERIMENT_FUNCS: dict[str, Callable] = {
    "constants": exp_constants,
    "env-gen": exp_env_gen,
    "env-clearing": exp_env_clearing,
    "simulate": exp_simulate,
    "yule-coalescence": exp_yule,
    "fk-moment": exp_fk,
    "exit-survival": exp_exit,
    "lln": exp_lln,
    "speed": exp_speed,
    "local-growth": exp_local,
    "product-bound": exp_product,
    "check": exp_check,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1, check: bool = False,
                   plot: bool = False, stream=None) -> int:
    """Run, write outputs, return the exit status (non-zero only when
    ``check`` is set and a check failed)."""
    stream = stream or sys.stdout
    report = EXPERIMENT_FUNCS[cfg.experiment](cfg, threads)
    text = csv_text(cfg, report)
    out = cfg.out
    for kind, obj in report.extra_files:
        if kind == "json":
            target = out or "field.json"
            obj.save(target)
            stream.write(f"wrote {target}\n")
            out = None
    if cfg.experiment == "env-gen":
        text = None
    if text is not None:
        if out:
            Path(out).write_text(text)
            if plot and report.plot:
                gp = str(Path(out).with_suffix(".gp"))
                Path(gp).write_text(gnuplot_script(out, report))
        else:
            stream.write(text)
    for name, ok, detail in report.checks:
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name}{'  ' + str(detail) if detail else ''}\n")
    return 0 if (report.passed or not check) else 1
