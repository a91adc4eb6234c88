"""Event-driven branching Brownian motion: free, among mild obstacles, and
absorbed at the boundary of a ball.

Positions are advanced lazily: a particle's Brownian increment is drawn only
at its own clock rings and at requested checkpoints.  Obstacles enter by
thinning: clocks ring at the free rate ``beta2`` and a ring inside K becomes
a split with probability ``beta1/beta2``.  The radial extent M(t) (largest
distance from the origin reached by any particle up to the horizon) and
absorption are resolved with Brownian-bridge maxima on sub-steps of length
``h``; segments that provably stay clear of the relevant level except with
probability below ``1e-12`` are not refined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .environment import ObstacleField

DEFAULT_CAP = 2_000_000
DEFAULT_H = 1.0 / 256
OUTSIDE_WARN = 1e-3


@dataclass(frozen=True)
class Particle:
    id: int
    parent_id: Optional[int]
    position: np.ndarray
    last_update: float


@dataclass(frozen=True)
class AbsorptionSpec:
    center: np.ndarray
    radius: float
    substep: float = DEFAULT_H

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("absorption radius must be > 0")
        if not self.substep > 0:
            raise ValueError("substep must be > 0")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))


@dataclass
class Genealogy:
    """Parent links over every particle ever born; ``end`` is the split,
    kill or horizon time (NaN if the run was capped first)."""

    parent: np.ndarray
    birth: np.ndarray
    end: np.ndarray


@dataclass
class SimOutcome:
    horizon: float
    dim: int
    final_positions: np.ndarray
    final_ids: np.ndarray
    population_curve: list
    max_radial_extent: float
    confined_in: dict
    capped: bool
    trunc_time: float
    n_splits: int
    n_rings: int
    n_killed: int
    outside_fraction: float = 0.0
    extent_curve: Optional[list] = None
    window_curve: Optional[list] = None
    genealogy: Optional[Genealogy] = None
    warnings: list = dc_field(default_factory=list)

    @property
    def population(self) -> int:
        return self.population_curve[-1][1]

    @property
    def final_particles(self) -> list:
        parents = self.genealogy.parent if self.genealogy is not None else None
        out = []
        for pid, pos in zip(self.final_ids.tolist(), self.final_positions):
            par = int(parents[pid]) if parents is not None else None
            out.append(Particle(pid, None if par is not None and par < 0 else par,
                                pos.copy(), self.horizon))
        return out


def _checkpoint_grid(t: float, checkpoints) -> np.ndarray:
    if not t >= 0:
        raise ValueError("t must be >= 0")
    cps = sorted(set(float(c) for c in (() if checkpoints is None else checkpoints)) | {float(t)})
    if cps[0] < 0 or cps[-1] > t:
        raise ValueError("checkpoints must lie in [0, t]")
    return np.array(cps)


def _outcome(raw: dict, t: float, d: int, cps: np.ndarray, confine_radii,
             record_genealogy: bool, windowed: bool) -> SimOutcome:
    counts = raw["counts"].tolist()
    m = float(raw["max_extent"])
    total = raw["total_time"]
    out_frac = raw["outside_time"] / total if total > 0 else 0.0
    gen = Genealogy(raw["parent"], raw["birth"], raw["end"]) if record_genealogy else None
    res = SimOutcome(
        horizon=float(t),
        dim=d,
        final_positions=raw["final_positions"],
        final_ids=raw["final_ids"],
        population_curve=list(zip(cps.tolist(), counts)),
        max_radial_extent=m,
        confined_in={float(r): bool(m <= r) for r in confine_radii},
        capped=bool(raw["capped"]),
        trunc_time=float(raw["trunc_time"]),
        n_splits=int(raw["n_splits"]),
        n_rings=int(raw["n_rings"]),
        n_killed=int(raw["n_killed"]),
        outside_fraction=float(out_frac),
        extent_curve=list(zip(cps.tolist(), raw["extent_curve"].tolist())),
        window_curve=list(zip(cps.tolist(), raw["window_counts"].tolist())) if windowed else None,
        genealogy=gen,
    )
    if out_frac > OUTSIDE_WARN:
        res.warnings.append(f"{100 * out_frac:.3g}% of particle-time outside the obstacle box")
    return res


def simulate_free_bbm(beta2: float, t: float, d: int, seed: int, cap: int = DEFAULT_CAP,
                      checkpoints: Sequence[float] = (), confine_radii: Sequence[float] = (),
                      window: Optional[tuple] = None, record_genealogy: bool = False,
                      track_extent: bool = True, h: float = DEFAULT_H) -> SimOutcome:
    """Dyadic BBM at rate ``beta2`` from one particle at the origin.

    ``window`` is an optional ``(center, radius)`` open ball whose
    occupation is counted at each checkpoint.
    """
    if not beta2 > 0:
        raise ValueError("beta2 must be > 0")
    cps = _checkpoint_grid(t, checkpoints)
    wc, wr = (None, None) if window is None else (np.asarray(window[0], float), float(window[1]))
    raw = kernels.simulate_bbm(seed, d, beta2, beta2, cps, window_center=wc, window_radius=wr,
                               h=h, cap=cap, track_extent=track_extent)
    return _outcome(raw, t, d, cps, confine_radii, record_genealogy, window is not None)


def simulate_obstacle_bbm(field: ObstacleField, t: float, seed: int, cap: int = DEFAULT_CAP,
                          checkpoints: Sequence[float] = (), confine_radii: Sequence[float] = (),
                          window: Optional[tuple] = None, record_genealogy: bool = False,
                          track_extent: bool = True, h: float = DEFAULT_H) -> SimOutcome:
    """BBM whose branching rate is ``beta1`` on K and ``beta2`` off K."""
    p = field.params
    cps = _checkpoint_grid(t, checkpoints)
    wc, wr = (None, None) if window is None else (np.asarray(window[0], float), float(window[1]))
    fa = field.kernel_arrays() if field.n_centers else None
    raw = kernels.simulate_bbm(seed, field.dim, p.beta1, p.beta2, cps, field=fa,
                               window_center=wc, window_radius=wr, h=h, cap=cap,
                               track_extent=track_extent)
    if fa is None:
        raw["outside_time"] = 0.0
    return _outcome(raw, t, field.dim, cps, confine_radii, record_genealogy, window is not None)


def simulate_absorbed_bbm(spec: AbsorptionSpec, beta2: float, t: float, seed: int,
                          start=None, cap: int = DEFAULT_CAP,
                          checkpoints: Sequence[float] = (),
                          record_genealogy: bool = False) -> SimOutcome:
    """Free-rate BBM killed on leaving the open ball ``B(center, radius)``.

    ``beta2 = 0`` gives a single non-branching Brownian particle.
    """
    if not beta2 >= 0:
        raise ValueError("beta2 must be >= 0")
    d = spec.center.size
    x0 = spec.center.copy() if start is None else np.asarray(start, dtype=float).reshape(d)
    if np.linalg.norm(x0 - spec.center) >= spec.radius:
        raise ValueError("start must lie inside the absorbing ball")
    cps = _checkpoint_grid(t, checkpoints)
    raw = kernels.simulate_bbm(seed, d, beta2, beta2, cps, start=x0,
                               absorb_center=spec.center, absorb_radius=spec.radius,
                               h=spec.substep, cap=cap, track_extent=False)
    out = _outcome(raw, t, d, cps, (), record_genealogy, False)
    out.max_radial_extent = math.nan
    return out


def local_count(outcome: SimOutcome, center, radius: float) -> int:
    """Z_t(B): final particles in the open ball ``B(center, radius)``."""
    if outcome.capped:
        raise ValueError("outcome is capped; counts after truncation are invalid")
    if radius <= 0 or outcome.final_positions.size == 0:
        return 0
    c = np.asarray(center, dtype=float).reshape(1, -1)
    dist = np.linalg.norm(outcome.final_positions - c, axis=1)
    return int((dist < radius).sum())
