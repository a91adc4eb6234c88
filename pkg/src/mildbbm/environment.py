"""Quenched Poissonian obstacle fields.

A field is sampled on the box ``[-L, L]^d``; points outside the box are
treated as obstacle-free.  Membership in the obstacle set K (a union of
closed balls of radius ``a``) goes through a uniform grid whose cell edge is
``a``, so a query inspects at most ``3**d`` cells.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .asymptotics import ModelParams
from .seeding import make_rng

MAX_CENTERS = 20_000_000
MAX_CELLS = 50_000_000


@dataclass(frozen=True)
class ClearingReport:
    found: bool
    center: Optional[np.ndarray]
    radius: float
    search_radius: float


class ObstacleField:
    """One environment: obstacle centres in a box plus a grid index.

    Read-only after construction; safe to share between replicate workers.
    """

    def __init__(self, dim: int, params: ModelParams, box_half_width: float, centers):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if not box_half_width > 0:
            raise ValueError("box_half_width must be > 0")
        L = float(box_half_width)
        c = np.ascontiguousarray(np.asarray(centers, dtype=float).reshape(-1, dim))
        if c.size and np.abs(c).max() > L:
            raise ValueError("obstacle centre outside the box")
        self.dim = int(dim)
        self.params = params
        self.box_half_width = L
        self.cell = float(params.a)
        n_side = max(1, math.ceil(2 * L / self.cell))
        if n_side ** dim > MAX_CELLS:
            raise ValueError(
                f"grid index would need {n_side ** dim} cells (cap {MAX_CELLS}); "
                f"use a smaller box, e.g. L <= {0.5 * self.cell * MAX_CELLS ** (1 / dim):.3g}"
            )
        self.n_side = n_side
        cell_id = self._cell_ids(c)
        order = np.argsort(cell_id, kind="stable")
        self.centers = c[order]
        self.centers.setflags(write=False)
        counts = np.bincount(cell_id, minlength=n_side ** dim)
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.cell_start.setflags(write=False)
        self._kdtree = None

    # ---- construction helpers -------------------------------------------
    def _cell_ids(self, pts: np.ndarray) -> np.ndarray:
        if pts.size == 0:
            return np.zeros(0, dtype=np.int64)
        idx = np.floor((pts + self.box_half_width) / self.cell).astype(np.int64)
        np.clip(idx, 0, self.n_side - 1, out=idx)
        mult = self.n_side ** np.arange(self.dim, dtype=np.int64)
        return idx @ mult

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    def kernel_arrays(self) -> kernels.FieldArrays:
        return kernels.FieldArrays(self.centers, self.cell_start, self.n_side,
                                   self.cell, self.box_half_width, self.params.a)

    # ---- queries --------------------------------------------------------
    def contains(self, points) -> np.ndarray:
        """Boolean mask: which points lie in K (closed balls)."""
        pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, self.dim))
        return kernels.contains(self.kernel_arrays(), pts)

    def contains_bruteforce(self, points, chunk: int = 2048) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        out = np.zeros(len(pts), dtype=bool)
        if self.n_centers == 0:
            return out
        a2 = self.params.a ** 2
        inside_box = np.all(np.abs(pts) <= self.box_half_width, axis=1)
        for s in range(0, len(pts), chunk):
            p = pts[s:s + chunk]
            d2 = ((p[:, None, :] - self.centers[None, :, :]) ** 2).sum(-1)
            out[s:s + chunk] = (d2 <= a2).any(axis=1)
        return out & inside_box

    def branching_rate(self, x) -> float:
        """beta1 on K, beta2 elsewhere (including outside the box)."""
        inside = self.contains(np.asarray(x, dtype=float).reshape(1, self.dim))[0]
        return self.params.beta1 if inside else self.params.beta2

    def nearest_center_distance(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.n_centers == 0:
            return np.full(len(pts), np.inf)
        if self._kdtree is None:
            self._kdtree = cKDTree(self.centers)
        dist, _ = self._kdtree.query(pts)
        return dist

    # ---- persistence ----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "params": self.params.to_dict(),
            "box": self.box_half_width,
            "centers": self.centers.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ObstacleField":
        return cls(int(obj["dim"]), ModelParams(**obj["params"]), float(obj["box"]),
                   np.asarray(obj["centers"], dtype=float).reshape(-1, int(obj["dim"])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "ObstacleField":
        return cls.from_json(json.loads(Path(path).read_text()))

    def with_params(self, params: ModelParams) -> "ObstacleField":
        """Same centres with different rates (radius must not change)."""
        if params.a != self.params.a:
            raise ValueError("obstacle radius is part of the geometry and cannot change")
        return ObstacleField(self.dim, params, self.box_half_width, self.centers)

    def __repr__(self):
        return (f"ObstacleField(dim={self.dim}, n_centers={self.n_centers}, "
                f"L={self.box_half_width}, params={self.params})")


def sample_environment(d: int, params: ModelParams, box_half_width: float, seed: int,
                       max_centers: int = MAX_CENTERS) -> ObstacleField:
    """Poisson point process of intensity ``nu`` on ``[-L, L]^d``."""
    if not box_half_width > 0:
        raise ValueError("box_half_width must be > 0")
    mean = params.nu * (2.0 * box_half_width) ** d
    if mean > max_centers:
        suggest = 0.5 * (max_centers / params.nu) ** (1.0 / d)
        raise ValueError(
            f"expected {mean:.3g} obstacle centres exceeds the cap {max_centers}; "
            f"try box_half_width <= {suggest:.3g}"
        )
    rng = make_rng(seed)
    n = int(rng.poisson(mean))
    centers = rng.uniform(-box_half_width, box_half_width, size=(n, d))
    return ObstacleField(d, params, box_half_width, centers)


def empty_field(d: int, params: ModelParams, box_half_width: float = 1.0) -> ObstacleField:
    return ObstacleField(d, params, box_half_width, np.zeros((0, d)))


def _lattice_by_norm(d: int, l: float, step: float) -> np.ndarray:
    k = int(math.floor(l / step + 1e-12))
    axis = np.arange(-k, k + 1) * step
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r = np.sqrt((grid ** 2).sum(1))
    keep = r <= l + 1e-12
    grid, r = grid[keep], r[keep]
    # by distance from the origin, ties broken lexicographically
    order = np.lexsort(tuple(grid[:, i] for i in reversed(range(d))) + (np.round(r, 12),))
    return grid[order]


def find_clearing(field: ObstacleField, rho: float, l: float,
                  grid_step: Optional[float] = None) -> ClearingReport:
    """Look for a ball ``B(x0, rho)`` disjoint from K with ``|x0| <= l``.

    Candidates are lattice points of pitch ``grid_step`` (default ``a/2``)
    scanned outward from the origin; the first candidate whose nearest
    obstacle centre is at distance >= ``rho + a`` is returned.  A negative
    ``rho`` is clamped to 0.
    """
    rho = max(float(rho), 0.0)
    a = field.params.a
    if l < 0:
        raise ValueError("search radius must be >= 0")
    if l > field.box_half_width - rho - a:
        raise ValueError(
            f"cannot certify a clearing: need l <= L - rho - a = "
            f"{field.box_half_width - rho - a:.6g}, got l={l}"
        )
    step = grid_step if grid_step is not None else a / 2
    if not step > 0:
        raise ValueError("grid_step must be > 0")
    cand = _lattice_by_norm(field.dim, l, step)
    dist = field.nearest_center_distance(cand)
    ok = np.flatnonzero(dist >= rho + a)
    if ok.size == 0:
        return ClearingReport(False, None, rho, float(l))
    return ClearingReport(True, cand[ok[0]].copy(), rho, float(l))


def occupation_fraction_in_K(field: ObstacleField, path, h: float) -> float:
    """Midpoint-rule approximation of the time a sampled path spends in K.

    ``path`` holds positions at uniform time step ``h``; each sub-interval
    contributes ``h`` if the midpoint of its endpoints lies in K.
    """
    p = np.asarray(path, dtype=float).reshape(-1, field.dim)
    if len(p) < 2:
        raise ValueError("path needs at least two points")
    if not h > 0:
        raise ValueError("h must be > 0")
    mid = 0.5 * (p[:-1] + p[1:])
    return float(h * field.contains(mid).sum())

