"""Pure-Python reference kernels.

These are the fallback when the compiled extension is unavailable, and
the reference the extension is tested against: both consume the same
Philox uniform stream in the same order and perform the same floating-point
operations, so for a given seed they return identical results.

Random variates are built from uniforms only:
  exponential  -log(1 - U) / rate
  normal       sqrt(-2 log(1 - U1)) * cos(2 pi U2)     (one per pair)
  bridge max   (a + b + sqrt((b - a)^2 - 2 dt log(1 - U))) / 2
"""
from __future__ import annotations

import heapq
import itertools
import math

import numpy as np

TWO_PI = 6.283185307179586
RING = 0
CHECK = 1
_BLOCK = 2048


class _Uniforms:
    __slots__ = ("_gen", "_buf", "_i")

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.Philox(int(seed)))
        self._buf: list = []
        self._i = 0

    def __call__(self) -> float:
        i = self._i
        if i == len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            i = 0
        self._i = i + 1
        return self._buf[i]


def _normal(uni) -> float:
    u1 = uni()
    u2 = uni()
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(TWO_PI * u2)


def _bridge_sup(a: float, b: float, dt: float, u: float) -> float:
    diff = b - a
    return 0.5 * (a + b + math.sqrt(diff * diff - 2.0 * dt * math.log(1.0 - u)))


def _dist(z, c, d: int) -> float:
    s = 0.0
    for i in range(d):
        w = z[i] - c[i]
        s += w * w
    return math.sqrt(s)


def _extent(z0, z1, c, dt: float, d: int, uni) -> float:
    """Sampled maximal distance from ``c`` along a Brownian bridge z0 -> z1.

    Exact in one dimension (independent max and min of the bridge; their
    joint dependence is negligible on a sub-step).  For d >= 2 the radial
    coordinate is treated as a one-dimensional bridge, i.e. the crossing
    probability against the tangent half-space.
    """
    if d == 1:
        a = z0[0] - c[0]
        b = z1[0] - c[0]
        up = _bridge_sup(a, b, dt, uni())
        lo = _bridge_sup(-a, -b, dt, uni())
        return up if up > lo else lo
    return _bridge_sup(_dist(z0, c, d), _dist(z1, c, d), dt, uni())


def _needs_refine(r_max: float, level: float, dt: float, d: int, log_eps: float) -> bool:
    """True unless a bridge of length dt started/ended within ``r_max``
    provably stays below ``level`` except with probability < eps."""
    delta = level - r_max
    if delta <= 0.0:
        return True
    return math.log(2.0 * d) - 2.0 * delta * delta / (d * dt) >= log_eps


class _Field:
    """List-based view of FieldArrays for fast scalar queries."""

    __slots__ = ("centers", "start", "n_side", "cell", "L", "a2", "d", "offsets", "mult")

    def __init__(self, fa, d: int):
        self.centers = fa.centers.tolist()
        self.start = fa.cell_start.tolist()
        self.n_side = int(fa.n_side)
        self.cell = float(fa.cell)
        self.L = float(fa.L)
        self.a2 = float(fa.a) * float(fa.a)
        self.d = d
        self.offsets = list(itertools.product((-1, 0, 1), repeat=d))
        self.mult = [self.n_side ** i for i in range(d)]

    def outside(self, x) -> bool:
        L = self.L
        for i in range(self.d):
            if x[i] < -L or x[i] > L:
                return True
        return False

    def in_K(self, x) -> bool:
        if self.outside(x):
            return False
        d = self.d
        n_side = self.n_side
        base = []
        for i in range(d):
            ci = int((x[i] + self.L) / self.cell)
            if ci > n_side - 1:
                ci = n_side - 1
            base.append(ci)
        centers = self.centers
        start = self.start
        a2 = self.a2
        for off in self.offsets:
            flat = 0
            ok = True
            for i in range(d):
                ci = base[i] + off[i]
                if ci < 0 or ci >= n_side:
                    ok = False
                    break
                flat += ci * self.mult[i]
            if not ok:
                continue
            for j in range(start[flat], start[flat + 1]):
                c = centers[j]
                s = 0.0
                for i in range(d):
                    w = x[i] - c[i]
                    s += w * w
                if s <= a2:
                    return True
        return False


def contains(fa, pts: np.ndarray) -> np.ndarray:
    d = pts.shape[1]
    f = _Field(fa, d)
    return np.array([f.in_K(p) for p in pts.tolist()], dtype=bool)


def simulate_bbm(seed, d, beta1, beta2, checkpoints, start, field, absorb_center,
                 absorb_radius, window_center, window_radius, h, cap, track_extent,
                 eps):
    uni = _Uniforms(seed)
    log_eps = math.log(eps)
    cps = [float(c) for c in checkpoints]
    last = len(cps) - 1
    fld = _Field(field, d) if field is not None else None
    absorbing = absorb_center is not None
    ac = list(absorb_center) if absorbing else None
    R = float(absorb_radius) if absorbing else 0.0
    windowed = window_center is not None
    wc = list(window_center) if windowed else None
    wr = float(window_radius) if windowed else 0.0
    origin = [0.0] * d
    p_acc = beta1 / beta2 if beta2 > 0 else 0.0

    pos = [list(start)]
    tl = [0.0]
    ck = [0]
    parent = [-1]
    birth = [0.0]
    end = [math.nan]
    counts = [0] * len(cps)
    wcounts = [0] * len(cps)
    ext = [math.nan] * len(cps)
    finals = []
    final_ids = []
    heap = []
    seq = 0
    M = _dist(pos[0], origin, d)
    n_alive = 1
    n_splits = n_rings = n_killed = 0
    capped = False
    trunc_time = math.nan
    outside_time = 0.0
    total_time = 0.0

    def schedule(i):
        nonlocal seq
        c = cps[ck[i]]
        if beta2 > 0:
            e = tl[i] + (-math.log(1.0 - uni()) / beta2)
            if e < c:
                heapq.heappush(heap, (e, seq, i, RING))
                seq += 1
                return
        heapq.heappush(heap, (c, seq, i, CHECK))
        seq += 1

    schedule(0)
    while heap:
        te, _, i, kind = heapq.heappop(heap)
        x = pos[i]
        s0 = tl[i]
        dt = te - s0
        if dt > 0.0:
            sq = math.sqrt(dt)
            y = [x[j] + sq * _normal(uni) for j in range(d)]
            # --- path extent and absorption along the segment -------------
            killed = False
            ry = _dist(y, origin, d)
            need_m = track_extent and _needs_refine(max(_dist(x, origin, d), ry), M, dt, d, log_eps)
            need_a = absorbing and _needs_refine(max(_dist(x, ac, d), _dist(y, ac, d)), R, dt, d, log_eps)
            if need_m or need_a:
                n_sub = 1 if dt <= h else int(math.ceil(dt / h))
                hs = dt / n_sub
                z = x
                for k in range(n_sub):
                    if k == n_sub - 1:
                        z1 = y
                    else:
                        tau = dt - k * hs
                        frac = hs / tau
                        sd = math.sqrt(hs * (tau - hs) / tau)
                        z1 = [z[j] + frac * (y[j] - z[j]) + sd * _normal(uni) for j in range(d)]
                    if need_m:
                        e = _extent(z, z1, origin, hs, d, uni)
                        if e > M:
                            M = e
                    if need_a:
                        ea = _extent(z, z1, ac, hs, d, uni)
                        if ea >= R:
                            killed = True
                            end[i] = s0 + (k + 1) * hs
                            break
                    z = z1
            if fld is not None:
                outside_time += 0.5 * (fld.outside(x) + fld.outside(y)) * dt
            total_time += dt
            if killed:
                n_alive -= 1
                n_killed += 1
                continue
            if ry > M:
                M = ry
        else:
            y = list(x)
        pos[i] = y
        tl[i] = te
        if kind == CHECK:
            k = ck[i]
            counts[k] += 1
            ext[k] = M
            if windowed and _dist(y, wc, d) < wr:
                wcounts[k] += 1
            if k == last:
                finals.append(y)
                final_ids.append(i)
                end[i] = te
                continue
            ck[i] = k + 1
            schedule(i)
        else:
            n_rings += 1
            accept = True
            if fld is not None and fld.in_K(y):
                accept = p_acc > 0.0 and uni() < p_acc
            if accept:
                n_splits += 1
                end[i] = te
                for _ in range(2):
                    pos.append(list(y))
                    tl.append(te)
                    ck.append(ck[i])
                    parent.append(i)
                    birth.append(te)
                    end.append(math.nan)
                    schedule(len(pos) - 1)
                n_alive += 1
                if n_alive > cap:
                    capped = True
                    trunc_time = te
                    break
            else:
                schedule(i)

    return {
        "counts": np.array(counts, dtype=np.int64),
        "window_counts": np.array(wcounts, dtype=np.int64),
        "final_positions": np.array(finals, dtype=float).reshape(-1, d),
        "final_ids": np.array(final_ids, dtype=np.int64),
        "max_extent": M,
        "extent_curve": np.array(ext, dtype=float),
        "n_splits": n_splits,
        "n_rings": n_rings,
        "n_killed": n_killed,
        "capped": capped,
        "trunc_time": trunc_time,
        "outside_time": outside_time,
        "total_time": total_time,
        "parent": np.array(parent, dtype=np.int64),
        "birth": np.array(birth, dtype=float),
        "end": np.array(end, dtype=float),
    }


def fk_occupation(seed, field, d, n_steps, h, n_paths, antithetic):
    uni = _Uniforms(seed)
    fld = _Field(field, d) if field is not None else None
    counts = np.zeros(n_paths, dtype=np.int64)
    outside = np.zeros(n_paths, dtype=np.int64)
    sq_half = math.sqrt(0.5 * h)
    sq_full = math.sqrt(h)
    prev: list = []
    for p in range(n_paths):
        mirror = antithetic and (p % 2 == 1)
        cur = [] if not mirror else prev
        x = [0.0] * d
        cnt = 0
        out = 0
        m = 0
        for k in range(n_steps):
            sq = sq_half if k == 0 else sq_full
            for j in range(d):
                if mirror:
                    g = -cur[m]
                    m += 1
                else:
                    g = _normal(uni)
                    cur.append(g)
                x[j] = x[j] + sq * g
            if fld is not None:
                if fld.outside(x):
                    out += 1
                elif fld.in_K(x):
                    cnt += 1
        counts[p] = cnt
        outside[p] = out
        prev = cur
    return counts, outside


def advance_paths(seed, positions, alive, radius, n_steps, h, eps):
    uni = _Uniforms(seed)
    log_eps = math.log(eps)
    n, d = positions.shape
    pos = positions.tolist()
    alv = alive.tolist()
    origin = [0.0] * d
    sq = math.sqrt(h)
    R = float(radius)
    for p in range(n):
        if not alv[p]:
            continue
        z = pos[p]
        r0 = _dist(z, origin, d)
        for _ in range(n_steps):
            z1 = [z[j] + sq * _normal(uni) for j in range(d)]
            r1 = _dist(z1, origin, d)
            if r1 >= R:
                alv[p] = False
                break
            if _needs_refine(r0 if r0 > r1 else r1, R, h, d, log_eps):
                if _extent(z, z1, origin, h, d, uni) >= R:
                    alv[p] = False
                    break
            z = z1
            r0 = r1
        pos[p] = z
    return np.array(pos, dtype=float).reshape(n, d), np.array(alv, dtype=bool)
