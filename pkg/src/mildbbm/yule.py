"""Yule (pure-birth) genealogies and their exact laws.

Closed forms are written for unit rate and extended to a general rate
``beta2`` by measuring time in units of ``1/beta2``.

Two samplers are provided.  :func:`simulate_yule` builds one explicit tree
with parent links.  :func:`yule_batch` simulates many trees at once using
a slot encoding: just before the k-th split there are k individuals in slots
``0..k-1``; the split picks a slot ``c_k`` uniformly and the new child goes to
slot ``k``.  Tracing two slots backwards through the splits recovers the
coalescence time and the population size at that moment without building
trees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .asymptotics import DomainError
from .seeding import derive_seed, make_rng

DEFAULT_CAP = 10_000_000
_SMALL_U = 0.1
_NTERMS = 24


# ----------------------------------------------------------- closed forms --
def _series(coef_fn) -> np.ndarray:
    # polynomial coefficients, highest power first, for np.polyval
    return np.array([coef_fn(n) for n in range(_NTERMS, -1, -1)], dtype=float)


def _fact(n: int) -> float:
    return float(math.factorial(n))


# 1 - 2u e^-u - e^-2u
_A_COEF = _series(lambda n: 0.0 if n == 0 else
                  -(2.0 * (-1) ** (n - 1) / _fact(n - 1) + (-2.0) ** n / _fact(n)))
# 2u - 3 + 4 e^-u - e^-2u
_B_COEF = _series(lambda n: {0: 0.0, 1: 0.0}.get(n, (4.0 * (-1) ** n - (-2.0) ** n) / _fact(n)))
# (u - 2) e^-u + (u + 2) e^-2u
_C_COEF = _series(lambda n: (
    ((-1) ** (n - 1) / _fact(n - 1) if n >= 1 else 0.0) - 2.0 * (-1) ** n / _fact(n)
    + ((-2.0) ** (n - 1) / _fact(n - 1) if n >= 1 else 0.0) + 2.0 * (-2.0) ** n / _fact(n)
))


def _numerators(u: np.ndarray):
    """A, B, C above; power series below ``_SMALL_U`` where the closed forms
    cancel to ~u^3."""
    small = u < _SMALL_U
    e1 = np.exp(-u)
    e2 = e1 * e1
    a = 1.0 - 2.0 * u * e1 - e2
    b = 2.0 * u - 3.0 + 4.0 * e1 - e2
    c = (u - 2.0) * e1 + (u + 2.0) * e2
    if small.any():
        us = u[small]
        a[small] = np.polyval(_A_COEF, us)
        b[small] = np.polyval(_B_COEF, us)
        c[small] = np.polyval(_C_COEF, us)
    return a, b, c


@dataclass(frozen=True)
class CoalescenceLaw:
    """Law of the split time of the MRCA of a random pair alive at ``t``,
    given at least two individuals are alive."""

    t: float
    beta2: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"horizon must be > 0, got {self.t}")
        if not self.beta2 > 0:
            raise ValueError(f"beta2 must be > 0, got {self.beta2}")

    def _scaled(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(~((u > 0) & (u < self.t))):
            raise DomainError(f"need 0 < u < t={self.t}")
        return u * self.beta2, self.t * self.beta2

    def cdf(self, u):
        us, ts = self._scaled(u)
        a, b, _ = _numerators(np.atleast_1d(us))
        et = math.exp(-ts)
        val = (a + et * b) / (-math.expm1(-ts) * np.expm1(-np.atleast_1d(us)) ** 2)
        return val if np.ndim(u) else float(val[0])

    def density(self, u):
        us, ts = self._scaled(u)
        uu = np.atleast_1d(us)
        a, _, c = _numerators(uu)
        et = math.exp(-ts)
        val = 2.0 * (c + et * a) / (-math.expm1(-ts) * (-np.expm1(-uu)) ** 3)
        val = self.beta2 * val
        return val if np.ndim(u) else float(val[0])


def coalescence_cdf(u, law: CoalescenceLaw):
    return law.cdf(u)


def coalescence_density(u, law: CoalescenceLaw):
    return law.density(u)


def population_pmf(k, u: float, i: int = 1, beta2: float = 1.0):
    """P(Y_u = k) for a Yule process started from ``i`` individuals:
    negative binomial ``C(k-1, i-1) e^{-beta2 u i} (1 - e^{-beta2 u})^{k-i}``.
    Zero for k < i."""
    if not u > 0:
        raise ValueError("u must be > 0")
    if i < 1:
        raise ValueError("i must be >= 1")
    k_arr = np.atleast_1d(np.asarray(k, dtype=float))
    x = beta2 * u
    out = np.zeros(k_arr.shape)
    ok = k_arr >= i
    kk = k_arr[ok]
    logp = (gammaln(kk) - gammaln(i) - gammaln(kk - i + 1) - x * i
            + (kk - i) * np.log(-math.expm1(-x)))
    out[ok] = np.exp(logp)
    return out if np.ndim(k) else float(out[0])


def geometric_cdf(k, u: float, beta2: float = 1.0):
    """P(Y_u <= k) from a single ancestor."""
    k = np.floor(np.asarray(k, dtype=float))
    q = -math.expm1(-beta2 * u)
    return np.where(k >= 1, 1.0 - q ** np.maximum(k, 0), 0.0)


def yule_time_coalescent_pmf(i: int, j: int) -> float:
    """P(I = i | Y_t = j): population size just before the coalescence of a
    random pair, in backward time."""
    if i < 2 or i > j:
        return 0.0
    return (j + 1) / (j - 1) * 2.0 / ((i - 1) * i) * (i - 1) / (i + 1)


def hitting_time_F_cdf(i: int) -> float:
    """P(F <= i) = (i-1)/(i+1); zero below 2."""
    if i < 2:
        return 0.0
    return (i - 1) / (i + 1)


# ------------------------------------------------------------- one tree ----
class YuleTree:
    """Timed binary genealogy.  Node 0 is the root; every node stores its
    parent, birth time and split time (NaN for leaves alive at the horizon).
    """

    def __init__(self, beta2: float, horizon: float, parent, birth, split):
        self.beta2 = float(beta2)
        self.horizon = float(horizon)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.birth = np.asarray(birth, dtype=float)
        self.split = np.asarray(split, dtype=float)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(np.isnan(self.split))

    @property
    def n_leaves(self) -> int:
        return int(np.isnan(self.split).sum())

    @property
    def n_internal(self) -> int:
        return int((~np.isnan(self.split)).sum())

    def split_times(self) -> np.ndarray:
        s = self.split[~np.isnan(self.split)]
        return np.sort(s)

    def mrca(self, u: int, v: int) -> int:
        seen = set()
        x = u
        while x >= 0:
            seen.add(x)
            x = int(self.parent[x])
        x = v
        while x not in seen:
            x = int(self.parent[x])
        return x

    def mrca_split_time(self, u: int, v: int) -> float:
        if u == v:
            raise ValueError("need two distinct leaves")
        return float(self.split[self.mrca(u, v)])

    def check(self) -> None:
        """Raise AssertionError if a structural invariant fails."""
        assert self.n_leaves >= 1
        assert self.n_leaves == self.n_internal + 1
        for node in range(1, len(self.parent)):
            p = self.parent[node]
            assert self.split[p] == self.birth[node]
            if not np.isnan(self.split[node]):
                assert self.split[node] > self.split[p]
                assert self.split[node] < self.horizon
        children = np.bincount(self.parent[1:], minlength=len(self.parent))
        assert np.all(children[~np.isnan(self.split)] == 2)
        assert np.all(children[np.isnan(self.split)] == 0)


def simulate_yule(beta2: float, t: float, seed: int, cap: int = DEFAULT_CAP) -> YuleTree:
    """Yule tree on [0, t]: with k alive the next split comes after an
    Exponential(k beta2) time and hits a uniformly chosen individual."""
    if not beta2 > 0:
        raise ValueError("beta2 must be > 0")
    if not t > 0:
        raise ValueError("t must be > 0")
    rng = make_rng(seed)
    parent = [-1]
    birth = [0.0]
    split = [math.nan]
    alive = [0]
    now = 0.0
    while True:
        k = len(alive)
        now += rng.exponential(1.0 / (k * beta2))
        if now >= t:
            break
        if k + 1 > cap:
            raise RuntimeError(f"Yule tree exceeded the leaf cap of {cap}")
        slot = int(rng.integers(k))
        node = alive[slot]
        split[node] = now
        a, b = len(parent), len(parent) + 1
        parent += [node, node]
        birth += [now, now]
        split += [math.nan, math.nan]
        alive[slot] = a
        alive.append(b)
    return YuleTree(beta2, t, parent, birth, split)


def simulate_yule_conditioned(beta2: float, t: float, seed: int, min_leaves: int = 2,
                              cap: int = DEFAULT_CAP, max_tries: int = 1_000_000) -> YuleTree:
    """Rejection sampling of a tree with at least ``min_leaves`` leaves."""
    for attempt in range(max_tries):
        tree = simulate_yule(beta2, t, derive_seed(seed, attempt), cap)
        if tree.n_leaves >= min_leaves:
            return tree
    raise RuntimeError("conditioning event too rare for rejection sampling")


def sample_pair_mrca_time(tree: YuleTree, seed: int) -> float:
    """Split time of the MRCA of a uniformly chosen unordered leaf pair."""
    leaves = tree.leaves
    if len(leaves) < 2:
        raise ValueError("tree has fewer than two leaves")
    rng = make_rng(seed)
    u, v = rng.choice(len(leaves), size=2, replace=False)
    return tree.mrca_split_time(int(leaves[u]), int(leaves[v]))


# ------------------------------------------------------- batch sampling ----
@dataclass
class YuleBatch:
    """Many independent Yule trees in slot encoding.

    ``steps[k-1] = (tree_ids, times, slots)`` lists, for every tree that
    reached a k-th split, its split time and the slot that split.
    """

    beta2: float
    t: float
    counts: np.ndarray
    steps: Optional[list]


def yule_batch(beta2: float, t: float, n: int, seed: int, record: bool = True,
               cap: int = DEFAULT_CAP) -> YuleBatch:
    rng = make_rng(seed)
    counts = np.ones(n, dtype=np.int64)
    clock = np.zeros(n)
    active = np.arange(n)
    steps = [] if record else None
    k = 1
    while active.size:
        clock[active] += rng.standard_exponential(active.size) / (k * beta2)
        go = clock[active] < t
        active = active[go]
        if not active.size:
            break
        if k + 1 > cap:
            raise RuntimeError(f"Yule tree exceeded the leaf cap of {cap}")
        slots = np.floor(rng.random(active.size) * k).astype(np.int64)
        if record:
            steps.append((active, clock[active].copy(), slots))
        counts[active] = k + 1
        k += 1
    return YuleBatch(beta2, t, counts, steps)


def batch_pair_coalescence(batch: YuleBatch, seed: int, trees=None):
    """Coalescence time ``s`` and pre-coalescence size ``I`` of a uniform
    leaf pair in each selected tree (default: all trees with >= 2 leaves)."""
    if batch.steps is None:
        raise ValueError("batch was simulated without recording splits")
    if trees is None:
        trees = np.flatnonzero(batch.counts >= 2)
    trees = np.asarray(trees, dtype=np.int64)
    y = batch.counts[trees]
    if np.any(y < 2):
        raise ValueError("selected trees need at least two leaves")
    rng = make_rng(seed)
    m = trees.size
    # uniform unordered pair of distinct slots in [0, y)
    x = np.floor(rng.random(m) * y).astype(np.int64)
    z = np.floor(rng.random(m) * (y - 1)).astype(np.int64)
    z = np.where(z >= x, z + 1, z)
    pos = np.full(batch.counts.size, -1, dtype=np.int64)
    pos[trees] = np.arange(m)
    s = np.full(m, np.nan)
    size = np.zeros(m, dtype=np.int64)
    open_ = np.ones(m, dtype=bool)
    for k in range(len(batch.steps), 0, -1):
        ids, times, slots = batch.steps[k - 1]
        p = pos[ids]
        sel = p >= 0
        p, times, slots = p[sel], times[sel], slots[sel]
        sel = open_[p]
        p, times, slots = p[sel], times[sel], slots[sel]
        if not p.size:
            continue
        x[p] = np.where(x[p] == k, slots, x[p])
        z[p] = np.where(z[p] == k, slots, z[p])
        hit = x[p] == z[p]
        q = p[hit]
        s[q] = times[hit]
        size[q] = k + 1
        open_[q] = False
    assert not open_.any()
    return s, size


def coalescence_samples(beta2: float, t: float, n: int, seed: int,
                        leaves: Optional[int] = None, batch_size: int = 200_000):
    """``n`` pair-coalescence samples from trees conditioned on Y_t >= 2, or
    on Y_t == ``leaves`` if given, by rejection over batches.

    Returns ``(s, I, Y)`` arrays.
    """
    out_s, out_i, out_y = [], [], []
    got = 0
    b = 0
    while got < n:
        batch = yule_batch(beta2, t, batch_size, derive_seed(seed, b, 0))
        keep = batch.counts >= 2 if leaves is None else batch.counts == leaves
        trees = np.flatnonzero(keep)[: n - got]
        if trees.size:
            s, i = batch_pair_coalescence(batch, derive_seed(seed, b, 1), trees)
            out_s.append(s)
            out_i.append(i)
            out_y.append(batch.counts[trees])
            got += trees.size
        b += 1
        if b > 10_000:
            raise RuntimeError("conditioning event too rare for rejection sampling")
    return np.concatenate(out_s), np.concatenate(out_i), np.concatenate(out_y)
