"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``MILDBBM_PURE=1`` to
force the pure-Python reference implementation.  Both consume identical
random streams, so results do not depend on the backend.
"""
from __future__ import annotations

import os
from collections import namedtuple

import numpy as np

FieldArrays = namedtuple("FieldArrays", "centers cell_start n_side cell L a")

if os.environ.get("MILDBBM_PURE", "") == "1":
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _pykernels as _impl
        BACKEND = "python"

DEFAULT_EPS = 1e-12


def backend_module(name: str):
    """Return the kernel module ``"python"`` or ``"cython"`` explicitly."""
    if name == "python":
        from . import _pykernels
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def contains(fa: FieldArrays, pts: np.ndarray) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if len(fa.centers) == 0:
        return np.zeros(len(pts), dtype=bool)
    return _impl.contains(fa, pts)


def simulate_bbm(seed, d, beta1, beta2, checkpoints, start=None, field=None,
                 absorb_center=None, absorb_radius=None, window_center=None,
                 window_radius=None, h=1 / 256, cap=2_000_000, track_extent=True,
                 eps=DEFAULT_EPS, impl=None):
    """Run one event-driven BBM replicate; see ``_pykernels.simulate_bbm``."""
    m = impl or _impl
    start = np.zeros(d) if start is None else np.asarray(start, dtype=float)
    return m.simulate_bbm(int(seed), int(d), float(beta1), float(beta2),
                          np.asarray(checkpoints, dtype=float), start, field,
                          absorb_center, absorb_radius, window_center, window_radius,
                          float(h), int(cap), bool(track_extent), float(eps))


def fk_occupation(seed, field, d, n_steps, h, n_paths, antithetic=False, impl=None):
    m = impl or _impl
    return m.fk_occupation(int(seed), field, int(d), int(n_steps), float(h),
                           int(n_paths), bool(antithetic))


def advance_paths(seed, positions, alive, radius, n_steps, h, eps=DEFAULT_EPS, impl=None):
    m = impl or _impl
    return m.advance_paths(int(seed), np.ascontiguousarray(positions, dtype=np.float64),
                           np.asarray(alive, dtype=bool), float(radius), int(n_steps),
                           float(h), float(eps))
