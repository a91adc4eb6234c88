# cython: language_level=3
"""Compiled kernels: event-driven BBM, Feynman-Kac occupation paths and
absorbed single-particle paths.

Line-for-line twin of ``_pykernels``; see that module for the variate
recipes.  Uniforms come straight from the Philox ``bitgen_t`` so the stream
matches ``Generator.random`` in the fallback, and the loops run without the
GIL so replicate threads scale.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport ceil, cos, log, sqrt, NAN
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy
from numpy.random cimport bitgen_t

cdef double TWO_PI = 6.283185307179586
cdef int RING = 0
cdef int CHECK = 1
cdef int MAXD = 16


cdef inline double _unif(bitgen_t* rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _normal(bitgen_t* rng) noexcept nogil:
    cdef double u1 = _unif(rng)
    cdef double u2 = _unif(rng)
    return sqrt(-2.0 * log(1.0 - u1)) * cos(TWO_PI * u2)


cdef inline double _bridge_sup(double a, double b, double dt, double u) noexcept nogil:
    cdef double diff = b - a
    return 0.5 * (a + b + sqrt(diff * diff - 2.0 * dt * log(1.0 - u)))


cdef inline double _dist(const double* z, const double* c, int d) noexcept nogil:
    cdef double s = 0.0, w
    cdef int i
    for i in range(d):
        w = z[i] - c[i]
        s += w * w
    return sqrt(s)


cdef inline double _extent(const double* z0, const double* z1, const double* c,
                           double dt, int d, bitgen_t* rng) noexcept nogil:
    cdef double a, b, up, lo, r0, r1
    if d == 1:
        a = z0[0] - c[0]
        b = z1[0] - c[0]
        up = _bridge_sup(a, b, dt, _unif(rng))
        lo = _bridge_sup(-a, -b, dt, _unif(rng))
        return up if up > lo else lo
    r0 = _dist(z0, c, d)
    r1 = _dist(z1, c, d)
    return _bridge_sup(r0, r1, dt, _unif(rng))


cdef inline bint _needs_refine(double r_max, double level, double dt, int d,
                               double log_eps) noexcept nogil:
    cdef double delta = level - r_max
    if delta <= 0.0:
        return True
    return log(2.0 * d) - 2.0 * delta * delta / (d * dt) >= log_eps


# ---------------------------------------------------------------- field ----
cdef struct Field:
    const double* centers
    const long long* start
    long n_side
    double cell
    double L
    double a2
    int d
    long mult[16]
    int n_off


cdef inline bint _outside(const Field* f, const double* x) noexcept nogil:
    cdef int i
    for i in range(f.d):
        if x[i] < -f.L or x[i] > f.L:
            return True
    return False


cdef bint _in_K(const Field* f, const double* x) noexcept nogil:
    cdef int d = f.d
    cdef long base[16]
    cdef long ci, flat, o, rem
    cdef long long j
    cdef int i
    cdef bint ok
    cdef double s, w
    cdef const double* c
    if _outside(f, x):
        return False
    for i in range(d):
        ci = <long>((x[i] + f.L) / f.cell)
        if ci > f.n_side - 1:
            ci = f.n_side - 1
        base[i] = ci
    for o in range(f.n_off):
        rem = o
        flat = 0
        ok = True
        for i in range(d):
            ci = base[i] + (rem % 3) - 1
            rem = rem // 3
            if ci < 0 or ci >= f.n_side:
                ok = False
                break
            flat += ci * f.mult[i]
        if not ok:
            continue
        for j in range(f.start[flat], f.start[flat + 1]):
            c = f.centers + j * d
            s = 0.0
            for i in range(d):
                w = x[i] - c[i]
                s += w * w
            if s <= f.a2:
                return True
    return False


cdef int _fill_field(Field* f, object fa, int d,
                     const double[:, ::1] centers, const long long[::1] start) except -1:
    cdef int i
    if d > MAXD:
        raise ValueError(f"dimension {d} exceeds compiled limit {MAXD}")
    f.centers = &centers[0, 0] if centers.shape[0] > 0 else NULL
    f.start = &start[0]
    f.n_side = <long>fa.n_side
    f.cell = <double>fa.cell
    f.L = <double>fa.L
    f.a2 = (<double>fa.a) * (<double>fa.a)
    f.d = d
    f.n_off = 1
    for i in range(d):
        f.mult[i] = f.n_side ** i
        f.n_off *= 3
    return 0


cdef inline bitgen_t* _bitgen(object bg) except NULL:
    return <bitgen_t*>PyCapsule_GetPointer(bg.capsule, "BitGenerator")


def contains(fa, const double[:, ::1] pts):
    cdef int d = pts.shape[1]
    cdef Py_ssize_t n = pts.shape[0], k
    cdef Field f
    centers = np.ascontiguousarray(fa.centers, dtype=np.float64).reshape(-1, d)
    start = np.ascontiguousarray(fa.cell_start, dtype=np.int64)
    cdef const double[:, ::1] cv = centers
    cdef const long long[::1] sv = start
    _fill_field(&f, fa, d, cv, sv)
    out = np.zeros(n, dtype=bool)
    cdef unsigned char[::1] ov = out.view(np.uint8)
    with nogil:
        for k in range(n):
            ov[k] = _in_K(&f, &pts[k, 0])
    return out


# ----------------------------------------------------------------- heap ----
cdef struct Event:
    double t
    long long seq
    long long idx
    int kind


cdef inline bint _less(const Event* a, const Event* b) noexcept nogil:
    return a.t < b.t or (a.t == b.t and a.seq < b.seq)


cdef struct Heap:
    Event* data
    long long size
    long long cap


cdef int _heap_push(Heap* h, Event e) noexcept nogil:
    cdef long long i, p
    cdef Event* nd
    if h.size == h.cap:
        nd = <Event*>realloc(h.data, 2 * h.cap * sizeof(Event))
        if nd == NULL:
            return -1
        h.data = nd
        h.cap *= 2
    i = h.size
    h.size += 1
    while i > 0:
        p = (i - 1) // 2
        if _less(&e, &h.data[p]):
            h.data[i] = h.data[p]
            i = p
        else:
            break
    h.data[i] = e
    return 0


cdef Event _heap_pop(Heap* h) noexcept nogil:
    cdef Event top = h.data[0]
    cdef Event last
    cdef long long i = 0, c
    h.size -= 1
    if h.size > 0:
        last = h.data[h.size]
        while True:
            c = 2 * i + 1
            if c >= h.size:
                break
            if c + 1 < h.size and _less(&h.data[c + 1], &h.data[c]):
                c += 1
            if _less(&h.data[c], &last):
                h.data[i] = h.data[c]
                i = c
            else:
                break
        h.data[i] = last
    return top


# ------------------------------------------------------------ particles ----
cdef struct Store:
    double* pos
    double* tl
    int* ck
    long long* parent
    double* birth
    double* end
    long long n
    long long cap
    int d


cdef int _store_grow(Store* s) noexcept nogil:
    cdef long long nc = 2 * s.cap
    cdef void* p
    p = realloc(s.pos, nc * s.d * sizeof(double))
    if p == NULL:
        return -1
    s.pos = <double*>p
    p = realloc(s.tl, nc * sizeof(double))
    if p == NULL:
        return -1
    s.tl = <double*>p
    p = realloc(s.ck, nc * sizeof(int))
    if p == NULL:
        return -1
    s.ck = <int*>p
    p = realloc(s.parent, nc * sizeof(long long))
    if p == NULL:
        return -1
    s.parent = <long long*>p
    p = realloc(s.birth, nc * sizeof(double))
    if p == NULL:
        return -1
    s.birth = <double*>p
    p = realloc(s.end, nc * sizeof(double))
    if p == NULL:
        return -1
    s.end = <double*>p
    s.cap = nc
    return 0


cdef struct Sim:
    # inputs
    int d
    double beta1
    double beta2
    const double* cps
    int n_cps
    bint has_field
    Field field
    bint absorbing
    double ac[16]
    double R
    bint windowed
    double wc[16]
    double wr
    double h
    long long cap
    bint track
    double log_eps
    # outputs
    long long* counts
    long long* wcounts
    double* ext
    double* finals
    long long* final_ids
    long long n_finals
    long long finals_cap
    double M
    long long n_splits
    long long n_rings
    long long n_killed
    bint capped
    double trunc_time
    double outside_time
    double total_time


cdef int _schedule(Sim* S, Store* P, Heap* H, long long i, long long* seq,
                   bitgen_t* rng) noexcept nogil:
    cdef double c = S.cps[P.ck[i]]
    cdef double e
    cdef Event ev
    ev.idx = i
    if S.beta2 > 0:
        e = P.tl[i] + (-log(1.0 - _unif(rng)) / S.beta2)
        if e < c:
            ev.t = e
            ev.seq = seq[0]
            ev.kind = RING
            seq[0] += 1
            return _heap_push(H, ev)
    ev.t = c
    ev.seq = seq[0]
    ev.kind = CHECK
    seq[0] += 1
    return _heap_push(H, ev)


cdef int _new_particle(Store* P, const double* y, double t, int ck,
                       long long parent) noexcept nogil:
    cdef long long j
    cdef int k
    if P.n == P.cap:
        if _store_grow(P) != 0:
            return -1
    j = P.n
    for k in range(P.d):
        P.pos[j * P.d + k] = y[k]
    P.tl[j] = t
    P.ck[j] = ck
    P.parent[j] = parent
    P.birth[j] = t
    P.end[j] = NAN
    P.n += 1
    return 0


cdef int _run(Sim* S, Store* P, Heap* H, bitgen_t* rng) noexcept nogil:
    cdef int d = S.d
    cdef double x[16]
    cdef double y[16]
    cdef double z[16]
    cdef double z1[16]
    cdef double origin[16]
    cdef long long seq = 0, i, n_alive = 1, n_sub, k2
    cdef int j, k, kind, last = S.n_cps - 1, rep
    cdef double te, s0, dt, sq, ry, rx, r_a, r_b, hs, tau, frac, sd, e, ea
    cdef bint killed, need_m, need_a, accept
    cdef Event ev
    cdef double p_acc = S.beta1 / S.beta2 if S.beta2 > 0 else 0.0
    cdef double* nf
    cdef long long* nid
    for j in range(d):
        origin[j] = 0.0
    S.M = _dist(P.pos, origin, d)
    if _schedule(S, P, H, 0, &seq, rng) != 0:
        return -1
    while H.size > 0:
        ev = _heap_pop(H)
        te = ev.t
        i = ev.idx
        kind = ev.kind
        for j in range(d):
            x[j] = P.pos[i * d + j]
        s0 = P.tl[i]
        dt = te - s0
        if dt > 0.0:
            sq = sqrt(dt)
            for j in range(d):
                y[j] = x[j] + sq * _normal(rng)
            killed = False
            ry = _dist(y, origin, d)
            rx = _dist(x, origin, d)
            need_m = S.track and _needs_refine(rx if rx > ry else ry, S.M, dt, d, S.log_eps)
            need_a = False
            if S.absorbing:
                r_a = _dist(x, S.ac, d)
                r_b = _dist(y, S.ac, d)
                need_a = _needs_refine(r_a if r_a > r_b else r_b, S.R, dt, d, S.log_eps)
            if need_m or need_a:
                n_sub = 1 if dt <= S.h else <long long>ceil(dt / S.h)
                hs = dt / n_sub
                for j in range(d):
                    z[j] = x[j]
                for k2 in range(n_sub):
                    if k2 == n_sub - 1:
                        for j in range(d):
                            z1[j] = y[j]
                    else:
                        tau = dt - k2 * hs
                        frac = hs / tau
                        sd = sqrt(hs * (tau - hs) / tau)
                        for j in range(d):
                            z1[j] = z[j] + frac * (y[j] - z[j]) + sd * _normal(rng)
                    if need_m:
                        e = _extent(z, z1, origin, hs, d, rng)
                        if e > S.M:
                            S.M = e
                    if need_a:
                        ea = _extent(z, z1, S.ac, hs, d, rng)
                        if ea >= S.R:
                            killed = True
                            P.end[i] = s0 + (k2 + 1) * hs
                            break
                    for j in range(d):
                        z[j] = z1[j]
            if S.has_field:
                S.outside_time += 0.5 * (<int>_outside(&S.field, x) + <int>_outside(&S.field, y)) * dt
            S.total_time += dt
            if killed:
                n_alive -= 1
                S.n_killed += 1
                continue
            if ry > S.M:
                S.M = ry
        else:
            for j in range(d):
                y[j] = x[j]
        for j in range(d):
            P.pos[i * d + j] = y[j]
        P.tl[i] = te
        if kind == CHECK:
            k = P.ck[i]
            S.counts[k] += 1
            S.ext[k] = S.M
            if S.windowed and _dist(y, S.wc, d) < S.wr:
                S.wcounts[k] += 1
            if k == last:
                if S.n_finals == S.finals_cap:
                    nf = <double*>realloc(S.finals, 2 * S.finals_cap * d * sizeof(double))
                    if nf == NULL:
                        return -1
                    S.finals = nf
                    nid = <long long*>realloc(S.final_ids, 2 * S.finals_cap * sizeof(long long))
                    if nid == NULL:
                        return -1
                    S.final_ids = nid
                    S.finals_cap *= 2
                for j in range(d):
                    S.finals[S.n_finals * d + j] = y[j]
                S.final_ids[S.n_finals] = i
                S.n_finals += 1
                P.end[i] = te
                continue
            P.ck[i] = k + 1
            if _schedule(S, P, H, i, &seq, rng) != 0:
                return -1
        else:
            S.n_rings += 1
            accept = True
            if S.has_field and _in_K(&S.field, y):
                accept = p_acc > 0.0 and _unif(rng) < p_acc
            if accept:
                S.n_splits += 1
                P.end[i] = te
                for rep in range(2):
                    if _new_particle(P, y, te, P.ck[i], i) != 0:
                        return -1
                    if _schedule(S, P, H, P.n - 1, &seq, rng) != 0:
                        return -1
                n_alive += 1
                if n_alive > S.cap:
                    S.capped = True
                    S.trunc_time = te
                    break
            else:
                if _schedule(S, P, H, i, &seq, rng) != 0:
                    return -1
    return 0


def simulate_bbm(seed, int d, double beta1, double beta2, checkpoints, start, field,
                 absorb_center, absorb_radius, window_center, window_radius,
                 double h, long long cap, bint track_extent, double eps):
    cdef Sim S
    cdef Store P
    cdef Heap H
    cdef int j, rc
    cdef const double[:, ::1] cv
    cdef const long long[::1] sv
    if d > MAXD:
        raise ValueError(f"dimension {d} exceeds compiled limit {MAXD}")
    cps = np.ascontiguousarray(checkpoints, dtype=np.float64)
    cdef const double[::1] cps_v = cps
    bg = np.random.Philox(int(seed))
    cdef bitgen_t* rng = _bitgen(bg)

    S.d = d
    S.beta1 = beta1
    S.beta2 = beta2
    S.cps = &cps_v[0]
    S.n_cps = cps.shape[0]
    S.has_field = field is not None
    if S.has_field:
        centers = np.ascontiguousarray(field.centers, dtype=np.float64).reshape(-1, d)
        start_arr = np.ascontiguousarray(field.cell_start, dtype=np.int64)
        cv = centers
        sv = start_arr
        _fill_field(&S.field, field, d, cv, sv)
    S.absorbing = absorb_center is not None
    S.R = float(absorb_radius) if S.absorbing else 0.0
    S.windowed = window_center is not None
    S.wr = float(window_radius) if S.windowed else 0.0
    for j in range(d):
        S.ac[j] = float(absorb_center[j]) if S.absorbing else 0.0
        S.wc[j] = float(window_center[j]) if S.windowed else 0.0
    S.h = h
    S.cap = cap
    S.track = track_extent
    S.log_eps = log(eps)
    S.n_finals = 0
    S.finals_cap = 64
    S.M = 0.0
    S.n_splits = 0
    S.n_rings = 0
    S.n_killed = 0
    S.capped = False
    S.trunc_time = NAN
    S.outside_time = 0.0
    S.total_time = 0.0

    counts = np.zeros(S.n_cps, dtype=np.int64)
    wcounts = np.zeros(S.n_cps, dtype=np.int64)
    cdef long long[::1] cnt_v = counts
    cdef long long[::1] wcnt_v = wcounts
    S.counts = &cnt_v[0]
    S.wcounts = &wcnt_v[0]
    ext = np.full(S.n_cps, np.nan)
    cdef double[::1] ext_v = ext
    S.ext = &ext_v[0]

    P.d = d
    P.cap = 64
    P.n = 0
    P.pos = <double*>malloc(P.cap * d * sizeof(double))
    P.tl = <double*>malloc(P.cap * sizeof(double))
    P.ck = <int*>malloc(P.cap * sizeof(int))
    P.parent = <long long*>malloc(P.cap * sizeof(long long))
    P.birth = <double*>malloc(P.cap * sizeof(double))
    P.end = <double*>malloc(P.cap * sizeof(double))
    H.cap = 64
    H.size = 0
    H.data = <Event*>malloc(H.cap * sizeof(Event))
    S.finals = <double*>malloc(S.finals_cap * d * sizeof(double))
    S.final_ids = <long long*>malloc(S.finals_cap * sizeof(long long))
    try:
        if (P.pos == NULL or P.tl == NULL or P.ck == NULL or P.parent == NULL
                or P.birth == NULL or P.end == NULL or H.data == NULL or S.finals == NULL or S.final_ids == NULL):
            raise MemoryError()
        y0 = np.ascontiguousarray(start, dtype=np.float64)
        for j in range(d):
            P.pos[j] = y0[j]
        P.tl[0] = 0.0
        P.ck[0] = 0
        P.parent[0] = -1
        P.birth[0] = 0.0
        P.end[0] = NAN
        P.n = 1
        with bg.lock, nogil:
            rc = _run(&S, &P, &H, rng)
        if rc != 0:
            raise MemoryError("particle storage exhausted")
        finals = np.empty((S.n_finals, d), dtype=np.float64)
        if S.n_finals > 0:
            memcpy(<void*>cnp_data(finals), S.finals, S.n_finals * d * sizeof(double))
        final_ids = np.empty(S.n_finals, dtype=np.int64)
        if S.n_finals > 0:
            memcpy(<void*>cnp_data(final_ids), S.final_ids, S.n_finals * sizeof(long long))
        parent = np.empty(P.n, dtype=np.int64)
        birth = np.empty(P.n, dtype=np.float64)
        end = np.empty(P.n, dtype=np.float64)
        memcpy(<void*>cnp_data(parent), P.parent, P.n * sizeof(long long))
        memcpy(<void*>cnp_data(birth), P.birth, P.n * sizeof(double))
        memcpy(<void*>cnp_data(end), P.end, P.n * sizeof(double))
    finally:
        free(P.pos)
        free(P.tl)
        free(P.ck)
        free(P.parent)
        free(P.birth)
        free(P.end)
        free(H.data)
        free(S.finals)
        free(S.final_ids)
    return {
        "counts": counts,
        "window_counts": wcounts,
        "final_positions": finals,
        "final_ids": final_ids,
        "max_extent": S.M,
        "extent_curve": ext,
        "n_splits": S.n_splits,
        "n_rings": S.n_rings,
        "n_killed": S.n_killed,
        "capped": bool(S.capped),
        "trunc_time": S.trunc_time,
        "outside_time": S.outside_time,
        "total_time": S.total_time,
        "parent": parent,
        "birth": birth,
        "end": end,
    }


cdef inline void* cnp_data(object arr):
    cdef Py_ssize_t addr = arr.ctypes.data
    return <void*>addr


# ------------------------------------------------------ Feynman-Kac paths ----
def fk_occupation(seed, field, int d, long long n_steps, double h,
                  long long n_paths, bint antithetic):
    cdef Field f
    cdef bint has_field = field is not None
    cdef const double[:, ::1] cv
    cdef const long long[::1] sv
    if d > MAXD:
        raise ValueError(f"dimension {d} exceeds compiled limit {MAXD}")
    if has_field:
        centers = np.ascontiguousarray(field.centers, dtype=np.float64).reshape(-1, d)
        start_arr = np.ascontiguousarray(field.cell_start, dtype=np.int64)
        cv = centers
        sv = start_arr
        _fill_field(&f, field, d, cv, sv)
    bg = np.random.Philox(int(seed))
    cdef bitgen_t* rng = _bitgen(bg)
    counts = np.zeros(n_paths, dtype=np.int64)
    outside = np.zeros(n_paths, dtype=np.int64)
    cdef long long[::1] cnt = counts
    cdef long long[::1] outv = outside
    cdef double sq_half = sqrt(0.5 * h)
    cdef double sq_full = sqrt(h)
    cdef double x[16]
    cdef double* prev = <double*>malloc(max(n_steps * d, 1) * sizeof(double))
    cdef long long p, k, m, c, o
    cdef int j
    cdef double sq, g
    cdef bint mirror
    if prev == NULL:
        raise MemoryError()
    try:
        with bg.lock, nogil:
            for p in range(n_paths):
                mirror = antithetic and (p % 2 == 1)
                for j in range(d):
                    x[j] = 0.0
                c = 0
                o = 0
                m = 0
                for k in range(n_steps):
                    sq = sq_half if k == 0 else sq_full
                    for j in range(d):
                        if mirror:
                            g = -prev[m]
                        else:
                            g = _normal(rng)
                            prev[m] = g
                        m += 1
                        x[j] = x[j] + sq * g
                    if has_field:
                        if _outside(&f, x):
                            o += 1
                        elif _in_K(&f, x):
                            c += 1
                cnt[p] = c
                outv[p] = o
    finally:
        free(prev)
    return counts, outside


# ------------------------------------------------------- absorbed paths ----
def advance_paths(seed, positions, alive, double radius, long long n_steps,
                  double h, double eps):
    pos = np.array(positions, dtype=np.float64, order="C", copy=True)
    alv = np.array(alive, dtype=bool, copy=True)
    cdef double[:, ::1] pv = pos
    cdef unsigned char[::1] av = alv.view(np.uint8)
    cdef Py_ssize_t n = pos.shape[0], p
    cdef int d = pos.shape[1], j
    cdef long long k
    cdef double z[16]
    cdef double z1[16]
    cdef double origin[16]
    cdef double sq = sqrt(h), r0, r1
    cdef double log_eps = log(eps)
    if d > MAXD:
        raise ValueError(f"dimension {d} exceeds compiled limit {MAXD}")
    bg = np.random.Philox(int(seed))
    cdef bitgen_t* rng = _bitgen(bg)
    for j in range(d):
        origin[j] = 0.0
    with bg.lock, nogil:
        for p in range(n):
            if not av[p]:
                continue
            for j in range(d):
                z[j] = pv[p, j]
            r0 = _dist(z, origin, d)
            for k in range(n_steps):
                for j in range(d):
                    z1[j] = z[j] + sq * _normal(rng)
                r1 = _dist(z1, origin, d)
                if r1 >= radius:
                    av[p] = 0
                    break
                if _needs_refine(r0 if r0 > r1 else r1, radius, h, d, log_eps):
                    if _extent(z, z1, origin, h, d, rng) >= radius:
                        av[p] = 0
                        break
                for j in range(d):
                    z[j] = z1[j]
                r0 = r1
            for j in range(d):
                pv[p, j] = z[j]
    return pos, alv
