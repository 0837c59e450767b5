"""Hot numeric loops: truncated pairwise kernel sums and the growth scan.

Every kernel exists twice, as a numba-compiled loop (``*_numba``) and as a
blocked numpy version (``*_numpy``).  The public names dispatch on
``czlab._accel.USE_NUMBA``.  The numpy versions are the reference semantics;
the compiled ones must agree with them to 1e-10 relative.
"""
import threading

import numpy as np

from ._accel import USE_NUMBA, njit, prange

# the workqueue threading layer must not be entered from two threads at once
_PARALLEL_LOCK = threading.Lock()

# kernel codes shared by both paths
CAUCHY = 0
RIESZ = 1
POWER = 2

_BLOCK = 128


def _sqdist_rows(a, b):
    """Squared Euclidean distances, accumulated coordinate by coordinate.

    The summation order matches the compiled loops so that both paths see
    bit-identical distances.
    """
    r2 = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        t = a[:, k][:, None] - b[:, k][None, :]
        r2 += t * t
    return r2


# --------------------------------------------------------------------------
# truncated transform
# --------------------------------------------------------------------------

def transform_numpy(targets, points, coef, eps, kind, comp=0, expo=1.0, adjoint=False):
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    out = np.zeros(targets.shape[0], dtype=np.complex128)
    eps2 = eps * eps
    sgn = -1.0 if adjoint else 1.0
    for start in range(0, targets.shape[0], _BLOCK):
        tb = targets[start:start + _BLOCK]
        r2 = _sqdist_rows(tb, points)
        keep = r2 > eps2
        safe = np.where(keep, r2, 1.0)
        if kind == CAUCHY:
            dx = tb[:, 0][:, None] - points[:, 0][None, :]
            dy = tb[:, 1][:, None] - points[:, 1][None, :]
            kv = np.empty(dx.shape, dtype=np.complex128)
            kv.real = dx / safe
            kv.imag = -dy / safe
            if adjoint:
                kv = -np.conj(kv)
        elif kind == RIESZ:
            dj = tb[:, comp][:, None] - points[:, comp][None, :]
            kv = sgn * dj / safe ** ((expo + 1.0) / 2.0)
        else:
            kv = 1.0 / safe ** (expo / 2.0)
        kv = np.where(keep, kv, 0.0)
        out[start:start + _BLOCK] = kv @ coef
    return out


@njit(parallel=True, cache=True)
def _transform_loop(targets, points, coef, eps, kind, comp, expo, adjoint):
    m = targets.shape[0]
    npts = points.shape[0]
    d = points.shape[1]
    out = np.zeros(m, dtype=np.complex128)
    eps2 = eps * eps
    sgn = -1.0 if adjoint else 1.0
    for i in prange(m):
        acc = 0.0 + 0.0j
        for j in range(npts):
            r2 = 0.0
            for k in range(d):
                t = targets[i, k] - points[j, k]
                r2 += t * t
            if r2 > eps2:
                if kind == 0:
                    dx = targets[i, 0] - points[j, 0]
                    dy = targets[i, 1] - points[j, 1]
                    kv = complex(dx / r2, -dy / r2)
                    if adjoint:
                        kv = -kv.conjugate()
                elif kind == 1:
                    kv = complex(sgn * (targets[i, comp] - points[j, comp])
                                 / r2 ** ((expo + 1.0) / 2.0), 0.0)
                else:
                    kv = complex(1.0 / r2 ** (expo / 2.0), 0.0)
                acc += kv * coef[j]
        out[i] = acc
    return out


def transform_numba(targets, points, coef, eps, kind, comp=0, expo=1.0, adjoint=False):
    args = (np.ascontiguousarray(targets, dtype=np.float64),
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(coef, dtype=np.complex128),
            float(eps), int(kind), int(comp), float(expo), bool(adjoint))
    with _PARALLEL_LOCK:
        return _transform_loop(*args)


# --------------------------------------------------------------------------
# growth scan: max over r >= r_min of mu(B(x_j, r)) / r^n, per atom
# --------------------------------------------------------------------------

def growth_scan_numpy(points, weights, n, r_min):
    points = np.ascontiguousarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    npts = points.shape[0]
    best = np.zeros(npts)
    best_r = np.zeros(npts)
    for start in range(0, npts, _BLOCK):
        r2 = _sqdist_rows(points[start:start + _BLOCK], points)
        dist = np.sqrt(r2)
        order = np.argsort(dist, axis=1, kind="mergesort")
        ds = np.take_along_axis(dist, order, axis=1)
        cm = np.cumsum(weights[order], axis=1)
        # mass of the closed ball at radius ds[:, k] is cm at the end of the tie run
        last = np.ones(ds.shape, dtype=bool)
        last[:, :-1] = ds[:, 1:] != ds[:, :-1]
        radius = np.maximum(ds, r_min)
        ratio = np.where(last & (ds >= r_min), cm / radius ** n, -np.inf)
        # mass at r_min itself
        at_floor = np.where(ds <= r_min, cm, 0.0).max(axis=1)
        floor_ratio = at_floor / r_min ** n
        k = np.argmax(ratio, axis=1)
        rows = np.arange(ds.shape[0])
        top = ratio[rows, k]
        use_floor = floor_ratio >= top
        best[start:start + _BLOCK] = np.where(use_floor, floor_ratio, top)
        best_r[start:start + _BLOCK] = np.where(use_floor, r_min, ds[rows, k])
    return best, best_r


@njit(parallel=True, cache=True)
def _growth_loop(points, weights, n, r_min):
    npts = points.shape[0]
    d = points.shape[1]
    best = np.zeros(npts)
    best_r = np.zeros(npts)
    for i in prange(npts):
        dist = np.empty(npts)
        for j in range(npts):
            r2 = 0.0
            for k in range(d):
                t = points[i, k] - points[j, k]
                r2 += t * t
            dist[j] = np.sqrt(r2)
        order = np.argsort(dist, kind="mergesort")
        acc = 0.0
        at_floor = 0.0
        top = -np.inf
        top_r = 0.0
        for k in range(npts):
            dk = dist[order[k]]
            acc += weights[order[k]]
            if dk <= r_min:
                at_floor = acc
            is_last = k == npts - 1 or dist[order[k + 1]] != dk
            if is_last and dk >= r_min:
                ratio = acc / dk ** n
                if ratio > top:
                    top = ratio
                    top_r = dk
        floor_ratio = at_floor / r_min ** n
        if floor_ratio >= top:
            best[i] = floor_ratio
            best_r[i] = r_min
        else:
            best[i] = top
            best_r[i] = top_r
    return best, best_r


def growth_scan_numba(points, weights, n, r_min):
    args = (np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(weights, dtype=np.float64), float(n), float(r_min))
    with _PARALLEL_LOCK:
        return _growth_loop(*args)


if USE_NUMBA:
    transform = transform_numba
    growth_scan = growth_scan_numba
else:
    transform = transform_numpy
    growth_scan = growth_scan_numpy
