"""Hot numerical kernels: numba-compiled with a pure-numpy fallback.

The fallback path is selected by setting the environment variable
``QTHERMO_PURE_NUMPY=1`` before import (or automatically when numba is not
installed).  Both paths implement identical semantics; ``benchmarks/``
contains a script comparing them.

Kernels here are deliberately low-level (plain ndarrays in, ndarrays out);
model- and measure-aware code lives in the higher modules.
"""

import os

import numpy as np

PURE_NUMPY = os.environ.get("QTHERMO_PURE_NUMPY", "0") == "1"

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        PURE_NUMPY = True

__all__ = [
    "PURE_NUMPY",
    "lininterp",
    "mp_left_inverse",
    "transfer_apply",
    "adjoint_apply",
    "greedy_separated",
]


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _lininterp_np(values, pts, periodic):
    """Linear interpolation of grid values at pts in [0,1]."""
    values = np.asarray(values)
    n = values.shape[0]
    if periodic:
        pos = (pts % 1.0) * n
        i0 = np.floor(pos).astype(np.int64) % n
        t = pos - np.floor(pos)
        i1 = (i0 + 1) % n
    else:
        pos = np.clip(pts, 0.0, 1.0) * (n - 1)
        i0 = np.minimum(np.floor(pos).astype(np.int64), n - 2)
        t = pos - i0
        i1 = i0 + 1
    return values[i0] * (1.0 - t) + values[i1] * t


def _mp_left_inverse_np(targets, beta):
    """Solve y*(1+(2y)^beta) = x on [0, 1/2], elementwise.

    Newton from the upper bracket with bisection safeguard; the branch is
    strictly increasing with derivative >= 1 so the iteration is
    well-conditioned.  Tolerance 1e-14 in residual, well inside the 1e-13
    branch-inversion contract.
    """
    x = np.asarray(targets, dtype=np.float64)
    lo = np.zeros_like(x)
    hi = np.full_like(x, 0.5)
    y = 0.5 * x  # T(y) >= y, so the root is below x (and below 1/2)
    np.minimum(y, hi, out=y)
    for _ in range(80):
        ty = y * (1.0 + (2.0 * y) ** beta)
        res = ty - x
        done = np.abs(res) <= 1e-14
        if done.all():
            break
        hi = np.where(res > 0, y, hi)
        lo = np.where(res <= 0, y, lo)
        dty = 1.0 + (1.0 + beta) * (2.0 * y) ** beta
        ynew = y - res / dty
        bad = (ynew <= lo) | (ynew >= hi) | ~np.isfinite(ynew)
        y = np.where(bad, 0.5 * (lo + hi), ynew)
    return y


def _transfer_apply_np(gvals, pre, w, periodic):
    """out[j] = sum_b w[b,j] * interp(g, pre[b,j])."""
    out = np.zeros(pre.shape[1])
    for b in range(pre.shape[0]):
        out += w[b] * _lininterp_np(gvals, pre[b], periodic)
    return out


def _adjoint_apply_np(rho, pre, w, periodic):
    """Transpose of transfer_apply acting on node masses rho."""
    n = rho.shape[0]
    out = np.zeros(n)
    for b in range(pre.shape[0]):
        mass = rho * w[b]
        if periodic:
            pos = (pre[b] % 1.0) * n
            i0 = np.floor(pos).astype(np.int64) % n
            t = pos - np.floor(pos)
            i1 = (i0 + 1) % n
        else:
            pos = np.clip(pre[b], 0.0, 1.0) * (n - 1)
            i0 = np.minimum(np.floor(pos).astype(np.int64), n - 2)
            t = pos - i0
            i1 = i0 + 1
        np.add.at(out, i0, mass * (1.0 - t))
        np.add.at(out, i1, mass * t)
    return out


def _greedy_separated_np(orbits, order, eps, circle):
    """Greedy (n,eps)-separated subset of candidate orbits.

    orbits: (m, n+1) forward orbits; order: candidate indices by descending
    weight.  Two candidates are separated when some coordinate differs by at
    least eps (circle distance when circle=True).  Returns a keep mask.
    Candidates already >= eps apart at time 0 need no further test.
    """
    m = orbits.shape[0]
    keep = np.zeros(m, dtype=np.bool_)
    kept = []
    for idx in order:
        y0 = orbits[idx, 0]
        ok = True
        for k in kept:
            d0 = abs(y0 - orbits[k, 0])
            if circle:
                d0 = min(d0, 1.0 - d0)
            if d0 >= eps:
                continue
            d = np.abs(orbits[idx] - orbits[k])
            if circle:
                d = np.minimum(d, 1.0 - d)
            if d.max() < eps:
                ok = False
                break
        if ok:
            keep[idx] = True
            kept.append(idx)
    return keep


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if not PURE_NUMPY:

    @njit(cache=True)
    def _lininterp_nb(values, pts, periodic):
        n = values.shape[0]
        out = np.empty(pts.shape[0])
        for j in range(pts.shape[0]):
            if periodic:
                pos = (pts[j] % 1.0) * n
                i0 = int(np.floor(pos)) % n
                t = pos - np.floor(pos)
                i1 = (i0 + 1) % n
            else:
                p = pts[j]
                if p < 0.0:
                    p = 0.0
                elif p > 1.0:
                    p = 1.0
                pos = p * (n - 1)
                i0 = int(np.floor(pos))
                if i0 > n - 2:
                    i0 = n - 2
                t = pos - i0
                i1 = i0 + 1
            out[j] = values[i0] * (1.0 - t) + values[i1] * t
        return out

    @njit(cache=True)
    def _mp_left_inverse_nb(targets, beta):
        out = np.empty(targets.shape[0])
        for j in range(targets.shape[0]):
            x = targets[j]
            lo = 0.0
            hi = 0.5
            y = 0.5 * x
            if y > hi:
                y = hi
            for _ in range(80):
                ty = y * (1.0 + (2.0 * y) ** beta)
                res = ty - x
                if abs(res) <= 1e-14:
                    break
                if res > 0:
                    hi = y
                else:
                    lo = y
                dty = 1.0 + (1.0 + beta) * (2.0 * y) ** beta
                ynew = y - res / dty
                if ynew <= lo or ynew >= hi or not np.isfinite(ynew):
                    ynew = 0.5 * (lo + hi)
                y = ynew
            out[j] = y
        return out

    @njit(cache=True)
    def _transfer_apply_nb(gvals, pre, w, periodic):
        deg = pre.shape[0]
        m = pre.shape[1]
        n = gvals.shape[0]
        out = np.zeros(m)
        for b in range(deg):
            for j in range(m):
                if periodic:
                    pos = (pre[b, j] % 1.0) * n
                    i0 = int(np.floor(pos)) % n
                    t = pos - np.floor(pos)
                    i1 = (i0 + 1) % n
                else:
                    p = pre[b, j]
                    if p < 0.0:
                        p = 0.0
                    elif p > 1.0:
                        p = 1.0
                    pos = p * (n - 1)
                    i0 = int(np.floor(pos))
                    if i0 > n - 2:
                        i0 = n - 2
                    t = pos - i0
                    i1 = i0 + 1
                out[j] += w[b, j] * (gvals[i0] * (1.0 - t) + gvals[i1] * t)
        return out

    @njit(cache=True)
    def _adjoint_apply_nb(rho, pre, w, periodic):
        deg = pre.shape[0]
        n = rho.shape[0]
        out = np.zeros(n)
        for b in range(deg):
            for j in range(n):
                mass = rho[j] * w[b, j]
                if periodic:
                    pos = (pre[b, j] % 1.0) * n
                    i0 = int(np.floor(pos)) % n
                    t = pos - np.floor(pos)
                    i1 = (i0 + 1) % n
                else:
                    p = pre[b, j]
                    if p < 0.0:
                        p = 0.0
                    elif p > 1.0:
                        p = 1.0
                    pos = p * (n - 1)
                    i0 = int(np.floor(pos))
                    if i0 > n - 2:
                        i0 = n - 2
                    t = pos - i0
                    i1 = i0 + 1
                out[i0] += mass * (1.0 - t)
                out[i1] += mass * t
        return out

    @njit(cache=True)
    def _greedy_separated_nb(orbits, order, eps, circle):
        m = orbits.shape[0]
        length = orbits.shape[1]
        keep = np.zeros(m, dtype=np.bool_)
        kept = np.empty(m, dtype=np.int64)
        nkept = 0
        for ii in range(order.shape[0]):
            idx = order[ii]
            y0 = orbits[idx, 0]
            ok = True
            for kk in range(nkept):
                k = kept[kk]
                d0 = abs(y0 - orbits[k, 0])
                if circle and 1.0 - d0 < d0:
                    d0 = 1.0 - d0
                if d0 >= eps:
                    continue
                dmax = 0.0
                for j in range(length):
                    d = abs(orbits[idx, j] - orbits[k, j])
                    if circle and 1.0 - d < d:
                        d = 1.0 - d
                    if d > dmax:
                        dmax = d
                if dmax < eps:
                    ok = False
                    break
            if ok:
                keep[idx] = True
                kept[nkept] = idx
                nkept += 1
        return keep


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def lininterp(values, pts, periodic):
    pts = np.atleast_1d(np.asarray(pts, dtype=np.float64))
    if PURE_NUMPY:
        return _lininterp_np(values, pts, periodic)
    return _lininterp_nb(np.ascontiguousarray(values, dtype=np.float64), pts, periodic)


def mp_left_inverse(targets, beta):
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if PURE_NUMPY:
        return _mp_left_inverse_np(targets, float(beta))
    return _mp_left_inverse_nb(targets, float(beta))


def transfer_apply(gvals, pre, w, periodic):
    if PURE_NUMPY:
        return _transfer_apply_np(gvals, pre, w, periodic)
    return _transfer_apply_nb(
        np.ascontiguousarray(gvals, dtype=np.float64),
        np.ascontiguousarray(pre), np.ascontiguousarray(w), periodic)


def adjoint_apply(rho, pre, w, periodic):
    if PURE_NUMPY:
        return _adjoint_apply_np(rho, pre, w, periodic)
    return _adjoint_apply_nb(
        np.ascontiguousarray(rho, dtype=np.float64),
        np.ascontiguousarray(pre), np.ascontiguousarray(w), periodic)


def greedy_separated(orbits, order, eps, circle):
    orbits = np.ascontiguousarray(orbits, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    if PURE_NUMPY:
        return _greedy_separated_np(orbits, order, float(eps), circle)
    return _greedy_separated_nb(orbits, order, float(eps), circle)
