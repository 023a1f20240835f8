"""Expansion sequences along random orbits, Pliss-time extraction, and
hyperbolic-time detection.

One-dimensional specialization: ||Df^{-1}||^{-1} = |f'|, so the expansion
sequence is a_j = log|f'_{theta^j omega}(x_j)| along the orbit x_j.  An
index n >= 1 is a gamma-hyperbolic time when every suffix ending at n has
average at least gamma:

    sum_{j=n-k+1}^{n} a_j >= gamma k   for all 1 <= k <= n,

which is exactly the Pliss-time condition for the sequence (a_1, ..., a_N).
Both the O(n) running-maximum scan and the O(n^2) direct suffix check are
run and must agree (knife-edge ties are absorbed by a 1e-10 log-scale slack).
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, NumericalError
from .fiber_system import derivative, eval_forward

_TIE_TOL = 1e-10


@dataclass
class OrbitRecord:
    omega: object
    x0: float
    orbit: np.ndarray          # x_j = f^j_omega(x_0), j = 0..n
    a: np.ndarray              # log|f'_{theta^j omega}(x_j)|, j = 0..n
    times: np.ndarray          # detected hyperbolic times (sorted, in [1, n])
    gamma: Optional[float] = None

    @property
    def length(self):
        return self.orbit.size - 1


def expansion_sequence(model, omega, x0, n):
    """Orbit and expansion sequence over the window [0, n]; times left empty."""
    xs = np.empty(n + 1)
    av = np.empty(n + 1)
    x = float(x0)
    for j in range(n + 1):
        w = omega.advance(j)
        xs[j] = x
        av[j] = np.log(derivative(model, w, x))
        if j < n:
            x = float(eval_forward(model, w, x))
    return OrbitRecord(omega=omega, x0=float(x0), orbit=xs, a=av,
                       times=np.empty(0, dtype=int))


def pliss_times(a, c1, c2, A):
    """Indices n_i with sum_{j=n+1}^{n_i} a_j >= c1 (n_i - n) for all n < n_i.

    Requires A >= c2 > c1 > 0 and a_i <= A.  Returns (indices, xi) with the
    guaranteed density xi = (c2 - c1)/(A - c1): whenever the full average
    clears c2 there are at least xi*N such indices.  (The detection threshold
    is the smaller constant c1; detecting at c2 admits sequences with a
    single qualifying index, so no density bound could hold there.)
    """
    a = np.asarray(a, dtype=float)
    if not (A >= c2 > c1 > 0):
        raise DomainError("need A >= c2 > c1 > 0")
    if np.any(a > A + 1e-12):
        raise DomainError("sequence exceeds the cap A")
    idx = _times_scan(a, c1)
    xi = (c2 - c1) / (A - c1)
    return idx, xi


def _times_scan(seq, gamma):
    t = np.concatenate([[0.0], np.cumsum(seq)]) - gamma * np.arange(seq.size + 1)
    runmax = np.maximum.accumulate(t)
    return np.nonzero(t[1:] >= runmax[:-1] - _TIE_TOL)[0] + 1


def _times_direct(seq, gamma):
    s = np.concatenate([[0.0], np.cumsum(seq)])
    out = []
    for n in range(1, seq.size + 1):
        ks = np.arange(1, n + 1)
        if np.all(s[n] - s[n - ks] >= gamma * ks - _TIE_TOL):
            out.append(n)
    return np.asarray(out, dtype=int)


def hyperbolic_times(record, gamma, check=True):
    """All gamma-hyperbolic times in [1, n] of the record's orbit.

    The O(n) scan is the result; with check=True the O(n^2) suffix-sum
    reference is recomputed and compared.
    """
    if gamma <= 0.0:
        raise DomainError("gamma must be positive")
    seq = record.a[1:]
    times = _times_scan(seq, gamma)
    if check:
        ref = _times_direct(seq, gamma)
        if times.size != ref.size or np.any(times != ref):
            raise NumericalError("Pliss scan disagrees with the direct check")
    return times


def with_times(record, gamma, check=True):
    """A copy of the record with gamma-hyperbolic times filled in."""
    times = hyperbolic_times(record, gamma, check=check)
    return replace(record, times=times, gamma=gamma)


def ht_density(times, n):
    """Fraction of [1, n] detected as hyperbolic."""
    times = np.asarray(times, dtype=int)
    if times.size and (times.min() < 1 or times.max() > n):
        raise DomainError("times outside [1, n]")
    return times.size / n


def sample_from_weights(weights, boundary, count, rng):
    """Inverse-CDF sampling of points from grid node masses."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    cum = np.cumsum(w)
    cum = cum / cum[-1]
    u = rng.random(count)
    idx = np.searchsorted(cum, u, side="left")
    prev = np.where(idx > 0, cum[idx - 1], 0.0)
    frac = (u - prev) / np.maximum(cum[idx] - prev, 1e-300)
    if boundary == "periodic":
        h = 1.0 / n
        x = idx * h + (frac - 0.5) * h
        return x % 1.0
    h = 1.0 / (n - 1)
    x = idx * h + (frac - 0.5) * h
    return np.clip(x, 0.0, 1.0)


def empirical_exceptional_mass(triple, model, alpha, n, sample_size, seed=0):
    """nu_omega-mass of the time-n exceptional set
    { x : (1/n) sum_{j<n} log|f'(x_j)| <= alpha }, by Monte Carlo."""
    if n > triple.window:
        raise DomainError("triple window does not cover [0, n]")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    xs = sample_from_weights(triple.nus[0], triple.boundary, sample_size, rng)
    acc = np.zeros(sample_size)
    for j in range(n):
        w = triple.fiber(j)
        acc += np.log(derivative(model, w, xs))
        xs = eval_forward(model, w, xs)
    mass = float(np.mean(acc / n <= alpha))
    stderr = float(np.sqrt(mass * (1.0 - mass) / sample_size))
    return mass, stderr
