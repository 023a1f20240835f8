"""Ergodic invertible base systems: irrational circle rotations and
two-sided Bernoulli shifts.

A sample of the base carries a materialized orbit window so that every
quenched quantity indexed by theta^k(omega) is reproducible and cheap to
evaluate.  Randomness comes from a counter-based Philox stream keyed by the
master seed: sample i always occupies the same stream slice, independent of
ensemble size or thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, OutOfWindowError

# fractional part of the golden ratio; default rotation angle
GOLDEN_ANGLE = 0.6180339887498949


@dataclass(frozen=True)
class BaseSystem:
    """The driving system (Omega, theta, P).

    kind is "rotation" (theta(w) = w + angle mod 1, P = Lebesgue) or
    "bernoulli" (two-sided shift with i.i.d. symbol marginals `probs`).
    Countable alphabets are truncated: the tail mass beyond the truncation
    index is folded into the last retained symbol.
    """

    kind: str
    seed: int = 0
    angle: float = GOLDEN_ANGLE
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == "rotation":
            if not 0.0 < self.angle < 1.0:
                raise ConfigError(f"rotation angle must be in (0,1), got {self.angle}")
        elif self.kind == "bernoulli":
            p = np.asarray(self.probs, dtype=float)
            if p.size == 0 or np.any(p <= 0.0):
                raise ConfigError("bernoulli probabilities must be positive")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ConfigError(
                    f"bernoulli probabilities sum to {p.sum():.16g}, expected 1 within 1e-12")
        else:
            raise ConfigError(f"unknown base kind {self.kind!r}")

    @classmethod
    def rotation(cls, angle=GOLDEN_ANGLE, seed=0):
        return cls(kind="rotation", seed=seed, angle=angle)

    @classmethod
    def bernoulli(cls, probs, seed=0):
        return cls(kind="bernoulli", seed=seed, probs=tuple(float(p) for p in probs))

    @classmethod
    def bernoulli_countable(cls, weights, truncation, seed=0):
        """Truncate a countable probability vector at `truncation` symbols.

        The tail mass is folded into the last symbol so the retained vector
        is an exact probability vector.
        """
        w = np.asarray(weights, dtype=float)
        if truncation < 1 or truncation > w.size:
            raise ConfigError("truncation index out of range")
        if np.any(w < 0.0):
            raise ConfigError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(
                f"countable probability vector sums to {total:.16g}, expected 1 within 1e-12")
        head = w[:truncation].copy()
        head[-1] += total - head.sum()
        return cls.bernoulli(head, seed=seed)

    @property
    def alphabet_size(self):
        return len(self.probs)


@dataclass(frozen=True)
class BaseSample:
    """One omega together with its reachable theta-orbit window.

    Offsets are kept relative to the original anchor: `pos` is the current
    shift, and advance(k) is defined only while -back <= pos+k <= fwd.
    Rotation state is evaluated lazily from (omega0, pos) so that
    advance(k) followed by advance(-k) is bit-identical.
    """

    system: BaseSystem
    index: int
    back: int
    fwd: int
    pos: int = 0
    omega0: float = 0.0
    symbols: tuple = ()

    @property
    def window(self):
        """Reachable shifts from the current anchor: [lo, hi]."""
        return (-self.back - self.pos, self.fwd - self.pos)

    def _check(self, k):
        lo, hi = self.window
        if not lo <= k <= hi:
            raise OutOfWindowError(
                f"shift {k} outside reachable window [{lo}, {hi}]")

    def advance(self, k):
        self._check(k)
        if k == 0:
            return self
        return replace(self, pos=self.pos + int(k))

    @property
    def state(self):
        """Current omega as a point of the base space (rotation only)."""
        if self.system.kind != "rotation":
            raise ConfigError("state is defined for rotation bases; use symbol()")
        return (self.omega0 + self.pos * self.system.angle) % 1.0

    def symbol(self, j=0):
        """Symbol at offset j from the current anchor (shift only)."""
        if self.system.kind != "bernoulli":
            raise ConfigError("symbol() is defined for bernoulli bases")
        self._check(j)
        return self.symbols[self.back + self.pos + j]

    def omega_real(self):
        """Canonical real coordinate in [0,1) used by omega-modulated data."""
        if self.system.kind == "rotation":
            return self.state
        m = self.system.alphabet_size
        return (self.symbol(0) + 0.5) / m


def advance(sample, k):
    """theta^k on a sample; k must lie inside the reachable window."""
    return sample.advance(k)


def sample_base(system, count, window=(0, 0)):
    """Draw `count` independent base samples with the given orbit window.

    window = (n_back, n_fwd) gives reachable shifts [-n_back, n_fwd].
    Deterministic: sample i occupies a fixed slice of the Philox stream
    keyed by system.seed, so results do not depend on ensemble size beyond
    i or on any threading downstream.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    back, fwd = int(window[0]), int(window[1])
    if back < 0 or fwd < 0:
        raise ConfigError("window bounds must be nonnegative")
    gen = np.random.Generator(np.random.Philox(key=np.uint64(system.seed)))
    if system.kind == "rotation":
        omegas = gen.random(count)
        return [BaseSample(system=system, index=i, back=back, fwd=fwd,
                           omega0=float(omegas[i]))
                for i in range(count)]
    width = back + fwd + 1
    p = np.asarray(system.probs)
    u = gen.random((count, width))
    cdf = np.cumsum(p)
    mat = np.searchsorted(cdf, u, side="right")
    np.minimum(mat, p.size - 1, out=mat)
    return [BaseSample(system=system, index=i, back=back, fwd=fwd,
                       symbols=tuple(int(s) for s in mat[i]))
            for i in range(count)]


def ensemble_average(samples, field, threads=1):
    """Monte-Carlo mean and standard error of a per-omega functional.

    Evaluation order over samples is fixed (index order) so the reduction is
    independent of the worker count.
    """
    if len(samples) == 0:
        raise ConfigError("ensemble is empty")
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(field, samples))
    else:
        values = [field(s) for s in samples]
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr
