"""Grid-sampled positive observables, Birkhoff cones, and the cone-aperture
recursion.

A GridFunction stores node values on a uniform grid (periodic on the circle,
clamped on the interval) and evaluates by linear interpolation.  Cones are
the families  Lambda_a = { g > 0 : ||Dg||_inf <= a inf g }  with the
derivative norm replaced by the maximal one-sided grid slope, which is exact
for the stored piecewise-linear representative.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BurnInError, ConfigError, DomainError
from .fiber_system import branch_data, potential_stats


@dataclass(frozen=True)
class GridFunction:
    values: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 3:
            raise ConfigError("GridFunction needs a 1-d array with N >= 3")
        if self.boundary not in ("periodic", "clamped"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.size

    def nodes(self):
        if self.boundary == "periodic":
            return np.arange(self.n) / self.n
        return np.arange(self.n) / (self.n - 1)

    def __call__(self, x):
        return kernels.lininterp(self.values, x, self.boundary == "periodic")

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


def constant_function(n, value=1.0, boundary="periodic"):
    return GridFunction(np.full(n, float(value)), boundary)


def lebesgue_mean(g):
    """Integral of g against Lebesgue on [0,1] (exact for the PL representative)."""
    if g.boundary == "periodic":
        return float(g.values.mean())
    return float(np.dot(quadrature_weights(g.n, "clamped"), g.values))


def quadrature_weights(n, boundary):
    """Node weights w with sum 1 representing Lebesgue on the grid."""
    if boundary == "periodic":
        return np.full(n, 1.0 / n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def node_cell_mass(weights, boundary, lo, hi):
    """Mass of the interval [lo, hi] under node masses `weights`.

    Node j owns the cell of width h centered at its node (half cells at
    interval endpoints); partial overlaps count fractionally.  Lifted
    endpoints (lo < 0 or hi > 1) are reduced mod 1 on the circle.
    """
    weights = np.asarray(weights, dtype=float)
    if hi <= lo:
        return 0.0
    return _cell_mass_impl(weights, boundary, lo, hi)


def cell_overlaps(n, boundary, lo, hi):
    """Per-node fraction of each node cell covered by [lo, hi] (in [0,1])."""
    if hi <= lo:
        return np.zeros(n)
    if boundary == "periodic":
        h = 1.0 / n
        width = hi - lo
        if width >= 1.0:
            return np.ones(n)
        lo = lo % 1.0
        hi = lo + width
        centers = np.arange(n) / n
        frac = np.zeros(n)
        for shift in (-1.0, 0.0, 1.0):
            cl = centers + shift - 0.5 * h
            cr = centers + shift + 0.5 * h
            frac += np.clip(np.minimum(cr, hi) - np.maximum(cl, lo), 0.0, None) / h
        return np.minimum(frac, 1.0)
    h = 1.0 / (n - 1)
    lo = max(lo, 0.0)
    hi = min(hi, 1.0)
    if hi <= lo:
        return np.zeros(n)
    centers = np.arange(n) * h
    cl = np.maximum(centers - 0.5 * h, 0.0)
    cr = np.minimum(centers + 0.5 * h, 1.0)
    ov = np.clip(np.minimum(cr, hi) - np.maximum(cl, lo), 0.0, None)
    return ov / (cr - cl)


def _cell_mass_impl(weights, boundary, lo, hi):
    return float(np.dot(weights, cell_overlaps(weights.size, boundary, lo, hi)))


# ---------------------------------------------------------------------------
# cone geometry
# ---------------------------------------------------------------------------

def deriv_bound(g):
    """Max one-sided grid slope; exact ||Dg||_inf of the PL representative."""
    v = g.values
    if g.boundary == "periodic":
        d = np.diff(np.append(v, v[0])) * g.n
    else:
        d = np.diff(v) * (g.n - 1)
    return float(np.abs(d).max())


def cone_member(g, a):
    """g in Lambda_a:  g > 0 and ||Dg||_inf <= a inf g."""
    m = g.min()
    if m <= 0.0:
        return False
    return deriv_bound(g) <= a * m


def projective_distance(g1, g2):
    """Metric of the positive cone: log( sup(g1/g2) * sup(g2/g1) )."""
    if g1.min() <= 0.0 or g2.min() <= 0.0:
        raise DomainError("projective distance needs strictly positive inputs")
    r = g1.values / g2.values
    return float(np.log(r.max() / r.min()))


def cone_diameter_bound(lam, kappa, diam):
    """Diameter bound of Lambda_{lam*kappa} inside Lambda_kappa:
    2 log((1+lam)/(1-lam)) + 2 log(1 + lam*kappa*diam)."""
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lam must be in (0,1), got {lam}")
    return 2.0 * math.log((1.0 + lam) / (1.0 - lam)) + 2.0 * math.log1p(lam * kappa * diam)


def _cone_member_values(v, a):
    m = v.min()
    if m <= 0.0:
        return False
    n = v.size
    d = np.abs(np.diff(v)).max() * (n - 1)
    return d <= a * m + 1e-14


def cone_metric(g1, g2, a, tol=1e-10):
    """Projective metric of the cone Lambda_a itself, by bisection.

    Theta(v,w) = log(B/A) with A = sup{r : w - r v in Lambda_a} and
    B = inf{r : r v - w in Lambda_a}; the feasible r-sets are intervals
    because the cone is convex.  Used for the composition-operator fibers
    where the plain positive-cone metric shows no strict contraction.
    """
    v, w = g1.values, g2.values
    if g1.min() <= 0 or g2.min() <= 0:
        raise DomainError("cone metric needs strictly positive inputs")

    def member(h):
        return _cone_member_values(h, a)

    if not (member(v) and member(w)):
        raise DomainError("cone metric arguments must lie in Lambda_a")

    # A: bisect on [0, min(w/v)]
    hi = float((w / v).min())
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if member(w - mid * v):
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    A = lo
    # B: bisect downward from a feasible r
    lo = float((w / v).max())
    hi = lo
    for _ in range(200):
        if member(hi * v - w):
            break
        hi *= 2.0
    else:
        raise DomainError("cone metric upper bracket not found")
    lo_b, hi_b = lo, hi
    for _ in range(200):
        mid = 0.5 * (lo_b + hi_b)
        if member(mid * v - w):
            hi_b = mid
        else:
            lo_b = mid
        if hi_b - lo_b < tol * max(1.0, hi_b):
            break
    B = hi_b
    if A <= 0.0:
        return math.inf
    return math.log(B / A)


def random_cone_element(n, a, rng, boundary="periodic", modes=6, margin=0.9):
    """A random trigonometric element of Lambda_a with derivative margin."""
    x = np.arange(n) / n if boundary == "periodic" else np.arange(n) / (n - 1)
    p = np.zeros(n)
    for m in range(1, modes + 1):
        amp = rng.standard_normal() / m
        phase = rng.random() * 2.0 * math.pi
        p += amp * np.cos(2.0 * math.pi * m * x + phase)
    d = deriv_bound(GridFunction(p + 2.0 * abs(p).max() + 1.0, boundary))
    if d == 0.0:
        return constant_function(n, 1.0, boundary)
    t = margin * a / (d + margin * a * (np.abs(p).max() + 1e-12))
    g = GridFunction(1.0 + t * p, boundary)
    assert cone_member(g, a)
    return g


# ---------------------------------------------------------------------------
# cone-aperture recursion
# ---------------------------------------------------------------------------

@dataclass
class ConeParams:
    """alpha, beta, kappa along theta^j omega for j = 0..n (kappa obeys
    kappa(theta w) = alpha(w) kappa(w) + beta(w) + 1)."""

    alpha: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray
    warmup: int = 0
    seed_gap: float = 0.0
    log_alpha_mean: float = field(default=0.0)

    def residual(self):
        """Max violation of kappa[j+1] = alpha[j] kappa[j] + beta[j] + 1."""
        r = self.kappa[1:] - (self.alpha * self.kappa[:-1] + self.beta + 1.0)
        return float(np.abs(r).max()) if r.size else 0.0


def cone_alpha_beta(model, potential, omega):
    """The per-fiber cone transfer coefficients

    alpha = e^{osc phi} (sigma^{-1} p + L q)/deg (1 + ||Dphi|| diam),
    beta  = e^{osc phi} (sigma^{-1} p + L q)/deg ||Dphi||,  diam = 1.
    """
    bd = branch_data(model, omega)
    hi, lo, dnorm = potential_stats(potential, omega)
    mix = ((bd.sigma ** -1.0 if bd.p else 0.0) * bd.p + bd.L * bd.q) / bd.deg
    osc = math.exp(hi - lo)
    return osc * mix * (1.0 + dnorm), osc * mix * dnorm


def kappa_along_orbit(model, potential, omega, warmup, length,
                      seeds=(1.0, 10.0), tol=1e-8):
    """kappa over the window [0, length] by forward iteration from theta^{-warmup}.

    Two warm-up seeds must agree at index 0 within tol, certifying that the
    seed is forgotten; otherwise a BurnInError with a suggested warmup is
    raised.  The contraction requirement (mean log alpha < 0 along the
    traversed orbit) is also checked.
    """
    js = range(-warmup, length)
    ab = [cone_alpha_beta(model, potential, omega.advance(j)) for j in js]
    alphas = np.array([t[0] for t in ab])
    betas = np.array([t[1] for t in ab])
    la_mean = float(np.mean(np.log(alphas)))
    if la_mean >= 0.0:
        raise DomainError(
            f"mean log alpha = {la_mean:.6g} >= 0: cone recursion does not contract")

    def run(seed):
        k = float(seed)
        kappas = []
        for idx, j in enumerate(js):
            if j >= 0:
                kappas.append(k)
            k = alphas[idx] * k + betas[idx] + 1.0
        kappas.append(k)  # index `length`
        return np.array(kappas)

    k1 = run(seeds[0])
    k2 = run(seeds[1])
    gap = abs(k1[0] - k2[0])
    if gap > tol:
        need = warmup * 2
        raise BurnInError(
            f"warm-up seeds differ by {gap:.3g} > {tol:g} at index 0; "
            f"suggest warmup >= {need}", suggested=need)
    return ConeParams(alpha=alphas[warmup:], beta=betas[warmup:], kappa=k1,
                      warmup=warmup, seed_gap=gap, log_alpha_mean=la_mean)
