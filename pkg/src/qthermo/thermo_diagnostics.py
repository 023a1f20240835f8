"""Weak-Gibbs verification, pressure estimators, correlation decay, exact
cylinder counting, and the hyperbolicity thresholds.

Dynamic balls are computed as nested branch pullbacks along the orbit; the
convention here constrains all time indices 0..n inclusive, so the n-ball of
the doubling map has radius eps 2^{-n}.  The nu-mass of a deep ball is far
below grid resolution, so it is evaluated by conformal transport: the ball
is pushed to time n where its image is the plain eps-ball, the potential sum
is recomputed along the pulled-back inverse orbit of each covered node, and
the mass is divided by the lambda product.  At small n this agrees with
direct quadrature of the nu weights (cross-checked in the tests).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp
from scipy.stats import t as student_t

from . import kernels
from .errors import ConfigError, DomainError, InsufficientDataError
from .fiber_system import (branch_cuts, branch_data, branch_image_seam,
                           branch_invert, branch_of, branch_preimages, degree,
                           derivative, eval_forward, potential_stats,
                           potential_value)
from .function_space import cell_overlaps
from .hyperbolicity import expansion_sequence, hyperbolic_times


def _lift(v, c):
    """Representative of v (mod 1) nearest to c."""
    return v + np.round(c - v)


# ---------------------------------------------------------------------------
# dynamic balls
# ---------------------------------------------------------------------------

@dataclass
class DynamicBall:
    """Connected component through x of {y : |f^j y - f^j x| < eps_j, j<=n}.

    offsets[j] = (dlo_j, dhi_j) is the time-j image of the ball relative to
    the orbit point (kept separate from the absolute coordinate so that
    widths far below one ulp of the position stay representable at deep n);
    intervals[j] is the absolute version, and `truncated` flags a clip at a
    branch discontinuity.
    """

    x: float
    n: int
    lo: float
    hi: float
    intervals: list
    offsets: list
    branches: list
    orbit: np.ndarray
    truncated: bool = False

    @property
    def end(self):
        return self.intervals[-1]

    @property
    def end_offsets(self):
        return self.offsets[-1]


def _eps_at(eps, j):
    if np.isscalar(eps):
        return float(eps)
    return float(eps[j])


# Offsets below this are propagated by the linearized derivative; above it,
# by exact branch evaluation/inversion in lifted coordinates.  Both routes
# carry ~1e-8 relative offset error at the crossover.
_LIN_THRESHOLD = 1e-8


def _pull_offsets(model, w, branch, x_j, x_j1, deltas, circle):
    """Offsets around x_{j+1} pulled back to offsets around x_j."""
    deltas = np.asarray(deltas, dtype=float)
    out = np.empty_like(deltas)
    small = np.abs(deltas) < _LIN_THRESHOLD
    dfx = float(derivative(model, w, x_j))
    out[small] = deltas[small] / dfx
    big = ~small
    if np.any(big):
        v = x_j1 + deltas[big]
        v = v % 1.0 if circle else np.clip(v, 0.0, 1.0)
        z = branch_invert(model, w, branch, v)
        if circle:
            z = _lift(z, x_j)
        out[big] = z - x_j
    return out


def _push_offsets(model, w, x_j, x_j1, deltas, circle):
    """Offsets around x_j pushed forward to offsets around x_{j+1}."""
    deltas = np.asarray(deltas, dtype=float)
    out = np.empty_like(deltas)
    small = np.abs(deltas) < _LIN_THRESHOLD
    dfx = float(derivative(model, w, x_j))
    out[small] = deltas[small] * dfx
    big = ~small
    if np.any(big):
        v = x_j + deltas[big]
        v = v % 1.0 if circle else np.clip(v, 0.0, 1.0)
        img = eval_forward(model, w, v)
        if circle:
            img = _lift(img, x_j1)
        out[big] = img - x_j1
    return out


def dynamic_ball(model, omega, x, n, eps):
    """Dynamic ball at (omega, x) over time indices 0..n (inclusive)."""
    orbit = np.empty(n + 1)
    branches = []
    xx = float(x)
    for j in range(n + 1):
        orbit[j] = xx
        if j < n:
            w = omega.advance(j)
            branches.append(branch_of(model, w, xx))
            xx = float(eval_forward(model, w, xx))
    circle = model.periodic

    def phase_clip(dlo, dhi, j):
        if circle:
            return dlo, dhi
        return max(dlo, -orbit[j]), min(dhi, 1.0 - orbit[j])

    e = _eps_at(eps, n)
    dlo, dhi = phase_clip(-e, e, n)
    offs = [(dlo, dhi)]
    truncated = False
    for j in range(n - 1, -1, -1):
        w = omega.advance(j)
        nxt_lo, nxt_hi = offs[0]
        e = _eps_at(eps, j)
        clipped = False
        if circle:
            # the branch maps its domain onto the arc starting at the image
            # seam; a target interval crossing the seam pulls back to two
            # pieces, and we keep the one through the orbit point
            seam = branch_image_seam(model, w, branches[j])
            c = (orbit[j + 1] - seam) % 1.0
            cl = max(nxt_lo, -c + 1e-14)
            ch = min(nxt_hi, (1.0 - c) - 1e-14)
        else:
            b = branches[j]
            cuts = branch_cuts(model, w)
            d_lo = cuts[b]
            d_hi = cuts[b + 1] if b + 1 < cuts.size else 1.0
            img_lo = float(eval_forward(model, w, d_lo + 1e-15))
            img_hi = float(eval_forward(model, w, d_hi - 1e-15))
            img_lo, img_hi = min(img_lo, img_hi), max(img_lo, img_hi)
            cl = max(nxt_lo, img_lo - orbit[j + 1])
            ch = min(nxt_hi, img_hi - orbit[j + 1])
        clipped = (cl - nxt_lo > 1e-12) or (nxt_hi - ch > 1e-12)
        pulled = _pull_offsets(model, w, branches[j], orbit[j], orbit[j + 1],
                               np.array([cl, ch]), circle)
        p_lo, p_hi = float(pulled.min()), float(pulled.max())
        dlo = max(p_lo, -e)
        dhi = min(p_hi, e)
        dlo, dhi = phase_clip(dlo, dhi, j)
        if clipped and (dlo == p_lo or dhi == p_hi):
            # the seam/image constraint binds: a genuine disconnection,
            # not just the eps tube
            truncated = True
        offs.insert(0, (dlo, dhi))
    # forward pass: actual images f^j(B) as offsets (stable at any depth)
    klo, khi = offs[0]
    offsets = [(klo, khi)]
    for j in range(n):
        w = omega.advance(j)
        pushed = _push_offsets(model, w, orbit[j], orbit[j + 1],
                               np.array([klo, khi]), circle)
        klo = max(float(pushed.min()), offs[j + 1][0])
        khi = min(float(pushed.max()), offs[j + 1][1])
        offsets.append((klo, khi))
    intervals = [(orbit[j] + d[0], orbit[j] + d[1])
                 for j, d in enumerate(offsets)]
    lo0, hi0 = intervals[0]
    return DynamicBall(x=float(x), n=n, lo=lo0, hi=hi0, intervals=intervals,
                       offsets=offsets, branches=branches, orbit=orbit,
                       truncated=truncated)


# ---------------------------------------------------------------------------
# weak Gibbs ratios
# ---------------------------------------------------------------------------

@dataclass
class GibbsPoint:
    n: int
    log_nu_ball: float
    log_gibbs_sum: float
    d: float


def _ball_mass_transport(triple, model, potential, omega, ball):
    """log nu_omega(ball) by conformal transport to the time-n fiber.

    nu_omega(B) = Lambda_n^{-1} * int_{f^n B} e^{S_n phi(z(y))} d nu_n(y)
    with z(y) the branch-chain preimage of y; exact for the conformal family
    and resolvable on the grid because f^n B has radius ~ eps.
    """
    n = ball.n
    end_lo, end_hi = ball.end
    grid = triple.grid
    circle = triple.boundary == "periodic"
    frac = cell_overlaps(grid, triple.boundary, end_lo, end_hi)
    idx = np.nonzero(frac > 0.0)[0]
    if idx.size == 0:
        return -math.inf
    masses = triple.nus[n][idx] * frac[idx]
    nodes = (idx / grid) if circle else (idx / (grid - 1))
    if circle:
        nodes = _lift(nodes, 0.5 * (end_lo + end_hi))
    # pull node offsets back through the branch chain; evaluating phi at the
    # (possibly collapsed) absolute position loses nothing at double precision
    deltas = nodes - ball.orbit[n]
    s = np.zeros_like(deltas)
    for j in range(n - 1, -1, -1):
        w = omega.advance(j)
        deltas = _pull_offsets(model, w, ball.branches[j], ball.orbit[j],
                               ball.orbit[j + 1], deltas, circle)
        s += potential_value(potential, w, ball.orbit[j] + deltas)
    keep = masses > 0.0
    log_int = logsumexp(s[keep] + np.log(masses[keep]))
    return float(log_int - triple.log_lambda_sum(n))


def weak_gibbs_ratio(triple, model, potential, omega, x, n, eps, gamma=None,
                     mass_method="transport", check_hyperbolic=True):
    """d = log nu(B(x,n,eps)) - sum_{j<n}(phi(F^j(omega,x)) - log lambda_j).

    n must be a detected gamma-hyperbolic time of the orbit when
    check_hyperbolic is set (gamma required in that case).
    """
    if n > triple.window:
        raise DomainError("triple window does not cover [0, n]")
    if check_hyperbolic:
        if gamma is None:
            raise DomainError("gamma is required to certify the hyperbolic time")
        rec = expansion_sequence(model, omega, x, n)
        if n not in hyperbolic_times(rec, gamma, check=False):
            raise DomainError(f"n = {n} is not a detected {gamma}-hyperbolic time")
    ball = dynamic_ball(model, omega, x, n, eps)
    if n == 0:
        log_mass = math.log(triple.nu_mass(0, ball.lo, ball.hi))
        return GibbsPoint(n=0, log_nu_ball=log_mass, log_gibbs_sum=0.0, d=log_mass)
    gibbs = 0.0
    for j in range(n):
        w = omega.advance(j)
        gibbs += float(potential_value(potential, w, np.array([ball.orbit[j]]))[0])
    gibbs -= triple.log_lambda_sum(n)
    if mass_method == "transport":
        log_mass = _ball_mass_transport(triple, model, potential, omega, ball)
    elif mass_method == "quadrature":
        m = triple.nu_mass(0, ball.lo, ball.hi)
        log_mass = math.log(m) if m > 0 else -math.inf
    else:
        raise ConfigError(f"unknown mass_method {mass_method!r}")
    return GibbsPoint(n=n, log_nu_ball=log_mass, log_gibbs_sum=gibbs,
                      d=log_mass - gibbs)


@dataclass
class GibbsReport:
    points: list  # GibbsPoint, n strictly increasing

    def rows(self):
        return [(p.n, p.log_nu_ball, p.log_gibbs_sum, p.d) for p in self.points]

    def envelope(self):
        """max |d_k|/n_k over the recorded hyperbolic times."""
        vals = [abs(p.d) / p.n for p in self.points if p.n > 0]
        return max(vals) if vals else math.nan


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def correlation(triple, model, potential, obs_left, obs_right, n):
    """C(n) via the transfer-operator identity

    | int obs_left * Lambda_n^{-1} L^n(obs_right h_0) / h_n d mu_n
      - int obs_left d mu_n * int obs_right d mu_0 |.
    """
    if n > triple.window:
        raise DomainError("triple window does not cover [0, n]")
    g = obs_right.values * triple.hs[0].values
    for j in range(n):
        g = triple.op(j).apply(g) / triple.lam[j]
    lhs = float(np.dot(triple.mus[n], obs_left.values * g / triple.hs[n].values))
    centered = float(np.dot(triple.mus[n], obs_left.values)) * \
        float(np.dot(triple.mus[0], obs_right.values))
    return abs(lhs - centered)


def correlation_direct(triple, model, obs_left, obs_right, n):
    """C(n) by direct quadrature of int (obs_left o f^n) obs_right d mu_0."""
    nodes = triple.hs[0].nodes()
    xs = nodes.copy()
    for j in range(n):
        xs = eval_forward(model, triple.fiber(j), xs)
    lhs = float(np.dot(triple.mus[0], obs_left(xs) * obs_right.values))
    centered = float(np.dot(triple.mus[n], obs_left.values)) * \
        float(np.dot(triple.mus[0], obs_right.values))
    return abs(lhs - centered)


@dataclass
class DecayFit:
    tau: float
    tau_lo: float
    tau_hi: float
    slope: float
    stderr: float
    n_used: int


def fit_decay_rate(values, floor=1e-13, confidence=0.95):
    """Least-squares exponential rate of C(n), n = 1..len(values).

    Entries at or below the numerical floor are excluded; at least 5 usable
    points are required.  Returns tau = e^{slope} with a t-based confidence
    band on the slope.
    """
    values = np.asarray(values, dtype=float)
    ns = np.arange(1, values.size + 1, dtype=float)
    mask = values > floor
    if int(mask.sum()) < 5:
        raise InsufficientDataError(
            f"only {int(mask.sum())} usable correlation values above {floor:g}")
    x = ns[mask]
    y = np.log(values[mask])
    m = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    resid = y - (ybar + slope * (x - xbar))
    if m > 2:
        se = math.sqrt(float(np.sum(resid ** 2)) / (m - 2) / sxx)
        tq = float(student_t.ppf(0.5 + confidence / 2.0, m - 2))
    else:
        se, tq = 0.0, 0.0
    return DecayFit(tau=math.exp(slope),
                    tau_lo=math.exp(slope - tq * se),
                    tau_hi=math.exp(slope + tq * se),
                    slope=slope, stderr=se, n_used=m)


# ---------------------------------------------------------------------------
# pressure estimators
# ---------------------------------------------------------------------------

def preimage_tree(model, potential, omega, n, anchor=0.5, max_leaves=200000):
    """Leaves of the n-step inverse-branch tree of `anchor`, with forward
    orbits (ancestor chains) and Birkhoff potential sums S_n phi."""
    levels = [np.array([anchor])]
    parents = []
    sums = [np.zeros(1)]
    for d in range(1, n + 1):
        w = omega.advance(n - d)
        pts = levels[-1]
        pre, _ = branch_preimages(model, w, pts)
        deg = pre.shape[0]
        if pre.size > max_leaves:
            raise ConfigError("preimage tree exceeds the size cap")
        flat = pre.reshape(-1)
        par = np.tile(np.arange(pts.size), deg)
        s = sums[-1][par] + potential_value(potential, w, flat)
        levels.append(flat)
        parents.append(par)
        sums.append(s)
    leaves = levels[-1]
    m = leaves.size
    orbits = np.empty((m, n + 1))
    orbits[:, 0] = leaves
    idx = np.arange(m)
    for j in range(1, n + 1):
        idx = parents[n - j][idx]
        orbits[:, j] = levels[n - j][idx]
    return orbits, sums[-1]


def pressure_separated(model, potential, omega, n, eps, candidates=None):
    """(1/n) log of the greedy max weighted (omega,n,eps)-separated set.

    Default candidates: the full n-step preimage tree of 0.5 supplemented by
    a uniform grid at spacing eps/4 (density requirement), orbits included.
    The greedy keeps candidates in descending e^{S_n phi} order, so the value
    is a certified lower bound for pi_phi(omega, n, eps).
    """
    if candidates is None:
        orbits, sums = preimage_tree(model, potential, omega, n)
        extra = np.arange(math.ceil(4.0 / eps)) * (eps / 4.0)
        extra = extra[extra < 1.0]
        eorb = np.empty((extra.size, n + 1))
        eorb[:, 0] = extra
        xs = extra.copy()
        esum = np.zeros(extra.size)
        for j in range(n):
            w = omega.advance(j)
            esum += potential_value(potential, w, xs)
            xs = eval_forward(model, w, xs)
            eorb[:, j + 1] = xs
        orbits = np.vstack([orbits, eorb])
        sums = np.concatenate([sums, esum])
    else:
        xs = np.asarray(candidates, dtype=float)
        orbits = np.empty((xs.size, n + 1))
        orbits[:, 0] = xs
        sums = np.zeros(xs.size)
        for j in range(n):
            w = omega.advance(j)
            sums += potential_value(potential, w, xs)
            xs = eval_forward(model, w, xs)
            orbits[:, j + 1] = xs
    order = np.argsort(-sums, kind="stable")
    keep = kernels.greedy_separated(orbits[:, :n], order, eps, model.periodic)
    if not np.any(keep):
        return -math.inf
    return float(logsumexp(sums[keep]) / n)


def pressure_from_lambda(triple):
    """(1/n) sum_{j<n} log lambda_{theta^j omega}."""
    n = triple.window
    if n < 1:
        raise DomainError("window length must be >= 1")
    return triple.log_lambda_sum(n) / n


def implied_entropy(triple, potential=None):
    """pressure_from_lambda minus the window average of int phi d mu."""
    potential = potential if potential is not None else triple.potential
    n = triple.window
    nodes = triple.hs[0].nodes()
    phi_avg = np.mean([
        float(np.dot(triple.mus[j],
                     potential_value(potential, triple.fiber(j), nodes)))
        for j in range(n)])
    return pressure_from_lambda(triple) - float(phi_avg)


def pressure_ball_cover(model, potential, omega, n, eps, max_elements=100000):
    """(1/n) log of a greedy same-length dynamic-ball cover weight.

    Covers the fiber left to right with time-n balls of radius eps; each
    ball is weighted by e^{sup S_n phi} over its three probe points.  Upper
    estimator for the compact-case relative-pressure sum.
    """
    frontier = 0.0
    total = []
    guard = 0
    while frontier < 1.0 and guard < max_elements:
        guard += 1
        probe = dynamic_ball(model, omega, min(frontier + 1e-12, 1.0 - 1e-12), n, eps)
        width = max(probe.hi - probe.lo, 1e-12)
        center = min(frontier + 0.45 * width, 1.0 - 1e-12)
        ball = dynamic_ball(model, omega, center, n, eps)
        pts = np.array([ball.lo, center, ball.hi])
        s = np.zeros(3)
        xs = pts.copy()
        for j in range(n):
            w = omega.advance(j)
            s += potential_value(potential, w, xs)
            xs = eval_forward(model, w, xs)
        total.append(float(s.max()))
        if ball.hi <= frontier + 1e-12:
            frontier += max(width * 0.5, 1e-9)
        else:
            frontier = ball.hi
    if guard >= max_elements:
        raise ConfigError("ball cover exceeded the element cap")
    return float(logsumexp(np.array(total)) / n)


@dataclass
class PressureReport:
    rows: list  # (method, n, eps, value, stderr)

    def value(self, method):
        for r in self.rows:
            if r[0] == method:
                return r[3]
        raise KeyError(method)


# ---------------------------------------------------------------------------
# cylinder counting
# ---------------------------------------------------------------------------

@dataclass
class CylinderCount:
    W: float
    rate: float
    bound_rhs: float
    bound_holds: bool
    n: int
    alpha: float
    expansion_total: float      # sum over all words of prod a*b (DP route)
    expansion_closed_form: float  # prod_i (sigma_i^{-1} p_i + L_i q_i)


def cylinder_count_dp(sigma, L, p, q, alpha, lattice=1e-6, bound_eps=0.05):
    """Weighted count of itinerary words with controlled expansion.

    W = sum over (j_0..j_{n-1}) in {0,1}^n with (1/n) sum log b(j_i) >= -alpha
    of prod a(j_i), where per fiber i: b = sigma_i^{-1}, a = p_i for j = 1 and
    b = L_i, a = q_i for j = 0.  Exact dynamic programming over the prefix
    sums of log b, discretized to the given lattice (condition evaluated with
    a one-lattice-step tolerance).  Also accumulates the unconstrained
    expansion-weighted total sum prod a*b for the closed-form identity check.
    """
    sigma = np.asarray(sigma, dtype=float)
    L = np.asarray(L, dtype=float)
    p = np.asarray(p, dtype=int)
    q = np.asarray(q, dtype=int)
    n = sigma.size
    if not (L.size == p.size == q.size == n and n >= 1):
        raise ConfigError("per-fiber arrays must share a positive length")

    states = np.zeros(1, dtype=np.int64)
    wa = np.ones(1)
    wab = np.ones(1)
    closed = 1.0
    for i in range(n):
        opts = []
        if q[i] > 0:
            opts.append((math.log(L[i]) if L[i] > 0 else -math.inf, float(q[i]), float(q[i]) * L[i]))
        if p[i] > 0:
            opts.append((-math.log(sigma[i]), float(p[i]), float(p[i]) / sigma[i]))
        if not opts:
            raise ConfigError(f"fiber {i} has no branches")
        closed *= (p[i] / sigma[i] if p[i] else 0.0) + q[i] * L[i]
        new_s, new_wa, new_wab = [], [], []
        for lb, a_w, ab_w in opts:
            step = np.int64(round(lb / lattice)) if math.isfinite(lb) else np.int64(-(10 ** 15))
            new_s.append(states + step)
            new_wa.append(wa * a_w)
            new_wab.append(wab * ab_w)
        s = np.concatenate(new_s)
        aw = np.concatenate(new_wa)
        abw = np.concatenate(new_wab)
        states, inv = np.unique(s, return_inverse=True)
        wa = np.bincount(inv, weights=aw)
        wab = np.bincount(inv, weights=abw)

    expansion_total = float(wab.sum())
    if math.isinf(alpha):
        W = float(wa.sum())
    else:
        thr = -alpha * n - 1e-9
        W = float(wa[states * lattice >= thr].sum())
    rate = math.log(W) / n if W > 0 else -math.inf
    mix = np.where(p > 0, p / sigma, 0.0) + q * L
    C = float(np.mean(np.log(mix)))
    if math.isinf(alpha):
        bound_rhs = math.inf
        holds = True
    else:
        bound_rhs = math.exp((C + alpha + bound_eps) * n)
        holds = W <= bound_rhs
    return CylinderCount(W=W, rate=rate, bound_rhs=bound_rhs, bound_holds=holds,
                         n=n, alpha=alpha, expansion_total=expansion_total,
                         expansion_closed_form=closed)


def cylinder_windows_from_model(model, omega, n):
    """(sigma, L, p, q) arrays along the theta-orbit window [0, n)."""
    sig, ll, pp, qq = [], [], [], []
    for j in range(n):
        bd = branch_data(model, omega.advance(j))
        sig.append(bd.sigma)
        ll.append(bd.L)
        pp.append(bd.p)
        qq.append(bd.q)
    return np.array(sig), np.array(ll), np.array(pp, dtype=int), np.array(qq, dtype=int)


# ---------------------------------------------------------------------------
# Theorem-D style thresholds
# ---------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    alpha: float
    T0: Optional[float]
    applicable: bool


def hyperbolic_threshold(log_deg_mean, log_mix_mean, log_L_mean, dim, oscillation):
    """alpha = (1/2)(pi_0 - int log(sigma^{-1}p+Lq) - dim * int log L) and
    T0 = oscillation / alpha; not applicable when the (H6) direction fails.

    The minus sign on the log L term is forced by (H6); zero oscillation
    gives T0 = 0 (every rescaling hyperbolic).
    """
    alpha = 0.5 * (log_deg_mean - log_mix_mean - dim * log_L_mean)
    if alpha <= 0.0:
        return ThresholdReport(alpha=alpha, T0=None, applicable=False)
    return ThresholdReport(alpha=alpha, T0=oscillation / alpha, applicable=True)


def hyperbolic_threshold_for(model, potential, ensemble):
    """Ensemble plug-in of hyperbolic_threshold for a built-in model."""
    from .base_driver import ensemble_average

    def mix_field(w):
        bd = branch_data(model, w)
        return math.log((bd.sigma ** -1.0 if bd.p else 0.0) * bd.p + bd.L * bd.q)

    logdeg, _ = ensemble_average(ensemble, lambda w: math.log(degree(model, w)))
    logmix, _ = ensemble_average(ensemble, mix_field)
    logl, _ = ensemble_average(ensemble, lambda w: math.log(branch_data(model, w).L))
    osc, _ = ensemble_average(
        ensemble, lambda w: potential_stats(potential, w)[0] - potential_stats(potential, w)[1])
    return hyperbolic_threshold(logdeg, logmix, logl, model.dim, osc)
