"""Quenched transfer operators and the eigen-triple (lambda, h, nu).

The operator L_omega g(x) = sum_{f_omega(y)=x} e^{phi_omega(y)} g(y) is
discretized on the uniform grid: preimages of the target-fiber nodes are
computed once per fiber, applications interpolate g there, and the adjoint
deposits node masses back through the same stencil.  The triple is built by
normalized backward iteration (densities h) and adjoint pullback from a
uniform seed (conformal weights nu), chained along the window so that the
discrete eigen-identities

    L_omega h_omega = lambda_omega h_{theta omega},
    L*_omega nu_{theta omega} = lambda_omega nu_omega,
    lambda_omega = integral of L_omega 1 against nu_{theta omega}

hold exactly at the grid level; burn-in depth controls only the distance to
the continuum triple and is certified by a two-depth agreement check.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .base_driver import BaseSample
from .errors import BurnInError, DomainError, NumericalError
from .fiber_system import (branch_cuts, branch_preimages, degree, eval_forward,
                           potential_stats, potential_value)
from .function_space import (GridFunction, lebesgue_mean, node_cell_mass,
                             quadrature_weights)


class FiberOperator:
    """Discretized L_omega from the grid on X_omega to the grid on X_{theta omega}."""

    def __init__(self, model, potential, omega, n):
        self.model = model
        self.potential = potential
        self.omega = omega
        self.n = n
        self.boundary = "periodic" if model.periodic else "clamped"
        nodes = np.arange(n) / n if model.periodic else np.arange(n) / (n - 1)
        pre, invd = branch_preimages(model, omega, nodes)
        self.pre = pre
        self.invd = invd
        self.w = np.exp(potential_value(potential, omega, pre))

    def apply(self, values):
        return kernels.transfer_apply(values, self.pre, self.w, self.boundary == "periodic")

    def adjoint(self, rho):
        return kernels.adjoint_apply(rho, self.pre, self.w, self.boundary == "periodic")

    def lone(self):
        """(L_omega 1) at the target nodes."""
        return self.w.sum(axis=0)


def apply_transfer(model, potential, omega, g):
    """L_omega g as a GridFunction on the theta-omega fiber."""
    op = FiberOperator(model, potential, omega, g.n)
    if (op.boundary == "periodic") != (g.boundary == "periodic"):
        raise DomainError("grid boundary does not match the model phase space")
    out = op.apply(g.values)
    if not np.all(np.isfinite(out)):
        raise NumericalError("transfer application produced non-finite values")
    return GridFunction(out, g.boundary)


def lambda_bounds(model, potential, omega):
    """deg e^{inf phi} <= lambda_omega <= deg e^{sup phi}."""
    hi, lo, _ = potential_stats(potential, omega)
    d = degree(model, omega)
    return d * math.exp(lo), d * math.exp(hi)


def _pullback_chain(ops, n_grid, boundary):
    """Iterate g <- normalized L g along ops; return the final iterate."""
    g = np.ones(n_grid)
    for op in ops:
        g = op.apply(g)
        g = g / lebesgue_mean(GridFunction(g, boundary))
    return g


def normalized_pullback_iterate(model, potential, omega, n, grid=512):
    """h_tilde = normalized L^n applied to 1 from theta^{-n} omega, and the
    sup gap against the depth n-1 iterate (Cauchy convergence monitor)."""
    boundary = "periodic" if model.periodic else "clamped"
    ops = [FiberOperator(model, potential, omega.advance(j), grid)
           for j in range(-n, 0)]
    g_n = _pullback_chain(ops, grid, boundary)
    g_prev = _pullback_chain(ops[1:], grid, boundary)
    if not np.all(np.isfinite(g_n)):
        raise NumericalError("pullback iterate diverged")
    gap = float(np.abs(g_n - g_prev).max()) if n >= 1 else 0.0
    return GridFunction(g_n, boundary), gap


def _nu_test_battery(n, boundary):
    x = np.arange(n) / n if boundary == "periodic" else np.arange(n) / (n - 1)
    return [np.cos(2 * np.pi * x), np.sin(2 * np.pi * x), (x - 0.5) ** 2]


@dataclass
class EigenTriple:
    """Eigen-data of the transfer cocycle along the window [0, n].

    lam[j] = lambda_{theta^j omega};  hs[j], nus[j], mus[j] live on the
    fiber of theta^j omega.  Internally exact:  op(j).adjoint(nus[j+1]) =
    lam[j] * nus[j]  and  op(j).apply(hs[j]) = lam[j] * hs[j+1].
    """

    model: object
    potential: object
    omega: BaseSample
    window: int
    burn_in: int
    grid: int
    boundary: str
    lam: np.ndarray
    hs: list
    nus: list
    mus: list
    gap_h: float = 0.0
    gap_nu: float = 0.0
    _ops: dict = field(default_factory=dict, repr=False)

    def fiber(self, j):
        return self.omega.advance(j)

    def op(self, j):
        if j not in self._ops:
            self._ops[j] = FiberOperator(self.model, self.potential, self.fiber(j), self.grid)
        return self._ops[j]

    def h(self, j):
        return self.hs[j]

    def nu(self, j):
        return self.nus[j]

    def mu(self, j):
        return self.mus[j]

    def nu_mass(self, j, lo, hi):
        return node_cell_mass(self.nus[j], self.boundary, lo, hi)

    def mu_integral(self, j, values):
        return float(np.dot(self.mus[j], values))

    def log_lambda_sum(self, n):
        return float(np.sum(np.log(self.lam[:n])))


def solve_triple(model, potential, omega, window, burn_in, grid,
                 depth_check=8, burnin_tol=1e-6):
    """Construct the eigen-triple on the window [0, window].

    h by normalized pullback with burn-in `burn_in` behind the window,
    nu by adjoint pullback from a uniform seed `burn_in` fibers beyond it,
    lambda_j as the integral of L_{theta^j omega} 1 against nu_{j+1} (the
    adjoint normalizer, so duality is exact), h rescaled fiberwise so that
    the nu-integral of h is 1, mu = h nu.

    Raises BurnInError when deepening the burn-in by `depth_check` moves the
    answer by more than `burnin_tol` (sup-norm for h at index 0, smooth test
    integrals for nu).
    """
    boundary = "periodic" if model.periodic else "clamped"
    lo_j = -(burn_in + depth_check)
    hi_j = window + burn_in + depth_check
    lo, hi = omega.window
    if not (lo <= lo_j and hi_j <= hi):
        raise DomainError(
            f"omega window [{lo},{hi}] does not cover the required [{lo_j},{hi_j}]")
    ops = {j: FiberOperator(model, potential, omega.advance(j), grid)
           for j in range(lo_j, hi_j)}

    # densities: forward chain of normalized applications
    def h_chain(start):
        g = np.ones(grid)
        out = {}
        for j in range(start, window + 1):
            if j >= 0:
                out[j] = g
            if j < window:
                g = ops[j].apply(g)
                g = g / lebesgue_mean(GridFunction(g, boundary))
        return out

    hs_raw = h_chain(-burn_in)
    hs_deep = h_chain(-(burn_in + depth_check))
    gap_h = float(np.abs(hs_raw[0] - hs_deep[0]).max())

    # conformal weights: adjoint chain from a uniform seed at the far end
    def nu_chain(start):
        rho = quadrature_weights(grid, boundary)
        nus = {}
        lam = {}
        for j in range(start - 1, -1, -1):
            raw = ops[j].adjoint(rho)
            tot = float(raw.sum())
            if not math.isfinite(tot) or tot <= 0.0:
                raise NumericalError("adjoint pullback lost mass")
            if j <= window:
                lam[j] = tot
            rho = raw / tot
            if j <= window:
                nus[j] = rho
        return nus, lam

    nus_raw, lam_raw = nu_chain(window + burn_in)
    nus_deep, _ = nu_chain(window + burn_in + depth_check)
    tests = _nu_test_battery(grid, boundary)
    gap_nu = max(abs(float(np.dot(nus_raw[0] - nus_deep[0], t))) for t in tests)

    if gap_h > burnin_tol or gap_nu > burnin_tol:
        raise BurnInError(
            f"burn-in {burn_in} insufficient (h gap {gap_h:.3g}, nu gap {gap_nu:.3g} "
            f"> {burnin_tol:g}); suggest burn_in >= {2 * burn_in}",
            suggested=2 * burn_in)

    # nu at the last window fiber needs lambda_{window} too
    lam = np.array([lam_raw[j] for j in range(window + 1)])
    nus = [nus_raw[j] for j in range(window + 1)]
    # hard lambda-bound invariant
    for j in range(window + 1):
        blo, bhi = lambda_bounds(model, potential, omega.advance(j))
        if not (blo - 1e-9 <= lam[j] <= bhi + 1e-9):
            raise NumericalError(
                f"lambda bound violated at index {j}: {lam[j]} not in [{blo}, {bhi}]")

    hs = []
    mus = []
    for j in range(window + 1):
        s = float(np.dot(nus[j], hs_raw[j]))
        hv = hs_raw[j] / s
        m = hv * nus[j]
        m = m / m.sum()
        hs.append(GridFunction(hv, boundary))
        mus.append(m)

    triple = EigenTriple(model=model, potential=potential, omega=omega,
                         window=window, burn_in=burn_in, grid=grid,
                         boundary=boundary, lam=lam, hs=hs, nus=nus, mus=mus,
                         gap_h=gap_h, gap_nu=gap_nu)
    triple._ops = {j: ops[j] for j in range(0, window + 1)}
    return triple


# ---------------------------------------------------------------------------
# residual diagnostics
# ---------------------------------------------------------------------------

def duality_residual(triple, model, potential, g, j):
    """| int L_omega g d nu_{j+1} - lambda_j int g d nu_j | / ||g||_inf."""
    if not 0 <= j < triple.window:
        raise DomainError("index j and j+1 must lie inside the window")
    lg = triple.op(j).apply(g.values)
    lhs = float(np.dot(triple.nus[j + 1], lg))
    rhs = float(triple.lam[j] * np.dot(triple.nus[j], g.values))
    return abs(lhs - rhs) / float(np.abs(g.values).max())


def invariance_residual(triple, model, test, j):
    """| int (test o f_omega) d mu_j  -  int test d mu_{j+1} |."""
    if not 0 <= j < triple.window:
        raise DomainError("index j and j+1 must lie inside the window")
    nodes = GridFunction(np.zeros(triple.grid), triple.boundary).nodes()
    fx = eval_forward(model, triple.fiber(j), nodes)
    lhs = float(np.dot(triple.mus[j], test(fx)))
    rhs = float(np.dot(triple.mus[j + 1], test.values))
    return abs(lhs - rhs)


def jacobian_check(triple, model, potential, interval, j):
    """Conformality on an injectivity domain:
    | nu_{j+1}(f_omega A) - int_A lambda_j e^{-phi} d nu_j |."""
    a, b = interval
    if not 0 <= j < triple.window:
        raise DomainError("index j and j+1 must lie inside the window")
    if b <= a:
        raise DomainError("empty interval")
    w = triple.fiber(j)
    cuts = branch_cuts(model, w)
    inside = [c for c in cuts if a < c < b]
    if inside:
        raise DomainError(f"interval straddles branch cuts at {inside}")
    fa = float(eval_forward(model, w, a))
    fb = float(eval_forward(model, w, b))
    if triple.boundary == "periodic":
        width = (fb - fa) % 1.0
        if width == 0.0:
            width = 1.0
        fb = fa + width
    lhs = node_cell_mass(triple.nus[j + 1], triple.boundary, fa, fb)
    nodes = GridFunction(np.zeros(triple.grid), triple.boundary).nodes()
    dens = triple.nus[j] * triple.lam[j] * np.exp(-potential_value(potential, w, nodes))
    rhs = node_cell_mass(dens, triple.boundary, a, b)
    return abs(lhs - rhs)
