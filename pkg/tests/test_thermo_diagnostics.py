import math

import numpy as np
import pytest

from qthermo.base_driver import sample_base
from qthermo.errors import DomainError, InsufficientDataError
from qthermo.fiber_system import PotentialSpec, ZERO_POTENTIAL
from qthermo.function_space import GridFunction, constant_function
from qthermo.hyperbolicity import expansion_sequence, hyperbolic_times
from qthermo.transfer_engine import solve_triple
import qthermo.thermo_diagnostics as td


def cos_obs(n, m=1, boundary="periodic"):
    x = np.arange(n) / n if boundary == "periodic" else np.arange(n) / (n - 1)
    return GridFunction(np.cos(2 * np.pi * m * x), boundary)


# --- dynamic balls ----------------------------------------------------------

def test_dynamic_ball_doubling_example(doubling, rot_sample):
    ball = td.dynamic_ball(doubling, rot_sample, 0.1, 2, 0.05)
    assert ball.lo == pytest.approx(0.0875, abs=1e-12)
    assert ball.hi == pytest.approx(0.1125, abs=1e-12)


def test_dynamic_ball_n1_plain(doubling, rot_sample):
    ball = td.dynamic_ball(doubling, rot_sample, 0.3, 0, 0.04)
    assert (ball.lo, ball.hi) == (pytest.approx(0.26), pytest.approx(0.34))


def test_dynamic_ball_nesting(mp_model, rot_sample):
    prev = None
    for n in (1, 2, 4, 8, 16):
        ball = td.dynamic_ball(mp_model, rot_sample, 0.61, n, 0.05)
        assert ball.lo <= 0.61 <= ball.hi
        if prev is not None:
            assert ball.lo >= prev[0] - 1e-12 and ball.hi <= prev[1] + 1e-12
        prev = (ball.lo, ball.hi)


def test_dynamic_ball_forward_images_consistent(mp_model, rot_sample):
    ball = td.dynamic_ball(mp_model, rot_sample, 0.61, 8, 0.05)
    lo, hi = ball.lo, ball.hi
    from qthermo.fiber_system import eval_forward
    for j in range(8):
        w = rot_sample.advance(j)
        img = eval_forward(mp_model, w, np.array([lo % 1, hi % 1]))
        img = img + np.round(ball.orbit[j + 1] - img)
        lo, hi = float(img.min()), float(img.max())
        assert (lo, hi) == (pytest.approx(ball.intervals[j + 1][0], abs=1e-12),
                            pytest.approx(ball.intervals[j + 1][1], abs=1e-12))


# --- weak Gibbs -------------------------------------------------------------

def test_gibbs_doubling_constant_in_n(doubling_triple, doubling):
    # nu = Lebesgue: d = log(2 eps) independently of n
    eps = 0.02
    for n in (2, 5, 9):
        pt = td.weak_gibbs_ratio(doubling_triple, doubling, ZERO_POTENTIAL,
                                 doubling_triple.omega, 0.371, n, eps,
                                 gamma=0.5, mass_method="transport")
        assert pt.d == pytest.approx(math.log(2 * eps), abs=5e-3)
    ptq = td.weak_gibbs_ratio(doubling_triple, doubling, ZERO_POTENTIAL,
                              doubling_triple.omega, 0.371, 5, eps,
                              gamma=0.5, mass_method="quadrature")
    assert ptq.d == pytest.approx(math.log(2 * eps), abs=5e-3)


def test_gibbs_n0_convention(doubling_triple, doubling):
    pt = td.weak_gibbs_ratio(doubling_triple, doubling, ZERO_POTENTIAL,
                             doubling_triple.omega, 0.371, 0, 0.02,
                             check_hyperbolic=False)
    assert pt.log_gibbs_sum == 0.0
    assert pt.d == pytest.approx(math.log(0.04), abs=1e-3)


def test_gibbs_requires_hyperbolic_time(mp_plain, rot_sample, mp_triple):
    with pytest.raises(DomainError):
        td.weak_gibbs_ratio(mp_triple, mp_plain, ZERO_POTENTIAL, rot_sample,
                            0.0, 4, 0.02, gamma=0.2)


def test_gibbs_transport_matches_quadrature_small_n(mp_triple, mp_model, pot_cos05,
                                                    rot_sample):
    rec = expansion_sequence(mp_model, rot_sample, 0.371, 12)
    times = hyperbolic_times(rec, 0.15)
    picked = [int(t) for t in times if 3 <= t <= 6][:2]
    assert picked
    for n in picked:
        a = td.weak_gibbs_ratio(mp_triple, mp_model, pot_cos05, rot_sample,
                                0.371, n, 0.02, gamma=0.15)
        b = td.weak_gibbs_ratio(mp_triple, mp_model, pot_cos05, rot_sample,
                                0.371, n, 0.02, gamma=0.15,
                                mass_method="quadrature")
        assert a.d == pytest.approx(b.d, abs=0.05)


# --- correlations -----------------------------------------------------------

def test_correlation_doubling_orthogonality(doubling_triple, doubling):
    obs = cos_obs(doubling_triple.grid)
    for n in range(1, 11):
        c = td.correlation(doubling_triple, doubling, ZERO_POTENTIAL, obs, obs, n)
        assert c <= 1e-9


def test_correlation_constant_right_observable(mp_triple, mp_model, pot_cos05,
                                               doubling_triple, doubling):
    one = constant_function(mp_triple.grid)
    obs = cos_obs(mp_triple.grid)
    for n in (1, 4, 9):
        assert td.correlation(mp_triple, mp_model, pot_cos05, obs, one, n) <= 1e-12
    one = constant_function(doubling_triple.grid)
    obs = cos_obs(doubling_triple.grid)
    assert td.correlation(doubling_triple, doubling, ZERO_POTENTIAL, obs, one, 5) <= 1e-12


def test_correlation_operator_vs_direct(doubling_triple, doubling):
    obs_l = GridFunction(1.0 + 0.4 * np.cos(2 * np.pi * np.arange(512) / 512))
    obs_r = GridFunction(1.0 + 0.2 * np.sin(2 * np.pi * np.arange(512) / 512))
    for n in (1, 2, 3, 4):
        a = td.correlation(doubling_triple, doubling, ZERO_POTENTIAL, obs_l, obs_r, n)
        b = td.correlation_direct(doubling_triple, doubling, obs_l, obs_r, n)
        assert a == pytest.approx(b, abs=1e-8)


def test_correlation_two_routes_mp(mp_triple, mp_model):
    # discretization-limited agreement on the intermittent model
    n_grid = mp_triple.grid
    x = np.arange(n_grid) / n_grid
    obs_l = GridFunction(1.0 + 0.4 * np.cos(2 * np.pi * x))
    obs_r = GridFunction(1.0 + 0.2 * np.sin(2 * np.pi * x))
    for n in (1, 2, 4):
        a = td.correlation(mp_triple, mp_model, mp_triple.potential, obs_l, obs_r, n)
        b = td.correlation_direct(mp_triple, mp_model, obs_l, obs_r, n)
        assert a == pytest.approx(b, abs=2e-5)


def test_fit_decay_rate_exact():
    vals = 3.0 * 0.4 ** np.arange(1, 13)
    fit = td.fit_decay_rate(vals)
    assert fit.tau == pytest.approx(0.4, abs=1e-12)
    assert fit.tau_lo <= 0.4 <= fit.tau_hi


def test_fit_decay_rate_insufficient():
    with pytest.raises(InsufficientDataError):
        td.fit_decay_rate(np.zeros(12))


# --- pressure ---------------------------------------------------------------

def test_pressure_separated_doubling(doubling, rot_sample):
    v = td.pressure_separated(doubling, ZERO_POTENTIAL, rot_sample, 8, 0.1)
    assert abs(v - math.log(2.0)) <= 0.05


def test_pressure_separated_constant_shift(doubling, rot_sample):
    v0 = td.pressure_separated(doubling, ZERO_POTENTIAL, rot_sample, 6, 0.1)
    vc = td.pressure_separated(doubling, PotentialSpec(family="constant", c=0.37),
                               rot_sample, 6, 0.1)
    assert vc - v0 == pytest.approx(0.37, abs=1e-12)


def test_pressure_separated_n1_packing(doubling, rot_sample):
    # n = 1 with an explicit dyadic candidate grid: log of the eps-packing count
    cands = np.arange(32) / 32.0
    v = td.pressure_separated(doubling, ZERO_POTENTIAL, rot_sample, 1, 0.1,
                              candidates=cands)
    assert math.exp(v) == pytest.approx(8.0, abs=1e-9)


def test_pressure_from_lambda_doubling(doubling_triple):
    assert td.pressure_from_lambda(doubling_triple) == pytest.approx(
        math.log(2.0), abs=1e-12)


def test_pressure_lambda_constant_shift(doubling, rot_sample):
    tr = solve_triple(doubling, PotentialSpec(family="constant", c=0.25),
                      rot_sample, window=6, burn_in=24, grid=256)
    assert td.pressure_from_lambda(tr) == pytest.approx(math.log(2.0) + 0.25,
                                                        abs=1e-12)


def test_implied_entropy(doubling, rot_sample, mp_model):
    tr = solve_triple(doubling, PotentialSpec(family="constant", c=0.7),
                      rot_sample, window=6, burn_in=24, grid=256)
    assert td.implied_entropy(tr) == pytest.approx(math.log(2.0), abs=1e-10)
    tr = solve_triple(mp_model, ZERO_POTENTIAL, rot_sample, window=6, burn_in=32,
                      grid=512)
    assert td.implied_entropy(tr) == pytest.approx(math.log(2.0), abs=1e-10)


def test_pressure_ball_cover_doubling(doubling, rot_sample):
    v = td.pressure_ball_cover(doubling, ZERO_POTENTIAL, rot_sample, 8, 0.05)
    # upper estimator: log 2 plus the (1/n) log(1/(2 eps)) cover bias
    assert math.log(2.0) - 0.02 <= v <= math.log(2.0) + 0.5


# --- cylinder counting ------------------------------------------------------

def _enumerate_W(sigma, L, p, q, alpha):
    n = len(sigma)
    W = 0.0
    for word in range(2 ** n):
        s = 0.0
        a = 1.0
        for i in range(n):
            if (word >> i) & 1:
                if p[i] == 0:
                    a = 0.0
                    break
                s += -math.log(sigma[i])
                a *= p[i]
            else:
                s += math.log(L[i]) if L[i] > 0 else -math.inf
                a *= q[i]
        else:
            if s >= -alpha * n - 1e-9:
                W += a
            continue
    return W


def test_cylinder_mp_word_count(mp_model, rot_sample):
    sig, ll, pp, qq = td.cylinder_windows_from_model(mp_model, rot_sample, 1)
    res = td.cylinder_count_dp(sig, ll, pp, qq, 0.1)
    assert res.W == 1.0


def test_cylinder_alpha_inf_counts_all_words(mp_model, rot_sample):
    sig, ll, pp, qq = td.cylinder_windows_from_model(mp_model, rot_sample, 10)
    res = td.cylinder_count_dp(sig, ll, pp, qq, math.inf)
    assert res.W == pytest.approx(2.0 ** 10, rel=1e-12)


def test_cylinder_expansion_identity(rot_sample):
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 14))
        sigma = rng.uniform(1.1, 5.0, n)
        L = rng.uniform(0.4, 3.0, n)
        p = rng.integers(0, 4, n)
        q = rng.integers(0, 4, n)
        q[(p + q) == 0] = 1
        res = td.cylinder_count_dp(sigma, L, p, q, math.inf)
        assert res.expansion_total == pytest.approx(res.expansion_closed_form,
                                                    rel=1e-12)


def test_cylinder_dp_equals_enumeration(rot_sample):
    rng = np.random.default_rng(13)
    for _ in range(25):
        n = int(rng.integers(2, 13))
        sigma = rng.uniform(1.1, 5.0, n)
        L = rng.uniform(0.4, 3.0, n)
        p = rng.integers(0, 4, n)
        q = rng.integers(0, 4, n)
        q[(p + q) == 0] = 1
        alpha = float(rng.uniform(0.05, 1.2))
        res = td.cylinder_count_dp(sigma, L, p, q, alpha)
        assert res.W == pytest.approx(
            _enumerate_W(sigma, L, p, q, alpha), rel=1e-12, abs=1e-12)


def test_cylinder_bound_mp(mp_model, rot_sample):
    sig, ll, pp, qq = td.cylinder_windows_from_model(mp_model, rot_sample, 32)
    res = td.cylinder_count_dp(sig, ll, pp, qq, 0.1, bound_eps=0.05)
    assert res.bound_holds


# --- thresholds -------------------------------------------------------------

def test_threshold_mp_value(mp_model, rot_base):
    # alpha = (log 2 - log(3/2)) / 2 = log(4/3)/2 for the intermittent family
    ens = sample_base(rot_base, 32, window=(0, 0))
    rep = td.hyperbolic_threshold_for(mp_model, ZERO_POTENTIAL, ens)
    assert rep.applicable
    assert rep.alpha == pytest.approx(0.5 * math.log(4.0 / 3.0), abs=1e-12)
    assert rep.T0 == 0.0


def test_threshold_t0_arithmetic():
    rep = td.hyperbolic_threshold(math.log(2.0), math.log(1.5), 0.0, 1, 0.2)
    assert rep.T0 == pytest.approx(0.2 / (0.5 * math.log(4.0 / 3.0)), abs=1e-12)


def test_threshold_not_applicable():
    rep = td.hyperbolic_threshold(math.log(2.0), math.log(2.5), 0.1, 1, 0.2)
    assert not rep.applicable
    assert rep.T0 is None
