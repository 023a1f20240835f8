import os
import subprocess
import sys

import numpy as np
import pytest

from qthermo import kernels


def test_mp_left_inverse_residual():
    x = np.linspace(0.0, 1.0, 1001)
    for beta in (0.25, 0.5, 0.85):
        y = kernels.mp_left_inverse(x, beta)
        assert np.all(y >= 0.0) and np.all(y <= 0.5)
        res = y * (1.0 + (2.0 * y) ** beta) - x
        assert np.abs(res).max() <= 1e-13


def test_paths_agree():
    # the dispatched (possibly numba) kernels match the numpy reference
    rng = np.random.default_rng(0)
    vals = 1.0 + rng.random(257)
    pts = rng.random(400)
    for periodic in (True, False):
        a = kernels.lininterp(vals, pts, periodic)
        b = kernels._lininterp_np(vals, pts, periodic)
        assert np.abs(a - b).max() <= 1e-14
    pre = rng.random((3, 129))
    w = np.exp(rng.random((3, 129)) * 0.1)
    g = 1.0 + rng.random(129)
    for periodic in (True, False):
        a = kernels.transfer_apply(g, pre, w, periodic)
        b = kernels._transfer_apply_np(g, pre, w, periodic)
        assert np.abs(a - b).max() <= 1e-12
        rho = rng.random(129)
        a = kernels.adjoint_apply(rho, pre, w, periodic)
        b = kernels._adjoint_apply_np(rho, pre, w, periodic)
        assert np.abs(a - b).max() <= 1e-12
    orbits = rng.random((50, 6))
    order = np.argsort(rng.random(50))
    for circle in (True, False):
        a = kernels.greedy_separated(orbits, order, 0.11, circle)
        b = kernels._greedy_separated_np(orbits, order, 0.11, circle)
        assert np.array_equal(a, b)


def test_adjoint_is_transpose_of_apply():
    rng = np.random.default_rng(1)
    pre = rng.random((2, 64))
    w = np.exp(rng.random((2, 64)) * 0.2)
    g = rng.random(64)
    rho = rng.random(64)
    for periodic in (True, False):
        lhs = float(np.dot(rho, kernels.transfer_apply(g, pre, w, periodic)))
        rhs = float(np.dot(kernels.adjoint_apply(rho, pre, w, periodic), g))
        assert lhs == pytest.approx(rhs, rel=1e-13)


def test_pure_numpy_env_flag():
    code = ("import qthermo.kernels as k; "
            "assert k.PURE_NUMPY; "
            "import numpy as np; "
            "y = k.mp_left_inverse(np.array([0.3]), 0.5); "
            "assert abs(float(y[0] * (1 + (2 * y[0]) ** 0.5)) - 0.3) < 1e-13")
    env = dict(os.environ, QTHERMO_PURE_NUMPY="1")
    subprocess.run([sys.executable, "-c", code], check=True, env=env)
