import math

import numpy as np
import pytest

from qthermo.base_driver import BaseSystem, advance, ensemble_average, sample_base
from qthermo.errors import ConfigError, OutOfWindowError
from qthermo.fiber_system import ModelSpec, degree


def test_rotation_determinism():
    base = BaseSystem.rotation(seed=42)
    a = sample_base(base, 3, window=(2, 2))
    b = sample_base(base, 3, window=(2, 2))
    assert [s.omega0 for s in a] == [s.omega0 for s in b]
    assert all(0.0 <= s.state < 1.0 for s in a)


def test_shift_window_alphabet_closure():
    base = BaseSystem.bernoulli((0.5, 0.5), seed=1)
    s = sample_base(base, 1, window=(4, 4))[0]
    assert len(s.symbols) == 9
    assert set(s.symbols) <= {0, 1}


def test_shift_windows_bit_identical_across_runs():
    base = BaseSystem.bernoulli((0.3, 0.7), seed=8)
    a = sample_base(base, 20, window=(3, 5))
    b = sample_base(base, 20, window=(3, 5))
    assert all(x.symbols == y.symbols for x, y in zip(a, b))


def test_symbol_frequency_binomial():
    base = BaseSystem.bernoulli((0.5, 0.5), seed=7)
    samples = sample_base(base, 100000, window=(0, 0))
    freq = np.mean([s.symbol(0) == 0 for s in samples])
    stderr = math.sqrt(0.25 / len(samples))
    assert abs(freq - 0.5) <= 3 * stderr


def test_advance_formula_and_identity():
    base = BaseSystem.rotation(angle=0.6180339887, seed=0)
    s = sample_base(base, 1, window=(4, 4))[0]
    s0 = type(s)(system=base, index=0, back=4, fwd=4, omega0=0.0)
    assert advance(s0, 1).state == pytest.approx(0.6180339887, abs=1e-15)
    assert advance(s, 0) is s
    assert advance(advance(s, 3), -3) == s


def test_advance_out_of_window():
    base = BaseSystem.rotation(seed=5)
    s = sample_base(base, 1, window=(1, 2))[0]
    with pytest.raises(OutOfWindowError):
        advance(s, 3)
    with pytest.raises(OutOfWindowError):
        advance(advance(s, 2), 1)


def test_shift_advance_roundtrip_bit_exact():
    base = BaseSystem.bernoulli((0.3, 0.7), seed=3)
    s = sample_base(base, 1, window=(4, 4))[0]
    t = advance(advance(s, 1), -1)
    assert t == s
    assert t.symbol(0) == s.symbol(0)


def test_bad_probability_vector():
    with pytest.raises(ConfigError):
        BaseSystem.bernoulli((0.5, 0.6))
    with pytest.raises(ConfigError):
        BaseSystem.bernoulli_countable([0.5, 0.25, 0.12], truncation=3)


def test_countable_truncation_folds_tail():
    weights = [0.5, 0.25, 0.125, 0.0625, 0.0625]
    base = BaseSystem.bernoulli_countable(weights, truncation=3, seed=0)
    assert base.alphabet_size == 3
    assert base.probs[2] == pytest.approx(0.25, abs=1e-15)
    assert sum(base.probs) == pytest.approx(1.0, abs=1e-15)


def test_ensemble_average_constant():
    base = BaseSystem.rotation(seed=9)
    samples = sample_base(base, 50, window=(0, 0))
    mean, stderr = ensemble_average(samples, lambda w: 2.5)
    assert mean == 2.5
    assert stderr == 0.0


def test_ensemble_average_empty():
    with pytest.raises(ConfigError):
        ensemble_average([], lambda w: 1.0)


def test_birkhoff_equidistribution():
    # unique ergodicity of the irrational rotation: orbit average of omega -> 1/2
    base = BaseSystem.rotation(seed=2)
    s = sample_base(base, 1, window=(0, 10**4))[0]
    vals = [advance(s, k).state for k in range(10**4)]
    assert abs(np.mean(vals) - 0.5) <= 0.01


def test_log_degree_two_map_mix():
    # degree-2 / degree-3 Bernoulli mix: mean log deg = (log2 + log3)/2
    base = BaseSystem.bernoulli((0.5, 0.5), seed=21)
    model = ModelSpec(family="intermittent_family", degrees=(2, 3), dips=(1, 1))
    samples = sample_base(base, 40000, window=(0, 0))
    mean, stderr = ensemble_average(samples, lambda w: math.log(degree(model, w)))
    expected = 0.5 * (math.log(2) + math.log(3))
    assert abs(mean - expected) <= 3 * stderr


def test_threaded_average_matches_serial():
    base = BaseSystem.rotation(seed=31)
    samples = sample_base(base, 200, window=(0, 0))
    m1, s1 = ensemble_average(samples, lambda w: w.state ** 2, threads=1)
    m4, s4 = ensemble_average(samples, lambda w: w.state ** 2, threads=4)
    assert m1 == m4 and s1 == s4
