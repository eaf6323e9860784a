import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regnoise.errors import DegenerateInput
from regnoise.fit import loglog_fit
from regnoise.rng import RngSeed, as_generator, experiment_seed, name_hash, parallel_map, tree_sum, worker_count


def test_seed_streams_reproducible_and_distinct():
    a = RngSeed(7, 3).generator().standard_normal(5)
    b = RngSeed(7, 3).generator().standard_normal(5)
    c = RngSeed(7, 4).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(RngSeed(7).child(1).generator().random(3), RngSeed(7).child(2).generator().random(3))


def test_experiment_seed_uses_name_and_replicate():
    assert name_hash("x") == name_hash("x")
    a = experiment_seed(1, "alpha", 0).generator().random()
    assert a == experiment_seed(1, "alpha", 0).generator().random()
    assert a != experiment_seed(1, "beta", 0).generator().random()
    assert a != experiment_seed(1, "alpha", 1).generator().random()


def test_as_generator_variants():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert as_generator(3).random() == as_generator(RngSeed(3)).random()


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("LAB_THREADS", raising=False)
    assert worker_count(1) == 1
    monkeypatch.setenv("LAB_THREADS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("LAB_THREADS", "0")
    with pytest.raises(ValueError):
        worker_count()


def test_parallel_map_order_independent_of_workers():
    f = lambda i: experiment_seed(0, "pm", i).generator().standard_normal(3)  # noqa: E731
    one = parallel_map(f, range(20), 1)
    four = parallel_map(f, range(20), 4)
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a, b)


def test_tree_sum_fixed_order():
    vals = [np.array([x]) for x in (1e16, 1.0, -1e16, 1.0, 3.0)]
    assert tree_sum(vals)[0] == ((1e16 + 1.0) + (-1e16 + 1.0)) + 3.0
    with pytest.raises(ValueError):
        tree_sum([])


def test_loglog_examples():
    xs = np.array([0.1, 0.2, 0.4, 0.8])
    r = loglog_fit(xs, xs)
    assert r.slope == pytest.approx(1.0, abs=1e-12) and r.stderr == pytest.approx(0.0, abs=1e-12)
    assert loglog_fit(xs, xs**2).slope == pytest.approx(2.0, abs=1e-12)
    x = np.geomspace(1e-3, 1, 20)
    y = 3 * x**1.7 * (1 + 0.01 * np.random.default_rng(0).standard_normal(20))
    r = loglog_fit(x, y)
    assert abs(r.slope - 1.7) <= 0.05
    assert r.n_points == 20 and r.r_squared > 0.99


def test_loglog_degenerate():
    with pytest.raises(DegenerateInput):
        loglog_fit([1, 2], [1, 2])
    with pytest.raises(DegenerateInput):
        loglog_fit([1, 2, 3], [1, 0, 3])
    with pytest.raises(DegenerateInput):
        loglog_fit([1, 2, 3], [1, 2])
    with pytest.raises(DegenerateInput):
        loglog_fit([1, 1, 1], [1, 2, 3])


@settings(max_examples=30)
@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_loglog_recovers_planted_slope(slope, scale):
    x = np.geomspace(0.01, 1, 8)
    r = loglog_fit(x, scale * x**slope)
    assert r.slope == pytest.approx(slope, abs=1e-9)
    assert r.stderr >= 0
