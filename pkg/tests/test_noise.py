import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from regnoise.errors import GridTooLarge, HurstMismatch, InsufficientGrid, NonIntegerRequired, NonPositive, OffGrid
from regnoise.noise import (
    MultiLevelPath,
    TimeGrid,
    c_of_H,
    conditional_mean,
    conditional_mean_levels,
    conditional_mean_via_remainder,
    conditional_remainder_exact,
    conditional_remainder_path,
    gen_base_fbm_exact,
    gen_mvn_fbm,
    holder_seminorm,
    holder_seminorm_info,
    iterated_integrals,
    lift,
    mvn_variance,
    read_path_csv,
    sample_path,
    stopping_index,
    stopping_time_tau_K,
    validate_hurst,
    write_path_csv,
)
from regnoise.noise.generate import _fbm_covariance
from regnoise.rng import RngSeed


# ---- Hurst and grids ----

def test_validate_hurst_examples():
    with pytest.raises(NonIntegerRequired):
        validate_hurst(2.0)
    h = validate_hurst(0.5)
    assert (h.value, h.integer_part, h.fractional_part) == (0.5, 0, 0.5)
    h = validate_hurst(2.25)
    assert (h.integer_part, h.fractional_part) == (2, 0.25)
    with pytest.raises(NonPositive):
        validate_hurst(-0.3)
    with pytest.raises(NonIntegerRequired):
        validate_hurst(3 + 1e-10)
    validate_hurst(3 + 1e-8)


@given(st.floats(0.01, 20.0).filter(lambda x: abs(x - round(x)) > 1e-6))
def test_hurst_split_recombines(x):
    h = validate_hurst(x)
    assert h.integer_part + h.fractional_part == pytest.approx(x, abs=1e-15)
    assert 0 < h.fractional_part < 1


def test_time_grid_points_and_lookup():
    g = TimeGrid(8)
    assert g.points[0] == 0.0 and g.points[-1] == 1.0
    assert g.dt == 0.125
    assert g.index_of(0.375) == 3
    with pytest.raises(OffGrid):
        g.index_of(0.3)
    g2 = TimeGrid(4, -1.0, 1.0)
    np.testing.assert_allclose(np.diff(g2.points), 0.5, rtol=1e-12)


# ---- c(H) ----

def test_c_of_H_examples():
    assert c_of_H(0.5) == 1.0
    assert c_of_H(1.5) == pytest.approx(1 / 3, rel=1e-15)
    assert c_of_H(2.25) == pytest.approx(1 / (4.5 * 1.3125**2), rel=1e-15)
    assert c_of_H(2.25) == pytest.approx(0.1289997480, abs=1e-10)


@pytest.mark.parametrize("h", [0.3, 0.7, 1.5, 2.25, 3.4])
def test_c_of_H_matches_kernel_quadrature(h):
    # the remainder kernel (t-r)^{H-1/2}/prod integrated in r over [0,1]
    hh = validate_hurst(h)
    norm = math.prod(h - i + 0.5 for i in range(1, hh.integer_part + 1))
    val, _ = integrate.quad(lambda u: u ** (2 * h - 1), 0, 1)
    assert val / norm**2 == pytest.approx(c_of_H(h), rel=1e-9)


# ---- exact generator ----

def test_mvn_variance_closed_form():
    for h in (0.1, 0.25, 0.5, 0.75, 0.95):
        closed = special.gamma(h + 0.5) ** 2 / (special.gamma(2 * h + 1) * math.sin(math.pi * h))
        assert mvn_variance(h) == pytest.approx(closed, rel=1e-10)
    assert mvn_variance(0.5) == pytest.approx(1.0, rel=1e-12)


def test_exact_generator_starts_at_zero_and_is_deterministic():
    g = TimeGrid(64)
    a = gen_base_fbm_exact(0.3, g, 2, RngSeed(5))
    b = gen_base_fbm_exact(0.3, g, 2, RngSeed(5))
    assert np.all(a.base[0] == 0.0)
    np.testing.assert_array_equal(a.base, b.base)
    assert a.w_increments is None


def test_exact_generator_rejects_lifted_hurst():
    with pytest.raises(HurstMismatch):
        gen_base_fbm_exact(1.5, TimeGrid(8), 1, 0)


@pytest.mark.parametrize("h", [0.25, 0.5, 0.75])
def test_exact_generator_covariance(h):
    g = TimeGrid(8)
    n = 10_000
    gen = np.random.default_rng(99)
    samples = np.stack([gen_base_fbm_exact(h, g, 1, gen).base[1:, 0] for _ in range(n)])
    emp = samples.T @ samples / n
    t = g.points[1:]
    cov = _fbm_covariance(h, t)
    # SE of a product moment of Gaussians: sqrt(C_ss C_tt + C_st^2)/sqrt(n)
    se = np.sqrt(np.outer(np.diag(cov), np.diag(cov)) + cov**2) / math.sqrt(n)
    assert np.all(np.abs(emp - cov) <= 4 * se)


def test_exact_generator_examples():
    n = 10_000
    g = TimeGrid(2)
    gen = np.random.default_rng(7)
    v = np.array([gen_base_fbm_exact(0.5, g, 1, gen, mvn_scale=True).base[-1, 0] for _ in range(n)])
    assert abs(np.mean(v**2) - 1.0) <= 3 * np.std(v**2) / math.sqrt(n)
    x = np.array([gen_base_fbm_exact(0.7, g, 1, gen).base[1:, 0] for _ in range(n)])
    prod = x[:, 0] * x[:, 1]
    assert abs(prod.mean() - 0.5) <= 3 * prod.std() / math.sqrt(n)


def test_mvn_scale_multiplies_variance():
    g = TimeGrid(16)
    a = gen_base_fbm_exact(0.3, g, 1, RngSeed(1))
    b = gen_base_fbm_exact(0.3, g, 1, RngSeed(1), mvn_scale=True)
    np.testing.assert_allclose(b.base, a.base * math.sqrt(mvn_variance(0.3)), rtol=1e-12)


def test_cholesky_fallback_for_shifted_grid():
    p = gen_base_fbm_exact(0.6, TimeGrid(16, 1.0, 2.0), 1, 3)
    assert p.meta["method"] == "cholesky"
    with pytest.raises(GridTooLarge):
        gen_base_fbm_exact(0.6, TimeGrid(5000, 1.0, 2.0), 1, 3)


# ---- MvN generator ----

def test_mvn_half_is_brownian_sum():
    sim = gen_mvn_fbm(0.5, TimeGrid(128), 2, past_truncation=4, seed=RngSeed(3))
    inc = sim.w_increments[sim.past_steps:]
    np.testing.assert_allclose(sim.path.base[1:], np.cumsum(inc, axis=0), atol=1e-12)
    assert np.all(sim.path.base[0] == 0)


def test_mvn_deterministic_and_shapes():
    a = gen_mvn_fbm(0.25, TimeGrid(64), 1, 2.0, RngSeed(11))
    b = gen_mvn_fbm(0.25, TimeGrid(64), 1, 2.0, RngSeed(11))
    np.testing.assert_array_equal(a.path.levels, b.path.levels)
    assert a.w_increments.shape == (a.past_steps + 64, 1)
    assert a.full_grid.start == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        gen_mvn_fbm(0.25, TimeGrid(64), 1, 0.5, 1)


def test_mvn_variance_close_to_truncated_moving_average():
    # Var(B_1) for the truncated MvN integral, computed by quadrature
    h, T = 0.3, 50.0
    a = h - 0.5
    near, _ = integrate.quad(lambda r: (1 - r) ** (2 * a), 0, 1)
    far, _ = integrate.quad(lambda u: ((1 + u) ** a - u**a) ** 2, 0, T, limit=200)
    target = near + far
    gen = np.random.default_rng(0)
    n = 4000
    v = np.array([gen_mvn_fbm(h, TimeGrid(16), 1, T, gen).path.base[-1, 0] for _ in range(n)])
    assert abs(np.mean(v**2) - target) <= 3 * np.std(v**2) / math.sqrt(n) + 0.01 * target


# ---- lift ----

def test_lift_zero_and_linear():
    g = TimeGrid(16)
    zero = MultiLevelPath(validate_hurst(0.4), g, np.zeros((1, 17, 1)))
    assert np.all(lift(zero, 2.4).levels == 0)
    lin = MultiLevelPath(validate_hurst(0.4), g, g.points[None, :, None].copy())
    out = lift(lin, 2.4)
    t = g.points
    np.testing.assert_allclose(out.levels[1, :, 0], t**2 / 2, atol=1e-15)
    assert np.max(np.abs(out.levels[2, :, 0] - t**3 / 6)) <= g.dt**2
    with pytest.raises(HurstMismatch):
        lift(lin, 1.5)


def test_lift_trapezoid_derivative_identity():
    p = sample_path(2.3, TimeGrid(64), 2, RngSeed(2))
    dt = p.grid.dt
    for k in range(1, 3):
        lhs = np.diff(p.levels[k], axis=0) / dt
        rhs = 0.5 * (p.levels[k - 1][1:] + p.levels[k - 1][:-1])
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        assert np.all(p.levels[k][0] == 0)


def test_lift_variance_of_integrated_brownian():
    # Var(int_0^1 W) = int int min(u,v) = 1/3
    gen = np.random.default_rng(4)
    n = 4000
    v = np.array([sample_path(1.5, TimeGrid(64), 1, gen).top[-1, 0] for _ in range(n)])
    oracle, _ = integrate.dblquad(lambda u, w: min(u, w), 0, 1, 0, 1)
    assert abs(np.mean(v**2) - oracle) <= 3 * np.std(v**2) / math.sqrt(n)


# ---- conditioning ----

def test_remainder_examples():
    inc = np.random.default_rng(1).standard_normal((5, 16, 2)) / 4
    r = conditional_remainder_exact(inc, 0.5, 1 / 16)
    np.testing.assert_allclose(r, inc.sum(axis=1), atol=1e-14)
    assert np.all(conditional_remainder_exact(np.zeros((8, 1)), 1.5, 0.1) == 0)


def test_remainder_path_end_matches_exact():
    inc = np.random.default_rng(2).standard_normal((3, 20, 1)) * 0.1
    path = conditional_remainder_path(inc, 2.3, 0.01)
    for m in (1, 7, 20):
        np.testing.assert_allclose(path[:, m], conditional_remainder_exact(inc[:, :m], 2.3, 0.01), atol=1e-13)
    assert np.all(path[:, 0] == 0)


def test_remainder_variance_h15():
    n, m = 10_000, 256
    dt = 0.5 / m
    inc = np.random.default_rng(3).standard_normal((n, m, 1)) * math.sqrt(dt)
    sq = conditional_remainder_exact(inc, 1.5, dt)[:, 0] ** 2
    assert abs(sq.mean() - 0.5**3 / 3) <= 3 * sq.std() / math.sqrt(n)
    assert 0.5**3 / 3 == pytest.approx(0.0416667, abs=1e-7)


def test_remainder_uncorrelated_with_past():
    n = 10_000
    gen = np.random.default_rng(5)
    past = gen.standard_normal(n)
    future = gen.standard_normal((n, 32, 1)) * math.sqrt(1 / 32)
    r = conditional_remainder_exact(future, 0.7, 1 / 32)[:, 0]
    assert abs(np.corrcoef(past, r)[0, 1]) < 4 / math.sqrt(n)


@pytest.mark.parametrize("h", [0.3, 0.5, 1.5, 2.3])
def test_conditional_mean_routes_agree(h):
    sim = gen_mvn_fbm(h, TimeGrid(256), 2, 4.0, RngSeed(8))
    a = conditional_mean(sim, 0.5)
    b = conditional_mean_via_remainder(sim, 0.5)
    scale = 1 + np.max(np.abs(sim.path.top))
    assert np.max(np.abs(a - b)) <= sim.grid.dt**2 * scale
    np.testing.assert_allclose(a[0], sim.path.top[128], atol=1e-14)


def test_conditional_mean_martingale_for_brownian():
    sim = gen_mvn_fbm(0.5, TimeGrid(64), 1, 2.0, RngSeed(9))
    np.testing.assert_allclose(conditional_mean(sim, 0.25), np.broadcast_to(sim.path.top[16], (49, 1)), atol=1e-12)
    with pytest.raises(OffGrid):
        conditional_mean(sim, 0.3)


def test_conditional_mean_levels_freeze_taylor_data():
    sim = gen_mvn_fbm(2.3, TimeGrid(64), 1, 2.0, RngSeed(10))
    lev = conditional_mean_levels(sim, 0.5)
    np.testing.assert_allclose(lev[:, 0], sim.path.levels[:, 32], atol=1e-14)


def test_conditional_remainder_variance_from_mvn_simulation():
    n = 2000
    gen = np.random.default_rng(6)
    vals = []
    for _ in range(n):
        sim = gen_mvn_fbm(1.5, TimeGrid(64), 1, 2.0, gen)
        vals.append(sim.path.top[-1, 0] - conditional_mean(sim, 0.5)[-1, 0])
    sq = np.array(vals) ** 2
    assert abs(sq.mean() - c_of_H(1.5) * 0.5**3) <= 3 * sq.std() / math.sqrt(n)


# ---- Hölder norms and stopping ----

def test_holder_examples():
    t = np.linspace(0, 1, 101)
    assert holder_seminorm(t, 1.0, 0.01) == pytest.approx(1.0, rel=1e-12)
    assert holder_seminorm(np.full(11, 3.0), 0.7, 0.1) == 0.0
    assert holder_seminorm(t**2, 1.5, 0.01) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(InsufficientGrid):
        holder_seminorm(np.zeros(2), 1.5, 0.5)


def test_holder_pair_metadata():
    _, meta = holder_seminorm_info(np.zeros(100), 0.5, 0.01)
    assert meta["pairs"] == "all"
    _, meta = holder_seminorm_info(np.zeros(3000), 0.5, 0.001)
    assert meta["pairs"] == "dyadic"


def test_holder_exact_levels_requires_path():
    p = sample_path(1.5, TimeGrid(32), 1, 0)
    v = holder_seminorm(p, 1.2, derivative_source="exact_levels")
    assert v > 0
    with pytest.raises(ValueError):
        holder_seminorm(p, 1.2)


def test_stopping_time_examples():
    p = sample_path(1.5, TimeGrid(128), 1, RngSeed(4))
    assert stopping_time_tau_K(p, 1e18, 0.25) == 1.0
    assert stopping_time_tau_K(p, 0.0, 0.25) == p.grid.points[1]
    taus = [stopping_index(p, k, 0.25) for k in (0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 1e9)]
    assert taus == sorted(taus)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_stopping_monotone_in_K(seed, k1, k2):
    p = sample_path(0.6, TimeGrid(64), 1, seed)
    lo, hi = sorted((k1, k2))
    assert stopping_index(p, lo, 0.2) <= stopping_index(p, hi, 0.2)


# ---- io ----

def test_path_csv_roundtrip(tmp_path):
    p = sample_path(2.3, TimeGrid(16), 2, RngSeed(3))
    csv_path, side = write_path_csv(p, tmp_path / "p.csv", {"seed": 3, "generator": "exact", "mvn_scale": False})
    assert csv_path.read_text().splitlines()[0] == "t,level,component,value"
    q = read_path_csv(csv_path)
    np.testing.assert_array_equal(q.levels, p.levels)
    assert q.hurst.value == 2.3
    import json
    meta = json.loads(side.read_text())
    assert set(meta) == {"hurst", "dim", "seed", "generator", "mvn_scale", "past_truncation"}


def test_iterated_integrals_initial_values():
    base = np.ones((5, 1))
    out = iterated_integrals(base, 2, 0.25, initial=[np.array([1.0]), np.array([2.0])])
    np.testing.assert_allclose(out[1, :, 0], 1 + 0.25 * np.arange(5))
    assert out[2, 0, 0] == 2.0
