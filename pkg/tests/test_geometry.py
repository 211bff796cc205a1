import math
from fractions import Fraction

import numpy as np
import pytest

from knnlab.geometry_oracle import (
    BallCubePair,
    DomainError,
    F_closed,
    F_large_branch,
    F_mc,
    F_small_branch,
    boundary_moment,
    constants,
    density,
    density_bound_check,
    half_moment_integral,
    lemma_ratio,
    unit_ball_volume,
    vol_G,
)


def test_constants_d1():
    c = constants(1)
    assert c.e2 == 2.0
    assert c.e1 == 0.5
    assert c.e3 == 0.25


def test_constants_d2():
    c = constants(2)
    assert c.e2 == pytest.approx(math.pi, rel=1e-15)
    assert c.e1 == pytest.approx(2 / 3, rel=1e-15)


def test_constants_d3():
    assert constants(3).e2 == pytest.approx(4 * math.pi / 3, rel=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_e1_half_ball_moment_monte_carlo(d):
    # e1 = int over the unit ball with w_1 > 0 of w_1
    rng = np.random.default_rng(d)
    w = rng.uniform(-1, 1, (2_000_000, d))
    vals = np.where(np.sum(w * w, axis=1) <= 1, np.maximum(w[:, 0], 0), 0.0) * 2.0 ** d
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - constants(d).e1) <= 4 * se


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_derived_constants_formulae(d):
    c = constants(d)
    assert c.c2 == pytest.approx(2 * c.e1 / (c.e2 * c.e3) ** ((d + 1) / d), rel=1e-14)
    assert c.c3 >= 2 / c.e2 ** (1 / d)
    assert c.breakpoint == pytest.approx(c.e2 / 2 ** d)


def test_vol_G_examples():
    assert vol_G(BallCubePair([0.5], [0.9]), 1000, 0).value == pytest.approx(0.8, abs=1e-15)
    assert vol_G(BallCubePair([0.1], [0.4]), 1000, 0).value == pytest.approx(0.4, abs=1e-15)
    assert vol_G(BallCubePair([0.3, 0.3], [0.3, 0.3]), 1000, 0).value == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_vol_G_interior_ball(d):
    center = np.full(d, 0.5)
    witness = center.copy()
    witness[0] += 0.2
    pair = BallCubePair(center, witness)
    est = vol_G(pair, 100_000, 1)
    assert abs(est.value - unit_ball_volume(d) * 0.2 ** d) <= 3 * est.stderr + 1e-15


def test_vol_G_below_vol_H():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pair = BallCubePair(rng.random(2), rng.random(2))
        est = vol_G(pair, 2000, 3)
        assert est.value <= pair.vol_H + 1e-12


def test_vol_G_requires_mc_points():
    with pytest.raises(DomainError):
        vol_G(BallCubePair([0.1, 0.1], [0.2, 0.2]), 10, 0)


def test_lemma_ratio_examples():
    assert lemma_ratio(BallCubePair([0.5], [0.6]), 1000, 0).value == pytest.approx(1.0)
    assert lemma_ratio(BallCubePair([0.0], [1.0]), 1000, 0).value == pytest.approx(0.5)


def test_lemma_ratio_d2_sweep():
    rng = np.random.default_rng(4)
    e3 = constants(2).e3
    worst = 1.0
    for i in range(300):
        est = lemma_ratio(BallCubePair(rng.random(2), rng.random(2)), 2000, i)
        worst = min(worst, est.value + 3 * est.stderr)
    assert worst >= e3


def test_boundary_moment_examples():
    assert boundary_moment(BallCubePair([0.5], [0.6]), 0, 1000, 0).value == pytest.approx(0.0, abs=1e-15)
    assert boundary_moment(BallCubePair([0.1], [0.4]), 0, 1000, 0).value == pytest.approx(0.04, abs=1e-15)


def test_boundary_moment_interior_d2_is_zero():
    pair = BallCubePair([0.5, 0.5], [0.6, 0.55])
    for s in range(2):
        est = boundary_moment(pair, s, 100_000, s)
        assert abs(est.value) <= 3 * est.stderr


def test_F_closed_d1_examples():
    assert F_closed(0.5, 1) == pytest.approx(0.125, abs=1e-15)
    assert F_closed(0.0, 1) == 0.0
    assert F_closed(1.0, 1) == pytest.approx(0.5, abs=1e-15)
    u = np.linspace(0, 1, 101)
    np.testing.assert_allclose(F_closed(u, 1), u * u / 2, atol=1e-15)
    # second branch at the shared point u = 1
    assert float(F_large_branch(1.0, 1)) == pytest.approx(0.5, abs=1e-15)


def test_F_closed_domain():
    with pytest.raises(DomainError):
        F_closed(1.2, 2)
    with pytest.raises(DomainError):
        F_closed(-0.1, 2)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_half_moment_integral_beta_identity(d):
    expected = Fraction(1, 2 ** (d + 1)) * Fraction(math.factorial(d) * math.factorial(d - 1), math.factorial(2 * d))
    assert half_moment_integral(d) == expected


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_F_closed_continuous_and_monotone(d):
    bp = constants(d).breakpoint
    assert float(F_small_branch(bp, d)) == pytest.approx(float(F_large_branch(bp, d)), abs=1e-12)
    u = np.linspace(0, 1, 2001)
    F = F_closed(u, d)
    assert F[0] == 0.0
    assert np.all(np.diff(F) >= -1e-15)
    assert 0 <= F[-1] <= 1


@pytest.mark.parametrize("d", [1, 2, 3])
def test_density_is_derivative(d):
    bp = constants(d).breakpoint
    u = np.concatenate([np.linspace(0.01, bp - 0.01, 20), np.linspace(min(bp + 0.01, 0.99), 0.99, 5)])
    h = 1e-7
    fd = (F_closed(u + h, d) - F_closed(u - h, d)) / (2 * h)
    np.testing.assert_allclose(density(u, d), fd, rtol=1e-5, atol=1e-7)


def test_F_d1_independent_pair_oracle():
    # direct simulation of the 1-D pair set {ball exits [0,1], clipped length <= u}
    rng = np.random.default_rng(5)
    x, w = rng.random(2_000_000), rng.random(2_000_000)
    r = np.abs(x - w)
    exits = r > np.minimum(x, 1 - x)
    length = np.minimum(1, x + r) - np.maximum(0, x - r)
    for u in (0.1, 0.3, 0.5, 0.8, 1.0):
        hit = exits & (length <= u)
        se = hit.std() / math.sqrt(hit.size)
        assert abs(hit.mean() - F_closed(u, 1)) <= 4 * se


def test_F_mc_endpoints_d1():
    est = F_mc([0.0, 1.0], 1, 20_000, seed=6)
    assert est.value[0] <= 3 * est.stderr[0] + 1e-15
    assert abs(est.value[1] - 0.5) <= 3 * est.stderr[1]


def test_F_mc_d2_grid_matches_closed_form():
    u = np.arange(1, 21) / 20
    est = F_mc(u, 2, 20_000, seed=7)
    assert np.all(np.abs(est.value - F_closed(u, 2)) <= 3 * est.stderr)


def test_F_mc_requires_pairs():
    with pytest.raises(DomainError):
        F_mc(0.5, 2, 100, seed=0)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_density_bound_check(d):
    chk = density_bound_check(d, 200)
    assert chk.pass_
    assert chk.min_value >= 0
    assert chk.max_ratio <= 1


def test_density_bound_examples():
    assert density(0.25, 1) == pytest.approx(0.25)
    assert density(0.25, 1) <= constants(1).c3 * 0.25
    d = 2
    bp = constants(d).breakpoint
    for u in (bp + 0.01, 0.9):
        assert density(u, d) == 1.0
        assert 1.0 <= 2 / constants(d).e2 ** (1 / d) * u ** (1 / d)
    with pytest.raises(DomainError):
        density_bound_check(2, 5)
