import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plab.moebius import (MoebiusMap, SpherePoint, apply, from_spinor, is_rotation, log_nrn,
                          matrix_coefficient, matrix_coefficient_exact, product, random_moebius,
                          random_rotation_matrix2, rn_derivative, scale_map, sigma0, to_spinor,
                          uniform_points)
from plab.stationary import build_grid

SOUTH = np.array([0.0, 0.0, -1.0])  # z = 0


@pytest.fixture(scope="module")
def grid():
    return build_grid(100_000)


def moebius_maps(max_t=2.0):
    return st.integers(0, 2**32 - 1).map(lambda s: random_moebius(np.random.default_rng(s), max_t))


def test_scale_map_examples():
    assert scale_map(0, 0).distance(MoebiusMap.identity()) == 0
    assert log_nrn(scale_map(1.0)) == pytest.approx(1.0, abs=1e-14)
    assert is_rotation(scale_map(0.0, math.pi))
    assert log_nrn(scale_map(0.37, 2.1)) == pytest.approx(0.37, abs=1e-14)


def test_apply_examples():
    p = SpherePoint.from_complex(1.0)
    assert apply(MoebiusMap.identity(), p) == p
    assert apply(scale_map(1.0), p).to_complex() == pytest.approx(math.exp(0.5), abs=1e-12)
    assert SpherePoint.from_complex(complex("inf")).xyz == (0.0, 0.0, 1.0)


def test_rn_and_sigma_at_origin():
    for t in (0.1, 0.7, 2.0):
        assert rn_derivative(scale_map(t), SOUTH) == pytest.approx(math.exp(t), rel=1e-13)
        assert sigma0(scale_map(t), SOUTH) == pytest.approx(-t, abs=1e-13)


def test_rotation_rn_is_one():
    rng = np.random.default_rng(2)
    k = MoebiusMap(random_rotation_matrix2(rng))
    pts = uniform_points(rng, 1000)
    assert np.allclose(rn_derivative(k, pts), 1.0, atol=1e-13)
    assert np.allclose(sigma0(MoebiusMap.identity(), pts), 0.0)
    assert log_nrn(k) < 1e-12


def test_spinor_roundtrip_near_poles():
    pts = np.array([[0, 0, 1.0], [0, 0, -1.0], [1e-9, 0, math.sqrt(1 - 1e-18)], [1, 0, 0]])
    assert np.allclose(from_spinor(to_spinor(pts)), pts, atol=1e-15)


def test_inverse_law_bulk():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        g = random_moebius(rng)
        p = uniform_points(rng, 1)[0]
        assert np.linalg.norm(apply(g, apply(g.inverse(), p)) - p) < 1e-10


@given(moebius_maps(), moebius_maps())
def test_cocycle(g, h):
    pts = uniform_points(np.random.default_rng(0), 50)
    lhs = sigma0(g @ h, pts)
    rhs = sigma0(g, apply(h, pts)) + sigma0(h, pts)
    assert np.allclose(lhs, rhs, atol=1e-10)


@given(moebius_maps())
def test_action_is_homomorphism(g):
    h = scale_map(0.3, 1.0)
    pts = uniform_points(np.random.default_rng(1), 20)
    assert np.allclose(apply(g @ h, pts), apply(g, apply(h, pts)), atol=1e-10)


@given(moebius_maps(), st.floats(0, 1))
def test_conjugation_preserves_log_nrn(g, s):
    k = MoebiusMap(random_rotation_matrix2(np.random.default_rng(int(s * 1e6))))
    assert log_nrn(k @ g @ k.inverse()) == pytest.approx(log_nrn(g), abs=1e-10)
    assert log_nrn(g.inverse()) == pytest.approx(log_nrn(g), abs=1e-10)


def test_long_product_determinant():
    # conjugated small scalings keep the walk near the rotation group
    rng = np.random.default_rng(5)
    base = []
    for _ in range(1000):
        k = MoebiusMap(random_rotation_matrix2(rng))
        base.append(k @ scale_map(rng.uniform(-3e-4, 3e-4)) @ k.inverse())
    g = product(base * 1000)
    assert abs(g.det - 1) < 1e-12
    assert np.isfinite(log_nrn(g))
    rot = [MoebiusMap(random_rotation_matrix2(rng)) for _ in range(100)]
    assert abs(product(rot * 100).det - 1) < 1e-12


def test_product_matches_matmul():
    rng = np.random.default_rng(11)
    maps = [random_moebius(rng) for _ in range(6)]
    ref = maps[0]
    for g in maps[1:]:
        ref = ref @ g
    assert product(maps).distance(ref) < 1e-9 * np.linalg.norm(ref.m)


def test_product_degenerate():
    with pytest.raises(ValueError):
        product([scale_map(2.0)] * 2000)


def test_serialization():
    g = random_moebius(np.random.default_rng(6))
    assert MoebiusMap.from_reals(g.to_reals()).distance(g) < 1e-15
    with pytest.raises(ValueError):
        MoebiusMap(np.zeros((2, 2)))


def test_rn_integrates_to_one(grid):
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_moebius(rng, 2.0)
        assert abs(np.sum(grid.weights * rn_derivative(g, grid.centers)) - 1) < 1e-4


def test_grid_sup_matches_log_nrn(grid):
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = random_moebius(rng, 2.0)
        sup = np.max(rn_derivative(g, grid.centers))
        assert abs(math.log(sup) - log_nrn(g)) < 1e-3
        # operator norm proxy
        assert np.max(rn_derivative(g.inverse(), grid.centers)) <= math.exp(log_nrn(g)) + 1e-6


def test_matrix_coefficient(grid):
    assert matrix_coefficient(MoebiusMap.identity(), grid) == pytest.approx(1.0, abs=1e-12)
    assert matrix_coefficient_exact(1.0) == pytest.approx(0.9595173756674719, abs=1e-15)
    for t in (0.1, 0.5, 1.0, 2.0):
        vals = [matrix_coefficient(scale_map(t, s), grid) for s in (0.0, 0.4, 2.5)]
        assert abs(vals[0] - matrix_coefficient_exact(t)) < 1e-6
        assert max(vals) - min(vals) < 1e-8
    for t in np.linspace(0.01, 1.0, 50):
        assert matrix_coefficient_exact(t) <= 1 - t * t / 25


def test_center_rule_is_coarser(grid):
    err1 = abs(matrix_coefficient(scale_map(2.0), grid, order=1) - matrix_coefficient_exact(2.0))
    err2 = abs(matrix_coefficient(scale_map(2.0), grid) - matrix_coefficient_exact(2.0))
    assert err2 < err1
