import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plab.harmonic import (angular_separation, avg_contraction_check, class_block_quadrature,
                           class_character_norm, kappa_estimate, lps_quaternions,
                           product_gap_experiment, q_class_norm, q_class_norm_quadrature,
                           ramanujan_norm, real_sph_harm, real_to_complex, sphere_quadrature,
                           su2_irrep, wigner_block_complex, wigner_blocks)
from plab.quat import UnitQuaternion, qmul, rotation_matrix, sample_haar

quats = st.integers(0, 2**32 - 1).map(lambda s: sample_haar(np.random.default_rng(s), 1)[0])
LPS_MAX_NORM = 0.7412487488  # frozen from a run at lmax = 40


def test_real_harmonics_orthonormal():
    pts, w = sphere_quadrature(12)
    Y = real_sph_harm(8, pts)
    G = (Y * w[:, None]).T @ Y
    assert np.allclose(G, np.eye(81), atol=1e-12)


def test_real_harmonics_degree_one():
    pts = np.eye(3)
    Y = real_sph_harm(1, pts)
    # columns m = -1, 0, 1 are sqrt(3) times y, z, x
    assert np.allclose(Y[:, 1:], math.sqrt(3) * pts[:, [1, 2, 0]])


def test_identity_blocks():
    for D in wigner_blocks(UnitQuaternion.one(), 12):
        assert np.allclose(D, np.eye(len(D)), atol=1e-14)


@given(quats)
def test_blocks_rotate_harmonics(q):
    pts = np.random.default_rng(0).standard_normal((40, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    R = rotation_matrix(q)
    Yx = real_sph_harm(10, pts)
    YRx = real_sph_harm(10, pts @ R.T)
    for l, D in enumerate(wigner_blocks(q, 10)):
        sl = slice(l * l, (l + 1) ** 2)
        assert np.allclose(D @ D.T, np.eye(2 * l + 1), atol=1e-11)
        assert np.allclose(YRx[:, sl], Yx[:, sl] @ D.T, atol=1e-10)


def test_multiplicativity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p, q = sample_haar(rng, 2)
        Dp, Dq, Dpq = wigner_blocks(p, 10), wigner_blocks(q, 10), wigner_blocks(qmul(p, q), 10)
        for a, b, c in zip(Dp, Dq, Dpq):
            assert np.abs(a @ b - c).max() < 1e-11


def test_z_rotation_complex_phases():
    th = 0.83
    q = UnitQuaternion.from_axis_angle([0, 0, 1], th / 2)
    for l in range(6):
        D = wigner_block_complex(l, q)
        m = np.arange(-l, l + 1)
        assert np.allclose(D, np.diag(np.exp(1j * m * th)), atol=1e-12)
        C = real_to_complex(l)
        assert np.allclose(C @ C.conj().T, np.eye(2 * l + 1))


def test_block_cap():
    with pytest.raises(ValueError):
        wigner_blocks(UnitQuaternion.one(), 61)


def test_kappa_examples():
    assert kappa_estimate([UnitQuaternion.one()], 5).kappa == 0.0
    g = kappa_estimate(lps_quaternions(), 40)
    assert max(g.per_degree_norms) <= ramanujan_norm(3) + 1e-9
    assert g.max_norm == pytest.approx(LPS_MAX_NORM, abs=1e-9)
    assert g.max_norm >= 0.74
    assert ramanujan_norm(3) == pytest.approx(math.sqrt(5) / 3)
    with pytest.raises(ValueError):
        kappa_estimate([], 3)


def test_irrational_rotation_has_no_gap():
    q = [UnitQuaternion.from_axis_angle([0.3, 0.4, 1.0], math.sqrt(2))]
    low = kappa_estimate(q, 5).max_norm
    high = kappa_estimate(q, 40).max_norm
    assert low <= high and high > 0.99


@given(quats)
def test_norms_bounded_and_conjugation_invariant(x):
    rng = np.random.default_rng(2)
    C = [UnitQuaternion.from_array(v) for v in sample_haar(rng, 3)]
    xq = UnitQuaternion.from_array(x)
    g1 = kappa_estimate(C, 8)
    g2 = kappa_estimate([c.conj_by(xq) for c in C], 8)
    assert max(g1.per_degree_norms) <= 1 + 1e-9
    assert abs(g1.kappa - g2.kappa) < 1e-8


@pytest.mark.parametrize("dim", range(1, 8))
def test_su2_irrep_unitary_and_multiplicative(dim):
    rng = np.random.default_rng(dim)
    p, q = sample_haar(rng, 2)
    A, B, AB = su2_irrep(dim, p), su2_irrep(dim, q), su2_irrep(dim, qmul(p, q))
    assert np.allclose(A @ A.conj().T, np.eye(dim), atol=1e-12)
    assert np.allclose(A @ B, AB, atol=1e-12)
    # character depends only on the conjugacy angle
    th = math.acos(p[0])
    chi = math.sin(dim * th) / math.sin(th)
    assert np.trace(A).real == pytest.approx(chi, abs=1e-10)


def test_class_norm_examples():
    assert q_class_norm(math.pi / 2, 4) == pytest.approx(1 / 3, abs=1e-15)
    assert q_class_norm(1e-4, 4) > 0.9999
    with pytest.raises(ValueError):
        q_class_norm(0.0, 2)


def test_class_norm_below_one():
    for phi in np.linspace(0.05, math.pi - 0.05, 60):
        assert q_class_norm(phi, 4) < 1


def test_class_norm_quadrature():
    for phi in np.linspace(0.1, 3.0, 10):
        for d in range(2, 10):
            blk = class_block_quadrature(phi, d)
            assert np.allclose(blk, blk[0, 0] * np.eye(d), atol=1e-12)
            assert abs(abs(blk[0, 0]) - class_character_norm(phi, d)) < 1e-12
        assert abs(q_class_norm_quadrature(phi, 4) - q_class_norm(phi, 4)) < 1e-6


def test_angular_separation():
    e = np.eye(3)
    assert angular_separation(e[:, :1], e[:, :1]) == 0.0
    assert angular_separation(e[:, :1], e[:, 1:2]) == 1.0
    th = 0.4
    v = np.array([[math.cos(th)], [math.sin(th)], [0.0]])
    assert angular_separation(e[:, :1], v) == pytest.approx(1 - math.cos(th), abs=1e-15)
    with pytest.raises(ValueError):
        angular_separation(2 * e[:, :1], v)


def test_two_subspace_exact_lines():
    # two lines at angle th in the plane, projections as the Markov-like operators, kappa = 1
    for th in np.linspace(0.1, math.pi / 2, 10):
        u = np.array([1.0, 0.0])
        v = np.array([math.cos(th), math.sin(th)])
        norm = np.linalg.norm(0.5 * (np.outer(u, u) + np.outer(v, v)), 2)
        assert norm == pytest.approx((1 + math.cos(th)) / 2)
        delta = 1 - math.cos(th)
        assert norm <= 1 - delta ** 2 / 36


def test_contraction_check():
    rep = avg_contraction_check(20, 0.5, 50, np.random.default_rng(0))
    assert rep.violations == 0 and rep.worst_slack > -1e-12
    rep = avg_contraction_check(60, None, 100, np.random.default_rng(1), random_dim=True)
    assert rep.violations == 0
    with pytest.raises(ValueError):
        avg_contraction_check(300, 0.5, 1, np.random.default_rng(0))


def test_product_gap_pairs():
    B = lps_quaternions()
    one = UnitQuaternion.one()
    same = product_gap_experiment(B, [one, one], lmax=10)
    assert same.gap_lower == 0.0
    quarter = UnitQuaternion.from_axis_angle([1, 0, 0], math.pi / 2)
    rep = product_gap_experiment(B, [one, quarter], lmax=10, jmax=4)
    assert rep.separation >= 2 / 3 - 1e-12
    assert rep.gap_lower == pytest.approx(rep.kappa_B * rep.separation ** 2 / 36)
    with pytest.raises(ValueError):
        product_gap_experiment(B, [one], lmax=10)


def test_product_gap_triple():
    B = lps_quaternions()
    abar = [UnitQuaternion.one(), UnitQuaternion.from_axis_angle([1, 0, 0], 1.0),
            UnitQuaternion.from_axis_angle([0, 1, 0], 2.0)]
    rep = product_gap_experiment(B, abar, jmax=1, lmax=6, rng=np.random.default_rng(0),
                                 samples=20_000)
    assert 0 < rep.q_norm < 1
    assert rep.gap_lower > 0
