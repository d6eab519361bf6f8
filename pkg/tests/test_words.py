import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plab.words import (BudgetExceeded, FiniteGroupMeasure, GenerationError, GroupDescriptor,
                        GroupWord, avez_powers, avez_sequence, build_mubar, convolution_power,
                        convolve, entropy_H, identity, moments, parse_word, read_measure,
                        reduce_word, sample_word, symmetric_generating_measure, write_measure)

F3 = GroupDescriptor.free(3)
S2 = GroupDescriptor.surface(2)


def letters(group, max_size=30):
    n = group.n_generators
    return st.lists(st.integers(1, n).flatmap(lambda a: st.sampled_from([a, -a])),
                    max_size=max_size)


def small_measure(group, max_atoms=4):
    words = st.lists(letters(group, 4), min_size=1, max_size=max_atoms)
    wts = st.lists(st.floats(0.1, 1.0), min_size=max_atoms, max_size=max_atoms)

    def build(ws_wts):
        ws, wts = ws_wts
        acc = {}
        for w, p in zip(ws, wts):
            g = reduce_word(w, group)
            acc[g] = acc.get(g, 0.0) + p
        return FiniteGroupMeasure.from_words(acc, group, normalize=True)

    return st.tuples(words, wts).map(build)


def test_examples():
    assert reduce_word([1, -1], F3).is_identity
    assert reduce_word([1, 2, -2, 1], F3).letters == (1, 1)
    assert reduce_word(S2.relator(), S2).is_identity
    assert str(parse_word("a1 b2^-1", S2)) == "a1 b2^-1"
    assert parse_word("e", F3) == identity(F3)


def test_rejects_bad_letters():
    with pytest.raises(ValueError):
        reduce_word([0], F3)
    with pytest.raises(ValueError):
        reduce_word([4], F3)
    with pytest.raises(ValueError):
        parse_word("b1", F3)
    with pytest.raises(ValueError):
        GroupDescriptor("torus", 2)


def test_surface_relator_conjugates_vanish():
    rel = list(S2.relator())
    for k in range(len(rel)):
        assert reduce_word(rel[k:] + rel[:k], S2).is_identity
        w = [3] + rel[k:] + rel[:k] + [-3]
        assert reduce_word(w, S2).is_identity


def test_surface_long_piece_is_shortened():
    # five of the eight relator letters rewrite to the inverse of the other three
    rel = S2.relator()
    w = reduce_word(rel[:5], S2)
    assert len(w) == 3
    assert reduce_word(w.letters + rel[5:], S2).is_identity


@given(letters(F3))
def test_free_reduce_idempotent(w):
    r = reduce_word(w, F3)
    assert reduce_word(r.letters, F3) == r
    assert len(r) <= len(w)
    assert all(a != -b for a, b in zip(r.letters, r.letters[1:]))


@given(letters(S2, 24))
def test_surface_reduce_idempotent(w):
    r = reduce_word(w, S2)
    assert reduce_word(r.letters, S2) == r
    assert len(r) <= len(w)


def test_reduce_bulk_random_words():
    rng = np.random.default_rng(3)
    for group in (F3, S2):
        n = group.n_generators
        for _ in range(5000):
            w = (rng.integers(1, n + 1, rng.integers(0, 20)) * rng.choice([-1, 1], 1)).tolist()
            w = [x * s for x, s in zip(w, rng.choice([-1, 1], len(w)))]
            r = reduce_word(w, group)
            assert len(r) <= len(w)
            assert reduce_word(r.letters, group) == r


@given(letters(S2, 12), letters(S2, 12))
def test_group_law(u, v):
    a, b = reduce_word(u, S2), reduce_word(v, S2)
    assert (a * a.inverse()).is_identity
    assert (a * b).inverse() == b.inverse() * a.inverse()


def test_measure_validation():
    with pytest.raises(ValueError):
        FiniteGroupMeasure({(1,): 0.5}, F3)
    with pytest.raises(ValueError):
        FiniteGroupMeasure({(1,): 1.5, (2,): -0.5}, F3)
    with pytest.raises(ValueError):
        FiniteGroupMeasure({}, F3)


def test_convolve_examples():
    mu = symmetric_generating_measure(F3)
    assert convolve(FiniteGroupMeasure.dirac(F3), mu).tv_distance(mu) < 1e-15
    m = FiniteGroupMeasure({(1,): 0.5, (-1,): 0.5}, F3)
    sq = convolve(m, m)
    assert dict(sq.support) == {(): 0.5, (1, 1): 0.25, (-1, -1): 0.25}
    with pytest.raises(BudgetExceeded):
        convolve(mu, mu, budget=10)


@given(small_measure(F3), small_measure(F3), small_measure(F3))
def test_convolve_associative(a, b, c):
    assert convolve(convolve(a, b), c).tv_distance(convolve(a, convolve(b, c))) < 1e-12


@given(small_measure(S2, 3), small_measure(S2, 3), small_measure(S2, 3))
def test_convolve_associative_surface(a, b, c):
    assert convolve(convolve(a, b), c).tv_distance(convolve(a, convolve(b, c))) < 1e-12


@given(small_measure(F3))
def test_entropy_subadditive(mu):
    assert entropy_H(convolve(mu, mu)) <= 2 * entropy_H(mu) + 1e-12
    assert entropy_H(mu) >= 0


def test_entropy_examples():
    assert entropy_H(FiniteGroupMeasure.dirac(F3)) == 0.0
    four = FiniteGroupMeasure.uniform([reduce_word(w, F3) for w in ([1], [2], [3], [1, 2])], F3)
    assert entropy_H(four) == pytest.approx(math.log(4), abs=1e-15)
    assert entropy_H(symmetric_generating_measure(F3)) == pytest.approx(math.log(6), abs=1e-15)


def test_moments():
    assert moments(FiniteGroupMeasure.dirac(F3), 0.3) == (0.0, 1.0)
    assert moments(symmetric_generating_measure(F3), 0.0) == pytest.approx((1.0, 1.0))
    with pytest.raises(ValueError):
        moments(FiniteGroupMeasure.dirac(F3), -1)


@given(small_measure(F3), st.floats(0.01, 1.0))
def test_exponential_moment_submultiplicative(mu, eps):
    assert moments(convolve(mu, mu), eps)[1] <= moments(mu, eps)[1] ** 2 * (1 + 1e-12)


def test_exponential_inequality_random():
    # (e^{nx} - 1) / e^{eps n} <= 2x/eps on x in [0, eps/2]
    rng = np.random.default_rng(0)
    eps = rng.uniform(1e-3, 5.0, 10_000)
    x = rng.uniform(0, 1, 10_000) * eps / 2
    n = rng.integers(1, 200, 10_000)
    lhs = np.exp(n * (x - eps)) - np.exp(-eps * n)
    assert np.all(lhs <= 2 * x / eps)


@given(st.floats(1e-3, 5.0), st.floats(0, 1), st.integers(1, 500))
def test_exponential_inequality(eps, u, n):
    x = u * eps / 2
    assert math.exp(n * (x - eps)) - math.exp(-eps * n) <= 2 * x / eps


def test_sampling():
    rng = np.random.default_rng(1)
    assert all(w.is_identity for w in sample_word(FiniteGroupMeasure.dirac(F3), rng, 50))
    m = FiniteGroupMeasure({(1,): 0.5, (2,): 0.5}, F3)
    n = 100_000
    hits = sum(w.letters == (1,) for w in sample_word(m, rng, n))
    assert abs(hits / n - 0.5) < 4 * math.sqrt(0.25 / n)
    a = sample_word(m, np.random.default_rng(9), 20)
    b = sample_word(m, np.random.default_rng(9), 20)
    assert a == b


def _gens(group, idx):
    return [GroupWord((i,), group) for i in idx]


def test_mubar_already_generating():
    mu = symmetric_generating_measure(F3, include_identity=True)
    d = build_mubar(mu, _gens(F3, [1]), _gens(F3, [2, 3]))
    assert d.powers == ((1, 1.0),)
    assert d.mubar.tv_distance(mu) < 1e-15


def test_mubar_uniform_on_generators_never_reaches_inverses():
    mu = FiniteGroupMeasure.uniform(_gens(F3, [1, 2, 3]), F3)
    with pytest.raises(GenerationError):
        build_mubar(mu, _gens(F3, [1]), _gens(F3, [2, 3]), n_max=6)


def test_mubar_frozen_free4():
    F4 = GroupDescriptor.free(4)
    mu = symmetric_generating_measure(F4)
    d = build_mubar(mu, _gens(F4, [1]), _gens(F4, [2, 3, 4]))
    assert (d.p, d.q, d.eps, d.f_prime_1) == (0.5, 0.125, 0.5, 1.0)
    assert d.M == pytest.approx(math.exp(0.5))
    assert d.c_sg == pytest.approx(0.125 / math.exp(0.5))


def test_mubar_needs_two_steps():
    # a1^-1 appears only in mu*mu via a1^-1 = a2^-1 (a2 a1^-1)
    mu = FiniteGroupMeasure.uniform([reduce_word(w, F3) for w in
                                     ([1], [-2], [2, -1], [-1, 2], [2], [-2, 1], [3], [-3])], F3)
    d = build_mubar(mu, _gens(F3, [1]), _gens(F3, [3]))
    assert len(d.powers) == 2
    assert d.f_prime_1 == 1.5


@given(st.lists(st.floats(0.05, 1.0), min_size=7, max_size=7))
def test_mubar_invariants(wts):
    words = [(), (1,), (-1,), (2,), (-2,), (3,), (-3,)]
    tot = sum(wts)
    mu = FiniteGroupMeasure({w: p / tot for w, p in zip(words, wts)}, F3)
    A, B = _gens(F3, [1]), _gens(F3, [2, 3])
    d = build_mubar(mu, A, B)
    Bsym = B + [b.inverse() for b in B]
    assert 0 < d.p <= 0.5 and 0 < d.q and 0 < d.eps < 1 and d.M >= 1
    assert d.c_sg == pytest.approx(d.eps * d.p / (2 * d.M))
    assert math.fsum(w for _, w in d.powers) == pytest.approx(1.0)
    assert d.f_prime_1 == (len(d.powers) + 1) / 2
    for b in Bsym:
        assert d.mubar[b] >= d.p / len(Bsym) * (1 - 1e-12)
    assert all(d.mubar[a] >= d.q for a in A)


def test_avez():
    assert avez_sequence(FiniteGroupMeasure.dirac(F3), 3) == [0.0, 0.0, 0.0]
    mu = symmetric_generating_measure(F3)
    H = avez_powers(mu, 4)
    for n in range(1, 5):
        for m in range(1, 5 - n):
            assert H[n + m - 1] <= H[n - 1] + H[m - 1] + 1e-12
    gen = FiniteGroupMeasure.uniform(_gens(F3, [1, 2, 3]), F3)
    assert avez_sequence(gen, 2)[1] <= entropy_H(gen) + 1e-12
    frozen = avez_sequence(mu, 3)
    assert frozen[0] == pytest.approx(math.log(6))
    assert frozen[1] == pytest.approx(0.5 * entropy_H(convolution_power(mu, 2)))


def test_measure_file_roundtrip(tmp_path):
    mu = symmetric_generating_measure(S2, include_identity=True)
    p = tmp_path / "m.txt"
    write_measure(mu, p)
    assert read_measure(p).tv_distance(mu) == 0.0


def test_measure_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("group free 3\na1 0.5\na5 0.5\n")
    with pytest.raises(ValueError, match=":3:"):
        read_measure(p)
    p.write_text("a1 1.0\n")
    with pytest.raises(ValueError):
        read_measure(p)
