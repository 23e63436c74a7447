import itertools
import random
from fractions import Fraction

import pytest

from qtheta.lattice import AlternatingPairing, CharacterPoint, LatticeHom
from qtheta.nctorus import (
    FiniteGroupoid,
    GroupRingElement,
    IncompatibleMorphism,
    NCTorus,
    NotInvertible,
    TorusMismatch,
    TorusMorphism,
    direct_product,
    groupoid_convolve,
    make_external_mult,
    make_identity,
    make_mult_n,
    make_mumford,
    make_shift,
    morphism_apply,
    morphism_validate,
    ring_inv,
    ring_mul,
    tensor_monomials,
)
from qtheta.scalar import ComplexField

K = ComplexField(256)
q = K.scalar(3, Fraction(1, 5))
half = q.sqrt()
ALPHA = AlternatingPairing(K, 2, {(0, 1): half}, (1, 1))
T = NCTorus(ALPHA)
SIGNED = NCTorus(AlternatingPairing(K, 2, {(0, 1): K.scalar(2, Fraction(1, 3))}, (-1, 1)))


def monomials(rng, n, count, radius=4):
    return [tuple(rng.randint(-radius, radius) for _ in range(n)) for _ in range(count)]


def test_commutation_relation():
    x, y = T.e((1, 0)), T.e((0, 1))
    xy = ring_mul(x, y)
    assert xy.close(T.e((1, 1), half))
    assert xy.close(ring_mul(y, x) * q)


def test_inverse_examples():
    h = (2, -3)
    assert ring_mul(T.e(h), T.e((-2, 3))).close(T.e((0, 0)))
    assert ring_inv(T.e(h)).close(T.e((-2, 3)))
    two = T.e((0, 0), K.real(2))
    assert ring_inv(two).close(T.e((0, 0), K.real(Fraction(1, 2))))
    with pytest.raises(NotInvertible):
        ring_inv(T.e((1, 0)) + T.e((0, 1)))


def test_inverse_with_signs():
    for h in itertools.product(range(-2, 3), repeat=2):
        x = SIGNED.e(h, K.scalar(2, Fraction(1, 7)))
        assert ring_mul(x, ring_inv(x)).close(SIGNED.e((0, 0)))
        assert ring_mul(ring_inv(x), x).close(SIGNED.e((0, 0)))


def test_triple_product():
    rng = random.Random(1)
    for h1, h2, h3 in zip(*[monomials(rng, 2, 30)] * 3):
        prod = ring_mul(ring_mul(T.e(h1), T.e(h2)), T.e(h3))
        coef = ALPHA(h1, h2) * ALPHA(h1, h3) * ALPHA(h2, h3)
        target = tuple(a + b + c for a, b, c in zip(h1, h2, h3))
        assert prod.close(T.e(target, coef))


def test_associativity():
    rng = random.Random(2)
    for torus in (T, SIGNED):
        for _ in range(250):
            a, b, c = (torus.e(h, K.scalar(1, Fraction(rng.randrange(6), 6))) for h in monomials(rng, 2, 3))
            assert ring_mul(ring_mul(a, b), c).close(ring_mul(a, ring_mul(b, c)))


def test_zero_coefficients_pruned():
    x = T.e((1, 0))
    assert not (x - x).terms


def test_torus_mismatch():
    with pytest.raises(TorusMismatch):
        ring_mul(T.e((1, 0)), SIGNED.e((1, 0)))


def test_standard_morphisms_have_characteristic_one():
    point = CharacterPoint((K.scalar(2, Fraction(1, 3)), K.scalar(Fraction(1, 2), 0)))
    for F in (make_identity(T), make_mult_n(T, 2), make_mult_n(T, -1), make_mult_n(T, 3), make_shift(T, point),
              make_mumford(ALPHA), make_external_mult(ALPHA, ALPHA ** 2)):
        rep = morphism_validate(F)
        assert rep.compatible and rep.characteristic_one, F


def test_doubling_without_fourth_power_rejected():
    with pytest.raises(IncompatibleMorphism):
        TorusMorphism(T, T, LatticeHom.scalar(2, 2))


def test_morphisms_are_ring_maps():
    rng = random.Random(3)
    point = CharacterPoint((K.scalar(2, Fraction(1, 3)), K.scalar(Fraction(1, 2), Fraction(1, 4))))
    for F in (make_mult_n(T, 2), make_shift(T, point), make_mumford(ALPHA), make_external_mult(ALPHA, ALPHA)):
        n = F.target.rank
        for _ in range(200):
            h, g = monomials(rng, n, 2)
            x, y = F.target.e(h), F.target.e(g)
            assert morphism_apply(F, ring_mul(x, y)).close(ring_mul(morphism_apply(F, x), morphism_apply(F, y)))


def test_apply_examples():
    point = CharacterPoint((K.scalar(2, Fraction(1, 3)), K.scalar(5, 0)))
    h = (2, -1)
    assert make_shift(T, point).apply(T.e(h)).close(T.e(h, point(h)))
    F = make_mult_n(T, 2)
    assert F.apply(F.target.e(h)).close(T.e((4, -2)))
    M = make_mumford(AlternatingPairing(K, 1, {}, (1,)))
    assert M.apply(M.target.e((2, 5))).close(M.source.e((7, -3)))


def test_shift_commutation():
    rng = random.Random(4)
    point = CharacterPoint((K.scalar(2, Fraction(1, 3)), K.scalar(Fraction(3, 2), Fraction(1, 8))))
    for n in (2, 3):
        mult = make_mult_n(T, n)
        b_src = make_shift(T, point)
        b_tgt = make_shift(mult.target, point ** n)
        for h in monomials(rng, 2, 50):
            x = mult.target.e(h)
            assert b_src.apply(mult.apply(x)).close(mult.apply(b_tgt.apply(x)))


def test_mumford_pairing_identity():
    rng = random.Random(5)
    M = make_mumford(ALPHA)
    src = M.source.alpha
    sq = ALPHA ** 2
    for _ in range(30):
        h, g, h2, g2 = monomials(rng, 2, 4)
        lhs = src(tuple(a + b for a, b in zip(h, g)) + tuple(a - b for a, b in zip(h, g)),
                  tuple(a + b for a, b in zip(h2, g2)) + tuple(a - b for a, b in zip(h2, g2)))
        assert lhs == sq(h, h2) * sq(g, g2)


def test_direct_product():
    other = NCTorus(AlternatingPairing(K, 1, {}, (-1,)))
    P = direct_product(T, other)
    assert tensor_monomials(T.e((1, 2)), other.e((3,)), P).close(P.e((1, 2, 3)))


def test_sigma_coefficient_relation():
    rng = random.Random(6)
    alpha = AlternatingPairing(K, 2, {(0, 1): K.scalar(1, Fraction(1, 4))}, (1, 1))
    target = NCTorus(alpha)
    source = NCTorus(AlternatingPairing(K, 2, {(0, 1): K.scalar(1, Fraction(3, 4))}, (1, 1)))
    F = TorusMorphism(source, target, LatticeHom.identity(2), a_basis=[K.scalar(2), K.scalar(1, Fraction(1, 3))])
    assert F.report.compatible and not F.report.characteristic_one
    for h, g in zip(monomials(rng, 2, 40), monomials(rng, 2, 40)):
        s = tuple(a + b for a, b in zip(h, g))
        assert F.a(h) * F.a(g) / F.a(s) == K.real(F.sigma(h, g))
        x, y = target.e(h), target.e(g)
        assert F.apply(ring_mul(x, y)).close(ring_mul(F.apply(x), F.apply(y)))


def test_coefficient_choices_differ_by_character():
    a1 = [K.scalar(2), K.scalar(1, Fraction(1, 3))]
    a2 = [K.scalar(Fraction(1, 3), Fraction(1, 2)), K.scalar(5, Fraction(2, 7))]
    F1 = TorusMorphism(T, T, LatticeHom.identity(2), a1)
    F2 = TorusMorphism(T, T, LatticeHom.identity(2), a2)
    rng = random.Random(7)
    for h, g in zip(monomials(rng, 2, 40), monomials(rng, 2, 40)):
        s = tuple(a + b for a, b in zip(h, g))
        ratio = lambda v: F2.a(v) / F1.a(v)
        assert ratio(s) == ratio(h) * ratio(g)


def z2():
    return FiniteGroupoid.from_group([0, 1], lambda i, j: (i + j) % 2, 0)


def test_groupoid_z2_is_group_ring():
    G = z2()
    f = {0: K.coefficient(K.scalar(2)), 1: K.coefficient(K.scalar(3))}
    g = {0: K.coefficient(K.scalar(5)), 1: K.coefficient(K.scalar(7))}
    out = groupoid_convolve(G, f, g)
    assert out[0].close(K.coefficient(K.scalar(2 * 5 + 3 * 7)))
    assert out[1].close(K.coefficient(K.scalar(2 * 7 + 3 * 5)))


def test_groupoid_identity_delta_is_unit():
    G = FiniteGroupoid.pair_groupoid(["u"])
    one = G.delta(("u", "u"), K)
    f = {("u", "u"): K.coefficient(K.scalar(3, Fraction(1, 4)))}
    assert groupoid_convolve(G, one, f)[("u", "u")].close(f[("u", "u")])
    G = z2()
    e = G.delta(0, K)
    f = {0: K.coefficient(K.scalar(2)), 1: K.coefficient(K.scalar(3))}
    for k in (0, 1):
        assert groupoid_convolve(G, e, f)[k].close(f[k])
        assert groupoid_convolve(G, f, e)[k].close(f[k])


def test_pair_groupoid_is_matrix_algebra():
    G = FiniteGroupoid.pair_groupoid(["u", "v"])
    rng = random.Random(8)
    objs = ["u", "v"]
    idx = {o: i for i, o in enumerate(objs)}
    for _ in range(10):
        f = {m: K.coefficient(K.scalar(rng.randint(1, 9))) for m in G.morphisms}
        g = {m: K.coefficient(K.scalar(rng.randint(1, 9))) for m in G.morphisms}
        Mf = [[0, 0], [0, 0]]
        Mg = [[0, 0], [0, 0]]
        for (s, t), c in f.items():
            Mf[idx[s]][idx[t]] = int(c.value_complex().real)
        for (s, t), c in g.items():
            Mg[idx[s]][idx[t]] = int(c.value_complex().real)
        prod = [[sum(Mf[i][k] * Mg[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
        out = groupoid_convolve(G, f, g)
        for (s, t), c in out.items():
            assert c.close(K.coefficient(K.scalar(prod[idx[s]][idx[t]])))


def test_groupoid_convolution_associative():
    rng = random.Random(9)
    s3 = list(itertools.permutations(range(3)))
    G = FiniteGroupoid.from_group(s3, lambda i, j: tuple(i[j[k]] for k in range(3)), (0, 1, 2))
    for H in (G, FiniteGroupoid.pair_groupoid(["a", "b"]), z2()):
        for _ in range(5):
            f, g, h = ({m: K.coefficient(K.scalar(rng.randint(1, 5), Fraction(rng.randrange(4), 4))) for m in H.morphisms}
                       for _ in range(3))
            left = groupoid_convolve(H, groupoid_convolve(H, f, g), h)
            right = groupoid_convolve(H, f, groupoid_convolve(H, g, h))
            for m in H.morphisms:
                assert left[m].close(right[m])


def test_groupoid_rejects_missing_inverse():
    with pytest.raises(ValueError):
        FiniteGroupoid(["u"], {"e": "u", "x": "u"}, {"e": "u", "x": "u"},
                       {("e", "e"): "e", ("e", "x"): "x", ("x", "e"): "x", ("x", "x"): "x"}, {"u": "e"})


def test_element_arithmetic():
    x = T.e((1, 0), K.scalar(2)) + T.e((0, 1))
    assert isinstance(x, GroupRingElement)
    assert len((x + x).terms) == 2
    assert not (x - x).terms
