import itertools
import random
from fractions import Fraction

import mpmath
import pytest

from conftest import random_config
from oracles import brute_force_index, elliptic_coefficient, jacobi_sum
from qtheta.descriptors import elliptic_multiplier
from qtheta.lattice import INFINITE, AlternatingPairing, CharacterPoint, LatticeHom, SymmetricPairing
from qtheta.nctorus import GroupRingElement, NCTorus, make_external_mult, make_identity, make_mult_n, make_mumford, make_shift
from qtheta.scalar import ComplexField, PAdicField
from qtheta.theta import (
    InconsistentPairing,
    NotAmple,
    NotComposable,
    PeriodLattice,
    PullbackError,
    ThetaMultiplier,
    ampleness_gram,
    automorphy_apply,
    automorphy_inverse_apply,
    certify,
    functional_equation_residual,
    multiplier_compose,
    multiplier_pullback,
    multiplier_solve_pairing,
    multiplier_validate,
    preimage_periods,
    same_automorphy,
    solve_periods,
    shift_apply,
    theta_basis,
    theta_dimension,
    theta_eval,
    theta_mul,
    theta_pullback,
    theta_series,
    twisted_shift,
    walk_coefficient,
)

K = ComplexField(256)
TINY = K.ctx.mpf(10) ** -30


def elliptic(q=4, field=K):
    return elliptic_multiplier(field, field.scalar(q, 0) if field is K else field.scalar(q))


def test_elliptic_valid_and_pairing_is_root():
    L = elliptic()
    assert multiplier_validate(L).valid
    assert L.pairing.basis_value(0, 0).abs == 2


def test_elliptic_with_trivial_pairing_invalid():
    L = elliptic_multiplier(K, K.scalar(4), K.one())
    rep = multiplier_validate(L)
    assert not rep.valid and rep.max_residual > 0


def test_zero_multiplier_valid():
    T = NCTorus(AlternatingPairing(K, 2, {(0, 1): K.scalar(1, Fraction(1, 3))}, (1, 1)))
    B = PeriodLattice(T, [[K.one()], [K.one()]])
    Z = LatticeHom.zero(2, 1)
    L = ThetaMultiplier(B, Z, Z, [K.one()], SymmetricPairing.trivial(K, 1))
    assert multiplier_validate(L).valid
    assert theta_dimension(L) == INFINITE


def test_solve_pairing_equal_sides_gives_trivial():
    T = NCTorus(AlternatingPairing.trivial(K, 1))
    B = PeriodLattice(T, [[K.scalar(5, Fraction(1, 3))]])
    h = LatticeHom([[2]])
    s = multiplier_solve_pairing(h, h, B)
    assert s.basis_value(0, 0).is_exactly_one()


def quantum_torus(turns=Fraction(1, 7)):
    return NCTorus(AlternatingPairing(K, 2, {(0, 1): K.scalar(1, turns)}, (1, 1)))


def test_diagonal_quantum_periods_are_inconsistent():
    T = quantum_torus()
    B = PeriodLattice(T, [[K.scalar(4), K.one()], [K.one(), K.scalar(9)]])
    with pytest.raises(InconsistentPairing, match="different values"):
        multiplier_solve_pairing(LatticeHom.identity(2), LatticeHom.zero(2, 2), B)


def test_quantum_periods_with_twisted_offdiagonal():
    T = quantum_torus()
    a12 = T.alpha.basis_value(0, 1)
    p12 = K.scalar(1, Fraction(1, 11))
    B = PeriodLattice(T, [[K.scalar(4), p12], [p12 * a12 ** 2, K.scalar(9)]])
    s = multiplier_solve_pairing(LatticeHom.identity(2), LatticeHom.zero(2, 2), B)
    assert s.basis_value(0, 0).abs == 2 and s.basis_value(1, 1).abs == 3
    assert s.basis_value(0, 1) ** 2 == p12 * a12
    L = ThetaMultiplier(B, LatticeHom.identity(2), LatticeHom.zero(2, 2), [K.one()] * 2, s)
    assert multiplier_validate(L).valid


def test_padic_non_square_pairing():
    P = PAdicField(3)
    T = NCTorus(AlternatingPairing.trivial(P, 1))
    B = PeriodLattice(T, [[P.scalar(Fraction(1, 3))]])
    from qtheta.scalar import NotASquare

    with pytest.raises(NotASquare):
        multiplier_solve_pairing(LatticeHom([[1]]), LatticeHom([[0]]), B)


def test_automorphy_examples(rng):
    L = random_config(rng, K, 2, max_det=4)
    T = L.torus
    for _ in range(20):
        h = (rng.randint(-4, 4), rng.randint(-4, 4))
        x = T.e(h, K.scalar(2, Fraction(1, 3)))
        assert automorphy_apply(L, (0, 0), x).close(x)
        assert automorphy_inverse_apply(L, (0, 0), x).close(x)
        for k in ((1, 0), (0, 1), (2, -1)):
            assert automorphy_apply(L, k, automorphy_inverse_apply(L, k, x)).close(x)
            assert automorphy_inverse_apply(L, k, automorphy_apply(L, k, x)).close(x)


def test_automorphy_commutative_case():
    L = elliptic()
    T = L.torus
    x = T.e((3,), K.scalar(5))
    k = (2,)
    expected = T.e((3 + 2,), K.scalar(5) * L.psi_at(k) * L.pairing(k, k))
    assert automorphy_apply(L, k, x).close(expected)


def test_dimension_examples():
    assert theta_dimension(elliptic()) == 1
    T = NCTorus(AlternatingPairing.trivial(K, 1))
    for d in (2, 3, 5):
        B = PeriodLattice(T, [[K.scalar(2 ** d)]])
        L = ThetaMultiplier(B, LatticeHom([[d]]), LatticeHom([[0]]), [K.one()],
                            multiplier_solve_pairing(LatticeHom([[d]]), LatticeHom([[0]]), B))
        assert theta_dimension(L) == d
        assert len(theta_basis(L, 4)) == d
    T2 = NCTorus(AlternatingPairing.trivial(K, 2))
    B = PeriodLattice(T2, [[K.scalar(4), K.one()], [K.one(), K.scalar(8)]])
    D = LatticeHom([[2, 0], [0, 3]])
    L = ThetaMultiplier(B, D, LatticeHom.zero(2, 2), [K.one()] * 2, multiplier_solve_pairing(D, LatticeHom.zero(2, 2), B))
    assert theta_dimension(L) == 6


def test_ampleness_verdicts():
    L = elliptic()
    rep = ampleness_gram(L)
    assert rep.verdict == "ample"
    assert abs(rep.gram[0][0] - K.ctx.log(4) / 2) < TINY
    U = elliptic_multiplier(K, K.scalar(1, K.ctx.sqrt(2) - 1))
    assert ampleness_gram(U).verdict == "degenerate"
    S = elliptic_multiplier(K, K.scalar(Fraction(1, 4)))
    assert ampleness_gram(S).verdict == "indefinite"
    with pytest.raises(NotAmple):
        theta_basis(S, 3)
    assert theta_basis(S, 3, force=True)[0].formal


def test_elliptic_closed_form():
    th = theta_basis(elliptic(), 30)[0]
    for h in range(-30, 31):
        c = th.coefficient((h,))
        assert c.value.exact
        assert c.value.abs == elliptic_coefficient(Fraction(4), h) and c.value.turns == 0


def test_level_two_supports():
    T = NCTorus(AlternatingPairing.trivial(K, 1))
    B = PeriodLattice(T, [[K.scalar(16)]])
    h2 = LatticeHom([[2]])
    L = ThetaMultiplier(B, h2, LatticeHom([[0]]), [K.one()], multiplier_solve_pairing(h2, LatticeHom([[0]]), B))
    even, odd = theta_basis(L, 8)
    assert all(h[0] % 2 == 0 for h in even.coeffs) and len(even.coeffs) == 9
    assert all(h[0] % 2 == 1 for h in odd.coeffs) and len(odd.coeffs) == 8


def test_zero_seed_gives_zero_series():
    L = elliptic()
    th = theta_series(L, 5, [K.zero()])
    assert not th.coeffs
    assert theta_eval(th, CharacterPoint((K.one(),))).value.is_zero()


def test_functional_equation_and_negative_control(rng):
    L = random_config(rng, K, 2, max_det=3)
    band = L.band()
    R = 2 * band + 3
    for th in theta_basis(L, R):
        for k in itertools.product(range(-1, 2), repeat=2):
            assert functional_equation_residual(th, k, 2) <= TINY
        h0 = min(th.coeffs, key=lambda h: max(abs(x) for x in h))
        bad = th.with_coefficient(h0, th.coefficient(h0) * K.scalar(1 + K.ctx.mpf(10) ** -3))
        assert max(functional_equation_residual(bad, k, 2) for k in ((1, 0), (0, 1), (-1, 0), (0, -1))) > 1e-6


def test_ball_too_small():
    th = theta_basis(elliptic(), 3)[0]
    with pytest.raises(ValueError, match="ball too small"):
        functional_equation_residual(th, (2,), 2)


def test_jacobi_functional_equation():
    ctx = K.ctx
    L = elliptic()
    th = theta_basis(L, 30)[0]
    rng = random.Random(11)
    q = ctx.mpf(4)
    for _ in range(20):
        z = ctx.mpc(rng.uniform(-2, 2), rng.uniform(-2, 2))
        lhs = theta_eval(th, CharacterPoint((K.from_complex(q * z),))).value.value_complex()
        rhs = ctx.sqrt(q) * z * theta_eval(th, CharacterPoint((K.from_complex(z),))).value.value_complex()
        assert abs(lhs - rhs) <= 1e-40 * abs(rhs)


def test_eval_at_one_matches_direct_sum():
    th = theta_basis(elliptic(), 30)[0]
    res = theta_eval(th, CharacterPoint((K.one(),)))
    with mpmath.workprec(256):
        ref = jacobi_sum(mpmath.mpf(1) / 2, mpmath.mpf(1))
    assert abs(res.value.value_complex() - ref) <= 1e-12 * abs(ref)
    assert res.tail_bound < 1e-100


def test_eval_refuses_non_ample():
    U = elliptic_multiplier(K, K.scalar(1, K.ctx.sqrt(2) - 1))
    th = theta_series(U, 3, [K.coefficient(1)], force=True)
    with pytest.raises(NotAmple):
        theta_eval(th, CharacterPoint((K.one(),)))


def test_tail_bound_dominates_discarded_terms():
    ctx = K.ctx
    L = elliptic(Fraction(9, 4))
    short = theta_basis(L, 6)[0]
    long = theta_basis(L, 40)[0]
    x = CharacterPoint((K.scalar(Fraction(3, 2), Fraction(1, 9)),))
    a = theta_eval(short, x)
    b = theta_eval(long, x, with_tail=False)
    assert abs(a.value.value_complex() - b.value.value_complex()) <= a.tail_bound
    assert a.tail_bound < ctx.mpf(10) ** -2


def test_path_independence(rng):
    for _ in range(40):
        L = random_config(rng, K, 2, max_det=6)
        rep = (0, 0)
        for _ in range(3):
            k = (rng.randint(-3, 3), rng.randint(-3, 3))
            assert walk_coefficient(L, rep, k) == walk_coefficient(L, rep, k, order=[1, 0])


def test_injectivity_clause(rng):
    for _ in range(10):
        L = random_config(rng, K, 2, max_det=6)
        T = L.torus
        for j in range(2):
            k = tuple(int(i == j) for i in range(2))
            moved = any(not twisted_shift(L, k, T.e(h)).close(T.e(h)) for h in ((0, 0), (1, 0), (0, 1)))
            assert moved


def test_coefficient_decay_matches_quadratic_form(rng):
    for _ in range(3):
        L = random_config(rng, K, 2, max_det=2)
        A = ampleness_gram(L).gram

        def f(k):
            q = sum(k[i] * A[i][j] * k[j] for i in range(2) for j in range(2))
            return walk_coefficient(L, (0, 0), k).log_norm() + q

        # log|a| + Q is affine along the period walk
        b = f((0, 0))
        x, y = f((1, 0)) - b, f((0, 1)) - b
        for k in itertools.product(range(-4, 5), repeat=2):
            assert abs(f(k) - b - k[0] * x - k[1] * y) < 1e-60


def test_multiply_elliptic_against_double_sum():
    L = elliptic()
    th = theta_basis(L, 12)[0]
    prod = theta_mul(th, th)
    assert theta_dimension(prod.multiplier) == 2
    assert multiplier_validate(prod.multiplier).valid
    for h in range(-10, 11):
        ref = sum(
            elliptic_coefficient(Fraction(4), h1) * elliptic_coefficient(Fraction(4), h - h1)
            for h1 in range(-12, 13)
            if abs(h - h1) <= 12
        )
        got = prod.coefficient((h,))
        assert got.close(K.coefficient(ref), K.ctx.mpf(10) ** -60)
    worst, checked = certify(prod)
    assert checked > 0 and worst <= 1e-20


def test_compose_rejects_mismatch():
    T = quantum_torus()
    a12 = T.alpha.basis_value(0, 1)
    B = PeriodLattice(T, [[K.scalar(16), K.one()], [a12 ** 2, K.scalar(64)]])
    I, Z = LatticeHom.identity(2), LatticeHom.zero(2, 2)
    L = ThetaMultiplier(B, I, Z, [K.one()] * 2, multiplier_solve_pairing(I, Z, B))
    with pytest.raises(NotComposable):
        multiplier_compose(L, L)


def test_compose_commutative_hr_zero():
    L = elliptic()
    P = multiplier_compose(L, L)
    assert P.h_l.matrix == ((2,),) and P.h_r.matrix == ((0,),)
    assert P.psi[0].is_exactly_one()
    assert P.pairing.basis_value(0, 0) == L.pairing.basis_value(0, 0) ** 2


def rank2_quantum_pair():
    T = quantum_torus()
    I, Z = LatticeHom.identity(2), LatticeHom.zero(2, 2)
    s = SymmetricPairing(K, 2, {(0, 0): K.scalar(4), (0, 1): K.scalar(1, 0), (1, 1): K.scalar(8)})
    B = solve_periods(T, I, Z, s)
    L1 = ThetaMultiplier(B, I, Z, [K.one()] * 2, s)
    A = LatticeHom([[-1, 0], [0, -2]])
    L2 = ThetaMultiplier(B, Z, A, [K.one()] * 2, multiplier_solve_pairing(Z, A, B))
    return L1, L2


def test_quantum_product_certified():
    L1, L2 = rank2_quantum_pair()
    assert ampleness_gram(L1).ample and ampleness_gram(L2).ample
    p = theta_mul(theta_basis(L1, 8)[0], theta_basis(L2, 8)[1])
    assert theta_dimension(p.multiplier) == 6
    worst, checked = certify(p)
    assert checked > 0 and worst <= 1e-25


def test_product_with_zero_series():
    L = elliptic()
    th = theta_basis(L, 6)[0]
    zero = theta_series(L, 6, [K.zero()])
    assert not theta_mul(th, zero).coeffs


def test_pullback_identity():
    L = elliptic()
    F = make_identity(L.torus)
    L2 = multiplier_pullback(F, L, L.periods)
    assert L2.h_l.matrix == L.h_l.matrix and L2.h_r.matrix == L.h_r.matrix
    assert L2.psi[0] == L.psi[0] and L2.pairing.basis_value(0, 0) == L.pairing.basis_value(0, 0)


def test_pullback_minus_one_inverts_psi():
    base = elliptic()
    psi = K.scalar(1, Fraction(1, 3))
    L = ThetaMultiplier(base.periods, base.h_l, base.h_r, [psi], base.pairing)
    F = make_mult_n(L.torus, -1)
    L2 = multiplier_pullback(F, L, L.periods, LatticeHom([[-1]]))
    assert L2.psi[0].turns == Fraction(2, 3) and L2.psi[0].abs == 1
    assert L2.h_minus.matrix == L.h_minus.matrix
    th = theta_basis(L, 12)[0]
    pb = theta_pullback(F, th, L2)
    assert certify(pb)[0] <= 1e-20


def test_pullback_doubling():
    L = elliptic()
    F = make_mult_n(L.torus, 2)
    L2 = multiplier_pullback(F, L, L.periods, LatticeHom([[2]]))
    assert L2.h_minus.matrix == ((4,),)
    assert theta_dimension(L2) == 4
    pb = theta_pullback(F, theta_basis(L, 24)[0], L2)
    assert all(h[0] % 2 == 0 for h in pb.coeffs)
    assert certify(pb)[0] <= 1e-25


def test_pullback_inferred_period_map():
    L = elliptic()
    F = make_mult_n(L.torus, 2)
    L2 = multiplier_pullback(F, L, L.periods)
    assert L2.h_minus.matrix == ((4,),)


def test_pullback_shift():
    L = elliptic()
    b0 = CharacterPoint((K.scalar(Fraction(3, 2), Fraction(1, 5)),))
    F = make_shift(L.torus, b0)
    L2 = multiplier_pullback(F, L, L.periods)
    assert L2.psi[0] == L.psi[0] * b0(L.h_minus((1,)))
    pb = theta_pullback(F, theta_basis(L, 12)[0], L2)
    assert certify(pb)[0] <= 1e-20


def test_pullback_mumford():
    T = NCTorus(AlternatingPairing.trivial(K, 2))
    B = PeriodLattice(T, [[K.scalar(16), K.one()], [K.one(), K.scalar(16)]])
    I, Z = LatticeHom.identity(2), LatticeHom.zero(2, 2)
    L = ThetaMultiplier(B, I, Z, [K.one()] * 2, multiplier_solve_pairing(I, Z, B))
    F = make_mumford(AlternatingPairing.trivial(K, 1))
    B2 = preimage_periods(F, B)
    L2 = multiplier_pullback(F, L, B2)
    assert theta_dimension(L2) == 2
    pb = theta_pullback(F, theta_basis(L, 8)[0], L2)
    assert pb.coeffs and certify(pb)[0] <= 1e-20
    for g in pb.coeffs:
        assert (g[0] + g[1]) % 2 == 0


def test_pullback_external_mult():
    L = elliptic()
    alpha = L.alpha
    F = make_external_mult(alpha, alpha)
    B2 = PeriodLattice(F.source, [[L.periods.table[0][0]], [K.one()]])
    L2 = multiplier_pullback(F, L, B2)
    th = theta_basis(L, 10)[0]
    pb = theta_pullback(F, th, L2)
    assert pb.formal
    assert certify(pb)[0] <= 1e-20
    assert all(g[0] == g[1] for g in pb.coeffs)


def test_pullback_rejects_large_radius():
    L = elliptic()
    F = make_mult_n(L.torus, 2)
    L2 = multiplier_pullback(F, L, L.periods, LatticeHom([[2]]))
    th = theta_basis(L, 10)[0]
    with pytest.raises(PullbackError, match="insufficient input radius"):
        theta_pullback(F, th, L2, radius=25)


def test_pullback_wrong_period_map():
    L = elliptic()
    F = make_mult_n(L.torus, 2)
    with pytest.raises(PullbackError):
        multiplier_pullback(F, L, L.periods, LatticeHom([[1]]))


def test_same_automorphy():
    L = elliptic()
    assert same_automorphy(L, L)
    shifted = ThetaMultiplier(L.periods, LatticeHom([[3]]), LatticeHom([[2]]), L.psi, L.pairing)
    assert multiplier_validate(shifted).valid
    assert same_automorphy(L, shifted)
    flipped = ThetaMultiplier(L.periods, L.h_l, L.h_r, [K.real(-1)], L.pairing)
    assert not same_automorphy(L, flipped)


def test_series_export_is_sorted():
    th = theta_basis(elliptic(), 3)[0]
    data = th.to_json()
    hs = [tuple(h) for h, _ in data["coeffs"]]
    assert hs == sorted(hs) and data["radius"] == 3


def test_jobs_do_not_change_output(rng):
    L = random_config(rng, K, 2, max_det=6)
    a = [t.to_json() for t in theta_basis(L, 5, jobs=1)]
    b = [t.to_json() for t in theta_basis(L, 5, jobs=4)]
    assert a == b


def test_random_configs_dimension_matches_oracle(rng):
    for n in (1, 2, 3):
        for _ in range(4):
            L = random_config(rng, K, n, max_det=12)
            expected = brute_force_index([list(r) for r in L.h_minus.matrix])
            assert theta_dimension(L) == expected
            assert len(theta_basis(L, 1)) == expected


def test_shift_apply():
    L = elliptic()
    x = GroupRingElement(L.torus, {(2,): K.coefficient(1)})
    assert shift_apply(L.periods, (1,), x).close(L.torus.e((2,), K.scalar(16)))
